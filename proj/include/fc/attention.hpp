#pragma once

// Self-attention backends: full relative-position MHSA, limited-context
// (sliding window) MHSA computed over overlapping chunks, and limited
// context with a single global attention token that has its own
// projections. Relative positions follow the Transformer-XL scheme with
// learned content/position biases u and v.

#include "fc/tensor.hpp"

#include <cstdint>
#include <vector>

namespace fc::attention {

enum class Kind { full, limited, limited_with_global };

struct Context {
    Kind kind = Kind::full;
    std::size_t window_left = 128;
    std::size_t window_right = 128;
};

struct AttentionParams {
    Tensor wq, wk, wv, wo;  // [D x D]
    Tensor bq, bk, bv, bo;  // [D]
    Tensor pos_proj;        // [D x D], applied to sinusoidal relative embeddings
    Tensor u_bias, v_bias;  // [D], per-head content/position biases

    bool has_global = false;
    Tensor global_wq, global_wk, global_wv;  // [D x D], global-token path
    Tensor global_embed;                     // [D], learned global-token input

    std::size_t dim() const { return wq.shape.empty() ? 0 : wq.shape[0]; }
};

// Query-tile geometry for the chunked limited-attention path. Each chunk
// covers a contiguous run of queries plus the key span those queries can
// reach; out-of-window pairs inside the rectangle are masked.
struct ChunkSpan {
    std::size_t q_begin, q_end;  // half-open query range
    std::size_t k_begin, k_end;  // half-open key range
};

std::vector<ChunkSpan> chunk_spans(std::size_t t, std::size_t window_left,
                                   std::size_t window_right);

// Score-rectangle pair count over all chunks (every pair costs a multiply
// whether or not it survives masking).
std::uint64_t limited_rect_pairs(std::size_t t, std::size_t window_left, std::size_t window_right);

// In-window pair count: sum over queries of the clipped window size.
std::uint64_t limited_window_pairs(std::size_t t, std::size_t window_left, std::size_t window_right);

// Sinusoidal embedding of a (possibly negative) relative offset, length d.
void relative_embedding(std::int64_t offset, std::size_t d, float* out);

Tensor full_mhsa(const Tensor& x, const AttentionParams& params, std::size_t heads,
                 MacCounter& counter);

Tensor limited_mhsa(const Tensor& x, const AttentionParams& params, std::size_t heads,
                    const Context& ctx, MacCounter& counter);

Tensor limited_global_mhsa(const Tensor& x, const AttentionParams& params, std::size_t heads,
                           const Context& ctx, MacCounter& counter);

// Dispatch on ctx.kind.
Tensor mhsa(const Tensor& x, const AttentionParams& params, std::size_t heads, const Context& ctx,
            MacCounter& counter);

// Direct reference: materialize the full T x T score matrix, mask entries
// outside the window, softmax, mix. No chunking. Used by the equivalence
// checker as the comparison baseline for the chunked path.
Tensor masked_reference_mhsa(const Tensor& x, const AttentionParams& params, std::size_t heads,
                             std::size_t window_left, std::size_t window_right,
                             MacCounter& counter);

// Copy wq/wk/wv into the global projections and install a zero global
// embedding. Rejects params that already carry a global path.
AttentionParams init_global_from_local(const AttentionParams& params);

}  // namespace fc::attention
