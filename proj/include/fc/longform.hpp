#pragma once

// Buffered long-audio inference: split the feature stream into overlapping
// buffers, encode each, keep only the central region of every buffer, and
// concatenate. With limited-context attention and wide enough context
// margins the merge is exact.

#include "fc/encoder.hpp"
#include "fc/tensor.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace fc::longform {

struct Buffer {
    std::size_t start, end;            // encoded input range, half-open
    std::size_t keep_start, keep_end;  // surviving region, half-open, inside [start, end)
};

struct BufferPlan {
    std::vector<Buffer> buffers;
    std::size_t buffer_len = 0;
    std::size_t context_left = 0, context_right = 0;

    std::size_t total_frames() const { return buffers.empty() ? 0 : buffers.back().keep_end; }
};

// Keep regions partition [0, T). The last buffer may be shorter; a single
// buffer is produced when T <= buffer_len.
BufferPlan plan_buffers(std::size_t t, std::size_t buffer_len, std::size_t context_left,
                        std::size_t context_right);

// Per-buffer encode, crop to keep regions, concatenate. Buffer starts are
// snapped down to a multiple of the subsampling stride so local and global
// output frames align; seam boundary frames go to the earlier buffer.
Tensor buffered_encode(const Tensor& features, const encoder::EncoderConfig& cfg,
                       const encoder::EncoderWeights& w, const BufferPlan& plan,
                       MacCounter& counter);

struct DecodeResult {
    std::vector<std::uint32_t> tokens;
    std::vector<std::pair<std::size_t, std::size_t>> frame_spans;  // half-open

    std::string to_json() const;
};

// Per-frame argmax, collapse repeats, drop blanks.
DecodeResult ctc_greedy_decode(const Tensor& log_probs, std::uint32_t blank_id);

// Deterministic seeded shuffle (Fisher-Yates over mt19937_64), then
// concatenation with gap_frames of zeros between utterances.
Tensor concat_utterances(const std::vector<Tensor>& features_list, std::size_t gap_frames,
                         std::uint64_t seed);

// The permutation concat_utterances applies for a given seed.
std::vector<std::size_t> shuffle_order(std::size_t n, std::uint64_t seed);

}  // namespace fc::longform
