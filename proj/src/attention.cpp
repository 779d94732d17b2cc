#include "fc/attention.hpp"

#include "fc/kernels.hpp"
#include "fc/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace fc::attention {

namespace {

constexpr float kMasked = std::numeric_limits<float>::lowest();

void validate(const Tensor& x, const AttentionParams& p, std::size_t heads) {
    if (x.rank() != 2) fail("shape_mismatch", "attention input must be [T x D]");
    const std::size_t d = x.shape[1];
    if (x.shape[0] < 1) fail("shape_mismatch", "attention needs T >= 1");
    if (heads == 0 || d % heads != 0)
        fail("invalid_config", "d_model " + std::to_string(d) + " not divisible by " +
                                   std::to_string(heads) + " heads");
    if (p.dim() != d) fail("shape_mismatch", "attention params sized for different d_model");
}

// Same row softmax as ops::softmax; shared so the chunked and dense paths
// agree bit-for-bit on identical rows.
void softmax_row(float* s, std::size_t n) {
    float mx = s[0];
    for (std::size_t i = 1; i < n; ++i) mx = std::max(mx, s[i]);
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        s[i] = std::exp(s[i] - mx);
        sum += s[i];
    }
    const float inv = static_cast<float>(1.0 / sum);
    for (std::size_t i = 0; i < n; ++i) s[i] *= inv;
}

// Projected relative-position table for offsets lo..hi inclusive.
// Row index = offset - lo.
Tensor position_table(std::int64_t lo, std::int64_t hi, std::size_t d, const Tensor& pos_proj,
                      MacCounter& counter) {
    const std::size_t rows = static_cast<std::size_t>(hi - lo + 1);
    Tensor r({rows, d});
    for (std::size_t i = 0; i < rows; ++i)
        relative_embedding(lo + static_cast<std::int64_t>(i), d, r.row(i));
    return ops::matmul(r, pos_proj, counter, "attn_pos_proj");
}

struct Projected {
    Tensor q, k, v;
};

Projected project_qkv(const Tensor& x, const AttentionParams& p, MacCounter& counter) {
    Projected out;
    out.q = ops::linear(x, p.wq, p.bq, counter, "attn_proj");
    out.k = ops::linear(x, p.wk, p.bk, counter, "attn_proj");
    out.v = ops::linear(x, p.wv, p.bv, counter, "attn_proj");
    return out;
}

}  // namespace

void relative_embedding(std::int64_t offset, std::size_t d, float* out) {
    const double pos = static_cast<double>(offset);
    for (std::size_t i = 0; i < d; i += 2) {
        const double freq = std::pow(10000.0, -static_cast<double>(i) / static_cast<double>(d));
        out[i] = static_cast<float>(std::sin(pos * freq));
        if (i + 1 < d) out[i + 1] = static_cast<float>(std::cos(pos * freq));
    }
}

std::vector<ChunkSpan> chunk_spans(std::size_t t, std::size_t wl, std::size_t wr) {
    const std::size_t chunk = std::max<std::size_t>(1, wl + wr);
    std::vector<ChunkSpan> spans;
    for (std::size_t q0 = 0; q0 < t; q0 += chunk) {
        ChunkSpan s;
        s.q_begin = q0;
        s.q_end = std::min(t, q0 + chunk);
        s.k_begin = q0 > wl ? q0 - wl : 0;
        s.k_end = std::min(t, s.q_end + wr);
        spans.push_back(s);
    }
    return spans;
}

std::uint64_t limited_rect_pairs(std::size_t t, std::size_t wl, std::size_t wr) {
    std::uint64_t pairs = 0;
    for (const auto& s : chunk_spans(t, wl, wr))
        pairs += static_cast<std::uint64_t>(s.q_end - s.q_begin) * (s.k_end - s.k_begin);
    return pairs;
}

std::uint64_t limited_window_pairs(std::size_t t, std::size_t wl, std::size_t wr) {
    std::uint64_t pairs = 0;
    for (std::size_t q = 0; q < t; ++q) {
        const std::size_t lo = q > wl ? q - wl : 0;
        const std::size_t hi = std::min(t - 1, q + wr);
        pairs += hi - lo + 1;
    }
    return pairs;
}

Tensor masked_reference_mhsa(const Tensor& x, const AttentionParams& p, std::size_t heads,
                             std::size_t wl, std::size_t wr, MacCounter& counter) {
    validate(x, p, heads);
    const std::size_t t = x.shape[0], d = x.shape[1], hd = d / heads;
    const float scale = 1.0f / std::sqrt(static_cast<float>(hd));

    Projected qkv = project_qkv(x, p, counter);
    const Tensor rtab = position_table(-static_cast<std::int64_t>(wr),
                                       static_cast<std::int64_t>(wl), d, p.pos_proj, counter);

    Tensor ctxv({t, d});
    std::vector<float> qu(hd), qv(hd), scores(t);
    std::uint64_t score_macs = 0, ctx_macs = 0;
    for (std::size_t h = 0; h < heads; ++h) {
        const std::size_t off = h * hd;
        for (std::size_t qi = 0; qi < t; ++qi) {
            const float* qrow = qkv.q.row(qi) + off;
            for (std::size_t i = 0; i < hd; ++i) {
                qu[i] = qrow[i] + p.u_bias.data[off + i];
                qv[i] = qrow[i] + p.v_bias.data[off + i];
            }
            const std::size_t lo = qi > wl ? qi - wl : 0;
            const std::size_t hi = std::min(t - 1, qi + wr);
            for (std::size_t j = 0; j < t; ++j) {
                if (j < lo || j > hi) {
                    scores[j] = kMasked;
                    continue;
                }
                const float content = kernels::dot(qu.data(), qkv.k.row(j) + off, hd);
                // offset qi-j lies in [-wr, wl]; table row = offset + wr
                const std::size_t ridx =
                    static_cast<std::size_t>(static_cast<std::int64_t>(qi) -
                                             static_cast<std::int64_t>(j) +
                                             static_cast<std::int64_t>(wr));
                const float pos = kernels::dot(qv.data(), rtab.row(ridx) + off, hd);
                scores[j] = (content + pos) * scale;
                score_macs += 2 * hd;
            }
            softmax_row(scores.data(), t);
            float* orow = ctxv.row(qi) + off;
            for (std::size_t j = lo; j <= hi; ++j) {
                kernels::axpy(scores[j], qkv.v.row(j) + off, orow, hd);
                ctx_macs += hd;
            }
        }
    }
    counter.add("attn_scores", score_macs);
    counter.add("attn_context", ctx_macs);
    return ops::linear(ctxv, p.wo, p.bo, counter, "attn_proj");
}

Tensor full_mhsa(const Tensor& x, const AttentionParams& p, std::size_t heads,
                 MacCounter& counter) {
    validate(x, p, heads);
    const std::size_t t = x.shape[0];
    return masked_reference_mhsa(x, p, heads, t - 1, t - 1, counter);
}

Tensor limited_mhsa(const Tensor& x, const AttentionParams& p, std::size_t heads,
                    const Context& ctx, MacCounter& counter) {
    validate(x, p, heads);
    const std::size_t t = x.shape[0], d = x.shape[1], hd = d / heads;
    const std::size_t wl = ctx.window_left, wr = ctx.window_right;
    const float scale = 1.0f / std::sqrt(static_cast<float>(hd));

    Projected qkv = project_qkv(x, p, counter);
    const Tensor rtab = position_table(-static_cast<std::int64_t>(wr),
                                       static_cast<std::int64_t>(wl), d, p.pos_proj, counter);

    Tensor ctxv({t, d});
    std::vector<float> qu(hd), qv(hd);
    std::uint64_t score_macs = 0, ctx_macs = 0;
    const auto spans = chunk_spans(t, wl, wr);
    for (std::size_t h = 0; h < heads; ++h) {
        const std::size_t off = h * hd;
        for (const auto& span : spans) {
            const std::size_t klen = span.k_end - span.k_begin;
            std::vector<float> scores(klen);
            for (std::size_t qi = span.q_begin; qi < span.q_end; ++qi) {
                const float* qrow = qkv.q.row(qi) + off;
                for (std::size_t i = 0; i < hd; ++i) {
                    qu[i] = qrow[i] + p.u_bias.data[off + i];
                    qv[i] = qrow[i] + p.v_bias.data[off + i];
                }
                const std::size_t lo = qi > wl ? qi - wl : 0;
                const std::size_t hi = std::min(t - 1, qi + wr);
                for (std::size_t j = span.k_begin; j < span.k_end; ++j) {
                    // Content term is computed for the whole rectangle; the
                    // position term and mask follow the exact window.
                    const float content = kernels::dot(qu.data(), qkv.k.row(j) + off, hd);
                    score_macs += hd;
                    if (j < lo || j > hi) {
                        scores[j - span.k_begin] = kMasked;
                        continue;
                    }
                    const std::size_t ridx =
                        static_cast<std::size_t>(static_cast<std::int64_t>(qi) -
                                                 static_cast<std::int64_t>(j) +
                                                 static_cast<std::int64_t>(wr));
                    const float pos = kernels::dot(qv.data(), rtab.row(ridx) + off, hd);
                    score_macs += hd;
                    scores[j - span.k_begin] = (content + pos) * scale;
                }
                softmax_row(scores.data(), klen);
                float* orow = ctxv.row(qi) + off;
                for (std::size_t j = lo; j <= hi; ++j) {
                    kernels::axpy(scores[j - span.k_begin], qkv.v.row(j) + off, orow, hd);
                    ctx_macs += hd;
                }
            }
        }
    }
    counter.add("attn_scores", score_macs);
    counter.add("attn_context", ctx_macs);
    return ops::linear(ctxv, p.wo, p.bo, counter, "attn_proj");
}

Tensor limited_global_mhsa(const Tensor& x, const AttentionParams& p, std::size_t heads,
                           const Context& ctx, MacCounter& counter) {
    validate(x, p, heads);
    if (!p.has_global) fail("missing_global", "global projections absent; run init_global_from_local");
    const std::size_t t = x.shape[0], d = x.shape[1], hd = d / heads;
    const std::size_t wl = ctx.window_left, wr = ctx.window_right;
    const float scale = 1.0f / std::sqrt(static_cast<float>(hd));

    // Extended sequence: row 0 is the global token, rows 1..T the input. The
    // global token state is the learned embedding plus the sequence mean, so
    // every query sees a whole-input summary through its key and value.
    Tensor ext({t + 1, d});
    for (std::size_t j = 0; j < d; ++j) {
        double mean = 0.0;
        for (std::size_t i = 0; i < t; ++i) mean += x.at2(i, j);
        ext.data[j] = p.global_embed.data[j] + static_cast<float>(mean / static_cast<double>(t));
    }
    std::copy(x.data.begin(), x.data.end(), ext.data.begin() + d);

    Projected qkv = project_qkv(ext, p, counter);
    Tensor qg = ops::matmul(ext, p.global_wq, counter, "attn_global_proj");
    Tensor kg = ops::matmul(ext, p.global_wk, counter, "attn_global_proj");
    Tensor vg = ops::matmul(ext, p.global_wv, counter, "attn_global_proj");

    const Tensor rtab = position_table(-static_cast<std::int64_t>(wr),
                                       static_cast<std::int64_t>(wl), d, p.pos_proj, counter);

    Tensor ctxv({t + 1, d});
    std::vector<float> qu(hd), qv(hd);
    std::uint64_t score_macs = 0, ctx_macs = 0;
    const auto spans = chunk_spans(t, wl, wr);
    for (std::size_t h = 0; h < heads; ++h) {
        const std::size_t off = h * hd;

        // Global row: attends to every position (including itself) through
        // the global projection set; no positional terms.
        {
            std::vector<float> gscores(t + 1);
            for (std::size_t j = 0; j <= t; ++j) {
                gscores[j] = kernels::dot(qg.row(0) + off, kg.row(j) + off, hd) * scale;
                score_macs += hd;
            }
            softmax_row(gscores.data(), t + 1);
            float* orow = ctxv.row(0) + off;
            for (std::size_t j = 0; j <= t; ++j) {
                kernels::axpy(gscores[j], vg.row(j) + off, orow, hd);
                ctx_macs += hd;
            }
        }

        // Local rows: window scores among locals plus one extra column for
        // the global token, all inside one softmax.
        for (const auto& span : spans) {
            const std::size_t klen = span.k_end - span.k_begin;
            std::vector<float> scores(klen + 1);  // slot 0 = global column
            for (std::size_t qi = span.q_begin; qi < span.q_end; ++qi) {
                const std::size_t row = qi + 1;  // extended index
                const float* qrow = qkv.q.row(row) + off;
                for (std::size_t i = 0; i < hd; ++i) {
                    qu[i] = qrow[i] + p.u_bias.data[off + i];
                    qv[i] = qrow[i] + p.v_bias.data[off + i];
                }
                scores[0] = kernels::dot(qg.row(row) + off, kg.row(0) + off, hd) * scale;
                score_macs += hd;
                const std::size_t lo = qi > wl ? qi - wl : 0;
                const std::size_t hi = std::min(t - 1, qi + wr);
                for (std::size_t j = span.k_begin; j < span.k_end; ++j) {
                    const float content = kernels::dot(qu.data(), qkv.k.row(j + 1) + off, hd);
                    score_macs += hd;
                    if (j < lo || j > hi) {
                        scores[1 + j - span.k_begin] = kMasked;
                        continue;
                    }
                    const std::size_t ridx =
                        static_cast<std::size_t>(static_cast<std::int64_t>(qi) -
                                                 static_cast<std::int64_t>(j) +
                                                 static_cast<std::int64_t>(wr));
                    const float pos = kernels::dot(qv.data(), rtab.row(ridx) + off, hd);
                    score_macs += hd;
                    scores[1 + j - span.k_begin] = (content + pos) * scale;
                }
                softmax_row(scores.data(), klen + 1);
                float* orow = ctxv.row(row) + off;
                kernels::axpy(scores[0], vg.row(0) + off, orow, hd);
                ctx_macs += hd;
                for (std::size_t j = lo; j <= hi; ++j) {
                    kernels::axpy(scores[1 + j - span.k_begin], qkv.v.row(j + 1) + off, orow, hd);
                    ctx_macs += hd;
                }
            }
        }
    }
    counter.add("attn_scores", score_macs);
    counter.add("attn_context", ctx_macs);
    Tensor out_ext = ops::linear(ctxv, p.wo, p.bo, counter, "attn_proj");

    // Drop the global token's own output row.
    Tensor out({t, d});
    std::copy(out_ext.data.begin() + d, out_ext.data.end(), out.data.begin());
    return out;
}

Tensor mhsa(const Tensor& x, const AttentionParams& p, std::size_t heads, const Context& ctx,
            MacCounter& counter) {
    switch (ctx.kind) {
        case Kind::full: return full_mhsa(x, p, heads, counter);
        case Kind::limited: return limited_mhsa(x, p, heads, ctx, counter);
        case Kind::limited_with_global: return limited_global_mhsa(x, p, heads, ctx, counter);
    }
    fail("invalid_config", "unknown attention kind");
}

AttentionParams init_global_from_local(const AttentionParams& params) {
    if (params.has_global)
        fail("invalid_state", "global projections already present");
    AttentionParams out = params;
    out.has_global = true;
    out.global_wq = params.wq;
    out.global_wk = params.wk;
    out.global_wv = params.wv;
    out.global_embed = Tensor({params.dim()});
    return out;
}

}  // namespace fc::attention
