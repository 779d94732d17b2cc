#include "fc/longform.hpp"

#include <json.hpp>

#include <algorithm>
#include <cstring>
#include <random>

namespace fc::longform {

BufferPlan plan_buffers(std::size_t t, std::size_t buffer_len, std::size_t context_left,
                        std::size_t context_right) {
    if (t == 0 || buffer_len == 0) fail("invalid_plan", "lengths must be positive");
    if (buffer_len <= context_left + context_right)
        fail("invalid_plan", "buffer_len must exceed context_left + context_right");
    BufferPlan plan;
    plan.buffer_len = buffer_len;
    plan.context_left = context_left;
    plan.context_right = context_right;

    if (t <= buffer_len) {
        plan.buffers.push_back({0, t, 0, t});
        return plan;
    }
    const std::size_t step = buffer_len - context_left - context_right;
    for (std::size_t keep_start = 0; keep_start < t; keep_start += step) {
        Buffer b;
        b.keep_start = keep_start;
        b.keep_end = std::min(t, keep_start + step);
        b.start = keep_start > context_left ? keep_start - context_left : 0;
        b.end = std::min(t, b.keep_end + context_right);
        plan.buffers.push_back(b);
    }
    return plan;
}

Tensor buffered_encode(const Tensor& features, const encoder::EncoderConfig& cfg,
                       const encoder::EncoderWeights& w, const BufferPlan& plan,
                       MacCounter& counter) {
    const std::size_t t = features.shape[0], f = features.shape[1];
    if (plan.total_frames() != t)
        fail("invalid_plan", "plan covers " + std::to_string(plan.total_frames()) +
                                 " frames, features have " + std::to_string(t));
    const std::size_t stride = cfg.subsampling.total_factor();
    const std::size_t t_out = encoder::output_length(t, cfg.subsampling);

    Tensor merged({t_out, cfg.d_model});
    std::size_t next_o = 0;
    for (std::size_t k = 0; k < plan.buffers.size(); ++k) {
        const Buffer& b = plan.buffers[k];
        const std::size_t astart = (b.start / stride) * stride;
        Tensor slice({b.end - astart, f});
        std::memcpy(slice.data.data(), features.data.data() + astart * f,
                    slice.data.size() * sizeof(float));
        const Tensor out = encoder::encode(slice, cfg, w, counter);

        // Boundary output frame belongs to the earlier buffer.
        const std::size_t limit = (k + 1 < plan.buffers.size())
                                      ? std::min(t_out, b.keep_end / stride + 1)
                                      : t_out;
        const std::size_t o_base = astart / stride;
        for (std::size_t o = next_o; o < limit; ++o) {
            const std::size_t j = o - o_base;
            if (j >= out.shape[0]) break;  // tail frame emitted by the next buffer
            std::memcpy(merged.row(o), out.row(j), cfg.d_model * sizeof(float));
            next_o = o + 1;
        }
    }
    if (next_o != t_out) fail("internal", "merged output incomplete");  // invariant
    return merged;
}

DecodeResult ctc_greedy_decode(const Tensor& log_probs, std::uint32_t blank_id) {
    if (log_probs.rank() != 2) fail("shape_mismatch", "log_probs must be [T x V]");
    const std::size_t t = log_probs.shape[0], v = log_probs.shape[1];
    if (v < 2) fail("invalid_config", "vocabulary needs at least 2 entries");
    if (blank_id >= v) fail("invalid_config", "blank_id outside vocabulary");

    DecodeResult result;
    std::size_t run_start = 0;
    std::uint32_t prev = blank_id;
    bool in_run = false;
    auto flush = [&](std::size_t end) {
        if (in_run) {
            result.tokens.push_back(prev);
            result.frame_spans.emplace_back(run_start, end);
            in_run = false;
        }
    };
    for (std::size_t i = 0; i < t; ++i) {
        const float* row = log_probs.row(i);
        std::uint32_t best = 0;
        for (std::size_t j = 1; j < v; ++j)
            if (row[j] > row[best]) best = static_cast<std::uint32_t>(j);
        if (best == blank_id) {
            flush(i);
            prev = blank_id;
        } else if (in_run && best == prev) {
            // extend run
        } else {
            flush(i);
            prev = best;
            run_start = i;
            in_run = true;
        }
    }
    flush(t);
    return result;
}

std::vector<std::size_t> shuffle_order(std::size_t n, std::uint64_t seed) {
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::mt19937_64 rng(seed);
    for (std::size_t i = n; i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(rng() % i);
        std::swap(order[i - 1], order[j]);
    }
    return order;
}

Tensor concat_utterances(const std::vector<Tensor>& features_list, std::size_t gap_frames,
                         std::uint64_t seed) {
    if (features_list.empty()) fail("invalid_input", "no utterances to concatenate");
    const std::size_t f = features_list.front().shape[1];
    std::size_t total = 0;
    for (const auto& u : features_list) {
        if (u.rank() != 2 || u.shape[1] != f)
            fail("shape_mismatch", "utterances disagree on feature_dim");
        total += u.shape[0];
    }
    total += gap_frames * (features_list.size() - 1);

    const auto order = shuffle_order(features_list.size(), seed);
    Tensor out({total, f});
    std::size_t row = 0;
    for (std::size_t i = 0; i < order.size(); ++i) {
        if (i > 0) row += gap_frames;  // silence gap stays zero
        const Tensor& u = features_list[order[i]];
        std::memcpy(out.data.data() + row * f, u.data.data(), u.data.size() * sizeof(float));
        row += u.shape[0];
    }
    return out;
}

std::string DecodeResult::to_json() const {
    nlohmann::json j;
    j["tokens"] = tokens;
    j["frame_spans"] = nlohmann::json::array();
    for (const auto& [s, e] : frame_spans) j["frame_spans"].push_back({s, e});
    return j.dump(2);
}

}  // namespace fc::longform
