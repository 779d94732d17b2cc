#include "fc/profiler.hpp"

#include "fc/attention.hpp"
#include "fc/ops.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace fc::profiler {

namespace {

using encoder::EncoderConfig;
using encoder::LayerType;
using encoder::SubsamplingSchema;

std::uint64_t u64(std::size_t v) { return static_cast<std::uint64_t>(v); }

struct SubsampleShape {
    std::size_t t_out = 0;
    std::size_t mel_out = 0;
    std::size_t channels = 0;
};

// Per-stage profile walk shared by param and MAC accounting.
void profile_subsample(const EncoderConfig& cfg, std::size_t t_in, bool with_macs,
                       std::vector<LayerProfile>& out, SubsampleShape& shape) {
    std::size_t len = t_in;
    std::size_t mel = cfg.feature_dim;
    std::size_t in_ch = 1;
    for (std::size_t i = 0; i < cfg.subsampling.stages.size(); ++i) {
        const auto& st = cfg.subsampling.stages[i];
        const std::size_t len_out = ops::conv_out_extent(len, st.kernel_h, st.stride, st.pad);
        const std::size_t mel_out = ops::conv_out_extent(mel, st.kernel_w, st.stride, st.pad);
        LayerProfile lp;
        lp.name = "subsample.stage" + std::to_string(i);
        const std::uint64_t spatial = u64(len_out) * mel_out;
        const std::uint64_t kvol = u64(st.kernel_h) * st.kernel_w;
        if (st.type == LayerType::full_conv2d) {
            lp.params = u64(st.channels) * in_ch * kvol + st.channels;
            if (with_macs) lp.macs = u64(st.channels) * in_ch * kvol * spatial;
        } else {
            lp.params = u64(in_ch) * kvol + in_ch + u64(st.channels) * in_ch + st.channels;
            if (with_macs) lp.macs = u64(in_ch) * kvol * spatial + u64(st.channels) * in_ch * spatial;
        }
        lp.peak_activation_bytes = 4 * (u64(in_ch) * len * mel + u64(st.channels) * spatial);
        out.push_back(lp);
        len = len_out;
        mel = mel_out;
        in_ch = st.channels;
    }
    const std::size_t flat = in_ch * mel;
    LayerProfile proj;
    proj.name = "subsample.proj";
    proj.params = u64(flat) * cfg.d_model + cfg.d_model;
    if (with_macs) proj.macs = u64(len) * flat * cfg.d_model;
    proj.peak_activation_bytes = 4 * (u64(len) * flat + u64(len) * cfg.d_model);
    out.push_back(proj);
    shape = {len, mel, in_ch};
}

std::uint64_t attention_params(const EncoderConfig& cfg) {
    const std::uint64_t d = cfg.d_model;
    std::uint64_t p = 5 * d * d + 6 * d;  // wq wk wv wo pos_proj + 4 biases + u,v
    if (cfg.attention.kind == attention::Kind::limited_with_global)
        p += 3 * d * d + d;  // global projections + global embedding
    return p;
}

// Mirrors the counter increments in src/attention.cpp.
std::uint64_t attention_macs(const EncoderConfig& cfg, std::size_t t) {
    const std::uint64_t d = cfg.d_model;
    const std::size_t wl = cfg.attention.window_left, wr = cfg.attention.window_right;
    switch (cfg.attention.kind) {
        case attention::Kind::full: {
            const std::uint64_t pairs = u64(t) * t;
            return 4 * u64(t) * d * d + (2 * u64(t) - 1) * d * d + 3 * pairs * d;
        }
        case attention::Kind::limited: {
            const std::uint64_t rect = attention::limited_rect_pairs(t, wl, wr);
            const std::uint64_t window = attention::limited_window_pairs(t, wl, wr);
            return 4 * u64(t) * d * d + u64(wl + wr + 1) * d * d + (rect + 2 * window) * d;
        }
        case attention::Kind::limited_with_global: {
            const std::uint64_t rect = attention::limited_rect_pairs(t, wl, wr);
            const std::uint64_t window = attention::limited_window_pairs(t, wl, wr);
            const std::uint64_t te = u64(t) + 1;
            const std::uint64_t proj = 7 * te * d * d + u64(wl + wr + 1) * d * d;
            const std::uint64_t scores = (te + u64(t) + rect + window) * d;
            const std::uint64_t ctx = (te + u64(t) + window) * d;
            return proj + scores + ctx;
        }
    }
    return 0;
}

std::uint64_t score_matrix_bytes(const EncoderConfig& cfg, std::size_t t) {
    const std::uint64_t h = cfg.n_heads;
    switch (cfg.attention.kind) {
        case attention::Kind::full:
            return 4 * h * u64(t) * t;
        case attention::Kind::limited:
            return 4 * h * u64(t) * (cfg.attention.window_left + cfg.attention.window_right + 1);
        case attention::Kind::limited_with_global:
            return 4 * h *
                   (u64(t) * (cfg.attention.window_left + cfg.attention.window_right + 1) +
                    2 * u64(t) + 1);
    }
    return 0;
}

LayerProfile profile_block(const EncoderConfig& cfg, std::size_t t, bool with_macs,
                           const std::string& name) {
    const std::uint64_t d = cfg.d_model;
    const std::uint64_t e = cfg.ffn_expansion;
    const std::uint64_t k = cfg.conv_kernel;
    LayerProfile lp;
    lp.name = name;

    const std::uint64_t ffn_params = 2 * d + (d * e * d + e * d) + (e * d * d + d);
    const std::uint64_t conv_params =
        2 * d + (d * 2 * d + 2 * d) + (d * k + d) + 2 * d + (d * d + d);
    lp.params = 2 * ffn_params + 2 * d + attention_params(cfg) + conv_params + 2 * d;

    if (with_macs) {
        const std::uint64_t ffn_macs = 2 * e * u64(t) * d * d;  // per half-step FFN
        const std::uint64_t conv_macs = 2 * u64(t) * d * d + d * k * u64(t) + u64(t) * d * d;
        lp.macs = 2 * ffn_macs + attention_macs(cfg, t) + conv_macs;
    }
    lp.peak_activation_bytes =
        4 * u64(t) * d * (2 + e) + score_matrix_bytes(cfg, t);
    return lp;
}

void finalize(ProfileReport& r) {
    r.totals.name = "total";
    r.totals.params = r.totals.macs = r.totals.peak_activation_bytes = 0;
    for (const auto& lp : r.per_layer) {
        r.totals.params += lp.params;
        r.totals.macs += lp.macs;
        r.totals.peak_activation_bytes =
            std::max(r.totals.peak_activation_bytes, lp.peak_activation_bytes);
    }
}

}  // namespace

std::uint64_t count_params(const encoder::EncoderConfig& cfg) {
    encoder::validate_config(cfg);
    std::vector<LayerProfile> layers;
    SubsampleShape shape;
    // Any valid length works for a parameter walk.
    profile_subsample(cfg, encoder::min_input_length(cfg.subsampling), false, layers, shape);
    std::uint64_t total = 0;
    for (const auto& lp : layers) total += lp.params;
    if (cfg.n_layers > 0) total += cfg.n_layers * profile_block(cfg, 1, false, "block").params;
    return total;
}

ProfileReport count_macs(const encoder::EncoderConfig& cfg, std::size_t t_in,
                         const std::string& schema_name) {
    encoder::validate_config(cfg);
    ProfileReport r;
    r.schema_name = schema_name;
    r.input_duration_s = static_cast<double>(t_in) * cfg.frame_hop_ms / 1000.0;
    SubsampleShape shape;
    profile_subsample(cfg, t_in, true, r.per_layer, shape);
    for (std::size_t l = 0; l < cfg.n_layers; ++l)
        r.per_layer.push_back(profile_block(cfg, shape.t_out, true, "block" + std::to_string(l)));
    finalize(r);
    return r;
}

std::vector<std::string> reference_schema_names() {
    return {"conformer", "squeezeformer", "efficient_conformer", "fast_conformer"};
}

namespace {

// Analytical block at an arbitrary sequence length for the profile-only
// schedules. score_divisor models EfficientConformer grouped attention.
LayerProfile reference_block(std::size_t t, std::size_t d, std::size_t e, std::size_t k,
                             std::size_t heads, std::uint64_t score_divisor,
                             const std::string& name) {
    EncoderConfig cfg;
    cfg.subsampling = encoder::build_config(encoder::Preset::A0).subsampling;
    cfg.d_model = d;
    cfg.ffn_expansion = e;
    cfg.conv_kernel = k;
    cfg.n_heads = heads;
    cfg.attention.kind = attention::Kind::full;
    LayerProfile lp = profile_block(cfg, t, true, name);
    if (score_divisor > 1) {
        const std::uint64_t scores = 3 * u64(t) * t * d;
        lp.macs -= scores - scores / score_divisor;
    }
    return lp;
}

LayerProfile reference_layer(const std::string& name, std::uint64_t params, std::uint64_t macs) {
    LayerProfile lp;
    lp.name = name;
    lp.params = params;
    lp.macs = macs;
    return lp;
}

std::size_t half(std::size_t len) { return ops::conv_out_extent(len, 3, 2, 1); }

}  // namespace

ProfileReport profile_reference_schemas(const std::string& name, std::size_t t_in) {
    const std::size_t d = 512, heads = 8, e = 4;
    if (name == "conformer") {
        ProfileReport r = count_macs(encoder::build_config(encoder::Preset::A0), t_in, name);
        return r;
    }
    if (name == "fast_conformer") {
        ProfileReport r = count_macs(encoder::build_config(encoder::Preset::A4), t_in, name);
        return r;
    }
    if (name == "efficient_conformer") {
        // Progressive 2/4/8: strided stages between the block groups; the
        // first group models grouped attention (group size 3).
        ProfileReport r;
        r.schema_name = name;
        r.input_duration_s = t_in / 100.0;
        const std::size_t l1 = half(t_in), l2 = half(l1), l3 = half(l2);
        const std::size_t mel1 = 40, stem_ch = 256, k = 15;
        r.per_layer.push_back(reference_layer("stem.conv", u64(stem_ch) * 9 + stem_ch,
                                              u64(stem_ch) * 9 * l1 * mel1));
        const std::uint64_t flat = u64(stem_ch) * mel1;
        r.per_layer.push_back(
            reference_layer("stem.proj", flat * d + d, u64(l1) * flat * d));
        for (std::size_t i = 0; i < 5; ++i)
            r.per_layer.push_back(reference_block(l1, d, e, k, heads, 3, "block_2x_" + std::to_string(i)));
        r.per_layer.push_back(reference_layer("down.mid1", u64(d) * 3 + d + u64(d) * d + d,
                                              u64(d) * 3 * l2 + u64(d) * d * l2));
        for (std::size_t i = 0; i < 6; ++i)
            r.per_layer.push_back(reference_block(l2, d, e, k, heads, 1, "block_4x_" + std::to_string(i)));
        r.per_layer.push_back(reference_layer("down.mid2", u64(d) * 3 + d + u64(d) * d + d,
                                              u64(d) * 3 * l3 + u64(d) * d * l3));
        for (std::size_t i = 0; i < 6; ++i)
            r.per_layer.push_back(reference_block(l3, d, e, k, heads, 1, "block_8x_" + std::to_string(i)));
        finalize(r);
        return r;
    }
    if (name == "squeezeformer") {
        // Temporal U-Net 2/4/8/4: 4x front-end, extra mid downsampling to 8x,
        // upsampling at the end restores 4x resolution.
        ProfileReport r;
        r.schema_name = name;
        r.input_duration_s = t_in / 100.0;
        const std::size_t l1 = half(t_in), l2 = half(l1), l3 = half(l2);
        const std::size_t mel1 = 40, mel2 = 20, ch = 256, k = 31;
        r.per_layer.push_back(
            reference_layer("stem.conv", u64(ch) * 9 + ch, u64(ch) * 9 * l1 * mel1));
        r.per_layer.push_back(reference_layer(
            "stem.dwsep", u64(ch) * 9 + ch + u64(ch) * ch + ch,
            u64(ch) * 9 * l2 * mel2 + u64(ch) * ch * l2 * mel2));
        const std::uint64_t flat = u64(ch) * mel2;
        r.per_layer.push_back(reference_layer("stem.proj", flat * d + d, u64(l2) * flat * d));
        for (std::size_t i = 0; i < 9; ++i)
            r.per_layer.push_back(reference_block(l2, d, e, k, heads, 1, "block_4x_" + std::to_string(i)));
        r.per_layer.push_back(reference_layer("down.mid", u64(d) * 3 + d + u64(d) * d + d,
                                              u64(d) * 3 * l3 + u64(d) * d * l3));
        for (std::size_t i = 0; i < 8; ++i)
            r.per_layer.push_back(reference_block(l3, d, e, k, heads, 1, "block_8x_" + std::to_string(i)));
        r.per_layer.push_back(
            reference_layer("upsample", u64(d) * d + d, u64(l2) * d * d));
        finalize(r);
        return r;
    }
    fail("invalid_schema", "unknown schema '" + name + "' (valid: conformer squeezeformer " +
                               "efficient_conformer fast_conformer)");
}

std::uint64_t memory_model_at(const encoder::EncoderConfig& cfg, std::size_t t_out) {
    const std::uint64_t weights = count_params(cfg) * 4;
    const std::uint64_t block_act = 4 * u64(t_out) * cfg.d_model * (2 + cfg.ffn_expansion);
    return weights + block_act + score_matrix_bytes(cfg, t_out);
}

std::uint64_t memory_model(const encoder::EncoderConfig& cfg, std::size_t t_in) {
    return memory_model_at(cfg, encoder::output_length(t_in, cfg.subsampling));
}

double max_duration_minutes(const encoder::EncoderConfig& cfg, std::uint64_t budget_bytes) {
    const std::size_t min_len = encoder::min_input_length(cfg.subsampling);
    if (memory_model(cfg, min_len) > budget_bytes)
        fail("budget_too_small", "memory budget below the model's weight footprint");
    std::size_t lo = min_len;                     // fits
    std::size_t hi = std::size_t{1} << 32;        // search cap (~1.3 years of audio)
    if (memory_model(cfg, hi) <= budget_bytes) lo = hi;
    while (hi - lo > 1) {
        const std::size_t mid = lo + (hi - lo) / 2;
        if (memory_model(cfg, mid) <= budget_bytes) lo = mid;
        else hi = mid;
    }
    return static_cast<double>(lo) * cfg.frame_hop_ms / 60000.0;
}

Feasibility ctc_feasibility(std::size_t t_in, const encoder::SubsamplingSchema& schema,
                            std::uint64_t target_len) {
    std::uint64_t out_len = 0;
    try {
        out_len = encoder::output_length(t_in, schema);
    } catch (const Error&) {
        out_len = 0;  // too short to encode at all
    }
    Feasibility f;
    f.feasible = out_len >= target_len;
    f.deficit = f.feasible ? 0 : target_len - out_len;
    return f;
}

ManifestStats analyze_manifest(const std::string& path, const encoder::SubsamplingSchema& schema,
                               std::size_t frame_hop_ms, const std::string& length_field) {
    std::ifstream in(path);
    if (!in) fail("io_error", "cannot open manifest '" + path + "'");
    ManifestStats stats;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        nlohmann::json rec;
        try {
            rec = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            fail("bad_manifest", path + ":" + std::to_string(lineno) + ": " + e.what());
        }
        if (!rec.contains("duration_s") || !rec.contains(length_field))
            fail("bad_manifest", path + ":" + std::to_string(lineno) +
                                     ": record needs duration_s and " + length_field);
        const double duration = rec["duration_s"].get<double>();
        const std::uint64_t target = rec[length_field].get<std::uint64_t>();
        const auto frames = static_cast<std::size_t>(std::llround(duration * 1000.0 / frame_hop_ms));
        const Feasibility f = ctc_feasibility(frames, schema, target);
        ++stats.records;
        if (!f.feasible) {
            ++stats.infeasible;
            std::size_t bucket = 0;
            for (std::uint64_t v = f.deficit; v > 1; v >>= 1) ++bucket;
            if (stats.deficit_histogram.size() <= bucket) stats.deficit_histogram.resize(bucket + 1);
            ++stats.deficit_histogram[bucket];
        }
    }
    stats.infeasible_fraction =
        stats.records == 0 ? 0.0 : static_cast<double>(stats.infeasible) / stats.records;
    return stats;
}

std::string ProfileReport::to_json() const {
    nlohmann::json j;
    j["schema_name"] = schema_name;
    j["input_duration_s"] = input_duration_s;
    j["per_layer"] = nlohmann::json::array();
    for (const auto& lp : per_layer) {
        j["per_layer"].push_back({{"name", lp.name},
                                  {"params", lp.params},
                                  {"macs", lp.macs},
                                  {"peak_bytes", lp.peak_activation_bytes}});
    }
    j["totals"] = {{"params", totals.params},
                   {"macs", totals.macs},
                   {"peak_bytes", totals.peak_activation_bytes}};
    return j.dump(2);
}

std::string ProfileReport::to_table() const {
    std::ostringstream out;
    out << "schema: " << schema_name << "  duration: " << input_duration_s << " s\n";
    char buf[160];
    std::snprintf(buf, sizeof buf, "%-24s %14s %16s %14s\n", "layer", "params", "macs",
                  "peak_bytes");
    out << buf;
    auto row = [&](const LayerProfile& lp) {
        std::snprintf(buf, sizeof buf, "%-24s %14llu %16llu %14llu\n", lp.name.c_str(),
                      static_cast<unsigned long long>(lp.params),
                      static_cast<unsigned long long>(lp.macs),
                      static_cast<unsigned long long>(lp.peak_activation_bytes));
        out << buf;
    };
    for (const auto& lp : per_layer) row(lp);
    row(totals);
    return out.str();
}

}  // namespace fc::profiler
