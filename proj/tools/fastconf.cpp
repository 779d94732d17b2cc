// fastconf: profiling, schema comparison, encoding, equivalence checks,
// CTC feasibility analysis, and long-form buffered inference.

#include "fc/attention.hpp"
#include "fc/encoder.hpp"
#include "fc/io.hpp"
#include "fc/longform.hpp"
#include "fc/ops.hpp"
#include "fc/profiler.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <random>
#include <set>

namespace {

using fc::Tensor;
using fc::encoder::EncoderConfig;

// ----- config loading (fail-closed on unknown keys) -----

void reject_unknown(const nlohmann::json& j, const std::set<std::string>& known,
                    const std::string& where) {
    for (const auto& [key, _] : j.items())
        if (!known.count(key))
            fc::fail("bad_config", "unknown key '" + key + "' in " + where);
}

fc::attention::Kind kind_from_name(const std::string& name) {
    if (name == "full") return fc::attention::Kind::full;
    if (name == "limited") return fc::attention::Kind::limited;
    if (name == "limited_with_global") return fc::attention::Kind::limited_with_global;
    fc::fail("bad_config", "unknown attention kind '" + name + "'");
}

EncoderConfig load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) fc::fail("io_error", "cannot open config '" + path + "'");
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        fc::fail("bad_config", path + ": " + e.what());
    }
    reject_unknown(j, {"subsampling", "n_layers", "d_model", "n_heads", "ffn_expansion",
                       "conv_kernel", "attention", "feature_dim", "frame_hop_ms"},
                   path);
    EncoderConfig cfg = fc::encoder::build_config(fc::encoder::Preset::A4);
    if (j.contains("subsampling")) {
        const auto& sub = j["subsampling"];
        reject_unknown(sub, {"stages"}, "subsampling");
        cfg.subsampling.stages.clear();
        for (const auto& stage : sub.at("stages")) {
            reject_unknown(stage, {"layer_type", "channels", "kernel", "stride", "pad"}, "stage");
            fc::encoder::SubsampleStage st;
            const std::string type = stage.at("layer_type").get<std::string>();
            if (type == "full_conv2d") st.type = fc::encoder::LayerType::full_conv2d;
            else if (type == "depthwise_separable") st.type = fc::encoder::LayerType::depthwise_separable;
            else fc::fail("bad_config", "unknown layer_type '" + type + "'");
            st.channels = stage.at("channels").get<std::size_t>();
            if (stage.contains("kernel")) {
                st.kernel_h = stage["kernel"].at(0).get<std::size_t>();
                st.kernel_w = stage["kernel"].at(1).get<std::size_t>();
            }
            if (stage.contains("stride")) st.stride = stage["stride"].get<std::size_t>();
            if (stage.contains("pad")) st.pad = stage["pad"].get<std::size_t>();
            cfg.subsampling.stages.push_back(st);
        }
    }
    if (j.contains("n_layers")) cfg.n_layers = j["n_layers"].get<std::size_t>();
    if (j.contains("d_model")) cfg.d_model = j["d_model"].get<std::size_t>();
    if (j.contains("n_heads")) cfg.n_heads = j["n_heads"].get<std::size_t>();
    if (j.contains("ffn_expansion")) cfg.ffn_expansion = j["ffn_expansion"].get<std::size_t>();
    if (j.contains("conv_kernel")) cfg.conv_kernel = j["conv_kernel"].get<std::size_t>();
    if (j.contains("attention")) {
        const auto& att = j["attention"];
        reject_unknown(att, {"kind", "window_left", "window_right"}, "attention");
        if (att.contains("kind")) cfg.attention.kind = kind_from_name(att["kind"].get<std::string>());
        if (att.contains("window_left"))
            cfg.attention.window_left = att["window_left"].get<std::size_t>();
        if (att.contains("window_right"))
            cfg.attention.window_right = att["window_right"].get<std::size_t>();
    }
    if (j.contains("feature_dim")) cfg.feature_dim = j["feature_dim"].get<std::size_t>();
    if (j.contains("frame_hop_ms")) cfg.frame_hop_ms = j["frame_hop_ms"].get<std::size_t>();
    fc::encoder::validate_config(cfg);
    return cfg;
}

struct ConfigArgs {
    std::string preset;
    std::string config_path;
    std::string attention_kind;
    std::int64_t window_left = -1, window_right = -1;

    void add_to(CLI::App* cmd) {
        cmd->add_option("--preset", preset, "Preset A0..A4");
        cmd->add_option("--config", config_path, "JSON config file");
        cmd->add_option("--attention", attention_kind,
                        "Attention override: full|limited|limited_with_global");
        cmd->add_option("--window-left", window_left, "Attention window to the left (frames)");
        cmd->add_option("--window-right", window_right, "Attention window to the right (frames)");
    }

    EncoderConfig resolve() const {
        if (!preset.empty() && !config_path.empty())
            fc::fail("bad_config", "--preset and --config are mutually exclusive");
        EncoderConfig cfg;
        if (!config_path.empty()) cfg = load_config_file(config_path);
        else cfg = fc::encoder::build_config(
                 fc::encoder::preset_from_name(preset.empty() ? "A4" : preset));
        if (!attention_kind.empty()) cfg.attention.kind = kind_from_name(attention_kind);
        if (window_left >= 0) cfg.attention.window_left = static_cast<std::size_t>(window_left);
        if (window_right >= 0) cfg.attention.window_right = static_cast<std::size_t>(window_right);
        return cfg;
    }
};

void emit_report(const fc::profiler::ProfileReport& report, const std::string& format,
                 const std::string& out_path) {
    const std::string text = format == "json" ? report.to_json() : report.to_table();
    if (out_path.empty()) {
        std::cout << text << "\n";
    } else {
        std::ofstream out(out_path);
        if (!out) fc::fail("io_error", "cannot open '" + out_path + "' for writing");
        out << text << "\n";
    }
}

std::size_t frames_for_duration(double seconds, std::size_t hop_ms) {
    return static_cast<std::size_t>(std::llround(seconds * 1000.0 / hop_ms));
}

Tensor random_features(std::size_t t, std::size_t f, std::uint64_t seed) {
    Tensor x({t, f});
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<float> dist(-1.0f, 1.0f);
    for (auto& v : x.data) v = dist(rng);
    return x;
}

fc::attention::AttentionParams random_attention_params(std::size_t d, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    const float bound = 1.0f / std::sqrt(static_cast<float>(d));
    std::uniform_real_distribution<float> dist(-bound, bound);
    auto mat = [&](std::size_t r, std::size_t c) {
        Tensor t({r, c});
        for (auto& v : t.data) v = dist(rng);
        return t;
    };
    fc::attention::AttentionParams p;
    p.wq = mat(d, d); p.wk = mat(d, d); p.wv = mat(d, d); p.wo = mat(d, d);
    p.bq = mat(d, 1); p.bq.shape = {d};
    p.bk = mat(d, 1); p.bk.shape = {d};
    p.bv = mat(d, 1); p.bv.shape = {d};
    p.bo = mat(d, 1); p.bo.shape = {d};
    p.pos_proj = mat(d, d);
    p.u_bias = mat(d, 1); p.u_bias.shape = {d};
    p.v_bias = mat(d, 1); p.v_bias.shape = {d};
    return p;
}

float max_abs_diff(const Tensor& a, const Tensor& b) {
    float m = 0.0f;
    for (std::size_t i = 0; i < a.numel(); ++i) m = std::max(m, std::abs(a.data[i] - b.data[i]));
    return m;
}

// ----- commands -----

int cmd_profile(const ConfigArgs& cargs, double duration_s, const std::string& format,
                const std::string& out_path) {
    const EncoderConfig cfg = cargs.resolve();
    const std::size_t frames = frames_for_duration(duration_s, cfg.frame_hop_ms);
    const std::string name = cargs.preset.empty() ? "custom" : cargs.preset;
    emit_report(fc::profiler::count_macs(cfg, frames, name), format, out_path);
    return 0;
}

int cmd_compare(std::vector<std::string> schemas, double duration_s, const std::string& format,
                const std::string& out_path) {
    std::vector<std::string> unique;
    for (const auto& s : schemas) {
        if (std::find(unique.begin(), unique.end(), s) != unique.end()) {
            std::cerr << "warning: duplicate schema '" << s << "' ignored\n";
            continue;
        }
        unique.push_back(s);
    }
    if (unique.size() < 2) fc::fail("bad_args", "compare needs at least 2 distinct schema names");

    std::vector<fc::profiler::ProfileReport> reports;
    for (const auto& s : unique) {
        const std::size_t frames = frames_for_duration(duration_s, 10);
        reports.push_back(fc::profiler::profile_reference_schemas(s, frames));
    }
    std::sort(reports.begin(), reports.end(),
              [](const auto& a, const auto& b) { return a.totals.macs < b.totals.macs; });

    if (format == "json") {
        nlohmann::json j = nlohmann::json::array();
        for (const auto& r : reports)
            j.push_back({{"schema_name", r.schema_name},
                         {"params", r.totals.params},
                         {"macs", r.totals.macs},
                         {"peak_bytes", r.totals.peak_activation_bytes}});
        const std::string text = j.dump(2);
        if (out_path.empty()) std::cout << text << "\n";
        else std::ofstream(out_path) << text << "\n";
    } else {
        printf("%-22s %14s %16s\n", "schema", "params", "macs");
        for (const auto& r : reports)
            printf("%-22s %14llu %16llu\n", r.schema_name.c_str(),
                   static_cast<unsigned long long>(r.totals.params),
                   static_cast<unsigned long long>(r.totals.macs));
    }
    return 0;
}

int cmd_encode(const ConfigArgs& cargs, const std::string& features_path,
               const std::string& weights_path, std::uint64_t seed, const std::string& out_path) {
    const EncoderConfig cfg = cargs.resolve();
    const Tensor features = fc::io::load_features(features_path);
    const fc::encoder::EncoderWeights w = weights_path.empty()
                                              ? fc::encoder::init_weights(cfg, seed)
                                              : fc::io::load_weights(weights_path, cfg);
    fc::MacCounter counter;
    const Tensor out = fc::encoder::encode(features, cfg, w, counter);
    if (!out_path.empty()) fc::io::save_features(out_path, out);
    std::cout << "frames_in: " << features.shape[0] << "\nframes_out: " << out.shape[0]
              << "\nmac_total: " << counter.total << "\n";
    return 0;
}

int cmd_check_equivalence(const ConfigArgs& cargs, std::size_t t, std::size_t window,
                          std::uint64_t seed) {
    const EncoderConfig cfg = cargs.resolve();
    const std::size_t d = cfg.d_model;
    const auto params = random_attention_params(d, seed);
    const Tensor x = random_features(t, d, seed + 1);

    fc::attention::Context ctx;
    ctx.kind = fc::attention::Kind::limited;
    ctx.window_left = ctx.window_right = window;

    fc::MacCounter c1, c2, c3;
    const Tensor chunked = fc::attention::limited_mhsa(x, params, cfg.n_heads, ctx, c1);
    const Tensor masked =
        fc::attention::masked_reference_mhsa(x, params, cfg.n_heads, window, window, c2);
    const Tensor full = fc::attention::full_mhsa(x, params, cfg.n_heads, c3);

    const float diff_masked = max_abs_diff(chunked, masked);
    const float diff_full = max_abs_diff(chunked, full);
    const bool pass = diff_masked <= 1e-5f && (window < t - 1 || diff_full <= 1e-5f);
    std::cout << "T: " << t << "  window: " << window << "\n"
              << "max_abs_diff chunked vs masked reference: " << diff_masked << "\n"
              << "max_abs_diff chunked vs full attention:   " << diff_full << "\n"
              << "limited MACs: " << c1.total << "  full MACs: " << c3.total << "\n"
              << (pass ? "PASS" : "FAIL") << "\n";
    return pass ? 0 : 1;
}

int cmd_feasibility(const ConfigArgs& cargs, const std::string& manifest,
                    const std::string& length_field, const std::string& format) {
    const EncoderConfig cfg = cargs.resolve();
    const auto stats = fc::profiler::analyze_manifest(manifest, cfg.subsampling,
                                                      cfg.frame_hop_ms, length_field);
    if (stats.records == 0) std::cerr << "warning: manifest has no records\n";
    nlohmann::json j;
    j["records"] = stats.records;
    j["infeasible"] = stats.infeasible;
    j["infeasible_fraction"] = stats.infeasible_fraction;
    nlohmann::json hist = nlohmann::json::object();
    for (std::size_t b = 0; b < stats.deficit_histogram.size(); ++b) {
        if (stats.deficit_histogram[b] == 0) continue;
        const std::uint64_t lo = std::uint64_t{1} << b;
        hist["deficit_" + std::to_string(lo) + "_" + std::to_string(2 * lo - 1)] =
            stats.deficit_histogram[b];
    }
    j["deficit_histogram"] = hist;
    if (format == "json") {
        std::cout << j.dump(2) << "\n";
    } else {
        std::cout << "records: " << stats.records << "\ninfeasible: " << stats.infeasible
                  << "\ninfeasible_fraction: " << stats.infeasible_fraction << "\n";
    }
    return 0;
}

int cmd_longform(const ConfigArgs& cargs, const std::string& features_path, double buffer_s,
                 double context_s, std::uint64_t seed, std::size_t vocab,
                 const std::string& out_path) {
    const EncoderConfig cfg = cargs.resolve();
    if (buffer_s <= 2.0 * context_s)
        fc::fail("bad_args", "buffer_s must exceed twice context_s");
    const Tensor features = fc::io::load_features(features_path);
    const std::size_t buffer_frames = frames_for_duration(buffer_s, cfg.frame_hop_ms);
    const std::size_t context_frames = frames_for_duration(context_s, cfg.frame_hop_ms);

    const auto plan =
        fc::longform::plan_buffers(features.shape[0], buffer_frames, context_frames, context_frames);
    const auto w = fc::encoder::init_weights(cfg, seed);
    fc::MacCounter counter;
    const Tensor merged = fc::longform::buffered_encode(features, cfg, w, plan, counter);
    if (!out_path.empty()) fc::io::save_features(out_path, merged);

    // Seeded random CTC head on top of the merged encoder frames.
    std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ull);
    const float bound = 1.0f / std::sqrt(static_cast<float>(cfg.d_model));
    std::uniform_real_distribution<float> dist(-bound, bound);
    Tensor head_w({cfg.d_model, vocab});
    for (auto& v : head_w.data) v = dist(rng);
    fc::MacCounter head_counter;
    Tensor logits = fc::ops::matmul(merged, head_w, head_counter, "ctc_head");
    const auto decode = fc::longform::ctc_greedy_decode(logits, 0);

    std::size_t max_buffer = 0;
    for (const auto& b : plan.buffers) max_buffer = std::max(max_buffer, b.end - b.start);
    std::cout << "buffers: " << plan.buffers.size() << "\nframes_out: " << merged.shape[0]
              << "\nmac_total: " << counter.total
              << "\nper_buffer_peak_bytes: " << fc::profiler::memory_model(cfg, max_buffer)
              << "\ndecode: " << decode.to_json() << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Fast Conformer encoder toolkit"};
    app.require_subcommand(1);

    std::string format = "table", out_path, features_path, weights_path, manifest;
    std::string length_field = "transcript_len";
    std::vector<std::string> schemas;
    double duration_s = 30.0, buffer_s = 20.0, context_s = 2.0;
    std::uint64_t seed = 0;
    std::size_t t = 300, window = 128, vocab = 128;

    ConfigArgs profile_cfg, encode_cfg, equiv_cfg, feas_cfg, long_cfg;

    auto* profile = app.add_subcommand("profile", "Parameter/MAC/memory report for a config");
    profile_cfg.add_to(profile);
    profile->add_option("--duration", duration_s, "Input duration in seconds");
    profile->add_option("--format", format, "json|table");
    profile->add_option("--output", out_path, "Write report to file");

    auto* compare = app.add_subcommand("compare", "Compare downsampling schemas by MACs");
    compare->add_option("schemas", schemas, "Schema names")->expected(-1);
    compare->add_option("--duration", duration_s, "Input duration in seconds");
    compare->add_option("--format", format, "json|table");
    compare->add_option("--output", out_path, "Write report to file");

    auto* encode = app.add_subcommand("encode", "Run the encoder over a feature file");
    encode_cfg.add_to(encode);
    encode->add_option("--features", features_path, "FCFT input file")->required();
    encode->add_option("--weights", weights_path, "FCWT weights file (default: seeded init)");
    encode->add_option("--seed", seed, "Weight init seed");
    encode->add_option("--out", out_path, "FCFT output file");

    auto* equiv = app.add_subcommand("check-equivalence",
                                     "Chunked limited attention vs masked reference");
    equiv_cfg.add_to(equiv);
    equiv->add_option("--t", t, "Sequence length");
    equiv->add_option("--window", window, "Window frames each side");
    equiv->add_option("--seed", seed, "Random seed");

    auto* feas = app.add_subcommand("feasibility", "CTC length feasibility over a manifest");
    feas_cfg.add_to(feas);
    feas->add_option("--manifest", manifest, "JSONL manifest")->required();
    feas->add_option("--length-field", length_field, "Transcript length field name");
    feas->add_option("--format", format, "json|table");

    auto* longform = app.add_subcommand("longform", "Buffered long-form inference");
    long_cfg.add_to(longform);
    longform->add_option("--features", features_path, "FCFT input file")->required();
    longform->add_option("--buffer-s", buffer_s, "Buffer length in seconds");
    longform->add_option("--context-s", context_s, "Context margin in seconds, each side");
    longform->add_option("--seed", seed, "Weight init seed");
    longform->add_option("--vocab", vocab, "CTC head vocabulary size");
    longform->add_option("--out", out_path, "FCFT output file for merged frames");

    try {
        app.parse(argc, argv);
        if (profile->parsed()) return cmd_profile(profile_cfg, duration_s, format, out_path);
        if (compare->parsed()) return cmd_compare(schemas, duration_s, format, out_path);
        if (encode->parsed())
            return cmd_encode(encode_cfg, features_path, weights_path, seed, out_path);
        if (equiv->parsed()) return cmd_check_equivalence(equiv_cfg, t, window, seed);
        if (feas->parsed()) return cmd_feasibility(feas_cfg, manifest, length_field, format);
        if (longform->parsed())
            return cmd_longform(long_cfg, features_path, buffer_s, context_s, seed, vocab, out_path);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help
        std::cerr << "usage_error: " << e.what() << "\n";
        return 2;
    } catch (const fc::Error& e) {
        std::cerr << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "internal: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
