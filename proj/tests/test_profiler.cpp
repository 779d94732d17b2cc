#include "fc/profiler.hpp"

#include "fc/encoder.hpp"
#include "fc/tensor.hpp"

#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <random>

using namespace fc;
namespace enc = fc::encoder;
namespace prof = fc::profiler;

namespace {

enc::EncoderConfig tiny_config(std::size_t stages, attention::Kind kind = attention::Kind::full) {
    enc::EncoderConfig cfg;
    cfg.subsampling.stages.assign(stages, enc::SubsampleStage{});
    for (auto& s : cfg.subsampling.stages) s.channels = 8;
    cfg.n_layers = 2;
    cfg.d_model = 16;
    cfg.n_heads = 2;
    cfg.ffn_expansion = 2;
    cfg.conv_kernel = 5;
    cfg.feature_dim = 8;
    cfg.attention.kind = kind;
    cfg.attention.window_left = 4;
    cfg.attention.window_right = 4;
    return cfg;
}

}  // namespace

TEST_CASE("count_params equals the allocated weight element count") {
    for (auto preset : {enc::Preset::A0, enc::Preset::A1, enc::Preset::A2, enc::Preset::A3,
                        enc::Preset::A4}) {
        auto cfg = enc::build_config(preset);
        auto w = enc::init_weights(cfg, 0);
        CHECK(prof::count_params(cfg) == enc::weight_element_count(w));
    }
    for (auto kind : {attention::Kind::full, attention::Kind::limited,
                      attention::Kind::limited_with_global}) {
        auto cfg = tiny_config(2, kind);
        auto w = enc::init_weights(cfg, 0);
        CHECK(prof::count_params(cfg) == enc::weight_element_count(w));
    }
}

TEST_CASE("count_params hand check with zero blocks") {
    auto cfg = tiny_config(2);
    cfg.n_layers = 0;
    // stage0: 8*1*3*3+8, stage1: 8*8*3*3+8, projection: (8*2)*16+16
    const std::uint64_t stage0 = 8ull * 1 * 3 * 3 + 8;
    const std::uint64_t stage1 = 8ull * 8 * 3 * 3 + 8;
    const std::uint64_t proj = (8ull * 2) * 16 + 16;
    CHECK(prof::count_params(cfg) == stage0 + stage1 + proj);
}

TEST_CASE("preset parameter counts sit at the published sizes") {
    // 115M before and 109M after the channel reduction, within 3%.
    const double p0 = static_cast<double>(prof::count_params(enc::build_config(enc::Preset::A0)));
    const double p4 = static_cast<double>(prof::count_params(enc::build_config(enc::Preset::A4)));
    CHECK(std::abs(p0 / 115e6 - 1.0) < 0.03);
    CHECK(std::abs(p4 / 109e6 - 1.0) < 0.03);
}

TEST_CASE("count_macs equals the instrumented forward pass exactly") {
    std::mt19937_64 rng(30);
    for (auto kind : {attention::Kind::full, attention::Kind::limited,
                      attention::Kind::limited_with_global}) {
        auto cfg = tiny_config(2, kind);
        auto w = enc::init_weights(cfg, 8);
        for (std::size_t t : {std::size_t{5}, std::size_t{37}, std::size_t{64}}) {
            Tensor feats({t, cfg.feature_dim});
            std::uniform_real_distribution<float> dist(-1.0f, 1.0f);
            for (auto& v : feats.data) v = dist(rng);
            MacCounter c;
            enc::encode(feats, cfg, w, c);
            auto report = prof::count_macs(cfg, t);
            CHECK(report.totals.macs == c.total);
        }
    }
}

TEST_CASE("preset GMAC ladder for 30 s input") {
    // 30 s of 10 ms frames
    const std::size_t t = 3000;
    const double target[] = {143.2, 92.5, 53.2, 48.8, 48.7};
    const enc::Preset presets[] = {enc::Preset::A0, enc::Preset::A1, enc::Preset::A2,
                                   enc::Preset::A3, enc::Preset::A4};
    double macs[5];
    for (int i = 0; i < 5; ++i) {
        auto report = prof::count_macs(enc::build_config(presets[i]), t);
        macs[i] = static_cast<double>(report.totals.macs) / 1e9;
        CHECK(std::abs(macs[i] / target[i] - 1.0) < 0.20);
    }
    for (int i = 1; i < 5; ++i) CHECK(macs[i] < macs[i - 1]);
    CHECK(std::abs((macs[0] / macs[4]) / 2.9 - 1.0) < 0.10);
}

TEST_CASE("reference schema profiles land near published compute") {
    const std::size_t t = 3000;
    auto eff = prof::profile_reference_schemas("efficient_conformer", t);
    auto sq = prof::profile_reference_schemas("squeezeformer", t);
    auto conf = prof::profile_reference_schemas("conformer", t);
    auto fast = prof::profile_reference_schemas("fast_conformer", t);
    CHECK(std::abs(static_cast<double>(eff.totals.macs) / 1e9 / 101.3 - 1.0) < 0.25);
    CHECK(std::abs(static_cast<double>(sq.totals.macs) / 1e9 / 91.0 - 1.0) < 0.25);
    CHECK(fast.totals.macs < sq.totals.macs);
    CHECK(sq.totals.macs < eff.totals.macs);
    CHECK(eff.totals.macs < conf.totals.macs);
    CHECK_THROWS_AS(prof::profile_reference_schemas("no_such_schema", t), Error);
    CHECK(prof::reference_schema_names().size() == 4);
}

TEST_CASE("report serializations contain the totals") {
    auto report = prof::count_macs(tiny_config(2), 40);
    auto js = report.to_json();
    CHECK(js.find("\"totals\"") != std::string::npos);
    CHECK(js.find("macs") != std::string::npos);
    auto table = report.to_table();
    CHECK(table.find("total") != std::string::npos);
}

TEST_CASE("memory model: full attention grows quadratically, limited affinely") {
    auto full = tiny_config(2, attention::Kind::full);
    auto lim = tiny_config(2, attention::Kind::limited);
    const std::size_t t1 = 1000, t2 = 2000, t3 = 3000;

    auto weights_bytes = prof::memory_model_at(full, 0);
    auto f1 = prof::memory_model_at(full, t1) - weights_bytes;
    auto f2 = prof::memory_model_at(full, t2) - weights_bytes;
    auto f3 = prof::memory_model_at(full, t3) - weights_bytes;
    // second difference of a quadratic is positive
    CHECK(f3 - f2 > f2 - f1);

    auto l1 = prof::memory_model_at(lim, t1) - weights_bytes;
    auto l2 = prof::memory_model_at(lim, t2) - weights_bytes;
    auto l3 = prof::memory_model_at(lim, t3) - weights_bytes;
    CHECK(l3 - l2 == l2 - l1);
    CHECK(l3 < f3);

    CHECK(prof::memory_model(full, 16) ==
          prof::memory_model_at(full, enc::output_length(16, full.subsampling)));
}

TEST_CASE("limited attention with a global token costs slightly more memory") {
    auto lim = tiny_config(2, attention::Kind::limited);
    auto glob = tiny_config(2, attention::Kind::limited_with_global);
    CHECK(prof::memory_model_at(glob, 500) > prof::memory_model_at(lim, 500));
}

TEST_CASE("max_duration_minutes inverts the memory model") {
    auto cfg = tiny_config(2, attention::Kind::full);
    const double minutes = 3.0;
    const std::size_t frames = static_cast<std::size_t>(minutes * 60.0 * 1000.0 / cfg.frame_hop_ms);
    const std::uint64_t budget = prof::memory_model(cfg, frames);
    const double got = prof::max_duration_minutes(cfg, budget);
    CHECK(got >= minutes);
    CHECK(got < minutes + 0.01);
    CHECK_THROWS_AS(prof::max_duration_minutes(cfg, 0), Error);
}

TEST_CASE("stride trade-off: 8x fits at least 3x longer audio than 4x at full attention") {
    auto a0 = enc::build_config(enc::Preset::A0);
    auto a4full = enc::build_config(enc::Preset::A4);
    a4full.attention.kind = attention::Kind::full;
    const std::uint64_t budget =
        prof::memory_model(a0, static_cast<std::size_t>(10 * 60 * 1000 / a0.frame_hop_ms));
    const double d0 = prof::max_duration_minutes(a0, budget);
    const double d4 = prof::max_duration_minutes(a4full, budget);
    CHECK(d0 == doctest::Approx(10.0).epsilon(0.01));
    CHECK(d4 > 2.0 * d0 * 0.9);
}

TEST_CASE("ctc_feasibility compares encoder length against target length") {
    auto a4 = enc::build_config(enc::Preset::A4);
    // 10 s utterance: 1000 frames -> 125 output frames at 8x
    auto chars = prof::ctc_feasibility(1000, a4.subsampling, 150);
    CHECK_FALSE(chars.feasible);
    CHECK(chars.deficit == 25);

    auto bpe = prof::ctc_feasibility(1000, a4.subsampling, 40);
    CHECK(bpe.feasible);
    CHECK(bpe.deficit == 0);

    CHECK(prof::ctc_feasibility(1000, a4.subsampling, 0).feasible);
    CHECK(prof::ctc_feasibility(0, a4.subsampling, 1).feasible == false);

    // deficit shrinks monotonically as the utterance grows
    std::uint64_t prev = prof::ctc_feasibility(100, a4.subsampling, 100).deficit;
    for (std::size_t t = 101; t < 900; t += 37) {
        auto f = prof::ctc_feasibility(t, a4.subsampling, 100);
        CHECK(f.deficit <= prev);
        prev = f.deficit;
    }
}

TEST_CASE("analyze_manifest aggregates feasibility per record") {
    const std::string path = "test_manifest.jsonl";
    {
        std::ofstream out(path);
        // 2 s at 8x -> 25 frames
        out << "{\"duration_s\": 2.0, \"transcript_len\": 10}\n";   // feasible
        out << "{\"duration_s\": 2.0, \"transcript_len\": 26}\n";   // deficit 1
        out << "{\"duration_s\": 2.0, \"transcript_len\": 30}\n";   // deficit 5
        out << "{\"duration_s\": 2.0, \"transcript_len\": 125}\n";  // deficit 100
    }
    auto a4 = enc::build_config(enc::Preset::A4);
    auto stats = prof::analyze_manifest(path, a4.subsampling, 10);
    CHECK(stats.records == 4);
    CHECK(stats.infeasible == 3);
    CHECK(stats.infeasible_fraction == doctest::Approx(0.75));
    REQUIRE(stats.deficit_histogram.size() >= 7);
    CHECK(stats.deficit_histogram[0] == 1);  // deficit 1
    CHECK(stats.deficit_histogram[2] == 1);  // deficit 5 in [4,8)
    CHECK(stats.deficit_histogram[6] == 1);  // deficit 100 in [64,128)
    std::remove(path.c_str());

    CHECK_THROWS_AS(prof::analyze_manifest("missing.jsonl", a4.subsampling, 10), Error);
}

TEST_CASE("analyze_manifest honors a custom length field") {
    const std::string path = "test_manifest_bpe.jsonl";
    {
        std::ofstream out(path);
        out << "{\"duration_s\": 2.0, \"bpe_len\": 6, \"transcript_len\": 999}\n";
    }
    auto a4 = enc::build_config(enc::Preset::A4);
    auto stats = prof::analyze_manifest(path, a4.subsampling, 10, "bpe_len");
    CHECK(stats.records == 1);
    CHECK(stats.infeasible == 0);
    std::remove(path.c_str());
}
