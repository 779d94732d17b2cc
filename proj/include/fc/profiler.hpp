#pragma once

// Analytical parameter / MAC / peak-memory accounting for encoder configs.
// MAC formulas mirror the instrumented forward pass operation-for-operation,
// so totals agree with MacCounter exactly. Also hosts the CTC length
// feasibility analyzer and the maximum-duration estimator.

#include "fc/encoder.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace fc::profiler {

struct LayerProfile {
    std::string name;
    std::uint64_t params = 0;
    std::uint64_t macs = 0;
    std::uint64_t peak_activation_bytes = 0;
};

struct ProfileReport {
    std::vector<LayerProfile> per_layer;
    LayerProfile totals;  // name = "total"
    double input_duration_s = 0.0;
    std::string schema_name;

    std::string to_json() const;
    std::string to_table() const;
};

std::uint64_t count_params(const encoder::EncoderConfig& cfg);

ProfileReport count_macs(const encoder::EncoderConfig& cfg, std::size_t t_in,
                         const std::string& schema_name = "custom");

// Analytical-only profiles for the reference downsampling schedules
// (progressive 2/4/8 and the 2/4/8/4 U-Net have no runnable forward here).
// Valid names: conformer, squeezeformer, efficient_conformer, fast_conformer.
ProfileReport profile_reference_schemas(const std::string& name, std::size_t t_in);

std::vector<std::string> reference_schema_names();

// Peak forward memory in bytes for the block stack: weights plus the
// worst single block's activations and score matrices. Subsampling
// activations are modeled as streamed and excluded.
std::uint64_t memory_model(const encoder::EncoderConfig& cfg, std::size_t t_in);

// Same model parameterized directly by encoder output length.
std::uint64_t memory_model_at(const encoder::EncoderConfig& cfg, std::size_t t_out);

// Largest audio duration (minutes) whose memory_model fits the budget.
double max_duration_minutes(const encoder::EncoderConfig& cfg, std::uint64_t budget_bytes);

struct Feasibility {
    bool feasible = false;
    std::uint64_t deficit = 0;  // target_len - output_length when infeasible
};

Feasibility ctc_feasibility(std::size_t t_in, const encoder::SubsamplingSchema& schema,
                            std::uint64_t target_len);

struct ManifestStats {
    std::uint64_t records = 0;
    std::uint64_t infeasible = 0;
    double infeasible_fraction = 0.0;
    // histogram over deficit, bucketed by powers of two: bucket b counts
    // deficits in [2^b, 2^(b+1)); bucket 0 holds deficit 1.
    std::vector<std::uint64_t> deficit_histogram;
};

// Manifest: one JSON object per line with a duration_s field and a
// transcript-length field (name configurable).
ManifestStats analyze_manifest(const std::string& path, const encoder::SubsamplingSchema& schema,
                               std::size_t frame_hop_ms,
                               const std::string& length_field = "transcript_len");

}  // namespace fc::profiler
