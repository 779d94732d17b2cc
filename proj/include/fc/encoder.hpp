#pragma once

// Subsampling front-ends and Conformer blocks assembled into encoders.
// Presets A0..A4 walk the ablation ladder from the baseline Conformer
// (4x stride, full convs, 512 channels, kernel 31) to the Fast Conformer
// (8x stride, depthwise-separable subsampling, 256 channels, kernel 9).

#include "fc/attention.hpp"
#include "fc/tensor.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace fc::encoder {

enum class LayerType { full_conv2d, depthwise_separable };

struct SubsampleStage {
    LayerType type = LayerType::full_conv2d;
    std::size_t channels = 512;
    std::size_t kernel_h = 3, kernel_w = 3;
    std::size_t stride = 2;
    std::size_t pad = 1;
};

struct SubsamplingSchema {
    std::vector<SubsampleStage> stages;
    std::size_t total_factor() const { return std::size_t{1} << stages.size(); }
};

struct EncoderConfig {
    SubsamplingSchema subsampling;
    std::size_t n_layers = 17;
    std::size_t d_model = 512;
    std::size_t n_heads = 8;
    std::size_t ffn_expansion = 4;
    std::size_t conv_kernel = 31;
    attention::Context attention;
    std::size_t feature_dim = 80;
    std::size_t frame_hop_ms = 10;

    // Output frame hop after subsampling, in milliseconds.
    std::size_t output_hop_ms() const { return frame_hop_ms * subsampling.total_factor(); }
};

void validate_config(const EncoderConfig& cfg);

// Ablation ladder. Each rung changes exactly one field group.
enum class Preset { A0, A1, A2, A3, A4 };

Preset preset_from_name(const std::string& name);
std::string preset_name(Preset p);

EncoderConfig build_config(Preset preset);

// Length after the subsampling stack. Throws input_too_short if any stage
// would produce an empty output.
std::size_t output_length(std::size_t t_in, const SubsamplingSchema& schema);

// Smallest input length the schema accepts.
std::size_t min_input_length(const SubsamplingSchema& schema);

// ----- weights -----

struct StageWeights {
    LayerType type;
    Tensor conv_w, conv_b;          // full conv path
    Tensor dw_w, dw_b, pw_w, pw_b;  // depthwise-separable path
};

struct SubsampleWeights {
    std::vector<StageWeights> stages;
    Tensor proj_w, proj_b;  // flatten(channels x reduced_mel) -> d_model
};

struct FfnWeights {
    Tensor ln_g, ln_b;
    Tensor w1, b1;  // d -> expansion*d
    Tensor w2, b2;  // expansion*d -> d
};

struct ConvModuleWeights {
    Tensor ln_g, ln_b;
    Tensor pw1_w, pw1_b;    // d -> 2d, consumed by GLU
    Tensor dw_w, dw_b;      // per-channel kernel over time
    Tensor norm_g, norm_b;  // per-timestep channel norm
    Tensor pw2_w, pw2_b;    // d -> d
};

struct BlockWeights {
    FfnWeights ffn1;
    Tensor attn_ln_g, attn_ln_b;
    attention::AttentionParams attn;
    ConvModuleWeights conv;
    FfnWeights ffn2;
    Tensor final_ln_g, final_ln_b;
};

struct EncoderWeights {
    SubsampleWeights subsample;
    std::vector<BlockWeights> blocks;
};

// Deterministic fan-in-scaled uniform initialization. When the config's
// attention kind is limited_with_global, the global projections are
// created by weight copy from the local ones.
EncoderWeights init_weights(const EncoderConfig& cfg, std::uint64_t seed);

// Visit every weight tensor in a fixed order with its serialization name.
void for_each_tensor(const EncoderWeights& w,
                     const std::function<void(const std::string&, const Tensor&)>& fn);
void for_each_tensor(EncoderWeights& w,
                     const std::function<void(const std::string&, Tensor&)>& fn);

std::uint64_t weight_element_count(const EncoderWeights& w);

// ----- forward pass -----

Tensor subsample(const Tensor& features, const SubsamplingSchema& schema,
                 const SubsampleWeights& w, std::size_t d_model, MacCounter& counter);

Tensor conformer_block(const Tensor& x, const BlockWeights& w, const EncoderConfig& cfg,
                       MacCounter& counter);

Tensor encode(const Tensor& features, const EncoderConfig& cfg, const EncoderWeights& w,
              MacCounter& counter);

}  // namespace fc::encoder
