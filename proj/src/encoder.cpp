#include "fc/encoder.hpp"

#include "fc/ops.hpp"

#include <cmath>
#include <random>

namespace fc::encoder {

void validate_config(const EncoderConfig& cfg) {
    if (cfg.conv_kernel % 2 == 0)
        fail("invalid_config", "conv_kernel must be odd, got " + std::to_string(cfg.conv_kernel));
    if (cfg.n_heads == 0 || cfg.d_model % cfg.n_heads != 0)
        fail("invalid_config", "d_model must be divisible by n_heads");
    if (cfg.subsampling.stages.size() < 2 || cfg.subsampling.stages.size() > 3)
        fail("invalid_config", "subsampling must have 2 or 3 stages");
    if (cfg.feature_dim == 0) fail("invalid_config", "feature_dim must be positive");
    if (cfg.ffn_expansion == 0) fail("invalid_config", "ffn_expansion must be positive");
}

namespace {

SubsamplingSchema make_schema(std::size_t stages, bool depthwise, std::size_t channels) {
    SubsamplingSchema s;
    for (std::size_t i = 0; i < stages; ++i) {
        SubsampleStage st;
        // First stage sees a single input channel, so depthwise is degenerate
        // there; it stays a full conv in every schema.
        st.type = (depthwise && i > 0) ? LayerType::depthwise_separable : LayerType::full_conv2d;
        st.channels = channels;
        s.stages.push_back(st);
    }
    return s;
}

}  // namespace

Preset preset_from_name(const std::string& name) {
    if (name == "A0") return Preset::A0;
    if (name == "A1") return Preset::A1;
    if (name == "A2") return Preset::A2;
    if (name == "A3") return Preset::A3;
    if (name == "A4") return Preset::A4;
    fail("invalid_preset", "unknown preset '" + name + "' (valid: A0 A1 A2 A3 A4)");
}

std::string preset_name(Preset p) {
    switch (p) {
        case Preset::A0: return "A0";
        case Preset::A1: return "A1";
        case Preset::A2: return "A2";
        case Preset::A3: return "A3";
        case Preset::A4: return "A4";
    }
    return "?";
}

EncoderConfig build_config(Preset preset) {
    EncoderConfig cfg;  // Large configuration defaults: 17 layers, d=512, 8 heads
    switch (preset) {
        case Preset::A0:
            cfg.subsampling = make_schema(2, false, 512);
            cfg.conv_kernel = 31;
            break;
        case Preset::A1:
            cfg.subsampling = make_schema(3, false, 512);
            cfg.conv_kernel = 31;
            break;
        case Preset::A2:
            cfg.subsampling = make_schema(3, true, 512);
            cfg.conv_kernel = 31;
            break;
        case Preset::A3:
            cfg.subsampling = make_schema(3, true, 256);
            cfg.conv_kernel = 31;
            break;
        case Preset::A4:
            cfg.subsampling = make_schema(3, true, 256);
            cfg.conv_kernel = 9;
            break;
    }
    validate_config(cfg);
    return cfg;
}

std::size_t output_length(std::size_t t_in, const SubsamplingSchema& schema) {
    if (t_in < 1) fail("input_too_short", "need at least 1 input frame");
    std::size_t len = t_in;
    for (const auto& st : schema.stages) {
        if (len + 2 * st.pad < st.kernel_h)
            fail("input_too_short",
                 "input of " + std::to_string(t_in) + " frames is below the schema minimum of " +
                     std::to_string(min_input_length(schema)) + " frames");
        len = ops::conv_out_extent(len, st.kernel_h, st.stride, st.pad);
    }
    return len;
}

std::size_t min_input_length(const SubsamplingSchema& schema) {
    for (std::size_t t = 1;; ++t) {
        try {
            output_length(t, schema);
            return t;
        } catch (const Error&) {
        }
    }
}

// ----- initialization -----

namespace {

class Initializer {
public:
    explicit Initializer(std::uint64_t seed) : rng_(seed) {}

    Tensor uniform(std::vector<std::size_t> shape, std::size_t fan_in) {
        Tensor t(std::move(shape));
        const float bound = 1.0f / std::sqrt(static_cast<float>(fan_in));
        std::uniform_real_distribution<float> dist(-bound, bound);
        for (auto& v : t.data) v = dist(rng_);
        return t;
    }

    Tensor ones(std::size_t n) {
        Tensor t({n});
        for (auto& v : t.data) v = 1.0f;
        return t;
    }

    Tensor zeros(std::size_t n) { return Tensor({n}); }

private:
    std::mt19937_64 rng_;
};

FfnWeights init_ffn(Initializer& init, std::size_t d, std::size_t expansion) {
    FfnWeights f;
    f.ln_g = init.ones(d);
    f.ln_b = init.zeros(d);
    f.w1 = init.uniform({d, expansion * d}, d);
    f.b1 = init.uniform({expansion * d}, d);
    f.w2 = init.uniform({expansion * d, d}, expansion * d);
    f.b2 = init.uniform({d}, expansion * d);
    return f;
}

}  // namespace

EncoderWeights init_weights(const EncoderConfig& cfg, std::uint64_t seed) {
    validate_config(cfg);
    Initializer init(seed);
    EncoderWeights w;

    std::size_t in_ch = 1;
    std::size_t mel = cfg.feature_dim;
    for (const auto& st : cfg.subsampling.stages) {
        StageWeights sw;
        sw.type = st.type;
        if (st.type == LayerType::full_conv2d) {
            const std::size_t fan = in_ch * st.kernel_h * st.kernel_w;
            sw.conv_w = init.uniform({st.channels, in_ch, st.kernel_h, st.kernel_w}, fan);
            sw.conv_b = init.uniform({st.channels}, fan);
        } else {
            if (in_ch != st.channels)
                fail("invalid_config", "depthwise subsampling stage cannot change channel count");
            sw.dw_w = init.uniform({in_ch, st.kernel_h, st.kernel_w}, st.kernel_h * st.kernel_w);
            sw.dw_b = init.uniform({in_ch}, st.kernel_h * st.kernel_w);
            sw.pw_w = init.uniform({st.channels, in_ch, 1, 1}, in_ch);
            sw.pw_b = init.uniform({st.channels}, in_ch);
        }
        in_ch = st.channels;
        mel = ops::conv_out_extent(mel, st.kernel_w, st.stride, st.pad);
        w.subsample.stages.push_back(std::move(sw));
    }
    const std::size_t flat = in_ch * mel;
    w.subsample.proj_w = init.uniform({flat, cfg.d_model}, flat);
    w.subsample.proj_b = init.uniform({cfg.d_model}, flat);

    const std::size_t d = cfg.d_model;
    for (std::size_t l = 0; l < cfg.n_layers; ++l) {
        BlockWeights b;
        b.ffn1 = init_ffn(init, d, cfg.ffn_expansion);

        b.attn_ln_g = init.ones(d);
        b.attn_ln_b = init.zeros(d);
        attention::AttentionParams& a = b.attn;
        a.wq = init.uniform({d, d}, d);
        a.wk = init.uniform({d, d}, d);
        a.wv = init.uniform({d, d}, d);
        a.wo = init.uniform({d, d}, d);
        a.bq = init.uniform({d}, d);
        a.bk = init.uniform({d}, d);
        a.bv = init.uniform({d}, d);
        a.bo = init.uniform({d}, d);
        a.pos_proj = init.uniform({d, d}, d);
        a.u_bias = init.uniform({d}, d);
        a.v_bias = init.uniform({d}, d);
        if (cfg.attention.kind == attention::Kind::limited_with_global)
            a = attention::init_global_from_local(a);

        b.conv.ln_g = init.ones(d);
        b.conv.ln_b = init.zeros(d);
        b.conv.pw1_w = init.uniform({d, 2 * d}, d);
        b.conv.pw1_b = init.uniform({2 * d}, d);
        b.conv.dw_w = init.uniform({d, cfg.conv_kernel}, cfg.conv_kernel);
        b.conv.dw_b = init.uniform({d}, cfg.conv_kernel);
        b.conv.norm_g = init.ones(d);
        b.conv.norm_b = init.zeros(d);
        b.conv.pw2_w = init.uniform({d, d}, d);
        b.conv.pw2_b = init.uniform({d}, d);

        b.ffn2 = init_ffn(init, d, cfg.ffn_expansion);
        b.final_ln_g = init.ones(d);
        b.final_ln_b = init.zeros(d);
        w.blocks.push_back(std::move(b));
    }
    return w;
}

// ----- tensor enumeration -----

namespace {

template <typename W, typename Fn>
void visit_tensors(W& w, Fn&& fn) {
    for (std::size_t i = 0; i < w.subsample.stages.size(); ++i) {
        auto& st = w.subsample.stages[i];
        const std::string base = "subsample.stage" + std::to_string(i) + ".";
        if (st.type == LayerType::full_conv2d) {
            fn(base + "conv_w", st.conv_w);
            fn(base + "conv_b", st.conv_b);
        } else {
            fn(base + "dw_w", st.dw_w);
            fn(base + "dw_b", st.dw_b);
            fn(base + "pw_w", st.pw_w);
            fn(base + "pw_b", st.pw_b);
        }
    }
    fn("subsample.proj_w", w.subsample.proj_w);
    fn("subsample.proj_b", w.subsample.proj_b);

    for (std::size_t l = 0; l < w.blocks.size(); ++l) {
        auto& b = w.blocks[l];
        const std::string base = "blocks." + std::to_string(l) + ".";
        auto ffn = [&](const std::string& name, auto& f) {
            fn(base + name + ".ln_g", f.ln_g);
            fn(base + name + ".ln_b", f.ln_b);
            fn(base + name + ".w1", f.w1);
            fn(base + name + ".b1", f.b1);
            fn(base + name + ".w2", f.w2);
            fn(base + name + ".b2", f.b2);
        };
        ffn("ffn1", b.ffn1);
        fn(base + "attn.ln_g", b.attn_ln_g);
        fn(base + "attn.ln_b", b.attn_ln_b);
        fn(base + "attn.wq", b.attn.wq);
        fn(base + "attn.wk", b.attn.wk);
        fn(base + "attn.wv", b.attn.wv);
        fn(base + "attn.wo", b.attn.wo);
        fn(base + "attn.bq", b.attn.bq);
        fn(base + "attn.bk", b.attn.bk);
        fn(base + "attn.bv", b.attn.bv);
        fn(base + "attn.bo", b.attn.bo);
        fn(base + "attn.pos_proj", b.attn.pos_proj);
        fn(base + "attn.u_bias", b.attn.u_bias);
        fn(base + "attn.v_bias", b.attn.v_bias);
        if (b.attn.has_global) {
            fn(base + "attn.global_wq", b.attn.global_wq);
            fn(base + "attn.global_wk", b.attn.global_wk);
            fn(base + "attn.global_wv", b.attn.global_wv);
            fn(base + "attn.global_embed", b.attn.global_embed);
        }
        fn(base + "conv.ln_g", b.conv.ln_g);
        fn(base + "conv.ln_b", b.conv.ln_b);
        fn(base + "conv.pw1_w", b.conv.pw1_w);
        fn(base + "conv.pw1_b", b.conv.pw1_b);
        fn(base + "conv.dw_w", b.conv.dw_w);
        fn(base + "conv.dw_b", b.conv.dw_b);
        fn(base + "conv.norm_g", b.conv.norm_g);
        fn(base + "conv.norm_b", b.conv.norm_b);
        fn(base + "conv.pw2_w", b.conv.pw2_w);
        fn(base + "conv.pw2_b", b.conv.pw2_b);
        ffn("ffn2", b.ffn2);
        fn(base + "final_ln_g", b.final_ln_g);
        fn(base + "final_ln_b", b.final_ln_b);
    }
}

}  // namespace

void for_each_tensor(const EncoderWeights& w,
                     const std::function<void(const std::string&, const Tensor&)>& fn) {
    visit_tensors(w, fn);
}

void for_each_tensor(EncoderWeights& w,
                     const std::function<void(const std::string&, Tensor&)>& fn) {
    visit_tensors(w, fn);
}

std::uint64_t weight_element_count(const EncoderWeights& w) {
    std::uint64_t n = 0;
    for_each_tensor(w, [&](const std::string&, const Tensor& t) { n += t.numel(); });
    return n;
}

// ----- forward pass -----

Tensor subsample(const Tensor& features, const SubsamplingSchema& schema,
                 const SubsampleWeights& w, std::size_t d_model, MacCounter& counter) {
    if (features.rank() != 2) fail("shape_mismatch", "features must be [T x F]");
    output_length(features.shape[0], schema);  // rejects too-short inputs up front

    Tensor x = ops::reshape(features, {1, features.shape[0], features.shape[1]});
    for (std::size_t i = 0; i < schema.stages.size(); ++i) {
        const auto& st = schema.stages[i];
        const auto& sw = w.stages[i];
        ops::Conv2dSpec spec;
        spec.stride_h = spec.stride_w = st.stride;
        spec.pad_h = spec.pad_w = st.pad;
        if (st.type == LayerType::full_conv2d) {
            x = ops::conv2d(x, sw.conv_w, sw.conv_b, spec, counter, "subsample_conv");
        } else {
            x = ops::depthwise_conv2d(x, sw.dw_w, sw.dw_b, spec, counter, "subsample_dw");
            ops::Conv2dSpec pw;  // 1x1, stride 1, no padding
            x = ops::conv2d(x, sw.pw_w, sw.pw_b, pw, counter, "subsample_pw");
        }
        x = ops::relu(x);
    }

    // [C x T' x F'] -> [T' x C*F'] -> linear to d_model
    const std::size_t c = x.shape[0], tp = x.shape[1], fp = x.shape[2];
    Tensor flat({tp, c * fp});
    for (std::size_t ch = 0; ch < c; ++ch)
        for (std::size_t i = 0; i < tp; ++i)
            for (std::size_t j = 0; j < fp; ++j)
                flat.at2(i, ch * fp + j) = x.data[(ch * tp + i) * fp + j];
    (void)d_model;
    return ops::linear(flat, w.proj_w, w.proj_b, counter, "subsample_proj");
}

namespace {

Tensor ffn_forward(const Tensor& x, const FfnWeights& w, MacCounter& counter) {
    Tensor h = ops::layer_norm(x, w.ln_g, w.ln_b);
    h = ops::linear(h, w.w1, w.b1, counter, "ffn");
    h = ops::silu(h);
    return ops::linear(h, w.w2, w.b2, counter, "ffn");
}

Tensor conv_module_forward(const Tensor& x, const ConvModuleWeights& w, std::size_t kernel,
                           MacCounter& counter) {
    Tensor h = ops::layer_norm(x, w.ln_g, w.ln_b);
    h = ops::linear(h, w.pw1_w, w.pw1_b, counter, "conv_pw");
    h = ops::glu(h);
    // depthwise over time: [T x D] -> [D x T], kernel k, same padding
    h = ops::transpose2d(h);
    h = ops::depthwise_conv1d(h, w.dw_w, w.dw_b, 1, (kernel - 1) / 2, counter, "conv_dw");
    h = ops::transpose2d(h);
    h = ops::layer_norm(h, w.norm_g, w.norm_b);
    h = ops::silu(h);
    return ops::linear(h, w.pw2_w, w.pw2_b, counter, "conv_pw");
}

Tensor add_scaled(const Tensor& x, const Tensor& y, float scale) {
    Tensor out(x.shape);
    for (std::size_t i = 0; i < x.numel(); ++i) out.data[i] = x.data[i] + scale * y.data[i];
    return out;
}

}  // namespace

Tensor conformer_block(const Tensor& x, const BlockWeights& w, const EncoderConfig& cfg,
                       MacCounter& counter) {
    Tensor h = add_scaled(x, ffn_forward(x, w.ffn1, counter), 0.5f);
    {
        Tensor a = ops::layer_norm(h, w.attn_ln_g, w.attn_ln_b);
        a = attention::mhsa(a, w.attn, cfg.n_heads, cfg.attention, counter);
        h = ops::add(h, a);
    }
    h = ops::add(h, conv_module_forward(h, w.conv, cfg.conv_kernel, counter));
    h = add_scaled(h, ffn_forward(h, w.ffn2, counter), 0.5f);
    return ops::layer_norm(h, w.final_ln_g, w.final_ln_b);
}

Tensor encode(const Tensor& features, const EncoderConfig& cfg, const EncoderWeights& w,
              MacCounter& counter) {
    validate_config(cfg);
    if (features.shape[1] != cfg.feature_dim)
        fail("shape_mismatch", "feature_dim mismatch: file has " + std::to_string(features.shape[1]) +
                                   ", config expects " + std::to_string(cfg.feature_dim));
    Tensor h = subsample(features, cfg.subsampling, w.subsample, cfg.d_model, counter);
    for (const auto& block : w.blocks) h = conformer_block(h, block, cfg, counter);
    return h;
}

}  // namespace fc::encoder
