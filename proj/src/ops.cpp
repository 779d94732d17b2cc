#include "fc/ops.hpp"

#include "fc/kernels.hpp"

#include <algorithm>
#include <cmath>

namespace fc::ops {

Tensor matmul(const Tensor& a, const Tensor& b, MacCounter& counter, const std::string& tag) {
    if (a.rank() != 2 || b.rank() != 2)
        fail("shape_mismatch", "matmul expects rank-2 tensors");
    const std::size_t m = a.shape[0], k = a.shape[1];
    if (b.shape[0] != k)
        fail("shape_mismatch", "matmul inner extents differ: " + std::to_string(k) + " vs " +
                                   std::to_string(b.shape[0]));
    const std::size_t n = b.shape[1];
    Tensor c({m, n});
    for (std::size_t i = 0; i < m; ++i) {
        float* crow = c.data.data() + i * n;
        const float* arow = a.data.data() + i * k;
        for (std::size_t p = 0; p < k; ++p)
            kernels::axpy(arow[p], b.data.data() + p * n, crow, n);
    }
    counter.add(tag, static_cast<std::uint64_t>(m) * k * n);
    return c;
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& bias, MacCounter& counter,
              const std::string& tag) {
    Tensor y = matmul(x, w, counter, tag);
    const std::size_t out = y.shape[1];
    if (bias.numel() != out) fail("shape_mismatch", "linear bias extent mismatch");
    for (std::size_t i = 0; i < y.shape[0]; ++i)
        kernels::add(y.row(i), bias.data.data(), y.row(i), out);
    return y;
}

Tensor softmax(const Tensor& x) {
    if (x.rank() == 0 || x.shape.back() == 0) fail("shape_mismatch", "softmax needs a last axis");
    const std::size_t n = x.shape.back();
    const std::size_t rows = x.numel() / n;
    Tensor y(x.shape);
    for (std::size_t r = 0; r < rows; ++r) {
        const float* in = x.data.data() + r * n;
        float* out = y.data.data() + r * n;
        float mx = in[0];
        for (std::size_t i = 1; i < n; ++i) mx = std::max(mx, in[i]);
        double sum = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            out[i] = std::exp(in[i] - mx);
            sum += out[i];
        }
        const float inv = static_cast<float>(1.0 / sum);
        for (std::size_t i = 0; i < n; ++i) out[i] *= inv;
    }
    return y;
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, float eps) {
    const std::size_t d = x.shape.back();
    if (d < 1) fail("shape_mismatch", "layer_norm needs last extent >= 1");
    if (gamma.numel() != d || beta.numel() != d)
        fail("shape_mismatch", "layer_norm affine extent mismatch");
    const std::size_t rows = x.numel() / d;
    Tensor y(x.shape);
    for (std::size_t r = 0; r < rows; ++r) {
        const float* in = x.data.data() + r * d;
        float* out = y.data.data() + r * d;
        double mean = 0.0;
        for (std::size_t i = 0; i < d; ++i) mean += in[i];
        mean /= d;
        double var = 0.0;
        for (std::size_t i = 0; i < d; ++i) {
            const double c = in[i] - mean;
            var += c * c;
        }
        var /= d;
        const float scale = static_cast<float>(1.0 / std::sqrt(var + eps));
        for (std::size_t i = 0; i < d; ++i)
            out[i] = (static_cast<float>(in[i] - mean) * scale) * gamma.data[i] + beta.data[i];
    }
    return y;
}

std::size_t conv_out_extent(std::size_t in, std::size_t k, std::size_t stride, std::size_t pad) {
    const std::int64_t num = static_cast<std::int64_t>(in) + 2 * static_cast<std::int64_t>(pad) -
                             static_cast<std::int64_t>(k);
    if (num < 0) fail("input_too_short", "convolution input shorter than kernel");
    return static_cast<std::size_t>(num / static_cast<std::int64_t>(stride)) + 1;
}

namespace {

// im2col buffer: rows = Cin*kH*kW, cols = H'*W'. Lets conv2d ride the
// matmul kernels, which matters for the 512-channel subsampling stage.
Tensor im2col(const Tensor& x, std::size_t kh, std::size_t kw, const Conv2dSpec& s,
              std::size_t oh, std::size_t ow) {
    const std::size_t cin = x.shape[0], h = x.shape[1], w = x.shape[2];
    Tensor cols({cin * kh * kw, oh * ow});
    std::size_t r = 0;
    for (std::size_t c = 0; c < cin; ++c) {
        for (std::size_t ki = 0; ki < kh; ++ki) {
            for (std::size_t kj = 0; kj < kw; ++kj, ++r) {
                float* dst = cols.data.data() + r * oh * ow;
                for (std::size_t i = 0; i < oh; ++i) {
                    const std::int64_t src_i =
                        static_cast<std::int64_t>(i * s.stride_h + ki) - static_cast<std::int64_t>(s.pad_h);
                    if (src_i < 0 || src_i >= static_cast<std::int64_t>(h)) continue;
                    const float* srow = x.data.data() + (c * h + src_i) * w;
                    for (std::size_t j = 0; j < ow; ++j) {
                        const std::int64_t src_j = static_cast<std::int64_t>(j * s.stride_w + kj) -
                                                   static_cast<std::int64_t>(s.pad_w);
                        if (src_j < 0 || src_j >= static_cast<std::int64_t>(w)) continue;
                        dst[i * ow + j] = srow[src_j];
                    }
                }
            }
        }
    }
    return cols;
}

}  // namespace

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& bias, const Conv2dSpec& spec,
              MacCounter& counter, const std::string& tag) {
    if (x.rank() != 3 || w.rank() != 4) fail("shape_mismatch", "conv2d expects [C,H,W] and [O,C,kH,kW]");
    const std::size_t cin = x.shape[0], h = x.shape[1], wd = x.shape[2];
    const std::size_t cout = w.shape[0], kh = w.shape[2], kw = w.shape[3];
    if (w.shape[1] != cin) fail("shape_mismatch", "conv2d channel mismatch");
    const std::size_t oh = conv_out_extent(h, kh, spec.stride_h, spec.pad_h);
    const std::size_t ow = conv_out_extent(wd, kw, spec.stride_w, spec.pad_w);

    Tensor cols = im2col(x, kh, kw, spec, oh, ow);
    Tensor wmat({cout, cin * kh * kw}, w.data);
    Tensor y = matmul(wmat, cols, counter, tag);  // counts cout*cin*kh*kw*oh*ow
    y.shape = {cout, oh, ow};
    if (bias.numel() != cout) fail("shape_mismatch", "conv2d bias extent mismatch");
    for (std::size_t c = 0; c < cout; ++c) {
        float* plane = y.data.data() + c * oh * ow;
        for (std::size_t i = 0; i < oh * ow; ++i) plane[i] += bias.data[c];
    }
    return y;
}

Tensor depthwise_conv2d(const Tensor& x, const Tensor& w, const Tensor& bias,
                        const Conv2dSpec& spec, MacCounter& counter, const std::string& tag) {
    if (x.rank() != 3 || w.rank() != 3) fail("shape_mismatch", "depthwise expects [C,H,W] and [C,kH,kW]");
    const std::size_t c = x.shape[0], h = x.shape[1], wd = x.shape[2];
    if (w.shape[0] != c) fail("shape_mismatch", "depthwise channel mismatch");
    const std::size_t kh = w.shape[1], kw = w.shape[2];
    const std::size_t oh = conv_out_extent(h, kh, spec.stride_h, spec.pad_h);
    const std::size_t ow = conv_out_extent(wd, kw, spec.stride_w, spec.pad_w);
    if (bias.numel() != c) fail("shape_mismatch", "depthwise bias extent mismatch");

    Tensor y({c, oh, ow});
    for (std::size_t ch = 0; ch < c; ++ch) {
        const float* ker = w.data.data() + ch * kh * kw;
        for (std::size_t i = 0; i < oh; ++i) {
            for (std::size_t j = 0; j < ow; ++j) {
                float acc = bias.data[ch];
                for (std::size_t ki = 0; ki < kh; ++ki) {
                    const std::int64_t src_i = static_cast<std::int64_t>(i * spec.stride_h + ki) -
                                               static_cast<std::int64_t>(spec.pad_h);
                    if (src_i < 0 || src_i >= static_cast<std::int64_t>(h)) continue;
                    for (std::size_t kj = 0; kj < kw; ++kj) {
                        const std::int64_t src_j = static_cast<std::int64_t>(j * spec.stride_w + kj) -
                                                   static_cast<std::int64_t>(spec.pad_w);
                        if (src_j < 0 || src_j >= static_cast<std::int64_t>(wd)) continue;
                        acc += ker[ki * kw + kj] * x.data[(ch * h + src_i) * wd + src_j];
                    }
                }
                y.data[(ch * oh + i) * ow + j] = acc;
            }
        }
    }
    counter.add(tag, static_cast<std::uint64_t>(c) * kh * kw * oh * ow);
    return y;
}

Tensor depthwise_conv1d(const Tensor& x, const Tensor& w, const Tensor& bias, std::size_t stride,
                        std::size_t pad, MacCounter& counter, const std::string& tag) {
    if (x.rank() != 2 || w.rank() != 2) fail("shape_mismatch", "depthwise1d expects [C,L] and [C,k]");
    Tensor x3({x.shape[0], 1, x.shape[1]}, x.data);
    Tensor w3({w.shape[0], 1, w.shape[1]}, w.data);
    Conv2dSpec spec;
    spec.stride_w = stride;
    spec.pad_w = pad;
    Tensor y = depthwise_conv2d(x3, w3, bias, spec, counter, tag);
    y.shape = {y.shape[0], y.shape[2]};
    return y;
}

float sigmoid(float v) { return 1.0f / (1.0f + std::exp(-v)); }

Tensor silu(const Tensor& x) {
    Tensor y(x.shape);
    for (std::size_t i = 0; i < x.numel(); ++i) y.data[i] = x.data[i] * sigmoid(x.data[i]);
    return y;
}

Tensor relu(const Tensor& x) {
    Tensor y(x.shape);
    for (std::size_t i = 0; i < x.numel(); ++i) y.data[i] = std::max(0.0f, x.data[i]);
    return y;
}

Tensor glu(const Tensor& x) {
    const std::size_t d = x.shape.back();
    if (d % 2 != 0) fail("shape_mismatch", "glu needs an even channel extent, got " + std::to_string(d));
    const std::size_t half = d / 2;
    const std::size_t rows = x.numel() / d;
    std::vector<std::size_t> shape = x.shape;
    shape.back() = half;
    Tensor y(shape);
    for (std::size_t r = 0; r < rows; ++r) {
        const float* in = x.data.data() + r * d;
        float* out = y.data.data() + r * half;
        for (std::size_t i = 0; i < half; ++i) out[i] = in[i] * sigmoid(in[half + i]);
    }
    return y;
}

Tensor add(const Tensor& a, const Tensor& b) {
    if (a.shape != b.shape) fail("shape_mismatch", "add operands differ in shape");
    Tensor y(a.shape);
    kernels::add(a.data.data(), b.data.data(), y.data.data(), a.numel());
    return y;
}

Tensor transpose2d(const Tensor& x) {
    if (x.rank() != 2) fail("shape_mismatch", "transpose2d expects rank 2");
    Tensor y({x.shape[1], x.shape[0]});
    for (std::size_t i = 0; i < x.shape[0]; ++i)
        for (std::size_t j = 0; j < x.shape[1]; ++j) y.at2(j, i) = x.at2(i, j);
    return y;
}

Tensor reshape(const Tensor& x, std::vector<std::size_t> shape) {
    if (Tensor::count(shape) != x.numel()) fail("shape_mismatch", "reshape changes element count");
    Tensor y = x;
    y.shape = std::move(shape);
    return y;
}

}  // namespace fc::ops
