#pragma once

#include <cstdint>
#include <map>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace fc {

// All recoverable failures are thrown as Error. The CLI prints them as
// "code: message" and exits non-zero.
class Error : public std::runtime_error {
public:
    Error(std::string code, const std::string& message)
        : std::runtime_error(code + ": " + message), code_(std::move(code)) {}
    const std::string& code() const { return code_; }

private:
    std::string code_;
};

[[noreturn]] inline void fail(const std::string& code, const std::string& message) {
    throw Error(code, message);
}

// Dense row-major float32 array. The universal value type of the forward pass.
struct Tensor {
    std::vector<std::size_t> shape;
    std::vector<float> data;

    Tensor() = default;
    explicit Tensor(std::vector<std::size_t> s) : shape(std::move(s)), data(count(shape), 0.0f) {}
    Tensor(std::vector<std::size_t> s, std::vector<float> d) : shape(std::move(s)), data(std::move(d)) {
        if (data.size() != count(shape)) fail("shape_mismatch", "data length does not match shape");
    }

    static std::size_t count(const std::vector<std::size_t>& s) {
        std::size_t n = 1;
        for (auto e : s) n *= e;
        return n;
    }

    std::size_t numel() const { return data.size(); }
    std::size_t rank() const { return shape.size(); }
    std::size_t extent(std::size_t axis) const { return shape.at(axis); }

    float& at2(std::size_t i, std::size_t j) { return data[i * shape[1] + j]; }
    float at2(std::size_t i, std::size_t j) const { return data[i * shape[1] + j]; }

    float* row(std::size_t i) { return data.data() + i * shape.back(); }
    const float* row(std::size_t i) const { return data.data() + i * shape.back(); }
};

// Multiply-accumulate instrumentation. One MAC = one multiply-add; only
// matmul and convolutions count, elementwise ops and norms do not.
struct MacCounter {
    std::uint64_t total = 0;
    std::map<std::string, std::uint64_t> per_tag;

    void add(const std::string& tag, std::uint64_t n) {
        total += n;
        per_tag[tag] += n;
    }
    void reset() {
        total = 0;
        per_tag.clear();
    }
};

}  // namespace fc
