#include "fc/kernels.hpp"

#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

using namespace fc;

namespace {

std::vector<float> random_vec(std::size_t n, std::mt19937_64& rng) {
    std::uniform_real_distribution<float> dist(-2.0f, 2.0f);
    std::vector<float> v(n);
    for (auto& x : v) x = dist(rng);
    return v;
}

}  // namespace

TEST_CASE("scalar dot matches a double-precision reference") {
    std::mt19937_64 rng(7);
    for (int iter = 0; iter < 20; ++iter) {
        const std::size_t n = 1 + rng() % 200;
        const auto a = random_vec(n, rng);
        const auto b = random_vec(n, rng);
        double ref = 0.0;
        for (std::size_t i = 0; i < n; ++i) ref += static_cast<double>(a[i]) * b[i];
        CHECK(kernels::scalar::dot(a.data(), b.data(), n) ==
              doctest::Approx(ref).epsilon(1e-5));
    }
}

TEST_CASE("avx2 kernels agree with scalar reference") {
    if (kernels::detect() != kernels::Isa::avx2) {
        MESSAGE("AVX2 unavailable, skipping");
        return;
    }
    std::mt19937_64 rng(11);
    for (int iter = 0; iter < 50; ++iter) {
        const std::size_t n = 1 + rng() % 333;  // cover remainders of all lane widths
        const auto a = random_vec(n, rng);
        const auto b = random_vec(n, rng);

        CHECK(kernels::avx2::dot(a.data(), b.data(), n) ==
              doctest::Approx(kernels::scalar::dot(a.data(), b.data(), n)).epsilon(1e-5));

        std::vector<float> y1 = b, y2 = b;
        kernels::scalar::axpy(1.7f, a.data(), y1.data(), n);
        kernels::avx2::axpy(1.7f, a.data(), y2.data(), n);
        std::vector<float> s1(n), s2(n), m1(n), m2(n);
        kernels::scalar::add(a.data(), b.data(), s1.data(), n);
        kernels::avx2::add(a.data(), b.data(), s2.data(), n);
        kernels::scalar::mul(a.data(), b.data(), m1.data(), n);
        kernels::avx2::mul(a.data(), b.data(), m2.data(), n);
        for (std::size_t i = 0; i < n; ++i) {
            CHECK(y2[i] == doctest::Approx(y1[i]).epsilon(1e-5));
            CHECK(s2[i] == s1[i]);
            CHECK(m2[i] == m1[i]);
        }
    }
}

TEST_CASE("dispatch honors forced ISA") {
    const auto saved = kernels::active();
    kernels::set_active(kernels::Isa::scalar);
    CHECK(kernels::active() == kernels::Isa::scalar);
    const float a[3] = {1, 2, 3}, b[3] = {4, 5, 6};
    CHECK(kernels::dot(a, b, 3) == doctest::Approx(32.0f));
    kernels::set_active(saved);
}
