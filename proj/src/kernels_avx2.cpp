// Compiled with -mavx2 -mfma (see CMakeLists). Only entered after a
// runtime CPU check, so the intrinsics are safe to emit unconditionally.

#include "fc/kernels.hpp"

#if defined(__x86_64__) || defined(_M_X64)
#define FC_HAVE_AVX2_TU 1
#include <immintrin.h>
#else
#define FC_HAVE_AVX2_TU 0
#endif

namespace fc::kernels::avx2 {

bool compiled_in() { return FC_HAVE_AVX2_TU != 0; }

#if FC_HAVE_AVX2_TU

void axpy(float a, const float* x, float* y, std::size_t n) {
    const __m256 va = _mm256_set1_ps(a);
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        __m256 vy = _mm256_loadu_ps(y + i);
        vy = _mm256_fmadd_ps(va, _mm256_loadu_ps(x + i), vy);
        _mm256_storeu_ps(y + i, vy);
    }
    for (; i < n; ++i) y[i] += a * x[i];
}

float dot(const float* a, const float* b, std::size_t n) {
    __m256 acc0 = _mm256_setzero_ps();
    __m256 acc1 = _mm256_setzero_ps();
    std::size_t i = 0;
    for (; i + 16 <= n; i += 16) {
        acc0 = _mm256_fmadd_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i), acc0);
        acc1 = _mm256_fmadd_ps(_mm256_loadu_ps(a + i + 8), _mm256_loadu_ps(b + i + 8), acc1);
    }
    for (; i + 8 <= n; i += 8) {
        acc0 = _mm256_fmadd_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i), acc0);
    }
    acc0 = _mm256_add_ps(acc0, acc1);
    __m128 lo = _mm256_castps256_ps128(acc0);
    __m128 hi = _mm256_extractf128_ps(acc0, 1);
    lo = _mm_add_ps(lo, hi);
    lo = _mm_hadd_ps(lo, lo);
    lo = _mm_hadd_ps(lo, lo);
    float acc = _mm_cvtss_f32(lo);
    for (; i < n; ++i) acc += a[i] * b[i];
    return acc;
}

void add(const float* a, const float* b, float* out, std::size_t n) {
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        _mm256_storeu_ps(out + i, _mm256_add_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i)));
    }
    for (; i < n; ++i) out[i] = a[i] + b[i];
}

void mul(const float* a, const float* b, float* out, std::size_t n) {
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        _mm256_storeu_ps(out + i, _mm256_mul_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i)));
    }
    for (; i < n; ++i) out[i] = a[i] * b[i];
}

#else  // non-x86 build: satisfy the linker, never called.

void axpy(float a, const float* x, float* y, std::size_t n) { scalar::axpy(a, x, y, n); }
float dot(const float* a, const float* b, std::size_t n) { return scalar::dot(a, b, n); }
void add(const float* a, const float* b, float* out, std::size_t n) { scalar::add(a, b, out, n); }
void mul(const float* a, const float* b, float* out, std::size_t n) { scalar::mul(a, b, out, n); }

#endif

}  // namespace fc::kernels::avx2
