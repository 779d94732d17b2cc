#pragma once

// Low-level float kernels behind the tensor primitives. Scalar reference
// implementations always exist; an AVX2/FMA path is selected at runtime
// when the CPU supports it. Both paths are equivalence-tested.

#include <cstddef>

namespace fc::kernels {

enum class Isa { scalar, avx2 };

// Best ISA the current CPU supports.
Isa detect();

// Currently active ISA. Defaults to detect() on first use.
Isa active();

// Force a specific ISA (tests use this to compare paths).
void set_active(Isa isa);

const char* isa_name(Isa isa);

// y[i] += a * x[i]
void axpy(float a, const float* x, float* y, std::size_t n);

float dot(const float* a, const float* b, std::size_t n);

// out[i] = a[i] + b[i]
void add(const float* a, const float* b, float* out, std::size_t n);

// out[i] = a[i] * b[i]
void mul(const float* a, const float* b, float* out, std::size_t n);

namespace scalar {
void axpy(float a, const float* x, float* y, std::size_t n);
float dot(const float* a, const float* b, std::size_t n);
void add(const float* a, const float* b, float* out, std::size_t n);
void mul(const float* a, const float* b, float* out, std::size_t n);
}  // namespace scalar

namespace avx2 {
// Defined only in the AVX2 translation unit; calling these on a CPU
// without AVX2 is undefined. Guard with detect().
void axpy(float a, const float* x, float* y, std::size_t n);
float dot(const float* a, const float* b, std::size_t n);
void add(const float* a, const float* b, float* out, std::size_t n);
void mul(const float* a, const float* b, float* out, std::size_t n);
bool compiled_in();
}  // namespace avx2

}  // namespace fc::kernels
