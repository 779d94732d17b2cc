#include "fc/kernels.hpp"

namespace fc::kernels {

Isa detect() {
#if defined(__x86_64__) || defined(_M_X64)
    if (avx2::compiled_in() && __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma"))
        return Isa::avx2;
#endif
    return Isa::scalar;
}

namespace {
Isa g_active = detect();
}

Isa active() { return g_active; }
void set_active(Isa isa) { g_active = isa; }

const char* isa_name(Isa isa) {
    switch (isa) {
        case Isa::avx2: return "avx2";
        default: return "scalar";
    }
}

void axpy(float a, const float* x, float* y, std::size_t n) {
    if (g_active == Isa::avx2) avx2::axpy(a, x, y, n);
    else scalar::axpy(a, x, y, n);
}

float dot(const float* a, const float* b, std::size_t n) {
    return g_active == Isa::avx2 ? avx2::dot(a, b, n) : scalar::dot(a, b, n);
}

void add(const float* a, const float* b, float* out, std::size_t n) {
    if (g_active == Isa::avx2) avx2::add(a, b, out, n);
    else scalar::add(a, b, out, n);
}

void mul(const float* a, const float* b, float* out, std::size_t n) {
    if (g_active == Isa::avx2) avx2::mul(a, b, out, n);
    else scalar::mul(a, b, out, n);
}

}  // namespace fc::kernels
