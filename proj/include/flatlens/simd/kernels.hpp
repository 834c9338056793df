#pragma once

// Data-parallel inner loops. Every kernel exists as a portable scalar
// reference plus optional AVX2 and AVX-512 variants; the best variant the CPU
// supports is chosen once at startup (override with FLATLENS_ISA).

#include <cstddef>
#include <string_view>
#include <vector>

namespace flatlens::simd {

enum class Isa { scalar, avx2, avx512 };

std::string_view to_string(Isa isa) noexcept;
Isa parse_isa(std::string_view name);

// Largest register tile any variant uses; drivers size scratch tiles with it.
inline constexpr std::size_t kMaxTile = 16 * 16;

struct KernelSet {
    Isa isa;
    // Register tile of the GEMM micro-kernel.
    std::size_t mr;
    std::size_t nr;

    // c[i*ldc + j] += alpha * sum_p a[p*mr + i] * b[p*nr + j]
    // for an mr x nr tile; a and b are packed panels of depth kc.
    void (*gemm_tile)(std::size_t kc, const double* a, const double* b,
                      double* c, std::size_t ldc, double alpha);

    double (*dot)(const double* x, const double* y, std::size_t n);

    // y += alpha * x
    void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
};

bool supported(Isa isa) noexcept;
std::vector<Isa> supported_isas();

// Throws Error(config) when the CPU lacks the requested instruction set.
const KernelSet& kernels(Isa isa);

// Process-wide selection: FLATLENS_ISA if set, otherwise the widest supported.
const KernelSet& active();

namespace detail {
extern const KernelSet scalar_kernels;
#if defined(__x86_64__)
extern const KernelSet avx2_kernels;
extern const KernelSet avx512_kernels;
#endif
}  // namespace detail

}  // namespace flatlens::simd
