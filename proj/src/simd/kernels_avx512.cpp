// Built with -mavx512f -mfma; only reached through the dispatcher after a CPUID check.
#include "flatlens/simd/kernels.hpp"

#if defined(__x86_64__)
#include <immintrin.h>

namespace flatlens::simd::detail {
namespace {

constexpr std::size_t kMr = 12;
constexpr std::size_t kNr = 16;

void gemm_tile(std::size_t kc, const double* a, const double* b, double* c,
               std::size_t ldc, double alpha) {
    __m512d lo[kMr];
    __m512d hi[kMr];
    for (std::size_t i = 0; i < kMr; ++i) {
        lo[i] = _mm512_setzero_pd();
        hi[i] = _mm512_setzero_pd();
    }
    for (std::size_t p = 0; p < kc; ++p) {
        const __m512d b0 = _mm512_loadu_pd(b);
        const __m512d b1 = _mm512_loadu_pd(b + 8);
#pragma GCC unroll 12
        for (std::size_t i = 0; i < kMr; ++i) {
            const __m512d ai = _mm512_set1_pd(a[i]);
            lo[i] = _mm512_fmadd_pd(ai, b0, lo[i]);
            hi[i] = _mm512_fmadd_pd(ai, b1, hi[i]);
        }
        a += kMr;
        b += kNr;
    }
    const __m512d va = _mm512_set1_pd(alpha);
    for (std::size_t i = 0; i < kMr; ++i) {
        double* cr = c + i * ldc;
        _mm512_storeu_pd(cr, _mm512_fmadd_pd(va, lo[i], _mm512_loadu_pd(cr)));
        _mm512_storeu_pd(cr + 8, _mm512_fmadd_pd(va, hi[i], _mm512_loadu_pd(cr + 8)));
    }
}

double dot(const double* x, const double* y, std::size_t n) {
    __m512d s0 = _mm512_setzero_pd(), s1 = _mm512_setzero_pd();
    std::size_t i = 0;
    for (; i + 16 <= n; i += 16) {
        s0 = _mm512_fmadd_pd(_mm512_loadu_pd(x + i), _mm512_loadu_pd(y + i), s0);
        s1 = _mm512_fmadd_pd(_mm512_loadu_pd(x + i + 8), _mm512_loadu_pd(y + i + 8), s1);
    }
    double s = _mm512_reduce_add_pd(_mm512_add_pd(s0, s1));
    for (; i < n; ++i) s += x[i] * y[i];
    return s;
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
    const __m512d va = _mm512_set1_pd(alpha);
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        _mm512_storeu_pd(y + i, _mm512_fmadd_pd(va, _mm512_loadu_pd(x + i), _mm512_loadu_pd(y + i)));
    }
    for (; i < n; ++i) y[i] += alpha * x[i];
}

}  // namespace

const KernelSet avx512_kernels{Isa::avx512, kMr, kNr, &gemm_tile, &dot, &axpy};

}  // namespace flatlens::simd::detail
#endif
