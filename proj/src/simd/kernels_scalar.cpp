#include "flatlens/simd/kernels.hpp"

namespace flatlens::simd::detail {
namespace {

constexpr std::size_t kMr = 4;
constexpr std::size_t kNr = 4;

void gemm_tile(std::size_t kc, const double* a, const double* b, double* c,
               std::size_t ldc, double alpha) {
    double acc[kMr][kNr] = {};
    for (std::size_t p = 0; p < kc; ++p) {
        const double* ap = a + p * kMr;
        const double* bp = b + p * kNr;
        for (std::size_t i = 0; i < kMr; ++i) {
            for (std::size_t j = 0; j < kNr; ++j) acc[i][j] += ap[i] * bp[j];
        }
    }
    for (std::size_t i = 0; i < kMr; ++i) {
        for (std::size_t j = 0; j < kNr; ++j) c[i * ldc + j] += alpha * acc[i][j];
    }
}

double dot(const double* x, const double* y, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += x[i] * y[i];
    return s;
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

}  // namespace

const KernelSet scalar_kernels{Isa::scalar, kMr, kNr, &gemm_tile, &dot, &axpy};

}  // namespace flatlens::simd::detail
