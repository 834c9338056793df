#pragma once

// Level-1/3 routines on top of the dispatched SIMD kernels.

#include <cstddef>
#include <span>

#include "flatlens/linalg/matrix.hpp"
#include "flatlens/simd/kernels.hpp"

namespace flatlens {

enum class Trans { no, yes };

// C = alpha * op(A) * op(B) + beta * C, all row-major.
// op(A) is m x k, op(B) is k x n.
void gemm(Trans ta, Trans tb, std::size_t m, std::size_t n, std::size_t k, double alpha,
          const double* a, std::size_t lda, const double* b, std::size_t ldb, double beta,
          double* c, std::size_t ldc, const simd::KernelSet& ks = simd::active());

// Matrix convenience form; shapes are checked.
Matrix matmul(const Matrix& a, const Matrix& b, Trans ta = Trans::no, Trans tb = Trans::no,
              const simd::KernelSet& ks = simd::active());

double dot(std::span<const double> x, std::span<const double> y,
           const simd::KernelSet& ks = simd::active());
void axpy(double alpha, std::span<const double> x, std::span<double> y,
          const simd::KernelSet& ks = simd::active());
double norm2(std::span<const double> x, const simd::KernelSet& ks = simd::active());

}  // namespace flatlens
