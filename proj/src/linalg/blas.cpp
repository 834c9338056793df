#include "flatlens/linalg/blas.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "flatlens/errors.hpp"

namespace flatlens {
namespace {

constexpr std::size_t kKc = 256;
constexpr std::size_t kMcTarget = 120;
constexpr std::size_t kNcTarget = 4096;

// Packs rows [i0, i0+mc) x cols [p0, p0+kc) of op(A) into mr-row strips,
// zero-padding the last strip.
void pack_a(Trans ta, const double* a, std::size_t lda, std::size_t i0, std::size_t p0,
            std::size_t mc, std::size_t kc, std::size_t mr, double* out) {
    for (std::size_t s = 0; s < mc; s += mr) {
        const std::size_t rows = std::min(mr, mc - s);
        for (std::size_t p = 0; p < kc; ++p) {
            double* dst = out + p * mr;
            for (std::size_t i = 0; i < rows; ++i) {
                const std::size_t gi = i0 + s + i;
                const std::size_t gp = p0 + p;
                dst[i] = ta == Trans::no ? a[gi * lda + gp] : a[gp * lda + gi];
            }
            for (std::size_t i = rows; i < mr; ++i) dst[i] = 0.0;
        }
        out += kc * mr;
    }
}

void pack_b(Trans tb, const double* b, std::size_t ldb, std::size_t p0, std::size_t j0,
            std::size_t kc, std::size_t nc, std::size_t nr, double* out) {
    for (std::size_t t = 0; t < nc; t += nr) {
        const std::size_t cols = std::min(nr, nc - t);
        for (std::size_t p = 0; p < kc; ++p) {
            double* dst = out + p * nr;
            const std::size_t gp = p0 + p;
            if (tb == Trans::no) {
                const double* src = b + gp * ldb + j0 + t;
                std::copy(src, src + cols, dst);
            } else {
                for (std::size_t j = 0; j < cols; ++j) dst[j] = b[(j0 + t + j) * ldb + gp];
            }
            for (std::size_t j = cols; j < nr; ++j) dst[j] = 0.0;
        }
        out += kc * nr;
    }
}

std::size_t round_up(std::size_t x, std::size_t to) { return (x + to - 1) / to * to; }

}  // namespace

void gemm(Trans ta, Trans tb, std::size_t m, std::size_t n, std::size_t k, double alpha,
          const double* a, std::size_t lda, const double* b, std::size_t ldb, double beta,
          double* c, std::size_t ldc, const simd::KernelSet& ks) {
    if (m == 0 || n == 0) return;
    for (std::size_t i = 0; i < m; ++i) {
        double* cr = c + i * ldc;
        if (beta == 0.0) {
            std::fill(cr, cr + n, 0.0);
        } else if (beta != 1.0) {
            for (std::size_t j = 0; j < n; ++j) cr[j] *= beta;
        }
    }
    if (k == 0 || alpha == 0.0) return;

    const std::size_t mr = ks.mr;
    const std::size_t nr = ks.nr;
    const std::size_t mc_max = std::max(mr, kMcTarget / mr * mr);
    const std::size_t nc_max = std::max(nr, kNcTarget / nr * nr);

    thread_local std::vector<double> abuf;
    thread_local std::vector<double> bbuf;
    abuf.resize(mc_max * kKc);
    bbuf.resize(round_up(std::min(n, nc_max), nr) * kKc);

    double tile[simd::kMaxTile];

    for (std::size_t jc = 0; jc < n; jc += nc_max) {
        const std::size_t nc = std::min(nc_max, n - jc);
        for (std::size_t pc = 0; pc < k; pc += kKc) {
            const std::size_t kc = std::min(kKc, k - pc);
            pack_b(tb, b, ldb, pc, jc, kc, nc, nr, bbuf.data());
            for (std::size_t ic = 0; ic < m; ic += mc_max) {
                const std::size_t mc = std::min(mc_max, m - ic);
                pack_a(ta, a, lda, ic, pc, mc, kc, mr, abuf.data());
                for (std::size_t jr = 0; jr < nc; jr += nr) {
                    const std::size_t cols = std::min(nr, nc - jr);
                    const double* bp = bbuf.data() + (jr / nr) * kc * nr;
                    for (std::size_t ir = 0; ir < mc; ir += mr) {
                        const std::size_t rows = std::min(mr, mc - ir);
                        const double* ap = abuf.data() + (ir / mr) * kc * mr;
                        double* cp = c + (ic + ir) * ldc + jc + jr;
                        if (rows == mr && cols == nr) {
                            ks.gemm_tile(kc, ap, bp, cp, ldc, alpha);
                        } else {
                            std::fill(tile, tile + mr * nr, 0.0);
                            ks.gemm_tile(kc, ap, bp, tile, nr, alpha);
                            for (std::size_t i = 0; i < rows; ++i) {
                                for (std::size_t j = 0; j < cols; ++j) {
                                    cp[i * ldc + j] += tile[i * nr + j];
                                }
                            }
                        }
                    }
                }
            }
        }
    }
}

Matrix matmul(const Matrix& a, const Matrix& b, Trans ta, Trans tb, const simd::KernelSet& ks) {
    const std::size_t m = ta == Trans::no ? a.rows() : a.cols();
    const std::size_t ka = ta == Trans::no ? a.cols() : a.rows();
    const std::size_t kb = tb == Trans::no ? b.rows() : b.cols();
    const std::size_t n = tb == Trans::no ? b.cols() : b.rows();
    require(ka == kb, ErrorKind::dimension,
            "matmul: inner dimensions differ (" + std::to_string(ka) + " vs " +
                std::to_string(kb) + ")");
    Matrix c(m, n);
    gemm(ta, tb, m, n, ka, 1.0, a.data(), a.cols(), b.data(), b.cols(), 0.0, c.data(), n, ks);
    return c;
}

double dot(std::span<const double> x, std::span<const double> y, const simd::KernelSet& ks) {
    require(x.size() == y.size(), ErrorKind::dimension, "dot: length mismatch");
    return ks.dot(x.data(), y.data(), x.size());
}

void axpy(double alpha, std::span<const double> x, std::span<double> y,
          const simd::KernelSet& ks) {
    require(x.size() == y.size(), ErrorKind::dimension, "axpy: length mismatch");
    ks.axpy(alpha, x.data(), y.data(), x.size());
}

double norm2(std::span<const double> x, const simd::KernelSet& ks) {
    return std::sqrt(ks.dot(x.data(), x.data(), x.size()));
}

}  // namespace flatlens
