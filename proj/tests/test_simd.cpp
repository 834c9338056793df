#include <doctest.h>

#include <random>

#include "flatlens/errors.hpp"
#include "flatlens/linalg/blas.hpp"
#include "flatlens/simd/kernels.hpp"

using namespace flatlens;

namespace {

std::vector<double> gaussian(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd;
    std::vector<double> v(n);
    for (double& x : v) x = nd(rng);
    return v;
}

// Textbook triple loop.
void naive_gemm(bool ta, bool tb, std::size_t m, std::size_t n, std::size_t k, double alpha, const double* a,
                std::size_t lda, const double* b, std::size_t ldb, double beta, double* c, std::size_t ldc) {
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            double s = 0.0;
            for (std::size_t p = 0; p < k; ++p) {
                const double av = ta ? a[p * lda + i] : a[i * lda + p];
                const double bv = tb ? b[j * ldb + p] : b[p * ldb + j];
                s += av * bv;
            }
            c[i * ldc + j] = alpha * s + beta * c[i * ldc + j];
        }
    }
}

}  // namespace

TEST_CASE("isa names round trip and scalar is always available") {
    for (auto isa : {simd::Isa::scalar, simd::Isa::avx2, simd::Isa::avx512}) {
        CHECK(simd::parse_isa(simd::to_string(isa)) == isa);
    }
    CHECK(simd::supported(simd::Isa::scalar));
    CHECK_THROWS_AS(simd::parse_isa("neon9"), Error);
    const auto isas = simd::supported_isas();
    CHECK(isas.front() == simd::Isa::scalar);
}

TEST_CASE("every supported gemm variant matches the naive product") {
    const std::size_t shapes[][3] = {{1, 1, 1}, {5, 7, 3}, {13, 17, 300}, {64, 50, 129}, {121, 33, 257}};
    for (auto isa : simd::supported_isas()) {
        const auto& ks = simd::kernels(isa);
        for (const auto& s : shapes) {
            for (int t = 0; t < 4; ++t) {
                const bool ta = t & 1, tb = t & 2;
                const std::size_t m = s[0], n = s[1], k = s[2];
                const auto a = gaussian(m * k, 1 + t);
                const auto b = gaussian(k * n, 11 + t);
                auto c = gaussian(m * n, 21 + t);
                auto expect = c;
                const std::size_t lda = ta ? m : k, ldb = tb ? k : n;
                naive_gemm(ta, tb, m, n, k, 0.7, a.data(), lda, b.data(), ldb, -0.3, expect.data(), n);
                gemm(ta ? Trans::yes : Trans::no, tb ? Trans::yes : Trans::no, m, n, k, 0.7, a.data(), lda,
                     b.data(), ldb, -0.3, c.data(), n, ks);
                double err = 0.0;
                for (std::size_t i = 0; i < c.size(); ++i) err = std::max(err, std::abs(c[i] - expect[i]));
                INFO(simd::to_string(isa), " m=", m, " n=", n, " k=", k, " t=", t);
                CHECK(err < 1e-11 * static_cast<double>(k));
            }
        }
    }
}

TEST_CASE("beta zero ignores NaN garbage in C") {
    const auto a = gaussian(6, 1), b = gaussian(6, 2);
    std::vector<double> c(4, std::numeric_limits<double>::quiet_NaN());
    gemm(Trans::no, Trans::no, 2, 2, 3, 1.0, a.data(), 3, b.data(), 2, 0.0, c.data(), 2);
    for (double x : c) CHECK(std::isfinite(x));
}

TEST_CASE("dot and axpy variants agree with the scalar reference") {
    const auto& ref = simd::kernels(simd::Isa::scalar);
    for (std::size_t n : {0u, 1u, 3u, 8u, 17u, 1000u, 2501u}) {
        const auto x = gaussian(n, n + 1), y = gaussian(n, n + 2);
        const double d0 = ref.dot(x.data(), y.data(), n);
        auto y0 = y;
        ref.axpy(0.37, x.data(), y0.data(), n);
        for (auto isa : simd::supported_isas()) {
            const auto& ks = simd::kernels(isa);
            INFO(simd::to_string(isa), " n=", n);
            CHECK(ks.dot(x.data(), y.data(), n) == doctest::Approx(d0).epsilon(1e-12));
            auto y1 = y;
            ks.axpy(0.37, x.data(), y1.data(), n);
            for (std::size_t i = 0; i < n; ++i) CHECK(std::abs(y1[i] - y0[i]) <= 1e-15 * (1 + std::abs(y0[i])));
        }
    }
}

TEST_CASE("scalar gemm is bit-reproducible") {
    const auto a = gaussian(40 * 30, 5), b = gaussian(30 * 20, 6);
    const Matrix A(40, 30, a), B(30, 20, b);
    const auto& ks = simd::kernels(simd::Isa::scalar);
    CHECK(matmul(A, B, Trans::no, Trans::no, ks) == matmul(A, B, Trans::no, Trans::no, ks));
}
