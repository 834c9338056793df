#include "flatlens/data/synthetic.hpp"

#include <cmath>
#include <random>

#include "flatlens/errors.hpp"
#include "flatlens/linalg/blas.hpp"

namespace flatlens {

QuadraticObjective::QuadraticObjective(Matrix hessian, std::vector<double> minimum, double base)
    : hessian_(std::move(hessian)), minimum_(std::move(minimum)), base_(base) {
    require(hessian_.rows() == minimum_.size() && hessian_.cols() == minimum_.size(),
            ErrorKind::dimension, "quadratic: Hessian and minimum sizes differ");
}

double QuadraticObjective::value(std::span<const double> x) const {
    require(x.size() == dim(), ErrorKind::dimension, "quadratic: wrong point dimension");
    const std::size_t n = dim();
    std::vector<double> d(n);
    for (std::size_t i = 0; i < n; ++i) d[i] = x[i] - minimum_[i];
    double q = 0.0;
    for (std::size_t i = 0; i < n; ++i) q += d[i] * dot(hessian_.row(i), d);
    return base_ + 0.5 * q;
}

double QuadraticObjective::gradient(std::span<const double> x, std::span<double> g) const {
    require(x.size() == dim() && g.size() == dim(), ErrorKind::dimension,
            "quadratic: wrong point dimension");
    const std::size_t n = dim();
    std::vector<double> d(n);
    for (std::size_t i = 0; i < n; ++i) d[i] = x[i] - minimum_[i];
    double q = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        g[i] = dot(hessian_.row(i), d);
        q += d[i] * g[i];
    }
    return base_ + 0.5 * q;
}

Matrix random_orthogonal(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss;
    // Modified Gram-Schmidt on the columns of a Gaussian matrix; done twice
    // for orthogonality to working precision.
    std::vector<std::vector<double>> cols(n, std::vector<double>(n));
    for (auto& c : cols) {
        for (double& x : c) x = gauss(rng);
    }
    for (std::size_t j = 0; j < n; ++j) {
        for (int pass = 0; pass < 2; ++pass) {
            for (std::size_t k = 0; k < j; ++k) {
                const double proj = dot(cols[k], cols[j]);
                axpy(-proj, cols[k], cols[j]);
            }
        }
        const double nrm = norm2(cols[j]);
        for (double& x : cols[j]) x /= nrm;
    }
    Matrix q(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) q(i, j) = cols[j][i];
    }
    return q;
}

Matrix psd_with_spectrum(const std::vector<double>& eigenvalues, std::uint64_t seed) {
    const std::size_t n = eigenvalues.size();
    const Matrix q = random_orthogonal(n, seed);
    Matrix scaled = q;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) scaled(i, j) *= eigenvalues[j];
    }
    Matrix a = matmul(scaled, q, Trans::no, Trans::yes);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < i; ++j) {
            const double s = 0.5 * (a(i, j) + a(j, i));
            a(i, j) = s;
            a(j, i) = s;
        }
    }
    return a;
}

QuadraticTask synthetic_quadratic_task(std::uint64_t seed, const std::vector<double>& spectrum,
                                       double base, bool axis_aligned) {
    require(!spectrum.empty(), ErrorKind::config, "quadratic task: empty spectrum");
    for (double e : spectrum) require(e >= 0.0, ErrorKind::config, "quadratic task: spectrum must be >= 0");
    const std::size_t n = spectrum.size();
    Matrix a(n, n);
    if (axis_aligned) {
        for (std::size_t i = 0; i < n; ++i) a(i, i) = spectrum[i];
    } else {
        a = psd_with_spectrum(spectrum, seed);
    }
    std::mt19937_64 rng(seed ^ 0x5bd1e995ULL);
    std::normal_distribution<double> gauss;
    std::vector<double> minimum(n);
    for (double& x : minimum) x = gauss(rng);
    QuadraticObjective obj(a, minimum, base);
    return QuadraticTask{std::move(obj), std::move(a), std::move(minimum)};
}

}  // namespace flatlens
