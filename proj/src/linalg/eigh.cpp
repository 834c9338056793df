#include "flatlens/linalg/eigh.hpp"

#include <lapacke.h>

#include <algorithm>
#include <cmath>

#include "flatlens/errors.hpp"
#include "flatlens/linalg/blas.hpp"

namespace flatlens {

std::string to_string(SpectrumSource s) {
    switch (s) {
        case SpectrumSource::trajectory_covariance: return "sigma_t";
        case SpectrumSource::gradient_covariance: return "sigma_g";
        case SpectrumSource::hessian: return "H";
        case SpectrumSource::other: return "other";
    }
    return "other";
}

SpectrumSource parse_spectrum_source(const std::string& s) {
    if (s == "sigma_t") return SpectrumSource::trajectory_covariance;
    if (s == "sigma_g") return SpectrumSource::gradient_covariance;
    if (s == "H") return SpectrumSource::hessian;
    if (s == "other") return SpectrumSource::other;
    fail(ErrorKind::parse, "unknown spectrum source tag '" + s + "'");
}

std::vector<double> Spectrum::vector(std::size_t i) const {
    std::vector<double> v(vectors.rows());
    for (std::size_t r = 0; r < v.size(); ++r) v[r] = vectors(r, i);
    return v;
}

Matrix Spectrum::reconstruct() const {
    Matrix scaled = vectors;
    for (std::size_t r = 0; r < scaled.rows(); ++r) {
        for (std::size_t c = 0; c < scaled.cols(); ++c) scaled(r, c) *= values[c];
    }
    return matmul(scaled, vectors, Trans::no, Trans::yes);
}

Spectrum eigh(const Matrix& m, SpectrumSource source) {
    const std::size_t n = m.rows();
    require(n == m.cols() && n > 0, ErrorKind::dimension, "eigh: matrix must be square and non-empty");
    double scale = 1.0;
    for (double x : m.values()) {
        require(std::isfinite(x), ErrorKind::numeric, "eigh: matrix has non-finite entries");
        scale = std::max(scale, std::abs(x));
    }
    Matrix a(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j <= i; ++j) {
            require(std::abs(m(i, j) - m(j, i)) <= 1e-10 * scale, ErrorKind::numeric,
                    "eigh: matrix is not symmetric");
            const double s = 0.5 * (m(i, j) + m(j, i));
            a(i, j) = s;
            a(j, i) = s;
        }
    }

    std::vector<double> w(n);
    const lapack_int info = LAPACKE_dsyevd(LAPACK_ROW_MAJOR, 'V', 'U', static_cast<lapack_int>(n),
                                           a.data(), static_cast<lapack_int>(n), w.data());
    require(info == 0, ErrorKind::numeric, "eigh: LAPACK dsyevd failed (info=" + std::to_string(info) + ")");

    Spectrum s;
    s.source = source;
    s.values.resize(n);
    s.vectors = Matrix(n, n);
    for (std::size_t k = 0; k < n; ++k) {
        const std::size_t src = n - 1 - k;  // ascending -> descending
        s.values[k] = w[src];
        std::size_t arg = 0;
        for (std::size_t r = 1; r < n; ++r) {
            if (std::abs(a(r, src)) > std::abs(a(arg, src))) arg = r;
        }
        const double sign = a(arg, src) < 0.0 ? -1.0 : 1.0;
        for (std::size_t r = 0; r < n; ++r) s.vectors(r, k) = sign * a(r, src);
    }
    return s;
}

}  // namespace flatlens
