#pragma once

#include <string>
#include <vector>

#include "flatlens/linalg/matrix.hpp"

namespace flatlens {

enum class SpectrumSource { trajectory_covariance, gradient_covariance, hessian, other };

std::string to_string(SpectrumSource s);
SpectrumSource parse_spectrum_source(const std::string& s);

// Eigen-decomposition of a symmetric matrix: values in descending order,
// vectors as orthonormal columns with the largest-magnitude entry of each
// made positive.
struct Spectrum {
    std::vector<double> values;
    Matrix vectors;  // column i pairs with values[i]
    SpectrumSource source = SpectrumSource::other;

    std::size_t dim() const noexcept { return values.size(); }
    std::vector<double> vector(std::size_t i) const;
    // V diag(values) V^T
    Matrix reconstruct() const;
};

// Symmetrizes (M + M^T)/2 and decomposes it. Throws Error(numeric) for
// non-finite entries or asymmetry above 1e-10 * max(1, |M|_max).
Spectrum eigh(const Matrix& m, SpectrumSource source = SpectrumSource::other);

}  // namespace flatlens
