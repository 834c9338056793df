#pragma once

#include <cstdint>
#include <vector>

#include "flatlens/linalg/matrix.hpp"
#include "flatlens/objective.hpp"

namespace flatlens {

// L(x) = base + 1/2 (x - minimum)^T A (x - minimum).
class QuadraticObjective final : public Objective {
public:
    QuadraticObjective(Matrix hessian, std::vector<double> minimum, double base);

    std::size_t dim() const override { return minimum_.size(); }
    double value(std::span<const double> x) const override;
    double gradient(std::span<const double> x, std::span<double> g) const override;

    const Matrix& hessian() const noexcept { return hessian_; }
    const std::vector<double>& minimum() const noexcept { return minimum_; }
    double base() const noexcept { return base_; }

private:
    Matrix hessian_;
    std::vector<double> minimum_;
    double base_;
};

// Random orthogonal matrix (QR of a Gaussian matrix, signs fixed).
Matrix random_orthogonal(std::size_t n, std::uint64_t seed);

// Q diag(eigenvalues) Q^T with a random orthogonal Q.
Matrix psd_with_spectrum(const std::vector<double>& eigenvalues, std::uint64_t seed);

struct QuadraticTask {
    QuadraticObjective objective;
    Matrix hessian;
    std::vector<double> minimum;
};

// Quadratic landscape with the given Hessian spectrum (rotated by a random
// orthogonal basis unless `axis_aligned`) and a Gaussian minimum.
QuadraticTask synthetic_quadratic_task(std::uint64_t seed, const std::vector<double>& spectrum,
                                       double base = 1.0, bool axis_aligned = false);

}  // namespace flatlens
