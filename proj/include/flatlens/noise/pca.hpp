#pragma once

#include <span>
#include <vector>

#include "flatlens/landscape/flatness.hpp"
#include "flatlens/linalg/eigh.hpp"
#include "flatlens/objective.hpp"

namespace flatlens {

struct VarianceFlatnessPoint {
    std::size_t index;    // PCA index i
    double variance;      // lambda_i(Sigma)
    FlatnessResult flatness;
};

struct PcaScatterOptions {
    std::size_t k_top = 50;
    double eigen_floor_ratio = 1e-12;  // skip lambda_i <= ratio * lambda_1
    FlatnessOptions flatness;
};

// Interval flatness of the objective along each of the top-k covariance
// eigenvectors (unit norm, slice coordinates). Directions whose eigenvalue
// falls below the floor are skipped.
std::vector<VarianceFlatnessPoint> pca_flatness_scatter(const Spectrum& sigma, const Objective& f,
                                                        std::span<const double> center,
                                                        const PcaScatterOptions& opt = {});

}  // namespace flatlens
