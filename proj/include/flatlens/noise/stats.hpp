#pragma once

#include <span>
#include <utility>
#include <vector>

#include "flatlens/landscape/direction.hpp"
#include "flatlens/linalg/matrix.hpp"
#include "flatlens/noise/sample_set.hpp"

namespace flatlens {

// Mean-centred sample covariance with 1/(N-1), exactly symmetric.
Matrix covariance(const Matrix& samples);
inline Matrix covariance(const SampleSet& s) { return covariance(s.samples); }

// Variance (1/(N-1)) of the projections <row, dir>; equals dir^T Sigma dir.
double projected_variance(const Matrix& samples, std::span<const double> dir);
double projected_variance(const SampleSet& s, const Direction& dir);

double trace(const Matrix& m);

// Average ranks (1-based), ties sharing the mean rank.
std::vector<double> ranks(std::span<const double> v);
double pearson(std::span<const double> x, std::span<const double> y);
double spearman(std::span<const double> x, std::span<const double> y);

struct PowerLawFit {
    double slope = 0.0;
    double intercept = 0.0;  // natural log
    double spearman = 0.0;
    std::size_t used = 0;
    std::size_t excluded = 0;  // non-positive or non-finite pairs
};

// Least squares of log y on log x over the positive, finite pairs. Throws
// Error(config) when fewer than three usable pairs remain.
PowerLawFit powerlaw_fit(std::span<const std::pair<double, double>> pairs);

}  // namespace flatlens
