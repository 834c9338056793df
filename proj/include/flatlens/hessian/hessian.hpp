#pragma once

#include <span>
#include <string>
#include <vector>

#include "flatlens/landscape/direction.hpp"
#include "flatlens/linalg/eigh.hpp"
#include "flatlens/noise/sample_set.hpp"
#include "flatlens/objective.hpp"

namespace flatlens {

// Default finite-difference step 1e-4 * (1 + |x|_inf).
double default_fd_step(std::span<const double> x);

// (g(x + h dir) - g(x - h dir)) / (2h).
std::vector<double> hvp(const Objective& f, std::span<const double> x, std::span<const double> dir,
                        double h);

// Steps tried when HessianOptions::h is automatic: 1e-4 down to 1e-7 times
// (1 + |x|_inf). ReLU networks on many examples need the small end.
std::vector<double> auto_fd_steps(std::span<const double> x);

struct HessianOptions {
    double h = 0.0;                 // <= 0 tries auto_fd_steps in order
    std::size_t max_dim = 4096;
    double asymmetry_tol = 1e-4;    // relative to |H|_max
    bool fail_on_asymmetry = true;
};

struct HessianMatrix {
    Matrix values;        // symmetrized (H + H^T)/2
    double h = 0.0;
    // |H - H^T|_max / |H|_max of the raw finite-difference matrix.
    double asymmetry = 0.0;
    // Columns taken from a one-sided difference because a kink lay within h.
    std::size_t one_sided_columns = 0;
    std::string method = "fd-of-gradient";
};

// Column j is hvp(e_j); the result is symmetrized. A column whose forward and
// backward differences disagree beyond asymmetry_tol is replaced by whichever
// one-sided difference agrees with its transposed row. With an automatic step the
// first step whose raw asymmetry is within tolerance is kept (a 32-column
// block is checked before each full pass). Throws Error(numeric) when no step
// qualifies, unless fail_on_asymmetry is false, in which case the last
// attempt is returned.
HessianMatrix assemble_hessian(const Objective& f, std::span<const double> x,
                               const HessianOptions& opt = {});

struct ProjectionPoint {
    std::size_t index;
    double eigenvalue;  // lambda_i(H)
    double variance;    // Var(Proj_{v_i(H)}(S))
};

std::vector<ProjectionPoint> hessian_projection_scatter(const Spectrum& h, const Matrix& samples,
                                                        std::size_t k_top);
inline std::vector<ProjectionPoint> hessian_projection_scatter(const Spectrum& h, const SampleSet& s,
                                                               std::size_t k_top) {
    return hessian_projection_scatter(h, s.samples, k_top);
}

}  // namespace flatlens
