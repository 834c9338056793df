#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "flatlens/hessian/hessian.hpp"
#include "flatlens/nn/network.hpp"
#include "flatlens/nn/optimizer.hpp"

namespace flatlens {

struct AlignmentTerms {
    double tr_h_sigma = 0.0;      // Tr(H Sigma)
    double tr_h_sigma_bar = 0.0;  // Tr(H Sigma_bar), Sigma_bar = (Tr Sigma / D) I
    double tr_h = 0.0;
    double tr_sigma = 0.0;
    double ratio = 0.0;           // tr_h_sigma / tr_h_sigma_bar
};

// H and Sigma must be symmetric and of equal size.
AlignmentTerms alignment_terms(const Matrix& h, const Matrix& sigma);

struct AlignmentStep {
    std::size_t step = 0;
    AlignmentTerms terms;
    double hessian_asymmetry = 0.0;
    std::optional<std::string> error;  // set when this step was skipped
};

struct AlignmentTrace {
    std::vector<AlignmentStep> steps;

    std::vector<const AlignmentStep*> completed() const;
};

struct AlignmentOptions {
    std::size_t steps = 100;        // training steps after the initial point
    std::size_t stride = 10;        // log at 0, stride, 2*stride, ...
    std::size_t samples = 1000;     // probe gradients per logged step
    std::uint64_t seed = 0;         // probe mask stream
    std::string slice = "W1";
    HessianOptions hessian;
};

// Trains `arch` (its own dropout list is ignored) by full-batch GD without
// dropout. At each logged step the slice Hessian of the deterministic loss and
// the covariance of probe gradients (masks from `probe`) are formed at the
// frozen parameters. A step whose Hessian or sampling fails is recorded with
// its error and skipped.
AlignmentTrace alignment_trace(const Architecture& arch, ParamVector params, const Batch& batch,
                               OptimizerState optimizer, const Architecture& probe,
                               const AlignmentOptions& opt);

void write_alignment_csv(std::ostream& out, const AlignmentTrace& trace);

}  // namespace flatlens
