#pragma once

#include <cstdint>
#include <deque>
#include <optional>
#include <string>
#include <vector>

#include "flatlens/errors.hpp"
#include "flatlens/noise/sample_set.hpp"
#include "flatlens/nn/optimizer.hpp"
#include "flatlens/nn/train.hpp"

namespace flatlens {

struct PhaseDetectorOptions {
    std::size_t window = 100;
    double max_relative_decrease = 0.01;
    double min_accuracy = 0.99;
    // Training accuracy (inference-mode forward pass) is re-measured at most
    // this often once the loss criterion holds.
    std::size_t accuracy_stride = 10;
    DropoutMode accuracy_mode = DropoutMode::expectation;
};

// Exploration-phase test: over the last `window` steps the mean training loss
// of the second half is less than 1% below the mean of the first half, and
// the training accuracy is at least 99%.
class PhaseDetector {
public:
    PhaseDetector(const Architecture& arch, const Batch& batch, PhaseDetectorOptions opt = {});

    // Feed one step; true once the phase has been entered.
    bool observe(const StepRecord& rec);

    bool entered() const noexcept { return entered_at_.has_value(); }
    std::optional<std::size_t> entered_at() const noexcept { return entered_at_; }
    double last_accuracy() const noexcept { return last_accuracy_; }
    double last_relative_decrease() const noexcept { return last_decrease_; }

private:
    const Architecture& arch_;
    const Batch& batch_;
    PhaseDetectorOptions opt_;
    std::deque<double> losses_;
    std::size_t last_accuracy_step_ = 0;
    double last_accuracy_ = 0.0;
    double last_decrease_ = 1.0;
    std::optional<std::size_t> entered_at_;
};

// Raised when training never reaches the exploration phase.
class PhaseTimeout : public Error {
public:
    PhaseTimeout(const std::string& what, std::vector<double> losses)
        : Error(ErrorKind::timeout, what), losses_(std::move(losses)) {}
    const std::vector<double>& losses() const noexcept { return losses_; }

private:
    std::vector<double> losses_;
};

struct TrainRun {
    Architecture arch;
    ParamVector params;
    OptimizerState optimizer;
    std::uint64_t seed = 0;
    std::size_t step = 0;  // steps taken so far
    std::vector<double> losses;
};

// Trains with fresh masks until the detector fires (or max_steps), leaving
// `run` at the entry point. Throws PhaseTimeout carrying the loss curve.
void train_to_exploration(TrainRun& run, const Batch& batch, std::size_t max_steps,
                          const PhaseDetectorOptions& opt = {});

// Continues `run` for n steps and records the slice after each step.
SampleSet collect_trajectory(TrainRun& run, const Batch& batch, const ParamSlice& slice,
                             std::size_t n);

struct GradientSamples {
    SampleSet set;
    // Set when every sampled mask keeps all units, so all rows coincide.
    std::optional<std::string> warning;
};

// N slice gradients of the loss at frozen parameters, each under an
// independent mask from `probe` (mask i uses derive_seed(seed, gradient_mask, i)).
GradientSamples sample_gradients(const Architecture& probe, const ParamVector& params,
                                 const Batch& batch, const ParamSlice& slice, std::size_t n,
                                 std::uint64_t seed);

}  // namespace flatlens
