#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "flatlens/nn/network.hpp"
#include "flatlens/nn/optimizer.hpp"

namespace flatlens {

enum class MaskPolicy { fresh_per_step, none };

// Reported after each update. `loss` is the training loss at the
// pre-update parameters under that step's mask.
struct StepRecord {
    std::size_t step;  // 1-based
    const ParamVector& params;
    double loss;
};

// Return false to stop training after this step.
using TrajectoryHook = std::function<bool(const StepRecord&)>;

struct TrainResult {
    ParamVector params;
    std::vector<double> losses;
    std::size_t steps_run = 0;
};

// Full-batch training. Masks are drawn from derive_seed(seed, train_mask, step)
// so the run is a pure function of its inputs. `first_step` offsets the step
// counter (and mask stream) when a run is resumed. Throws Error(numeric) naming
// the step if the loss stops being finite.
TrainResult train(const Architecture& arch, ParamVector params, const Batch& batch,
                  OptimizerState& optimizer, std::size_t steps, MaskPolicy policy,
                  std::uint64_t seed, const TrajectoryHook& hook = {},
                  std::size_t first_step = 0);

}  // namespace flatlens
