#include "flatlens/nn/train.hpp"

#include <cmath>
#include <string>

#include "flatlens/errors.hpp"
#include "flatlens/nn/rng.hpp"

namespace flatlens {

TrainResult train(const Architecture& arch, ParamVector params, const Batch& batch,
                  OptimizerState& optimizer, std::size_t steps, MaskPolicy policy,
                  std::uint64_t seed, const TrajectoryHook& hook, std::size_t first_step) {
    arch.validate();
    batch.validate(arch);
    optimizer.validate();
    require(steps >= 1, ErrorKind::config, "train: steps must be >= 1");
    const bool masked = policy == MaskPolicy::fresh_per_step && !arch.dropout.empty();

    TrainResult result;
    result.losses.reserve(steps);
    std::vector<double> grad(params.size());
    for (std::size_t i = 0; i < steps; ++i) {
        const std::size_t step = first_step + i + 1;
        double value = 0.0;
        try {
            if (masked) {
                const DropoutMask mask = sample_mask(arch, derive_seed(seed, seed_stream::train_mask, step));
                value = gradient(arch, params, batch, &mask, grad);
            } else {
                value = gradient(arch, params, batch, nullptr, grad);
            }
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::numeric) throw;
            fail(ErrorKind::numeric, "training diverged at step " + std::to_string(step) + ": " + e.what());
        }
        optimizer.apply(params.values, grad);
        result.losses.push_back(value);
        result.steps_run = i + 1;
        if (!params.all_finite()) {
            fail(ErrorKind::numeric, "training diverged at step " + std::to_string(step) +
                                         ": parameters are no longer finite");
        }
        if (hook && !hook(StepRecord{step, params, value})) break;
    }
    result.params = std::move(params);
    return result;
}

}  // namespace flatlens
