#include "flatlens/noise/collect.hpp"

#include <numeric>

#include "flatlens/nn/rng.hpp"

namespace flatlens {

PhaseDetector::PhaseDetector(const Architecture& arch, const Batch& batch, PhaseDetectorOptions opt)
    : arch_(arch), batch_(batch), opt_(opt) {
    require(opt_.window >= 2 && opt_.window % 2 == 0, ErrorKind::config,
            "phase_detector.window: must be an even number >= 2");
}

bool PhaseDetector::observe(const StepRecord& rec) {
    if (entered_at_) return true;
    losses_.push_back(rec.loss);
    if (losses_.size() > opt_.window) losses_.pop_front();
    if (losses_.size() < opt_.window) return false;

    const auto half = static_cast<std::ptrdiff_t>(opt_.window / 2);
    const double older = std::accumulate(losses_.begin(), losses_.begin() + half, 0.0) / double(half);
    const double newer = std::accumulate(losses_.begin() + half, losses_.end(), 0.0) / double(half);
    last_decrease_ = older > 0.0 ? (older - newer) / older : 0.0;
    if (last_decrease_ >= opt_.max_relative_decrease) return false;

    if (last_accuracy_step_ == 0 || rec.step >= last_accuracy_step_ + opt_.accuracy_stride) {
        last_accuracy_ = accuracy(arch_, rec.params, batch_, opt_.accuracy_mode);
        last_accuracy_step_ = rec.step;
    }
    if (last_accuracy_ < opt_.min_accuracy) return false;
    entered_at_ = rec.step;
    return true;
}

void train_to_exploration(TrainRun& run, const Batch& batch, std::size_t max_steps,
                          const PhaseDetectorOptions& opt) {
    PhaseDetector detector(run.arch, batch, opt);
    const std::size_t start = run.step;
    auto result = train(run.arch, std::move(run.params), batch, run.optimizer, max_steps,
                        MaskPolicy::fresh_per_step, run.seed,
                        [&](const StepRecord& r) { return !detector.observe(r); }, start);
    run.params = std::move(result.params);
    run.step = start + result.steps_run;
    run.losses.insert(run.losses.end(), result.losses.begin(), result.losses.end());
    if (!detector.entered()) {
        throw PhaseTimeout("exploration phase not reached within " + std::to_string(max_steps) +
                               " steps (last relative decrease " +
                               std::to_string(detector.last_relative_decrease()) + ", accuracy " +
                               std::to_string(detector.last_accuracy()) + ")",
                           run.losses);
    }
}

SampleSet collect_trajectory(TrainRun& run, const Batch& batch, const ParamSlice& slice,
                             std::size_t n) {
    require(n >= 2, ErrorKind::config, "trajectory sampling needs N >= 2");
    require(slice.offset + slice.length <= run.params.size(), ErrorKind::dimension,
            "slice " + slice.name + " exceeds parameter vector");
    SampleSet s;
    s.kind = SampleKind::trajectory;
    s.samples = Matrix(n, slice.length);
    s.meta.seed = run.seed;
    s.meta.keep = run.arch.dropout.empty() ? 1.0 : run.arch.dropout.front().keep;
    s.meta.lr = run.optimizer.lr;
    s.meta.slice = slice.name;
    s.meta.step_begin = run.step + 1;
    std::size_t row = 0;
    const std::size_t start = run.step;
    auto result = train(run.arch, std::move(run.params), batch, run.optimizer, n,
                        MaskPolicy::fresh_per_step, run.seed,
                        [&](const StepRecord& r) {
                            auto part = slice.view(std::span<const double>(r.params.values));
                            std::copy(part.begin(), part.end(), s.samples.row(row).begin());
                            ++row;
                            return true;
                        },
                        start);
    run.params = std::move(result.params);
    run.step = start + result.steps_run;
    run.losses.insert(run.losses.end(), result.losses.begin(), result.losses.end());
    s.meta.step_end = run.step;
    return s;
}

GradientSamples sample_gradients(const Architecture& probe, const ParamVector& params,
                                 const Batch& batch, const ParamSlice& slice, std::size_t n,
                                 std::uint64_t seed) {
    require(n >= 2, ErrorKind::config, "gradient sampling needs N >= 2");
    require(!probe.dropout.empty(), ErrorKind::config, "gradient sampling needs a dropout layer to probe");
    const SliceEvaluator eval(probe, params, batch, slice);
    const std::vector<double> x = slice.extract(params.values);

    GradientSamples out;
    out.set.kind = SampleKind::gradient;
    out.set.samples = Matrix(n, slice.length);
    out.set.meta.seed = seed;
    out.set.meta.keep = probe.dropout.front().keep;
    out.set.meta.slice = slice.name;
    bool all_full = true;
    for (std::size_t i = 0; i < n; ++i) {
        const DropoutMask mask = sample_mask(probe, derive_seed(seed, seed_stream::gradient_mask, i));
        for (const auto& layer : mask.layers) {
            for (double r : layer) all_full = all_full && r == 1.0;
        }
        eval.gradient(x, &mask, out.set.samples.row(i));
    }
    if (all_full) {
        out.warning = "every sampled mask keeps all units; the gradient samples coincide";
    }
    return out;
}

}  // namespace flatlens
