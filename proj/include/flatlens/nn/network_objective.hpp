#pragma once

#include "flatlens/nn/network.hpp"
#include "flatlens/objective.hpp"

namespace flatlens {

// Deterministic loss L(theta) (no mask, no rescaling) as a function of one
// parameter slice, all other coordinates frozen.
class NetworkObjective final : public Objective {
public:
    NetworkObjective(Architecture arch, ParamVector params, const Batch& batch, ParamSlice slice)
        : eval_(std::move(arch), std::move(params), batch, std::move(slice)) {}

    std::size_t dim() const override { return eval_.dim(); }
    double value(std::span<const double> x) const override { return eval_.loss(x); }
    double gradient(std::span<const double> x, std::span<double> g) const override {
        return eval_.gradient(x, nullptr, g);
    }

    const SliceEvaluator& evaluator() const noexcept { return eval_; }
    // Current slice coordinates of the frozen parameters.
    std::vector<double> center() const { return eval_.slice().extract(eval_.base().values); }

private:
    SliceEvaluator eval_;
};

}  // namespace flatlens
