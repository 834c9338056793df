#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

namespace flatlens {

enum class OptimizerKind { gd, adam };

std::string_view to_string(OptimizerKind k) noexcept;
OptimizerKind parse_optimizer(std::string_view name);

struct OptimizerState {
    OptimizerKind kind = OptimizerKind::gd;
    double lr = 0.1;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    std::vector<double> m;
    std::vector<double> v;
    std::size_t step = 0;

    static OptimizerState gd(double lr);
    static OptimizerState adam(double lr, double beta1 = 0.9, double beta2 = 0.999,
                               double eps = 1e-8);

    // Throws Error(config) for invalid hyperparameters. A zero learning rate
    // is accepted and freezes the parameters.
    void validate() const;

    // In-place update of `params` from `grad`.
    void apply(std::span<double> params, std::span<const double> grad);
};

}  // namespace flatlens
