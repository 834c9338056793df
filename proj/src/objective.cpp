#include "flatlens/objective.hpp"

#include "flatlens/errors.hpp"

namespace flatlens {

double FunctionObjective::gradient(std::span<const double> x, std::span<double> g) const {
    require(static_cast<bool>(grad_), ErrorKind::config, "objective has no gradient");
    return grad_(x, g);
}

double ScaledObjective::gradient(std::span<const double> x, std::span<double> g) const {
    const double v = base_.gradient(x, g);
    for (double& gi : g) gi *= scale_;
    return scale_ * v;
}

}  // namespace flatlens
