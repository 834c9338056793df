#include "flatlens/nn/optimizer.hpp"

#include <cmath>
#include <string>

#include "flatlens/errors.hpp"

namespace flatlens {

std::string_view to_string(OptimizerKind k) noexcept { return k == OptimizerKind::gd ? "gd" : "adam"; }

OptimizerKind parse_optimizer(std::string_view name) {
    if (name == "gd") return OptimizerKind::gd;
    if (name == "adam") return OptimizerKind::adam;
    fail(ErrorKind::config, "optimizer.kind: unknown value '" + std::string(name) + "'");
}

OptimizerState OptimizerState::gd(double lr) {
    OptimizerState s;
    s.kind = OptimizerKind::gd;
    s.lr = lr;
    return s;
}

OptimizerState OptimizerState::adam(double lr, double beta1, double beta2, double eps) {
    OptimizerState s;
    s.kind = OptimizerKind::adam;
    s.lr = lr;
    s.beta1 = beta1;
    s.beta2 = beta2;
    s.eps = eps;
    return s;
}

void OptimizerState::validate() const {
    require(std::isfinite(lr) && lr >= 0.0, ErrorKind::config, "optimizer.lr: must be finite and >= 0");
    if (kind == OptimizerKind::adam) {
        require(beta1 >= 0.0 && beta1 < 1.0, ErrorKind::config, "optimizer.beta1: must lie in [0, 1)");
        require(beta2 >= 0.0 && beta2 < 1.0, ErrorKind::config, "optimizer.beta2: must lie in [0, 1)");
        require(eps > 0.0, ErrorKind::config, "optimizer.eps: must be positive");
    }
}

void OptimizerState::apply(std::span<double> params, std::span<const double> grad) {
    require(params.size() == grad.size(), ErrorKind::dimension, "optimizer: gradient length mismatch");
    ++step;
    if (kind == OptimizerKind::gd) {
        for (std::size_t i = 0; i < params.size(); ++i) params[i] -= lr * grad[i];
        return;
    }
    if (m.empty()) {
        m.assign(params.size(), 0.0);
        v.assign(params.size(), 0.0);
    }
    require(m.size() == params.size() && v.size() == params.size(), ErrorKind::dimension,
            "optimizer: moment length mismatch");
    const double t = static_cast<double>(step);
    const double c1 = 1.0 - std::pow(beta1, t);
    const double c2 = 1.0 - std::pow(beta2, t);
    for (std::size_t i = 0; i < params.size(); ++i) {
        m[i] = beta1 * m[i] + (1.0 - beta1) * grad[i];
        v[i] = beta2 * v[i] + (1.0 - beta2) * grad[i] * grad[i];
        const double mhat = m[i] / c1;
        const double vhat = v[i] / c2;
        params[i] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
}

}  // namespace flatlens
