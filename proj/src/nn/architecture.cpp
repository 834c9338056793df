#include "flatlens/nn/architecture.hpp"

#include <cmath>
#include <sstream>

#include "flatlens/errors.hpp"

namespace flatlens {

std::string_view to_string(Activation a) noexcept {
    return a == Activation::relu ? "relu" : "tanh";
}

Activation parse_activation(std::string_view name) {
    if (name == "relu") return Activation::relu;
    if (name == "tanh") return Activation::tanh;
    fail(ErrorKind::config, "activation: unknown value '" + std::string(name) + "'");
}

std::string_view to_string(InitScheme s) noexcept { return s == InitScheme::xavier ? "xavier" : "he"; }

InitScheme parse_init(std::string_view name) {
    if (name == "xavier") return InitScheme::xavier;
    if (name == "he") return InitScheme::he;
    fail(ErrorKind::config, "init: unknown value '" + std::string(name) + "'");
}

std::size_t Architecture::param_count() const noexcept {
    std::size_t n = 0;
    for (std::size_t l = 0; l + 1 < widths.size(); ++l) n += widths[l + 1] * (widths[l] + 1);
    return n;
}

const DropoutLayer* Architecture::dropout_at(std::size_t layer) const noexcept {
    for (const auto& d : dropout) {
        if (d.layer == layer) return &d;
    }
    return nullptr;
}

void Architecture::validate() const {
    require(widths.size() >= 2, ErrorKind::config, "layer_widths: need at least two entries");
    for (std::size_t i = 0; i < widths.size(); ++i) {
        require(widths[i] > 0, ErrorKind::config,
                "layer_widths[" + std::to_string(i) + "]: must be positive");
    }
    for (std::size_t i = 0; i < dropout.size(); ++i) {
        const auto& d = dropout[i];
        const std::string field = "dropout[" + std::to_string(i) + "]";
        require(d.layer >= 1 && d.layer + 1 <= depth(), ErrorKind::config,
                field + ".layer: must lie in [1, " + std::to_string(depth() - 1) + "], got " +
                    std::to_string(d.layer));
        require(std::isfinite(d.keep) && d.keep >= 0.0 && d.keep <= 1.0, ErrorKind::config,
                field + ".keep: must lie in [0, 1]");
        for (std::size_t j = 0; j < i; ++j) {
            require(dropout[j].layer != d.layer, ErrorKind::config,
                    field + ".layer: duplicate layer " + std::to_string(d.layer));
        }
    }
}

Architecture Architecture::with_dropout(std::vector<DropoutLayer> spec) const {
    Architecture a = *this;
    a.dropout = std::move(spec);
    a.validate();
    return a;
}

std::string Architecture::describe() const {
    std::ostringstream os;
    for (std::size_t i = 0; i < widths.size(); ++i) os << (i ? "-" : "") << widths[i];
    os << " " << to_string(activation);
    for (const auto& d : dropout) os << " dropout@" << d.layer << "=" << d.keep;
    return os.str();
}

}  // namespace flatlens
