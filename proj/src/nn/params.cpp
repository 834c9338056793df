#include "flatlens/nn/params.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>

#include "flatlens/errors.hpp"

namespace flatlens {

ParamLayout::ParamLayout(const Architecture& arch) {
    const std::size_t depth = arch.depth();
    std::size_t off = 0;
    for (std::size_t l = 0; l < depth; ++l) {
        weights_.push_back(tensors_.size());
        tensors_.push_back({TensorKind::weight, l, arch.widths[l + 1], arch.widths[l], off});
        off += arch.widths[l + 1] * arch.widths[l];
    }
    for (std::size_t l = 0; l < depth; ++l) {
        biases_.push_back(tensors_.size());
        tensors_.push_back({TensorKind::bias, l, arch.widths[l + 1], 1, off});
        off += arch.widths[l + 1];
    }
    total_ = off;
    shapes_ = arch.widths;
}

ParamVector::ParamVector(ParamLayout l, std::vector<double> v)
    : layout(std::move(l)), values(std::move(v)) {
    require(values.size() == layout.size(), ErrorKind::dimension,
            "parameter vector has " + std::to_string(values.size()) + " entries, layout needs " +
                std::to_string(layout.size()));
}

bool ParamVector::all_finite() const noexcept {
    return std::all_of(values.begin(), values.end(), [](double x) { return std::isfinite(x); });
}

ParamVector initialize(const Architecture& arch, InitScheme scheme, std::uint64_t seed) {
    arch.validate();
    ParamVector p(arch);
    std::mt19937_64 rng(seed);
    for (std::size_t l = 0; l < arch.depth(); ++l) {
        const auto& shape = p.layout.weight(l);
        auto w = p.tensor(shape);
        const double fan_in = static_cast<double>(shape.cols);
        const double fan_out = static_cast<double>(shape.rows);
        if (scheme == InitScheme::xavier) {
            const double bound = std::sqrt(6.0 / (fan_in + fan_out));
            std::uniform_real_distribution<double> dist(-bound, bound);
            for (double& x : w) x = dist(rng);
        } else {
            std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / fan_in));
            for (double& x : w) x = dist(rng);
        }
    }
    return p;
}

std::vector<double> ParamSlice::extract(std::span<const double> full) const {
    auto v = view(full);
    return {v.begin(), v.end()};
}

void ParamSlice::scatter(std::span<const double> part, std::span<double> full) const {
    require(part.size() == length, ErrorKind::dimension,
            "slice " + name + ": got " + std::to_string(part.size()) + " values, expected " +
                std::to_string(length));
    std::copy(part.begin(), part.end(), full.begin() + static_cast<std::ptrdiff_t>(offset));
}

std::vector<double> ParamSlice::embed(std::span<const double> part, std::size_t full_size) const {
    std::vector<double> out(full_size, 0.0);
    scatter(part, out);
    return out;
}

ParamSlice make_slice(const ParamLayout& layout, const std::string& selector) {
    ParamSlice s;
    s.name = selector;
    if (selector == "full") {
        s.offset = 0;
        s.length = layout.size();
        s.first_layer = 0;
    } else if (selector.size() >= 2 && (selector[0] == 'W' || selector[0] == 'b')) {
        std::size_t layer = 0;
        const char* begin = selector.data() + 1;
        const char* end = selector.data() + selector.size();
        auto [ptr, ec] = std::from_chars(begin, end, layer);
        require(ec == std::errc() && ptr == end, ErrorKind::config,
                "slice: cannot parse layer index in '" + selector + "'");
        require(layer < layout.depth(), ErrorKind::config,
                "slice: layer " + std::to_string(layer) + " out of range");
        const auto& t = selector[0] == 'W' ? layout.weight(layer) : layout.bias(layer);
        s.offset = t.offset;
        s.length = t.size();
        s.first_layer = layer;
    } else {
        fail(ErrorKind::config, "slice: expected W<l>, b<l> or full, got '" + selector + "'");
    }
    require(s.length > 1, ErrorKind::config, "slice " + selector + ": needs more than one coordinate");
    return s;
}

}  // namespace flatlens
