#include "flatlens/landscape/direction.hpp"

#include <cmath>
#include <random>

#include "flatlens/errors.hpp"
#include "flatlens/linalg/blas.hpp"

namespace flatlens {

std::string to_string(NormConvention n) {
    switch (n) {
        case NormConvention::unit: return "unit";
        case NormConvention::filter_normalized: return "filter-normalized";
        case NormConvention::raw: return "raw";
    }
    return "raw";
}

void Direction::validate() const {
    for (double x : values) require(std::isfinite(x), ErrorKind::numeric, "direction has non-finite entries");
    if (norm == NormConvention::unit) {
        const double n = norm2(values);
        require(std::abs(n - 1.0) <= 1e-12, ErrorKind::config,
                "direction " + provenance + " is tagged unit but has norm " + std::to_string(n));
    }
}

Direction unit_direction(std::vector<double> values, std::string provenance) {
    const double n = norm2(values);
    require(n > 0.0 && std::isfinite(n), ErrorKind::numeric, "cannot normalize a zero direction");
    for (double& x : values) x /= n;
    return Direction{std::move(values), NormConvention::unit, std::move(provenance)};
}

FilterNormalized filter_normalized_direction(const ParamVector& params, std::uint64_t seed) {
    require(params.all_finite(), ErrorKind::numeric, "filter normalization: parameters are not finite");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss;
    FilterNormalized out;
    out.direction.values.resize(params.size());
    for (double& x : out.direction.values) x = gauss(rng);
    out.direction.norm = NormConvention::filter_normalized;
    out.direction.provenance = "random-" + std::to_string(seed);

    const auto& layout = params.layout;
    for (std::size_t l = 0; l < layout.depth(); ++l) {
        const TensorShape* blocks[2] = {&layout.weight(l), &layout.bias(l)};
        double theta_sq = 0.0;
        double dir_sq = 0.0;
        for (const TensorShape* t : blocks) {
            for (std::size_t i = t->offset; i < t->offset + t->size(); ++i) {
                theta_sq += params.values[i] * params.values[i];
                dir_sq += out.direction.values[i] * out.direction.values[i];
            }
        }
        const double factor = theta_sq > 0.0 ? std::sqrt(theta_sq) / std::sqrt(dir_sq) : 0.0;
        if (theta_sq == 0.0) out.zero_layers.push_back(l);
        for (const TensorShape* t : blocks) {
            for (std::size_t i = t->offset; i < t->offset + t->size(); ++i) out.direction.values[i] *= factor;
        }
    }
    return out;
}

}  // namespace flatlens
