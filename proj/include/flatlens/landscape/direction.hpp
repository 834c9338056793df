#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "flatlens/nn/params.hpp"

namespace flatlens {

enum class NormConvention { unit, filter_normalized, raw };

std::string to_string(NormConvention n);

struct Direction {
    std::vector<double> values;
    NormConvention norm = NormConvention::unit;
    std::string provenance;  // "pca-3", "hessian-0", "random-42", ...

    std::size_t dim() const noexcept { return values.size(); }
    // Throws Error(numeric) for non-finite entries, and Error(config) when a
    // unit-tagged direction is off the unit sphere by more than 1e-12.
    void validate() const;
};

Direction unit_direction(std::vector<double> values, std::string provenance);

struct FilterNormalized {
    Direction direction;
    // Layers whose parameter block has zero norm; their direction block is zero.
    std::vector<std::size_t> zero_layers;
};

// Gaussian direction over the full parameter vector, rescaled so each layer's
// block (W^[l] together with b^[l]) has the Frobenius norm of the matching
// block of `params`.
FilterNormalized filter_normalized_direction(const ParamVector& params, std::uint64_t seed);

}  // namespace flatlens
