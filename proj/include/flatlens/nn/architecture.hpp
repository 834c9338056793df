#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace flatlens {

enum class Activation : std::uint8_t { relu = 0, tanh = 1 };

std::string_view to_string(Activation a) noexcept;
Activation parse_activation(std::string_view name);

enum class InitScheme { xavier, he };

std::string_view to_string(InitScheme s) noexcept;
InitScheme parse_init(std::string_view name);

// Dropout on the output of hidden layer `layer` (1 <= layer <= L-1); `keep` is
// the probability that a unit survives.
struct DropoutLayer {
    std::size_t layer = 0;
    double keep = 1.0;

    bool operator==(const DropoutLayer&) const = default;
};

struct Architecture {
    std::vector<std::size_t> widths;  // m_0 .. m_L
    Activation activation = Activation::relu;
    std::vector<DropoutLayer> dropout;

    // Number of affine layers L.
    std::size_t depth() const noexcept { return widths.empty() ? 0 : widths.size() - 1; }
    std::size_t input_width() const noexcept { return widths.front(); }
    std::size_t output_width() const noexcept { return widths.back(); }
    std::size_t param_count() const noexcept;

    // Keep probability of hidden layer l, or nullptr when it has no dropout.
    const DropoutLayer* dropout_at(std::size_t layer) const noexcept;

    // Throws Error(config) naming the offending field.
    void validate() const;

    // Same network with the dropout spec replaced.
    Architecture with_dropout(std::vector<DropoutLayer> spec) const;

    std::string describe() const;

    bool operator==(const Architecture&) const = default;
};

}  // namespace flatlens
