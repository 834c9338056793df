#pragma once

#include <cstddef>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "flatlens/nn/architecture.hpp"

namespace flatlens {

enum class TensorKind { weight, bias };

struct TensorShape {
    TensorKind kind;
    std::size_t layer;   // W^[layer] or b^[layer]
    std::size_t rows;    // m_{layer+1}
    std::size_t cols;    // m_layer for weights, 1 for biases
    std::size_t offset;  // into the flat vector

    std::size_t size() const noexcept { return rows * cols; }
};

// Flat layout theta = (W^[0], ..., W^[L-1], b^[0], ..., b^[L-1]), each tensor
// row-major.
class ParamLayout {
public:
    ParamLayout() = default;
    explicit ParamLayout(const Architecture& arch);

    std::size_t size() const noexcept { return total_; }
    std::size_t depth() const noexcept { return weights_.size(); }
    const TensorShape& weight(std::size_t layer) const { return tensors_[weights_.at(layer)]; }
    const TensorShape& bias(std::size_t layer) const { return tensors_[biases_.at(layer)]; }
    // Tensors in storage order.
    const std::vector<TensorShape>& tensors() const noexcept { return tensors_; }

    bool operator==(const ParamLayout& o) const noexcept { return shapes_ == o.shapes_; }

private:
    std::vector<TensorShape> tensors_;
    std::vector<std::size_t> weights_;
    std::vector<std::size_t> biases_;
    std::vector<std::size_t> shapes_;
    std::size_t total_ = 0;
};

struct ParamVector {
    ParamLayout layout;
    std::vector<double> values;

    ParamVector() = default;
    ParamVector(ParamLayout l, std::vector<double> v);
    explicit ParamVector(const Architecture& arch)
        : layout(arch), values(layout.size(), 0.0) {}

    std::size_t size() const noexcept { return values.size(); }
    std::span<double> tensor(const TensorShape& t) noexcept {
        return std::span<double>(values).subspan(t.offset, t.size());
    }
    std::span<const double> tensor(const TensorShape& t) const noexcept {
        return std::span<const double>(values).subspan(t.offset, t.size());
    }
    std::span<const double> weights(std::size_t layer) const { return tensor(layout.weight(layer)); }
    std::span<const double> bias(std::size_t layer) const { return tensor(layout.bias(layer)); }

    bool all_finite() const noexcept;
};

// Fresh parameters: weights drawn per the scheme (Xavier: uniform with
// bound sqrt(6/(fan_in+fan_out)); He: normal with std sqrt(2/fan_in)),
// biases zero.
ParamVector initialize(const Architecture& arch, InitScheme scheme, std::uint64_t seed);

// Contiguous block of the flat parameter vector.
struct ParamSlice {
    std::string name;          // "W1", "b0", "full"
    std::size_t offset = 0;
    std::size_t length = 0;
    // Lowest layer whose parameters lie in the slice; activations feeding this
    // layer do not depend on the slice.
    std::size_t first_layer = 0;

    std::size_t dim() const noexcept { return length; }
    std::span<const double> view(std::span<const double> full) const {
        return full.subspan(offset, length);
    }
    std::span<double> view(std::span<double> full) const { return full.subspan(offset, length); }
    std::vector<double> extract(std::span<const double> full) const;
    // Copies `part` into the slice coordinates of `full`.
    void scatter(std::span<const double> part, std::span<double> full) const;
    // Full-length vector that is `part` on the slice and zero elsewhere.
    std::vector<double> embed(std::span<const double> part, std::size_t full_size) const;

    bool operator==(const ParamSlice&) const = default;
};

// Parses "W<l>", "b<l>" or "full". Default for the analyses is "W1".
ParamSlice make_slice(const ParamLayout& layout, const std::string& selector);

}  // namespace flatlens
