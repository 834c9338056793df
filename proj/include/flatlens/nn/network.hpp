#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "flatlens/linalg/matrix.hpp"
#include "flatlens/nn/architecture.hpp"
#include "flatlens/nn/params.hpp"

namespace flatlens {

struct Batch {
    Matrix inputs;                      // n x m_0
    std::vector<std::uint32_t> labels;  // n class indices

    std::size_t size() const noexcept { return labels.size(); }
    // Throws Error(dimension) when inconsistent with the architecture.
    void validate(const Architecture& arch) const;
};

// One {0,1} vector per entry of Architecture::dropout, same order. A mask is
// shared by every example of the batch.
struct DropoutMask {
    std::vector<std::vector<double>> layers;

    bool operator==(const DropoutMask&) const = default;
};

DropoutMask sample_mask(const Architecture& arch, std::uint64_t seed);
// Mask with every unit kept (the identity mask).
DropoutMask full_mask(const Architecture& arch);

// How dropout layers behave when no mask is supplied.
enum class DropoutMode {
    off,          // factor 1: the deterministic network used for all geometry
    expectation,  // factor keep-probability: the usual inference rescaling
};

Matrix forward(const Architecture& arch, const ParamVector& params, const Batch& batch,
               const DropoutMask* mask = nullptr, DropoutMode mode = DropoutMode::off);

// Mean softmax cross-entropy.
double loss(const Architecture& arch, const ParamVector& params, const Batch& batch,
            const DropoutMask* mask = nullptr);

// Analytic gradient of `loss` under a fixed mask; returns the loss.
double gradient(const Architecture& arch, const ParamVector& params, const Batch& batch,
                const DropoutMask* mask, std::span<double> grad);
ParamVector gradient(const Architecture& arch, const ParamVector& params, const Batch& batch,
                     const DropoutMask* mask = nullptr);

double accuracy(const Architecture& arch, const ParamVector& params, const Batch& batch,
                DropoutMode mode = DropoutMode::off);

// Mean cross-entropy of a logit matrix against labels.
double cross_entropy(const Matrix& logits, std::span<const std::uint32_t> labels);

// Loss and gradient restricted to one parameter slice, with the activations
// feeding the slice's first layer computed once. Every other coordinate is
// frozen at the values given at construction. Safe to share across threads.
class SliceEvaluator {
public:
    SliceEvaluator(Architecture arch, ParamVector params, const Batch& batch, ParamSlice slice);

    const Architecture& architecture() const noexcept { return arch_; }
    const ParamVector& base() const noexcept { return params_; }
    const ParamSlice& slice() const noexcept { return slice_; }
    std::size_t dim() const noexcept { return slice_.length; }

    double loss(std::span<const double> x, const DropoutMask* mask = nullptr) const;
    // Writes d loss / d x into `grad` (length dim()); returns the loss.
    double gradient(std::span<const double> x, const DropoutMask* mask,
                    std::span<double> grad) const;

private:
    double run(std::span<const double> x, const DropoutMask* mask, std::span<double> grad) const;

    Architecture arch_;
    ParamVector params_;
    std::vector<std::uint32_t> labels_;
    ParamSlice slice_;
    Matrix prefix_;  // sigma(Z) feeding layer slice_.first_layer, before its mask
};

}  // namespace flatlens
