#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace flatlens {

// Scalar loss over a coordinate block, with its gradient. The landscape and
// Hessian modules consume only this interface. Implementations are pure and
// may be called concurrently.
class Objective {
public:
    virtual ~Objective() = default;
    virtual std::size_t dim() const = 0;
    virtual double value(std::span<const double> x) const = 0;
    // Fills g (length dim()) and returns the value at x.
    virtual double gradient(std::span<const double> x, std::span<double> g) const = 0;
};

// Adapter over plain callables; used by tests and synthetic landscapes.
class FunctionObjective final : public Objective {
public:
    using ValueFn = std::function<double(std::span<const double>)>;
    using GradFn = std::function<double(std::span<const double>, std::span<double>)>;

    FunctionObjective(std::size_t dim, ValueFn value, GradFn grad = {})
        : dim_(dim), value_(std::move(value)), grad_(std::move(grad)) {}

    std::size_t dim() const override { return dim_; }
    double value(std::span<const double> x) const override { return value_(x); }
    double gradient(std::span<const double> x, std::span<double> g) const override;

private:
    std::size_t dim_;
    ValueFn value_;
    GradFn grad_;
};

// c * base(x).
class ScaledObjective final : public Objective {
public:
    ScaledObjective(const Objective& base, double scale) : base_(base), scale_(scale) {}
    std::size_t dim() const override { return base_.dim(); }
    double value(std::span<const double> x) const override { return scale_ * base_.value(x); }
    double gradient(std::span<const double> x, std::span<double> g) const override;

private:
    const Objective& base_;
    double scale_;
};

}  // namespace flatlens
