#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <string>

namespace nom {

/// Immutable differentiable scalar function of a fixed-width vector.
/// Implementations must be safe to evaluate concurrently.
class ScalarField {
public:
    virtual ~ScalarField() = default;
    virtual std::size_t dim() const = 0;
    virtual double value(std::span<const double> x) const = 0;
    /// Returns the value and writes the gradient into `grad` (dim() entries).
    virtual double value_and_gradient(std::span<const double> x, std::span<double> grad) const = 0;
    virtual std::string describe() const = 0;
};

using FieldPtr = std::shared_ptr<const ScalarField>;

/// sign * (x[axis] - bound); the building block for box-bound constraints.
class AxisBound final : public ScalarField {
public:
    AxisBound(std::size_t dim, std::size_t axis, double bound, double sign)
        : dim_(dim), axis_(axis), bound_(bound), sign_(sign) {}
    std::size_t dim() const override { return dim_; }
    double value(std::span<const double> x) const override { return sign_ * (x[axis_] - bound_); }
    double value_and_gradient(std::span<const double> x, std::span<double> grad) const override;
    std::string describe() const override;

private:
    std::size_t dim_, axis_;
    double bound_, sign_;
};

/// field(x) - offset.
class ShiftedField final : public ScalarField {
public:
    ShiftedField(FieldPtr field, double offset) : field_(std::move(field)), offset_(offset) {}
    std::size_t dim() const override { return field_->dim(); }
    double value(std::span<const double> x) const override { return field_->value(x) - offset_; }
    double value_and_gradient(std::span<const double> x, std::span<double> grad) const override
    {
        return field_->value_and_gradient(x, grad) - offset_;
    }
    std::string describe() const override;

private:
    FieldPtr field_;
    double offset_;
};

} // namespace nom
