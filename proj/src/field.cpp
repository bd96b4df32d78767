#include "nom/field.hpp"

#include <algorithm>
#include <cstdio>

namespace nom {

double AxisBound::value_and_gradient(std::span<const double> x, std::span<double> grad) const
{
    std::fill(grad.begin(), grad.end(), 0.0);
    grad[axis_] = sign_;
    return value(x);
}

std::string AxisBound::describe() const
{
    char buf[96];
    if (sign_ < 0) {
        std::snprintf(buf, sizeof buf, "%.17g - x%zu", bound_, axis_ + 1);
    } else {
        std::snprintf(buf, sizeof buf, "x%zu - %.17g", axis_ + 1, bound_);
    }
    return buf;
}

std::string ShiftedField::describe() const
{
    char buf[48];
    std::snprintf(buf, sizeof buf, " - %.17g", offset_);
    return field_->describe() + buf;
}

} // namespace nom
