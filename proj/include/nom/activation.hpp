#pragma once

#include <string>
#include <string_view>

namespace nom {

enum class ActivationKind { linear, tanh, relu, penalty_ineq, penalty_eq };

/// Per-neuron activation. `c` is the penalty coefficient and is only read by
/// the penalty kinds:
///   penalty_ineq(z) = c * max(0, z)
///   penalty_eq(z)   = c * (max(0, -z) + max(0, z)) = c * |z|
/// The ReLU-family derivative at z = 0 is 0, so a constraint neuron sitting
/// exactly on its boundary contributes no gradient.
struct Activation {
    ActivationKind kind = ActivationKind::linear;
    double c = 1.0;

    static Activation linear() { return {ActivationKind::linear, 1.0}; }
    static Activation tanh() { return {ActivationKind::tanh, 1.0}; }
    static Activation relu() { return {ActivationKind::relu, 1.0}; }
    static Activation penalty_ineq(double c) { return {ActivationKind::penalty_ineq, c}; }
    static Activation penalty_eq(double c) { return {ActivationKind::penalty_eq, c}; }

    bool is_penalty() const
    {
        return kind == ActivationKind::penalty_ineq || kind == ActivationKind::penalty_eq;
    }

    friend bool operator==(const Activation&, const Activation&) = default;
};

struct ActivationValue {
    double value;
    double derivative;
};

/// G(z) and dG/dz. Throws NumericalError for non-finite z and Error for a
/// penalty kind with c <= 0.
ActivationValue activation_eval(const Activation& a, double z);

std::string_view to_string(ActivationKind kind);

/// Inverse of to_string; throws FormatError naming the unknown activation.
ActivationKind activation_kind_from_string(std::string_view name);

namespace testing {

/// Fault injection for the gradient checker: while set, the derivative
/// reported for `kind` is deliberately wrong. clear_derivative_fault()
/// restores it.
void inject_derivative_fault(ActivationKind kind);
void clear_derivative_fault();

} // namespace testing

} // namespace nom
