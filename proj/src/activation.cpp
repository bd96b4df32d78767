#include "nom/activation.hpp"

#include "nom/error.hpp"

#include <atomic>
#include <cmath>
#include <string>

namespace nom {

namespace {

constexpr int no_fault = -1;
std::atomic<int> derivative_fault{no_fault};

double relu(double z) { return z > 0.0 ? z : 0.0; }
double step(double z) { return z > 0.0 ? 1.0 : 0.0; }

} // namespace

ActivationValue activation_eval(const Activation& a, double z)
{
    if (!std::isfinite(z)) {
        throw NumericalError("activation " + std::string(to_string(a.kind)) +
                             ": non-finite input");
    }
    if (a.is_penalty() && !(a.c > 0.0)) {
        throw Error("activation " + std::string(to_string(a.kind)) +
                    ": penalty coefficient must be positive");
    }

    ActivationValue r{};
    switch (a.kind) {
    case ActivationKind::linear:
        r = {z, 1.0};
        break;
    case ActivationKind::tanh: {
        const double t = std::tanh(z);
        r = {t, 1.0 - t * t};
        break;
    }
    case ActivationKind::relu:
        r = {relu(z), step(z)};
        break;
    case ActivationKind::penalty_ineq:
        r = {a.c * relu(z), a.c * step(z)};
        break;
    case ActivationKind::penalty_eq:
        r = {a.c * (relu(-z) + relu(z)), a.c * (step(z) - step(-z))};
        break;
    }

    if (derivative_fault.load(std::memory_order_relaxed) == static_cast<int>(a.kind)) {
        r.derivative = 1.5 * r.derivative + 0.25;
    }
    return r;
}

std::string_view to_string(ActivationKind kind)
{
    switch (kind) {
    case ActivationKind::linear: return "linear";
    case ActivationKind::tanh: return "tanh";
    case ActivationKind::relu: return "relu";
    case ActivationKind::penalty_ineq: return "penalty_ineq";
    case ActivationKind::penalty_eq: return "penalty_eq";
    }
    return "unknown";
}

ActivationKind activation_kind_from_string(std::string_view name)
{
    for (auto k : {ActivationKind::linear, ActivationKind::tanh, ActivationKind::relu,
                   ActivationKind::penalty_ineq, ActivationKind::penalty_eq}) {
        if (to_string(k) == name) return k;
    }
    throw FormatError("unknown activation '" + std::string(name) + "'");
}

namespace testing {

void inject_derivative_fault(ActivationKind kind)
{
    derivative_fault.store(static_cast<int>(kind), std::memory_order_relaxed);
}

void clear_derivative_fault() { derivative_fault.store(no_fault, std::memory_order_relaxed); }

} // namespace testing

} // namespace nom
