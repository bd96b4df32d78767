#pragma once

#include "nom/network.hpp"
#include "nom/rng.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace nom {

/// Outcome of one finite-difference comparison group.
struct GradCheckResult {
    std::string suite;
    std::string item; ///< e.g. the activation kind under test
    std::size_t checks = 0;
    double max_rel_error = 0.0;
    bool passed = true;
};

struct GradCheckOptions {
    std::uint64_t seed = 0;
    std::size_t count = 100; ///< random cases per suite
    double step = 1e-5;      ///< central-difference step
    double tolerance = 1e-6; ///< |analytic - fd| / (|fd| + 1e-12)
};

/// Available suites: activations, network, expression, surrogate, nom.
std::vector<std::string> gradcheck_suites();

/// Runs the named suites. Throws Error for an empty or unknown selection.
std::vector<GradCheckResult> run_gradcheck(std::span<const std::string> suites,
                                           const GradCheckOptions& opts = {});

double relative_error(double analytic, double numeric);

/// Random dense network: input 1-4, one or two hidden layers of width 2-6
/// using `hidden` (penalty kinds get c in [0.5, 10]), scalar linear output.
Network random_network(Rng& rng, ActivationKind hidden);

/// Central-difference derivative of the scalar `f` along coordinate i of x.
template <class F>
double central_difference(F&& f, std::vector<double> x, std::size_t i, double h)
{
    const double x0 = x[i];
    x[i] = x0 + h;
    const double up = f(x);
    x[i] = x0 - h;
    const double down = f(x);
    return (up - down) / (2.0 * h);
}

} // namespace nom
