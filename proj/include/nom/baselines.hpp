#pragma once

#include "nom/problems.hpp"
#include "nom/samples.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace nom {

/// f(x) + rho * (sum max(0, g)^2 + sum h^2), evaluated with x clamped into
/// the box plus rho * squared distance to the box, so the objective itself
/// is never evaluated outside it.
struct PenalizedObjective {
    FieldPtr objective;
    std::vector<ConstraintSpec> constraints;
    Box box;
    double rho = 1e4;

    double operator()(std::span<const double> x) const;
};

PenalizedObjective penalized(const ProblemSpec& p, std::size_t objective_index = 0, double rho = 1e4);

struct BaselineSolution {
    std::vector<double> x;
    double f = 0.0;         ///< analytic objective at x
    double penalized = 0.0; ///< penalized objective at x
    std::vector<double> violations;
    bool feasible = false;
    bool converged = true;
    int iterations = 0;
    std::size_t evaluations = 0;

    double max_violation() const;
};

struct NelderMeadOptions {
    int max_iters = 5000;
    double x_tol = 1e-10;   ///< simplex diameter
    double f_tol = 1e-14;   ///< spread of vertex values
    double initial_step = 0.05; ///< initial simplex edge, fraction of box width
    double feasibility_tol = 1e-3;
};

/// Reflect 1, expand 2, contract 0.5, shrink 0.5.
BaselineSolution nelder_mead(const PenalizedObjective& pf, std::span<const double> x0,
                             const NelderMeadOptions& opts = {});

/// Best lattice point (grid_n over the box) satisfying every constraint, or
/// the least-violating one if none does.
std::vector<double> best_grid_start(const PenalizedObjective& pf, std::size_t grid_n = 10000);

struct DeOptions {
    std::size_t population = 50;
    double f = 0.8;
    double cr = 0.9;
    int generations = 200;
    std::uint64_t seed = 0;
    double feasibility_tol = 1e-3;
};

/// DE/rand/1/bin with trial vectors clipped to the box.
BaselineSolution differential_evolution(const PenalizedObjective& pf, const DeOptions& opts = {});

struct PsoOptions {
    std::size_t swarm = 40;
    double w = 0.729;
    double c1 = 1.49445;
    double c2 = 1.49445;
    int iterations = 200;
    std::uint64_t seed = 0;
    double feasibility_tol = 1e-3;
};

/// Global-best PSO; velocities clamped to half the box width, positions
/// clipped to the box.
BaselineSolution pso(const PenalizedObjective& pf, const PsoOptions& opts = {});

struct OracleFront {
    Samples x{0};
    Samples f{0};
};

/// Both objectives on a resolution^dim lattice; infeasible points (any
/// g > 0 or |h| > eq_tol) dropped; the rest Pareto-filtered. Throws Error
/// for resolution < 100 or if nothing is feasible.
OracleFront grid_pareto_oracle(const ScalarField& f1, const ScalarField& f2,
                               std::span<const ConstraintSpec> constraints, const Box& box,
                               std::size_t resolution, double eq_tol = 1e-3);

} // namespace nom
