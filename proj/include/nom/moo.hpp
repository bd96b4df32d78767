#pragma once

#include "nom/nom.hpp"

#include <memory>
#include <span>
#include <vector>

namespace nom {

/// Several surrogate objectives over one box. Objective `primary` is
/// minimized; the others become bounded constraints.
struct MooProblem {
    std::vector<std::shared_ptr<const SurrogateModel>> surrogates;
    /// Analytic objectives aligned with `surrogates`; empty if unknown.
    std::vector<FieldPtr> truths;
    std::vector<ConstraintSpec> constraints;
    Box box;
    std::size_t primary = 0;

    std::size_t objective_count() const { return surrogates.size(); }
    /// Throws Error unless every surrogate shares the box dimension and
    /// `primary` is a valid index.
    void validate() const;
};

struct ParetoPoint {
    std::vector<double> x;
    std::vector<double> f_surrogate;
    std::vector<double> f_true; ///< empty when no analytic objectives are known
    double u_bound = 0.0;
    bool feasible = false;
    std::size_t sweep_index = 0;
    std::uint64_t seed = 0;
};

/// Minimize the primary surrogate with one extra inequality
/// surrogate_i(x) - U_i <= 0 per non-primary objective i (U lists them in
/// objective order, skipping the primary). Falls back to the least-violating
/// lattice points as starts when no lattice point satisfies every bound.
OptimizeResult solve_bounded(const MooProblem& p, std::span<const double> upper, const NomConfig& cfg);

struct SweepResult {
    Solution secondary_optimum; ///< the non-primary objective minimized alone
    double u_low = 0.0;         ///< secondary surrogate at that optimum
    double u_high = 0.0;        ///< primary surrogate at that optimum
    std::vector<ParetoPoint> sweep; ///< one per bound, in sweep order
    std::vector<ParetoPoint> front; ///< feasible sweep points, non-dominated
};

/// Two-objective bounded-objective sweep: bounds evenly spaced over
/// [u_low, u_high] inclusive (n_sweep = 1 uses u_low only). Throws Error if
/// the secondary optimum is infeasible.
SweepResult sweep_pareto(const MooProblem& p, std::size_t n_sweep, const NomConfig& cfg);

/// Indices (ascending) of the rows of `objectives` not dominated by any
/// other row. Dominance: <= in every objective and < in at least one.
/// Among identical rows only the first survives.
std::vector<std::size_t> pareto_filter(const Samples& objectives);

/// Largest margin by which a row of `front` dominates `f`, measured per
/// objective as a fraction of that objective's range over `front`:
/// max over rows q of min_k (f_k - q_k) / range_k. A value <= 0 means no
/// row dominates f. Zero ranges count as 1.
double dominance_excess(std::span<const double> f, const Samples& front);

} // namespace nom
