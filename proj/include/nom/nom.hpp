#pragma once

#include "nom/error.hpp"
#include "nom/network.hpp"
#include "nom/problems.hpp"
#include "nom/surrogate.hpp"
#include "nom/train.hpp"

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace nom {

enum class WInit {
    unit,   ///< every starting-point weight is 1
    random, ///< i.i.d. uniform on [w_low, w_high]
};

struct NomConfig {
    std::size_t n_starting_points = 5;
    double penalty_c = 10.0;
    int epochs = 2000;
    double learning_rate = 0.01;
    std::size_t grid_n = 10000;
    WInit w_init = WInit::random;
    double w_low = 0.5;
    double w_high = 1.5;
    std::uint64_t seed = 0;
    OptimizerKind optimizer = OptimizerKind::adam;
    double feasibility_tol = 1e-3;
    double dedup_tol = 0.01;
    /// Report the iterate with the lowest loss seen during training instead
    /// of the last one.
    bool keep_best = true;
    /// Run restarts on the OpenMP pool. Results do not depend on this.
    bool parallel = true;
};

/// The NOM graph: a trainable diagonal starting-point layer feeding a frozen
/// surrogate and one penalty neuron per constraint, all summed into a single
/// output. Only the starting-point layer's diagonal weights and biases train.
/// The graph's input is the raw starting point x0; the layer emits
/// x = w * x0 + b.
class NomGraph {
public:
    struct Trace {
        std::vector<double> start; ///< x0
        std::vector<double> x;     ///< starting-point layer output
        double surrogate = 0.0;
        std::vector<double> constraint; ///< g_k(x) / h_k(x)
        std::vector<double> penalty;    ///< penalty neuron outputs
        std::vector<double> dout_dx;    ///< d output / d x
        double out[1] = {0.0};
        std::span<const double> output() const { return {out, 1}; }
    };

    NomGraph(std::shared_ptr<const SurrogateModel> surrogate, std::vector<ConstraintSpec> constraints,
             double penalty_c);

    std::size_t input_dim() const { return dim_; }
    std::size_t output_dim() const { return 1; }
    std::size_t parameter_count() const { return start_.parameter_count(); }
    bool is_trainable(std::size_t i) const { return start_.is_trainable(i); }

    void trace_into(std::span<const double> start, Trace& trace) const;
    Trace trace(std::span<const double> start) const;
    void backward(const Trace& trace, std::span<const double> upstream, std::span<double> param_grad,
                  std::span<double> input_grad) const;
    void apply_step(std::span<const double> step);

    const Layer& start_layer() const { return start_; }
    Layer& start_layer() { return start_; }
    const SurrogateModel& surrogate() const { return *surrogate_; }
    std::span<const ConstraintSpec> constraints() const { return constraints_; }
    std::span<const Activation> penalties() const { return penalties_; }
    double penalty_c() const { return c_; }
    /// Current starting-point layer output for input x0.
    std::vector<double> position(std::span<const double> x0) const;

    /// Graph output with the starting-point layer taken as the identity,
    /// i.e. surrogate(x) + sum of penalties at raw x.
    double evaluate(std::span<const double> x) const;

    /// Starting-point layer to identity (w = 1, b = 0).
    void reset_start();

private:
    std::shared_ptr<const SurrogateModel> surrogate_;
    std::vector<ConstraintSpec> constraints_;
    std::vector<Activation> penalties_;
    double c_;
    std::size_t dim_;
    Layer start_;
};

static_assert(TrainableModel<NomGraph>);

/// Graph for minimizing `surrogate` under `constraints` (box bounds must be
/// included by the caller if wanted).
NomGraph build_nom(std::shared_ptr<const SurrogateModel> surrogate,
                   std::vector<ConstraintSpec> constraints, double penalty_c);

struct Solution {
    std::vector<double> x;
    double f_surrogate = 0.0;
    std::optional<double> f_true;
    std::vector<double> violations; ///< one per graph constraint, >= 0
    bool feasible = false;
    std::size_t restart_index = 0;
    std::uint64_t seed = 0;
    int epochs_run = 0;
    std::vector<double> loss_history;
    std::string error; ///< non-empty if the restart failed

    double max_violation() const;
};

/// Training blew up; carries the last position at which the loss was finite.
class DivergenceError : public NumericalError {
public:
    DivergenceError(const std::string& what, std::vector<double> last_x)
        : NumericalError(what), last_x(std::move(last_x)) {}
    std::vector<double> last_x;
};

/// Lattice points (grid_n over the box) that satisfy every constraint, ranked
/// by surrogate value, first k returned; ties keep lattice order. Equality
/// constraints count as satisfied within cfg.feasibility_tol. Throws Error
/// naming the most violated constraint if no lattice point is feasible.
std::vector<std::vector<double>> select_starting_points(const Box& box,
                                                        std::span<const ConstraintSpec> constraints,
                                                        const SurrogateModel& m,
                                                        const NomConfig& cfg);
std::vector<std::vector<double>> select_starting_points(const ProblemSpec& problem,
                                                        const SurrogateModel& m,
                                                        const NomConfig& cfg);

/// The k lattice points with the smallest summed constraint violation, ties
/// in lattice order. Fallback starts when no lattice point is feasible.
std::vector<std::vector<double>> least_violating_points(const Box& box,
                                                        std::span<const ConstraintSpec> constraints,
                                                        const NomConfig& cfg);

/// One training run from raw starting point x0. `truth`, if given, fills
/// Solution::f_true. Throws DivergenceError on a non-finite loss.
Solution nom_run(const NomGraph& graph, std::span<const double> x0, const NomConfig& cfg, Rng& rng,
                 const ScalarField* truth = nullptr);

struct OptimizeResult {
    Solution best;
    std::vector<Solution> restarts; ///< in restart order
    std::vector<Solution> minima;   ///< deduplicated feasible restarts
};

/// Greedy clustering by distance: solutions within tol * box diagonal of a
/// kept representative merge into it. Representatives are visited in
/// ascending f_surrogate (then restart) order.
std::vector<Solution> dedup_minima(std::span<const Solution> solutions, double tol, const Box& box);

/// Multi-start NOM over `box` with general `constraints`; the box bounds are
/// added as penalty neurons and the result is clamped into the box.
OptimizeResult optimize(const Box& box, std::shared_ptr<const SurrogateModel> surrogate,
                        std::span<const ConstraintSpec> constraints, const NomConfig& cfg,
                        const ScalarField* truth = nullptr);

/// Multi-start NOM from explicit raw starting points.
OptimizeResult optimize_from(const Box& box, std::shared_ptr<const SurrogateModel> surrogate,
                             std::span<const ConstraintSpec> constraints,
                             std::span<const std::vector<double>> starts, const NomConfig& cfg,
                             const ScalarField* truth = nullptr);

/// Same, for objective `objective_index` of a registered problem.
OptimizeResult optimize(const ProblemSpec& problem, std::shared_ptr<const SurrogateModel> surrogate,
                        const NomConfig& cfg, std::size_t objective_index = 0);

/// Distinct minima found by repeating optimize() `runs` times (seeds derived
/// from cfg.seed when runs > 1) and deduplicating every feasible restart.
std::vector<Solution> collect_minima(const ProblemSpec& problem, std::shared_ptr<const SurrogateModel> surrogate,
                                     const NomConfig& cfg, std::size_t runs);

} // namespace nom
