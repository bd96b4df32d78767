#include "nom/nom.hpp"

#include "nom/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace nom {

NomGraph::NomGraph(std::shared_ptr<const SurrogateModel> surrogate,
                   std::vector<ConstraintSpec> constraints, double penalty_c)
    : surrogate_(std::move(surrogate)), constraints_(std::move(constraints)), c_(penalty_c),
      dim_(surrogate_ ? surrogate_->dim() : 0), start_(Layer::diagonal(dim_, Activation::linear()))
{
    if (!surrogate_) throw Error("build_nom: missing surrogate");
    if (!(penalty_c > 0.0)) throw Error("build_nom: penalty coefficient must be positive");
    for (const auto& c : constraints_) {
        if (!c.expr || c.expr->dim() != dim_) {
            throw Error("build_nom: constraint '" + c.name + "' has the wrong dimension");
        }
        penalties_.push_back(c.kind == ConstraintKind::inequality ? Activation::penalty_ineq(c_)
                                                                  : Activation::penalty_eq(c_));
    }
    start_.set_all_trainable(true);
}

std::vector<double> NomGraph::position(std::span<const double> x0) const
{
    std::vector<double> x(dim_);
    start_.affine(x0, x);
    return x;
}

void NomGraph::trace_into(std::span<const double> start, Trace& t) const
{
    if (start.size() != dim_) throw Error("nom: starting point has the wrong dimension");
    t.start.assign(start.begin(), start.end());
    t.x.resize(dim_);
    start_.affine(start, t.x);
    for (double v : t.x) {
        if (!std::isfinite(v)) throw NumericalError("nom: non-finite starting-point layer output");
    }

    std::vector<double> grad(dim_), g_k(dim_);
    t.surrogate = surrogate_->value_and_gradient(t.x, grad);
    double out = t.surrogate;
    t.constraint.resize(constraints_.size());
    t.penalty.resize(constraints_.size());
    for (std::size_t k = 0; k < constraints_.size(); ++k) {
        const double z = constraints_[k].expr->value_and_gradient(t.x, g_k);
        const ActivationValue p = activation_eval(penalties_[k], z);
        t.constraint[k] = z;
        t.penalty[k] = p.value;
        out += p.value;
        if (p.derivative != 0.0) {
            for (std::size_t i = 0; i < dim_; ++i) grad[i] += p.derivative * g_k[i];
        }
    }
    t.dout_dx = std::move(grad);
    if (!std::isfinite(out)) throw NumericalError("nom: non-finite output");
    t.out[0] = out;
}

NomGraph::Trace NomGraph::trace(std::span<const double> start) const
{
    Trace t;
    trace_into(start, t);
    return t;
}

void NomGraph::backward(const Trace& t, std::span<const double> upstream,
                        std::span<double> param_grad, std::span<double> input_grad) const
{
    const double up = upstream[0];
    for (std::size_t i = 0; i < dim_; ++i) {
        const double g = up * t.dout_dx[i];
        if (!std::isfinite(g)) throw NumericalError("nom: non-finite gradient");
        if (!param_grad.empty()) {
            const std::size_t wi = start_.weight_index(i, i);
            const std::size_t bi = start_.bias_index(i);
            if (start_.is_trainable(wi)) param_grad[wi] += g * t.start[i];
            if (start_.is_trainable(bi)) param_grad[bi] += g;
        }
        if (!input_grad.empty()) input_grad[i] = g * start_.weight(i, i);
    }
}

void NomGraph::apply_step(std::span<const double> step)
{
    auto p = start_.parameters();
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (start_.is_trainable(i)) p[i] -= step[i];
    }
}

double NomGraph::evaluate(std::span<const double> x) const
{
    double out = surrogate_->value(x);
    for (std::size_t k = 0; k < constraints_.size(); ++k) {
        out += activation_eval(penalties_[k], constraints_[k].expr->value(x)).value;
    }
    return out;
}

void NomGraph::reset_start()
{
    for (std::size_t i = 0; i < dim_; ++i) {
        start_.set_weight(i, i, 1.0);
        start_.set_bias(i, 0.0);
    }
}

NomGraph build_nom(std::shared_ptr<const SurrogateModel> surrogate,
                   std::vector<ConstraintSpec> constraints, double penalty_c)
{
    return NomGraph(std::move(surrogate), std::move(constraints), penalty_c);
}

double Solution::max_violation() const
{
    double v = 0.0;
    for (double x : violations) v = std::max(v, x);
    return v;
}

namespace {

bool satisfied(const ConstraintSpec& c, double value, double eq_tol)
{
    return c.kind == ConstraintKind::inequality ? value <= 0.0 : std::abs(value) <= eq_tol;
}

void validate(const NomConfig& cfg)
{
    if (cfg.n_starting_points == 0) throw Error("nom: need at least one starting point");
    if (cfg.epochs < 0) throw Error("nom: epochs must be non-negative");
    if (!(cfg.learning_rate > 0.0)) throw Error("nom: learning rate must be positive");
    if (!(cfg.penalty_c > 0.0)) throw Error("nom: penalty coefficient must be positive");
    if (!(cfg.dedup_tol > 0.0)) throw Error("nom: dedup tolerance must be positive");
    if (cfg.w_init == WInit::random && !(cfg.w_low <= cfg.w_high)) {
        throw Error("nom: random weight range is empty");
    }
}

} // namespace

std::vector<std::vector<double>> select_starting_points(const Box& box,
                                                        std::span<const ConstraintSpec> constraints,
                                                        const SurrogateModel& m,
                                                        const NomConfig& cfg)
{
    validate(cfg);
    const Samples grid = generate_grid(box, cfg.grid_n);
    const std::vector<double> values = kernels::eval_surrogate(m, grid);
    const std::size_t n = grid.size();
    const std::size_t nc = constraints.size();

    // violated[r * nc + k] = 1 if lattice point r breaks constraint k
    std::vector<std::uint8_t> violated(n * nc, 0);
    const auto rows = static_cast<std::int64_t>(n);
#pragma omp parallel for schedule(static)
    for (std::int64_t ri = 0; ri < rows; ++ri) {
        const auto r = static_cast<std::size_t>(ri);
        for (std::size_t k = 0; k < nc; ++k) {
            const double v = constraints[k].expr->value(grid.row(r));
            violated[r * nc + k] = satisfied(constraints[k], v, cfg.feasibility_tol) ? 0 : 1;
        }
    }

    std::vector<std::size_t> ok;
    for (std::size_t r = 0; r < n; ++r) {
        bool good = true;
        for (std::size_t k = 0; k < nc && good; ++k) good = violated[r * nc + k] == 0;
        if (good) ok.push_back(r);
    }
    if (ok.empty()) {
        std::vector<std::size_t> count(nc, 0);
        for (std::size_t r = 0; r < n; ++r) {
            for (std::size_t k = 0; k < nc; ++k) count[k] += violated[r * nc + k];
        }
        const auto worst = static_cast<std::size_t>(
            std::max_element(count.begin(), count.end()) - count.begin());
        const std::string& name = constraints[worst].name;
        throw Error("no feasible lattice point; most violated constraint: " +
                    (name.empty() ? "#" + std::to_string(worst + 1) : name) + " (" +
                    constraints[worst].expr->describe() + ")");
    }
    std::stable_sort(ok.begin(), ok.end(),
                     [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    const std::size_t k = std::min(cfg.n_starting_points, ok.size());
    std::vector<std::vector<double>> out;
    out.reserve(k);
    for (std::size_t i = 0; i < k; ++i) {
        const auto row = grid.row(ok[i]);
        out.emplace_back(row.begin(), row.end());
    }
    return out;
}

std::vector<std::vector<double>> select_starting_points(const ProblemSpec& problem,
                                                        const SurrogateModel& m,
                                                        const NomConfig& cfg)
{
    return select_starting_points(problem.box, problem.constraints, m, cfg);
}

Solution nom_run(const NomGraph& graph, std::span<const double> x0, const NomConfig& cfg, Rng& rng,
                 const ScalarField* truth)
{
    validate(cfg);
    const std::size_t d = graph.input_dim();
    if (x0.size() != d) throw Error("nom_run: starting point has the wrong dimension");
    for (double v : x0) {
        if (!std::isfinite(v)) throw NumericalError("nom_run: non-finite starting point");
    }

    NomGraph g = graph;
    g.reset_start();
    if (cfg.w_init == WInit::random) {
        for (std::size_t i = 0; i < d; ++i) g.start_layer().set_weight(i, i, rng.uniform(cfg.w_low, cfg.w_high));
    }
    const std::vector<double> x0v(x0.begin(), x0.end());
    auto position = [&](const NomGraph& net) { return net.position(x0v); };

    Dataset data{Samples(d), Samples(1)};
    data.inputs.push_back(x0v);
    const TrainConfig tc{cfg.epochs, 1, cfg.learning_rate, 0, cfg.optimizer};

    // The loss reported for an epoch is measured before that epoch's update,
    // i.e. at the position left by the previous epoch.
    std::vector<double> last_x = x0v;
    std::vector<double> best_x = x0v;
    double best_loss = std::numeric_limits<double>::infinity();
    EpochObserver<NomGraph> observe = [&](int, double loss, const NomGraph& net) {
        if (loss < best_loss) {
            best_loss = loss;
            best_x = last_x;
        }
        auto x = position(net);
        if (std::all_of(x.begin(), x.end(), [](double v) { return std::isfinite(v); })) {
            last_x = std::move(x);
        }
    };
    TrainResult<NomGraph> trained{g, {}};
    try {
        trained = train(std::move(g), data, tc, LossKind::raw_output, observe);
    } catch (const NumericalError& e) {
        throw DivergenceError(e.what(), last_x);
    }

    Solution s;
    std::vector<double> x = position(trained.model);
    if (cfg.keep_best && cfg.epochs > 0 && !(trained.model.evaluate(x) < best_loss)) x = best_x;
    s.x = graph.surrogate().box.clamp(x);
    s.f_surrogate = graph.surrogate().value(s.x);
    if (truth) s.f_true = truth->value(s.x);
    s.violations = constraint_violations(graph.constraints(), s.x);
    s.feasible = s.max_violation() <= cfg.feasibility_tol;
    s.epochs_run = cfg.epochs;
    s.loss_history = std::move(trained.loss_history);
    return s;
}

std::vector<Solution> dedup_minima(std::span<const Solution> solutions, double tol, const Box& box)
{
    if (!(tol > 0.0)) throw Error("dedup_minima: tolerance must be positive");
    const double radius = tol * box.diagonal();
    std::vector<std::size_t> order(solutions.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return solutions[a].f_surrogate < solutions[b].f_surrogate;
    });
    std::vector<Solution> kept;
    for (std::size_t i : order) {
        const auto& s = solutions[i];
        const bool merged = std::any_of(kept.begin(), kept.end(), [&](const Solution& k) {
            double d2 = 0.0;
            for (std::size_t j = 0; j < s.x.size(); ++j) d2 += (s.x[j] - k.x[j]) * (s.x[j] - k.x[j]);
            return std::sqrt(d2) <= radius;
        });
        if (!merged) kept.push_back(s);
    }
    return kept;
}

std::vector<std::vector<double>> least_violating_points(const Box& box,
                                                        std::span<const ConstraintSpec> constraints,
                                                        const NomConfig& cfg)
{
    validate(cfg);
    const Samples grid = generate_grid(box, cfg.grid_n);
    std::vector<double> total(grid.size(), 0.0);
    for (std::size_t r = 0; r < grid.size(); ++r) {
        for (double v : constraint_violations(constraints, grid.row(r))) total[r] += v;
    }
    std::vector<std::size_t> order(grid.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return total[a] < total[b]; });
    const std::size_t k = std::min(cfg.n_starting_points, order.size());
    std::vector<std::vector<double>> out;
    for (std::size_t i = 0; i < k; ++i) {
        const auto row = grid.row(order[i]);
        out.emplace_back(row.begin(), row.end());
    }
    return out;
}

OptimizeResult optimize(const Box& box, std::shared_ptr<const SurrogateModel> surrogate,
                        std::span<const ConstraintSpec> constraints, const NomConfig& cfg,
                        const ScalarField* truth)
{
    const auto starts = select_starting_points(box, constraints, *surrogate, cfg);
    return optimize_from(box, std::move(surrogate), constraints, starts, cfg, truth);
}

OptimizeResult optimize_from(const Box& box, std::shared_ptr<const SurrogateModel> surrogate,
                             std::span<const ConstraintSpec> constraints,
                             std::span<const std::vector<double>> starts, const NomConfig& cfg,
                             const ScalarField* truth)
{
    validate(cfg);
    if (starts.empty()) throw Error("optimize: no starting points");
    std::vector<ConstraintSpec> all(constraints.begin(), constraints.end());
    for (auto& b : box_constraints(box)) all.push_back(std::move(b));
    const NomGraph graph = build_nom(surrogate, std::move(all), cfg.penalty_c);

    OptimizeResult result;
    result.restarts.resize(starts.size());
    const auto n = static_cast<std::int64_t>(starts.size());
#pragma omp parallel for schedule(dynamic, 1) if (cfg.parallel)
    for (std::int64_t ii = 0; ii < n; ++ii) {
        const auto i = static_cast<std::size_t>(ii);
        const std::uint64_t seed = Rng::derive(cfg.seed, i);
        Rng rng(seed);
        Solution s;
        try {
            s = nom_run(graph, starts[i], cfg, rng, truth);
        } catch (const DivergenceError& e) {
            s.x = box.clamp(e.last_x);
            s.error = e.what();
        } catch (const std::exception& e) {
            s.x = starts[i];
            s.error = e.what();
        }
        if (!s.error.empty()) {
            s.f_surrogate = surrogate->value(s.x);
            if (truth) s.f_true = truth->value(s.x);
            s.violations = constraint_violations(graph.constraints(), s.x);
            s.feasible = false;
        }
        s.restart_index = i;
        s.seed = seed;
        result.restarts[i] = std::move(s);
    }

    const Solution* best = nullptr;
    for (const auto& s : result.restarts) {
        if (s.error.empty() && s.feasible && (!best || s.f_surrogate < best->f_surrogate)) best = &s;
    }
    if (!best) {
        for (const auto& s : result.restarts) {
            if (s.error.empty() && (!best || s.max_violation() < best->max_violation())) best = &s;
        }
    }
    if (!best) best = &result.restarts.front();
    result.best = *best;

    std::vector<Solution> good;
    for (const auto& s : result.restarts) {
        if (s.error.empty() && s.feasible) good.push_back(s);
    }
    result.minima = dedup_minima(good, cfg.dedup_tol, box);
    return result;
}

OptimizeResult optimize(const ProblemSpec& problem, std::shared_ptr<const SurrogateModel> surrogate,
                        const NomConfig& cfg, std::size_t objective_index)
{
    if (objective_index >= problem.objectives.size()) throw Error("optimize: objective index out of range");
    return optimize(problem.box, std::move(surrogate), problem.constraints, cfg,
                    problem.objectives[objective_index].get());
}

std::vector<Solution> collect_minima(const ProblemSpec& problem, std::shared_ptr<const SurrogateModel> surrogate,
                                     const NomConfig& cfg, std::size_t runs)
{
    NomConfig nc = cfg;
    std::vector<Solution> pool;
    for (std::size_t r = 0; r < runs; ++r) {
        nc.seed = runs == 1 ? cfg.seed : Rng::derive(cfg.seed, r);
        OptimizeResult res = optimize(problem, surrogate, nc);
        for (auto& s : res.restarts) {
            if (s.error.empty() && s.feasible) pool.push_back(std::move(s));
        }
    }
    return dedup_minima(pool, cfg.dedup_tol, problem.box);
}

} // namespace nom
