#include "nom/moo.hpp"

#include "nom/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace nom {

void MooProblem::validate() const
{
    box.validate();
    if (surrogates.empty()) throw Error("moo: no objectives");
    if (primary >= surrogates.size()) throw Error("moo: primary objective index out of range");
    for (const auto& s : surrogates) {
        if (!s || s->dim() != box.dim()) throw Error("moo: surrogate dimension does not match the box");
    }
    if (!truths.empty() && truths.size() != surrogates.size()) {
        throw Error("moo: analytic objectives must align with surrogates");
    }
}

namespace {

std::vector<ConstraintSpec> bounded_constraints(const MooProblem& p, std::span<const double> upper)
{
    std::vector<ConstraintSpec> out = p.constraints;
    std::size_t j = 0;
    for (std::size_t i = 0; i < p.surrogates.size(); ++i) {
        if (i == p.primary) continue;
        auto field = std::make_shared<SurrogateField>(p.surrogates[i]);
        out.push_back(inequality(std::make_shared<ShiftedField>(field, upper[j++]),
                                 "f" + std::to_string(i + 1) + " <= U"));
    }
    return out;
}

} // namespace

OptimizeResult solve_bounded(const MooProblem& p, std::span<const double> upper, const NomConfig& cfg)
{
    p.validate();
    if (upper.size() + 1 != p.surrogates.size()) {
        throw Error("solve_bounded: need one upper bound per non-primary objective");
    }
    const auto constraints = bounded_constraints(p, upper);
    const ScalarField* truth = p.truths.empty() ? nullptr : p.truths[p.primary].get();
    std::vector<std::vector<double>> starts;
    try {
        starts = select_starting_points(p.box, constraints, *p.surrogates[p.primary], cfg);
    } catch (const Error&) {
        starts = least_violating_points(p.box, constraints, cfg);
    }
    return optimize_from(p.box, p.surrogates[p.primary], constraints, starts, cfg, truth);
}

SweepResult sweep_pareto(const MooProblem& p, std::size_t n_sweep, const NomConfig& cfg)
{
    p.validate();
    if (p.surrogates.size() != 2) throw Error("sweep_pareto: exactly two objectives required");
    if (n_sweep == 0) throw Error("sweep_pareto: n_sweep must be positive");
    const std::size_t secondary = 1 - p.primary;

    SweepResult out;
    const ScalarField* sec_truth = p.truths.empty() ? nullptr : p.truths[secondary].get();
    const auto sec = optimize(p.box, p.surrogates[secondary], p.constraints, cfg, sec_truth);
    if (!sec.best.feasible) throw Error("sweep_pareto: secondary objective optimum is infeasible");
    out.secondary_optimum = sec.best;
    out.u_low = p.surrogates[secondary]->value(sec.best.x);
    out.u_high = std::max(out.u_low, p.surrogates[p.primary]->value(sec.best.x));

    for (std::size_t j = 0; j < n_sweep; ++j) {
        double u = out.u_low;
        if (n_sweep > 1) {
            const double t = static_cast<double>(j) / static_cast<double>(n_sweep - 1);
            u = j + 1 == n_sweep ? out.u_high : out.u_low + t * (out.u_high - out.u_low);
        }
        NomConfig c = cfg;
        c.seed = Rng::derive(cfg.seed, j + 1);
        const double bound[1] = {u};
        const auto r = solve_bounded(p, bound, c);

        ParetoPoint pt;
        pt.x = r.best.x;
        for (const auto& s : p.surrogates) pt.f_surrogate.push_back(s->value(pt.x));
        for (const auto& f : p.truths) pt.f_true.push_back(f->value(pt.x));
        pt.u_bound = u;
        pt.feasible = r.best.feasible && r.best.error.empty();
        pt.sweep_index = j;
        pt.seed = c.seed;
        out.sweep.push_back(std::move(pt));
    }

    std::vector<const ParetoPoint*> ok;
    Samples f(2);
    for (const auto& pt : out.sweep) {
        if (!pt.feasible) continue;
        ok.push_back(&pt);
        f.push_back(pt.f_surrogate);
    }
    for (std::size_t i : pareto_filter(f)) out.front.push_back(*ok[i]);
    return out;
}

std::vector<std::size_t> pareto_filter(const Samples& objectives)
{
    const std::size_t n = objectives.size();
    for (double v : objectives.values) {
        if (std::isnan(v)) throw Error("pareto_filter: NaN objective value");
    }
    std::vector<std::size_t> keep;
    if (objectives.dim != 2) {
        std::vector<std::uint8_t> beaten(n);
        kernels::parallel::dominated_mask(objectives, beaten);
        for (std::size_t i = 0; i < n; ++i) {
            if (!beaten[i]) keep.push_back(i);
        }
        return keep;
    }
    // Sort by (f1, f2, index). A row is dropped iff some row before it in
    // that order has f2 <= its f2: that row is <= in both objectives and is
    // either strictly better somewhere or an earlier duplicate.
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const auto ra = objectives.row(a);
        const auto rb = objectives.row(b);
        if (ra[0] != rb[0]) return ra[0] < rb[0];
        if (ra[1] != rb[1]) return ra[1] < rb[1];
        return a < b;
    });
    double best_f2 = 0.0;
    for (std::size_t i : order) {
        const double f2 = objectives.row(i)[1];
        if (keep.empty() || f2 < best_f2) {
            keep.push_back(i);
            best_f2 = f2;
        }
    }
    std::sort(keep.begin(), keep.end());
    return keep;
}

double dominance_excess(std::span<const double> f, const Samples& front)
{
    if (front.empty()) throw Error("dominance_excess: empty front");
    if (f.size() != front.dim) throw Error("dominance_excess: dimension mismatch");
    const std::size_t m = front.dim;
    std::vector<double> lo(m, std::numeric_limits<double>::infinity());
    std::vector<double> hi(m, -std::numeric_limits<double>::infinity());
    for (std::size_t i = 0; i < front.size(); ++i) {
        for (std::size_t k = 0; k < m; ++k) {
            lo[k] = std::min(lo[k], front.row(i)[k]);
            hi[k] = std::max(hi[k], front.row(i)[k]);
        }
    }
    double worst = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < front.size(); ++i) {
        double margin = std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < m; ++k) {
            const double range = hi[k] > lo[k] ? hi[k] - lo[k] : 1.0;
            margin = std::min(margin, (f[k] - front.row(i)[k]) / range);
        }
        worst = std::max(worst, margin);
    }
    return worst;
}

} // namespace nom
