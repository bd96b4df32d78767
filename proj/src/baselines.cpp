#include "nom/baselines.hpp"

#include "nom/error.hpp"
#include "nom/kernels.hpp"
#include "nom/moo.hpp"
#include "nom/rng.hpp"
#include "nom/surrogate.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace nom {

double PenalizedObjective::operator()(std::span<const double> x) const
{
    const std::vector<double> xc = box.clamp(x);
    double outside = 0.0;
    for (std::size_t i = 0; i < xc.size(); ++i) outside += (x[i] - xc[i]) * (x[i] - xc[i]);
    double pen = 0.0;
    for (double v : constraint_violations(constraints, xc)) pen += v * v;
    return objective->value(xc) + rho * (pen + outside);
}

PenalizedObjective penalized(const ProblemSpec& p, std::size_t objective_index, double rho)
{
    if (objective_index >= p.objectives.size()) throw Error("penalized: objective index out of range");
    return {p.objectives[objective_index], p.constraints, p.box, rho};
}

double BaselineSolution::max_violation() const
{
    double v = 0.0;
    for (double x : violations) v = std::max(v, x);
    return v;
}

namespace {

BaselineSolution finish(const PenalizedObjective& pf, std::vector<double> x, double tol)
{
    BaselineSolution s;
    s.x = pf.box.clamp(x);
    s.f = pf.objective->value(s.x);
    s.penalized = pf(s.x);
    s.violations = constraint_violations(pf.constraints, s.x);
    s.feasible = s.max_violation() <= tol;
    return s;
}

// Running best over every evaluated point: feasible beats infeasible, then
// lower penalized value, then earlier evaluation.
struct Incumbent {
    std::vector<double> x;
    double value = INFINITY;
    bool feasible = false;
    double tol;

    explicit Incumbent(double tol_) : tol(tol_) {}

    void offer(const PenalizedObjective& pf, std::span<const double> x_new, double value_new)
    {
        const auto xc = pf.box.clamp(x_new);
        double worst = 0.0;
        for (double v : constraint_violations(pf.constraints, xc)) worst = std::max(worst, v);
        const bool feas = worst <= tol;
        if (x.empty() || (feas && !feasible) || (feas == feasible && value_new < value)) {
            x = xc;
            value = value_new;
            feasible = feas;
        }
    }
};

void evaluate_all(const PenalizedObjective& pf, const Samples& pts, std::span<double> out)
{
    const auto n = static_cast<std::int64_t>(pts.size());
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < n; ++i) {
        out[static_cast<std::size_t>(i)] = pf(pts.row(static_cast<std::size_t>(i)));
    }
}

} // namespace

BaselineSolution nelder_mead(const PenalizedObjective& pf, std::span<const double> x0,
                             const NelderMeadOptions& opts)
{
    const std::size_t d = x0.size();
    if (d != pf.box.dim()) throw Error("nelder_mead: starting point has the wrong dimension");
    std::size_t evals = 0;
    auto f = [&](std::span<const double> x) {
        ++evals;
        return pf(x);
    };

    std::vector<std::vector<double>> s(d + 1, std::vector<double>(x0.begin(), x0.end()));
    for (std::size_t i = 0; i < d; ++i) {
        const double step = opts.initial_step * pf.box.width(i);
        // Step inward so the initial simplex stays in the box.
        s[i + 1][i] += x0[i] + step <= pf.box.hi[i] ? step : -step;
    }
    std::vector<double> fs(d + 1);
    for (std::size_t i = 0; i <= d; ++i) fs[i] = f(s[i]);

    std::vector<std::size_t> idx(d + 1);
    std::vector<double> centroid(d), xr(d), xe(d), xc(d);
    bool converged = false;
    int it = 0;
    for (; it < opts.max_iters; ++it) {
        std::iota(idx.begin(), idx.end(), std::size_t{0});
        std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return fs[a] < fs[b]; });
        const std::size_t best = idx.front(), worst = idx.back(), second = idx[d - 1];

        double diameter = 0.0;
        for (std::size_t i = 0; i <= d; ++i) {
            double dist = 0.0;
            for (std::size_t k = 0; k < d; ++k) dist = std::max(dist, std::abs(s[i][k] - s[best][k]));
            diameter = std::max(diameter, dist);
        }
        if (diameter < opts.x_tol || fs[worst] - fs[best] < opts.f_tol) {
            converged = true;
            break;
        }

        std::fill(centroid.begin(), centroid.end(), 0.0);
        for (std::size_t i = 0; i <= d; ++i) {
            if (i == worst) continue;
            for (std::size_t k = 0; k < d; ++k) centroid[k] += s[i][k] / static_cast<double>(d);
        }
        for (std::size_t k = 0; k < d; ++k) xr[k] = centroid[k] + (centroid[k] - s[worst][k]);
        const double fr = f(xr);
        if (fr < fs[best]) {
            for (std::size_t k = 0; k < d; ++k) xe[k] = centroid[k] + 2.0 * (centroid[k] - s[worst][k]);
            const double fe = f(xe);
            if (fe < fr) {
                s[worst] = xe;
                fs[worst] = fe;
            } else {
                s[worst] = xr;
                fs[worst] = fr;
            }
            continue;
        }
        if (fr < fs[second]) {
            s[worst] = xr;
            fs[worst] = fr;
            continue;
        }
        // Contraction: outside if the reflection improved on the worst vertex,
        // inside otherwise.
        const bool outside = fr < fs[worst];
        for (std::size_t k = 0; k < d; ++k) {
            xc[k] = outside ? centroid[k] + 0.5 * (xr[k] - centroid[k])
                            : centroid[k] + 0.5 * (s[worst][k] - centroid[k]);
        }
        const double fc = f(xc);
        if (fc < (outside ? fr : fs[worst])) {
            s[worst] = xc;
            fs[worst] = fc;
            continue;
        }
        for (std::size_t i = 0; i <= d; ++i) {
            if (i == best) continue;
            for (std::size_t k = 0; k < d; ++k) s[i][k] = s[best][k] + 0.5 * (s[i][k] - s[best][k]);
            fs[i] = f(s[i]);
        }
    }
    const auto best = static_cast<std::size_t>(std::min_element(fs.begin(), fs.end()) - fs.begin());
    BaselineSolution out = finish(pf, s[best], opts.feasibility_tol);
    out.converged = converged;
    out.iterations = it;
    out.evaluations = evals;
    return out;
}

std::vector<double> best_grid_start(const PenalizedObjective& pf, std::size_t grid_n)
{
    const Samples grid = generate_grid(pf.box, grid_n);
    const auto f = kernels::eval_field(*pf.objective, grid);
    std::size_t best = grid.size();
    std::size_t least = 0;
    double least_v = INFINITY;
    for (std::size_t r = 0; r < grid.size(); ++r) {
        double v = 0.0;
        for (double c : constraint_violations(pf.constraints, grid.row(r))) v += c;
        if (v == 0.0 && (best == grid.size() || f[r] < f[best])) best = r;
        if (v < least_v) {
            least_v = v;
            least = r;
        }
    }
    const auto row = grid.row(best == grid.size() ? least : best);
    return {row.begin(), row.end()};
}

BaselineSolution differential_evolution(const PenalizedObjective& pf, const DeOptions& opts)
{
    pf.box.validate();
    if (opts.population < 4) throw Error("differential_evolution: population must be at least 4");
    const std::size_t d = pf.box.dim();
    const std::size_t np = opts.population;
    Rng rng(opts.seed);

    Samples pop(d, np), trial(d, np);
    for (std::size_t i = 0; i < np; ++i) {
        for (std::size_t k = 0; k < d; ++k) pop.row(i)[k] = rng.uniform(pf.box.lo[k], pf.box.hi[k]);
    }
    std::vector<double> fit(np), trial_fit(np);
    evaluate_all(pf, pop, fit);
    Incumbent inc(opts.feasibility_tol);
    for (std::size_t i = 0; i < np; ++i) inc.offer(pf, pop.row(i), fit[i]);

    for (int gen = 0; gen < opts.generations; ++gen) {
        // Trial vectors are drawn serially so the random stream does not
        // depend on the evaluation schedule.
        for (std::size_t i = 0; i < np; ++i) {
            std::size_t a, b, c;
            do a = rng.index(np); while (a == i);
            do b = rng.index(np); while (b == i || b == a);
            do c = rng.index(np); while (c == i || c == a || c == b);
            const std::size_t forced = rng.index(d);
            auto t = trial.row(i);
            for (std::size_t k = 0; k < d; ++k) {
                const bool cross = rng.uniform() < opts.cr || k == forced;
                const double v = cross ? pop.row(a)[k] + opts.f * (pop.row(b)[k] - pop.row(c)[k]) : pop.row(i)[k];
                t[k] = std::clamp(v, pf.box.lo[k], pf.box.hi[k]);
            }
        }
        evaluate_all(pf, trial, trial_fit);
        for (std::size_t i = 0; i < np; ++i) {
            inc.offer(pf, trial.row(i), trial_fit[i]);
            if (trial_fit[i] <= fit[i]) {
                std::copy_n(trial.row(i).begin(), d, pop.row(i).begin());
                fit[i] = trial_fit[i];
            }
        }
    }
    BaselineSolution out = finish(pf, inc.x, opts.feasibility_tol);
    out.iterations = opts.generations;
    out.evaluations = np * static_cast<std::size_t>(opts.generations + 1);
    return out;
}

BaselineSolution pso(const PenalizedObjective& pf, const PsoOptions& opts)
{
    pf.box.validate();
    if (opts.swarm == 0) throw Error("pso: empty swarm");
    const std::size_t d = pf.box.dim();
    const std::size_t n = opts.swarm;
    Rng rng(opts.seed);

    std::vector<double> vmax(d);
    for (std::size_t k = 0; k < d; ++k) vmax[k] = 0.5 * pf.box.width(k);
    Samples pos(d, n), vel(d, n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t k = 0; k < d; ++k) {
            pos.row(i)[k] = rng.uniform(pf.box.lo[k], pf.box.hi[k]);
            vel.row(i)[k] = rng.uniform(-vmax[k], vmax[k]);
        }
    }
    std::vector<double> fit(n);
    evaluate_all(pf, pos, fit);
    Samples pbest = pos;
    std::vector<double> pbest_fit = fit;
    std::size_t g = static_cast<std::size_t>(std::min_element(fit.begin(), fit.end()) - fit.begin());
    Incumbent inc(opts.feasibility_tol);
    for (std::size_t i = 0; i < n; ++i) inc.offer(pf, pos.row(i), fit[i]);

    for (int it = 0; it < opts.iterations; ++it) {
        for (std::size_t i = 0; i < n; ++i) {
            auto x = pos.row(i);
            auto v = vel.row(i);
            for (std::size_t k = 0; k < d; ++k) {
                const double r1 = rng.uniform(), r2 = rng.uniform();
                double vk = opts.w * v[k] + opts.c1 * r1 * (pbest.row(i)[k] - x[k]) +
                            opts.c2 * r2 * (pbest.row(g)[k] - x[k]);
                vk = std::clamp(vk, -vmax[k], vmax[k]);
                v[k] = vk;
                x[k] = std::clamp(x[k] + vk, pf.box.lo[k], pf.box.hi[k]);
            }
        }
        evaluate_all(pf, pos, fit);
        for (std::size_t i = 0; i < n; ++i) {
            inc.offer(pf, pos.row(i), fit[i]);
            if (fit[i] < pbest_fit[i]) {
                pbest_fit[i] = fit[i];
                std::copy_n(pos.row(i).begin(), d, pbest.row(i).begin());
            }
        }
        g = static_cast<std::size_t>(std::min_element(pbest_fit.begin(), pbest_fit.end()) - pbest_fit.begin());
    }
    BaselineSolution out = finish(pf, inc.x, opts.feasibility_tol);
    out.iterations = opts.iterations;
    out.evaluations = n * static_cast<std::size_t>(opts.iterations + 1);
    return out;
}

OracleFront grid_pareto_oracle(const ScalarField& f1, const ScalarField& f2,
                               std::span<const ConstraintSpec> constraints, const Box& box,
                               std::size_t resolution, double eq_tol)
{
    if (resolution < 100) throw Error("grid_pareto_oracle: resolution must be at least 100 per dimension");
    const Samples grid = lattice(box, resolution);
    const auto v1 = kernels::eval_field(f1, grid);
    const auto v2 = kernels::eval_field(f2, grid);

    Samples xs(box.dim()), fs(2);
    for (std::size_t r = 0; r < grid.size(); ++r) {
        bool ok = true;
        for (const auto& c : constraints) {
            const double v = c.expr->value(grid.row(r));
            ok = c.kind == ConstraintKind::inequality ? v <= 0.0 : std::abs(v) <= eq_tol;
            if (!ok) break;
        }
        if (!ok) continue;
        xs.push_back(grid.row(r));
        const double f[2] = {v1[r], v2[r]};
        fs.push_back(f);
    }
    if (xs.empty()) throw Error("grid_pareto_oracle: no feasible lattice point");

    OracleFront out{Samples(box.dim()), Samples(2)};
    for (std::size_t i : pareto_filter(fs)) {
        out.x.push_back(xs.row(i));
        out.f.push_back(fs.row(i));
    }
    return out;
}

} // namespace nom
