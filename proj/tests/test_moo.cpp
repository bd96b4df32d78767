#include "nom/baselines.hpp"
#include "nom/error.hpp"
#include "nom/moo.hpp"
#include "nom/problems.hpp"
#include "nom/surrogate.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <memory>
#include <vector>

using namespace nom;

namespace {

Samples rows(std::initializer_list<std::vector<double>> r)
{
    Samples s(r.begin()->size());
    for (const auto& v : r) s.push_back(v);
    return s;
}

// O(n^2) reference: row i survives iff nothing dominates it and no earlier
// row is identical.
std::vector<std::size_t> brute_force_front(const Samples& f)
{
    std::vector<std::size_t> keep;
    for (std::size_t i = 0; i < f.size(); ++i) {
        bool out = false;
        for (std::size_t j = 0; j < f.size() && !out; ++j) {
            if (i == j) continue;
            bool le = true, lt = false, same = true;
            for (std::size_t k = 0; k < f.dim; ++k) {
                le = le && f.row(j)[k] <= f.row(i)[k];
                lt = lt || f.row(j)[k] < f.row(i)[k];
                same = same && f.row(j)[k] == f.row(i)[k];
            }
            out = (le && lt) || (same && j < i);
        }
        if (!out) keep.push_back(i);
    }
    return keep;
}

const MooProblem& moo1()
{
    static const MooProblem p = [] {
        const ProblemSpec spec = get_problem("moo1");
        MooProblem m;
        for (std::size_t i = 0; i < 2; ++i) {
            m.surrogates.push_back(std::make_shared<const SurrogateModel>(fit_surrogate(spec, i).model));
        }
        m.truths = spec.objectives;
        m.constraints = spec.constraints;
        m.box = spec.box;
        return m;
    }();
    return p;
}

const SweepResult& moo1_sweep()
{
    static const SweepResult r = sweep_pareto(moo1(), 20, NomConfig{});
    return r;
}

const OracleFront& moo1_oracle()
{
    static const OracleFront o = [] {
        const ProblemSpec spec = get_problem("moo1");
        return grid_pareto_oracle(*spec.objectives[0], *spec.objectives[1], spec.constraints, spec.box, 400);
    }();
    return o;
}

} // namespace

TEST_CASE("pareto filter examples")
{
    CHECK(pareto_filter(rows({{1, 2}, {2, 1}, {2, 2}})) == std::vector<std::size_t>{0, 1});
    CHECK(pareto_filter(rows({{3, 3}, {3, 3}, {3, 3}})) == std::vector<std::size_t>{0});
    CHECK(pareto_filter(rows({{1, 1}})) == std::vector<std::size_t>{0});
    CHECK(pareto_filter(Samples(2)).empty());
    // Equal in one objective, better in the other: dominated.
    CHECK(pareto_filter(rows({{1, 2}, {1, 1}})) == std::vector<std::size_t>{1});
    CHECK(pareto_filter(rows({{0, 5, 1}, {1, 0, 5}, {5, 1, 0}, {5, 5, 5}})) == std::vector<std::size_t>{0, 1, 2});
}

TEST_CASE("pareto filter matches the pairwise oracle")
{
    Rng rng(11);
    for (int trial = 0; trial < 20; ++trial) {
        Samples f(2);
        for (int i = 0; i < 100; ++i) {
            // Coarse values so ties and duplicates occur.
            f.push_back(std::vector<double>{std::round(rng.uniform(0, 10)), std::round(rng.uniform(0, 10))});
        }
        const auto kept = pareto_filter(f);
        CHECK(kept == brute_force_front(f));

        Samples sub(2);
        for (std::size_t i : kept) sub.push_back(f.row(i));
        const auto again = pareto_filter(sub);
        REQUIRE(again.size() == sub.size());
        for (std::size_t i = 0; i < again.size(); ++i) CHECK(again[i] == i);
    }
}

TEST_CASE("dominance excess")
{
    const Samples front = rows({{0, 10}, {10, 0}, {5, 5}});
    CHECK(dominance_excess(std::vector<double>{5, 5}, front) == doctest::Approx(0.0));
    CHECK(dominance_excess(std::vector<double>{6, 6}, front) == doctest::Approx(0.1));
    CHECK(dominance_excess(std::vector<double>{1, 1}, front) < 0.0);
    CHECK(dominance_excess(std::vector<double>{0, 12}, front) == doctest::Approx(0.0));
    CHECK_THROWS_AS(dominance_excess(std::vector<double>{1, 1}, Samples(2)), Error);
    CHECK_THROWS_AS(dominance_excess(std::vector<double>{1}, front), Error);
}

TEST_CASE("moo problem validation")
{
    MooProblem p = moo1();
    CHECK_NOTHROW(p.validate());
    p.primary = 2;
    CHECK_THROWS_AS(p.validate(), Error);
    p.primary = 0;
    p.box = Box({0.0}, {1.0});
    CHECK_THROWS_AS(p.validate(), Error);
}

TEST_CASE("a bound that never binds changes nothing")
{
    const MooProblem& p = moo1();
    NomConfig cfg;
    cfg.epochs = 500;
    const OptimizeResult bounded = solve_bounded(p, std::vector<double>{1e9}, cfg);
    const OptimizeResult plain = optimize(p.box, p.surrogates[0], p.constraints, cfg, p.truths[0].get());
    REQUIRE(bounded.restarts.size() == plain.restarts.size());
    for (std::size_t i = 0; i < plain.restarts.size(); ++i) CHECK(bounded.restarts[i].x == plain.restarts[i].x);
    CHECK(bounded.best.x == plain.best.x);
}

TEST_CASE("a bound below the secondary minimum cannot be met")
{
    const MooProblem& p = moo1();
    const double u = moo1_sweep().u_low - 5.0;
    NomConfig cfg;
    cfg.epochs = 500;
    const OptimizeResult r = solve_bounded(p, std::vector<double>{u}, cfg);
    CHECK_FALSE(r.best.feasible);
    CHECK(r.best.max_violation() > 0.0);
    CHECK_THROWS_AS(solve_bounded(p, std::vector<double>{}, cfg), Error);
}

TEST_CASE("mid-sweep bound lands on the oracle front")
{
    const MooProblem& p = moo1();
    const auto& s = moo1_sweep();
    const double u = 0.5 * (s.u_low + s.u_high);
    const OptimizeResult r = solve_bounded(p, std::vector<double>{u}, NomConfig{});
    REQUIRE(r.best.feasible);
    const std::vector<double> f{p.truths[0]->value(r.best.x), p.truths[1]->value(r.best.x)};
    CHECK(dominance_excess(f, moo1_oracle().f) <= 0.02);
}

TEST_CASE("sweep on moo1")
{
    const auto& s = moo1_sweep();
    REQUIRE(s.sweep.size() == 20);
    CHECK(s.u_low < s.u_high);
    CHECK(s.sweep.front().u_bound == s.u_low);
    CHECK(s.sweep.back().u_bound == s.u_high);

    std::size_t feasible = 0;
    for (const auto& pt : s.sweep) feasible += pt.feasible ? 1 : 0;
    CHECK(feasible >= 15);

    // Front points: non-dominated among themselves, within their bound.
    Samples f(2);
    for (const auto& pt : s.front) {
        CHECK(pt.feasible);
        CHECK(pt.f_surrogate[1] <= pt.u_bound + 1e-3);
        f.push_back(pt.f_surrogate);
    }
    CHECK(pareto_filter(f).size() == f.size());

    // Larger bound, no worse primary objective.
    std::vector<const ParetoPoint*> ok;
    for (const auto& pt : s.sweep) {
        if (pt.feasible) ok.push_back(&pt);
    }
    for (std::size_t i = 0; i < ok.size(); ++i) {
        for (std::size_t j = i + 1; j < ok.size(); ++j) CHECK(ok[j]->f_surrogate[0] <= ok[i]->f_surrogate[0] + 0.05);
    }

    // Against the brute-force oracle, in analytic units.
    for (const auto* pt : ok) {
        REQUIRE(pt->f_true.size() == 2);
        CHECK(dominance_excess(pt->f_true, moo1_oracle().f) <= 0.02);
    }
}

TEST_CASE("single-bound sweep sits at the secondary optimum")
{
    NomConfig cfg;
    const SweepResult r = sweep_pareto(moo1(), 1, cfg);
    REQUIRE(r.sweep.size() == 1);
    CHECK(r.sweep[0].u_bound == r.u_low);
    for (std::size_t i = 0; i < 2; ++i) CHECK(std::abs(r.sweep[0].x[i] - r.secondary_optimum.x[i]) <= 0.1);
    CHECK_THROWS_AS(sweep_pareto(moo1(), 0, cfg), Error);
}
