#include "nom/baselines.hpp"
#include "nom/error.hpp"
#include "nom/expr.hpp"
#include "nom/problems.hpp"
#include "nom/rng.hpp"

#include <doctest.h>

#include <cmath>
#include <vector>

using namespace nom;

namespace {

PenalizedObjective unconstrained(const char* expr, const Box& box)
{
    return PenalizedObjective{make_expression(expr, box.dim()), {}, box, 1e4};
}

double linf(std::span<const double> a, std::span<const double> b)
{
    double d = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
    return d;
}

} // namespace

TEST_CASE("penalty is exact on the feasible set")
{
    for (const char* name : {"problem1", "problem2", "problem3", "moo1"}) {
        const ProblemSpec p = get_problem(name);
        const PenalizedObjective pf = penalized(p);
        Rng rng(2);
        int checked = 0;
        for (int k = 0; k < 5000 && checked < 200; ++k) {
            std::vector<double> x(p.dim);
            for (std::size_t i = 0; i < p.dim; ++i) x[i] = rng.uniform(p.box.lo[i], p.box.hi[i]);
            if (!feasible(p, x, 0.0)) continue;
            CHECK(pf(x) == eval_objective(p, 0, x));
            ++checked;
        }
        CHECK(checked > 20);
    }
}

TEST_CASE("penalty is quadratic in the violation")
{
    const ProblemSpec p = get_problem("problem2");
    const PenalizedObjective pf = penalized(p, 0, 1e4);
    const std::vector<double> x{0.3, 0.2}; // 0.5 - 0.3 + 0.2 = 0.4 > 0
    const double g = 0.4;
    CHECK(pf(x) == doctest::Approx(eval_objective(p, 0, x) + 1e4 * g * g).epsilon(1e-12));
    // Outside the box: clamped objective plus squared distance.
    const std::vector<double> out{2.0, 0.0};
    const std::vector<double> in{1.5, 0.0};
    CHECK(pf(out) == doctest::Approx(pf(in) + 1e4 * 0.25).epsilon(1e-12));
}

TEST_CASE("nelder-mead")
{
    const Box box({-2.0, -2.0}, {2.0, 2.0});
    const auto s = nelder_mead(unconstrained("x1^2 + x2^2", box), std::vector<double>{1.0, 1.0});
    CHECK(std::hypot(s.x[0], s.x[1]) < 1e-4);
    CHECK(s.converged);

    NelderMeadOptions few;
    few.max_iters = 3;
    CHECK_FALSE(nelder_mead(unconstrained("x1^2 + x2^2", box), std::vector<double>{1.0, 1.0}, few).converged);

    const ProblemSpec p2 = get_problem("problem2");
    const auto pf2 = penalized(p2);
    const auto r2 = nelder_mead(pf2, best_grid_start(pf2));
    CHECK(linf(r2.x, std::vector<double>{0.257, -0.243}) <= 1e-2);
    CHECK(std::abs(r2.f - -9.984) <= 1e-2);
    CHECK(r2.feasible);

    const ProblemSpec p1 = get_problem("problem1");
    const auto pf1 = penalized(p1);
    const auto r1 = nelder_mead(pf1, best_grid_start(pf1));
    CHECK(std::abs(r1.f - -7.950) <= 1e-2);
    CHECK(r1.feasible);
}

TEST_CASE("grid start is the best feasible lattice point")
{
    const ProblemSpec p = get_problem("problem2");
    const auto pf = penalized(p);
    const auto x = best_grid_start(pf, 400);
    CHECK(feasible(p, x, 0.0));
    for (int i = 0; i < 20; ++i) {
        for (int j = 0; j < 20; ++j) {
            const std::vector<double> y{1.5 * i / 19.0, -1.0 + 2.0 * j / 19.0};
            if (feasible(p, y, 0.0)) CHECK(eval_objective(p, 0, x) <= eval_objective(p, 0, y));
        }
    }
}

TEST_CASE("differential evolution")
{
    // Rastrigin, minimum 0 at the origin, many local minima.
    const Box box({-5.12, -5.12}, {5.12, 5.12});
    const auto r = differential_evolution(
        unconstrained("20 + x1^2 - 10*cos(6.283185307179586*x1) + x2^2 - 10*cos(6.283185307179586*x2)", box));
    CHECK(linf(r.x, std::vector<double>{0.0, 0.0}) <= 1e-2);
    CHECK(std::abs(r.f) <= 1e-2);

    // Problem 3: the analytic optimum sits at x1 = 0.1, x2 = 5.45289 (f = -1.40644).
    const ProblemSpec p3 = get_problem("problem3");
    const auto s = differential_evolution(penalized(p3));
    CHECK(s.feasible);
    CHECK(linf(s.x, std::vector<double>{0.1, 5.452887}) <= 1e-3);
    CHECK(std::abs(s.f - -1.406437) <= 1e-4);
}

TEST_CASE("differential evolution matches the published problem 3 row")
{
    const auto s = differential_evolution(penalized(get_problem("problem3")));
    CHECK(std::abs(s.x[0] - 0.100) <= 1e-2);
    CHECK(std::abs(s.x[1] - 5.464) <= 1e-2);
    CHECK(std::abs(s.f - -1.406) <= 1e-2);
}

TEST_CASE("particle swarm")
{
    const Box box({-3.0, -3.0}, {3.0, 3.0});
    const auto s = pso(unconstrained("x1^2 + x2^2", box));
    CHECK(std::abs(s.f) <= 1e-3);

    const auto r = pso(penalized(get_problem("problem2")));
    CHECK(std::abs(r.f - -9.984) <= 1e-2);
    CHECK(r.feasible);
}

TEST_CASE("seeded baselines are reproducible and stay in the box")
{
    for (const char* name : {"problem1", "problem2", "problem3"}) {
        const ProblemSpec p = get_problem(name);
        const auto pf = penalized(p);
        for (std::uint64_t seed : {0u, 7u}) {
            DeOptions d;
            d.seed = seed;
            const auto a = differential_evolution(pf, d);
            const auto b = differential_evolution(pf, d);
            CHECK(a.x == b.x);
            CHECK(a.f == b.f);
            CHECK(p.box.contains(a.x));
            PsoOptions o;
            o.seed = seed;
            const auto c = pso(pf, o);
            const auto e = pso(pf, o);
            CHECK(c.x == e.x);
            CHECK(p.box.contains(c.x));
        }
        const auto n = nelder_mead(pf, best_grid_start(pf));
        CHECK(p.box.contains(n.x));
    }
    DeOptions d1, d2;
    d2.seed = 1;
    d1.generations = d2.generations = 5;
    const auto pf = penalized(get_problem("problem2"));
    CHECK(differential_evolution(pf, d1).x != differential_evolution(pf, d2).x);
}

TEST_CASE("reported feasibility agrees with direct evaluation")
{
    for (const char* name : {"problem1", "problem2", "problem3"}) {
        const ProblemSpec p = get_problem(name);
        const auto pf = penalized(p);
        for (const auto& s : {differential_evolution(pf), pso(pf), nelder_mead(pf, best_grid_start(pf))}) {
            double worst = 0.0;
            for (double v : constraint_violations(p.constraints, s.x)) worst = std::max(worst, v);
            CHECK(s.max_violation() == doctest::Approx(worst));
            CHECK(s.feasible == (worst <= 1e-3));
        }
    }
}

TEST_CASE("grid pareto oracle")
{
    const Box unit({0.0}, {1.0});
    const auto f1 = make_expression("x1", 1), f2 = make_expression("1 - x1", 1);
    const OracleFront a = grid_pareto_oracle(*f1, *f2, {}, unit, 101);
    CHECK(a.f.size() == 101);

    const Box wide({-2.0}, {2.0});
    const auto q1 = make_expression("(x1 - 1)^2", 1), q2 = make_expression("(x1 + 1)^2", 1);
    const OracleFront b = grid_pareto_oracle(*q1, *q2, {}, wide, 401);
    REQUIRE(b.x.size() > 0);
    std::size_t inside = 0;
    for (int i = 0; i < 401; ++i) {
        if (std::abs(-2.0 + 4.0 * i / 400.0) <= 1.0 + 1e-12) ++inside;
    }
    CHECK(b.x.size() == inside);
    for (std::size_t i = 0; i < b.x.size(); ++i) CHECK(std::abs(b.x.row(i)[0]) <= 1.0 + 1e-12);

    const std::vector<ConstraintSpec> none{inequality(make_expression("1", 1))};
    CHECK_THROWS_AS(grid_pareto_oracle(*f1, *f2, none, unit, 101), Error);
    CHECK_THROWS_AS(grid_pareto_oracle(*f1, *f2, {}, unit, 99), Error);
}
