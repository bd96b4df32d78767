#include "nom/problems.hpp"

#include "nom/error.hpp"
#include "nom/expr.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>

namespace nom {

double ConstraintSpec::violation(std::span<const double> x) const
{
    const double v = expr->value(x);
    return kind == ConstraintKind::inequality ? std::max(0.0, v) : std::abs(v);
}

ConstraintSpec inequality(FieldPtr expr, std::string name)
{
    if (name.empty()) name = expr->describe() + " <= 0";
    return {ConstraintKind::inequality, std::move(expr), std::move(name)};
}

ConstraintSpec equality(FieldPtr expr, std::string name)
{
    if (name.empty()) name = expr->describe() + " == 0";
    return {ConstraintKind::equality, std::move(expr), std::move(name)};
}

Box::Box(std::vector<double> lo_, std::vector<double> hi_) : lo(std::move(lo_)), hi(std::move(hi_))
{
    validate();
}

void Box::validate() const
{
    if (lo.size() != hi.size() || lo.empty()) throw Error("box: bounds must be non-empty and paired");
    for (std::size_t i = 0; i < lo.size(); ++i) {
        if (!std::isfinite(lo[i]) || !std::isfinite(hi[i]) || !(lo[i] < hi[i])) {
            throw Error("box: degenerate bounds on dimension " + std::to_string(i + 1));
        }
    }
}

double Box::diagonal() const
{
    double s = 0.0;
    for (std::size_t i = 0; i < dim(); ++i) s += width(i) * width(i);
    return std::sqrt(s);
}

bool Box::contains(std::span<const double> x, double tol) const
{
    for (std::size_t i = 0; i < dim(); ++i) {
        if (x[i] < lo[i] - tol || x[i] > hi[i] + tol) return false;
    }
    return true;
}

std::vector<double> Box::clamp(std::span<const double> x) const
{
    std::vector<double> out(x.begin(), x.end());
    for (std::size_t i = 0; i < dim(); ++i) out[i] = std::clamp(out[i], lo[i], hi[i]);
    return out;
}

std::vector<ConstraintSpec> box_constraints(const Box& box)
{
    std::vector<ConstraintSpec> out;
    for (std::size_t i = 0; i < box.dim(); ++i) {
        out.push_back(inequality(std::make_shared<const AxisBound>(box.dim(), i, box.lo[i], -1.0)));
        out.push_back(inequality(std::make_shared<const AxisBound>(box.dim(), i, box.hi[i], 1.0)));
    }
    return out;
}

namespace {

struct ProblemText {
    std::vector<std::string> objectives;
    std::vector<std::string> constraints; // inequalities g <= 0
    std::vector<double> lo, hi;
};

ProblemSpec build(std::string name, const ProblemText& t)
{
    ProblemSpec p;
    p.name = std::move(name);
    p.box = Box(t.lo, t.hi);
    p.dim = p.box.dim();
    for (std::size_t i = 0; i < t.objectives.size(); ++i) {
        p.objectives.push_back(make_expression(t.objectives[i], p.dim));
        p.objective_names.push_back("f" + std::to_string(i + 1));
    }
    for (const auto& c : t.constraints) p.constraints.push_back(inequality(make_expression(c, p.dim)));
    return p;
}

const std::string problem3_objective = "sin(2*x1)^3 * sin(2*x2) / (x1^3 * (x1 + x2))";

// Problem 1 as printed has (x2 - 10)^3, which puts f(13.660, 0) at -0.951
// and contradicts the published optimum value -7.950. With (x2 - 20)^3 the
// same point evaluates to -7.951; that corrected form is the default.
ProblemSpec problem1()
{
    ProblemSpec p = build("problem1", {{"((x1 - 10)^3 + (x2 - 20)^3) / 1000"},
                                       {"-(x1 - 5)^2 - (x2 - 5)^2 + 100",
                                        "(x1 - 6)^2 - (x2 - 5)^2 - 100"},
                                       {13.0, 0.0},
                                       {20.0, 20.0}});
    p.reference = ReferenceOptimum{{13.660, 0.000}, -7.950, "published"};
    return p;
}

ProblemSpec problem1_literal()
{
    return build("problem1-literal", {{"((x1 - 10)^3 + (x2 - 10)^3) / 1000"},
                                      {"-(x1 - 5)^2 - (x2 - 5)^2 + 100",
                                       "(x1 - 6)^2 - (x2 - 5)^2 - 100"},
                                      {13.0, 0.0},
                                      {20.0, 20.0}});
}

ProblemSpec problem2()
{
    ProblemSpec p = build("problem2",
                          {{"-10*cos(x1*x2) + x1*x2/10 + 10*(x1 + x2)*sin(x1 + x2)"},
                           {"0.5 - x1 + x2", "x1*x2 - 15"},
                           {0.0, -1.0},
                           {1.5, 1.0}});
    p.reference = ReferenceOptimum{{0.257, -0.243}, -9.984, "published"};
    return p;
}

ProblemSpec problem3()
{
    ProblemSpec p = build("problem3", {{problem3_objective},
                                       {"x1^2 - x2 + 1", "(x1 - 2)^2 - x2 + 1"},
                                       {0.1, 0.1},
                                       {1.0, 7.0}});
    p.reference = ReferenceOptimum{{0.100, 5.464}, -1.406, "published"};
    return p;
}

ProblemSpec moo1()
{
    ProblemSpec p = build("moo1", {{"(x1 - 3)^2 + (x2 - 7)^2", "(x1 - 9)^2 + (x2 - 8)^2"},
                                   {"70 - 4*x2 - 8*x1", "-2.5*x2 + 3*x1", "-6.8 + x1"},
                                   {0.0, 5.0},
                                   {10.0, 15.0}});
    return p;
}

// Problem 3 without its two general constraints. The two local minima were
// located by a 500 x 500 lattice search and refined by a bounded line search
// along x2 on the x1 = 0.1 edge.
ProblemSpec discussion()
{
    ProblemSpec p = build("discussion", {{problem3_objective}, {}, {0.1, 0.1}, {1.0, 7.0}});
    p.known_minima = {
        ReferenceOptimum{{0.1, 2.2514}, -3.2618, "grid-search"},
        ReferenceOptimum{{0.1, 5.4529}, -1.4064, "grid-search"},
    };
    p.reference = p.known_minima.front();
    return p;
}

// Six-variable stand-in for higher-dimensional design problems: three
// decoupled trigonometric-quadratic pairs, one linear coupling constraint.
ProblemSpec synthetic6d()
{
    std::string f;
    for (int k = 0; k < 3; ++k) {
        const std::string a = "x" + std::to_string(2 * k + 1);
        const std::string b = "x" + std::to_string(2 * k + 2);
        if (k) f += " + ";
        f += "0.1*(" + a + "^2 + " + b + "^2) + sin(2*" + a + ")*cos(" + b + ")";
    }
    return build("synthetic6d", {{f},
                                 {"x1 + x3 + x5 - 3"},
                                 std::vector<double>(6, -2.0),
                                 std::vector<double>(6, 2.0)});
}

const std::map<std::string, std::function<ProblemSpec()>, std::less<>>& registry()
{
    static const std::map<std::string, std::function<ProblemSpec()>, std::less<>> r = {
        {"problem1", problem1},     {"problem1-literal", problem1_literal},
        {"problem2", problem2},     {"problem3", problem3},
        {"moo1", moo1},             {"discussion", discussion},
        {"synthetic6d", synthetic6d},
    };
    return r;
}

} // namespace

ProblemSpec get_problem(std::string_view name)
{
    const auto& r = registry();
    const auto it = r.find(name);
    if (it == r.end()) throw Error("unknown problem '" + std::string(name) + "'");
    return it->second();
}

std::vector<std::string> problem_names()
{
    std::vector<std::string> names;
    for (const auto& [k, v] : registry()) names.push_back(k);
    return names;
}

double eval_objective(const ProblemSpec& p, std::size_t index, std::span<const double> x)
{
    if (index >= p.objectives.size()) throw Error("objective index out of range");
    return p.objectives[index]->value(x);
}

std::vector<double> eval_constraints(const ProblemSpec& p, std::span<const double> x)
{
    std::vector<double> out;
    out.reserve(p.constraints.size());
    for (const auto& c : p.constraints) out.push_back(c.expr->value(x));
    return out;
}

std::vector<double> constraint_violations(std::span<const ConstraintSpec> constraints,
                                          std::span<const double> x)
{
    std::vector<double> out;
    out.reserve(constraints.size());
    for (const auto& c : constraints) out.push_back(c.violation(x));
    return out;
}

bool feasible(const ProblemSpec& p, std::span<const double> x, double tol)
{
    if (!p.box.contains(x, tol)) return false;
    return std::all_of(p.constraints.begin(), p.constraints.end(),
                       [&](const ConstraintSpec& c) { return c.violation(x) <= tol; });
}

ProblemSpec problem_from_json(const nlohmann::json& j)
{
    try {
        ProblemSpec p;
        p.name = j.value("name", std::string("custom"));
        std::vector<double> lo, hi;
        for (const auto& b : j.at("box")) {
            if (b.size() != 2) throw Error("problem config: each box entry must be [lo, hi]");
            lo.push_back(b.at(0).get<double>());
            hi.push_back(b.at(1).get<double>());
        }
        p.box = Box(lo, hi);
        p.dim = p.box.dim();
        for (const auto& o : j.at("objectives")) {
            p.objectives.push_back(make_expression(o.get<std::string>(), p.dim));
            p.objective_names.push_back("f" + std::to_string(p.objectives.size()));
        }
        if (p.objectives.empty()) throw Error("problem config: at least one objective required");
        if (j.contains("constraints")) {
            for (const auto& c : j.at("constraints")) {
                const std::string kind = c.value("kind", std::string("inequality"));
                auto expr = make_expression(c.at("expr").get<std::string>(), p.dim);
                if (kind == "inequality") {
                    p.constraints.push_back(inequality(std::move(expr)));
                } else if (kind == "equality") {
                    p.constraints.push_back(equality(std::move(expr)));
                } else {
                    throw Error("problem config: unknown constraint kind '" + kind + "'");
                }
            }
        }
        if (j.contains("reference")) {
            const auto& r = j.at("reference");
            p.reference = ReferenceOptimum{r.at("x").get<std::vector<double>>(),
                                           r.at("f").get<double>(), "config"};
        }
        return p;
    } catch (const nlohmann::json::exception& e) {
        throw Error(std::string("problem config: ") + e.what());
    }
}

ProblemSpec load_problem_file(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw Error("cannot open problem file '" + path + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw Error("problem file '" + path + "': " + e.what());
    }
    return problem_from_json(j.contains("problem") ? j.at("problem") : j);
}

} // namespace nom
