#include "nom/gradcheck.hpp"

#include "nom/error.hpp"
#include "nom/expr.hpp"
#include "nom/nom.hpp"
#include "nom/problems.hpp"
#include "nom/surrogate.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

namespace nom {

namespace {

constexpr ActivationKind all_kinds[] = {ActivationKind::linear, ActivationKind::tanh, ActivationKind::relu,
                                        ActivationKind::penalty_ineq, ActivationKind::penalty_eq};

// Kinked activations are only compared away from z = 0, where a central
// difference straddling the kink is meaningless.
constexpr double kink_margin = 1e-3;

bool kinked(ActivationKind k) { return k != ActivationKind::linear && k != ActivationKind::tanh; }

Activation random_activation(Rng& rng, ActivationKind kind)
{
    return {kind, kinked(kind) && kind != ActivationKind::relu ? rng.uniform(0.5, 10.0) : 1.0};
}

struct Tally {
    GradCheckResult r;
    double tol;

    Tally(std::string suite, std::string item, double tol_) : r{std::move(suite), std::move(item)}, tol(tol_) {}
    void add(double analytic, double numeric)
    {
        const double e = relative_error(analytic, numeric);
        ++r.checks;
        r.max_rel_error = std::max(r.max_rel_error, e);
        if (!(e < tol)) r.passed = false;
    }
};

// Reference forward passes in extended precision. They are written from the
// definitions, not from the production code paths, so a finite difference
// built on them checks the analytic gradients against a separate route and
// stays clear of double rounding noise on small components.
using real = long double;
using RealVec = std::vector<real>;

RealVec widen(std::span<const double> x) { return RealVec(x.begin(), x.end()); }

real ref_activation(const Activation& a, real z)
{
    const real c = a.c;
    switch (a.kind) {
    case ActivationKind::linear: return z;
    case ActivationKind::tanh: return std::tanh(z);
    case ActivationKind::relu: return z > 0 ? z : 0;
    case ActivationKind::penalty_ineq: return z > 0 ? c * z : 0;
    case ActivationKind::penalty_eq: return c * std::fabs(z);
    }
    return z;
}

// One parameter of layer `layer` replaced by `value` (extended precision).
struct ParamOverride {
    std::size_t layer = static_cast<std::size_t>(-1);
    std::size_t local = 0;
    real value = 0;
};

RealVec ref_network(const Network& net, RealVec a, const ParamOverride& ov = {})
{
    for (std::size_t l = 0; l < net.layer_count(); ++l) {
        const Layer& layer = net.layer(l);
        auto param = [&](std::size_t idx) -> real {
            return l == ov.layer && idx == ov.local ? ov.value : static_cast<real>(layer.parameters()[idx]);
        };
        RealVec next(layer.out_dim());
        for (std::size_t o = 0; o < layer.out_dim(); ++o) {
            real z = param(layer.bias_index(o));
            for (std::size_t i = 0; i < layer.in_dim(); ++i) z += param(layer.weight_index(o, i)) * a[i];
            next[o] = ref_activation(layer.activation(o), z);
        }
        a = std::move(next);
    }
    return a;
}

real ref_surrogate(const SurrogateModel& m, const RealVec& x)
{
    RealVec u(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        u[i] = (x[i] - static_cast<real>(m.in_shift[i])) * static_cast<real>(m.in_scale[i]);
    }
    return ref_network(m.net, u)[0] * static_cast<real>(m.out_scale) + static_cast<real>(m.out_shift);
}

real ref_expression(const ScalarField& f, const RealVec& x)
{
    const auto* e = dynamic_cast<const Expression*>(&f);
    if (!e) throw Error("gradcheck: no reference evaluator for '" + f.describe() + "'");
    std::vector<real> s;
    for (const auto& in : e->tape()) {
        using Op = Expression::Op;
        if (in.op == Op::constant) { s.push_back(in.constant); continue; }
        if (in.op == Op::variable) { s.push_back(x[in.operand]); continue; }
        real& top = s.back();
        if (in.op == Op::neg) { top = -top; continue; }
        if (in.op == Op::sin) { top = std::sin(top); continue; }
        if (in.op == Op::cos) { top = std::cos(top); continue; }
        const real b = s.back();
        s.pop_back();
        real& a = s.back();
        switch (in.op) {
        case Op::add: a += b; break;
        case Op::sub: a -= b; break;
        case Op::mul: a *= b; break;
        case Op::div: a /= b; break;
        default: a = std::pow(a, b); break;
        }
    }
    return s.back();
}

// (f(x + h e_i) - f(x - h e_i)) / 2h with f taking a long double vector.
template <class F>
double ref_difference(F&& f, std::span<const double> x, std::size_t i, double h)
{
    RealVec xp = widen(x), xm = widen(x);
    xp[i] += h;
    xm[i] -= h;
    return static_cast<double>((f(xp) - f(xm)) / (2 * static_cast<real>(h)));
}

bool near_kink(const Network& net, std::span<const double> x)
{
    const auto t = net.trace(x);
    for (std::size_t l = 0; l < net.layer_count(); ++l) {
        for (std::size_t o = 0; o < net.layer(l).out_dim(); ++o) {
            if (kinked(net.layer(l).activation(o).kind) && std::abs(t.z[l][o]) < kink_margin) return true;
        }
    }
    return false;
}

std::vector<double> random_point(Rng& rng, std::size_t d, double lo, double hi)
{
    std::vector<double> x(d);
    for (auto& v : x) v = rng.uniform(lo, hi);
    return x;
}

std::vector<GradCheckResult> check_activations(const GradCheckOptions& o)
{
    Rng rng(Rng::derive(o.seed, 1));
    std::vector<GradCheckResult> out;
    for (ActivationKind kind : all_kinds) {
        Tally t("activations", std::string(to_string(kind)), o.tolerance);
        for (std::size_t i = 0; i < o.count; ++i) {
            const Activation a = random_activation(rng, kind);
            double z = rng.uniform(-3.0, 3.0);
            if (std::abs(z) < kink_margin) z += z < 0 ? -kink_margin : kink_margin;
            const double zs[1] = {z};
            const double fd = ref_difference([&](const RealVec& v) { return ref_activation(a, v[0]); }, zs, 0, o.step);
            t.add(activation_eval(a, z).derivative, fd);
        }
        out.push_back(t.r);
    }
    return out;
}

std::vector<GradCheckResult> check_networks(const GradCheckOptions& o)
{
    Rng rng(Rng::derive(o.seed, 2));
    std::vector<Tally> tallies;
    for (ActivationKind kind : all_kinds) tallies.emplace_back("network", std::string(to_string(kind)), o.tolerance);
    for (std::size_t n = 0; n < o.count; ++n) {
        const std::size_t k = n % std::size(all_kinds);
        Network net = random_network(rng, all_kinds[k]);
        std::vector<double> x = random_point(rng, net.input_dim(), -1.0, 1.0);
        for (int tries = 0; near_kink(net, x); ++tries) {
            if (tries == 100) {
                net = random_network(rng, all_kinds[k]);
                tries = 0;
            }
            x = random_point(rng, net.input_dim(), -1.0, 1.0);
        }
        const Gradient g = backprop(net, x);
        auto f_of_x = [&](const RealVec& xs) { return ref_network(net, xs)[0]; };
        for (std::size_t i = 0; i < x.size(); ++i) {
            tallies[k].add(g.input[i], ref_difference(f_of_x, x, i, o.step));
        }
        const RealVec xr = widen(x);
        for (std::size_t j = 0; j < g.parameter_index.size(); ++j) {
            const auto [l, local] = net.locate(g.parameter_index[j]);
            const double p0[1] = {net.layer(l).parameters()[local]};
            auto f_of_p = [&](const RealVec& ps) { return ref_network(net, xr, {l, local, ps[0]})[0]; };
            tallies[k].add(g.parameters[j], ref_difference(f_of_p, p0, 0, o.step));
        }
    }
    std::vector<GradCheckResult> out;
    for (auto& t : tallies) out.push_back(t.r);
    return out;
}

std::vector<GradCheckResult> check_expressions(const GradCheckOptions& o)
{
    Rng rng(Rng::derive(o.seed, 3));
    std::vector<GradCheckResult> out;
    for (const std::string& name : problem_names()) {
        const ProblemSpec p = get_problem(name);
        std::vector<FieldPtr> fields = p.objectives;
        for (const auto& c : p.constraints) fields.push_back(c.expr);
        Tally t("expression", name, o.tolerance);
        std::vector<double> grad(p.dim);
        for (std::size_t n = 0; n < o.count; ++n) {
            std::vector<double> x(p.dim);
            for (std::size_t i = 0; i < p.dim; ++i) x[i] = rng.uniform(p.box.lo[i], p.box.hi[i]);
            for (const auto& f : fields) {
                f->value_and_gradient(x, grad);
                auto fx = [&](const RealVec& xs) { return ref_expression(*f, xs); };
                for (std::size_t i = 0; i < p.dim; ++i) t.add(grad[i], ref_difference(fx, x, i, o.step));
            }
        }
        out.push_back(t.r);
    }
    return out;
}

SurrogateModel random_surrogate(Rng& rng, std::size_t dim, const Box& box)
{
    const std::size_t widths[] = {dim, 8, 1};
    SurrogateModel m = wrap_network(Network::mlp(widths, Activation::tanh(), Activation::linear(), rng), box);
    for (std::size_t i = 0; i < dim; ++i) {
        m.in_scale[i] = rng.uniform(0.2, 3.0);
        m.in_shift[i] = rng.uniform(-1.0, 1.0);
    }
    m.out_scale = rng.uniform(0.5, 5.0);
    m.out_shift = rng.uniform(-3.0, 3.0);
    return m;
}

std::vector<GradCheckResult> check_surrogates(const GradCheckOptions& o)
{
    Rng rng(Rng::derive(o.seed, 4));
    Tally t("surrogate", "normalized", o.tolerance);
    for (std::size_t n = 0; n < o.count; ++n) {
        const std::size_t dim = 1 + rng.index(4);
        const Box box(std::vector<double>(dim, -2.0), std::vector<double>(dim, 2.0));
        const SurrogateModel m = random_surrogate(rng, dim, box);
        const auto x = random_point(rng, dim, -2.0, 2.0);
        std::vector<double> grad(dim);
        m.value_and_gradient(x, grad);
        auto fx = [&](const RealVec& xs) { return ref_surrogate(m, xs); };
        for (std::size_t i = 0; i < dim; ++i) t.add(grad[i], ref_difference(fx, x, i, o.step));
    }
    return {t.r};
}

std::vector<GradCheckResult> check_nom(const GradCheckOptions& o)
{
    Rng rng(Rng::derive(o.seed, 5));
    Tally params("nom", "parameters", o.tolerance);
    Tally route("nom", "chain-rule", o.tolerance);
    const Box box({-2.0, -2.0}, {2.0, 2.0});
    // Box bounds spelled as expressions so the reference evaluator covers them.
    const std::vector<ConstraintSpec> cons = {
        inequality(make_expression("x1^2 + x2^2 - 1", 2), "disc"),
        equality(make_expression("x1 - 0.5*x2", 2), "line"),
        inequality(make_expression("-2 - x1", 2)),
        inequality(make_expression("x1 - 2", 2)),
        inequality(make_expression("-2 - x2", 2)),
        inequality(make_expression("x2 - 2", 2)),
    };
    for (std::size_t n = 0; n < o.count; ++n) {
        auto m = std::make_shared<const SurrogateModel>(random_surrogate(rng, 2, box));
        const double c = rng.uniform(1.0, 10.0);
        NomGraph g = build_nom(m, cons, c);
        const auto x0 = random_point(rng, 2, -1.5, 1.5);
        for (std::size_t i = 0; i < 2; ++i) {
            g.start_layer().set_weight(i, i, rng.uniform(0.5, 1.5));
            g.start_layer().set_bias(i, rng.uniform(-0.5, 0.5));
        }
        const auto x = g.position(x0);
        const bool kink = std::any_of(cons.begin(), cons.end(), [&](const ConstraintSpec& k) {
            return std::abs(k.expr->value(x)) < kink_margin;
        });
        if (kink) continue;

        const auto t = g.trace(x0);
        std::vector<double> pg(g.parameter_count(), 0.0);
        const double up[1] = {1.0};
        g.backward(t, up, pg, {});

        // Loss as a function of the start layer's parameters, from scratch.
        const Layer& start = g.start_layer();
        auto loss = [&](std::size_t j, real pj) {
            auto param = [&](std::size_t idx) -> real {
                return idx == j ? pj : static_cast<real>(start.parameters()[idx]);
            };
            RealVec xr(2);
            for (std::size_t i = 0; i < 2; ++i) {
                xr[i] = param(start.weight_index(i, i)) * static_cast<real>(x0[i]) + param(start.bias_index(i));
            }
            real out = ref_surrogate(*m, xr);
            for (const auto& k : cons) {
                const real h = ref_expression(*k.expr, xr);
                out += k.kind == ConstraintKind::inequality ? (h > 0 ? c * h : 0) : c * std::fabs(h);
            }
            return out;
        };
        for (std::size_t j = 0; j < pg.size(); ++j) {
            if (!g.is_trainable(j)) continue;
            const double pj[1] = {start.parameters()[j]};
            params.add(pg[j], ref_difference([&](const RealVec& v) { return loss(j, v[0]); }, pj, 0, o.step));
        }

        // dL/dx assembled here from the surrogate and constraint gradients,
        // then pushed through x = w * x0 + b by hand.
        std::vector<double> dx(2), gk(2);
        m->value_and_gradient(x, dx);
        for (const auto& k : cons) {
            const double h = k.expr->value_and_gradient(x, gk);
            const double slope = k.kind == ConstraintKind::inequality ? (h > 0 ? c : 0.0) : (h > 0 ? c : -c);
            for (std::size_t i = 0; i < 2; ++i) dx[i] += slope * gk[i];
        }
        for (std::size_t i = 0; i < 2; ++i) {
            route.add(pg[start.weight_index(i, i)], dx[i] * x0[i]);
            route.add(pg[start.bias_index(i)], dx[i]);
        }
    }
    return {params.r, route.r};
}

} // namespace

double relative_error(double analytic, double numeric)
{
    return std::abs(analytic - numeric) / (std::abs(numeric) + 1e-12);
}

Network random_network(Rng& rng, ActivationKind hidden)
{
    std::vector<std::size_t> widths{1 + rng.index(4)};
    const std::size_t depth = 1 + rng.index(2);
    for (std::size_t i = 0; i < depth; ++i) widths.push_back(2 + rng.index(5));
    widths.push_back(1);
    Network net = Network::mlp(widths, random_activation(rng, hidden), Activation::linear(), rng);
    for (std::size_t l = 0; l < net.layer_count(); ++l) {
        Layer& layer = net.layer(l);
        for (std::size_t b = 0; b < layer.out_dim(); ++b) layer.set_bias(b, rng.uniform(-0.5, 0.5));
        if (l + 1 < net.layer_count()) {
            for (std::size_t o = 0; o < layer.out_dim(); ++o) layer.set_activation(o, random_activation(rng, hidden));
        }
    }
    return net;
}

std::vector<std::string> gradcheck_suites()
{
    return {"activations", "network", "expression", "surrogate", "nom"};
}

std::vector<GradCheckResult> run_gradcheck(std::span<const std::string> suites, const GradCheckOptions& opts)
{
    if (suites.empty()) throw Error("gradcheck: no suites selected");
    const auto known = gradcheck_suites();
    for (const auto& s : suites) {
        if (std::find(known.begin(), known.end(), s) == known.end()) {
            throw Error("gradcheck: unknown suite '" + s + "'");
        }
    }
    std::vector<GradCheckResult> out;
    auto append = [&](std::vector<GradCheckResult> r) { out.insert(out.end(), r.begin(), r.end()); };
    for (const auto& s : suites) {
        if (s == "activations") append(check_activations(opts));
        else if (s == "network") append(check_networks(opts));
        else if (s == "expression") append(check_expressions(opts));
        else if (s == "surrogate") append(check_surrogates(opts));
        else append(check_nom(opts));
    }
    return out;
}

} // namespace nom
