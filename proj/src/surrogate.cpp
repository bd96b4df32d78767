#include "nom/surrogate.hpp"

#include "nom/error.hpp"
#include "nom/kernels.hpp"
#include "nom/serialize.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

namespace nom {

Samples lattice(const Box& box, std::size_t per_dim)
{
    box.validate();
    if (per_dim < 2) throw Error("lattice: need at least 2 points per dimension");
    const std::size_t d = box.dim();
    std::size_t total = 1;
    for (std::size_t i = 0; i < d; ++i) total *= per_dim;

    Samples out(d, total);
    std::vector<std::size_t> idx(d, 0);
    for (std::size_t r = 0; r < total; ++r) {
        auto row = out.row(r);
        for (std::size_t k = 0; k < d; ++k) {
            row[k] = idx[k] + 1 == per_dim
                         ? box.hi[k]
                         : box.lo[k] + box.width(k) * static_cast<double>(idx[k]) /
                                           static_cast<double>(per_dim - 1);
        }
        // First coordinate varies slowest.
        for (std::size_t k = d; k-- > 0;) {
            if (++idx[k] < per_dim) break;
            idx[k] = 0;
        }
    }
    return out;
}

Samples generate_grid(const Box& box, std::size_t n_total)
{
    box.validate();
    const std::size_t d = box.dim();
    if (d >= 63 || n_total < (std::size_t{1} << d)) {
        throw Error("generate_grid: need at least 2^dim points");
    }
    const auto per_dim = static_cast<std::size_t>(
        std::llround(std::pow(static_cast<double>(n_total), 1.0 / static_cast<double>(d))));
    return lattice(box, std::max<std::size_t>(per_dim, 2));
}

Samples midpoint_lattice(const Box& box, std::size_t per_dim)
{
    if (per_dim < 2) throw Error("midpoint_lattice: need at least 2 points per dimension");
    std::vector<double> lo(box.dim()), hi(box.dim());
    for (std::size_t k = 0; k < box.dim(); ++k) {
        const double half = 0.5 * box.width(k) / static_cast<double>(per_dim - 1);
        lo[k] = box.lo[k] + half;
        hi[k] = box.hi[k] - half;
    }
    if (per_dim == 2) {
        Samples s(box.dim());
        s.push_back(lo);
        return s;
    }
    return lattice(Box(lo, hi), per_dim - 1);
}

std::vector<double> SurrogateModel::normalize(std::span<const double> x) const
{
    std::vector<double> u(dim());
    for (std::size_t i = 0; i < dim(); ++i) u[i] = (x[i] - in_shift[i]) * in_scale[i];
    return u;
}

std::vector<double> SurrogateModel::denormalize(std::span<const double> u) const
{
    std::vector<double> x(dim());
    for (std::size_t i = 0; i < dim(); ++i) x[i] = u[i] / in_scale[i] + in_shift[i];
    return x;
}

double SurrogateModel::value(std::span<const double> x) const
{
    const auto y = net.forward(normalize(x));
    return y[0] * out_scale + out_shift;
}

double SurrogateModel::value_and_gradient(std::span<const double> x, std::span<double> grad) const
{
    const auto trace = net.trace(normalize(x));
    const double up[1] = {1.0};
    net.backward(trace, up, {}, grad);
    for (std::size_t i = 0; i < dim(); ++i) grad[i] *= out_scale * in_scale[i];
    return trace.output()[0] * out_scale + out_shift;
}

SurrogateValue surrogate_eval(const SurrogateModel& m, std::span<const double> x)
{
    if (x.size() != m.dim()) throw Error("surrogate_eval: dimension mismatch");
    for (double v : x) {
        if (!std::isfinite(v)) throw NumericalError("surrogate_eval: non-finite input");
    }
    return {m.value(x), !m.box.contains(x)};
}

SurrogateModel wrap_network(Network net, Box box)
{
    SurrogateModel m;
    const std::size_t d = net.input_dim();
    m.net = std::move(net);
    m.in_scale.assign(d, 1.0);
    m.in_shift.assign(d, 0.0);
    m.box = std::move(box);
    return m;
}

SurrogateFit fit_field(const ScalarField& objective, const Box& box, const FitOptions& options)
{
    if (options.train.epochs <= 0) throw Error("fit_surrogate: epochs must be positive");
    box.validate();
    const std::size_t d = box.dim();
    if (objective.dim() != d) throw Error("fit_surrogate: objective and box dimensions differ");

    const Samples grid = generate_grid(box, options.grid_n);
    const std::vector<double> targets = kernels::eval_field(objective, grid);
    for (double t : targets) {
        if (!std::isfinite(t)) throw NumericalError("fit_surrogate: objective not finite on the grid");
    }

    SurrogateModel m;
    m.box = box;
    m.in_scale.resize(d);
    m.in_shift.resize(d);
    for (std::size_t k = 0; k < d; ++k) {
        m.in_shift[k] = 0.5 * (box.lo[k] + box.hi[k]);
        m.in_scale[k] = 2.0 / box.width(k);
    }
    double mean = 0.0;
    for (double t : targets) mean += t;
    mean /= static_cast<double>(targets.size());
    double var = 0.0;
    for (double t : targets) var += (t - mean) * (t - mean);
    const double sd = std::sqrt(var / static_cast<double>(targets.size()));
    m.out_shift = mean;
    // A (near-)constant objective keeps a tiny scale, so the residual the
    // network leaves around its zero target stays negligible in raw units.
    m.out_scale = std::max(sd, 1e-9 * std::max(1.0, std::abs(mean)));

    Dataset data{Samples(d), Samples(1)};
    data.inputs.values.reserve(grid.values.size());
    for (std::size_t r = 0; r < grid.size(); ++r) {
        const auto u = m.normalize(grid.row(r));
        data.inputs.push_back(u);
        const double z = (targets[r] - m.out_shift) / m.out_scale;
        data.targets.push_back(std::span<const double>(&z, 1));
    }

    Rng init(Rng::derive(options.train.seed, 0x5eed));
    const std::size_t widths[] = {d, options.hidden, 1};
    Network net = Network::mlp(widths, Activation::tanh(), Activation::linear(), init);
    auto trained = train(std::move(net), data, options.train, LossKind::mse);
    m.net = std::move(trained.model);

    SurrogateFit fit{std::move(m), {}};
    FitReport& rep = fit.report;
    rep.epochs_run = options.train.epochs;
    rep.seed = options.train.seed;
    rep.loss_history = std::move(trained.loss_history);
    rep.train_points = grid.size();

    const auto predicted = kernels::eval_surrogate(fit.model, grid);
    double sq = 0.0;
    for (std::size_t r = 0; r < grid.size(); ++r) sq += std::pow(predicted[r] - targets[r], 2);
    rep.train_rmse = std::sqrt(sq / static_cast<double>(grid.size()));

    const std::size_t per_dim = static_cast<std::size_t>(std::llround(
        std::pow(static_cast<double>(grid.size()), 1.0 / static_cast<double>(d))));
    const Samples holdout = midpoint_lattice(box, per_dim);
    const auto h_true = kernels::eval_field(objective, holdout);
    const auto h_pred = kernels::eval_surrogate(fit.model, holdout);
    sq = 0.0;
    for (std::size_t r = 0; r < holdout.size(); ++r) sq += std::pow(h_pred[r] - h_true[r], 2);
    rep.holdout_points = holdout.size();
    rep.holdout_rmse = std::sqrt(sq / static_cast<double>(holdout.size()));
    const auto [lo, hi] = std::minmax_element(targets.begin(), targets.end());
    const double range = *hi - *lo;
    rep.normalized_rmse = rep.holdout_rmse / (range > 0.0 ? range : 1.0);
    return fit;
}

SurrogateFit fit_surrogate(const ProblemSpec& problem, std::size_t objective_index,
                           const FitOptions& options)
{
    if (objective_index >= problem.objectives.size()) {
        throw Error("fit_surrogate: objective index out of range");
    }
    return fit_field(*problem.objectives[objective_index], problem.box, options);
}

namespace {
constexpr char surrogate_magic[8] = {'N', 'O', 'M', 'S', 'U', 'R', 'R', '\0'};
}

std::vector<std::uint8_t> save_surrogate(const SurrogateModel& m)
{
    ByteWriter w;
    for (char c : surrogate_magic) w.u8(static_cast<std::uint8_t>(c));
    w.u32(surrogate_format_version);
    w.u64(m.dim());
    for (double v : m.in_scale) w.f64(v);
    for (double v : m.in_shift) w.f64(v);
    w.f64(m.out_scale);
    w.f64(m.out_shift);
    for (double v : m.box.lo) w.f64(v);
    for (double v : m.box.hi) w.f64(v);
    const auto net = save(m.net);
    w.u64(net.size());
    w.raw(net);
    return w.take();
}

SurrogateModel load_surrogate(std::span<const std::uint8_t> bytes)
{
    ByteReader r(bytes);
    const auto magic = r.raw(sizeof surrogate_magic);
    if (std::memcmp(magic.data(), surrogate_magic, sizeof surrogate_magic) != 0) {
        throw FormatError("not a surrogate model file");
    }
    const std::uint32_t version = r.u32();
    if (version != surrogate_format_version) {
        throw FormatError("unsupported surrogate format version " + std::to_string(version));
    }
    const std::uint64_t d = r.u64();
    if (d == 0 || d > 4096) throw FormatError("invalid surrogate dimension");
    SurrogateModel m;
    m.in_scale.resize(d);
    m.in_shift.resize(d);
    for (auto& v : m.in_scale) v = r.f64();
    for (auto& v : m.in_shift) v = r.f64();
    m.out_scale = r.f64();
    m.out_shift = r.f64();
    std::vector<double> lo(d), hi(d);
    for (auto& v : lo) v = r.f64();
    for (auto& v : hi) v = r.f64();
    const std::uint64_t n = r.u64();
    m.net = load(r.raw(n));
    if (!r.done()) throw FormatError("trailing bytes after surrogate payload");
    for (std::size_t i = 0; i < d; ++i) {
        if (m.in_scale[i] == 0.0 || !std::isfinite(m.in_scale[i])) {
            throw FormatError("surrogate input scale must be finite and non-zero");
        }
    }
    if (m.out_scale == 0.0 || !std::isfinite(m.out_scale)) {
        throw FormatError("surrogate output scale must be finite and non-zero");
    }
    if (m.net.input_dim() != d || m.net.output_dim() != 1) {
        throw FormatError("surrogate network shape does not match its normalization record");
    }
    try {
        m.box = Box(std::move(lo), std::move(hi));
    } catch (const Error& e) {
        throw FormatError(e.what());
    }
    return m;
}

} // namespace nom
