#include "nom/expr.hpp"
#include "nom/kernels.hpp"
#include "nom/nom.hpp"
#include "nom/problems.hpp"
#include "nom/surrogate.hpp"

#include <benchmark/benchmark.h>

#include <cstdint>
#include <memory>
#include <vector>

using namespace nom;

namespace {

const SurrogateModel& model()
{
    static const SurrogateModel m = [] {
        Rng rng(1);
        const std::size_t widths[] = {2, 20, 1};
        return wrap_network(Network::mlp(widths, Activation::tanh(), Activation::linear(), rng),
                            Box({0.0, -1.0}, {1.5, 1.0}));
    }();
    return m;
}

Samples grid(std::int64_t n) { return generate_grid(Box({0.0, -1.0}, {1.5, 1.0}), static_cast<std::size_t>(n)); }

Samples cloud(std::int64_t n)
{
    Rng rng(2);
    Samples s(2);
    for (std::int64_t i = 0; i < n; ++i) {
        const double t = rng.uniform();
        s.push_back(std::vector<double>{t + 0.05 * rng.uniform(), 1.0 - t + 0.05 * rng.uniform()});
    }
    return s;
}

template <void (*Kernel)(const SurrogateModel&, const Samples&, std::span<double>)>
void surrogate_grid(benchmark::State& state)
{
    const Samples pts = grid(state.range(0));
    std::vector<double> out(pts.size());
    for (auto _ : state) {
        Kernel(model(), pts, out);
        benchmark::DoNotOptimize(out.data());
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(pts.size()));
}

template <void (*Kernel)(const ScalarField&, const Samples&, std::span<double>)>
void field_grid(benchmark::State& state)
{
    const auto f = get_problem("problem3").objectives[0];
    const Samples pts = generate_grid(get_problem("problem3").box, static_cast<std::size_t>(state.range(0)));
    std::vector<double> out(pts.size());
    for (auto _ : state) {
        Kernel(*f, pts, out);
        benchmark::DoNotOptimize(out.data());
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(pts.size()));
}

template <void (*Kernel)(const Samples&, std::span<std::uint8_t>)>
void dominance(benchmark::State& state)
{
    const Samples f = cloud(state.range(0));
    std::vector<std::uint8_t> out(f.size());
    for (auto _ : state) {
        Kernel(f, out);
        benchmark::DoNotOptimize(out.data());
    }
}

void restarts(benchmark::State& state)
{
    const ProblemSpec p = get_problem("problem2");
    FitOptions fo;
    fo.train.epochs = 20;
    static const auto m = std::make_shared<const SurrogateModel>(fit_surrogate(p, 0, fo).model);
    NomConfig cfg;
    cfg.parallel = state.range(0) != 0;
    cfg.n_starting_points = 8;
    for (auto _ : state) benchmark::DoNotOptimize(optimize(p, m, cfg).best.x.data());
}

} // namespace

BENCHMARK(surrogate_grid<kernels::serial::eval_surrogate>)->Name("eval_surrogate/serial")->Arg(10000)->Arg(250000);
BENCHMARK(surrogate_grid<kernels::parallel::eval_surrogate>)->Name("eval_surrogate/parallel")->Arg(10000)->Arg(250000)->UseRealTime();
BENCHMARK(field_grid<kernels::serial::eval_field>)->Name("eval_field/serial")->Arg(10000)->Arg(160000);
BENCHMARK(field_grid<kernels::parallel::eval_field>)->Name("eval_field/parallel")->Arg(10000)->Arg(160000)->UseRealTime();
BENCHMARK(dominance<kernels::serial::dominated_mask>)->Name("dominated_mask/serial")->Arg(2000)->Arg(8000);
BENCHMARK(dominance<kernels::parallel::dominated_mask>)->Name("dominated_mask/parallel")->Arg(2000)->Arg(8000)->UseRealTime();
BENCHMARK(restarts)->Name("optimize_restarts")->ArgName("parallel")->Arg(0)->Arg(1)->UseRealTime()->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
