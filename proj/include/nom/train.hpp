#pragma once

#include "nom/error.hpp"
#include "nom/rng.hpp"
#include "nom/samples.hpp"

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace nom {

enum class LossKind {
    mse,        ///< mean squared error against targets
    raw_output, ///< the (scalar) network output itself; no targets
};

enum class OptimizerKind { sgd, adam };

struct TrainConfig {
    int epochs = 500;
    std::size_t minibatch_size = 10;
    double learning_rate = 0.01;
    std::uint64_t seed = 0;
    OptimizerKind optimizer = OptimizerKind::sgd;
};

struct Dataset {
    Samples inputs;
    Samples targets; ///< empty for LossKind::raw_output
};

/// Anything the training loop can fit: a flat parameter vector with a
/// trainable mask, a reusable forward trace and a reverse pass.
template <class M>
concept TrainableModel = requires(M& m, const M& cm, std::span<const double> x,
                                  std::span<const double> upstream, std::span<double> grad,
                                  typename M::Trace& trace, std::size_t i) {
    { cm.parameter_count() } -> std::convertible_to<std::size_t>;
    { cm.input_dim() } -> std::convertible_to<std::size_t>;
    { cm.output_dim() } -> std::convertible_to<std::size_t>;
    { cm.is_trainable(i) } -> std::convertible_to<bool>;
    cm.trace_into(x, trace);
    { std::as_const(trace).output() } -> std::convertible_to<std::span<const double>>;
    cm.backward(std::as_const(trace), upstream, grad, grad);
    m.apply_step(upstream);
};

template <class M>
struct TrainResult {
    M model;
    std::vector<double> loss_history; ///< one entry per epoch
};

template <class M>
using EpochObserver = std::function<void(int epoch, double loss, const M& model)>;

namespace detail {

struct AdamState {
    std::vector<double> m, v;
    std::int64_t t = 0;
};

inline void validate(const TrainConfig& cfg, const Dataset& data, LossKind loss, std::size_t in_dim,
                     std::size_t out_dim)
{
    if (cfg.epochs < 0) throw Error("train: epochs must be non-negative");
    if (!(cfg.learning_rate > 0.0)) throw Error("train: learning rate must be positive");
    if (data.inputs.empty()) throw Error("train: empty dataset");
    if (data.inputs.dim != in_dim) throw Error("train: input dimension mismatch");
    if (cfg.minibatch_size == 0 || cfg.minibatch_size > data.inputs.size()) {
        throw Error("train: minibatch size must be in [1, dataset size]");
    }
    if (loss == LossKind::mse) {
        if (data.targets.size() != data.inputs.size() || data.targets.dim != out_dim) {
            throw Error("train: targets must match inputs for mse loss");
        }
    } else {
        if (!data.targets.empty()) throw Error("train: raw_output loss takes no targets");
        if (out_dim != 1) throw Error("train: raw_output loss needs a scalar output");
    }
}

} // namespace detail

/// Minibatch gradient descent on a private copy of `model`.
///
/// Each epoch reshuffles the sample order with a generator seeded from
/// cfg.seed, walks the data in minibatches (the last one may be short), and
/// updates only trainable parameters. The recorded epoch loss is the mean
/// per-sample loss evaluated before each minibatch's update. Throws
/// NumericalError naming the epoch if the loss becomes non-finite.
template <TrainableModel M>
TrainResult<M> train(M model, const Dataset& data, const TrainConfig& cfg, LossKind loss,
                     const EpochObserver<M>& observer = {})
{
    const std::size_t in_dim = model.input_dim();
    const std::size_t out_dim = model.output_dim();
    detail::validate(cfg, data, loss, in_dim, out_dim);

    const std::size_t n = data.inputs.size();
    const std::size_t n_params = model.parameter_count();
    Rng rng(cfg.seed);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});

    std::vector<double> grad(n_params, 0.0);
    std::vector<double> step(n_params, 0.0);
    std::vector<double> upstream(out_dim, 0.0);
    typename M::Trace trace;
    detail::AdamState adam;
    if (cfg.optimizer == OptimizerKind::adam) {
        adam.m.assign(n_params, 0.0);
        adam.v.assign(n_params, 0.0);
    }

    TrainResult<M> result{std::move(model), {}};
    M& net = result.model;
    result.loss_history.reserve(static_cast<std::size_t>(cfg.epochs));

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        rng.shuffle(std::span<std::size_t>(order));
        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < n; start += cfg.minibatch_size) {
            const std::size_t stop = std::min(n, start + cfg.minibatch_size);
            const double inv_batch = 1.0 / static_cast<double>(stop - start);
            std::fill(grad.begin(), grad.end(), 0.0);
            for (std::size_t k = start; k < stop; ++k) {
                const std::size_t s = order[k];
                net.trace_into(data.inputs.row(s), trace);
                const std::span<const double> y = trace.output();
                if (loss == LossKind::mse) {
                    const auto t = data.targets.row(s);
                    double sample_loss = 0.0;
                    for (std::size_t j = 0; j < out_dim; ++j) {
                        const double r = y[j] - t[j];
                        sample_loss += r * r;
                        upstream[j] = 2.0 * r * inv_batch / static_cast<double>(out_dim);
                    }
                    epoch_loss += sample_loss / static_cast<double>(out_dim);
                } else {
                    epoch_loss += y[0];
                    upstream[0] = inv_batch;
                }
                net.backward(trace, upstream, grad, {});
            }

            if (cfg.optimizer == OptimizerKind::sgd) {
                for (std::size_t i = 0; i < n_params; ++i) step[i] = cfg.learning_rate * grad[i];
            } else {
                constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-7;
                ++adam.t;
                const double c1 = 1.0 - std::pow(beta1, static_cast<double>(adam.t));
                const double c2 = 1.0 - std::pow(beta2, static_cast<double>(adam.t));
                for (std::size_t i = 0; i < n_params; ++i) {
                    adam.m[i] = beta1 * adam.m[i] + (1.0 - beta1) * grad[i];
                    adam.v[i] = beta2 * adam.v[i] + (1.0 - beta2) * grad[i] * grad[i];
                    step[i] = cfg.learning_rate * (adam.m[i] / c1) / (std::sqrt(adam.v[i] / c2) + eps);
                }
            }
            net.apply_step(step);
        }
        epoch_loss /= static_cast<double>(n);
        if (!std::isfinite(epoch_loss)) {
            throw NumericalError("train: non-finite loss at epoch " + std::to_string(epoch));
        }
        result.loss_history.push_back(epoch_loss);
        if (observer) observer(epoch, epoch_loss, net);
    }
    return result;
}

} // namespace nom
