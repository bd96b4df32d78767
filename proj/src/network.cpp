#include "nom/network.hpp"

#include "nom/error.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace nom {

// ---------------------------------------------------------------- Layer

Layer Layer::dense(std::size_t in_dim, std::size_t out_dim, Activation activation)
{
    if (in_dim == 0 || out_dim == 0) throw Error("layer: dimensions must be positive");
    Layer l;
    l.in_dim_ = in_dim;
    l.out_dim_ = out_dim;
    l.connectivity_ = Connectivity::dense;
    l.params_.assign(out_dim * in_dim + out_dim, 0.0);
    l.trainable_.assign(l.params_.size(), 1);
    l.activations_.assign(out_dim, activation);
    return l;
}

Layer Layer::diagonal(std::size_t dim, Activation activation)
{
    Layer l = dense(dim, dim, activation);
    l.connectivity_ = Connectivity::diagonal;
    for (std::size_t i = 0; i < l.params_.size(); ++i) {
        if (l.is_off_diagonal(i)) l.trainable_[i] = 0;
    }
    for (std::size_t k = 0; k < dim; ++k) l.params_[l.weight_index(k, k)] = 1.0;
    return l;
}

Layer::Layer(std::size_t in_dim, std::size_t out_dim, Connectivity connectivity,
             std::vector<double> params, std::vector<std::uint8_t> trainable,
             std::vector<Activation> activations)
    : in_dim_(in_dim), out_dim_(out_dim), connectivity_(connectivity), params_(std::move(params)),
      trainable_(std::move(trainable)), activations_(std::move(activations))
{
    if (in_dim_ == 0 || out_dim_ == 0) throw Error("layer: dimensions must be positive");
    const std::size_t n = out_dim_ * in_dim_ + out_dim_;
    if (params_.size() != n || trainable_.size() != n || activations_.size() != out_dim_) {
        throw Error("layer: parameter, flag or activation count does not match shape");
    }
    if (connectivity_ == Connectivity::diagonal) {
        if (in_dim_ != out_dim_) throw Error("layer: diagonal layer must be square");
        for (std::size_t i = 0; i < n; ++i) {
            if (is_off_diagonal(i) && (params_[i] != 0.0 || trainable_[i] != 0)) {
                throw Error("layer: diagonal layer has a non-zero or trainable off-diagonal weight");
            }
        }
    }
}

bool Layer::is_off_diagonal(std::size_t index) const
{
    if (connectivity_ != Connectivity::diagonal || index >= out_dim_ * in_dim_) return false;
    return index / in_dim_ != index % in_dim_;
}

void Layer::set_weight(std::size_t out, std::size_t in, double value)
{
    const std::size_t i = weight_index(out, in);
    if (is_off_diagonal(i) && value != 0.0) {
        throw Error("layer: off-diagonal weight of a diagonal layer must stay zero");
    }
    params_[i] = value;
}

bool Layer::any_trainable() const
{
    return std::any_of(trainable_.begin(), trainable_.end(), [](std::uint8_t t) { return t != 0; });
}

void Layer::set_trainable(std::size_t index, bool trainable)
{
    if (trainable && is_off_diagonal(index)) {
        throw Error("layer: off-diagonal weight of a diagonal layer cannot be trainable");
    }
    trainable_[index] = trainable ? 1 : 0;
}

void Layer::set_all_trainable(bool trainable)
{
    for (std::size_t i = 0; i < trainable_.size(); ++i) {
        trainable_[i] = (trainable && !is_off_diagonal(i)) ? 1 : 0;
    }
}

void Layer::initialize(Rng& rng)
{
    const double r = std::sqrt(6.0 / static_cast<double>(in_dim_ + out_dim_));
    for (std::size_t o = 0; o < out_dim_; ++o) {
        for (std::size_t i = 0; i < in_dim_; ++i) {
            const std::size_t k = weight_index(o, i);
            if (!is_off_diagonal(k)) params_[k] = rng.uniform(-r, r);
        }
        params_[bias_index(o)] = 0.0;
    }
}

void Layer::affine(std::span<const double> in, std::span<double> z) const
{
    const double* w = params_.data();
    const double* b = params_.data() + out_dim_ * in_dim_;
    if (connectivity_ == Connectivity::diagonal) {
        for (std::size_t k = 0; k < out_dim_; ++k) z[k] = b[k] + w[k * in_dim_ + k] * in[k];
        return;
    }
    for (std::size_t o = 0; o < out_dim_; ++o) {
        const double* row = w + o * in_dim_;
        double acc = b[o];
        for (std::size_t i = 0; i < in_dim_; ++i) acc += row[i] * in[i];
        z[o] = acc;
    }
}

// ---------------------------------------------------------------- Network

Network::Network(std::vector<Layer> layers) : layers_(std::move(layers))
{
    if (layers_.empty()) throw Error("network: needs at least one layer");
    for (std::size_t i = 0; i + 1 < layers_.size(); ++i) {
        if (layers_[i].out_dim() != layers_[i + 1].in_dim()) {
            throw Error("network: layer " + std::to_string(i) + " output (" +
                        std::to_string(layers_[i].out_dim()) + ") does not feed layer " +
                        std::to_string(i + 1) + " input (" +
                        std::to_string(layers_[i + 1].in_dim()) + ")");
        }
    }
}

Network Network::mlp(std::span<const std::size_t> widths, Activation hidden, Activation output,
                     Rng& rng)
{
    if (widths.size() < 2) throw Error("network: mlp needs at least input and output widths");
    std::vector<Layer> layers;
    for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
        const bool last = i + 2 == widths.size();
        Layer l = Layer::dense(widths[i], widths[i + 1], last ? output : hidden);
        l.initialize(rng);
        layers.push_back(std::move(l));
    }
    return Network(std::move(layers));
}

Network Network::concat(const Network& first, const Network& second)
{
    std::vector<Layer> layers(first.layers_.begin(), first.layers_.end());
    layers.insert(layers.end(), second.layers_.begin(), second.layers_.end());
    return Network(std::move(layers));
}

std::size_t Network::input_dim() const { return layers_.empty() ? 0 : layers_.front().in_dim(); }
std::size_t Network::output_dim() const { return layers_.empty() ? 0 : layers_.back().out_dim(); }

std::size_t Network::parameter_count() const
{
    std::size_t n = 0;
    for (const auto& l : layers_) n += l.parameter_count();
    return n;
}

std::pair<std::size_t, std::size_t> Network::locate(std::size_t index) const
{
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        if (index < layers_[l].parameter_count()) return {l, index};
        index -= layers_[l].parameter_count();
    }
    throw Error("network: parameter index out of range");
}

bool Network::is_trainable(std::size_t index) const
{
    const auto [l, i] = locate(index);
    return layers_[l].is_trainable(i);
}

void Network::set_all_trainable(bool trainable)
{
    for (auto& l : layers_) l.set_all_trainable(trainable);
}

std::vector<double> Network::flat_parameters() const
{
    std::vector<double> out;
    out.reserve(parameter_count());
    for (const auto& l : layers_) out.insert(out.end(), l.parameters().begin(), l.parameters().end());
    return out;
}

void Network::trace_into(std::span<const double> x, Trace& trace) const
{
    if (x.size() != input_dim()) {
        throw Error("network: input has " + std::to_string(x.size()) + " entries, expected " +
                    std::to_string(input_dim()));
    }
    const std::size_t n_layers = layers_.size();
    trace.z.resize(n_layers);
    trace.a.resize(n_layers + 1);
    trace.slope.resize(n_layers);
    trace.a[0].assign(x.begin(), x.end());
    for (std::size_t l = 0; l < n_layers; ++l) {
        const Layer& layer = layers_[l];
        auto& z = trace.z[l];
        auto& a = trace.a[l + 1];
        auto& s = trace.slope[l];
        z.resize(layer.out_dim());
        a.resize(layer.out_dim());
        s.resize(layer.out_dim());
        layer.affine(trace.a[l], z);
        for (std::size_t o = 0; o < layer.out_dim(); ++o) {
            if (!std::isfinite(z[o])) {
                throw NumericalError("network: non-finite pre-activation in layer " +
                                     std::to_string(l));
            }
            const auto g = activation_eval(layer.activation(o), z[o]);
            a[o] = g.value;
            s[o] = g.derivative;
        }
    }
}

Network::Trace Network::trace(std::span<const double> x) const
{
    Trace t;
    trace_into(x, t);
    return t;
}

std::vector<double> Network::forward(std::span<const double> x) const
{
    const Trace t = trace(x);
    return t.a.back();
}

void Network::backward(const Trace& trace, std::span<const double> upstream,
                       std::span<double> param_grad, std::span<double> input_grad) const
{
    if (upstream.size() != output_dim()) throw Error("network: upstream size mismatch");

    std::size_t offset = parameter_count();
    // delta = d loss / d z for the current layer.
    std::vector<double> delta(upstream.begin(), upstream.end());
    std::vector<double> prev;
    for (std::size_t l = layers_.size(); l-- > 0;) {
        const Layer& layer = layers_[l];
        const std::size_t in = layer.in_dim();
        const std::size_t out = layer.out_dim();
        offset -= layer.parameter_count();

        for (std::size_t o = 0; o < out; ++o) {
            delta[o] *= trace.slope[l][o];
            if (!std::isfinite(delta[o])) {
                throw NumericalError("network: non-finite gradient in layer " + std::to_string(l));
            }
        }

        const auto& a_in = trace.a[l];
        if (!param_grad.empty() && layer.any_trainable()) {
            double* g = param_grad.data() + offset;
            if (layer.connectivity() == Connectivity::diagonal) {
                for (std::size_t k = 0; k < out; ++k) g[layer.weight_index(k, k)] += delta[k] * a_in[k];
            } else {
                for (std::size_t o = 0; o < out; ++o) {
                    double* row = g + o * in;
                    for (std::size_t i = 0; i < in; ++i) row[i] += delta[o] * a_in[i];
                }
            }
            for (std::size_t o = 0; o < out; ++o) g[layer.bias_index(o)] += delta[o];
        }

        if (l == 0 && input_grad.empty()) break;
        prev.assign(in, 0.0);
        if (layer.connectivity() == Connectivity::diagonal) {
            for (std::size_t k = 0; k < out; ++k) prev[k] = layer.weight(k, k) * delta[k];
        } else {
            for (std::size_t o = 0; o < out; ++o) {
                const double d = delta[o];
                for (std::size_t i = 0; i < in; ++i) prev[i] += layer.weight(o, i) * d;
            }
        }
        delta.swap(prev);
    }

    if (!input_grad.empty()) {
        if (input_grad.size() != input_dim()) throw Error("network: input gradient size mismatch");
        std::copy(delta.begin(), delta.end(), input_grad.begin());
    }
}

void Network::apply_step(std::span<const double> step)
{
    std::size_t offset = 0;
    for (auto& layer : layers_) {
        auto p = layer.parameters();
        for (std::size_t i = 0; i < p.size(); ++i) {
            if (layer.is_trainable(i)) p[i] -= step[offset + i];
        }
        offset += p.size();
    }
}

std::vector<double> forward(const Network& net, std::span<const double> x)
{
    for (double v : x) {
        if (!std::isfinite(v)) throw NumericalError("forward: non-finite input");
    }
    return net.forward(x);
}

Gradient backprop(const Network& net, std::span<const double> x, double upstream)
{
    if (net.output_dim() != 1) throw Error("backprop: network output must be scalar");
    const auto trace = net.trace(x);
    std::vector<double> dense(net.parameter_count(), 0.0);
    Gradient g;
    g.input.assign(net.input_dim(), 0.0);
    const double up[1] = {upstream};
    net.backward(trace, up, dense, g.input);
    for (std::size_t i = 0; i < dense.size(); ++i) {
        if (net.is_trainable(i)) {
            g.parameter_index.push_back(i);
            g.parameters.push_back(dense[i]);
        }
    }
    return g;
}

} // namespace nom
