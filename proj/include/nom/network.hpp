#pragma once

#include "nom/activation.hpp"
#include "nom/rng.hpp"

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace nom {

enum class Connectivity { dense, diagonal };

/// One affine map followed by per-neuron activations.
///
/// Parameters are stored flat: the out_dim x in_dim weight matrix in
/// row-major order, followed by out_dim biases. A diagonal layer keeps the
/// full matrix so indices line up with a dense layer of the same shape, but
/// its off-diagonal weights are zero and can never be made trainable.
class Layer {
public:
    static Layer dense(std::size_t in_dim, std::size_t out_dim, Activation activation);
    static Layer diagonal(std::size_t dim, Activation activation);

    std::size_t in_dim() const { return in_dim_; }
    std::size_t out_dim() const { return out_dim_; }
    Connectivity connectivity() const { return connectivity_; }

    std::size_t parameter_count() const { return params_.size(); }
    std::size_t weight_index(std::size_t out, std::size_t in) const { return out * in_dim_ + in; }
    std::size_t bias_index(std::size_t out) const { return out_dim_ * in_dim_ + out; }

    double weight(std::size_t out, std::size_t in) const { return params_[weight_index(out, in)]; }
    double bias(std::size_t out) const { return params_[bias_index(out)]; }
    void set_weight(std::size_t out, std::size_t in, double value);
    void set_bias(std::size_t out, double value) { params_[bias_index(out)] = value; }

    std::span<const double> parameters() const { return params_; }
    std::span<double> parameters() { return params_; }

    bool is_trainable(std::size_t index) const { return trainable_[index] != 0; }
    bool any_trainable() const;
    /// Marks a parameter trainable or frozen. Off-diagonal weights of a
    /// diagonal layer stay frozen; requesting otherwise throws.
    void set_trainable(std::size_t index, bool trainable);
    void set_all_trainable(bool trainable);
    std::span<const std::uint8_t> trainable_mask() const { return trainable_; }

    const Activation& activation(std::size_t out) const { return activations_[out]; }
    void set_activation(std::size_t out, Activation a) { activations_[out] = a; }
    std::span<const Activation> activations() const { return activations_; }

    /// Glorot-uniform weights on [-r, r], r = sqrt(6 / (in + out)); zero biases.
    void initialize(Rng& rng);

    /// z = W a + b.
    void affine(std::span<const double> in, std::span<double> z) const;

    /// Raw constructor used by deserialization; validates invariants.
    Layer(std::size_t in_dim, std::size_t out_dim, Connectivity connectivity,
          std::vector<double> params, std::vector<std::uint8_t> trainable,
          std::vector<Activation> activations);

    friend bool operator==(const Layer&, const Layer&) = default;

private:
    Layer() = default;
    bool is_off_diagonal(std::size_t index) const;

    std::size_t in_dim_ = 0;
    std::size_t out_dim_ = 0;
    Connectivity connectivity_ = Connectivity::dense;
    std::vector<double> params_;
    std::vector<std::uint8_t> trainable_;
    std::vector<Activation> activations_;
};

/// Layered feedforward network. Evaluation is pure; training works on a copy.
class Network {
public:
    /// Pre-activations and activations of every layer for one input.
    /// a[0] is the input itself; a[l + 1] = G(z[l]).
    struct Trace {
        std::vector<std::vector<double>> z;
        std::vector<std::vector<double>> a;
        std::vector<std::vector<double>> slope; ///< dG/dz at z[l]
        std::span<const double> output() const { return a.back(); }
    };

    Network() = default;
    /// Throws Error unless adjacent layer dimensions compose.
    explicit Network(std::vector<Layer> layers);

    /// Fully connected network with the given layer widths, Glorot-initialized.
    /// `hidden` applies to every hidden layer, `output` to the last one.
    static Network mlp(std::span<const std::size_t> widths, Activation hidden, Activation output,
                       Rng& rng);

    /// Network that applies `first` and then `second`.
    static Network concat(const Network& first, const Network& second);

    std::size_t input_dim() const;
    std::size_t output_dim() const;
    std::size_t layer_count() const { return layers_.size(); }
    const Layer& layer(std::size_t i) const { return layers_[i]; }
    Layer& layer(std::size_t i) { return layers_[i]; }
    std::span<const Layer> layers() const { return layers_; }

    std::size_t parameter_count() const;
    /// Layer and local index of flat parameter `index`.
    std::pair<std::size_t, std::size_t> locate(std::size_t index) const;
    bool is_trainable(std::size_t index) const;
    void set_all_trainable(bool trainable);
    /// Flat copy of every parameter, layer by layer.
    std::vector<double> flat_parameters() const;

    std::vector<double> forward(std::span<const double> x) const;
    void trace_into(std::span<const double> x, Trace& trace) const;
    Trace trace(std::span<const double> x) const;

    /// Accumulates d(upstream . output)/d(parameter) into `param_grad`
    /// (dense, parameter_count entries; skipped if empty) and writes
    /// d(upstream . output)/dx into `input_grad` (skipped if empty).
    /// Parameters of fully frozen layers are not visited.
    void backward(const Trace& trace, std::span<const double> upstream,
                  std::span<double> param_grad, std::span<double> input_grad) const;

    /// Subtracts `step[i]` from every trainable parameter i; frozen ones are untouched.
    void apply_step(std::span<const double> step);

    friend bool operator==(const Network&, const Network&) = default;

private:
    std::vector<Layer> layers_;
};

std::vector<double> forward(const Network& net, std::span<const double> x);

/// Gradient of a scalar network output.
struct Gradient {
    /// Flat indices of the trainable parameters, ascending.
    std::vector<std::size_t> parameter_index;
    /// d output / d parameter, aligned with parameter_index.
    std::vector<double> parameters;
    /// d output / d x.
    std::vector<double> input;
};

/// Reverse-mode gradient of `upstream * net(x)` for a network with a single
/// output. Frozen parameters get no entry. Throws NumericalError naming the
/// layer when an intermediate is non-finite.
Gradient backprop(const Network& net, std::span<const double> x, double upstream = 1.0);

} // namespace nom
