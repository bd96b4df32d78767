#pragma once

#include "nom/field.hpp"
#include "nom/network.hpp"
#include "nom/problems.hpp"
#include "nom/samples.hpp"
#include "nom/train.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace nom {

/// Evenly spaced lattice over `box` with round(n_total^(1/dim)) points per
/// dimension, endpoints included. Rows are in lattice order with the first
/// coordinate varying slowest.
Samples generate_grid(const Box& box, std::size_t n_total);

/// Per-dimension lattice with `per_dim` points (>= 2) along each axis.
Samples lattice(const Box& box, std::size_t per_dim);

/// Interior lattice through the midpoints of a per_dim lattice: per_dim - 1
/// points per axis, each offset by half a grid step.
Samples midpoint_lattice(const Box& box, std::size_t per_dim);

/// Trained network plus the affine maps between raw and network units:
///   u = (x - in_shift) * in_scale        (box -> [-1, 1])
///   f = net(u) * out_scale + out_shift   (standardized -> raw)
struct SurrogateModel {
    Network net;
    std::vector<double> in_scale, in_shift;
    double out_scale = 1.0;
    double out_shift = 0.0;
    Box box;

    std::size_t dim() const { return in_scale.size(); }
    std::vector<double> normalize(std::span<const double> x) const;
    std::vector<double> denormalize(std::span<const double> u) const;

    /// Raw-unit objective estimate.
    double value(std::span<const double> x) const;
    /// Value and d value / dx, chained through both normalization maps.
    double value_and_gradient(std::span<const double> x, std::span<double> grad) const;

    friend bool operator==(const SurrogateModel&, const SurrogateModel&) = default;
};

struct SurrogateValue {
    double value;
    bool extrapolated; ///< x lies outside the training box
};

/// Throws NumericalError for non-finite input.
SurrogateValue surrogate_eval(const SurrogateModel& m, std::span<const double> x);

/// Identity normalization around an existing network.
SurrogateModel wrap_network(Network net, Box box);

struct FitReport {
    double train_rmse = 0.0;
    double holdout_rmse = 0.0;
    /// holdout RMSE / objective range over the training lattice
    /// (range 0 is treated as 1).
    double normalized_rmse = 0.0;
    int epochs_run = 0;
    std::uint64_t seed = 0;
    std::size_t train_points = 0;
    std::size_t holdout_points = 0;
    std::vector<double> loss_history;
};

struct SurrogateFit {
    SurrogateModel model;
    FitReport report;
};

struct FitOptions {
    TrainConfig train{500, 10, 0.01, 0, OptimizerKind::sgd};
    std::size_t grid_n = 10000;
    std::size_t hidden = 20;
};

/// Fits a one-hidden-layer tanh network to objective `objective_index` on a
/// lattice over the problem's box (general constraints do not filter the
/// data). Throws Error for epochs <= 0 and NumericalError naming the epoch
/// if training diverges.
SurrogateFit fit_surrogate(const ProblemSpec& problem, std::size_t objective_index,
                           const FitOptions& options = {});

/// Fit against an arbitrary field over a box.
SurrogateFit fit_field(const ScalarField& objective, const Box& box, const FitOptions& options);

/// ScalarField view of a surrogate (shares ownership).
class SurrogateField final : public ScalarField {
public:
    explicit SurrogateField(std::shared_ptr<const SurrogateModel> m) : model_(std::move(m)) {}
    std::size_t dim() const override { return model_->dim(); }
    double value(std::span<const double> x) const override { return model_->value(x); }
    double value_and_gradient(std::span<const double> x, std::span<double> grad) const override
    {
        return model_->value_and_gradient(x, grad);
    }
    std::string describe() const override { return "surrogate"; }
    const SurrogateModel& model() const { return *model_; }

private:
    std::shared_ptr<const SurrogateModel> model_;
};

/// Surrogate container, version 1: magic "NOMSURR\0", u32 version, u64 dim,
/// in_scale[dim], in_shift[dim], out_scale, out_shift, box lo[dim],
/// box hi[dim] (all f64), then u64 length + an embedded model-file payload.
inline constexpr std::uint32_t surrogate_format_version = 1;
std::vector<std::uint8_t> save_surrogate(const SurrogateModel& m);
SurrogateModel load_surrogate(std::span<const std::uint8_t> bytes);

} // namespace nom
