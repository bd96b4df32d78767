#include "nom/activation.hpp"
#include "nom/error.hpp"
#include "nom/gradcheck.hpp"
#include "nom/network.hpp"
#include "nom/serialize.hpp"
#include "nom/train.hpp"

#include <doctest.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

using namespace nom;

namespace {

// Straight-line re-implementation of the layer recurrence, used as an oracle.
std::vector<double> straight_line(const Network& net, std::vector<double> a)
{
    for (const Layer& layer : net.layers()) {
        std::vector<double> next(layer.out_dim());
        for (std::size_t o = 0; o < layer.out_dim(); ++o) {
            double z = layer.bias(o);
            for (std::size_t i = 0; i < layer.in_dim(); ++i) z += layer.weight(o, i) * a[i];
            const Activation& act = layer.activation(o);
            switch (act.kind) {
            case ActivationKind::linear: next[o] = z; break;
            case ActivationKind::tanh: next[o] = std::tanh(z); break;
            case ActivationKind::relu: next[o] = std::max(0.0, z); break;
            case ActivationKind::penalty_ineq: next[o] = act.c * std::max(0.0, z); break;
            case ActivationKind::penalty_eq: next[o] = act.c * std::abs(z); break;
            }
        }
        a = std::move(next);
    }
    return a;
}

Network tiny_linear(double w0, double w1, double b)
{
    Layer l = Layer::dense(2, 1, Activation::linear());
    l.set_weight(0, 0, w0);
    l.set_weight(0, 1, w1);
    l.set_bias(0, b);
    return Network({l});
}

} // namespace

TEST_CASE("relu and penalty activations")
{
    CHECK(activation_eval(Activation::relu(), -1.0).value == 0.0);
    CHECK(activation_eval(Activation::relu(), 2.0).value == 2.0);
    CHECK(activation_eval(Activation::penalty_ineq(10.0), 0.5).value == doctest::Approx(5.0));
    CHECK(activation_eval(Activation::penalty_ineq(10.0), -0.5).value == 0.0);
    CHECK(activation_eval(Activation::penalty_eq(10.0), -0.3).value == doctest::Approx(3.0));
    CHECK(activation_eval(Activation::penalty_eq(10.0), -0.3).derivative == -10.0);
    CHECK(activation_eval(Activation::tanh(), 0.0).derivative == 1.0);
}

TEST_CASE("kinked activations have zero slope at the kink")
{
    for (Activation a : {Activation::relu(), Activation::penalty_ineq(10.0), Activation::penalty_eq(10.0)}) {
        const auto v = activation_eval(a, 0.0);
        CHECK(v.value == 0.0);
        CHECK(v.derivative == 0.0);
    }
}

TEST_CASE("penalty activations vanish exactly on the feasible side")
{
    Rng rng(11);
    for (int i = 0; i < 1000; ++i) {
        const double z = -rng.uniform(0.0, 100.0);
        CHECK(activation_eval(Activation::penalty_ineq(10.0), z).value == 0.0);
        if (z != 0.0) CHECK(activation_eval(Activation::penalty_eq(10.0), z).value > 0.0);
        CHECK(activation_eval(Activation::penalty_eq(10.0), -z).value > 0.0);
    }
    CHECK(activation_eval(Activation::penalty_eq(10.0), 0.0).value == 0.0);
}

TEST_CASE("activation errors")
{
    CHECK_THROWS_AS(activation_eval(Activation::tanh(), std::nan("")), NumericalError);
    CHECK_THROWS_AS(activation_eval(Activation::relu(), std::numeric_limits<double>::infinity()), NumericalError);
    CHECK_THROWS_AS(activation_eval(Activation::penalty_ineq(0.0), 1.0), Error);
    CHECK_THROWS_AS(activation_eval(Activation::penalty_eq(-1.0), 1.0), Error);
}

TEST_CASE("activation names round-trip")
{
    for (auto k : {ActivationKind::linear, ActivationKind::tanh, ActivationKind::relu, ActivationKind::penalty_ineq,
                   ActivationKind::penalty_eq}) {
        CHECK(activation_kind_from_string(to_string(k)) == k);
    }
    CHECK_THROWS_WITH_AS(activation_kind_from_string("swish"), doctest::Contains("swish"), FormatError);
}

TEST_CASE("identity layer and single tanh neuron")
{
    Layer id = Layer::dense(3, 3, Activation::linear());
    for (std::size_t i = 0; i < 3; ++i) id.set_weight(i, i, 1.0);
    const Network net({id});
    const std::vector<double> x{0.3, -2.0, 7.5};
    CHECK(net.forward(x) == x);

    CHECK(tiny_linear(1.0, 1.0, 0.0).forward(std::vector<double>{0.0, 0.0})[0] == 0.0);
    Layer t = Layer::dense(2, 1, Activation::tanh());
    t.set_weight(0, 0, 1.0);
    t.set_weight(0, 1, 1.0);
    CHECK(Network({t}).forward(std::vector<double>{0.0, 0.0})[0] == 0.0);
}

TEST_CASE("random tanh network matches the straight-line oracle")
{
    Rng rng(3);
    const std::size_t widths[] = {2, 20, 1};
    for (int k = 0; k < 20; ++k) {
        Network net = Network::mlp(widths, Activation::tanh(), Activation::linear(), rng);
        for (std::size_t b = 0; b < 20; ++b) net.layer(0).set_bias(b, rng.uniform(-1, 1));
        const std::vector<double> x{rng.uniform(-2, 2), rng.uniform(-2, 2)};
        CHECK(std::abs(net.forward(x)[0] - straight_line(net, x)[0]) <= 1e-12);
    }
}

TEST_CASE("every activation kind matches the oracle inside random networks")
{
    Rng rng(5);
    for (auto kind : {ActivationKind::linear, ActivationKind::tanh, ActivationKind::relu, ActivationKind::penalty_ineq,
                      ActivationKind::penalty_eq}) {
        for (int k = 0; k < 10; ++k) {
            const Network net = random_network(rng, kind);
            std::vector<double> x(net.input_dim());
            for (auto& v : x) v = rng.uniform(-1, 1);
            CHECK(std::abs(net.forward(x)[0] - straight_line(net, x)[0]) <= 1e-12);
        }
    }
}

TEST_CASE("forward rejects the wrong input width")
{
    const Network net = tiny_linear(1, 2, 3);
    CHECK_THROWS_AS(net.forward(std::vector<double>{1.0}), Error);
    CHECK_THROWS_AS(net.forward(std::vector<double>{1.0, 2.0, 3.0}), Error);
}

TEST_CASE("forward is pure")
{
    Rng rng(8);
    const std::size_t widths[] = {3, 5, 2};
    const Network net = Network::mlp(widths, Activation::tanh(), Activation::linear(), rng);
    const Network copy = net;
    const std::vector<double> x{0.1, 0.2, 0.3};
    const auto y1 = net.forward(x);
    const auto y2 = net.forward(x);
    CHECK(y1 == y2);
    CHECK(net == copy);
}

TEST_CASE("linear network gradients are analytic")
{
    const Network net = tiny_linear(1.5, -2.0, 0.25);
    const std::vector<double> x{3.0, 4.0};
    const Gradient g = backprop(net, x);
    REQUIRE(g.parameter_index.size() == 3);
    CHECK(g.parameters[0] == 3.0); // d/dw0 = x0
    CHECK(g.parameters[1] == 4.0);
    CHECK(g.parameters[2] == 1.0); // bias
    CHECK(g.input == std::vector<double>{1.5, -2.0});

    const Gradient g2 = backprop(net, x, -2.0);
    CHECK(g2.parameters[0] == -6.0);
    CHECK(g2.input[1] == 4.0);
}

TEST_CASE("frozen network still yields an input gradient")
{
    Network net = tiny_linear(1.5, -2.0, 0.25);
    net.set_all_trainable(false);
    const Gradient g = backprop(net, std::vector<double>{1.0, 1.0});
    CHECK(g.parameter_index.empty());
    CHECK(g.parameters.empty());
    CHECK(g.input == std::vector<double>{1.5, -2.0});
}

TEST_CASE("partially frozen network omits frozen entries")
{
    Rng rng(2);
    const std::size_t widths[] = {2, 3, 1};
    Network net = Network::mlp(widths, Activation::tanh(), Activation::linear(), rng);
    net.layer(0).set_all_trainable(false);
    const Gradient g = backprop(net, std::vector<double>{0.5, -0.5});
    CHECK(g.parameter_index.size() == net.layer(1).parameter_count());
    for (std::size_t idx : g.parameter_index) CHECK(net.locate(idx).first == 1);
}

TEST_CASE("backprop reports non-finite intermediates with the layer")
{
    Layer a = Layer::dense(1, 1, Activation::linear());
    a.set_weight(0, 0, 1e308);
    Layer b = Layer::dense(1, 1, Activation::linear());
    b.set_weight(0, 0, 1e308);
    const Network net({a, b});
    CHECK_THROWS_WITH_AS(backprop(net, std::vector<double>{10.0}), doctest::Contains("layer"), NumericalError);
}

TEST_CASE("backprop needs a scalar output")
{
    Rng rng(1);
    const std::size_t widths[] = {2, 2};
    const Network net = Network::mlp(widths, Activation::tanh(), Activation::linear(), rng);
    CHECK_THROWS_AS(backprop(net, std::vector<double>{0.0, 0.0}), Error);
}

TEST_CASE("gradients match finite differences on random networks of every kind")
{
    GradCheckOptions o;
    o.seed = 21;
    o.count = 100;
    const std::string suites[] = {"activations", "network"};
    const auto results = run_gradcheck(suites, o);
    std::size_t network_checks = 0;
    for (const auto& r : results) {
        INFO(r.suite << "/" << r.item << " max " << r.max_rel_error);
        CHECK(r.passed);
        CHECK(r.max_rel_error < 1e-6);
        if (r.suite == "network") network_checks += r.checks;
    }
    CHECK(network_checks > 100);
}

TEST_CASE("concatenated networks compose")
{
    Rng rng(4);
    const std::size_t w1[] = {3, 4, 2};
    const std::size_t w2[] = {2, 5, 1};
    const Network a = Network::mlp(w1, Activation::tanh(), Activation::linear(), rng);
    const Network b = Network::mlp(w2, Activation::relu(), Activation::linear(), rng);
    const Network ab = Network::concat(a, b);
    for (int k = 0; k < 20; ++k) {
        const std::vector<double> x{rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
        CHECK(ab.forward(x) == b.forward(a.forward(x)));
    }
    CHECK_THROWS_AS(Network::concat(b, a), Error);
}

TEST_CASE("diagonal layer keeps off-diagonal weights zero and frozen")
{
    Layer d = Layer::diagonal(3, Activation::linear());
    CHECK(d.weight(0, 0) == 1.0);
    CHECK(d.weight(0, 1) == 0.0);
    CHECK_FALSE(d.is_trainable(d.weight_index(0, 1)));
    CHECK(d.is_trainable(d.weight_index(2, 2)));
    CHECK_THROWS_AS(d.set_trainable(d.weight_index(1, 0), true), Error);
    CHECK_THROWS_AS(d.set_weight(1, 0, 0.5), Error);
    d.set_all_trainable(true);
    CHECK_FALSE(d.is_trainable(d.weight_index(1, 0)));
    CHECK_THROWS_AS(Network({Layer::dense(2, 3, Activation::linear()), Layer::dense(2, 1, Activation::linear())}),
                    Error);
}

TEST_CASE("training recovers the least-squares slope")
{
    // y = 2x on 100 points; the closed-form least-squares slope is exactly 2.
    Dataset data{Samples(1), Samples(1)};
    double sxy = 0.0, sxx = 0.0;
    for (int i = 0; i < 100; ++i) {
        const double x = -1.0 + 2.0 * i / 99.0;
        const double y = 2.0 * x;
        data.inputs.push_back(std::span<const double>(&x, 1));
        data.targets.push_back(std::span<const double>(&y, 1));
        sxy += x * y;
        sxx += x * x;
    }
    Network net({Layer::dense(1, 1, Activation::linear())});
    net.layer(0).set_weight(0, 0, 0.1);
    const auto r = train(net, data, TrainConfig{500, 10, 0.01, 7, OptimizerKind::sgd}, LossKind::mse);
    CHECK(r.loss_history.size() == 500);
    CHECK(std::abs(r.model.layer(0).weight(0, 0) - sxy / sxx) < 1e-2);
}

TEST_CASE("raw-output training descends through a frozen convex tail")
{
    // Trainable shift layer followed by a frozen |x - 3|.
    Layer shift = Layer::diagonal(1, Activation::linear());
    Layer tail = Layer::dense(1, 1, Activation::penalty_eq(1.0));
    tail.set_weight(0, 0, 1.0);
    tail.set_bias(0, -3.0);
    tail.set_all_trainable(false);
    const Network net({shift, tail});
    Dataset data{Samples(1), Samples(1)};
    const double x0 = -1.0;
    data.targets = Samples(0);
    data.inputs.push_back(std::span<const double>(&x0, 1));
    const auto r = train(net, data, TrainConfig{200, 1, 0.01, 0, OptimizerKind::sgd}, LossKind::raw_output);
    REQUIRE(r.loss_history.size() == 200);
    CHECK(r.loss_history.back() < r.loss_history.front());
    CHECK(r.model.layer(1) == tail);
}

TEST_CASE("training is bit-reproducible and leaves frozen parameters alone")
{
    Rng rng(9);
    const std::size_t widths[] = {2, 6, 1};
    Network net = Network::mlp(widths, Activation::tanh(), Activation::linear(), rng);
    net.layer(0).set_trainable(net.layer(0).weight_index(1, 0), false);
    net.layer(0).set_trainable(net.layer(0).bias_index(3), false);
    Dataset data{Samples(2), Samples(1)};
    for (int i = 0; i < 40; ++i) {
        const double x[2] = {rng.uniform(-1, 1), rng.uniform(-1, 1)};
        const double y = std::sin(x[0]) * x[1];
        data.inputs.push_back(x);
        data.targets.push_back(std::span<const double>(&y, 1));
    }
    const TrainConfig cfg{50, 8, 0.05, 123, OptimizerKind::sgd};
    const auto a = train(net, data, cfg, LossKind::mse);
    const auto b = train(net, data, cfg, LossKind::mse);
    CHECK(a.model == b.model);
    CHECK(a.loss_history == b.loss_history);
    const auto& before = net.layer(0).parameters();
    const auto& after = a.model.layer(0).parameters();
    for (std::size_t i = 0; i < before.size(); ++i) {
        if (!net.layer(0).is_trainable(i)) CHECK(std::bit_cast<std::uint64_t>(before[i]) == std::bit_cast<std::uint64_t>(after[i]));
    }
    CHECK(a.model.layer(1).parameters()[0] != net.layer(1).parameters()[0]);
}

TEST_CASE("training input validation")
{
    const Network net({Layer::dense(1, 1, Activation::linear())});
    Dataset empty{Samples(1), Samples(1)};
    CHECK_THROWS_AS(train(net, empty, TrainConfig{}, LossKind::mse), Error);
    Dataset one{Samples(1), Samples(1)};
    const double v = 1.0;
    one.inputs.push_back(std::span<const double>(&v, 1));
    one.targets.push_back(std::span<const double>(&v, 1));
    CHECK_THROWS_AS(train(net, one, TrainConfig{10, 2, 0.01, 0, OptimizerKind::sgd}, LossKind::mse), Error);
    CHECK_THROWS_AS(train(net, one, TrainConfig{10, 1, 0.0, 0, OptimizerKind::sgd}, LossKind::mse), Error);
    CHECK_THROWS_AS(train(net, one, TrainConfig{10, 1, 0.01, 0, OptimizerKind::sgd}, LossKind::raw_output), Error);
}

TEST_CASE("model files round-trip exactly")
{
    Rng rng(12);
    const std::size_t widths[] = {3, 7, 4, 1};
    Network net = Network::mlp(widths, Activation::tanh(), Activation::linear(), rng);
    net.layer(1).set_activation(2, Activation::penalty_eq(7.25));
    net.layer(1).set_activation(3, Activation::relu());
    net.layer(0).set_trainable(4, false);
    const Network with_diag({Layer::diagonal(3, Activation::linear()), net.layer(0), net.layer(1), net.layer(2)});

    for (const Network& n : {net, with_diag}) {
        const auto bytes = save(n);
        const Network back = load(bytes);
        CHECK(back == n);
        CHECK(save(back) == bytes);
        const std::vector<double> x{0.3, -0.1, 0.9};
        CHECK(back.forward(x) == n.forward(x));
    }
}

TEST_CASE("model file errors")
{
    Rng rng(13);
    const std::size_t widths[] = {2, 3, 1};
    const auto bytes = save(Network::mlp(widths, Activation::tanh(), Activation::linear(), rng));

    auto truncated = bytes;
    truncated.resize(bytes.size() - 5);
    CHECK_THROWS_AS(load(truncated), FormatError);

    auto trailing = bytes;
    trailing.push_back(0);
    CHECK_THROWS_AS(load(trailing), FormatError);

    auto bad_version = bytes;
    bad_version[8] = 99;
    CHECK_THROWS_WITH_AS(load(bad_version), doctest::Contains("version"), FormatError);

    auto bad_magic = bytes;
    bad_magic[0] = 'X';
    CHECK_THROWS_AS(load(bad_magic), FormatError);

    // Rename the first "tanh" to "tanq".
    auto renamed = bytes;
    const std::string needle = "tanh";
    auto it = std::search(renamed.begin(), renamed.end(), needle.begin(), needle.end());
    REQUIRE(it != renamed.end());
    it[3] = 'q';
    CHECK_THROWS_WITH_AS(load(renamed), doctest::Contains("tanq"), FormatError);
}
