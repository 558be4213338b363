#include <stdexcept>
#include <cmath>

#include "doctest.h"
#include "oracles.hpp"
#include "prosub/adam.hpp"
#include "prosub/checkpoint.hpp"
#include "prosub/matrix.hpp"
#include "prosub/mlp.hpp"
#include "prosub/rng.hpp"

using namespace prosub;

namespace {

Mlp single_layer(size_t dim, Activation act) {
    Mlp net;
    DenseLayer l;
    l.weights = Matrix(dim, dim);
    for (size_t i = 0; i < dim; ++i) l.weights.at(i, i) = 1.0;
    l.bias.assign(dim, 0.0);
    l.activation = act;
    net.layers.push_back(std::move(l));
    return net;
}

}  // namespace

TEST_CASE("he_normal_init draws match the stated variance") {
    Rng rng(42);
    // fan_in 1: variance 2
    double sum = 0.0, sq = 0.0;
    const int n = 100000;
    for (int i = 0; i < n; ++i) {
        Matrix w = he_normal_init(1, 1, rng);
        sum += w.at(0, 0);
        sq += w.at(0, 0) * w.at(0, 0);
    }
    double var = sq / n - (sum / n) * (sum / n);
    CHECK(var == doctest::Approx(2.0).epsilon(0.05));

    // fan_in 8: variance 0.25
    Rng rng8(43);
    Matrix w = he_normal_init(8, 12500, rng8);
    sum = sq = 0.0;
    for (double x : w.values()) {
        sum += x;
        sq += x * x;
    }
    var = sq / static_cast<double>(w.size()) -
          (sum / static_cast<double>(w.size())) * (sum / static_cast<double>(w.size()));
    CHECK(var == doctest::Approx(0.25).epsilon(0.05));
}

TEST_CASE("he_normal_init is deterministic per seed and rejects zero fan-in") {
    Rng a(7), b(7);
    Matrix wa = he_normal_init(4, 5, a);
    Matrix wb = he_normal_init(4, 5, b);
    CHECK(wa.values() == wb.values());
    Rng c(7);
    CHECK_THROWS_AS(he_normal_init(0, 3, c), std::invalid_argument);
}

TEST_CASE("forward: identity linear layer returns its input") {
    Mlp net = single_layer(3, Activation::linear);
    Matrix v(2, 3, {1.0, -2.5, 3.25, 0.0, 7.5, -1.0});
    Rng rng(0);
    auto res = forward(net, v, false, rng);
    CHECK(res.output.values() == v.values());
}

TEST_CASE("forward: relu zeroes an all-negative input") {
    Mlp net = single_layer(4, Activation::relu);
    Matrix v(1, 4, {-1.0, -0.5, -3.0, -0.001});
    Rng rng(0);
    auto res = forward(net, v, false, rng);
    for (double x : res.output.values()) CHECK(x == 0.0);
}

TEST_CASE("forward: scaled sigmoid maps logit 0 to exactly 1") {
    Mlp net = single_layer(2, Activation::scaled_sigmoid2);
    for (auto& w : net.layers[0].weights.values()) w = 0.0;
    Matrix v(1, 2, {123.0, -55.0});
    Rng rng(0);
    auto res = forward(net, v, false, rng);
    CHECK(res.output.at(0, 0) == 1.0);
    CHECK(res.output.at(0, 1) == 1.0);
}

TEST_CASE("forward rejects a dimension mismatch") {
    Mlp net = single_layer(3, Activation::linear);
    Matrix bad(2, 4);
    Rng rng(0);
    CHECK_THROWS_AS(forward(net, bad, false, rng), std::invalid_argument);
}

TEST_CASE("l2_loss basics") {
    Matrix a(2, 2, {1.0, 2.0, 3.0, 4.0});
    CHECK(l2_loss(a, a) == 0.0);

    Matrix zeros(2, 2), ones(2, 2, 1.0);
    CHECK(l2_loss(zeros, ones) == 1.0);

    Matrix bad(2, 3);
    CHECK_THROWS_AS(l2_loss(a, bad), std::invalid_argument);
}

TEST_CASE("l2_loss agrees with a scalar-loop oracle on random input") {
    Rng rng(11);
    Matrix p(3, 3), t(3, 3);
    for (auto& v : p.values()) v = rng.normal();
    for (auto& v : t.values()) v = rng.normal();
    double expect = 0.0;
    for (size_t i = 0; i < 9; ++i) {
        double d = p.values()[i] - t.values()[i];
        expect += d * d;
    }
    expect /= 9.0;
    CHECK(l2_loss(p, t) == doctest::Approx(expect).epsilon(1e-15));
}

TEST_CASE("backward: zero loss gradient gives zero parameter gradients") {
    Rng rng(3);
    Mlp net = make_mlp(3, {5}, 2, Activation::relu, Activation::linear, 0.0, rng);
    Matrix batch(4, 3);
    for (auto& v : batch.values()) v = rng.normal();
    auto fwd = forward(net, batch, false, rng);
    Matrix zero_grad(4, 2);
    auto grads = backward(net, fwd.tape, zero_grad);
    for (const auto& lg : grads.layers) {
        for (double g : lg.d_weights.values()) CHECK(g == 0.0);
        for (double g : lg.d_bias) CHECK(g == 0.0);
    }
}

TEST_CASE("backward: closed form for a 1x1 linear net") {
    Mlp net = single_layer(1, Activation::linear);
    double w = 1.7, x = 0.8, y = -0.4;
    net.layers[0].weights.at(0, 0) = w;
    Matrix batch(1, 1, {x});
    Matrix target(1, 1, {y});
    Rng rng(0);
    auto fwd = forward(net, batch, false, rng);
    auto grads = backward(net, fwd.tape, l2_loss_grad(fwd.output, target));
    CHECK(grads.layers[0].d_weights.at(0, 0) ==
          doctest::Approx(2.0 * x * (w * x - y)).epsilon(1e-12));
}

TEST_CASE("backward matches central finite differences on small random nets") {
    struct Shape {
        std::vector<size_t> hidden;
        Activation out_act;
    };
    std::vector<Shape> shapes = {
        {{}, Activation::linear},
        {{6}, Activation::linear},
        {{5, 7}, Activation::scaled_sigmoid2},
        {{8, 4, 6}, Activation::linear},
    };
    Rng rng(19);
    for (const auto& shape : shapes) {
        Mlp net = make_mlp(4, shape.hidden, 3, Activation::relu, shape.out_act, 0.0, rng);
        Matrix batch(5, 4), target(5, 3);
        for (auto& v : batch.values()) v = rng.normal();
        for (auto& v : target.values()) v = rng.normal();

        Rng fwd_rng(0);
        auto fwd = forward(net, batch, false, fwd_rng);
        auto grads = backward(net, fwd.tape, l2_loss_grad(fwd.output, target));

        auto analytic = oracle::flatten_grads(grads);
        auto numeric = oracle::finite_diff(oracle::param_pointers(net), [&]() {
            return l2_loss(forward_eval(net, batch), target);
        });
        CHECK(oracle::max_rel_error(analytic, numeric) < 1e-4);
    }
}

TEST_CASE("backward rejects a tape from a different network") {
    Rng rng(37);
    Mlp a = make_mlp(3, {6}, 2, Activation::relu, Activation::linear, 0.0, rng);
    Mlp b = make_mlp(3, {4}, 2, Activation::relu, Activation::linear, 0.0, rng);
    Matrix batch(2, 3);
    auto fwd = forward(a, batch, false, rng);
    Matrix grad(2, 2);
    CHECK_THROWS_AS(backward(b, fwd.tape, grad), std::invalid_argument);
}

TEST_CASE("backward also produces the input gradient") {
    Rng rng(29);
    Mlp net = make_mlp(3, {6}, 3, Activation::relu, Activation::linear, 0.0, rng);
    Matrix batch(2, 3), target(2, 3);
    for (auto& v : batch.values()) v = rng.normal();
    for (auto& v : target.values()) v = rng.normal();
    auto fwd = forward(net, batch, false, rng);
    auto grads = backward(net, fwd.tape, l2_loss_grad(fwd.output, target));

    std::vector<double*> inputs;
    for (auto& v : batch.values()) inputs.push_back(&v);
    auto numeric = oracle::finite_diff(inputs, [&]() {
        return l2_loss(forward_eval(net, batch), target);
    });
    std::vector<double> analytic(grads.d_input.values().begin(), grads.d_input.values().end());
    CHECK(oracle::max_rel_error(analytic, numeric) < 1e-4);
}

TEST_CASE("dropout: train-mode average converges to the eval output") {
    Rng rng(5);
    Mlp net = make_mlp(4, {8}, 3, Activation::relu, Activation::linear, 0.3, rng);
    // positive weights keep the outputs well away from zero
    for (auto& l : net.layers) {
        for (auto& w : l.weights.values()) w = std::fabs(w) + 0.05;
    }
    Matrix input(1, 4, {0.9, 1.1, 0.7, 1.3});
    Matrix ref = forward_eval(net, input);

    const int reps = 20000;
    std::vector<double> mean(3, 0.0);
    Rng drop_rng(77);
    for (int r = 0; r < reps; ++r) {
        auto res = forward(net, input, true, drop_rng);
        for (size_t j = 0; j < 3; ++j) mean[j] += res.output.at(0, j);
    }
    for (size_t j = 0; j < 3; ++j) {
        mean[j] /= reps;
        CHECK(mean[j] == doctest::Approx(ref.at(0, j)).epsilon(0.02));
    }
}

TEST_CASE("adam: zero gradient leaves parameters unchanged") {
    Rng rng(9);
    Mlp net = make_mlp(2, {3}, 2, Activation::relu, Activation::linear, 0.0, rng);
    Mlp before = net;
    AdamState state = make_adam_state(net);
    Gradients grads;
    grads.layers.resize(net.layers.size());
    for (size_t i = 0; i < net.layers.size(); ++i) {
        grads.layers[i].d_weights = Matrix(net.layers[i].in_dim(), net.layers[i].out_dim());
        grads.layers[i].d_bias.assign(net.layers[i].out_dim(), 0.0);
    }
    adam_step(net, grads, state);
    CHECK(state.step == 1);
    for (size_t i = 0; i < net.layers.size(); ++i) {
        CHECK(net.layers[i].weights.values() == before.layers[i].weights.values());
        CHECK(net.layers[i].bias == before.layers[i].bias);
    }
}

TEST_CASE("adam: first unit-gradient step moves a scalar by about lr") {
    Mlp net = single_layer(1, Activation::linear);
    net.layers[0].weights.at(0, 0) = 0.5;
    AdamState state = make_adam_state(net, 1e-3);
    Gradients grads;
    grads.layers.resize(1);
    grads.layers[0].d_weights = Matrix(1, 1, {1.0});
    grads.layers[0].d_bias = {0.0};
    adam_step(net, grads, state);
    // bias-corrected m-hat = v-hat = 1, so the move is lr/(1+eps)
    double moved = 0.5 - net.layers[0].weights.at(0, 0);
    CHECK(std::fabs(moved - 1e-3) < 1e-10);
}

TEST_CASE("adam rejects non-finite gradients") {
    Mlp net = single_layer(1, Activation::linear);
    AdamState state = make_adam_state(net);
    Gradients grads;
    grads.layers.resize(1);
    grads.layers[0].d_weights = Matrix(1, 1, {std::nan("")});
    grads.layers[0].d_bias = {0.0};
    CHECK_THROWS_AS(adam_step(net, grads, state), std::runtime_error);
}

TEST_CASE("identical seeds give bitwise-identical training trajectories") {
    auto train = [](uint64_t seed) {
        Rng rng(seed);
        Mlp net = make_mlp(3, {6}, 3, Activation::relu, Activation::linear, 0.2, rng);
        AdamState state = make_adam_state(net);
        Matrix batch(8, 3), target(8, 3);
        for (auto& v : batch.values()) v = rng.normal();
        for (auto& v : target.values()) v = rng.normal();
        for (int step = 0; step < 20; ++step) {
            auto fwd = forward(net, batch, true, rng);
            auto grads = backward(net, fwd.tape, l2_loss_grad(fwd.output, target));
            adam_step(net, grads, state);
        }
        return net;
    };
    Mlp a = train(123), b = train(123);
    for (size_t i = 0; i < a.layers.size(); ++i) {
        CHECK(a.layers[i].weights.values() == b.layers[i].weights.values());
        CHECK(a.layers[i].bias == b.layers[i].bias);
    }
}

TEST_CASE("checkpoint round-trips a network bitwise") {
    Rng rng(31);
    Mlp net = make_mlp(5, {7, 4}, 5, Activation::relu, Activation::scaled_sigmoid2, 0.1, rng);
    std::string path = "/tmp/prosub_test_model.net";
    save_mlp(net, path);
    Mlp loaded = load_mlp(path);
    REQUIRE(loaded.layers.size() == net.layers.size());
    for (size_t i = 0; i < net.layers.size(); ++i) {
        CHECK(loaded.layers[i].weights.values() == net.layers[i].weights.values());
        CHECK(loaded.layers[i].bias == net.layers[i].bias);
        CHECK(loaded.layers[i].activation == net.layers[i].activation);
        CHECK(loaded.layers[i].dropout_rate == net.layers[i].dropout_rate);
    }
    CHECK_THROWS(load_mlp("/tmp/prosub_no_such_file.net"));
}
