#include <stdexcept>
#include <cmath>

#include "doctest.h"
#include "oracles.hpp"
#include "prosub/data.hpp"
#include "prosub/models.hpp"

using namespace prosub;

namespace {

Mlp identity_layer(size_t dim, Activation act) {
    Mlp net;
    DenseLayer l;
    l.weights = Matrix(dim, dim);
    for (size_t i = 0; i < dim; ++i) l.weights.at(i, i) = 1.0;
    l.bias.assign(dim, 0.0);
    l.activation = act;
    net.layers.push_back(std::move(l));
    return net;
}

Mlp zero_layer(size_t dim, Activation act) {
    Mlp net = identity_layer(dim, act);
    for (auto& w : net.layers[0].weights.values()) w = 0.0;
    return net;
}

DualModel frozen_scorer_model(size_t dim, Mlp reconstructor) {
    DualModel m;
    m.scorer = zero_layer(dim, Activation::scaled_sigmoid2);  // every score exactly 1
    m.reconstructor = std::move(reconstructor);
    m.validate();
    return m;
}

Matrix random_matrix(size_t rows, size_t cols, Rng& rng, double lo = -1.0, double hi = 1.0) {
    Matrix m(rows, cols);
    for (auto& v : m.values()) v = rng.uniform(lo, hi);
    return m;
}

}  // namespace

TEST_CASE("score_batch: zero scorer head scores every measurement 1.0") {
    DualModel m = frozen_scorer_model(4, identity_layer(4, Activation::linear));
    Rng rng(1);
    Matrix batch = random_matrix(6, 4, rng);
    auto scores = score_batch(m, batch);
    for (double s : scores) CHECK(s == 1.0);
}

TEST_CASE("score_batch output lies strictly inside (0,2)") {
    Rng rng(2);
    DualModel m = build_dual_model_widths(5, {8}, {8}, 0.0, rng);
    Matrix batch = random_matrix(32, 5, rng, -3.0, 3.0);
    for (double s : score_batch(m, batch)) {
        CHECK(s > 0.0);
        CHECK(s < 2.0);
    }
}

TEST_CASE("score_batch reduces per-sample scores by the batch mean") {
    // single measurement; logits chosen so the two rows score 0.4 and 0.8
    DualModel m;
    m.scorer = identity_layer(1, Activation::scaled_sigmoid2);
    m.reconstructor = identity_layer(1, Activation::linear);
    m.validate();
    double z1 = std::log(0.2 / 0.8);  // 2*sigmoid = 0.4
    double z2 = std::log(0.4 / 0.6);  // 2*sigmoid = 0.8
    Matrix batch(2, 1, {z1, z2});
    auto scores = score_batch(m, batch);
    REQUIRE(scores.size() == 1);
    CHECK(scores[0] == doctest::Approx(0.6).epsilon(1e-12));
}

TEST_CASE("pipeline gradients match finite differences including the scorer path") {
    Rng rng(3);
    const size_t N = 5;
    DualModel model = build_dual_model_widths(N, {7}, {6, 4}, 0.0, rng);
    Matrix batch = random_matrix(6, N, rng);
    Mask mask(N, 1.0);
    mask.values[1] = 0.0;   // removed
    mask.values[3] = 0.45;  // mid-anneal
    std::vector<double> prior{0.9, 1.1, 0.4, 1.6, 0.2};
    double a = 0.65;

    Rng fwd_rng(0);
    PipelineGrads grads =
        pipeline_forward_backward(model, batch, mask, prior, a, false, fwd_rng);

    auto eval = [&]() { return pipeline_loss(model, batch, mask, prior, a); };
    CHECK(grads.loss == doctest::Approx(eval()).epsilon(1e-12));

    auto scorer_fd = oracle::finite_diff(oracle::param_pointers(model.scorer), eval);
    CHECK(oracle::max_rel_error(oracle::flatten_grads(grads.scorer), scorer_fd) < 1e-4);

    auto recon_fd = oracle::finite_diff(oracle::param_pointers(model.reconstructor), eval);
    CHECK(oracle::max_rel_error(oracle::flatten_grads(grads.reconstructor), recon_fd) < 1e-4);
}

TEST_CASE("alpha zero blocks every gradient into the scorer") {
    Rng rng(4);
    const size_t N = 4;
    DualModel model = build_dual_model_widths(N, {6}, {6}, 0.0, rng);
    Matrix batch = random_matrix(5, N, rng);
    Mask mask(N, 1.0);
    std::vector<double> prior(N, 1.0);

    Rng fwd_rng(0);
    PipelineGrads at_zero =
        pipeline_forward_backward(model, batch, mask, prior, 0.0, false, fwd_rng);
    for (double g : oracle::flatten_grads(at_zero.scorer)) CHECK(g == 0.0);

    PipelineGrads at_mid =
        pipeline_forward_backward(model, batch, mask, prior, 0.5, false, fwd_rng);
    double sum = 0.0;
    for (double g : oracle::flatten_grads(at_mid.scorer)) sum += std::fabs(g);
    CHECK(sum > 0.0);
}

TEST_CASE("train_epoch: identity pipeline starts at zero loss") {
    const size_t N = 3;
    DualModel model = frozen_scorer_model(N, identity_layer(N, Activation::linear));
    Rng rng(5);
    Matrix x = random_matrix(10, N, rng);
    Mask mask(N, 1.0);
    std::vector<double> prior(N, 1.0);
    AdamState s_opt = make_adam_state(model.scorer);
    AdamState r_opt = make_adam_state(model.reconstructor);
    EpochStats stats = train_epoch(model, x, mask, prior, 0.5, s_opt, r_opt, 16, rng);
    CHECK(stats.train_loss == 0.0);
    for (double s : stats.last_batch_score) CHECK(s == 1.0);
}

TEST_CASE("train_epoch: all-zero mask reduces to the mean square of the data") {
    const size_t N = 4;
    DualModel model = frozen_scorer_model(N, zero_layer(N, Activation::linear));
    Rng rng(6);
    Matrix x = random_matrix(12, N, rng, 0.2, 2.0);
    Mask mask(N, 0.0);
    std::vector<double> prior(N, 1.0);
    AdamState s_opt = make_adam_state(model.scorer);
    AdamState r_opt = make_adam_state(model.reconstructor);
    EpochStats stats = train_epoch(model, x, mask, prior, 1.0, s_opt, r_opt, 100, rng);

    double expect = 0.0;
    for (double v : x.values()) expect += v * v;
    expect /= static_cast<double>(x.size());
    CHECK(stats.train_loss == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("train_epoch is deterministic for a fixed seed") {
    auto run = [](uint64_t seed) {
        Rng rng(seed);
        DualModel model = build_dual_model_widths(4, {8}, {8}, 0.0, rng);
        Matrix x = random_matrix(20, 4, rng);
        Mask mask(4, 1.0);
        std::vector<double> prior(4, 1.0);
        AdamState s_opt = make_adam_state(model.scorer);
        AdamState r_opt = make_adam_state(model.reconstructor);
        std::vector<double> losses;
        for (int e = 0; e < 5; ++e) {
            losses.push_back(
                train_epoch(model, x, mask, prior, 0.7, s_opt, r_opt, 8, rng).train_loss);
        }
        return losses;
    };
    CHECK(run(99) == run(99));
}

namespace {

Matrix synthetic_train_matrix(size_t n, uint64_t seed) {
    SyntheticSpec spec;
    spec.n = n;
    spec.n_measurements = 8;
    spec.latent_dim = 3;
    spec.noise_std = 0.0;
    spec.seed = seed;
    spec.plan = single_mixture_plan(8, 3, {2, 5, 7});
    return generate_synthetic(spec).samples;
}

ArchSpec small_arch() {
    ArchSpec a;
    a.scorer_hidden_layers = 1;
    a.reconstructor_hidden_layers = 1;
    a.scorer_units = {128, 128};
    a.reconstructor_units = {128, 128};
    a.dropout = 0.0;
    return a;
}

}  // namespace

TEST_CASE("run_prosub removes exactly N-M measurements and replays its own removals") {
    Matrix train = synthetic_train_matrix(240, 11);
    Matrix val = synthetic_train_matrix(60, 12);

    ProsubConfig cfg;
    cfg.schedule = make_schedule(8, 3, 4, 2, 7, 3);
    cfg.batch_size = 120;
    cfg.seed = 77;
    ProsubRun run = run_prosub(train, val, cfg, small_arch());

    CHECK(run.mask.active_count() == 3);
    size_t zeros = 0;
    for (double v : run.mask.values) zeros += (v == 0.0) ? 1 : 0;
    CHECK(zeros == 5);
    CHECK(run.steps.size() == 4);

    // replay equivalence: cumulative removal sets reproduce the final mask
    Mask replay(8, 1.0);
    for (const auto& step : run.steps) {
        for (size_t j : step.removals.indices) {
            CHECK(replay.values[j] == 1.0);  // never resurrected
            replay.values[j] = 0.0;
        }
    }
    CHECK(replay.values == run.mask.values);

    // loss curves are full length and finite
    for (const auto& step : run.steps) {
        CHECK(step.train_curve.size() == 7);
        CHECK(step.val_curve.size() == 7);
        for (double l : step.train_curve) CHECK(std::isfinite(l));
    }
}

TEST_CASE("run_prosub with a tuner records one trial per step") {
    Matrix train = synthetic_train_matrix(200, 13);
    Matrix val = synthetic_train_matrix(50, 14);

    ProsubConfig cfg;
    cfg.schedule = make_schedule(8, 4, 3, 2, 5, 2);
    cfg.batch_size = 100;
    cfg.seed = 5;
    GreedyTuner tuner(9, 0.25, false, small_arch());
    ProsubRun run = run_prosub(train, val, cfg, small_arch(), &tuner);
    CHECK(tuner.history().size() == 3);
    CHECK(run.mask.active_count() == 4);
    CHECK_NOTHROW(tuner.best_arch());
}

TEST_CASE("masked-out measurements cannot influence the frozen reconstruction") {
    Matrix train = synthetic_train_matrix(240, 15);
    Matrix val = synthetic_train_matrix(60, 16);

    ProsubConfig cfg;
    cfg.schedule = make_schedule(8, 3, 4, 2, 7, 3);
    cfg.batch_size = 120;
    cfg.seed = 3;
    ProsubRun run = run_prosub(train, val, cfg, small_arch());

    size_t removed = 0;
    while (run.mask.values[removed] != 0.0) ++removed;

    Matrix shuffled = val;
    for (size_t i = 0; i + 1 < shuffled.rows(); i += 2) {
        std::swap(shuffled.at(i, removed), shuffled.at(i + 1, removed));
    }
    Matrix a = reconstruct(run.model, val, run.mask, run.score.values);
    Matrix b = reconstruct(run.model, shuffled, run.mask, run.score.values);
    CHECK(a.values() == b.values());
}

TEST_CASE("run_prosub propagates a diverged fixed-architecture run") {
    Matrix train = synthetic_train_matrix(100, 17);
    Matrix val = synthetic_train_matrix(30, 18);
    ProsubConfig cfg;
    cfg.schedule = make_schedule(8, 4, 3, 2, 5, 2);
    cfg.batch_size = 50;
    cfg.seed = 1;
    cfg.lr = 1e200;  // one Adam step overflows the reconstructor forward pass
    CHECK_THROWS_AS(run_prosub(train, val, cfg, small_arch()), TrialFailure);
}

TEST_CASE("run_prosub with a tuner absorbs failures as failed trials") {
    Matrix train = synthetic_train_matrix(100, 19);
    Matrix val = synthetic_train_matrix(30, 20);
    ProsubConfig cfg;
    cfg.schedule = make_schedule(8, 4, 3, 2, 5, 2);
    cfg.batch_size = 50;
    cfg.seed = 1;
    cfg.lr = 1e200;
    GreedyTuner tuner(4, 0.25, false, small_arch());
    ProsubRun run = run_prosub(train, val, cfg, small_arch(), &tuner);
    CHECK(run.mask.active_count() == 4);  // mask bookkeeping survives failures
    bool any_failed = false;
    for (const auto& t : tuner.history()) any_failed |= !t.ok;
    CHECK(any_failed);
}

TEST_CASE("warm start must match the schedule's active count") {
    Matrix train = synthetic_train_matrix(100, 21);
    Matrix val = synthetic_train_matrix(30, 22);
    Rng rng(8);
    WarmStart warm;
    warm.model = build_dual_model_widths(8, {128}, {128}, 0.0, rng);
    warm.model.arch = small_arch();
    warm.mask = Mask(8, 1.0);
    warm.mask.values[0] = 0.0;  // 7 active
    warm.score.assign(8, 1.0);

    ProsubConfig cfg;
    cfg.schedule = make_schedule(8, 3, 3, 2, 5, 2);  // expects 8 active
    cfg.batch_size = 50;
    CHECK_THROWS_AS(run_prosub(train, val, cfg, small_arch(), nullptr, &warm),
                    std::invalid_argument);

    cfg.schedule = make_schedule(7, 3, 3, 2, 5, 2);
    ProsubRun run = run_prosub(train, val, cfg, small_arch(), nullptr, &warm);
    CHECK(run.mask.active_count() == 3);
    CHECK(run.mask.values[0] == 0.0);  // stayed removed
}

TEST_CASE("sardu_keep_set: top-M with lowest-index tie break") {
    CHECK(sardu_keep_set({0.1, 0.2, 0.3, 0.4}, 2) == std::vector<size_t>{2, 3});
    CHECK(sardu_keep_set({0.5, 0.5, 0.5, 0.5}, 2) == std::vector<size_t>{0, 1});

    // exhaustive comparison against a brute-force chooser
    Rng rng(23);
    for (int rep = 0; rep < 200; ++rep) {
        size_t n = 2 + rng.below(7);
        size_t m = 1 + rng.below(n);
        std::vector<double> w(n);
        for (auto& v : w) v = static_cast<double>(rng.below(3));  // heavy ties
        auto got = sardu_keep_set(w, m);

        std::vector<size_t> order(n);
        for (size_t i = 0; i < n; ++i) order[i] = i;
        std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
            return w[a] != w[b] ? w[a] > w[b] : a < b;
        });
        std::vector<size_t> expect(order.begin(), order.begin() + static_cast<long>(m));
        std::sort(expect.begin(), expect.end());
        CHECK(got == expect);
    }
}

TEST_CASE("sardu_forward clamps all but M weights and is deterministic") {
    Rng rng(24);
    ArchSpec arch = small_arch();
    SarduModel model = build_sardu_model(6, 2, arch, rng);
    Matrix batch = random_matrix(10, 6, rng);
    SarduForward a = sardu_forward(model, batch);
    SarduForward b = sardu_forward(model, batch);
    CHECK(a.selected.size() == 2);
    CHECK(a.selected == b.selected);
    CHECK(a.loss == b.loss);
}

TEST_CASE("sardu training learns and keeps selections per batch") {
    Rng rng(25);
    Matrix x = synthetic_train_matrix(300, 26);
    SarduModel model = build_sardu_model(8, 3, small_arch(), rng);
    AdamState sel = make_adam_state(model.selector);
    AdamState rec = make_adam_state(model.reconstructor);
    double first = 0.0, last = 0.0;
    for (int e = 0; e < 30; ++e) {
        SarduEpochStats stats = sardu_train_epoch(model, x, sel, rec, 100, rng);
        if (e == 0) first = stats.train_loss;
        last = stats.train_loss;
        CHECK(stats.batch_selections.size() == 3);
        for (const auto& sel_set : stats.batch_selections) CHECK(sel_set.size() == 3);
    }
    CHECK(last < first);
}

TEST_CASE("sardu selector gradients flow only through kept weights") {
    const size_t N = 4;
    // zero-weight selector: w_j = 2*sigmoid(b_j) depends only on its own bias,
    // so the keep set is pinned by the biases {2, 3} > {0, 1}
    SarduModel model;
    model.selector = zero_layer(N, Activation::scaled_sigmoid2);
    model.selector.layers[0].bias = {-1.0, -0.5, 0.5, 1.0};
    Rng rng(27);
    model.reconstructor = make_mlp(N, {6}, N, Activation::relu, Activation::linear, 0.0, rng);
    model.target_m = 2;
    model.arch = small_arch();
    model.validate();

    Matrix x = random_matrix(12, N, rng, 0.5, 1.5);
    AdamState sel = make_adam_state(model.selector);
    AdamState rec = make_adam_state(model.reconstructor);
    std::vector<double> bias_before = model.selector.layers[0].bias;
    Rng epoch_rng(0);
    sardu_train_epoch(model, x, sel, rec, 64, epoch_rng);
    std::vector<double> bias_after = model.selector.layers[0].bias;

    // clamped channels 0 and 1: zero gradient, Adam leaves them in place
    CHECK(bias_after[0] == bias_before[0]);
    CHECK(bias_after[1] == bias_before[1]);
    // kept channels carry gradient
    CHECK(bias_after[2] != bias_before[2]);
    CHECK(bias_after[3] != bias_before[3]);
}
