#include <stdexcept>
#include <cmath>
#include <limits>

#include "doctest.h"
#include "prosub/nas.hpp"

using namespace prosub;

namespace {

Trial ok_trial(const ArchSpec& arch, int step, double objective) {
    return make_trial(arch, step, {objective + 0.5}, {objective}, true);
}

int fields_differing(const ArchSpec& a, const ArchSpec& b) {
    int d = 0;
    d += a.scorer_hidden_layers != b.scorer_hidden_layers;
    d += a.reconstructor_hidden_layers != b.reconstructor_hidden_layers;
    d += a.scorer_units[0] != b.scorer_units[0];
    d += a.scorer_units[1] != b.scorer_units[1];
    d += a.reconstructor_units[0] != b.reconstructor_units[0];
    d += a.reconstructor_units[1] != b.reconstructor_units[1];
    d += a.dropout != b.dropout;
    return d;
}

}  // namespace

TEST_CASE("cold start proposes the default architecture") {
    GreedyTuner tuner(1);
    ArchSpec first = tuner.propose_next();
    CHECK(first == default_arch());
    CHECK(first.in_search_space());
}

TEST_CASE("pure-greedy proposals differ from best in exactly one field") {
    GreedyTuner tuner(2, /*exploration_prob=*/0.0);
    tuner.record_trial(ok_trial(default_arch(), 1, 1.0));
    for (int i = 0; i < 50; ++i) {
        ArchSpec prop = tuner.propose_next();
        CHECK(fields_differing(prop, tuner.best_arch()) == 1);
        CHECK(prop.in_search_space());
    }
}

TEST_CASE("proposals stay inside the declared choice sets") {
    GreedyTuner tuner(3, 0.4, /*search_dropout=*/true);
    Rng rng(17);
    for (int i = 0; i < 100; ++i) {
        ArchSpec prop = tuner.propose_next();
        CHECK(prop.in_search_space());
        tuner.record_trial(ok_trial(prop, i + 1, rng.uniform()));
    }
}

TEST_CASE("record_trial: failed trials never become best") {
    GreedyTuner tuner(4);
    ArchSpec arch = default_arch();
    tuner.record_trial(ok_trial(arch, 1, 2.0));
    double best_before = tuner.best_objective();
    tuner.record_trial(make_trial(arch, 2, {}, {}, false));
    CHECK(tuner.best_objective() == best_before);
    CHECK(tuner.history().back().objective == std::numeric_limits<double>::infinity());
}

TEST_CASE("record_trial: strict improvement replaces, equality keeps the earlier") {
    GreedyTuner tuner(5);
    ArchSpec a = default_arch();
    ArchSpec b = default_arch();
    b.scorer_units[0] = 512;
    tuner.record_trial(ok_trial(a, 1, 1.5));
    tuner.record_trial(ok_trial(b, 2, 1.5));  // tie: earlier retained
    CHECK(tuner.best_arch() == a);
    tuner.record_trial(ok_trial(b, 3, 1.25));
    CHECK(tuner.best_arch() == b);
}

TEST_CASE("best_arch without a successful trial is an explicit error") {
    GreedyTuner tuner(6);
    CHECK_THROWS_AS(tuner.best_arch(), std::runtime_error);
    tuner.record_trial(make_trial(default_arch(), 1, {}, {}, false));
    CHECK_THROWS_AS(tuner.best_arch(), std::runtime_error);
}

TEST_CASE("best objective is non-increasing over random record/propose cycles") {
    GreedyTuner tuner(7, 0.3, true);
    Rng rng(70);
    double prev = std::numeric_limits<double>::infinity();
    for (int i = 0; i < 2000; ++i) {
        ArchSpec prop = tuner.propose_next();
        bool ok = !rng.bernoulli(0.1);
        double obj = rng.uniform() * 10.0;
        tuner.record_trial(ok ? ok_trial(prop, i, obj) : make_trial(prop, i, {}, {}, false));
        CHECK(tuner.best_objective() <= prev);
        prev = tuner.best_objective();
    }
}

TEST_CASE("make_trial objective is the minimum of the validation curve") {
    Trial t = make_trial(default_arch(), 1, {3.0, 2.0}, {4.0, 1.5, 2.5}, true);
    CHECK(t.objective == 1.5);
    // non-finite validation entries poison the trial
    Trial bad = make_trial(default_arch(), 1, {1.0}, {std::nan("")}, true);
    CHECK_FALSE(bad.ok);
}

TEST_CASE("arch widths expand the two unit choices over 1-3 hidden layers") {
    ArchSpec a = default_arch();
    a.scorer_hidden_layers = 1;
    a.scorer_units = {256, 512};
    CHECK(a.scorer_widths() == std::vector<size_t>{256});
    a.scorer_hidden_layers = 2;
    CHECK(a.scorer_widths() == std::vector<size_t>{256, 512});
    a.scorer_hidden_layers = 3;
    CHECK(a.scorer_widths() == std::vector<size_t>{256, 512, 512});
}

TEST_CASE("out-of-space architectures fail validation") {
    ArchSpec a = default_arch();
    a.scorer_units[0] = 768;
    CHECK_FALSE(a.in_search_space());
    CHECK_THROWS_AS(a.validate(), std::invalid_argument);
    ArchSpec b = default_arch();
    b.reconstructor_hidden_layers = 4;
    CHECK_FALSE(b.in_search_space());
}
