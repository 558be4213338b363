#include "prosub/nas.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace prosub {

namespace {

template <typename T, size_t N>
long choice_pos(const std::array<T, N>& choices, T value) {
    for (size_t i = 0; i < N; ++i) {
        if (choices[i] == value) return static_cast<long>(i);
    }
    return -1;
}

std::vector<size_t> widths_from(int layers, const std::array<int, 2>& units) {
    std::vector<size_t> w;
    w.push_back(static_cast<size_t>(units[0]));
    if (layers >= 2) w.push_back(static_cast<size_t>(units[1]));
    if (layers >= 3) w.push_back(static_cast<size_t>(units[1]));
    return w;
}

}  // namespace

std::vector<size_t> ArchSpec::scorer_widths() const {
    return widths_from(scorer_hidden_layers, scorer_units);
}

std::vector<size_t> ArchSpec::reconstructor_widths() const {
    return widths_from(reconstructor_hidden_layers, reconstructor_units);
}

bool ArchSpec::in_search_space() const {
    return choice_pos(kLayerChoices, scorer_hidden_layers) >= 0 &&
           choice_pos(kLayerChoices, reconstructor_hidden_layers) >= 0 &&
           choice_pos(kUnitChoices, scorer_units[0]) >= 0 &&
           choice_pos(kUnitChoices, scorer_units[1]) >= 0 &&
           choice_pos(kUnitChoices, reconstructor_units[0]) >= 0 &&
           choice_pos(kUnitChoices, reconstructor_units[1]) >= 0 &&
           choice_pos(kDropoutChoices, dropout) >= 0;
}

void ArchSpec::validate() const {
    if (!in_search_space()) {
        throw std::invalid_argument("ArchSpec outside the search space: " + describe());
    }
}

std::string ArchSpec::describe() const {
    std::ostringstream os;
    os << "S[" << scorer_hidden_layers << "x(" << scorer_units[0] << "," << scorer_units[1]
       << ")] R[" << reconstructor_hidden_layers << "x(" << reconstructor_units[0] << ","
       << reconstructor_units[1] << ")] drop=" << dropout;
    return os.str();
}

ArchSpec default_arch() {
    // Two hidden layers per network, widths mapped onto the nearest values of
    // the unit choice set; dropout 0.
    ArchSpec a;
    a.scorer_hidden_layers = 2;
    a.reconstructor_hidden_layers = 2;
    a.scorer_units = {1024, 1024};
    a.reconstructor_units = {1024, 1024};
    a.dropout = 0.0;
    return a;
}

Trial make_trial(const ArchSpec& arch, int step, std::vector<double> train_curve,
                 std::vector<double> val_curve, bool ok) {
    Trial t;
    t.arch = arch;
    t.step = step;
    t.train_curve = std::move(train_curve);
    t.val_curve = std::move(val_curve);
    t.ok = ok;
    if (ok) {
        if (t.val_curve.empty()) {
            throw std::invalid_argument("make_trial: ok trial needs a validation curve");
        }
        t.objective = *std::min_element(t.val_curve.begin(), t.val_curve.end());
        if (!std::isfinite(t.objective)) {
            t.ok = false;
            t.objective = std::numeric_limits<double>::infinity();
        }
    }
    return t;
}

GreedyTuner::GreedyTuner(uint64_t seed, double exploration_prob, bool search_dropout,
                         ArchSpec cold_start)
    : rng_(seed),
      exploration_prob_(exploration_prob),
      search_dropout_(search_dropout),
      cold_start_(cold_start) {
    cold_start_.validate();
}

ArchSpec GreedyTuner::propose_next() {
    if (best_index_ < 0) return cold_start_;
    ArchSpec next = history_[static_cast<size_t>(best_index_)].arch;
    // Mutable hyperparameters, by slot.
    const int n_fields = search_dropout_ ? 7 : 6;
    int field = static_cast<int>(rng_.below(static_cast<size_t>(n_fields)));
    bool explore = rng_.bernoulli(exploration_prob_);

    auto move_in = [&](auto& choices, auto current) {
        long pos = choice_pos(choices, current);
        if (explore) {
            return choices[rng_.below(choices.size())];
        }
        long lo = std::max<long>(0, pos - 1);
        long hi = std::min<long>(static_cast<long>(choices.size()) - 1, pos + 1);
        long next_pos = pos;
        if (pos == lo) {
            next_pos = hi;
        } else if (pos == hi) {
            next_pos = lo;
        } else {
            next_pos = rng_.bernoulli(0.5) ? hi : lo;
        }
        return choices[static_cast<size_t>(next_pos)];
    };

    switch (field) {
        case 0: next.scorer_hidden_layers = move_in(kLayerChoices, next.scorer_hidden_layers); break;
        case 1: next.reconstructor_hidden_layers = move_in(kLayerChoices, next.reconstructor_hidden_layers); break;
        case 2: next.scorer_units[0] = move_in(kUnitChoices, next.scorer_units[0]); break;
        case 3: next.scorer_units[1] = move_in(kUnitChoices, next.scorer_units[1]); break;
        case 4: next.reconstructor_units[0] = move_in(kUnitChoices, next.reconstructor_units[0]); break;
        case 5: next.reconstructor_units[1] = move_in(kUnitChoices, next.reconstructor_units[1]); break;
        case 6: next.dropout = move_in(kDropoutChoices, next.dropout); break;
    }
    next.validate();
    return next;
}

void GreedyTuner::record_trial(Trial trial) {
    trial.arch.validate();
    history_.push_back(std::move(trial));
    const Trial& t = history_.back();
    if (t.ok && (best_index_ < 0 || t.objective < history_[static_cast<size_t>(best_index_)].objective)) {
        best_index_ = static_cast<long>(history_.size()) - 1;
    }
}

const ArchSpec& GreedyTuner::best_arch() const {
    if (best_index_ < 0) {
        throw std::runtime_error("GreedyTuner: no successful trial recorded");
    }
    return history_[static_cast<size_t>(best_index_)].arch;
}

double GreedyTuner::best_objective() const {
    if (best_index_ < 0) return std::numeric_limits<double>::infinity();
    return history_[static_cast<size_t>(best_index_)].objective;
}

}  // namespace prosub
