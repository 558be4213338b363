#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "prosub/rng.hpp"

namespace prosub {

// Search space: hidden-layer counts in {1,2,3} per network, two width choices
// per network from {128,256,512,1024,2048}, and a dropout choice that is only
// searched for the SARDU+NAS baseline (fixed at 0 otherwise).
inline constexpr std::array<int, 3> kLayerChoices{1, 2, 3};
inline constexpr std::array<int, 5> kUnitChoices{128, 256, 512, 1024, 2048};
inline constexpr std::array<double, 5> kDropoutChoices{0.0, 0.1, 0.2, 0.3, 0.4};

struct ArchSpec {
    int scorer_hidden_layers = 2;
    int reconstructor_hidden_layers = 2;
    std::array<int, 2> scorer_units{1024, 1024};
    std::array<int, 2> reconstructor_units{1024, 1024};
    double dropout = 0.0;

    bool operator==(const ArchSpec&) const = default;

    // Width per hidden layer; the two unit choices cover layers 1 and 2, a
    // third layer repeats the second choice.
    std::vector<size_t> scorer_widths() const;
    std::vector<size_t> reconstructor_widths() const;

    bool in_search_space() const;
    void validate() const;
    std::string describe() const;
};

ArchSpec default_arch();

struct Trial {
    ArchSpec arch;
    int step = 0;
    std::vector<double> train_curve;
    std::vector<double> val_curve;
    double objective = std::numeric_limits<double>::infinity();
    bool ok = false;
};

// objective = min of val_curve when ok; failed trials carry +inf and are kept
// in the history for reporting.
Trial make_trial(const ArchSpec& arch, int step, std::vector<double> train_curve,
                 std::vector<double> val_curve, bool ok);

class GreedyTuner {
public:
    GreedyTuner(uint64_t seed, double exploration_prob = 0.25, bool search_dropout = false,
                ArchSpec cold_start = default_arch());

    // Cold start returns the default architecture. Otherwise, with probability
    // 1 - exploration_prob, moves one hyperparameter of the best architecture
    // to an adjacent value in its choice set; with probability
    // exploration_prob, resamples one hyperparameter uniformly.
    ArchSpec propose_next();

    // Appends to history; best is replaced only on strict improvement by an
    // ok trial.
    void record_trial(Trial trial);

    // Architecture of the minimal-objective ok trial; throws if none exists.
    const ArchSpec& best_arch() const;

    bool has_best() const { return best_index_ >= 0; }
    double best_objective() const;
    const std::vector<Trial>& history() const { return history_; }

private:
    std::vector<Trial> history_;
    long best_index_ = -1;
    Rng rng_;
    double exploration_prob_;
    bool search_dropout_;
    ArchSpec cold_start_;
};

}  // namespace prosub
