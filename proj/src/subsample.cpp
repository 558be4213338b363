#include "prosub/subsample.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace prosub {

size_t Mask::active_count() const {
    size_t n = 0;
    for (double v : values) n += (v == 1.0) ? 1 : 0;
    return n;
}

void Mask::validate() const {
    for (double v : values) {
        if (!(v >= 0.0 && v <= 1.0)) {
            throw std::invalid_argument("Mask: entry outside [0,1]");
        }
    }
}

double alpha(int t, int T) {
    if (T < 2) throw std::invalid_argument("alpha: schedule needs T >= 2");
    if (t < 1 || t > T) throw std::invalid_argument("alpha: t outside [1,T]");
    return static_cast<double>(T - t) / static_cast<double>(T - 1);
}

std::vector<double> blend_scores(const std::vector<double>& prior,
                                 const std::vector<double>& s, double alpha_t) {
    if (prior.size() != s.size()) {
        throw std::invalid_argument("blend_scores: length mismatch");
    }
    std::vector<double> out(s.size());
    for (size_t j = 0; j < s.size(); ++j) {
        out[j] = alpha_t * s[j] + (1.0 - alpha_t) * prior[j];
    }
    return out;
}

ScoreEma ema_update(const ScoreEma& ema, const std::vector<double>& s_t, int t) {
    if (s_t.size() != ema.values.size()) {
        throw std::invalid_argument("ema_update: score length mismatch");
    }
    if (t != ema.step + 1) {
        throw std::invalid_argument("ema_update: step " + std::to_string(t) +
                                    " not consecutive to " + std::to_string(ema.step));
    }
    double a = alpha(t, ema.total_steps);
    ScoreEma out = ema;
    out.values = blend_scores(ema.values, s_t, a);
    out.step = t;
    return out;
}

std::vector<size_t> removal_counts(size_t active, size_t target_m, int T, int T1) {
    if (target_m >= active) {
        throw std::invalid_argument("removal_counts: target M must be below active count");
    }
    if (T1 < 1 || T1 > T) throw std::invalid_argument("removal_counts: need 1 <= T1 <= T");
    size_t total = active - target_m;
    size_t steps = static_cast<size_t>(T - T1 + 1);
    size_t base = total / steps;
    size_t rem = total % steps;
    std::vector<size_t> counts(static_cast<size_t>(T), 0);
    for (size_t i = 0; i < steps; ++i) {
        counts[static_cast<size_t>(T1 - 1) + i] = base + (i < rem ? 1 : 0);
    }
    return counts;
}

RfeSchedule make_schedule(size_t active, size_t target_m, int T, int T1, int epochs,
                          int anneal_window, bool allow_single_shot) {
    if (active < 2) throw std::invalid_argument("make_schedule: need at least 2 measurements");
    if (target_m < 1) throw std::invalid_argument("make_schedule: target M must be >= 1");
    if (T < 2) throw std::invalid_argument("make_schedule: need T >= 2");
    if (T1 == T && !allow_single_shot) {
        throw std::invalid_argument(
            "make_schedule: T1 == T is the single-shot ablation; pass allow_single_shot");
    }
    if (anneal_window < 1) throw std::invalid_argument("make_schedule: anneal window >= 1");
    if (2 * anneal_window >= epochs) {
        throw std::invalid_argument("make_schedule: need anneal_window < epochs/2");
    }
    RfeSchedule s;
    s.start_active = active;
    s.target_m = target_m;
    s.total_steps = T;
    s.stage2_start = T1;
    s.counts = removal_counts(active, target_m, T, T1);
    s.epochs = epochs;
    s.anneal_window = anneal_window;
    return s;
}

RemovalSet select_removals(const ScoreEma& ema, const Mask& mask, size_t d_t, int step) {
    if (ema.values.size() != mask.size()) {
        throw std::invalid_argument("select_removals: score/mask length mismatch");
    }
    std::vector<size_t> candidates;
    for (size_t j = 0; j < mask.size(); ++j) {
        if (mask.is_active(j)) candidates.push_back(j);
    }
    if (d_t > candidates.size()) {
        throw std::invalid_argument("select_removals: D_t exceeds active count");
    }
    std::stable_sort(candidates.begin(), candidates.end(), [&](size_t a, size_t b) {
        if (ema.values[a] != ema.values[b]) return ema.values[a] < ema.values[b];
        return a < b;
    });
    RemovalSet out;
    out.step = step;
    out.indices.assign(candidates.begin(), candidates.begin() + static_cast<long>(d_t));
    std::sort(out.indices.begin(), out.indices.end());
    return out;
}

namespace {

Mask apply_ramp(const Mask& base, const RemovalSet& removal, double drop) {
    Mask out = base;
    for (size_t i : removal.indices) {
        if (i >= base.size()) throw std::invalid_argument("anneal_mask: index out of range");
        if (base.values[i] != 1.0) {
            throw std::invalid_argument("anneal_mask: removal index not fully active at step start");
        }
        out.values[i] = std::max(base.values[i] - drop, 0.0);
    }
    return out;
}

}  // namespace

Mask anneal_mask(const Mask& base, const RemovalSet& removal, int epoch, int anneal_window) {
    if (epoch < 1) throw std::invalid_argument("anneal_mask: epoch starts at 1");
    if (anneal_window < 1) throw std::invalid_argument("anneal_mask: window >= 1");
    double drop = 0.0;
    if (epoch >= anneal_window) {
        drop = static_cast<double>(epoch - anneal_window) / static_cast<double>(anneal_window);
    }
    return apply_ramp(base, removal, drop);
}

Mask anneal_mask_instant(const Mask& base, const RemovalSet& removal, int epoch,
                         int anneal_window) {
    if (epoch < 1) throw std::invalid_argument("anneal_mask: epoch starts at 1");
    if (anneal_window < 1) throw std::invalid_argument("anneal_mask: window >= 1");
    double drop = 0.0;
    if (epoch >= anneal_window) drop = static_cast<double>(epoch - anneal_window);
    return apply_ramp(base, removal, drop);
}

}  // namespace prosub
