#pragma once

#include <cstddef>
#include <vector>

namespace prosub {

// Channelwise mask over the N measurements. Entries stay in [0,1]; fully
// removed measurements sit at exactly 0, untouched ones at exactly 1, and
// fractional values appear only while a removal is being annealed.
struct Mask {
    std::vector<double> values;

    Mask() = default;
    explicit Mask(size_t n, double fill = 1.0) : values(n, fill) {}

    size_t size() const { return values.size(); }
    size_t active_count() const;
    bool is_active(size_t j) const { return values[j] == 1.0; }
    void validate() const;  // every entry in [0,1]
};

// Exponentially averaged per-measurement score across RFE steps.
struct ScoreEma {
    std::vector<double> values;  // length N, starts at all zeros
    int step = 0;                // last applied step t, 0 before any update
    int total_steps = 0;         // T

    ScoreEma() = default;
    ScoreEma(size_t n, int T) : values(n, 0.0), step(0), total_steps(T) {}
};

// alpha_t = (T - t) / (T - 1)
double alpha(int t, int T);

// Elementwise alpha*s + (1-alpha)*prior.
std::vector<double> blend_scores(const std::vector<double>& prior,
                                 const std::vector<double>& s, double alpha_t);

// One per-step EMA update; t must be consecutive to ema.step.
ScoreEma ema_update(const ScoreEma& ema, const std::vector<double>& s_t, int t);

// Removal counts per step: zeros before stage two, then (active-M)/(T-T1+1)
// spread with the remainder assigned to the earlier steps; sums to active-M.
// `active` is the number of live measurements when the run starts (equals N
// for a cold run, fewer when warm-starting from a previous target).
std::vector<size_t> removal_counts(size_t active, size_t target_m, int T, int T1);

struct RfeSchedule {
    size_t start_active = 0;  // live measurements at run start
    size_t target_m = 0;      // M
    int total_steps = 0;      // T
    int stage2_start = 0;     // T_1
    std::vector<size_t> counts;  // per-step D_t, length T
    int epochs = 0;              // E
    int anneal_window = 0;       // E_d
};

// Validates the whole schedule. T1 == T (single-shot removal) is an ablation
// variant and must be requested explicitly.
RfeSchedule make_schedule(size_t active, size_t target_m, int T, int T1, int epochs,
                          int anneal_window, bool allow_single_shot = false);

struct RemovalSet {
    int step = 0;
    std::vector<size_t> indices;  // ascending
};

// The D_t active indices with the smallest scores; ties broken by lower index.
// Only entries with mask value exactly 1 are candidates.
RemovalSet select_removals(const ScoreEma& ema, const Mask& mask, size_t d_t, int step);

// Eq.-style per-epoch ramp: entries being removed hold at 1 until e = E_d,
// fall linearly to 0 across e = E_d .. 2*E_d, and clamp at 0 after. All other
// entries are returned unchanged.
Mask anneal_mask(const Mask& base, const RemovalSet& removal, int epoch, int anneal_window);

// Variant used by the "no progressive subsampling" ablation: the ramp divisor
// is dropped, so removed entries cut to 0 one epoch after E_d.
Mask anneal_mask_instant(const Mask& base, const RemovalSet& removal, int epoch,
                         int anneal_window);

}  // namespace prosub
