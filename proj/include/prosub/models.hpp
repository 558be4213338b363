#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "prosub/adam.hpp"
#include "prosub/mlp.hpp"
#include "prosub/nas.hpp"
#include "prosub/subsample.hpp"

namespace prosub {

// A training step whose loss went non-finite. The NAS loop records it as a
// failed trial; fixed-architecture runs propagate it.
class TrialFailure : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Scoring network (N -> N, final activation 2*sigmoid) paired with the
// reconstruction network (N -> N, linear output).
struct DualModel {
    Mlp scorer;
    Mlp reconstructor;
    ArchSpec arch;

    size_t n_measurements() const { return scorer.input_dim(); }
    void validate() const;
};

DualModel build_dual_model(size_t n_measurements, const ArchSpec& arch, Rng& rng);

// Test-sized construction outside the NAS space (e.g. tiny widths for
// finite-difference checks).
DualModel build_dual_model_widths(size_t n_measurements, const std::vector<size_t>& scorer_hidden,
                                  const std::vector<size_t>& recon_hidden, double dropout,
                                  Rng& rng);

// Per-measurement score: arithmetic mean over the batch rows of the scorer's
// per-sample outputs. Every entry lies in (0,2).
std::vector<double> score_batch(const DualModel& model, const Matrix& batch);

// One pass of the dual-network pipeline on a batch:
//   s = mean_rows(S(x));  s_bar = alpha*s + (1-alpha)*prior;
//   x_hat = R((mask .* x) .* s_bar);  loss = l2(x_hat, x)
// Backward fills parameter gradients for both networks, with the scorer path
// running through the batch mean, the EMA blend and the score product.
struct PipelineGrads {
    double loss = 0.0;
    std::vector<double> batch_score;  // s before the EMA blend
    Gradients scorer;
    Gradients reconstructor;
};

PipelineGrads pipeline_forward_backward(const DualModel& model, const Matrix& batch,
                                        const Mask& mask_e, const std::vector<double>& prior,
                                        double alpha_t, bool train_mode, Rng& rng);

// Forward-only loss of the same pipeline (eval mode, no dropout).
double pipeline_loss(const DualModel& model, const Matrix& x, const Mask& mask_e,
                     const std::vector<double>& prior, double alpha_t);

// x_hat = R((mask .* x) .* score), eval mode; the inference contract for a
// finished run (frozen mask and score).
Matrix reconstruct(const DualModel& model, const Matrix& x, const Mask& mask,
                   const std::vector<double>& score);

struct EpochStats {
    double train_loss = 0.0;                // mean over batches
    std::vector<double> last_batch_score;   // s from the final batch
};

// One training epoch: shuffled batches, Adam step through both networks per
// batch. The EMA prior is fixed for the whole step; each batch blends its own
// score against it.
EpochStats train_epoch(DualModel& model, const Matrix& x, const Mask& mask_e,
                       const std::vector<double>& prior, double alpha_t,
                       AdamState& scorer_opt, AdamState& recon_opt, size_t batch_size,
                       Rng& rng);

enum class AnnealMode {
    progressive,  // linear ramp over the annealing window
    instant,      // ablation: cut to zero one epoch past the window start
};

struct ProsubConfig {
    RfeSchedule schedule;
    double lr = 1e-3;
    size_t batch_size = 1500;
    AnnealMode anneal = AnnealMode::progressive;
    uint64_t seed = 1;
};

// Model, mask and score carried over from a previous target M.
struct WarmStart {
    DualModel model;
    Mask mask;
    std::vector<double> score;
};

struct StepRecord {
    int step = 0;
    ArchSpec arch;
    RemovalSet removals;
    std::vector<double> train_curve;
    std::vector<double> val_curve;
    std::vector<double> mask_end;    // m_{t+1}
    std::vector<double> score_end;   // cached s_bar_t
    bool ok = true;
    std::string error;
};

struct ProsubRun {
    Mask mask;       // exactly M ones at return
    ScoreEma score;  // s_bar_T
    DualModel model;
    std::vector<StepRecord> steps;
};

// The full outer/inner loop: T steps; no removals before stage two; removals
// chosen from the EMA score at step start and annealed across the step's
// epochs. With a tuner, each finished step is recorded as a trial and the next
// step's architecture is the tuner's proposal (fresh weights when it differs
// from the current one); a failed step becomes a failed trial. Without a
// tuner the architecture is fixed, weights persist across steps, and a failed
// step propagates as TrialFailure.
ProsubRun run_prosub(const Matrix& train_x, const Matrix& val_x, const ProsubConfig& cfg,
                     const ArchSpec& fixed_arch, GreedyTuner* tuner = nullptr,
                     const WarmStart* warm = nullptr);

// ---------------------------------------------------------------------------
// SARDU-Net baseline: selector weights, hard clamp of the N-M smallest per
// batch, reconstruction from x .* w.

struct SarduModel {
    Mlp selector;        // N -> N, final 2*sigmoid
    Mlp reconstructor;   // N -> N, linear output
    size_t target_m = 0;
    ArchSpec arch;

    size_t n_measurements() const { return selector.input_dim(); }
    void validate() const;
};

SarduModel build_sardu_model(size_t n_measurements, size_t target_m, const ArchSpec& arch,
                             Rng& rng);

// Indices kept by the clamp: the M largest weights, ties keeping the lower
// index. Returned ascending.
std::vector<size_t> sardu_keep_set(const std::vector<double>& w, size_t target_m);

struct SarduForward {
    double loss = 0.0;
    std::vector<size_t> selected;
};

// Eval-mode forward on one batch; the selection is recomputed per batch,
// which is the baseline's instability mechanism.
SarduForward sardu_forward(const SarduModel& model, const Matrix& batch);

struct SarduEpochStats {
    double train_loss = 0.0;
    std::vector<std::vector<size_t>> batch_selections;
};

SarduEpochStats sardu_train_epoch(SarduModel& model, const Matrix& x, AdamState& sel_opt,
                                  AdamState& rec_opt, size_t batch_size, Rng& rng);

// Batch-mean selector weights in eval mode (used to freeze a final selection).
std::vector<double> sardu_weights(const SarduModel& model, const Matrix& x);

// Reconstruction MSE with weights and keep set frozen from training data.
double sardu_eval_mse(const SarduModel& model, const Matrix& x,
                      const std::vector<double>& frozen_w, const std::vector<size_t>& keep);

}  // namespace prosub
