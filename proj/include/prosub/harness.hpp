#pragma once

#include <optional>
#include <string>
#include <vector>

#include "prosub/data.hpp"
#include "prosub/models.hpp"
#include "prosub/nas.hpp"
#include "prosub/stats.hpp"

namespace prosub {

enum class Method { prosub, prosub_no_nas, sardu, sardu_bof, sardu_nas };

const char* method_name(Method m);
Method method_from_name(const std::string& name);

struct StagePlan {
    int t1 = 4;
    int t = 8;
};

struct ExperimentConfig {
    std::optional<std::string> data_path;
    std::optional<SyntheticSpec> synthetic;
    Method method = Method::prosub;
    std::vector<size_t> m_schedule;  // strictly descending targets
    StagePlan first_stage{4, 8};     // first target
    StagePlan later_stage{1, 5};     // warm-started targets
    int epochs = 200;
    int anneal_window = 20;
    size_t batch_size = 1500;
    double lr = 1e-3;
    uint64_t seed = 1;
    int n_folds = 5;
    std::optional<int> only_fold;
    std::string out_dir;  // empty: nothing written
    std::optional<NormalizationSpec::Mode> norm_mode;  // default depends on method
    ArchSpec fixed_arch = default_arch();  // no-NAS runs and NAS cold start
    double exploration_prob = 0.25;
    int bof_runs = 5;
    bool single_shot_ablation = false;  // allows T1 == T stages
    AnnealMode anneal = AnnealMode::progressive;

    void validate() const;
    NormalizationSpec::Mode effective_norm_mode() const;
};

struct TrialSummary {
    ArchSpec arch;
    int step = 0;
    double objective = 0.0;
    bool ok = true;
    std::vector<double> train_curve;
    std::vector<double> val_curve;
};

struct RunReport {
    std::string method;
    int fold = 0;
    size_t target_m = 0;
    uint64_t seed = 0;
    std::vector<size_t> selected;  // exactly target_m indices, ascending
    std::vector<double> final_score;
    std::vector<std::vector<double>> masks_per_step;
    std::vector<std::vector<double>> scores_per_step;
    std::vector<TrialSummary> trials;
    double val_mse = 0.0;
    double test_mse = 0.0;
    // warm-start audit: validation loss recomputed from the reloaded previous
    // checkpoint before any training, against the previous stage's final value
    std::optional<double> warm_initial_val;
    std::optional<double> prev_stage_final_val;
    long total_epochs = 0;
    double wall_seconds = 0.0;
    std::string checkpoint_dir;

    void validate(size_t n_measurements) const;
};

// MSE of R((mask .* x) .* score) against x over all samples and measurements.
double evaluate_mse(const DualModel& model, const Mask& mask, const std::vector<double>& score,
                    const Matrix& x);

// Frozen artifacts of a finished stage, enough to warm-start the next target
// or evaluate held-out data.
struct Checkpoint {
    std::string method;
    size_t target_m = 0;
    int stage_index = 0;  // position in the M schedule
    int completed_steps = 0;
    DualModel model;           // prosub family
    std::optional<SarduModel> sardu;
    Mask mask;
    std::vector<double> score;
    std::optional<NormalizationSpec> normalization;
};

void save_checkpoint(const Checkpoint& cp, const std::string& dir);
Checkpoint load_checkpoint(const std::string& dir);

// Runs the configured method across the M schedule (warm-started for the
// prosub family) for each cross-validation fold; emits reports when out_dir
// is set.
std::vector<RunReport> run_sequential(const ExperimentConfig& cfg);

// Five seeded SARDU runs for one stage; returns the best-validation report.
// Candidate reports are all emitted under out_dir.
RunReport best_of_five(const ExperimentConfig& cfg, const MeasurementDataset& train,
                       const MeasurementDataset& val, const MeasurementDataset& test,
                       size_t target_m, int fold);

// report.json / trials.jsonl / loss_trial<k>.csv / selected.txt per run plus a
// top-level summary.json.
void emit_reports(const std::vector<RunReport>& reports, const std::string& dir);

// Largest upward jump between consecutive entries; the instability statistic.
double max_upward_jump(const std::vector<double>& series);

struct ComparisonResult {
    double p_a_less_b = 0.0;
    double p_b_less_a = 0.0;
    double mean_a = 0.0;
    double mean_b = 0.0;
    size_t pairs = 0;
};

// Pairs test MSEs by (fold, M) across two report directories.
ComparisonResult compare_dirs(const std::string& dir_a, const std::string& dir_b);

}  // namespace prosub
