#include "prosub/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "json.hpp"
#include "prosub/checkpoint.hpp"

namespace prosub {

namespace fs = std::filesystem;
using nlohmann::json;

const char* method_name(Method m) {
    switch (m) {
        case Method::prosub: return "prosub";
        case Method::prosub_no_nas: return "prosub-no-nas";
        case Method::sardu: return "sardu";
        case Method::sardu_bof: return "sardu-bof";
        case Method::sardu_nas: return "sardu-nas";
    }
    return "?";
}

Method method_from_name(const std::string& name) {
    if (name == "prosub") return Method::prosub;
    if (name == "prosub-no-nas") return Method::prosub_no_nas;
    if (name == "sardu") return Method::sardu;
    if (name == "sardu-bof") return Method::sardu_bof;
    if (name == "sardu-nas") return Method::sardu_nas;
    throw std::invalid_argument("unknown method: " + name);
}

void ExperimentConfig::validate() const {
    if (!data_path && !synthetic) {
        throw std::invalid_argument("config: need a dataset path or a synthetic spec");
    }
    if (data_path && synthetic) {
        throw std::invalid_argument("config: dataset path and synthetic spec are exclusive");
    }
    if (m_schedule.empty()) throw std::invalid_argument("config: empty M schedule");
    for (size_t i = 1; i < m_schedule.size(); ++i) {
        if (m_schedule[i] >= m_schedule[i - 1]) {
            throw std::invalid_argument("config: M schedule must be strictly descending");
        }
    }
    if (epochs < 1 || anneal_window < 1) throw std::invalid_argument("config: bad epoch counts");
    if (batch_size < 1) throw std::invalid_argument("config: bad batch size");
    if (n_folds < 1) throw std::invalid_argument("config: bad fold count");
    if (bof_runs < 1) throw std::invalid_argument("config: bad BOF run count");
    fixed_arch.validate();
}

NormalizationSpec::Mode ExperimentConfig::effective_norm_mode() const {
    if (norm_mode) return *norm_mode;
    switch (method) {
        case Method::prosub:
        case Method::prosub_no_nas:
            return NormalizationSpec::Mode::per_measurement_max99;
        default:
            return NormalizationSpec::Mode::global_max99;
    }
}

void RunReport::validate(size_t n_measurements) const {
    if (selected.size() != target_m) {
        throw std::logic_error("report: selected index count != M");
    }
    std::set<size_t> uniq(selected.begin(), selected.end());
    if (uniq.size() != selected.size()) throw std::logic_error("report: duplicate selection");
    for (size_t j : selected) {
        if (j >= n_measurements) throw std::logic_error("report: selection out of range");
    }
}

double evaluate_mse(const DualModel& model, const Mask& mask, const std::vector<double>& score,
                    const Matrix& x) {
    Matrix x_hat = reconstruct(model, x, mask, score);
    return l2_loss(x_hat, x);
}

double max_upward_jump(const std::vector<double>& series) {
    double jump = 0.0;
    for (size_t i = 1; i < series.size(); ++i) {
        jump = std::max(jump, series[i] - series[i - 1]);
    }
    return jump;
}

// ---------------------------------------------------------------------------
// JSON helpers

namespace {

json arch_to_json(const ArchSpec& a) {
    return json{{"scorer_hidden_layers", a.scorer_hidden_layers},
                {"reconstructor_hidden_layers", a.reconstructor_hidden_layers},
                {"scorer_units", a.scorer_units},
                {"reconstructor_units", a.reconstructor_units},
                {"dropout", a.dropout}};
}

ArchSpec arch_from_json(const json& j) {
    ArchSpec a;
    a.scorer_hidden_layers = j.at("scorer_hidden_layers").get<int>();
    a.reconstructor_hidden_layers = j.at("reconstructor_hidden_layers").get<int>();
    auto su = j.at("scorer_units").get<std::vector<int>>();
    auto ru = j.at("reconstructor_units").get<std::vector<int>>();
    if (su.size() != 2 || ru.size() != 2) throw std::invalid_argument("arch: bad unit arrays");
    a.scorer_units = {su[0], su[1]};
    a.reconstructor_units = {ru[0], ru[1]};
    a.dropout = j.at("dropout").get<double>();
    return a;
}

json norm_to_json(const NormalizationSpec& spec) {
    return json{{"mode", normalization_mode_name(spec.mode)}, {"divisors", spec.divisors}};
}

NormalizationSpec norm_from_json(const json& j) {
    NormalizationSpec spec;
    spec.mode = normalization_mode_from_name(j.at("mode").get<std::string>());
    spec.divisors = j.at("divisors").get<std::vector<double>>();
    return spec;
}

json trial_to_json(const TrialSummary& t, bool with_curves) {
    json j{{"step", t.step},
           {"arch", arch_to_json(t.arch)},
           {"objective", t.ok ? json(t.objective) : json(nullptr)},
           {"status", t.ok ? "ok" : "failed"}};
    if (with_curves) {
        j["train_curve"] = t.train_curve;
        j["val_curve"] = t.val_curve;
    }
    return j;
}

json report_to_json(const RunReport& r) {
    json j;
    j["method"] = r.method;
    j["fold"] = r.fold;
    j["target_m"] = r.target_m;
    j["seed"] = r.seed;
    j["selected"] = r.selected;
    j["final_score"] = r.final_score;
    j["masks_per_step"] = r.masks_per_step;
    j["scores_per_step"] = r.scores_per_step;
    j["val_mse"] = r.val_mse;
    j["test_mse"] = r.test_mse;
    j["warm_initial_val"] = r.warm_initial_val ? json(*r.warm_initial_val) : json(nullptr);
    j["prev_stage_final_val"] =
        r.prev_stage_final_val ? json(*r.prev_stage_final_val) : json(nullptr);
    j["total_epochs"] = r.total_epochs;
    j["wall_seconds"] = r.wall_seconds;
    j["checkpoint_dir"] = r.checkpoint_dir;
    json trials = json::array();
    for (const auto& t : r.trials) trials.push_back(trial_to_json(t, false));
    j["trials"] = trials;
    return j;
}

}  // namespace

// ---------------------------------------------------------------------------
// checkpoints

void save_checkpoint(const Checkpoint& cp, const std::string& dir) {
    fs::create_directories(dir);
    json state;
    state["method"] = cp.method;
    state["target_m"] = cp.target_m;
    state["stage_index"] = cp.stage_index;
    state["completed_steps"] = cp.completed_steps;
    state["mask"] = cp.mask.values;
    state["score"] = cp.score;
    state["normalization"] = cp.normalization ? norm_to_json(*cp.normalization) : json(nullptr);
    if (cp.sardu) {
        save_mlp(cp.sardu->selector, dir + "/scorer.net");
        save_mlp(cp.sardu->reconstructor, dir + "/reconstructor.net");
        state["arch"] = arch_to_json(cp.sardu->arch);
    } else {
        save_mlp(cp.model.scorer, dir + "/scorer.net");
        save_mlp(cp.model.reconstructor, dir + "/reconstructor.net");
        state["arch"] = arch_to_json(cp.model.arch);
    }
    std::ofstream os(dir + "/state.json");
    os << state.dump(2) << "\n";
    if (!os) throw std::runtime_error("checkpoint: cannot write state.json in " + dir);
}

Checkpoint load_checkpoint(const std::string& dir) {
    std::ifstream is(dir + "/state.json");
    if (!is) throw std::runtime_error("checkpoint: missing state.json in " + dir);
    json state = json::parse(is);
    Checkpoint cp;
    cp.method = state.at("method").get<std::string>();
    cp.target_m = state.at("target_m").get<size_t>();
    cp.stage_index = state.value("stage_index", 0);
    cp.completed_steps = state.value("completed_steps", 0);
    cp.mask.values = state.at("mask").get<std::vector<double>>();
    cp.score = state.at("score").get<std::vector<double>>();
    if (!state.at("normalization").is_null()) {
        cp.normalization = norm_from_json(state.at("normalization"));
    }
    ArchSpec arch = arch_from_json(state.at("arch"));
    Mlp first = load_mlp(dir + "/scorer.net");
    Mlp second = load_mlp(dir + "/reconstructor.net");
    if (cp.method.rfind("sardu", 0) == 0) {
        SarduModel sm;
        sm.selector = std::move(first);
        sm.reconstructor = std::move(second);
        sm.target_m = cp.target_m;
        sm.arch = arch;
        sm.validate();
        cp.sardu = std::move(sm);
    } else {
        cp.model.scorer = std::move(first);
        cp.model.reconstructor = std::move(second);
        cp.model.arch = arch;
        cp.model.validate();
    }
    return cp;
}

// ---------------------------------------------------------------------------
// stage runners

namespace {

struct StageData {
    const Matrix* train;
    const Matrix* val;
    const Matrix* test;
};

std::vector<size_t> mask_selected(const Mask& mask) {
    std::vector<size_t> out;
    for (size_t j = 0; j < mask.size(); ++j) {
        if (mask.values[j] == 1.0) out.push_back(j);
    }
    return out;
}

TrialSummary step_to_trial(const StepRecord& s) {
    TrialSummary t;
    t.arch = s.arch;
    t.step = s.step;
    t.ok = s.ok;
    t.train_curve = s.train_curve;
    t.val_curve = s.val_curve;
    t.objective = s.ok && !s.val_curve.empty()
                      ? *std::min_element(s.val_curve.begin(), s.val_curve.end())
                      : std::numeric_limits<double>::infinity();
    return t;
}

RunReport run_prosub_stage(const ExperimentConfig& cfg, const StageData& data, size_t target_m,
                           int fold, uint64_t seed, const StagePlan& plan,
                           const WarmStart* warm, ProsubRun* out_run) {
    size_t active = warm ? warm->mask.active_count() : data.train->cols();
    ProsubConfig pc;
    pc.schedule = make_schedule(active, target_m, plan.t, plan.t1, cfg.epochs,
                                cfg.anneal_window, cfg.single_shot_ablation);
    pc.lr = cfg.lr;
    pc.batch_size = cfg.batch_size;
    pc.anneal = cfg.anneal;
    pc.seed = seed;

    std::optional<GreedyTuner> tuner;
    if (cfg.method == Method::prosub) {
        ArchSpec cold = warm ? warm->model.arch : cfg.fixed_arch;
        tuner.emplace(mix64(seed ^ 0x9a5), cfg.exploration_prob, /*search_dropout=*/false, cold);
    }
    ProsubRun run = run_prosub(*data.train, *data.val, pc, cfg.fixed_arch,
                               tuner ? &*tuner : nullptr, warm);

    RunReport rep;
    rep.method = method_name(cfg.method);
    rep.fold = fold;
    rep.target_m = target_m;
    rep.seed = seed;
    rep.selected = mask_selected(run.mask);
    rep.final_score = run.score.values;
    for (const auto& s : run.steps) {
        rep.masks_per_step.push_back(s.mask_end);
        rep.scores_per_step.push_back(s.score_end);
        rep.trials.push_back(step_to_trial(s));
        rep.total_epochs += static_cast<long>(s.train_curve.size());
    }
    rep.val_mse = evaluate_mse(run.model, run.mask, run.score.values, *data.val);
    rep.test_mse = evaluate_mse(run.model, run.mask, run.score.values, *data.test);
    if (out_run) *out_run = std::move(run);
    return rep;
}

struct SarduStage {
    SarduModel model;
    std::vector<double> frozen_w;
    std::vector<size_t> keep;
    RunReport report;
};

SarduStage train_sardu_once(const ExperimentConfig& cfg, const StageData& data, size_t target_m,
                            int fold, uint64_t seed, const ArchSpec& arch, int epochs) {
    Rng rng(seed);
    SarduStage st;
    st.model = build_sardu_model(data.train->cols(), target_m, arch, rng);
    AdamState sel_opt = make_adam_state(st.model.selector, cfg.lr);
    AdamState rec_opt = make_adam_state(st.model.reconstructor, cfg.lr);
    TrialSummary trial;
    trial.arch = arch;
    trial.step = 1;
    for (int e = 1; e <= epochs; ++e) {
        SarduEpochStats stats =
            sardu_train_epoch(st.model, *data.train, sel_opt, rec_opt, cfg.batch_size, rng);
        trial.train_curve.push_back(stats.train_loss);
        trial.val_curve.push_back(sardu_forward(st.model, *data.val).loss);
    }
    trial.objective = *std::min_element(trial.val_curve.begin(), trial.val_curve.end());

    st.frozen_w = sardu_weights(st.model, *data.train);
    st.keep = sardu_keep_set(st.frozen_w, target_m);

    RunReport& rep = st.report;
    rep.method = method_name(cfg.method);
    rep.fold = fold;
    rep.target_m = target_m;
    rep.seed = seed;
    rep.selected = st.keep;
    rep.final_score = st.frozen_w;
    std::vector<double> mask(data.train->cols(), 0.0);
    for (size_t j : st.keep) mask[j] = 1.0;
    rep.masks_per_step.push_back(mask);
    rep.scores_per_step.push_back(st.frozen_w);
    rep.trials.push_back(trial);
    rep.total_epochs = epochs;
    rep.val_mse = sardu_eval_mse(st.model, *data.val, st.frozen_w, st.keep);
    rep.test_mse = sardu_eval_mse(st.model, *data.test, st.frozen_w, st.keep);
    return st;
}

SarduStage run_sardu_nas_stage(const ExperimentConfig& cfg, const StageData& data,
                               size_t target_m, int fold, uint64_t seed, int rounds) {
    ArchSpec cold = cfg.fixed_arch;
    GreedyTuner tuner(mix64(seed ^ 0x5a7), cfg.exploration_prob, /*search_dropout=*/true, cold);
    std::optional<SarduStage> best;
    std::vector<TrialSummary> trials;
    long total_epochs = 0;
    for (int r = 1; r <= rounds; ++r) {
        ArchSpec arch = tuner.propose_next();
        SarduStage cand;
        bool ok = true;
        std::string error;
        try {
            cand = train_sardu_once(cfg, data, target_m, fold, mix64(seed + 31 * r), arch,
                                    cfg.epochs);
        } catch (const TrialFailure& tf) {
            ok = false;
            error = tf.what();
        }
        TrialSummary ts;
        ts.arch = arch;
        ts.step = r;
        ts.ok = ok;
        if (ok) {
            ts.train_curve = cand.report.trials[0].train_curve;
            ts.val_curve = cand.report.trials[0].val_curve;
            ts.objective = cand.report.trials[0].objective;
            total_epochs += cfg.epochs;
            if (!best || cand.report.val_mse < best->report.val_mse) best = std::move(cand);
        } else {
            ts.objective = std::numeric_limits<double>::infinity();
        }
        trials.push_back(ts);
        tuner.record_trial(make_trial(arch, r, ts.train_curve, ts.val_curve, ok));
    }
    if (!best) throw std::runtime_error("sardu-nas: every round failed");
    best->report.method = method_name(cfg.method);
    best->report.trials = std::move(trials);
    best->report.total_epochs = total_epochs;
    return std::move(*best);
}

void write_run_files(const RunReport& rep, const std::string& run_dir) {
    fs::create_directories(run_dir);
    {
        std::ofstream os(run_dir + "/report.json");
        os << report_to_json(rep).dump(2) << "\n";
        if (!os) throw std::runtime_error("emit: cannot write report.json in " + run_dir);
    }
    {
        std::ofstream os(run_dir + "/trials.jsonl");
        for (const auto& t : rep.trials) os << trial_to_json(t, true).dump() << "\n";
    }
    char buf[64];
    for (size_t k = 0; k < rep.trials.size(); ++k) {
        const TrialSummary& t = rep.trials[k];
        std::snprintf(buf, sizeof(buf), "%s/loss_trial%02zu.csv", run_dir.c_str(), k);
        std::ofstream os(buf);
        os << "epoch,train_loss,val_loss\n";
        for (size_t e = 0; e < t.train_curve.size(); ++e) {
            char row[96];
            double v = e < t.val_curve.size() ? t.val_curve[e] : std::nan("");
            std::snprintf(row, sizeof(row), "%zu,%.17g,%.17g\n", e + 1, t.train_curve[e], v);
            os << row;
        }
    }
    {
        std::ofstream os(run_dir + "/selected.txt");
        for (size_t j : rep.selected) os << j << "\n";
    }
}

std::string run_dir_for(const std::string& root, int fold, size_t m) {
    std::ostringstream os;
    os << root << "/fold" << fold << "/M" << m;
    return os.str();
}

}  // namespace

RunReport best_of_five(const ExperimentConfig& cfg, const MeasurementDataset& train,
                       const MeasurementDataset& val, const MeasurementDataset& test,
                       size_t target_m, int fold) {
    StageData data{&train.samples, &val.samples, &test.samples};
    std::optional<SarduStage> best;
    for (int r = 0; r < cfg.bof_runs; ++r) {
        uint64_t seed = mix64(cfg.seed ^ mix64(0xb0f + 977u * static_cast<unsigned>(fold)) + r);
        SarduStage st =
            train_sardu_once(cfg, data, target_m, fold, seed, cfg.fixed_arch, cfg.epochs);
        if (!cfg.out_dir.empty()) {
            std::string cand_dir = run_dir_for(cfg.out_dir, fold, target_m) + "/candidates/run" +
                                   std::to_string(r);
            write_run_files(st.report, cand_dir);
        }
        if (!best || st.report.val_mse < best->report.val_mse) best = std::move(st);
    }
    best->report.total_epochs = static_cast<long>(cfg.bof_runs) * cfg.epochs;
    if (!cfg.out_dir.empty()) {
        best->report.checkpoint_dir = run_dir_for(cfg.out_dir, fold, target_m) + "/checkpoint";
        Checkpoint cp;
        cp.method = best->report.method;
        cp.target_m = target_m;
        cp.sardu = best->model;
        cp.mask.values = best->report.masks_per_step[0];
        cp.score = best->frozen_w;
        cp.normalization = train.normalization;
        save_checkpoint(cp, best->report.checkpoint_dir);
    }
    return std::move(best->report);
}

std::vector<RunReport> run_sequential(const ExperimentConfig& cfg) {
    cfg.validate();
    MeasurementDataset raw =
        cfg.synthetic ? generate_synthetic(*cfg.synthetic) : load_dataset(*cfg.data_path);
    raw.validate();
    if (raw.normalization) {
        throw std::invalid_argument("run_sequential: input dataset is already normalized");
    }
    const size_t N = raw.n_measurements();
    for (size_t m : cfg.m_schedule) {
        if (m >= N) throw std::invalid_argument("config: every target M must be below N");
    }
    if (!cfg.out_dir.empty()) {
        fs::create_directories(cfg.out_dir);
        if (cfg.synthetic) save_dataset(raw, cfg.out_dir + "/dataset.osds");
    }

    std::vector<CvSplit> folds = make_folds(raw.subject_ids, cfg.n_folds);
    if (cfg.only_fold && (*cfg.only_fold < 0 || *cfg.only_fold >= cfg.n_folds)) {
        throw std::invalid_argument("config: fold index outside [0, folds)");
    }
    std::vector<RunReport> reports;

    for (int fold = 0; fold < static_cast<int>(folds.size()); ++fold) {
        if (cfg.only_fold && *cfg.only_fold != fold) continue;
        const CvSplit& split = folds[static_cast<size_t>(fold)];
        MeasurementDataset train_raw = raw.subset_by_subjects(split.train_subjects);
        auto [train, norm] = normalize(train_raw, cfg.effective_norm_mode());
        MeasurementDataset val =
            apply_normalization(raw.subset_by_subjects(split.validation_subjects), norm);
        MeasurementDataset test =
            apply_normalization(raw.subset_by_subjects(split.test_subjects), norm);
        StageData data{&train.samples, &val.samples, &test.samples};

        std::optional<WarmStart> warm;
        std::optional<double> prev_final_val;
        std::string prev_checkpoint;

        for (size_t stage = 0; stage < cfg.m_schedule.size(); ++stage) {
            size_t target_m = cfg.m_schedule[stage];
            const StagePlan& plan = stage == 0 ? cfg.first_stage : cfg.later_stage;
            uint64_t stage_seed =
                mix64(cfg.seed ^ mix64(0x517ec1ULL + 2654435761ULL * static_cast<uint64_t>(fold) +
                                       7919ULL * stage));
            auto t0 = std::chrono::steady_clock::now();

            auto run_stage = [&]() -> RunReport {
                if (cfg.method == Method::prosub || cfg.method == Method::prosub_no_nas) {
                    // Reload the previous stage from disk when available so the
                    // warm-start chain exercises the checkpoint path.
                    if (!prev_checkpoint.empty()) {
                        Checkpoint cp = load_checkpoint(prev_checkpoint);
                        warm = WarmStart{cp.model, cp.mask, cp.score};
                    }
                    std::optional<double> warm_initial;
                    if (warm) {
                        warm_initial =
                            evaluate_mse(warm->model, warm->mask, warm->score, *data.val);
                    }
                    ProsubRun run;
                    RunReport rep = run_prosub_stage(cfg, data, target_m, fold, stage_seed, plan,
                                                     warm ? &*warm : nullptr, &run);
                    rep.warm_initial_val = warm_initial;
                    rep.prev_stage_final_val = prev_final_val;

                    warm = WarmStart{run.model, run.mask, run.score.values};
                    prev_final_val = rep.val_mse;
                    if (!cfg.out_dir.empty()) {
                        std::string cp_dir =
                            run_dir_for(cfg.out_dir, fold, target_m) + "/checkpoint";
                        Checkpoint cp;
                        cp.method = rep.method;
                        cp.target_m = target_m;
                        cp.stage_index = static_cast<int>(stage);
                        cp.completed_steps = plan.t;
                        cp.model = run.model;
                        cp.mask = run.mask;
                        cp.score = run.score.values;
                        cp.normalization = norm;
                        save_checkpoint(cp, cp_dir);
                        rep.checkpoint_dir = cp_dir;
                        prev_checkpoint = cp_dir;
                    }
                    return rep;
                }
                if (cfg.method == Method::sardu) {
                    SarduStage st = train_sardu_once(cfg, data, target_m, fold, stage_seed,
                                                     cfg.fixed_arch, cfg.epochs);
                    RunReport rep = st.report;
                    if (!cfg.out_dir.empty()) {
                        rep.checkpoint_dir =
                            run_dir_for(cfg.out_dir, fold, target_m) + "/checkpoint";
                        Checkpoint cp;
                        cp.method = rep.method;
                        cp.target_m = target_m;
                        cp.stage_index = static_cast<int>(stage);
                        cp.completed_steps = 1;
                        cp.sardu = st.model;
                        cp.mask.values = rep.masks_per_step[0];
                        cp.score = st.frozen_w;
                        cp.normalization = norm;
                        save_checkpoint(cp, rep.checkpoint_dir);
                    }
                    return rep;
                }
                if (cfg.method == Method::sardu_bof) {
                    return best_of_five(cfg, train, val, test, target_m, fold);
                }
                SarduStage st = run_sardu_nas_stage(cfg, data, target_m, fold, stage_seed,
                                                    cfg.later_stage.t);
                if (!cfg.out_dir.empty()) {
                    st.report.checkpoint_dir =
                        run_dir_for(cfg.out_dir, fold, target_m) + "/checkpoint";
                    Checkpoint cp;
                    cp.method = st.report.method;
                    cp.target_m = target_m;
                    cp.stage_index = static_cast<int>(stage);
                    cp.completed_steps = cfg.later_stage.t;
                    cp.sardu = st.model;
                    cp.mask.values = st.report.masks_per_step[0];
                    cp.score = st.frozen_w;
                    cp.normalization = norm;
                    save_checkpoint(cp, st.report.checkpoint_dir);
                }
                return st.report;
            };

            RunReport rep;
            try {
                rep = run_stage();
            } catch (const std::exception& ex) {
                // Record the failure and abort this fold's remaining targets:
                // the warm-start chain is broken.
                if (!cfg.out_dir.empty()) {
                    std::string run_dir = run_dir_for(cfg.out_dir, fold, target_m);
                    fs::create_directories(run_dir);
                    std::ofstream os(run_dir + "/failed.txt");
                    os << ex.what() << "\n";
                }
                break;
            }

            rep.wall_seconds =
                std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            rep.validate(N);
            reports.push_back(std::move(rep));
        }
    }

    if (!cfg.out_dir.empty()) emit_reports(reports, cfg.out_dir);
    return reports;
}

void emit_reports(const std::vector<RunReport>& reports, const std::string& dir) {
    fs::create_directories(dir);
    json summary = json::array();
    for (const auto& rep : reports) {
        write_run_files(rep, run_dir_for(dir, rep.fold, rep.target_m));
        summary.push_back(json{{"method", rep.method},
                               {"fold", rep.fold},
                               {"target_m", rep.target_m},
                               {"seed", rep.seed},
                               {"val_mse", rep.val_mse},
                               {"test_mse", rep.test_mse},
                               {"total_epochs", rep.total_epochs}});
    }
    std::ofstream os(dir + "/summary.json");
    os << summary.dump(2) << "\n";
    if (!os) throw std::runtime_error("emit: cannot write summary.json");
}

ComparisonResult compare_dirs(const std::string& dir_a, const std::string& dir_b) {
    auto collect = [](const std::string& dir) {
        std::map<std::string, double> out;
        std::ifstream is(dir + "/summary.json");
        if (!is) throw std::runtime_error("compare: missing summary.json in " + dir);
        json summary = json::parse(is);
        for (const auto& row : summary) {
            std::string key = "fold" + std::to_string(row.at("fold").get<int>()) + "/M" +
                              std::to_string(row.at("target_m").get<size_t>());
            out[key] = row.at("test_mse").get<double>();
        }
        return out;
    };
    auto a = collect(dir_a);
    auto b = collect(dir_b);
    std::vector<double> xs, ys;
    for (const auto& [key, va] : a) {
        auto it = b.find(key);
        if (it != b.end()) {
            xs.push_back(va);
            ys.push_back(it->second);
        }
    }
    if (xs.size() < 5) {
        throw std::runtime_error("compare: fewer than 5 shared (fold, M) pairs");
    }
    ComparisonResult res;
    res.pairs = xs.size();
    res.p_a_less_b = wilcoxon_one_sided(xs, ys);
    res.p_b_less_a = wilcoxon_one_sided(ys, xs);
    for (double v : xs) res.mean_a += v;
    for (double v : ys) res.mean_b += v;
    res.mean_a /= static_cast<double>(xs.size());
    res.mean_b /= static_cast<double>(ys.size());
    return res;
}

}  // namespace prosub
