#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "prosub/harness.hpp"

using namespace prosub;

namespace {

std::string slurp(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open " + path);
    std::ostringstream os;
    os << is.rdbuf();
    return os.str();
}

std::vector<size_t> parse_m_schedule(const std::string& csv) {
    std::vector<size_t> out;
    std::stringstream ss(csv);
    std::string cell;
    while (std::getline(ss, cell, ',')) out.push_back(std::stoul(cell));
    return out;
}

MeasurementDataset load_any_dataset(const std::string& path) {
    std::ifstream probe(path, std::ios::binary);
    char magic[4] = {};
    probe.read(magic, 4);
    if (probe && std::string(magic, 4) == "OSDS") return load_dataset(path);
    return load_dataset_csv(path);
}

int cmd_run(const std::string& data_path, const std::string& synthetic_path,
            const std::string& method, const std::string& m_schedule, int epochs,
            int anneal_window, size_t batch, double lr, uint64_t seed, int folds,
            int only_fold, const std::string& out, const std::string& norm,
            int t1_first, int t_first, int t1_rest, int t_rest, int scorer_layers,
            int recon_layers, const std::vector<int>& scorer_units,
            const std::vector<int>& recon_units, double exploration, int bof_runs,
            bool single_shot, bool instant_removal) {
    ExperimentConfig cfg;
    if (!data_path.empty()) cfg.data_path = data_path;
    if (!synthetic_path.empty()) cfg.synthetic = synthetic_spec_from_json(slurp(synthetic_path));
    cfg.method = method_from_name(method);
    cfg.m_schedule = parse_m_schedule(m_schedule);
    cfg.epochs = epochs;
    cfg.anneal_window = anneal_window;
    cfg.batch_size = batch;
    cfg.lr = lr;
    cfg.seed = seed;
    cfg.n_folds = folds;
    if (only_fold >= 0) cfg.only_fold = only_fold;
    cfg.out_dir = out;
    if (!norm.empty()) cfg.norm_mode = normalization_mode_from_name(norm);
    cfg.first_stage = {t1_first, t_first};
    cfg.later_stage = {t1_rest, t_rest};
    cfg.fixed_arch.scorer_hidden_layers = scorer_layers;
    cfg.fixed_arch.reconstructor_hidden_layers = recon_layers;
    cfg.fixed_arch.scorer_units = {scorer_units[0], scorer_units[1]};
    cfg.fixed_arch.reconstructor_units = {recon_units[0], recon_units[1]};
    cfg.exploration_prob = exploration;
    cfg.bof_runs = bof_runs;
    cfg.single_shot_ablation = single_shot;
    cfg.anneal = instant_removal ? AnnealMode::instant : AnnealMode::progressive;

    std::vector<RunReport> reports = run_sequential(cfg);
    for (const auto& r : reports) {
        std::printf("fold=%d M=%zu val_mse=%.6g test_mse=%.6g epochs=%ld (%.1fs)\n", r.fold,
                    r.target_m, r.val_mse, r.test_mse, r.total_epochs, r.wall_seconds);
    }
    return 0;
}

int cmd_evaluate(const std::string& checkpoint_dir, const std::string& data_path) {
    Checkpoint cp = load_checkpoint(checkpoint_dir);
    MeasurementDataset ds = load_any_dataset(data_path);
    if (!ds.normalization && cp.normalization) {
        ds = apply_normalization(ds, *cp.normalization);
    }
    double mse;
    if (cp.sardu) {
        std::vector<size_t> keep;
        for (size_t j = 0; j < cp.mask.size(); ++j) {
            if (cp.mask.values[j] == 1.0) keep.push_back(j);
        }
        mse = sardu_eval_mse(*cp.sardu, ds.samples, cp.score, keep);
    } else {
        mse = evaluate_mse(cp.model, cp.mask, cp.score, ds.samples);
    }
    nlohmann::json out{{"method", cp.method},
                       {"target_m", cp.target_m},
                       {"samples", ds.n()},
                       {"mse", mse}};
    std::cout << out.dump(2) << "\n";
    return 0;
}

int cmd_compare(const std::string& dir_a, const std::string& dir_b) {
    ComparisonResult res = compare_dirs(dir_a, dir_b);
    std::printf("paired (fold, M) runs : %zu\n", res.pairs);
    std::printf("mean test MSE         : A=%.6g  B=%.6g\n", res.mean_a, res.mean_b);
    std::printf("Wilcoxon p (A < B)    : %.6g\n", res.p_a_less_b);
    std::printf("Wilcoxon p (B < A)    : %.6g\n", res.p_b_less_a);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"PROSUB: progressive subsampling for oversampled data"};
    app.require_subcommand(1);

    // run
    auto* run = app.add_subcommand("run", "train a method across the M schedule");
    std::string data_path, synthetic_path, method = "prosub", m_schedule, out, norm;
    int epochs = 200, anneal_window = 20, folds = 5, only_fold = -1;
    size_t batch = 1500;
    double lr = 1e-3, exploration = 0.25;
    uint64_t seed = 1;
    int t1_first = 4, t_first = 8, t1_rest = 1, t_rest = 5;
    int scorer_layers = 2, recon_layers = 2, bof_runs = 5;
    std::vector<int> scorer_units{1024, 1024}, recon_units{1024, 1024};
    bool single_shot = false, instant_removal = false;

    auto* data_opt = run->add_option("--data", data_path, "dataset file (OSDS binary or CSV)");
    auto* synth_opt =
        run->add_option("--synthetic", synthetic_path, "synthetic spec JSON file");
    data_opt->excludes(synth_opt);
    run->add_option("--method", method,
                    "prosub | prosub-no-nas | sardu | sardu-bof | sardu-nas");
    run->add_option("--m-schedule", m_schedule, "descending targets, e.g. 500,250,100")
        ->required();
    run->add_option("--epochs", epochs, "epochs per step (E)");
    run->add_option("--anneal-window", anneal_window, "mask annealing window (E_d)");
    run->add_option("--batch", batch, "batch size");
    run->add_option("--lr", lr, "Adam learning rate");
    run->add_option("--seed", seed, "experiment seed");
    run->add_option("--folds", folds, "cross-validation fold count");
    run->add_option("--fold", only_fold, "run a single fold index");
    run->add_option("--out", out, "output directory");
    run->add_option("--norm", norm, "global_max99 | per_measurement_max99");
    run->add_option("--t1-first", t1_first, "T_1 for the first target");
    run->add_option("--t-first", t_first, "T for the first target");
    run->add_option("--t1-rest", t1_rest, "T_1 for warm-started targets");
    run->add_option("--t-rest", t_rest, "T for warm-started targets");
    run->add_option("--scorer-layers", scorer_layers, "fixed arch: scorer hidden layers");
    run->add_option("--recon-layers", recon_layers, "fixed arch: reconstructor hidden layers");
    run->add_option("--scorer-units", scorer_units, "fixed arch: scorer units (two values)")
        ->expected(2);
    run->add_option("--recon-units", recon_units, "fixed arch: reconstructor units (two values)")
        ->expected(2);
    run->add_option("--exploration", exploration, "NAS exploration probability");
    run->add_option("--bof-runs", bof_runs, "runs for best-of-five");
    run->add_flag("--single-shot-ablation", single_shot, "allow T_1 == T (remove all at once)");
    run->add_flag("--instant-removal", instant_removal, "ablation: cut masks without the ramp");

    // evaluate
    auto* evaluate = app.add_subcommand("evaluate", "MSE of a checkpoint on a dataset");
    std::string checkpoint_dir, eval_data;
    evaluate->add_option("--checkpoint", checkpoint_dir, "checkpoint directory")->required();
    evaluate->add_option("--data", eval_data, "dataset file")->required();

    // compare
    auto* compare = app.add_subcommand("compare", "Wilcoxon comparison of two run directories");
    std::string dir_a, dir_b;
    compare->add_option("--a", dir_a, "first run directory")->required();
    compare->add_option("--b", dir_b, "second run directory")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) {
            return cmd_run(data_path, synthetic_path, method, m_schedule, epochs, anneal_window,
                           batch, lr, seed, folds, only_fold, out, norm, t1_first, t_first,
                           t1_rest, t_rest, scorer_layers, recon_layers, scorer_units,
                           recon_units, exploration, bof_runs, single_shot, instant_removal);
        }
        if (evaluate->parsed()) return cmd_evaluate(checkpoint_dir, eval_data);
        if (compare->parsed()) return cmd_compare(dir_a, dir_b);
    } catch (const std::exception& ex) {
        std::cerr << "error: " << ex.what() << "\n";
        return 1;
    }
    return 0;
}
