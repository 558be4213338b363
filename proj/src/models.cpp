#include "prosub/models.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace prosub {

void DualModel::validate() const {
    scorer.validate();
    reconstructor.validate();
    size_t N = scorer.input_dim();
    if (scorer.output_dim() != N || reconstructor.input_dim() != N ||
        reconstructor.output_dim() != N) {
        throw std::invalid_argument("DualModel: scorer/reconstructor dims must all equal N");
    }
    if (scorer.layers.back().activation != Activation::scaled_sigmoid2) {
        throw std::invalid_argument("DualModel: scorer output activation must be 2*sigmoid");
    }
}

DualModel build_dual_model_widths(size_t n_measurements, const std::vector<size_t>& scorer_hidden,
                                  const std::vector<size_t>& recon_hidden, double dropout,
                                  Rng& rng) {
    DualModel m;
    m.scorer = make_mlp(n_measurements, scorer_hidden, n_measurements, Activation::relu,
                        Activation::scaled_sigmoid2, dropout, rng);
    m.reconstructor = make_mlp(n_measurements, recon_hidden, n_measurements, Activation::relu,
                               Activation::linear, dropout, rng);
    m.validate();
    return m;
}

DualModel build_dual_model(size_t n_measurements, const ArchSpec& arch, Rng& rng) {
    arch.validate();
    DualModel m = build_dual_model_widths(n_measurements, arch.scorer_widths(),
                                          arch.reconstructor_widths(), arch.dropout, rng);
    m.arch = arch;
    return m;
}

namespace {

std::vector<double> column_mean(const Matrix& m) {
    std::vector<double> mean(m.cols(), 0.0);
    for (size_t i = 0; i < m.rows(); ++i) {
        const double* row = m.row(i);
        for (size_t j = 0; j < m.cols(); ++j) mean[j] += row[j];
    }
    double inv = 1.0 / static_cast<double>(m.rows());
    for (double& v : mean) v *= inv;
    return mean;
}

// (mask .* x) .* score, both broadcast across rows
Matrix masked_scored_input(const Matrix& x, const Mask& mask, const std::vector<double>& score) {
    Matrix u(x.rows(), x.cols());
    for (size_t i = 0; i < x.rows(); ++i) {
        const double* xi = x.row(i);
        double* ui = u.row(i);
        for (size_t j = 0; j < x.cols(); ++j) ui[j] = mask.values[j] * xi[j] * score[j];
    }
    return u;
}

}  // namespace

std::vector<double> score_batch(const DualModel& model, const Matrix& batch) {
    model.validate();
    if (batch.cols() != model.n_measurements()) {
        throw std::invalid_argument("score_batch: batch cols != N");
    }
    return column_mean(forward_eval(model.scorer, batch));
}

PipelineGrads pipeline_forward_backward(const DualModel& model, const Matrix& batch,
                                        const Mask& mask_e, const std::vector<double>& prior,
                                        double alpha_t, bool train_mode, Rng& rng) {
    const size_t N = model.n_measurements();
    if (batch.cols() != N || mask_e.size() != N || prior.size() != N) {
        throw std::invalid_argument("pipeline: dimension mismatch");
    }
    const size_t B = batch.rows();

    ForwardResult s_fwd = forward(model.scorer, batch, train_mode, rng);
    std::vector<double> s_t = column_mean(s_fwd.output);
    std::vector<double> s_bar = blend_scores(prior, s_t, alpha_t);

    Matrix xm(B, N);
    for (size_t i = 0; i < B; ++i) {
        const double* xi = batch.row(i);
        double* mi = xm.row(i);
        for (size_t j = 0; j < N; ++j) mi[j] = mask_e.values[j] * xi[j];
    }
    Matrix u(B, N);
    for (size_t i = 0; i < B; ++i) {
        const double* mi = xm.row(i);
        double* ui = u.row(i);
        for (size_t j = 0; j < N; ++j) ui[j] = mi[j] * s_bar[j];
    }

    ForwardResult r_fwd = forward(model.reconstructor, u, train_mode, rng);

    PipelineGrads out;
    out.loss = l2_loss(r_fwd.output, batch);
    out.batch_score = s_t;

    Matrix d_xhat = l2_loss_grad(r_fwd.output, batch);
    out.reconstructor = backward(model.reconstructor, r_fwd.tape, d_xhat);

    // d loss / d s_bar[j] = sum_i dL/du(i,j) * xm(i,j)
    std::vector<double> d_sbar(N, 0.0);
    const Matrix& du = out.reconstructor.d_input;
    for (size_t i = 0; i < B; ++i) {
        const double* dui = du.row(i);
        const double* mi = xm.row(i);
        for (size_t j = 0; j < N; ++j) d_sbar[j] += dui[j] * mi[j];
    }
    // through the EMA blend and the batch mean
    Matrix d_sout(B, N);
    for (size_t j = 0; j < N; ++j) {
        double g = alpha_t * d_sbar[j] / static_cast<double>(B);
        for (size_t i = 0; i < B; ++i) d_sout.at(i, j) = g;
    }
    out.scorer = backward(model.scorer, s_fwd.tape, d_sout);
    return out;
}

double pipeline_loss(const DualModel& model, const Matrix& x, const Mask& mask_e,
                     const std::vector<double>& prior, double alpha_t) {
    std::vector<double> s_t = score_batch(model, x);
    std::vector<double> s_bar = blend_scores(prior, s_t, alpha_t);
    Matrix u = masked_scored_input(x, mask_e, s_bar);
    Matrix x_hat = forward_eval(model.reconstructor, u);
    return l2_loss(x_hat, x);
}

Matrix reconstruct(const DualModel& model, const Matrix& x, const Mask& mask,
                   const std::vector<double>& score) {
    if (x.cols() != model.n_measurements() || mask.size() != x.cols() ||
        score.size() != x.cols()) {
        throw std::invalid_argument("reconstruct: dimension mismatch");
    }
    Matrix u = masked_scored_input(x, mask, score);
    return forward_eval(model.reconstructor, u);
}

namespace {

std::vector<std::vector<size_t>> make_batches(size_t n, size_t batch_size, Rng& rng) {
    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(order);
    std::vector<std::vector<size_t>> batches;
    for (size_t start = 0; start < n; start += batch_size) {
        size_t end = std::min(n, start + batch_size);
        batches.emplace_back(order.begin() + static_cast<long>(start),
                             order.begin() + static_cast<long>(end));
    }
    return batches;
}

}  // namespace

EpochStats train_epoch(DualModel& model, const Matrix& x, const Mask& mask_e,
                       const std::vector<double>& prior, double alpha_t,
                       AdamState& scorer_opt, AdamState& recon_opt, size_t batch_size,
                       Rng& rng) {
    if (batch_size == 0) throw std::invalid_argument("train_epoch: batch_size must be > 0");
    EpochStats stats;
    auto batches = make_batches(x.rows(), batch_size, rng);
    double loss_sum = 0.0;
    for (const auto& idx : batches) {
        Matrix batch = x.take_rows(idx);
        PipelineGrads g =
            pipeline_forward_backward(model, batch, mask_e, prior, alpha_t, true, rng);
        if (!std::isfinite(g.loss)) {
            throw TrialFailure("train_epoch: non-finite loss");
        }
        adam_step(model.scorer, g.scorer, scorer_opt);
        adam_step(model.reconstructor, g.reconstructor, recon_opt);
        loss_sum += g.loss;
        stats.last_batch_score = std::move(g.batch_score);
    }
    stats.train_loss = loss_sum / static_cast<double>(batches.size());
    return stats;
}

namespace {

Mask anneal_for_mode(AnnealMode mode, const Mask& base, const RemovalSet& removal, int epoch,
                     int window) {
    return mode == AnnealMode::progressive ? anneal_mask(base, removal, epoch, window)
                                           : anneal_mask_instant(base, removal, epoch, window);
}

}  // namespace

ProsubRun run_prosub(const Matrix& train_x, const Matrix& val_x, const ProsubConfig& cfg,
                     const ArchSpec& fixed_arch, GreedyTuner* tuner, const WarmStart* warm) {
    const size_t N = train_x.cols();
    const RfeSchedule& sched = cfg.schedule;
    if (val_x.cols() != N) throw std::invalid_argument("run_prosub: val/train width mismatch");
    if (train_x.rows() == 0 || val_x.rows() == 0) {
        throw std::invalid_argument("run_prosub: empty train or validation data");
    }

    Rng rng(cfg.seed);
    Mask mask(N, 1.0);
    ScoreEma ema(N, sched.total_steps);
    ArchSpec arch = fixed_arch;
    DualModel model;

    if (warm) {
        warm->model.validate();
        if (warm->model.n_measurements() != N || warm->mask.size() != N ||
            warm->score.size() != N) {
            throw std::invalid_argument("run_prosub: warm start dimension mismatch");
        }
        model = warm->model;
        arch = warm->model.arch;
        mask = warm->mask;
        ema.values = warm->score;
    } else {
        if (tuner) arch = tuner->propose_next();
        model = build_dual_model(N, arch, rng);
    }
    if (mask.active_count() != sched.start_active) {
        throw std::invalid_argument("run_prosub: schedule start_active != active mask entries");
    }

    AdamState scorer_opt = make_adam_state(model.scorer, cfg.lr);
    AdamState recon_opt = make_adam_state(model.reconstructor, cfg.lr);

    ProsubRun run;
    for (int t = 1; t <= sched.total_steps; ++t) {
        StepRecord rec;
        rec.step = t;
        rec.arch = arch;
        size_t d_t = sched.counts[static_cast<size_t>(t - 1)];
        rec.removals = d_t > 0 ? select_removals(ema, mask, d_t, t) : RemovalSet{t, {}};
        double a = alpha(t, sched.total_steps);

        bool failed = false;
        try {
            for (int e = 1; e <= sched.epochs; ++e) {
                Mask mask_e = anneal_for_mode(cfg.anneal, mask, rec.removals, e, sched.anneal_window);
                EpochStats stats = train_epoch(model, train_x, mask_e, ema.values, a,
                                               scorer_opt, recon_opt, cfg.batch_size, rng);
                rec.train_curve.push_back(stats.train_loss);
                rec.val_curve.push_back(pipeline_loss(model, val_x, mask_e, ema.values, a));
                if (e == sched.epochs) {
                    mask = mask_e;  // m_{t+1} = m_t^E, removed entries exactly 0
                    ema = ema_update(ema, stats.last_batch_score, t);
                }
            }
        } catch (const TrialFailure& tf) {
            if (!tuner) throw;
            failed = true;
            rec.ok = false;
            rec.error = tf.what();
            // Complete the step's bookkeeping so the mask schedule stays on
            // track: removals still land, the score carries over unchanged.
            mask = anneal_for_mode(cfg.anneal, mask, rec.removals, sched.epochs,
                                   sched.anneal_window);
            ema = ema_update(ema, ema.values, t);
        }

        rec.mask_end = mask.values;
        rec.score_end = ema.values;
        run.steps.push_back(rec);

        if (tuner) {
            tuner->record_trial(make_trial(arch, t, rec.train_curve, rec.val_curve, !failed));
            if (t < sched.total_steps) {
                ArchSpec next = tuner->propose_next();
                if (failed || !(next == arch)) {
                    arch = next;
                    model = build_dual_model(N, arch, rng);
                    scorer_opt = make_adam_state(model.scorer, cfg.lr);
                    recon_opt = make_adam_state(model.reconstructor, cfg.lr);
                }
            }
        }
    }

    if (mask.active_count() != sched.target_m) {
        throw std::logic_error("run_prosub: final mask does not hold exactly M ones");
    }
    mask.validate();
    run.mask = mask;
    run.score = ema;
    run.model = model;
    return run;
}

// ---------------------------------------------------------------------------
// SARDU-Net baseline

void SarduModel::validate() const {
    selector.validate();
    reconstructor.validate();
    size_t N = selector.input_dim();
    if (selector.output_dim() != N || reconstructor.input_dim() != N ||
        reconstructor.output_dim() != N) {
        throw std::invalid_argument("SarduModel: selector/reconstructor dims must equal N");
    }
    if (target_m < 1 || target_m >= N) {
        throw std::invalid_argument("SarduModel: target M must be in [1, N)");
    }
}

SarduModel build_sardu_model(size_t n_measurements, size_t target_m, const ArchSpec& arch,
                             Rng& rng) {
    arch.validate();
    SarduModel m;
    m.selector = make_mlp(n_measurements, arch.scorer_widths(), n_measurements,
                          Activation::relu, Activation::scaled_sigmoid2, arch.dropout, rng);
    m.reconstructor = make_mlp(n_measurements, arch.reconstructor_widths(), n_measurements,
                               Activation::relu, Activation::linear, arch.dropout, rng);
    m.target_m = target_m;
    m.arch = arch;
    m.validate();
    return m;
}

std::vector<size_t> sardu_keep_set(const std::vector<double>& w, size_t target_m) {
    if (target_m > w.size()) throw std::invalid_argument("sardu_keep_set: M > N");
    std::vector<size_t> order(w.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
        if (w[a] != w[b]) return w[a] > w[b];
        return a < b;
    });
    std::vector<size_t> keep(order.begin(), order.begin() + static_cast<long>(target_m));
    std::sort(keep.begin(), keep.end());
    return keep;
}

namespace {

Matrix sardu_masked_input(const Matrix& x, const std::vector<double>& w,
                          const std::vector<size_t>& keep) {
    std::vector<double> w_clamped(w.size(), 0.0);
    for (size_t j : keep) w_clamped[j] = w[j];
    Matrix u(x.rows(), x.cols());
    for (size_t i = 0; i < x.rows(); ++i) {
        const double* xi = x.row(i);
        double* ui = u.row(i);
        for (size_t j = 0; j < x.cols(); ++j) ui[j] = xi[j] * w_clamped[j];
    }
    return u;
}

}  // namespace

SarduForward sardu_forward(const SarduModel& model, const Matrix& batch) {
    model.validate();
    if (batch.cols() != model.n_measurements()) {
        throw std::invalid_argument("sardu_forward: batch cols != N");
    }
    std::vector<double> w = column_mean(forward_eval(model.selector, batch));
    std::vector<size_t> keep = sardu_keep_set(w, model.target_m);
    Matrix u = sardu_masked_input(batch, w, keep);
    Matrix x_hat = forward_eval(model.reconstructor, u);
    SarduForward out;
    out.loss = l2_loss(x_hat, batch);
    out.selected = std::move(keep);
    return out;
}

SarduEpochStats sardu_train_epoch(SarduModel& model, const Matrix& x, AdamState& sel_opt,
                                  AdamState& rec_opt, size_t batch_size, Rng& rng) {
    if (batch_size == 0) throw std::invalid_argument("sardu_train_epoch: batch_size must be > 0");
    SarduEpochStats stats;
    auto batches = make_batches(x.rows(), batch_size, rng);
    double loss_sum = 0.0;
    const size_t N = model.n_measurements();
    for (const auto& idx : batches) {
        Matrix batch = x.take_rows(idx);
        const size_t B = batch.rows();

        ForwardResult s_fwd = forward(model.selector, batch, true, rng);
        std::vector<double> w = column_mean(s_fwd.output);
        std::vector<size_t> keep = sardu_keep_set(w, model.target_m);
        Matrix u = sardu_masked_input(batch, w, keep);
        ForwardResult r_fwd = forward(model.reconstructor, u, true, rng);

        double loss = l2_loss(r_fwd.output, batch);
        if (!std::isfinite(loss)) throw TrialFailure("sardu_train_epoch: non-finite loss");

        Matrix d_xhat = l2_loss_grad(r_fwd.output, batch);
        Gradients rec_grads = backward(model.reconstructor, r_fwd.tape, d_xhat);

        // gradient reaches only the kept weights
        std::vector<double> d_w(N, 0.0);
        for (size_t j : keep) {
            double g = 0.0;
            for (size_t i = 0; i < B; ++i) {
                g += rec_grads.d_input.at(i, j) * batch.at(i, j);
            }
            d_w[j] = g;
        }
        Matrix d_sout(B, N);
        for (size_t j = 0; j < N; ++j) {
            double g = d_w[j] / static_cast<double>(B);
            for (size_t i = 0; i < B; ++i) d_sout.at(i, j) = g;
        }
        Gradients sel_grads = backward(model.selector, s_fwd.tape, d_sout);

        adam_step(model.selector, sel_grads, sel_opt);
        adam_step(model.reconstructor, rec_grads, rec_opt);
        loss_sum += loss;
        stats.batch_selections.push_back(std::move(keep));
    }
    stats.train_loss = loss_sum / static_cast<double>(batches.size());
    return stats;
}

std::vector<double> sardu_weights(const SarduModel& model, const Matrix& x) {
    return column_mean(forward_eval(model.selector, x));
}

double sardu_eval_mse(const SarduModel& model, const Matrix& x,
                      const std::vector<double>& frozen_w, const std::vector<size_t>& keep) {
    Matrix u = sardu_masked_input(x, frozen_w, keep);
    Matrix x_hat = forward_eval(model.reconstructor, u);
    return l2_loss(x_hat, x);
}

}  // namespace prosub
