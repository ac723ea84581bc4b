#include "imbalab/balance.hpp"

#include <algorithm>
#include <cmath>

#include "imbalab/csv.hpp"
#include "imbalab/errors.hpp"
#include "imbalab/rng.hpp"

namespace imbalab::balance {

LossKind loss_kind_from_string(const std::string& s) {
    if (s == "baseline") return LossKind::baseline;
    if (s == "imba") return LossKind::imba;
    if (s == "freq_weighted" || s == "freq") return LossKind::freq_weighted;
    throw ConfigError("unknown loss kind: " + s);
}

std::string to_string(LossKind k) {
    switch (k) {
    case LossKind::baseline: return "baseline";
    case LossKind::imba: return "imba";
    case LossKind::freq_weighted: return "freq_weighted";
    }
    return "?";
}

WeightMode weight_mode_from_string(const std::string& s) {
    if (s == "per_element") return WeightMode::per_element;
    if (s == "channel_mean") return WeightMode::channel_mean;
    if (s == "sample_scalar") return WeightMode::sample_scalar;
    throw ConfigError("unknown weight mode: " + s);
}

std::string to_string(WeightMode m) {
    switch (m) {
    case WeightMode::per_element: return "per_element";
    case WeightMode::channel_mean: return "channel_mean";
    case WeightMode::sample_scalar: return "sample_scalar";
    }
    return "?";
}

void LossConfig::validate() const {
    if (!(gamma >= 0.0)) throw ConfigError("loss: gamma must be >= 0");
    if (!(lambda >= 0.0 && lambda <= 1.0)) throw ConfigError("loss: lambda must be in [0, 1]");
    if (!(cond_drop_prob >= 0.0 && cond_drop_prob <= 1.0))
        throw ConfigError("loss: cond_drop_prob must be in [0, 1]");
    if (!(residual_floor >= 0.0)) throw ConfigError("loss: residual_floor must be >= 0");
}

ConceptStats ConceptStats::from_labels(std::span<const int> labels, int num_classes) {
    ConceptStats s;
    s.counts.assign(num_classes, 0);
    for (int l : labels) {
        if (l < 0 || l >= num_classes) throw InputError("concept stats: label out of range");
        s.counts[l] += 1;
    }
    s.total = static_cast<long>(labels.size());
    return s;
}

double ConceptStats::phi(int cls) const {
    if (cls < 0 || cls >= num_classes()) throw InputError("concept stats: class out of range");
    if (total <= 0) throw InputError("concept stats: empty");
    return static_cast<double>(counts[cls]) / static_cast<double>(total);
}

double freq_weight(int cls, const ConceptStats& stats) {
    if (cls < 0 || cls >= stats.num_classes())
        throw InputError("freq_weight: unseen class " + std::to_string(cls));
    if (stats.counts[cls] == 0)
        throw InputError("freq_weight: class " + std::to_string(cls) + " has zero count");
    const double uniform = 1.0 / stats.num_classes();
    return uniform / stats.phi(cls);
}

Matrix NoisyBatch::targets() const {
    Matrix t(n(), 2);
    for (int i = 0; i < n(); ++i) {
        if (objective == Objective::epsilon) {
            t(i, 0) = eps[i][0];
            t(i, 1) = eps[i][1];
        } else {
            t(i, 0) = eps[i][0] - x0[i][0];
            t(i, 1) = eps[i][1] - x0[i][1];
        }
    }
    return t;
}

NoisyBatch make_ddpm_batch(std::vector<Vec2> x0, std::vector<Vec2> eps, std::vector<int> t,
                           const NoiseSchedule& sched, std::vector<int> cond) {
    if (x0.size() != eps.size() || x0.size() != t.size() || x0.size() != cond.size())
        throw InputError("batch: array lengths differ");
    NoisyBatch b;
    b.objective = Objective::epsilon;
    b.x0 = std::move(x0);
    b.eps = std::move(eps);
    b.cond = std::move(cond);
    b.xt.resize(b.x0.size());
    b.t.resize(b.x0.size());
    b.t_norm.resize(b.x0.size());
    for (size_t i = 0; i < b.x0.size(); ++i) {
        b.xt[i] = diffusion::add_noise(b.x0[i], b.eps[i], t[i], sched);
        b.t[i] = static_cast<double>(t[i]);
        b.t_norm[i] = static_cast<double>(t[i]) / sched.T;
    }
    return b;
}

NoisyBatch make_flow_batch(std::vector<Vec2> x0, std::vector<Vec2> eps, std::vector<double> s,
                           std::vector<int> cond) {
    if (x0.size() != eps.size() || x0.size() != s.size() || x0.size() != cond.size())
        throw InputError("batch: array lengths differ");
    NoisyBatch b;
    b.objective = Objective::velocity;
    b.x0 = std::move(x0);
    b.eps = std::move(eps);
    b.cond = std::move(cond);
    b.xt.resize(b.x0.size());
    b.t = s;
    b.t_norm = std::move(s);
    for (size_t i = 0; i < b.x0.size(); ++i)
        b.xt[i] = diffusion::flow_interpolate(b.x0[i], b.eps[i], b.t_norm[i]).first;
    return b;
}

LossOut baseline_loss(const Matrix& pred, const Matrix& target) {
    if (!pred.same_shape(target)) throw InputError("baseline_loss: shape mismatch");
    const double inv_n = 1.0 / static_cast<double>(pred.data.size());
    LossOut out;
    out.dpred = Matrix(pred.rows, pred.cols);
    double acc = 0.0;
    for (size_t i = 0; i < pred.data.size(); ++i) {
        const double r = pred.data[i] - target.data[i];
        acc += r * r;
        out.dpred.data[i] = 2.0 * r * inv_n;
    }
    out.loss = acc * inv_n;
    return out;
}

double WeightTensor::sample_scalar(int i) const {
    if (mode != WeightMode::per_element) return w(i, 0);
    double acc = 0.0;
    for (int d = 0; d < w.cols; ++d) acc += w(i, d);
    return acc / w.cols;
}

double WeightTensor::mean() const {
    double acc = 0.0;
    for (double v : w.data) acc += v;
    return acc / static_cast<double>(w.data.size());
}

WeightTensor imba_distance(const Matrix& target, const Matrix& uncond_pred, double gamma,
                           WeightMode mode, double residual_floor) {
    if (!target.same_shape(uncond_pred)) throw InputError("imba_distance: shape mismatch");
    if (!(gamma >= 0.0)) throw ConfigError("imba_distance: gamma must be >= 0");

    Matrix elem(target.rows, target.cols);
    for (size_t i = 0; i < elem.data.size(); ++i) {
        const double r = std::max(std::abs(target.data[i] - uncond_pred.data[i]), residual_floor);
        elem.data[i] = std::pow(r, gamma);
    }

    WeightTensor out;
    out.mode = mode;
    if (mode == WeightMode::per_element) {
        out.w = std::move(elem);
        return out;
    }
    // channel_mean averages the coordinate (channel) dimension; sample_scalar
    // averages everything per sample. With one token per sample these agree.
    out.w = Matrix(target.rows, 1);
    for (int i = 0; i < target.rows; ++i) {
        double acc = 0.0;
        for (int d = 0; d < target.cols; ++d) acc += elem(i, d);
        out.w(i, 0) = acc / target.cols;
    }
    return out;
}

namespace {

void fill_class_weights(StepReport& rep, const std::vector<int>& cond, int num_classes,
                        const std::function<double(int)>& sample_weight) {
    rep.mean_weight.assign(num_classes, 0.0);
    rep.class_count.assign(num_classes, 0);
    for (size_t i = 0; i < cond.size(); ++i) {
        const int c = cond[i];
        if (c >= 0 && c < num_classes) {
            rep.mean_weight[c] += sample_weight(static_cast<int>(i));
            rep.class_count[c] += 1;
        }
    }
    for (int c = 0; c < num_classes; ++c)
        if (rep.class_count[c] > 0) rep.mean_weight[c] /= static_cast<double>(rep.class_count[c]);
}

} // namespace

std::pair<StepReport, nn::GradientBuffers> imba_step(const nn::ModelParams& params,
                                                     const NoisyBatch& batch,
                                                     const LossConfig& cfg) {
    if (cfg.kind != LossKind::imba) throw ConfigError("imba_step: config kind must be imba");
    cfg.validate();
    const int n = batch.n();
    const int null_c = params.layout.null_cond();

    const Matrix target = batch.targets();

    nn::ForwardCache cache_c, cache_u;
    const Matrix pred_c = nn::forward(params, batch.xt, batch.t_norm, batch.cond, &cache_c);
    std::vector<int> null_cond(n, null_c);
    const Matrix pred_u = nn::forward(params, batch.xt, batch.t_norm, null_cond, &cache_u);

    // Weights from the unconditional residual; plain values, no gradient path.
    const WeightTensor d =
        imba_distance(target, pred_u, cfg.gamma, cfg.weight_mode, cfg.residual_floor);

    const double inv_n = 1.0 / static_cast<double>(n * 2);
    double l_star = 0.0;
    Matrix dpred_c(n, 2);
    for (int i = 0; i < n; ++i) {
        for (int dd = 0; dd < 2; ++dd) {
            const double r = pred_c(i, dd) - target(i, dd);
            const double w = d.at(i, dd);
            l_star += w * r * r;
            dpred_c(i, dd) = cfg.lambda * 2.0 * w * r * inv_n;
        }
    }
    l_star *= inv_n;

    LossOut uncond = baseline_loss(pred_u, target);
    Matrix dpred_u = std::move(uncond.dpred);
    for (double& v : dpred_u.data) v *= (1.0 - cfg.lambda);

    StepReport rep;
    rep.l_star = l_star;
    rep.l_u = uncond.loss;
    rep.l = cfg.lambda * l_star + (1.0 - cfg.lambda) * uncond.loss;
    if (!std::isfinite(rep.l))
        throw NumericError("imba_step: non-finite loss (l_star=" + std::to_string(l_star) +
                           ", l_u=" + std::to_string(uncond.loss) + ")");
    fill_class_weights(rep, batch.cond, params.layout.num_classes,
                       [&](int i) { return d.sample_scalar(i); });

    nn::GradientBuffers grads = nn::GradientBuffers::like(params);
    nn::backward(params, cache_c, dpred_c, grads);
    nn::backward(params, cache_u, dpred_u, grads);
    rep.grad_norm = grads.l2_norm();
    return {rep, std::move(grads)};
}

namespace {

/// Shared step for the baseline and frequency-weighted kinds: per-sample
/// condition drop to null, per-sample scalar weights on the squared error.
std::pair<StepReport, nn::GradientBuffers> weighted_drop_step(
    const nn::ModelParams& params, const NoisyBatch& batch, const std::vector<int>& eff_cond,
    const std::vector<double>& sample_w, int num_classes) {
    const int n = batch.n();
    const Matrix target = batch.targets();

    nn::ForwardCache cache;
    const Matrix pred = nn::forward(params, batch.xt, batch.t_norm, eff_cond, &cache);

    const double inv_n = 1.0 / static_cast<double>(n * 2);
    double loss = 0.0;
    Matrix dpred(n, 2);
    for (int i = 0; i < n; ++i) {
        for (int d = 0; d < 2; ++d) {
            const double r = pred(i, d) - target(i, d);
            loss += sample_w[i] * r * r;
            dpred(i, d) = 2.0 * sample_w[i] * r * inv_n;
        }
    }
    loss *= inv_n;

    StepReport rep;
    // Single-loss kinds: the lambda-mixing identity holds with
    // l_star = l_u = l.
    rep.l_star = rep.l_u = rep.l = loss;
    if (!std::isfinite(rep.l)) throw NumericError("train step: non-finite loss");
    fill_class_weights(rep, batch.cond, num_classes, [&](int i) { return sample_w[i]; });

    nn::GradientBuffers grads = nn::GradientBuffers::like(params);
    nn::backward(params, cache, dpred, grads);
    rep.grad_norm = grads.l2_norm();
    return {rep, std::move(grads)};
}

} // namespace

TrainResult train(nn::ModelParams params, const LabeledDataset& data, const LossConfig& cfg,
                  const TrainPlan& plan) {
    cfg.validate();
    if (data.size() == 0) throw ConfigError("train: dataset is empty");
    if (plan.steps < 1) throw ConfigError("train: steps must be >= 1");
    if (plan.batch < 1) throw ConfigError("train: batch must be >= 1");
    if (plan.objective == Objective::epsilon && plan.schedule.T < 1)
        throw ConfigError("train: epsilon objective needs a noise schedule");
    data.validate(params.layout.num_classes);

    const ConceptStats stats = ConceptStats::from_labels(data.labels, params.layout.num_classes);
    const int null_c = params.layout.null_cond();

    if (plan.lr_final > plan.optimizer.lr)
        throw ConfigError("train: lr_final must not exceed the initial lr");

    Rng rng(mix_seed(plan.seed, 0x7261696eULL)); // "rain"
    nn::OptimizerState opt = nn::OptimizerState::like(params);
    nn::OptimizerConfig opt_cfg = plan.optimizer;

    TrainResult res;
    res.log.reserve(plan.steps);

    const int n = plan.batch;
    std::vector<Vec2> x0(n), eps(n);
    std::vector<int> cond(n), tsteps(n);
    std::vector<double> svals(n);
    std::vector<int> eff_cond(n);
    std::vector<double> sample_w(n);

    for (int step = 1; step <= plan.steps; ++step) {
        if (plan.lr_final > 0.0 && plan.steps > 1) {
            const double frac = static_cast<double>(step - 1) / (plan.steps - 1);
            opt_cfg.lr = plan.optimizer.lr + (plan.lr_final - plan.optimizer.lr) * frac;
        }
        for (int i = 0; i < n; ++i) {
            const size_t idx = rng.uniform_int(data.size());
            x0[i] = data.points[idx];
            cond[i] = data.labels[idx];
        }
        for (int i = 0; i < n; ++i) eps[i] = rng.normal2();

        NoisyBatch batch;
        if (plan.objective == Objective::epsilon) {
            for (int i = 0; i < n; ++i)
                tsteps[i] = 1 + static_cast<int>(rng.uniform_int(plan.schedule.T));
            batch = make_ddpm_batch(x0, eps, tsteps, plan.schedule, cond);
        } else {
            for (int i = 0; i < n; ++i) svals[i] = rng.uniform();
            batch = make_flow_batch(x0, eps, svals, cond);
        }

        StepReport rep;
        nn::GradientBuffers grads;
        try {
            if (cfg.kind == LossKind::imba) {
                std::tie(rep, grads) = imba_step(params, batch, cfg);
            } else {
                for (int i = 0; i < n; ++i) {
                    const bool drop = rng.uniform() < cfg.cond_drop_prob;
                    eff_cond[i] = drop ? null_c : cond[i];
                    sample_w[i] = 1.0;
                    if (cfg.kind == LossKind::freq_weighted && !drop)
                        sample_w[i] = freq_weight(cond[i], stats);
                }
                std::tie(rep, grads) =
                    weighted_drop_step(params, batch, eff_cond, sample_w,
                                       params.layout.num_classes);
            }
            nn::optimizer_step(params, grads, opt, opt_cfg);
        } catch (const NumericError&) {
            res.diverged_at = step;
            break;
        }

        LogRow row;
        row.step = step;
        row.l_star = rep.l_star;
        row.l_u = rep.l_u;
        row.l = rep.l;
        row.mean_w0 = rep.mean_weight.size() > 0 && rep.class_count[0] > 0 ? rep.mean_weight[0]
                      : cfg.kind == LossKind::imba                         ? 0.0
                                                                           : 1.0;
        row.mean_w1 = rep.mean_weight.size() > 1 && rep.class_count[1] > 0 ? rep.mean_weight[1]
                      : cfg.kind == LossKind::imba                         ? 0.0
                                                                           : 1.0;
        row.grad_norm = rep.grad_norm;
        res.log.push_back(row);
    }

    res.params = std::move(params);
    return res;
}

void write_train_log(const std::string& path, const LossConfig& cfg,
                     const std::vector<LogRow>& log) {
    CsvWriter w(path);
    w.row({"# kind=" + to_string(cfg.kind) + " gamma=" + fmt_num(cfg.gamma) +
           " lambda=" + fmt_num(cfg.lambda) + " weight_mode=" + to_string(cfg.weight_mode) +
           " cond_drop_prob=" + fmt_num(cfg.cond_drop_prob) +
           " residual_floor=" + fmt_num(cfg.residual_floor)});
    w.row({"step", "kind", "L_star", "L_u", "L", "mean_weight_class0", "mean_weight_class1",
           "grad_norm"});
    const std::string kind = to_string(cfg.kind);
    for (const auto& r : log)
        w.row({std::to_string(r.step), kind, fmt_num(r.l_star), fmt_num(r.l_u), fmt_num(r.l),
               fmt_num(r.mean_w0), fmt_num(r.mean_w1), fmt_num(r.grad_norm)});
}

} // namespace imbalab::balance
