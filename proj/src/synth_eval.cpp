#include "imbalab/synth_eval.hpp"

#include <algorithm>
#include <cmath>

#include "imbalab/csv.hpp"
#include "imbalab/errors.hpp"
#include "imbalab/parallel.hpp"
#include "imbalab/rng.hpp"

namespace imbalab::synth {

double drift_metric(std::span<const Vec2> generated, const MixtureSpec& spec, int cls) {
    if (spec.components.size() != 2)
        throw InputError("drift_metric: requires a two-component spec");
    if (generated.empty()) throw InputError("drift_metric: empty sample set");
    if (cls < 0 || cls >= 2) throw InputError("drift_metric: class out of range");

    const Vec2& own = spec.components[cls].mean;
    const Vec2& other = spec.components[1 - cls].mean;
    Vec2 axis = sub2(other, own);
    const double len = norm2(axis);
    if (!(len > 0.0)) throw InputError("drift_metric: coincident component means");
    axis = scale2(axis, 1.0 / len);

    Vec2 mean{0.0, 0.0};
    for (const auto& p : generated) mean = add2(mean, p);
    mean = scale2(mean, 1.0 / static_cast<double>(generated.size()));
    return dot2(sub2(mean, own), axis);
}

double success_rate(std::span<const Vec2> generated, std::span<const int> cond_labels,
                    const MixtureSpec& spec) {
    if (generated.empty() || generated.size() != cond_labels.size())
        throw InputError("success_rate: empty or mismatched inputs");
    long hits = 0;
    for (size_t i = 0; i < generated.size(); ++i) {
        int best = 0;
        double best_d2 = 1e300;
        for (size_t k = 0; k < spec.components.size(); ++k) {
            const Vec2 d = sub2(generated[i], spec.components[k].mean);
            const double d2 = dot2(d, d);
            if (d2 < best_d2) {
                best_d2 = d2;
                best = static_cast<int>(k);
            }
        }
        if (best == cond_labels[i]) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(generated.size());
}

std::vector<double> imba_probe(const nn::ModelParams& params, const MixtureSpec& spec,
                               balance::Objective objective,
                               const diffusion::NoiseSchedule& sched, double gamma, int n_draws,
                               uint64_t seed) {
    spec.validate();
    if (n_draws < 1) throw InputError("imba_probe: n_draws must be >= 1");
    const int K = spec.num_classes();
    const int null_c = params.layout.null_cond();

    // Shared draws across classes: identical z for x0 and identical eps, so
    // the class comparison is a paired one.
    Rng rng(mix_seed(seed, 0x70726f6265ULL)); // "probe"
    std::vector<Vec2> z(n_draws), eps(n_draws);
    for (int i = 0; i < n_draws; ++i) z[i] = rng.normal2();
    for (int i = 0; i < n_draws; ++i) eps[i] = rng.normal2();

    std::vector<double> out(K, 0.0);
    std::vector<Vec2> xt(n_draws);
    std::vector<double> tn(n_draws);
    std::vector<int> cv(n_draws, null_c);
    Matrix target(n_draws, 2);

    for (int k = 0; k < K; ++k) {
        const auto& c = spec.components[k];
        const double l11 = c.std[0];
        const double l21 = c.rho * c.std[1];
        const double l22 = c.std[1] * std::sqrt(1.0 - c.rho * c.rho);
        for (int i = 0; i < n_draws; ++i) {
            const Vec2 x0{c.mean[0] + l11 * z[i][0], c.mean[1] + l21 * z[i][0] + l22 * z[i][1]};
            if (objective == balance::Objective::epsilon) {
                xt[i] = diffusion::add_noise(x0, eps[i], sched.T, sched);
                tn[i] = 1.0;
                target(i, 0) = eps[i][0];
                target(i, 1) = eps[i][1];
            } else {
                xt[i] = eps[i]; // s = 1 endpoint of the interpolation
                tn[i] = 1.0;
                target(i, 0) = eps[i][0] - x0[0];
                target(i, 1) = eps[i][1] - x0[1];
            }
        }
        const Matrix pred_u = nn::forward(params, xt, tn, cv);
        const balance::WeightTensor d = balance::imba_distance(
            target, pred_u, gamma, balance::WeightMode::channel_mean, 1e-8);
        out[k] = d.mean();
    }
    return out;
}

MetricsReport compute_metrics(const nn::ModelParams& params, const MixtureSpec& spec,
                              balance::Objective objective,
                              const diffusion::NoiseSchedule& sched,
                              const balance::LossConfig& loss_cfg, const EvalOptions& opts) {
    MetricsReport rep;
    const int K = spec.num_classes();
    diffusion::GuidanceConfig guide{opts.guidance_scale};

    std::vector<Vec2> all_points;
    std::vector<int> all_labels;
    std::vector<std::vector<Vec2>> per_class(K);
    for (int c = 0; c < K; ++c) {
        diffusion::SampleResult s;
        const uint64_t cseed = mix_seed(opts.seed, 0x6576616cULL + c); // "eval"+c
        if (objective == balance::Objective::epsilon)
            s = diffusion::ddpm_sample(params, sched, c, opts.eval_samples, guide, cseed);
        else
            s = diffusion::flow_sample(params, opts.flow_steps, c, guide, opts.eval_samples,
                                       cseed);
        per_class[c] = s.points;
        all_points.insert(all_points.end(), s.points.begin(), s.points.end());
        all_labels.insert(all_labels.end(), s.points.size(), c);
    }

    rep.drift.resize(K, 0.0);
    if (K == 2)
        for (int c = 0; c < K; ++c) rep.drift[c] = drift_metric(per_class[c], spec, c);

    const auto [head, tail] = K == 2 ? spec.head_tail() : std::pair<int, int>{0, 0};
    if (K == 2) {
        std::vector<int> tail_labels(per_class[tail].size(), tail);
        rep.success_rate = success_rate(per_class[tail], tail_labels, spec);
    } else {
        rep.success_rate = success_rate(all_points, all_labels, spec);
    }

    // Unconditional field direction at the inter-mean midpoint, mid noise.
    if (K == 2) {
        const Vec2 mid = scale2(add2(spec.components[0].mean, spec.components[1].mean), 0.5);
        Vec2 head_dir = sub2(spec.components[head].mean, mid);
        head_dir = scale2(head_dir, 1.0 / norm2(head_dir));
        const double t_mid =
            objective == balance::Objective::epsilon
                ? static_cast<double>(sched.step_for_alpha_bar(0.5)) / sched.T
                : 0.5;
        std::vector<Vec2> xq{mid};
        std::vector<double> tq{t_mid};
        std::vector<int> cq{params.layout.null_cond()};
        const Matrix pred = nn::forward(params, xq, tq, cq);
        // Data-ward motion is -prediction for both objectives (noise points
        // away from data; the sampler subtracts velocity).
        const Vec2 data_dir{-pred(0, 0), -pred(0, 1)};
        rep.score_shift = dot2(data_dir, head_dir);
    }

    rep.probe_d = imba_probe(params, spec, objective, sched, loss_cfg.gamma, opts.probe_draws,
                             opts.seed);
    return rep;
}

SweepAxis sweep_axis_from_string(const std::string& s) {
    if (s == "width") return SweepAxis::width;
    if (s == "scale") return SweepAxis::scale;
    if (s == "ratio") return SweepAxis::ratio;
    if (s == "loss_kind" || s == "kind") return SweepAxis::loss_kind;
    if (s == "gamma") return SweepAxis::gamma;
    if (s == "lambda") return SweepAxis::lambda;
    if (s == "weight_mode") return SweepAxis::weight_mode;
    throw ConfigError("unknown sweep axis: " + s);
}

std::string to_string(SweepAxis a) {
    switch (a) {
    case SweepAxis::width: return "width";
    case SweepAxis::scale: return "scale";
    case SweepAxis::ratio: return "ratio";
    case SweepAxis::loss_kind: return "loss_kind";
    case SweepAxis::gamma: return "gamma";
    case SweepAxis::lambda: return "lambda";
    case SweepAxis::weight_mode: return "weight_mode";
    }
    return "?";
}

namespace {

/// "99:1" -> counts summing to `total` in that ratio.
std::pair<long, long> parse_ratio(const std::string& v, long total) {
    const auto pos = v.find(':');
    if (pos == std::string::npos) throw ConfigError("ratio value must look like '99:1': " + v);
    const double a = std::stod(v.substr(0, pos));
    const double b = std::stod(v.substr(pos + 1));
    if (!(a > 0.0) || !(b > 0.0)) throw ConfigError("ratio parts must be positive: " + v);
    const long c1 = std::lround(total * b / (a + b));
    return {total - c1, c1};
}

RunSettings apply_axis(const ExperimentBase& base, SweepAxis axis, const std::string& value,
                       uint64_t seed) {
    RunSettings s;
    s.mixture = base.mixture;
    s.loss = base.loss;
    s.objective = base.objective;
    s.schedule = diffusion::make_schedule(base.schedule_T, base.beta_min, base.beta_max);
    s.steps = base.steps;
    s.batch = base.batch;
    s.lr = base.lr;
    s.lr_final = base.lr_final;
    s.width = base.width;
    s.hidden_layers = base.hidden_layers;
    s.seed = seed;

    switch (axis) {
    case SweepAxis::width: s.width = std::stoi(value); break;
    case SweepAxis::scale: {
        // Total count changes; the component ratio is preserved.
        const long total = std::stol(value);
        const long old_total = base.mixture.total_count();
        if (old_total <= 0) throw ConfigError("scale axis: base mixture has no counts");
        long assigned = 0;
        for (size_t k = 0; k < s.mixture.components.size(); ++k) {
            auto& c = s.mixture.components[k];
            if (k + 1 == s.mixture.components.size()) {
                c.count = total - assigned;
            } else {
                c.count = std::lround(static_cast<double>(c.count) * total / old_total);
                assigned += c.count;
            }
        }
        break;
    }
    case SweepAxis::ratio: {
        if (s.mixture.components.size() != 2)
            throw ConfigError("ratio axis requires a two-component mixture");
        const auto [c0, c1] = parse_ratio(value, base.mixture.total_count());
        s.mixture.components[0].count = c0;
        s.mixture.components[1].count = c1;
        break;
    }
    case SweepAxis::loss_kind: s.loss.kind = balance::loss_kind_from_string(value); break;
    case SweepAxis::gamma:
        s.loss.kind = balance::LossKind::imba;
        s.loss.gamma = std::stod(value);
        break;
    case SweepAxis::lambda:
        s.loss.kind = balance::LossKind::imba;
        s.loss.lambda = std::stod(value);
        break;
    case SweepAxis::weight_mode:
        s.loss.kind = balance::LossKind::imba;
        s.loss.weight_mode = balance::weight_mode_from_string(value);
        break;
    }
    return s;
}

} // namespace

balance::TrainResult train_run(const RunSettings& s) {
    const LabeledDataset data = sample_mixture(s.mixture, mix_seed(s.seed, 0x64617461ULL));

    nn::ModelLayout layout;
    layout.hidden_width = s.width;
    layout.hidden_layers = s.hidden_layers;
    layout.num_classes = s.mixture.num_classes();
    nn::ModelParams params = nn::init_params(layout, mix_seed(s.seed, 0x696e6974ULL));

    balance::TrainPlan plan;
    plan.objective = s.objective;
    plan.schedule = s.schedule;
    plan.steps = s.steps;
    plan.batch = s.batch;
    plan.optimizer.lr = s.lr;
    plan.lr_final = s.lr_final;
    plan.seed = s.seed;
    return balance::train(std::move(params), data, s.loss, plan);
}

std::vector<ExperimentRow> run_experiment(const SweepSpec& spec) {
    if (spec.values.empty()) throw ConfigError("experiment: no axis values given");
    if (spec.base.seeds < 1) throw ConfigError("experiment: seeds must be >= 1");
    spec.base.loss.validate();
    spec.base.mixture.validate();

    struct Task {
        RunSettings settings;
        std::string value;
        uint64_t seed;
    };
    std::vector<Task> tasks;
    for (const auto& value : spec.values) {
        for (int i = 0; i < spec.base.seeds; ++i) {
            const uint64_t seed = spec.base.seed0 + static_cast<uint64_t>(i);
            tasks.push_back({apply_axis(spec.base, spec.axis, value, seed), value, seed});
        }
    }

    std::vector<ExperimentRow> rows(tasks.size());
    parallel_for(
        static_cast<int>(tasks.size()),
        [&](int i) {
            const Task& task = tasks[i];
            balance::TrainResult tr = train_run(task.settings);
            if (tr.diverged_at)
                throw NumericError("experiment: run diverged at step " +
                                   std::to_string(*tr.diverged_at) + " (value " + task.value +
                                   ", seed " + std::to_string(task.seed) + ")");
            EvalOptions eval = spec.base.eval;
            eval.seed = task.seed;
            const MetricsReport rep =
                compute_metrics(tr.params, task.settings.mixture, task.settings.objective,
                                task.settings.schedule, task.settings.loss, eval);
            const auto [head, tail] = task.settings.mixture.head_tail();
            ExperimentRow row;
            row.axis_value = task.value;
            row.seed = task.seed;
            row.tail_drift = rep.drift[tail];
            row.head_drift = rep.drift[head];
            row.success_rate = rep.success_rate;
            row.d_head = rep.probe_d[head];
            row.d_tail = rep.probe_d[tail];
            rows[i] = row;
        },
        spec.base.max_threads);
    return rows;
}

void write_experiment_csv(const std::string& path, const std::vector<ExperimentRow>& rows) {
    CsvWriter w(path);
    w.row({"axis_value", "seed", "tail_drift", "head_drift", "success_rate", "D_head", "D_tail"});
    for (const auto& r : rows)
        w.row({r.axis_value, std::to_string(r.seed), fmt_num(r.tail_drift), fmt_num(r.head_drift),
               fmt_num(r.success_rate), fmt_num(r.d_head), fmt_num(r.d_tail)});
}

} // namespace imbalab::synth
