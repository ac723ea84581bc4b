#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "imbalab/balance.hpp"
#include "imbalab/synth_data.hpp"

namespace imbalab::synth {

/// Signed projection of the class-conditional generation mean away from its
/// true mean, along the unit vector toward the other class. Positive =
/// pulled toward the opposing class. Requires a two-component spec.
double drift_metric(std::span<const Vec2> generated, const MixtureSpec& spec, int cls);

/// Fraction of samples whose nearest component mean matches their
/// conditioning label.
double success_rate(std::span<const Vec2> generated, std::span<const int> cond_labels,
                    const MixtureSpec& spec);

/// Mean channel-averaged reweighting distance per class at the maximum
/// noise level (t = T for the epsilon objective, s = 1 for velocity),
/// evaluated with the null condition. Draws share noise across classes.
std::vector<double> imba_probe(const nn::ModelParams& params, const MixtureSpec& spec,
                               balance::Objective objective,
                               const diffusion::NoiseSchedule& sched, double gamma, int n_draws,
                               uint64_t seed);

struct MetricsReport {
    std::vector<double> drift;   // per class
    double success_rate = 0.0;   // tail-conditioned
    double score_shift = 0.0;    // head-ward data-direction projection at the
                                 // inter-mean midpoint, mid noise
    std::vector<double> probe_d; // per class
};

struct EvalOptions {
    int eval_samples = 1000;
    int flow_steps = 100;
    int probe_draws = 20000;
    double guidance_scale = 1.0;
    uint64_t seed = 1;
};

MetricsReport compute_metrics(const nn::ModelParams& params, const MixtureSpec& spec,
                              balance::Objective objective,
                              const diffusion::NoiseSchedule& sched,
                              const balance::LossConfig& loss_cfg, const EvalOptions& opts);

enum class SweepAxis { width, scale, ratio, loss_kind, gamma, lambda, weight_mode };

SweepAxis sweep_axis_from_string(const std::string& s);
std::string to_string(SweepAxis a);

/// Base configuration an experiment varies one axis of.
struct ExperimentBase {
    MixtureSpec mixture = MixtureSpec::two_class(9900, 100);
    balance::LossConfig loss;
    balance::Objective objective = balance::Objective::velocity;
    int schedule_T = 1000;
    double beta_min = 1e-4, beta_max = 0.02;
    int steps = 20000;
    int batch = 64;
    double lr = 1e-3;
    double lr_final = 0.0;
    int width = 128;
    int hidden_layers = 2;
    int seeds = 5;
    uint64_t seed0 = 1;
    EvalOptions eval;
    int max_threads = 0; // 0 = hardware concurrency
};

struct SweepSpec {
    SweepAxis axis = SweepAxis::ratio;
    std::vector<std::string> values;
    ExperimentBase base;
};

struct ExperimentRow {
    std::string axis_value;
    uint64_t seed = 0;
    double tail_drift = 0.0;
    double head_drift = 0.0;
    double success_rate = 0.0; // tail-conditioned
    double d_head = 0.0;
    double d_tail = 0.0;
};

/// Trains one model per (axis value, seed) and reports metrics. Rows are
/// ordered by (value, seed); configurations run in parallel.
std::vector<ExperimentRow> run_experiment(const SweepSpec& spec);

void write_experiment_csv(const std::string& path, const std::vector<ExperimentRow>& rows);

/// One fully-specified configuration; used by run_experiment and reusable
/// by callers that need individual trained models.
struct RunSettings {
    MixtureSpec mixture;
    balance::LossConfig loss;
    balance::Objective objective = balance::Objective::velocity;
    diffusion::NoiseSchedule schedule;
    int steps = 20000;
    int batch = 64;
    double lr = 1e-3;
    double lr_final = 0.0; // > 0 enables linear decay
    int width = 128;
    int hidden_layers = 2;
    uint64_t seed = 1;
};

/// sample data -> init -> train; seeds for data/init/training are derived
/// from settings.seed.
balance::TrainResult train_run(const RunSettings& s);

} // namespace imbalab::synth
