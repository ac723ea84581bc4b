#pragma once

#include <optional>
#include <string>
#include <vector>

#include "imbalab/diffusion.hpp"
#include "imbalab/nn.hpp"
#include "imbalab/synth_data.hpp"

namespace imbalab::balance {

using diffusion::NoiseSchedule;
using diffusion::Objective;
using synth::LabeledDataset;

enum class LossKind { baseline, imba, freq_weighted };
enum class WeightMode { per_element, channel_mean, sample_scalar };

LossKind loss_kind_from_string(const std::string& s);
std::string to_string(LossKind k);
WeightMode weight_mode_from_string(const std::string& s);
std::string to_string(WeightMode m);

struct LossConfig {
    LossKind kind = LossKind::imba;
    double gamma = 0.8;
    double lambda = 0.9;
    double cond_drop_prob = 0.1;
    WeightMode weight_mode = WeightMode::channel_mean;
    double residual_floor = 1e-8;

    void validate() const;
};

/// Per-class sample counts and frequency proportions phi(c).
struct ConceptStats {
    std::vector<long> counts;
    long total = 0;

    static ConceptStats from_labels(std::span<const int> labels, int num_classes);
    double phi(int cls) const;
    int num_classes() const { return static_cast<int>(counts.size()); }
};

/// Frequency-based balancing weight (1/n) / phi(cls).
double freq_weight(int cls, const ConceptStats& stats);

/// One training batch: clean points, injected noise, noised states, raw and
/// normalized times, condition indices. The noising identity is re-checkable
/// from the stored fields.
struct NoisyBatch {
    std::vector<Vec2> x0;
    std::vector<Vec2> eps;
    std::vector<Vec2> xt;
    std::vector<double> t;      // step index (epsilon) or s in [0,1] (velocity)
    std::vector<double> t_norm; // network input time
    std::vector<int> cond;
    Objective objective = Objective::velocity;

    int n() const { return static_cast<int>(x0.size()); }
    /// Regression target per objective: eps, or velocity eps - x0.
    Matrix targets() const;
};

NoisyBatch make_ddpm_batch(std::vector<Vec2> x0, std::vector<Vec2> eps, std::vector<int> t,
                           const NoiseSchedule& sched, std::vector<int> cond);
NoisyBatch make_flow_batch(std::vector<Vec2> x0, std::vector<Vec2> eps, std::vector<double> s,
                           std::vector<int> cond);

struct LossOut {
    double loss = 0.0;
    Matrix dpred; // gradient of loss w.r.t. predictions
};

/// Mean squared error over batch and coordinates.
LossOut baseline_loss(const Matrix& pred, const Matrix& target);

/// Reweighting tensor |target - uncond_pred|^gamma (floored), reduced per
/// weight mode. Plain numbers: carries no gradient path by construction.
struct WeightTensor {
    WeightMode mode = WeightMode::channel_mean;
    Matrix w; // per_element: n x dims; otherwise n x 1

    double at(int i, int d) const {
        return mode == WeightMode::per_element ? w(i, d) : w(i, 0);
    }
    /// Channel-averaged scalar for sample i (the token-level weight).
    double sample_scalar(int i) const;
    double mean() const;
};

WeightTensor imba_distance(const Matrix& target, const Matrix& uncond_pred, double gamma,
                           WeightMode mode, double residual_floor);

struct StepReport {
    double l_star = 0.0; // conditional (weighted) loss
    double l_u = 0.0;    // unconditional loss
    double l = 0.0;      // lambda * l_star + (1 - lambda) * l_u
    std::vector<double> mean_weight; // mean sample weight per class (0 if absent)
    std::vector<long> class_count;   // batch members per class
    double grad_norm = 0.0;
};

/// One reweighted step: conditional and null-condition forwards on the same
/// noised batch, stop-gradiented weights from the unconditional residual,
/// gradients through both prediction paths.
std::pair<StepReport, nn::GradientBuffers> imba_step(const nn::ModelParams& params,
                                                     const NoisyBatch& batch,
                                                     const LossConfig& cfg);

struct TrainPlan {
    Objective objective = Objective::velocity;
    NoiseSchedule schedule; // used by the epsilon objective
    int steps = 20000;
    int batch = 64;
    nn::OptimizerConfig optimizer;
    /// When positive, the learning rate decays linearly from optimizer.lr
    /// to this value over the run; the optimizer's stationary noise floor
    /// scales with the final rate.
    double lr_final = 0.0;
    uint64_t seed = 1;
};

struct LogRow {
    int step = 0;
    double l_star = 0.0, l_u = 0.0, l = 0.0;
    double mean_w0 = 1.0, mean_w1 = 1.0;
    double grad_norm = 0.0;
};

struct TrainResult {
    nn::ModelParams params;
    std::vector<LogRow> log;
    /// Set if training aborted on a non-finite loss; params then hold the
    /// last finite state.
    std::optional<int> diverged_at;
};

TrainResult train(nn::ModelParams params, const LabeledDataset& data, const LossConfig& cfg,
                  const TrainPlan& plan);

void write_train_log(const std::string& path, const LossConfig& cfg,
                     const std::vector<LogRow>& log);

} // namespace imbalab::balance
