#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "imbalab/linalg.hpp"

namespace imbalab::nn {

enum class Activation { silu, tanh, relu };

Activation activation_from_string(const std::string& s);
std::string to_string(Activation a);

/// Shape description of the conditional denoiser MLP. The network input is
/// the concatenation [point (2) | time features | condition embedding]; the
/// output is a 2-vector prediction (noise or velocity).
struct ModelLayout {
    int point_dim = 2;
    int time_dim = 16;
    int cond_dim = 8;
    int hidden_width = 128;
    int hidden_layers = 2;
    int num_classes = 2;
    Activation activation = Activation::silu;

    int input_dim() const { return point_dim + time_dim + cond_dim; }
    int output_dim() const { return point_dim; }
    /// Index reserved for the null condition; never a valid class index.
    int null_cond() const { return num_classes; }

    void validate() const; // throws ConfigError
};

struct DenseLayer {
    Matrix w; // in x out
    std::vector<double> b;
};

/// Per-class embedding table plus one learned null-condition row (the last
/// row). Rows have identical dimension by construction.
struct ConditionEmbedding {
    Matrix table; // (num_classes + 1) x cond_dim
    int null_index() const { return table.rows - 1; }
};

struct ModelParams {
    ModelLayout layout;
    std::vector<DenseLayer> layers; // hidden_layers + 1 entries
    ConditionEmbedding embed;

    bool all_finite() const;
};

/// Fan-in scaled zero-mean Gaussian weights, zero biases. Deterministic per
/// (layout, seed).
ModelParams init_params(const ModelLayout& layout, uint64_t seed);

/// Sinusoidal features of a normalized time in [0, 1]; dim must be even.
void time_features(double t_norm, int dim, double* out);

/// Everything forward() stores so backward() can produce exact gradients.
struct ForwardCache {
    Matrix input;            // n x input_dim
    std::vector<Matrix> pre; // hidden pre-activations
    std::vector<Matrix> act; // hidden activations
    std::vector<int> cond;
    int n() const { return input.rows; }
};

/// Batched forward pass. t_norm in [0, 1]; cond entries are class indices or
/// layout.null_cond(). Returns n x 2 predictions; fills cache when given.
Matrix forward(const ModelParams& params, std::span<const Vec2> x, std::span<const double> t_norm,
               std::span<const int> cond, ForwardCache* cache = nullptr);

struct GradientBuffers {
    std::vector<Matrix> dw;
    std::vector<std::vector<double>> db;
    Matrix dembed;

    static GradientBuffers like(const ModelParams& params);
    void zero();
    double l2_norm() const;
    bool all_finite() const;
    bool congruent(const ModelParams& params) const;
};

/// Accumulates exact gradients of the scalar loss whose prediction-gradient
/// is `upstream` (n x 2) into `out`.
void backward(const ModelParams& params, const ForwardCache& cache, const Matrix& upstream,
              GradientBuffers& out);

enum class OptimizerMode { plain, adam };

OptimizerMode optimizer_from_string(const std::string& s);
std::string to_string(OptimizerMode m);

struct OptimizerConfig {
    OptimizerMode mode = OptimizerMode::adam;
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct OptimizerState {
    GradientBuffers m;
    GradientBuffers v;
    long step_count = 0;

    static OptimizerState like(const ModelParams& params);
};

/// plain: theta -= lr * g.  adam: bias-corrected moment recurrence.
/// Throws NumericError (params untouched) on any non-finite gradient.
void optimizer_step(ModelParams& params, const GradientBuffers& grads, OptimizerState& state,
                    const OptimizerConfig& cfg);

/// Loss over a prediction batch: returns (scalar loss, dloss/dpred).
using LossFn = std::function<std::pair<double, Matrix>(const Matrix& pred)>;

/// Compares analytic gradients against central finite differences on a
/// random parameter subset; returns max |analytic - numeric| /
/// max(|analytic|, |numeric|, floor).
double finite_diff_check(const ModelParams& params, std::span<const Vec2> x,
                         std::span<const double> t_norm, std::span<const int> cond,
                         const LossFn& loss_fn, double step, int n_probes = 64,
                         uint64_t seed = 0x5eed);

} // namespace imbalab::nn
