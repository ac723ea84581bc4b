#include "imbalab/nn.hpp"

#include <algorithm>
#include <cmath>

#include "imbalab/errors.hpp"

namespace imbalab::nn {

Activation activation_from_string(const std::string& s) {
    if (s == "silu") return Activation::silu;
    if (s == "tanh") return Activation::tanh;
    if (s == "relu") return Activation::relu;
    throw ConfigError("unknown activation: " + s);
}

std::string to_string(Activation a) {
    switch (a) {
    case Activation::silu: return "silu";
    case Activation::tanh: return "tanh";
    case Activation::relu: return "relu";
    }
    return "?";
}

OptimizerMode optimizer_from_string(const std::string& s) {
    if (s == "plain") return OptimizerMode::plain;
    if (s == "adam") return OptimizerMode::adam;
    throw ConfigError("unknown optimizer: " + s);
}

std::string to_string(OptimizerMode m) {
    return m == OptimizerMode::plain ? "plain" : "adam";
}

void ModelLayout::validate() const {
    if (point_dim < 1 || time_dim < 1 || cond_dim < 1)
        throw ConfigError("model layout: all feature dims must be >= 1");
    if (time_dim % 2 != 0) throw ConfigError("model layout: time_dim must be even");
    if (hidden_width < 1) throw ConfigError("model layout: hidden width must be >= 1");
    if (hidden_layers < 1) throw ConfigError("model layout: hidden layer count must be >= 1");
    if (num_classes < 1) throw ConfigError("model layout: num_classes must be >= 1");
}

bool ModelParams::all_finite() const {
    for (const auto& l : layers) {
        if (!l.w.all_finite()) return false;
        for (double v : l.b)
            if (!std::isfinite(v)) return false;
    }
    return embed.table.all_finite();
}

ModelParams init_params(const ModelLayout& layout, uint64_t seed) {
    layout.validate();
    ModelParams p;
    p.layout = layout;
    Rng rng(seed);

    auto make_layer = [&](int in, int out) {
        DenseLayer l;
        l.w = Matrix(in, out);
        const double std_dev = 1.0 / std::sqrt(static_cast<double>(in));
        for (double& v : l.w.data) v = rng.normal() * std_dev;
        l.b.assign(out, 0.0);
        return l;
    };

    p.layers.push_back(make_layer(layout.input_dim(), layout.hidden_width));
    for (int i = 1; i < layout.hidden_layers; ++i)
        p.layers.push_back(make_layer(layout.hidden_width, layout.hidden_width));
    p.layers.push_back(make_layer(layout.hidden_width, layout.output_dim()));

    p.embed.table = Matrix(layout.num_classes + 1, layout.cond_dim);
    const double estd = 1.0 / std::sqrt(static_cast<double>(layout.cond_dim));
    for (double& v : p.embed.table.data) v = rng.normal() * estd;
    return p;
}

void time_features(double t_norm, int dim, double* out) {
    // Geometric frequency ladder pi * 2^k; resolves T=1000 schedules while
    // staying smooth in t.
    const int half = dim / 2;
    for (int k = 0; k < half; ++k) {
        const double w = M_PI * std::ldexp(1.0, k);
        out[2 * k] = std::sin(w * t_norm);
        out[2 * k + 1] = std::cos(w * t_norm);
    }
}

namespace {

inline double act_fwd(Activation a, double z) {
    switch (a) {
    case Activation::silu: return z / (1.0 + std::exp(-z));
    case Activation::tanh: return std::tanh(z);
    case Activation::relu: return z > 0.0 ? z : 0.0;
    }
    return 0.0;
}

inline double act_grad(Activation a, double z) {
    switch (a) {
    case Activation::silu: {
        const double s = 1.0 / (1.0 + std::exp(-z));
        return s * (1.0 + z * (1.0 - s));
    }
    case Activation::tanh: {
        const double t = std::tanh(z);
        return 1.0 - t * t;
    }
    case Activation::relu: return z > 0.0 ? 1.0 : 0.0;
    }
    return 0.0;
}

void apply_activation(Activation a, const Matrix& pre, Matrix& out) {
    out = Matrix(pre.rows, pre.cols);
    for (size_t i = 0; i < pre.data.size(); ++i) out.data[i] = act_fwd(a, pre.data[i]);
}

} // namespace

Matrix forward(const ModelParams& params, std::span<const Vec2> x, std::span<const double> t_norm,
               std::span<const int> cond, ForwardCache* cache) {
    const ModelLayout& lay = params.layout;
    const int n = static_cast<int>(x.size());
    if (t_norm.size() != x.size() || cond.size() != x.size())
        throw InputError("forward: batch arrays must have equal length");

    Matrix input(n, lay.input_dim());
    std::vector<double> tf(static_cast<size_t>(lay.time_dim));
    for (int i = 0; i < n; ++i) {
        const int c = cond[i];
        if (c < 0 || c > lay.null_cond())
            throw InputError("forward: condition index " + std::to_string(c) + " out of range");
        double* row = input.row(i);
        row[0] = x[i][0];
        row[1] = x[i][1];
        time_features(t_norm[i], lay.time_dim, tf.data());
        std::copy(tf.begin(), tf.end(), row + lay.point_dim);
        const double* e = params.embed.table.row(c);
        std::copy(e, e + lay.cond_dim, row + lay.point_dim + lay.time_dim);
    }

    const int nlayers = static_cast<int>(params.layers.size());
    std::vector<Matrix> pre(nlayers - 1), act(nlayers - 1);
    const Matrix* cur = &input;
    for (int l = 0; l < nlayers - 1; ++l) {
        affine(*cur, params.layers[l].w, params.layers[l].b, pre[l]);
        apply_activation(lay.activation, pre[l], act[l]);
        cur = &act[l];
    }
    Matrix out;
    affine(*cur, params.layers[nlayers - 1].w, params.layers[nlayers - 1].b, out);

    if (cache) {
        cache->input = std::move(input);
        cache->pre = std::move(pre);
        cache->act = std::move(act);
        cache->cond.assign(cond.begin(), cond.end());
    }
    return out;
}

GradientBuffers GradientBuffers::like(const ModelParams& params) {
    GradientBuffers g;
    for (const auto& l : params.layers) {
        g.dw.emplace_back(l.w.rows, l.w.cols);
        g.db.emplace_back(l.b.size(), 0.0);
    }
    g.dembed = Matrix(params.embed.table.rows, params.embed.table.cols);
    return g;
}

void GradientBuffers::zero() {
    for (auto& m : dw) m.fill(0.0);
    for (auto& b : db) std::fill(b.begin(), b.end(), 0.0);
    dembed.fill(0.0);
}

double GradientBuffers::l2_norm() const {
    double acc = 0.0;
    for (const auto& m : dw)
        for (double v : m.data) acc += v * v;
    for (const auto& b : db)
        for (double v : b) acc += v * v;
    for (double v : dembed.data) acc += v * v;
    return std::sqrt(acc);
}

bool GradientBuffers::all_finite() const {
    for (const auto& m : dw)
        if (!m.all_finite()) return false;
    for (const auto& b : db)
        for (double v : b)
            if (!std::isfinite(v)) return false;
    return dembed.all_finite();
}

bool GradientBuffers::congruent(const ModelParams& params) const {
    if (dw.size() != params.layers.size() || db.size() != params.layers.size()) return false;
    for (size_t l = 0; l < dw.size(); ++l) {
        if (!dw[l].same_shape(params.layers[l].w)) return false;
        if (db[l].size() != params.layers[l].b.size()) return false;
    }
    return dembed.same_shape(params.embed.table);
}

void backward(const ModelParams& params, const ForwardCache& cache, const Matrix& upstream,
              GradientBuffers& out) {
    const ModelLayout& lay = params.layout;
    const int n = cache.n();
    if (upstream.rows != n || upstream.cols != lay.output_dim())
        throw InputError("backward: upstream gradient shape mismatch");
    if (!out.congruent(params)) throw InputError("backward: gradient buffers not congruent");

    const int nlayers = static_cast<int>(params.layers.size());
    Matrix d = upstream;
    for (int l = nlayers - 1; l >= 1; --l) {
        Matrix dprev(cache.act[l - 1].rows, cache.act[l - 1].cols);
        affine_backward(cache.act[l - 1], params.layers[l].w, d, &dprev, out.dw[l], out.db[l]);
        // through the activation
        const Matrix& pre = cache.pre[l - 1];
        for (size_t i = 0; i < dprev.data.size(); ++i)
            dprev.data[i] *= act_grad(lay.activation, pre.data[i]);
        d = std::move(dprev);
    }
    Matrix dinput(n, lay.input_dim());
    affine_backward(cache.input, params.layers[0].w, d, &dinput, out.dw[0], out.db[0]);

    const int eoff = lay.point_dim + lay.time_dim;
    for (int i = 0; i < n; ++i) {
        double* grow = out.dembed.row(cache.cond[i]);
        const double* din = dinput.row(i) + eoff;
        for (int j = 0; j < lay.cond_dim; ++j) grow[j] += din[j];
    }
}

OptimizerState OptimizerState::like(const ModelParams& params) {
    OptimizerState s;
    s.m = GradientBuffers::like(params);
    s.v = GradientBuffers::like(params);
    return s;
}

namespace {

void adam_update(std::span<double> theta, std::span<const double> g, std::span<double> m,
                 std::span<double> v, const OptimizerConfig& cfg, double bc1, double bc2) {
    for (size_t i = 0; i < theta.size(); ++i) {
        m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
        v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
        const double mhat = m[i] / bc1;
        const double vhat = v[i] / bc2;
        theta[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
    }
}

void plain_update(std::span<double> theta, std::span<const double> g, double lr) {
    for (size_t i = 0; i < theta.size(); ++i) theta[i] -= lr * g[i];
}

} // namespace

void optimizer_step(ModelParams& params, const GradientBuffers& grads, OptimizerState& state,
                    const OptimizerConfig& cfg) {
    if (cfg.lr <= 0.0) throw ConfigError("optimizer: lr must be positive");
    if (!grads.congruent(params)) throw InputError("optimizer: gradient shape mismatch");
    if (!grads.all_finite()) throw NumericError("optimizer: non-finite gradient entry; step aborted");

    if (cfg.mode == OptimizerMode::plain) {
        for (size_t l = 0; l < params.layers.size(); ++l) {
            plain_update(params.layers[l].w.data, grads.dw[l].data, cfg.lr);
            plain_update(params.layers[l].b, grads.db[l], cfg.lr);
        }
        plain_update(params.embed.table.data, grads.dembed.data, cfg.lr);
        return;
    }

    state.step_count += 1;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step_count));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step_count));
    for (size_t l = 0; l < params.layers.size(); ++l) {
        adam_update(params.layers[l].w.data, grads.dw[l].data, state.m.dw[l].data,
                    state.v.dw[l].data, cfg, bc1, bc2);
        adam_update(params.layers[l].b, grads.db[l], state.m.db[l], state.v.db[l], cfg, bc1, bc2);
    }
    adam_update(params.embed.table.data, grads.dembed.data, state.m.dembed.data,
                state.v.dembed.data, cfg, bc1, bc2);
}

namespace {

// Flat view over every trainable scalar, in a fixed order.
struct ParamSlots {
    std::vector<std::pair<double*, size_t>> spans;
    size_t total = 0;

    explicit ParamSlots(ModelParams& p) {
        for (auto& l : p.layers) {
            spans.push_back({l.w.data.data(), l.w.data.size()});
            spans.push_back({l.b.data(), l.b.size()});
        }
        spans.push_back({p.embed.table.data.data(), p.embed.table.data.size()});
        for (auto& s : spans) total += s.second;
    }

    double* at(size_t idx) {
        for (auto& s : spans) {
            if (idx < s.second) return s.first + idx;
            idx -= s.second;
        }
        return nullptr;
    }
};

double grad_at(const GradientBuffers& g, size_t idx) {
    for (size_t l = 0; l < g.dw.size(); ++l) {
        if (idx < g.dw[l].data.size()) return g.dw[l].data[idx];
        idx -= g.dw[l].data.size();
        if (idx < g.db[l].size()) return g.db[l][idx];
        idx -= g.db[l].size();
    }
    return g.dembed.data[idx];
}

} // namespace

double finite_diff_check(const ModelParams& params, std::span<const Vec2> x,
                         std::span<const double> t_norm, std::span<const int> cond,
                         const LossFn& loss_fn, double step, int n_probes, uint64_t seed) {
    if (step <= 0.0) throw InputError("finite_diff_check: step must be positive");

    ForwardCache cache;
    const Matrix pred = forward(params, x, t_norm, cond, &cache);
    auto [loss, dpred] = loss_fn(pred);
    (void)loss;
    GradientBuffers grads = GradientBuffers::like(params);
    backward(params, cache, dpred, grads);

    ModelParams work = params;
    ParamSlots slots(work);
    Rng rng(seed);
    const double floor = 1e-6;

    double max_rel = 0.0;
    const int probes = std::min<int>(n_probes, static_cast<int>(slots.total));
    for (int k = 0; k < probes; ++k) {
        const size_t idx = rng.uniform_int(slots.total);
        double* slot = slots.at(idx);
        const double orig = *slot;

        *slot = orig + step;
        const double lp = loss_fn(forward(work, x, t_norm, cond)).first;
        *slot = orig - step;
        const double lm = loss_fn(forward(work, x, t_norm, cond)).first;
        *slot = orig;

        const double numeric = (lp - lm) / (2.0 * step);
        const double analytic = grad_at(grads, idx);
        const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
        max_rel = std::max(max_rel, std::abs(analytic - numeric) / denom);
    }
    return max_rel;
}

} // namespace imbalab::nn
