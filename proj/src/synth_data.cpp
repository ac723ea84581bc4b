#include "imbalab/synth_data.hpp"

#include <cmath>
#include <fstream>

#include <json.hpp>

#include "imbalab/errors.hpp"
#include "imbalab/rng.hpp"

namespace imbalab::synth {

void MixtureSpec::validate() const {
    if (components.empty()) throw ConfigError("mixture: needs at least one component");
    for (const auto& c : components) {
        if (!(c.std[0] > 0.0) || !(c.std[1] > 0.0))
            throw ConfigError("mixture: std must be positive elementwise");
        if (!(std::abs(c.rho) < 1.0)) throw ConfigError("mixture: |rho| must be < 1");
        if (c.count < 0) throw ConfigError("mixture: counts must be >= 0");
    }
}

long MixtureSpec::total_count() const {
    long total = 0;
    for (const auto& c : components) total += c.count;
    return total;
}

std::vector<double> MixtureSpec::proportions() const {
    const long total = total_count();
    if (total <= 0) throw ConfigError("mixture: total count must be positive");
    std::vector<double> p;
    p.reserve(components.size());
    for (const auto& c : components) p.push_back(static_cast<double>(c.count) / total);
    return p;
}

std::pair<int, int> MixtureSpec::head_tail() const {
    if (components.size() != 2)
        throw InputError("head/tail split requires exactly two components");
    if (components[1].count > components[0].count) return {1, 0};
    return {0, 1};
}

MixtureSpec MixtureSpec::two_class(long count0, long count1) {
    MixtureSpec spec;
    spec.components = {
        {{-1.0, -0.3}, {0.1, 0.1}, 0.0, count0},
        {{0.3, 1.0}, {0.1, 0.1}, 0.0, count1},
    };
    return spec;
}

MixtureSpec MixtureSpec::from_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open mixture spec: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("mixture spec parse error in " + path + ": " + e.what());
    }
    MixtureSpec spec;
    try {
        const auto& means = j.at("means");
        const auto& stds = j.at("stds");
        const auto& rho = j.at("rho");
        const auto& counts = j.at("counts");
        const size_t n = means.size();
        if (stds.size() != n || rho.size() != n || counts.size() != n)
            throw ConfigError("mixture spec: means/stds/rho/counts lengths differ");
        for (size_t k = 0; k < n; ++k) {
            MixtureComponent c;
            c.mean = {means[k][0].get<double>(), means[k][1].get<double>()};
            c.std = {stds[k][0].get<double>(), stds[k][1].get<double>()};
            c.rho = rho[k].get<double>();
            c.count = counts[k].get<long>();
            spec.components.push_back(c);
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("mixture spec schema error in " + path + ": " + e.what());
    }
    spec.validate();
    return spec;
}

void MixtureSpec::to_json_file(const std::string& path) const {
    nlohmann::json j;
    j["means"] = nlohmann::json::array();
    j["stds"] = nlohmann::json::array();
    j["rho"] = nlohmann::json::array();
    j["counts"] = nlohmann::json::array();
    for (const auto& c : components) {
        j["means"].push_back({c.mean[0], c.mean[1]});
        j["stds"].push_back({c.std[0], c.std[1]});
        j["rho"].push_back(c.rho);
        j["counts"].push_back(c.count);
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write mixture spec: " + path);
    out << j.dump(2) << '\n';
}

void LabeledDataset::validate(int num_classes) const {
    if (points.size() != labels.size()) throw InputError("dataset: points/labels length mismatch");
    for (int l : labels)
        if (l < 0 || l >= num_classes) throw InputError("dataset: label out of range");
}

LabeledDataset sample_mixture(const MixtureSpec& spec, uint64_t seed) {
    spec.validate();
    Rng rng(seed);
    LabeledDataset ds;
    ds.points.reserve(static_cast<size_t>(std::max(spec.total_count(), 0L)));
    for (size_t k = 0; k < spec.components.size(); ++k) {
        const auto& c = spec.components[k];
        // Cholesky factor of [[sx^2, rho sx sy], [rho sx sy, sy^2]]
        const double l11 = c.std[0];
        const double l21 = c.rho * c.std[1];
        const double l22 = c.std[1] * std::sqrt(1.0 - c.rho * c.rho);
        for (long i = 0; i < c.count; ++i) {
            const Vec2 z = rng.normal2();
            ds.points.push_back({c.mean[0] + l11 * z[0], c.mean[1] + l21 * z[0] + l22 * z[1]});
            ds.labels.push_back(static_cast<int>(k));
        }
    }
    return ds;
}

namespace {

struct Gaussian2 {
    Vec2 mean;
    // covariance entries
    double axx, axy, ayy;

    /// log N(x; mean, A) and A^{-1}(x - mean).
    void eval(const Vec2& x, double& log_pdf, Vec2& alpha) const {
        const double det = axx * ayy - axy * axy;
        if (!(det > 0.0) || !std::isfinite(det))
            throw NumericError("mixture oracle: degenerate covariance");
        const double dx = x[0] - mean[0];
        const double dy = x[1] - mean[1];
        const double inv_det = 1.0 / det;
        alpha = {(ayy * dx - axy * dy) * inv_det, (axx * dy - axy * dx) * inv_det};
        const double quad = dx * alpha[0] + dy * alpha[1];
        log_pdf = -0.5 * quad - 0.5 * std::log(det) - std::log(2.0 * M_PI);
    }
};

} // namespace

ScoreOracleResult mixture_score_oracle(const MixtureSpec& spec, const Vec2& x, double alpha_bar) {
    spec.validate();
    if (!(alpha_bar > 0.0 && alpha_bar <= 1.0))
        throw InputError("mixture_score_oracle: alpha_bar must be in (0, 1]");
    const std::vector<double> w = spec.proportions();
    const double sqrt_ab = std::sqrt(alpha_bar);
    const double noise_var = 1.0 - alpha_bar;

    const size_t K = spec.components.size();
    std::vector<double> log_p(K);
    std::vector<Vec2> alphas(K);
    double max_log = -1e300;
    for (size_t k = 0; k < K; ++k) {
        const auto& c = spec.components[k];
        const double cxx = c.std[0] * c.std[0];
        const double cyy = c.std[1] * c.std[1];
        const double cxy = c.rho * c.std[0] * c.std[1];
        Gaussian2 g;
        g.mean = {sqrt_ab * c.mean[0], sqrt_ab * c.mean[1]};
        g.axx = alpha_bar * cxx + noise_var;
        g.axy = alpha_bar * cxy;
        g.ayy = alpha_bar * cyy + noise_var;
        g.eval(x, log_p[k], alphas[k]);
        log_p[k] += std::log(std::max(w[k], 1e-300));
        max_log = std::max(max_log, log_p[k]);
    }
    double norm = 0.0;
    for (size_t k = 0; k < K; ++k) norm += std::exp(log_p[k] - max_log);

    ScoreOracleResult res{{0.0, 0.0}, {0.0, 0.0}, 0.0};
    for (size_t k = 0; k < K; ++k) {
        const double r = std::exp(log_p[k] - max_log) / norm;
        res.score[0] -= r * alphas[k][0];
        res.score[1] -= r * alphas[k][1];
    }
    const double sqrt_nv = std::sqrt(noise_var);
    res.eps_star = {-sqrt_nv * res.score[0], -sqrt_nv * res.score[1]};
    res.density = std::exp(max_log) * norm;
    return res;
}

VelocityOracleResult mixture_velocity_oracle(const MixtureSpec& spec, const Vec2& x, double s) {
    spec.validate();
    if (!(s >= 0.0 && s <= 1.0)) throw InputError("mixture_velocity_oracle: s must be in [0, 1]");
    const std::vector<double> w = spec.proportions();
    const double a = 1.0 - s;

    const size_t K = spec.components.size();
    std::vector<double> log_p(K);
    std::vector<Vec2> alphas(K);
    double max_log = -1e300;
    for (size_t k = 0; k < K; ++k) {
        const auto& c = spec.components[k];
        const double cxx = c.std[0] * c.std[0];
        const double cyy = c.std[1] * c.std[1];
        const double cxy = c.rho * c.std[0] * c.std[1];
        Gaussian2 g;
        g.mean = {a * c.mean[0], a * c.mean[1]};
        g.axx = a * a * cxx + s * s;
        g.axy = a * a * cxy;
        g.ayy = a * a * cyy + s * s;
        g.eval(x, log_p[k], alphas[k]);
        log_p[k] += std::log(std::max(w[k], 1e-300));
        max_log = std::max(max_log, log_p[k]);
    }
    double norm = 0.0;
    for (size_t k = 0; k < K; ++k) norm += std::exp(log_p[k] - max_log);

    VelocityOracleResult res{{0.0, 0.0}, 0.0};
    for (size_t k = 0; k < K; ++k) {
        const auto& c = spec.components[k];
        const double cxx = c.std[0] * c.std[0];
        const double cyy = c.std[1] * c.std[1];
        const double cxy = c.rho * c.std[0] * c.std[1];
        const double r = std::exp(log_p[k] - max_log) / norm;
        // E[eps|x,k] - E[x0|x,k] = [s I - (1-s) Sigma_k] A_k^{-1} (x - m_k) - mu_k
        const Vec2& al = alphas[k];
        const double bx = s * al[0] - a * (cxx * al[0] + cxy * al[1]);
        const double by = s * al[1] - a * (cxy * al[0] + cyy * al[1]);
        res.velocity[0] += r * (bx - c.mean[0]);
        res.velocity[1] += r * (by - c.mean[1]);
    }
    res.density = std::exp(max_log) * norm;
    return res;
}

} // namespace imbalab::synth
