#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "imbalab/linalg.hpp"

namespace imbalab::synth {

using imbalab::Vec2;

struct MixtureComponent {
    Vec2 mean{0.0, 0.0};
    Vec2 std{1.0, 1.0};
    double rho = 0.0;
    long count = 0;
};

/// Ground-truth class-conditional 2-D Gaussian mixture. Component counts
/// define the class proportions of generated datasets.
struct MixtureSpec {
    std::vector<MixtureComponent> components;

    void validate() const; // throws ConfigError
    long total_count() const;
    /// Count-normalized component proportions.
    std::vector<double> proportions() const;
    int num_classes() const { return static_cast<int>(components.size()); }

    /// Head = larger count, tail = smaller; ties resolve to (0, 1).
    /// Requires exactly two components.
    std::pair<int, int> head_tail() const;

    static MixtureSpec from_json_file(const std::string& path);
    void to_json_file(const std::string& path) const;

    /// The default two-class lab mixture; counts given as (head, tail).
    static MixtureSpec two_class(long count0, long count1);
};

struct LabeledDataset {
    std::vector<Vec2> points;
    std::vector<int> labels;

    size_t size() const { return points.size(); }
    void validate(int num_classes) const;
};

/// Exactly `count` draws per component via Cholesky-transformed standard
/// normals; component-major order; deterministic per seed.
LabeledDataset sample_mixture(const MixtureSpec& spec, uint64_t seed);

/// Closed-form quantities of the noised mixture marginal
///   sum_k w_k N(sqrt(ab) mu_k, ab Sigma_k + (1-ab) I).
struct ScoreOracleResult {
    Vec2 score;    // gradient of the log density at x
    Vec2 eps_star; // -sqrt(1-ab) * score, the ideal noise prediction
    double density;
};

ScoreOracleResult mixture_score_oracle(const MixtureSpec& spec, const Vec2& x, double alpha_bar);

/// Flow-time analog: marginal of (1-s) x0 + s eps with components
/// N((1-s) mu_k, (1-s)^2 Sigma_k + s^2 I); returns the ideal velocity
/// E[eps - x0 | x_s = x] and the marginal density.
struct VelocityOracleResult {
    Vec2 velocity;
    double density;
};

VelocityOracleResult mixture_velocity_oracle(const MixtureSpec& spec, const Vec2& x, double s);

} // namespace imbalab::synth
