#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "imbalab/nn.hpp"

namespace imbalab::diffusion {

using imbalab::Vec2;

/// What the network's 2-vector output means.
enum class Objective { epsilon, velocity };

Objective objective_from_string(const std::string& s);
std::string to_string(Objective o);

struct NoiseSchedule {
    int T = 0;
    std::vector<double> beta;      // beta[t-1] for t in [1, T]
    std::vector<double> alpha_bar; // alpha_bar[t-1], strictly decreasing

    double beta_at(int t) const;      // t in [1, T]
    double alpha_bar_at(int t) const; // t in [1, T]
    /// Largest noise level retains < 1% signal (production schedules).
    bool terminal_is_noise() const { return !alpha_bar.empty() && alpha_bar.back() < 0.01; }
    /// Step whose alpha_bar is closest to the given value.
    int step_for_alpha_bar(double target) const;
};

/// Linear beta ramp from beta_min to beta_max over T steps.
NoiseSchedule make_schedule(int T, double beta_min, double beta_max);

/// x_t = sqrt(alpha_bar_t) x0 + sqrt(1 - alpha_bar_t) eps.
Vec2 add_noise(const Vec2& x0, const Vec2& eps, int t, const NoiseSchedule& sched);

struct GuidanceConfig {
    /// Weight on the conditional/unconditional difference at inference.
    /// 0 reduces to unconditional sampling, 1 to plain conditional.
    double scale = 1.0;

    void validate() const;
};

/// Per-sample intermediate states; states[i] has steps+1 entries and starts
/// at the initial noise draw.
struct Trajectory {
    std::vector<std::vector<Vec2>> states;
};

struct SampleResult {
    std::vector<Vec2> points;
    Trajectory traj;
};

/// Combined prediction eps_u + scale * (eps_c - eps_u). Scale 0 and 1 are
/// special-cased so they reproduce the unconditional / conditional paths
/// bit-exactly.
Matrix guided_prediction(const nn::ModelParams& params, std::span<const Vec2> x,
                         std::span<const double> t_norm, int cond, const GuidanceConfig& g);

/// Reverse ancestral chain from standard normal noise, all T steps.
SampleResult ddpm_sample(const nn::ModelParams& params, const NoiseSchedule& sched, int cond,
                         int n, const GuidanceConfig& g, uint64_t seed,
                         bool record_traj = false);

/// x_s = (1-s) x0 + s eps; returns (x_s, velocity target eps - x0).
std::pair<Vec2, Vec2> flow_interpolate(const Vec2& x0, const Vec2& eps, double s);

/// Velocity field over a batch at flow time s; rows are 2-vectors.
using FlowField = std::function<Matrix(std::span<const Vec2> x, double s)>;

/// Euler integration of dx/ds = v from s=1 (noise) down to s=0 (data).
/// Throws NumericError naming the step index if the state goes non-finite.
SampleResult flow_integrate(const FlowField& field, int steps, int n, uint64_t seed,
                            bool record_traj = false);

/// flow_integrate with the model (plus guidance) as the field.
SampleResult flow_sample(const nn::ModelParams& params, int steps, int cond,
                         const GuidanceConfig& g, int n, uint64_t seed,
                         bool record_traj = false);

struct GridSpec {
    double xmin = -2.0, xmax = 2.0;
    double ymin = -2.0, ymax = 2.0;
    int nx = 21, ny = 21;

    void validate() const;
};

struct FieldPoint {
    double x, y, vx, vy, t;
};

/// Model prediction at every lattice point, for quiver plotting. `time_norm`
/// is the normalized time fed to the network; cond may be a class index or
/// layout.null_cond().
std::vector<FieldPoint> score_field(const nn::ModelParams& params, const GridSpec& grid,
                                    double time_norm, int cond);

} // namespace imbalab::diffusion
