#include "imbalab/diffusion.hpp"

#include <cmath>

#include "imbalab/errors.hpp"
#include "imbalab/rng.hpp"

namespace imbalab::diffusion {

Objective objective_from_string(const std::string& s) {
    if (s == "epsilon" || s == "ddpm") return Objective::epsilon;
    if (s == "velocity" || s == "flow") return Objective::velocity;
    throw ConfigError("unknown objective: " + s);
}

std::string to_string(Objective o) {
    return o == Objective::epsilon ? "epsilon" : "velocity";
}

double NoiseSchedule::beta_at(int t) const {
    if (t < 1 || t > T) throw InputError("schedule: timestep out of range");
    return beta[static_cast<size_t>(t) - 1];
}

double NoiseSchedule::alpha_bar_at(int t) const {
    if (t < 1 || t > T) throw InputError("schedule: timestep out of range");
    return alpha_bar[static_cast<size_t>(t) - 1];
}

int NoiseSchedule::step_for_alpha_bar(double target) const {
    int best = 1;
    double best_gap = std::abs(alpha_bar[0] - target);
    for (int t = 2; t <= T; ++t) {
        const double gap = std::abs(alpha_bar[static_cast<size_t>(t) - 1] - target);
        if (gap < best_gap) {
            best_gap = gap;
            best = t;
        }
    }
    return best;
}

NoiseSchedule make_schedule(int T, double beta_min, double beta_max) {
    if (T < 1) throw ConfigError("schedule: T must be >= 1");
    if (!(beta_min > 0.0) || !(beta_min <= beta_max) || !(beta_max < 1.0))
        throw ConfigError("schedule: need 0 < beta_min <= beta_max < 1");
    NoiseSchedule s;
    s.T = T;
    s.beta.resize(T);
    s.alpha_bar.resize(T);
    double prod = 1.0;
    for (int t = 1; t <= T; ++t) {
        const double frac = T > 1 ? static_cast<double>(t - 1) / (T - 1) : 0.0;
        const double b = beta_min + (beta_max - beta_min) * frac;
        s.beta[t - 1] = b;
        prod *= 1.0 - b;
        s.alpha_bar[t - 1] = prod;
    }
    return s;
}

Vec2 add_noise(const Vec2& x0, const Vec2& eps, int t, const NoiseSchedule& sched) {
    const double ab = sched.alpha_bar_at(t);
    const double c1 = std::sqrt(ab);
    const double c2 = std::sqrt(1.0 - ab);
    return {c1 * x0[0] + c2 * eps[0], c1 * x0[1] + c2 * eps[1]};
}

void GuidanceConfig::validate() const {
    if (!(scale >= 0.0)) throw ConfigError("guidance: scale must be >= 0");
}

Matrix guided_prediction(const nn::ModelParams& params, std::span<const Vec2> x,
                         std::span<const double> t_norm, int cond, const GuidanceConfig& g) {
    const int n = static_cast<int>(x.size());
    const int null_c = params.layout.null_cond();
    std::vector<int> cvec(n, cond);
    if (g.scale == 0.0) {
        std::fill(cvec.begin(), cvec.end(), null_c);
        return nn::forward(params, x, t_norm, cvec);
    }
    if (g.scale == 1.0) return nn::forward(params, x, t_norm, cvec);

    const Matrix pc = nn::forward(params, x, t_norm, cvec);
    std::fill(cvec.begin(), cvec.end(), null_c);
    const Matrix pu = nn::forward(params, x, t_norm, cvec);
    Matrix out(n, pc.cols);
    for (size_t i = 0; i < out.data.size(); ++i)
        out.data[i] = pu.data[i] + g.scale * (pc.data[i] - pu.data[i]);
    return out;
}

SampleResult ddpm_sample(const nn::ModelParams& params, const NoiseSchedule& sched, int cond,
                         int n, const GuidanceConfig& g, uint64_t seed, bool record_traj) {
    if (n < 1) throw InputError("ddpm_sample: n must be >= 1");
    g.validate();
    Rng rng(seed);

    std::vector<Vec2> x(n);
    for (auto& v : x) v = rng.normal2();

    SampleResult res;
    if (record_traj) {
        res.traj.states.assign(n, {});
        for (int i = 0; i < n; ++i) {
            res.traj.states[i].reserve(sched.T + 1);
            res.traj.states[i].push_back(x[i]);
        }
    }

    std::vector<double> tn(n);
    for (int t = sched.T; t >= 1; --t) {
        std::fill(tn.begin(), tn.end(), static_cast<double>(t) / sched.T);
        const Matrix eps_hat = guided_prediction(params, x, tn, cond, g);

        const double b = sched.beta_at(t);
        const double a = 1.0 - b;
        const double ab = sched.alpha_bar_at(t);
        const double coef = b / std::sqrt(1.0 - ab);
        const double inv_sqrt_a = 1.0 / std::sqrt(a);
        const double sigma = t > 1 ? std::sqrt(b) : 0.0;
        for (int i = 0; i < n; ++i) {
            Vec2 z{0.0, 0.0};
            if (t > 1) z = rng.normal2();
            for (int d = 0; d < 2; ++d)
                x[i][d] = inv_sqrt_a * (x[i][d] - coef * eps_hat(i, d)) + sigma * z[d];
            if (record_traj) res.traj.states[i].push_back(x[i]);
        }
    }
    res.points = std::move(x);
    return res;
}

std::pair<Vec2, Vec2> flow_interpolate(const Vec2& x0, const Vec2& eps, double s) {
    if (!(s >= 0.0 && s <= 1.0)) throw InputError("flow_interpolate: s must be in [0, 1]");
    Vec2 xs{(1.0 - s) * x0[0] + s * eps[0], (1.0 - s) * x0[1] + s * eps[1]};
    Vec2 v{eps[0] - x0[0], eps[1] - x0[1]};
    return {xs, v};
}

SampleResult flow_integrate(const FlowField& field, int steps, int n, uint64_t seed,
                            bool record_traj) {
    if (steps < 1) throw ConfigError("flow_integrate: steps must be >= 1");
    if (n < 1) throw InputError("flow_integrate: n must be >= 1");
    Rng rng(seed);

    std::vector<Vec2> x(n);
    for (auto& v : x) v = rng.normal2();

    SampleResult res;
    if (record_traj) {
        res.traj.states.assign(n, {});
        for (int i = 0; i < n; ++i) {
            res.traj.states[i].reserve(steps + 1);
            res.traj.states[i].push_back(x[i]);
        }
    }

    const double ds = 1.0 / steps;
    for (int k = steps; k >= 1; --k) {
        const double s = static_cast<double>(k) * ds;
        const Matrix v = field(x, s);
        for (int i = 0; i < n; ++i) {
            x[i][0] -= ds * v(i, 0);
            x[i][1] -= ds * v(i, 1);
            if (!std::isfinite(x[i][0]) || !std::isfinite(x[i][1]))
                throw NumericError("flow_integrate: non-finite state at step " +
                                   std::to_string(steps - k + 1));
            if (record_traj) res.traj.states[i].push_back(x[i]);
        }
    }
    res.points = std::move(x);
    return res;
}

SampleResult flow_sample(const nn::ModelParams& params, int steps, int cond,
                         const GuidanceConfig& g, int n, uint64_t seed, bool record_traj) {
    g.validate();
    FlowField field = [&](std::span<const Vec2> x, double s) {
        std::vector<double> tn(x.size(), s);
        return guided_prediction(params, x, tn, cond, g);
    };
    return flow_integrate(field, steps, n, seed, record_traj);
}

void GridSpec::validate() const {
    if (nx < 1 || ny < 1) throw ConfigError("grid: nx and ny must be >= 1");
    if (nx > 1 && !(xmax > xmin)) throw ConfigError("grid: xmax must exceed xmin");
    if (ny > 1 && !(ymax > ymin)) throw ConfigError("grid: ymax must exceed ymin");
}

std::vector<FieldPoint> score_field(const nn::ModelParams& params, const GridSpec& grid,
                                    double time_norm, int cond) {
    grid.validate();
    std::vector<Vec2> pts;
    pts.reserve(static_cast<size_t>(grid.nx) * grid.ny);
    for (int iy = 0; iy < grid.ny; ++iy) {
        const double y =
            grid.ny > 1 ? grid.ymin + (grid.ymax - grid.ymin) * iy / (grid.ny - 1) : grid.ymin;
        for (int ix = 0; ix < grid.nx; ++ix) {
            const double x =
                grid.nx > 1 ? grid.xmin + (grid.xmax - grid.xmin) * ix / (grid.nx - 1) : grid.xmin;
            pts.push_back({x, y});
        }
    }
    std::vector<double> tn(pts.size(), time_norm);
    std::vector<int> cv(pts.size(), cond);
    const Matrix pred = nn::forward(params, pts, tn, cv);

    std::vector<FieldPoint> out;
    out.reserve(pts.size());
    for (size_t i = 0; i < pts.size(); ++i)
        out.push_back({pts[i][0], pts[i][1], pred(static_cast<int>(i), 0),
                       pred(static_cast<int>(i), 1), time_norm});
    return out;
}

} // namespace imbalab::diffusion
