#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "imbalab/diffusion.hpp"
#include "imbalab/errors.hpp"
#include "imbalab/rng.hpp"
#include "imbalab/synth_data.hpp"

using namespace imbalab;
using diffusion::GuidanceConfig;
using diffusion::NoiseSchedule;

namespace {

nn::ModelParams tiny_model(uint64_t seed) {
    nn::ModelLayout lay;
    lay.hidden_width = 16;
    lay.hidden_layers = 2;
    lay.num_classes = 2;
    return nn::init_params(lay, seed);
}

} // namespace

TEST_CASE("make_schedule: single step") {
    const NoiseSchedule s = diffusion::make_schedule(1, 0.5, 0.5);
    CHECK(s.alpha_bar_at(1) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(s.beta_at(1) == 0.5);
}

TEST_CASE("make_schedule: default production schedule decays below 1%") {
    const NoiseSchedule s = diffusion::make_schedule(1000, 1e-4, 0.02);
    CHECK(s.alpha_bar.front() == doctest::Approx(1.0 - 1e-4).epsilon(1e-12));
    for (int t = 2; t <= 1000; ++t) {
        CHECK(s.alpha_bar_at(t) < s.alpha_bar_at(t - 1));
        CHECK(s.beta_at(t) > 0.0);
        CHECK(s.beta_at(t) < 1.0);
    }
    CHECK(s.alpha_bar_at(1000) < 0.01);
    CHECK(s.terminal_is_noise());
}

TEST_CASE("make_schedule rejects inverted beta range") {
    CHECK_THROWS_AS(diffusion::make_schedule(10, 0.02, 1e-4), ConfigError);
    CHECK_THROWS_AS(diffusion::make_schedule(0, 1e-4, 0.02), ConfigError);
}

TEST_CASE("add_noise limits and direct value") {
    NoiseSchedule s;
    s.T = 3;
    s.beta = {0.1, 0.1, 0.1};
    s.alpha_bar = {1.0, 0.25, 0.0};

    const Vec2 x0{1.0, 0.0}, eps{0.0, 1.0};
    const Vec2 a = diffusion::add_noise(x0, eps, 1, s); // alpha_bar = 1
    CHECK(a[0] == 1.0);
    CHECK(a[1] == 0.0);
    const Vec2 b = diffusion::add_noise(x0, eps, 3, s); // alpha_bar = 0
    CHECK(b[0] == 0.0);
    CHECK(b[1] == 1.0);
    const Vec2 c = diffusion::add_noise(x0, eps, 2, s); // alpha_bar = 0.25
    CHECK(c[0] == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(c[1] == doctest::Approx(std::sqrt(0.75)).epsilon(1e-12));

    CHECK_THROWS_AS(diffusion::add_noise(x0, eps, 0, s), InputError);
    CHECK_THROWS_AS(diffusion::add_noise(x0, eps, 4, s), InputError);
}

TEST_CASE("add_noise output is bit-recomputable from its inputs") {
    const NoiseSchedule s = diffusion::make_schedule(100, 1e-3, 0.05);
    Rng rng(5);
    for (int rep = 0; rep < 50; ++rep) {
        const Vec2 x0 = rng.normal2();
        const Vec2 eps = rng.normal2();
        const int t = 1 + static_cast<int>(rng.uniform_int(100));
        const Vec2 xt = diffusion::add_noise(x0, eps, t, s);
        const double c1 = std::sqrt(s.alpha_bar_at(t));
        const double c2 = std::sqrt(1.0 - s.alpha_bar_at(t));
        CHECK(xt[0] == c1 * x0[0] + c2 * eps[0]);
        CHECK(xt[1] == c1 * x0[1] + c2 * eps[1]);
    }
}

TEST_CASE("guided prediction: scale 0 and 1 are exact path identities") {
    const auto p = tiny_model(3);
    Rng rng(4);
    std::vector<Vec2> x;
    std::vector<double> t;
    for (int i = 0; i < 9; ++i) {
        x.push_back(rng.normal2());
        t.push_back(rng.uniform());
    }
    std::vector<int> cond_c(9, 1), cond_null(9, p.layout.null_cond());

    const Matrix u = nn::forward(p, x, t, cond_null);
    const Matrix c = nn::forward(p, x, t, cond_c);
    const Matrix g0 = diffusion::guided_prediction(p, x, t, 1, GuidanceConfig{0.0});
    const Matrix g1 = diffusion::guided_prediction(p, x, t, 1, GuidanceConfig{1.0});
    CHECK(g0.data == u.data);
    CHECK(g1.data == c.data);

    // intermediate scale interpolates
    const Matrix gh = diffusion::guided_prediction(p, x, t, 1, GuidanceConfig{0.5});
    for (size_t i = 0; i < gh.data.size(); ++i)
        CHECK(gh.data[i] == doctest::Approx(0.5 * (u.data[i] + c.data[i])).epsilon(1e-12));
}

TEST_CASE("ddpm_sample: deterministic, CFG scale-0 equals unconditional run") {
    const auto p = tiny_model(8);
    const NoiseSchedule s = diffusion::make_schedule(25, 1e-3, 0.05);

    const auto a = diffusion::ddpm_sample(p, s, 1, 6, GuidanceConfig{0.0}, 42, true);
    const auto b = diffusion::ddpm_sample(p, s, p.layout.null_cond(), 6, GuidanceConfig{1.0}, 42,
                                          true);
    const auto c = diffusion::ddpm_sample(p, s, 1, 6, GuidanceConfig{0.0}, 42, true);
    for (int i = 0; i < 6; ++i) {
        CHECK(a.points[i] == b.points[i]);
        CHECK(a.points[i] == c.points[i]);
    }

    // trajectory integrity: T+1 states, starting at the noise draw
    REQUIRE(a.traj.states.size() == 6);
    for (const auto& st : a.traj.states) CHECK(st.size() == 26);
    Rng rng(42);
    for (int i = 0; i < 6; ++i) {
        const Vec2 z = rng.normal2();
        CHECK(a.traj.states[i][0][0] == z[0]);
        CHECK(a.traj.states[i][0][1] == z[1]);
    }
}

TEST_CASE("flow_interpolate endpoints and midpoint") {
    const Vec2 x0{1.0, 0.0}, eps{-1.0, 0.0};
    auto [a, va] = diffusion::flow_interpolate(x0, eps, 0.0);
    CHECK(a == x0);
    auto [b, vb] = diffusion::flow_interpolate(x0, eps, 1.0);
    CHECK(b == eps);
    auto [m, vm] = diffusion::flow_interpolate(x0, eps, 0.5);
    CHECK(m[0] == 0.0);
    CHECK(m[1] == 0.0);
    CHECK(vm[0] == -2.0);
    CHECK(vm[1] == 0.0);
    CHECK(va == vb); // velocity target does not depend on s
    CHECK_THROWS_AS(diffusion::flow_interpolate(x0, eps, 1.5), InputError);
}

TEST_CASE("flow_integrate: zero field returns the initial noise") {
    diffusion::FlowField zero = [](std::span<const Vec2> x, double) {
        return Matrix(static_cast<int>(x.size()), 2, 0.0);
    };
    const auto res = diffusion::flow_integrate(zero, 30, 5, 7, true);
    for (int i = 0; i < 5; ++i) {
        CHECK(res.points[i] == res.traj.states[i][0]);
        CHECK(res.traj.states[i].size() == 31);
    }
}

TEST_CASE("flow_integrate: steps=1 is exactly one Euler update") {
    diffusion::FlowField constant = [](std::span<const Vec2> x, double) {
        Matrix v(static_cast<int>(x.size()), 2);
        for (int i = 0; i < v.rows; ++i) {
            v(i, 0) = 0.7;
            v(i, 1) = -0.2;
        }
        return v;
    };
    const auto res = diffusion::flow_integrate(constant, 1, 4, 9, true);
    for (int i = 0; i < 4; ++i) {
        const Vec2 z = res.traj.states[i][0];
        CHECK(res.points[i][0] == z[0] - 0.7);
        CHECK(res.points[i][1] == z[1] - (-0.2));
    }
}

TEST_CASE("flow_integrate follows the closed-form single-Gaussian flow") {
    // For x0 ~ N(mu, diag(sx^2, sy^2)) the exact transport of initial noise z
    // lands at mu + (sx z1, sy z2).
    synth::MixtureSpec spec;
    spec.components = {{{0.6, -0.4}, {0.25, 0.1}, 0.0, 1}};
    diffusion::FlowField oracle_field = [&](std::span<const Vec2> x, double s) {
        Matrix v(static_cast<int>(x.size()), 2);
        for (size_t i = 0; i < x.size(); ++i) {
            const auto r = synth::mixture_velocity_oracle(spec, x[i], s);
            v(static_cast<int>(i), 0) = r.velocity[0];
            v(static_cast<int>(i), 1) = r.velocity[1];
        }
        return v;
    };

    auto endpoint_err = [&](int steps) {
        const auto res = diffusion::flow_integrate(oracle_field, steps, 40, 13, true);
        double max_err = 0.0;
        for (int i = 0; i < 40; ++i) {
            const Vec2 z = res.traj.states[i][0];
            const Vec2 want{0.6 + 0.25 * z[0], -0.4 + 0.1 * z[1]};
            max_err = std::max(max_err, norm2(sub2(res.points[i], want)));
        }
        return max_err;
    };

    const double e200 = endpoint_err(200);
    const double e400 = endpoint_err(400);
    CHECK(e200 < 0.05);
    CHECK(e400 < 0.8 * e200 + 1e-9); // first-order convergence
}

TEST_CASE("flow_integrate flags non-finite states with the step index") {
    diffusion::FlowField blowup = [](std::span<const Vec2> x, double) {
        Matrix v(static_cast<int>(x.size()), 2, std::numeric_limits<double>::infinity());
        return v;
    };
    CHECK_THROWS_WITH_AS(diffusion::flow_integrate(blowup, 10, 2, 3),
                         doctest::Contains("step"), NumericError);
}

TEST_CASE("flow_sample matches zero-field initial draws for a zero model") {
    auto p = tiny_model(10);
    for (auto& l : p.layers) {
        l.w.fill(0.0);
        std::fill(l.b.begin(), l.b.end(), 0.0);
    }
    const auto res = diffusion::flow_sample(p, 20, 0, GuidanceConfig{1.0}, 8, 77, true);
    for (int i = 0; i < 8; ++i) CHECK(res.points[i] == res.traj.states[i][0]);
}

TEST_CASE("score_field: constant-output model gives a uniform field") {
    auto p = tiny_model(12);
    for (auto& l : p.layers) {
        l.w.fill(0.0);
        std::fill(l.b.begin(), l.b.end(), 0.0);
    }
    p.layers.back().b = {0.3, -0.6};
    diffusion::GridSpec grid;
    grid.nx = 5;
    grid.ny = 4;
    const auto field = diffusion::score_field(p, grid, 0.5, p.layout.null_cond());
    REQUIRE(field.size() == 20);
    for (const auto& f : field) {
        CHECK(f.vx == doctest::Approx(0.3).epsilon(1e-15));
        CHECK(f.vy == doctest::Approx(-0.6).epsilon(1e-15));
        CHECK(f.t == 0.5);
    }
}

TEST_CASE("score_field: single-point lattice equals one forward call") {
    const auto p = tiny_model(13);
    diffusion::GridSpec grid;
    grid.xmin = grid.xmax = 0.37;
    grid.ymin = grid.ymax = -0.81;
    grid.nx = grid.ny = 1;
    const auto field = diffusion::score_field(p, grid, 0.25, 1);
    REQUIRE(field.size() == 1);
    std::vector<Vec2> x{{0.37, -0.81}};
    std::vector<double> t{0.25};
    std::vector<int> c{1};
    const Matrix pred = nn::forward(p, x, t, c);
    CHECK(field[0].vx == pred(0, 0));
    CHECK(field[0].vy == pred(0, 1));
}

TEST_CASE("score_field rejects degenerate lattices") {
    const auto p = tiny_model(14);
    diffusion::GridSpec bad;
    bad.nx = 0;
    CHECK_THROWS_AS(diffusion::score_field(p, bad, 0.5, 0), ConfigError);
}
