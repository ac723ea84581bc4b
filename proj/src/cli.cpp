#include "imbalab/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>

#include <CLI11.hpp>
#include <json.hpp>

#include "imbalab/bench.hpp"
#include "imbalab/csv.hpp"
#include "imbalab/errors.hpp"
#include "imbalab/svg.hpp"

namespace imbalab::cli {

namespace fs = std::filesystem;

void RunConfig::apply_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("config parse error in " + path + ": " + e.what());
    }
    try {
        if (j.contains("mixture")) mixture_path = j["mixture"].get<std::string>();
        if (j.contains("counts")) counts = j["counts"].get<std::vector<long>>();
        if (j.contains("kind")) kind = j["kind"].get<std::string>();
        if (j.contains("gamma")) gamma = j["gamma"].get<double>();
        if (j.contains("lambda")) lambda = j["lambda"].get<double>();
        if (j.contains("weight_mode")) weight_mode = j["weight_mode"].get<std::string>();
        if (j.contains("cond_drop_prob")) cond_drop_prob = j["cond_drop_prob"].get<double>();
        if (j.contains("residual_floor")) residual_floor = j["residual_floor"].get<double>();
        if (j.contains("objective")) objective = j["objective"].get<std::string>();
        if (j.contains("steps")) steps = j["steps"].get<int>();
        if (j.contains("batch")) batch = j["batch"].get<int>();
        if (j.contains("lr")) lr = j["lr"].get<double>();
        if (j.contains("lr_final")) lr_final = j["lr_final"].get<double>();
        if (j.contains("optimizer")) optimizer = j["optimizer"].get<std::string>();
        if (j.contains("width")) width = j["width"].get<int>();
        if (j.contains("hidden_layers")) hidden_layers = j["hidden_layers"].get<int>();
        if (j.contains("schedule_T")) schedule_T = j["schedule_T"].get<int>();
        if (j.contains("beta_min")) beta_min = j["beta_min"].get<double>();
        if (j.contains("beta_max")) beta_max = j["beta_max"].get<double>();
        if (j.contains("flow_steps")) flow_steps = j["flow_steps"].get<int>();
        if (j.contains("guidance")) guidance = j["guidance"].get<double>();
        if (j.contains("eval_samples")) eval_samples = j["eval_samples"].get<int>();
        if (j.contains("probe_draws")) probe_draws = j["probe_draws"].get<int>();
        if (j.contains("axis")) axis = j["axis"].get<std::string>();
        if (j.contains("values")) values = j["values"].get<std::vector<std::string>>();
        if (j.contains("seeds")) seeds = j["seeds"].get<int>();
        if (j.contains("seed")) seed = j["seed"].get<uint64_t>();
        if (j.contains("max_threads")) max_threads = j["max_threads"].get<int>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("config schema error in " + path + ": " + e.what());
    }
}

void RunConfig::validate() const {
    loss_config().validate();        // loss family knobs
    layout(2).validate();            // model shape knobs
    (void)diffusion::objective_from_string(objective);
    (void)nn::optimizer_from_string(optimizer);
    if (steps < 1) throw ConfigError("config: steps must be >= 1");
    if (batch < 1) throw ConfigError("config: batch must be >= 1");
    if (!(lr > 0.0)) throw ConfigError("config: lr must be positive");
    if (lr_final > lr) throw ConfigError("config: lr_final must not exceed lr");
    if (schedule_T < 1) throw ConfigError("config: schedule_T must be >= 1");
    if (!(beta_min > 0.0 && beta_min <= beta_max && beta_max < 1.0))
        throw ConfigError("config: need 0 < beta_min <= beta_max < 1");
    if (flow_steps < 1) throw ConfigError("config: flow_steps must be >= 1");
    if (!(guidance >= 0.0)) throw ConfigError("config: guidance must be >= 0");
    if (eval_samples < 1 || probe_draws < 1)
        throw ConfigError("config: eval_samples and probe_draws must be >= 1");
    if (seeds < 1) throw ConfigError("config: seeds must be >= 1");
    if (mixture_path.empty()) {
        if (counts.empty()) throw ConfigError("config: counts must be non-empty");
        for (long c : counts)
            if (c < 0) throw ConfigError("config: counts must be >= 0");
    }
}

synth::MixtureSpec RunConfig::mixture() const {
    if (!mixture_path.empty()) return synth::MixtureSpec::from_json_file(mixture_path);
    if (counts.size() == 2) return synth::MixtureSpec::two_class(counts[0], counts[1]);
    throw ConfigError("config: inline counts support exactly two classes; use a mixture file");
}

balance::LossConfig RunConfig::loss_config() const {
    balance::LossConfig c;
    c.kind = balance::loss_kind_from_string(kind);
    c.gamma = gamma;
    c.lambda = lambda;
    c.weight_mode = balance::weight_mode_from_string(weight_mode);
    c.cond_drop_prob = cond_drop_prob;
    c.residual_floor = residual_floor;
    return c;
}

nn::ModelLayout RunConfig::layout(int num_classes) const {
    nn::ModelLayout lay;
    lay.hidden_width = width;
    lay.hidden_layers = hidden_layers;
    lay.num_classes = num_classes;
    return lay;
}

diffusion::NoiseSchedule RunConfig::schedule() const {
    return diffusion::make_schedule(schedule_T, beta_min, beta_max);
}

std::string resolve_output(const std::string& path) {
    fs::path p(path);
    if (p.is_relative()) {
        if (const char* root = std::getenv("IMBALAB_OUT_ROOT")) p = fs::path(root) / p;
    }
    if (p.has_parent_path()) {
        std::error_code ec;
        fs::create_directories(p.parent_path(), ec);
        if (ec) throw IoError("cannot create directory " + p.parent_path().string());
    }
    return p.string();
}

FigureKind figure_kind_from_string(const std::string& s) {
    if (s == "scatter") return FigureKind::scatter;
    if (s == "quiver") return FigureKind::quiver;
    if (s == "trajectory") return FigureKind::trajectory;
    if (s == "bar") return FigureKind::bar;
    throw ConfigError("unknown figure kind: " + s);
}

// ---------------------------------------------------------------------------
// subcommands
// ---------------------------------------------------------------------------

void cmd_gen_data(const RunConfig& cfg, const std::string& out_csv) {
    cfg.validate();
    const synth::MixtureSpec spec = cfg.mixture();
    const synth::LabeledDataset data = synth::sample_mixture(spec, mix_seed(cfg.seed, 0x64617461ULL));
    CsvWriter w(resolve_output(out_csv));
    w.row({"x", "y", "label"});
    for (size_t i = 0; i < data.size(); ++i)
        w.row({fmt_num(data.points[i][0]), fmt_num(data.points[i][1]),
               std::to_string(data.labels[i])});
}

namespace {

synth::LabeledDataset load_dataset_csv(const std::string& path) {
    const CsvTable t = read_csv(path);
    const int cx = t.require_col("x");
    const int cy = t.require_col("y");
    const int cl = t.require_col("label");
    synth::LabeledDataset ds;
    for (const auto& row : t.rows) {
        ds.points.push_back({std::stod(row[cx]), std::stod(row[cy])});
        ds.labels.push_back(std::stoi(row[cl]));
    }
    return ds;
}

} // namespace

void cmd_train(const RunConfig& cfg, const std::string& data_csv, const std::string& out_ckpt,
               const std::string& log_csv, const std::string& init_ckpt) {
    cfg.validate();
    const synth::LabeledDataset data = load_dataset_csv(data_csv);
    if (data.size() == 0) throw InputError("train: dataset csv has no rows");
    int num_classes = 0;
    for (int l : data.labels) num_classes = std::max(num_classes, l + 1);

    nn::ModelParams params;
    if (init_ckpt.empty()) {
        params = nn::init_params(cfg.layout(num_classes), mix_seed(cfg.seed, 0x696e6974ULL));
    } else {
        params = load_checkpoint(init_ckpt).params;
        if (params.layout.num_classes < num_classes)
            throw InputError("train: init checkpoint supports fewer classes than the dataset");
    }
    balance::TrainPlan plan;
    plan.objective = diffusion::objective_from_string(cfg.objective);
    plan.schedule = cfg.schedule();
    plan.steps = cfg.steps;
    plan.batch = cfg.batch;
    plan.optimizer.mode = nn::optimizer_from_string(cfg.optimizer);
    plan.optimizer.lr = cfg.lr;
    plan.lr_final = cfg.lr_final;
    plan.seed = cfg.seed;

    const balance::TrainResult res = balance::train(std::move(params), data, cfg.loss_config(), plan);

    Checkpoint ckpt;
    ckpt.params = res.params;
    ckpt.objective = plan.objective;
    ckpt.schedule_T = cfg.schedule_T;
    ckpt.schedule_beta_min = cfg.beta_min;
    ckpt.schedule_beta_max = cfg.beta_max;
    save_checkpoint(resolve_output(out_ckpt), ckpt);
    if (!log_csv.empty())
        balance::write_train_log(resolve_output(log_csv), cfg.loss_config(), res.log);

    if (res.diverged_at)
        throw NumericError("training diverged at step " + std::to_string(*res.diverged_at) +
                           "; last finite checkpoint written to " + out_ckpt);
}

namespace {

int parse_cond(const std::string& s, const nn::ModelLayout& lay) {
    if (s == "null" || s == "none") return lay.null_cond();
    const int c = std::stoi(s);
    if (c < 0 || c >= lay.num_classes)
        throw InputError("condition index out of range: " + s);
    return c;
}

} // namespace

void cmd_sample(const SampleOptions& opt) {
    const Checkpoint ckpt = load_checkpoint(opt.ckpt);
    const int cond = parse_cond(opt.cond, ckpt.params.layout);
    diffusion::GuidanceConfig g{opt.guidance};
    g.validate();
    if (opt.n < 1) throw ConfigError("sample: n must be >= 1");

    diffusion::Objective sampler = ckpt.objective;
    if (!opt.sampler.empty()) sampler = diffusion::objective_from_string(opt.sampler);

    const bool want_traj = !opt.traj_csv.empty();
    diffusion::SampleResult res;
    if (sampler == diffusion::Objective::epsilon)
        res = diffusion::ddpm_sample(ckpt.params, ckpt.schedule(), cond, opt.n, g, opt.seed,
                                     want_traj);
    else
        res = diffusion::flow_sample(ckpt.params, opt.steps, cond, g, opt.n, opt.seed, want_traj);

    CsvWriter w(resolve_output(opt.out_csv));
    w.row({"x", "y", "label"});
    for (const auto& p : res.points)
        w.row({fmt_num(p[0]), fmt_num(p[1]), opt.cond == "null" ? "-1" : opt.cond});

    if (want_traj) {
        CsvWriter tw(resolve_output(opt.traj_csv));
        tw.row({"sample_id", "step", "x", "y"});
        for (size_t i = 0; i < res.traj.states.size(); ++i)
            for (size_t s = 0; s < res.traj.states[i].size(); ++s)
                tw.row({std::to_string(i), std::to_string(s), fmt_num(res.traj.states[i][s][0]),
                        fmt_num(res.traj.states[i][s][1])});
    }
}

void cmd_probe(const ProbeOptions& opt) {
    const Checkpoint ckpt = load_checkpoint(opt.ckpt);
    const synth::MixtureSpec spec = opt.mixture_path.empty()
                                        ? synth::MixtureSpec::two_class(9900, 100)
                                        : synth::MixtureSpec::from_json_file(opt.mixture_path);
    const auto to_balance = ckpt.objective == diffusion::Objective::epsilon
                                ? balance::Objective::epsilon
                                : balance::Objective::velocity;
    const std::vector<double> d = synth::imba_probe(ckpt.params, spec, to_balance,
                                                    ckpt.schedule(), opt.gamma, opt.draws,
                                                    opt.seed);
    CsvWriter w(resolve_output(opt.out_csv));
    w.row({"class", "d_mean"});
    for (size_t c = 0; c < d.size(); ++c) w.row({std::to_string(c), fmt_num(d[c])});
}

void cmd_score_field(const FieldOptions& opt) {
    const Checkpoint ckpt = load_checkpoint(opt.ckpt);
    const int cond = parse_cond(opt.cond, ckpt.params.layout);
    const auto field = diffusion::score_field(ckpt.params, opt.grid, opt.time_norm, cond);
    CsvWriter w(resolve_output(opt.out_csv));
    w.row({"x", "y", "vx", "vy", "t"});
    for (const auto& p : field)
        w.row({fmt_num(p.x), fmt_num(p.y), fmt_num(p.vx), fmt_num(p.vy), fmt_num(p.t)});
}

namespace {

/// Directional read-outs per axis; written next to the results csv.
std::string experiment_summary(const synth::SweepSpec& spec,
                               const std::vector<synth::ExperimentRow>& rows) {
    // group rows by value, preserving order
    std::vector<std::string> values;
    std::map<std::string, std::vector<const synth::ExperimentRow*>> by_value;
    for (const auto& r : rows) {
        if (!by_value.count(r.axis_value)) values.push_back(r.axis_value);
        by_value[r.axis_value].push_back(&r);
    }
    auto mean_of = [&](const std::string& v, auto field) {
        double acc = 0.0;
        for (const auto* r : by_value[v]) acc += r->*field;
        return acc / static_cast<double>(by_value[v].size());
    };

    std::string out = "axis: " + synth::to_string(spec.axis) + "\n";
    for (const auto& v : values) {
        out += "  " + v + ": mean tail_drift=" +
               fmt_num(mean_of(v, &synth::ExperimentRow::tail_drift)) +
               " mean success=" + fmt_num(mean_of(v, &synth::ExperimentRow::success_rate)) +
               " mean D_tail-D_head=" +
               fmt_num(mean_of(v, &synth::ExperimentRow::d_tail) -
                       mean_of(v, &synth::ExperimentRow::d_head)) +
               "\n";
    }

    if (values.size() >= 2) {
        // per-seed monotone comparison along the axis order
        int seeds = static_cast<int>(by_value[values[0]].size());
        int drift_monotone = 0, success_first_vs_last = 0;
        for (int s = 0; s < seeds; ++s) {
            bool mono = true;
            for (size_t v = 1; v < values.size(); ++v)
                if (by_value[values[v]][s]->tail_drift <
                    by_value[values[v - 1]][s]->tail_drift - 1e-12)
                    mono = false;
            drift_monotone += mono ? 1 : 0;
            if (by_value[values.back()][s]->success_rate >=
                by_value[values.front()][s]->success_rate)
                success_first_vs_last += 1;
        }
        out += "seeds with nondecreasing tail_drift along axis: " +
               std::to_string(drift_monotone) + "/" + std::to_string(seeds) + "\n";
        out += "seeds with success(last) >= success(first): " +
               std::to_string(success_first_vs_last) + "/" + std::to_string(seeds) + "\n";
    }
    return out;
}

} // namespace

void cmd_experiment(const RunConfig& cfg, const std::string& out_csv) {
    cfg.validate();
    if (cfg.values.empty()) throw ConfigError("experiment: --values is required");

    synth::SweepSpec spec;
    spec.axis = synth::sweep_axis_from_string(cfg.axis);
    spec.values = cfg.values;
    spec.base.mixture = cfg.mixture();
    spec.base.loss = cfg.loss_config();
    spec.base.objective = diffusion::objective_from_string(cfg.objective) ==
                                  diffusion::Objective::epsilon
                              ? balance::Objective::epsilon
                              : balance::Objective::velocity;
    spec.base.schedule_T = cfg.schedule_T;
    spec.base.beta_min = cfg.beta_min;
    spec.base.beta_max = cfg.beta_max;
    spec.base.steps = cfg.steps;
    spec.base.batch = cfg.batch;
    spec.base.lr = cfg.lr;
    spec.base.lr_final = cfg.lr_final;
    spec.base.width = cfg.width;
    spec.base.hidden_layers = cfg.hidden_layers;
    spec.base.seeds = cfg.seeds;
    spec.base.seed0 = cfg.seed;
    spec.base.eval.eval_samples = cfg.eval_samples;
    spec.base.eval.flow_steps = cfg.flow_steps;
    spec.base.eval.probe_draws = cfg.probe_draws;
    spec.base.eval.guidance_scale = cfg.guidance;
    spec.base.max_threads = cfg.max_threads;

    const auto rows = synth::run_experiment(spec);
    const std::string out = resolve_output(out_csv);
    synth::write_experiment_csv(out, rows);

    const std::string summary = experiment_summary(spec, rows);
    std::ofstream sf(out + ".summary.txt", std::ios::binary);
    if (!sf) throw IoError("cannot write summary for " + out);
    sf << summary;
    std::cout << summary;
}

// ---------------------------------------------------------------------------
// figures
// ---------------------------------------------------------------------------

namespace {

std::vector<double> column_as_double(const CsvTable& t, int col) {
    std::vector<double> out;
    out.reserve(t.rows.size());
    for (const auto& r : t.rows) out.push_back(std::stod(r[col]));
    return out;
}

plot::SvgCanvas render_scatter(const CsvTable& t, const FigureSpec& spec) {
    const int cx = t.require_col("x");
    const int cy = t.require_col("y");
    const int cl = t.col("label");
    std::vector<Vec2> pts;
    for (const auto& r : t.rows) pts.push_back({std::stod(r[cx]), std::stod(r[cy])});
    plot::SvgCanvas canvas(spec.width_px, spec.height_px, plot::Bounds::of_points(pts));
    canvas.axes();
    for (size_t i = 0; i < pts.size(); ++i) {
        const int label = cl >= 0 ? std::stoi(t.rows[i][cl]) : 0;
        canvas.circle(pts[i][0], pts[i][1], spec.point_radius,
                      plot::class_color(label < 0 ? 2 : label), 0.75);
    }
    return canvas;
}

plot::SvgCanvas render_quiver(const CsvTable& t, const FigureSpec& spec) {
    const int cx = t.require_col("x");
    const int cy = t.require_col("y");
    const int cvx = t.require_col("vx");
    const int cvy = t.require_col("vy");
    std::vector<Vec2> pts;
    for (const auto& r : t.rows) pts.push_back({std::stod(r[cx]), std::stod(r[cy])});
    const auto vx = column_as_double(t, cvx);
    const auto vy = column_as_double(t, cvy);

    const plot::Bounds b = plot::Bounds::of_points(pts);
    plot::SvgCanvas canvas(spec.width_px, spec.height_px, b);
    canvas.axes();

    double scale = spec.arrow_scale;
    if (scale <= 0.0) {
        double max_norm = 0.0;
        for (size_t i = 0; i < vx.size(); ++i)
            max_norm = std::max(max_norm, std::hypot(vx[i], vy[i]));
        const double span = std::max(b.xmax - b.xmin, b.ymax - b.ymin);
        scale = max_norm > 0.0 ? 0.06 * span / max_norm : 1.0;
    }
    for (size_t i = 0; i < pts.size(); ++i)
        canvas.arrow(pts[i][0], pts[i][1], vx[i] * scale, vy[i] * scale, "#303030", 1.0);
    return canvas;
}

plot::SvgCanvas render_trajectory(const CsvTable& t, const FigureSpec& spec) {
    const int cid = t.require_col("sample_id");
    t.require_col("step"); // rows arrive in step order per sample
    const int cx = t.require_col("x");
    const int cy = t.require_col("y");

    std::vector<Vec2> pts;
    std::vector<std::string> ids;
    for (const auto& r : t.rows) {
        pts.push_back({std::stod(r[cx]), std::stod(r[cy])});
        ids.push_back(r[cid]);
    }
    plot::SvgCanvas canvas(spec.width_px, spec.height_px, plot::Bounds::of_points(pts));
    canvas.axes();
    std::vector<Vec2> cur;
    std::string cur_id;
    auto flush = [&]() {
        if (!cur.empty()) canvas.polyline(cur, "#2e8b57", 1.0, 0.5);
        cur.clear();
    };
    for (size_t i = 0; i < pts.size(); ++i) {
        if (ids[i] != cur_id) {
            flush();
            cur_id = ids[i];
        }
        cur.push_back(pts[i]);
    }
    flush();
    return canvas;
}

plot::SvgCanvas render_bar(const CsvTable& t, const FigureSpec& spec) {
    if (t.header.size() < 2) throw ConfigError("bar figure: csv needs label and value columns");
    double max_v = 0.0;
    for (const auto& r : t.rows) max_v = std::max(max_v, std::abs(std::stod(r[1])));
    if (max_v <= 0.0) max_v = 1.0;

    plot::SvgCanvas canvas(spec.width_px, spec.height_px, plot::Bounds{});
    canvas.axes();
    const int n = static_cast<int>(t.rows.size());
    const double slot = static_cast<double>(spec.width_px) / std::max(n, 1);
    for (int i = 0; i < n; ++i) {
        const double v = std::stod(t.rows[i][1]);
        const double h = std::abs(v) / max_v * (spec.height_px * 0.8);
        canvas.bar(i * slot + slot * 0.15, spec.height_px * 0.9 - h, slot * 0.7, h,
                   plot::class_color(i));
        canvas.text(i * slot + slot * 0.15, spec.height_px * 0.97, t.rows[i][0], 11);
    }
    return canvas;
}

plot::SvgCanvas render_figure(const CsvTable& t, const FigureSpec& spec) {
    if (t.rows.empty()) {
        plot::SvgCanvas canvas(spec.width_px, spec.height_px, plot::Bounds{});
        canvas.axes();
        return canvas;
    }
    switch (spec.kind) {
    case FigureKind::scatter: return render_scatter(t, spec);
    case FigureKind::quiver: return render_quiver(t, spec);
    case FigureKind::trajectory: return render_trajectory(t, spec);
    case FigureKind::bar: return render_bar(t, spec);
    }
    throw ConfigError("figure: unknown kind");
}

} // namespace

void cmd_figure(const FigureSpec& spec) {
    const CsvTable t = read_csv(spec.source_csv);
    render_figure(t, spec).save(resolve_output(spec.out_path));
}

void cmd_bench_build(const BenchOptions& opt) {
    const auto vocab = bench::ConceptVocabulary::load(opt.vocab);
    const auto templates = bench::load_templates(opt.templates);
    const auto spec =
        bench::build_benchmark(opt.corpus, vocab, templates, opt.n, opt.k, opt.threshold);
    spec.save(resolve_output(opt.out_path));
}

// ---------------------------------------------------------------------------
// report: the four-panel bundle (conditional/unconditional x balanced/
// imbalanced) plus a drift summary
// ---------------------------------------------------------------------------

namespace {

void panel_conditional(const Checkpoint& ckpt, const synth::MixtureSpec& display_spec,
                       const std::string& out_svg, uint64_t seed) {
    plot::Bounds b{-2.2, 2.2, -2.2, 2.2};
    plot::SvgCanvas canvas(520, 520, b);
    canvas.axes();

    const synth::LabeledDataset shown = synth::sample_mixture(display_spec, mix_seed(seed, 0x646973ULL));
    for (size_t i = 0; i < shown.size(); ++i)
        canvas.circle(shown.points[i][0], shown.points[i][1], 1.5,
                      plot::class_color(shown.labels[i]), 0.5);

    const int K = display_spec.num_classes();
    for (int c = 0; c < K; ++c) {
        diffusion::SampleResult res;
        const diffusion::GuidanceConfig g{1.0};
        if (ckpt.objective == diffusion::Objective::epsilon)
            res = diffusion::ddpm_sample(ckpt.params, ckpt.schedule(), c, 300, g,
                                         mix_seed(seed, 0x73616d70ULL + c), false);
        else
            res = diffusion::flow_sample(ckpt.params, 100, c, g, 300,
                                         mix_seed(seed, 0x73616d70ULL + c), true);
        // trajectories first so endpoints draw on top
        for (size_t i = 0; i < res.traj.states.size(); i += 10)
            canvas.polyline(res.traj.states[i], "#2e8b57", 0.8, 0.35);
        for (const auto& p : res.points)
            canvas.circle(p[0], p[1], 2.0, c == 0 ? "#87ceeb" : "#ffa500", 0.9);
    }
    canvas.save(out_svg);
}

void panel_unconditional(const Checkpoint& ckpt, const std::string& out_svg) {
    diffusion::GridSpec grid;
    grid.xmin = grid.ymin = -2.0;
    grid.xmax = grid.ymax = 2.0;
    grid.nx = grid.ny = 17;
    const double t_mid = ckpt.objective == diffusion::Objective::epsilon
                             ? static_cast<double>(ckpt.schedule().step_for_alpha_bar(0.5)) /
                                   ckpt.schedule_T
                             : 0.5;
    const auto field =
        diffusion::score_field(ckpt.params, grid, t_mid, ckpt.params.layout.null_cond());

    plot::Bounds b{-2.2, 2.2, -2.2, 2.2};
    plot::SvgCanvas canvas(520, 520, b);
    canvas.axes();
    double max_norm = 0.0;
    for (const auto& p : field) max_norm = std::max(max_norm, std::hypot(p.vx, p.vy));
    const double scale = max_norm > 0.0 ? 0.25 / max_norm : 1.0;
    for (const auto& p : field) {
        // draw the data-ward direction (negated prediction)
        canvas.arrow(p.x, p.y, -p.vx * scale, -p.vy * scale, "#303030", 1.0);
    }
    canvas.save(out_svg);
}

} // namespace

void cmd_report(const ReportOptions& opt) {
    const Checkpoint bal = load_checkpoint(opt.balanced_ckpt);
    const Checkpoint imb = load_checkpoint(opt.imbalanced_ckpt);
    const synth::MixtureSpec geometry = opt.mixture_path.empty()
                                            ? synth::MixtureSpec::two_class(1, 1)
                                            : synth::MixtureSpec::from_json_file(opt.mixture_path);

    const std::string dir = resolve_output(opt.out_dir + "/summary.txt");
    const fs::path out_dir = fs::path(dir).parent_path();

    synth::MixtureSpec bal_display = geometry;
    bal_display.components[0].count = 300;
    bal_display.components[1].count = 300;
    synth::MixtureSpec imb_display = geometry;
    imb_display.components[0].count = 594;
    imb_display.components[1].count = 6;

    panel_conditional(bal, bal_display, (out_dir / "panel_balanced_cond.svg").string(), opt.seed);
    panel_unconditional(bal, (out_dir / "panel_balanced_uncond.svg").string());
    panel_conditional(imb, imb_display, (out_dir / "panel_imbalanced_cond.svg").string(),
                      opt.seed);
    panel_unconditional(imb, (out_dir / "panel_imbalanced_uncond.svg").string());

    // drift summary over fresh conditional samples
    std::ofstream sf(dir, std::ios::binary);
    if (!sf) throw IoError("cannot write report summary");
    synth::MixtureSpec metric_spec = geometry;
    metric_spec.components[0].count = 1;
    metric_spec.components[1].count = 1;
    for (const auto& [name, ckpt] : {std::pair<std::string, const Checkpoint&>{"balanced", bal},
                                     {"imbalanced", imb}}) {
        for (int c = 0; c < 2; ++c) {
            diffusion::SampleResult res;
            const diffusion::GuidanceConfig g{1.0};
            if (ckpt.objective == diffusion::Objective::epsilon)
                res = diffusion::ddpm_sample(ckpt.params, ckpt.schedule(), c, 1000, g,
                                             mix_seed(opt.seed, 0x647266ULL + c), false);
            else
                res = diffusion::flow_sample(ckpt.params, 100, c, g, 1000,
                                             mix_seed(opt.seed, 0x647266ULL + c), false);
            sf << name << " class " << c
               << " drift=" << fmt_num(synth::drift_metric(res.points, metric_spec, c)) << "\n";
        }
    }
}

// ---------------------------------------------------------------------------
// argument parsing
// ---------------------------------------------------------------------------

namespace {

diffusion::GridSpec parse_grid(const std::string& s) {
    std::vector<std::string> parts = split_csv_line(s);
    if (parts.size() != 6)
        throw ConfigError("grid must be 'xmin,xmax,ymin,ymax,nx,ny': " + s);
    diffusion::GridSpec g;
    g.xmin = std::stod(parts[0]);
    g.xmax = std::stod(parts[1]);
    g.ymin = std::stod(parts[2]);
    g.ymax = std::stod(parts[3]);
    g.nx = std::stoi(parts[4]);
    g.ny = std::stoi(parts[5]);
    g.validate();
    return g;
}

void add_run_config_flags(CLI::App* sub, RunConfig& cfg) {
    sub->add_option("--mixture", cfg.mixture_path, "mixture spec json");
    sub->add_option("--counts", cfg.counts, "per-class sample counts")->delimiter(',');
    sub->add_option("--kind", cfg.kind, "loss kind: baseline|imba|freq_weighted");
    sub->add_option("--gamma", cfg.gamma, "reweighting exponent");
    sub->add_option("--lambda", cfg.lambda, "conditional/unconditional mix");
    sub->add_option("--weight-mode", cfg.weight_mode,
                    "per_element|channel_mean|sample_scalar");
    sub->add_option("--cond-drop", cfg.cond_drop_prob, "condition drop probability");
    sub->add_option("--residual-floor", cfg.residual_floor, "weight residual floor");
    sub->add_option("--objective", cfg.objective, "velocity|epsilon");
    sub->add_option("--steps", cfg.steps, "training steps");
    sub->add_option("--batch", cfg.batch, "batch size");
    sub->add_option("--lr", cfg.lr, "learning rate");
    sub->add_option("--lr-final", cfg.lr_final, "linear-decay target rate (0 = constant)");
    sub->add_option("--optimizer", cfg.optimizer, "adam|plain");
    sub->add_option("--width", cfg.width, "hidden width");
    sub->add_option("--hidden-layers", cfg.hidden_layers, "hidden layer count");
    sub->add_option("--schedule-T", cfg.schedule_T, "diffusion steps");
    sub->add_option("--beta-min", cfg.beta_min, "schedule beta min");
    sub->add_option("--beta-max", cfg.beta_max, "schedule beta max");
    sub->add_option("--flow-steps", cfg.flow_steps, "Euler steps for flow sampling");
    sub->add_option("--guidance", cfg.guidance, "guidance scale");
    sub->add_option("--eval-samples", cfg.eval_samples, "samples per class for metrics");
    sub->add_option("--probe-draws", cfg.probe_draws, "draws for the probe");
    sub->add_option("--axis", cfg.axis, "sweep axis");
    sub->add_option("--values", cfg.values, "sweep axis values")->delimiter(',');
    sub->add_option("--seeds", cfg.seeds, "seed count for sweeps");
    sub->add_option("--seed", cfg.seed, "base seed");
    sub->add_option("--max-threads", cfg.max_threads, "parallel workers (0 = auto)");
}

} // namespace

int run_cli(const std::vector<std::string>& args) {
    std::vector<char*> argv;
    std::vector<std::string> storage = args;
    storage.insert(storage.begin(), "imbalab");
    argv.reserve(storage.size());
    for (auto& s : storage) argv.push_back(s.data());
    return run_cli(static_cast<int>(argv.size()), argv.data());
}

int run_cli(int argc, char** argv) {
    CLI::App app{"2-D diffusion/flow lab for concept-frequency balancing"};
    app.require_subcommand(1);

    // config file first, flags override
    RunConfig cfg;
    for (int i = 1; i + 1 < argc; ++i)
        if (std::string(argv[i]) == "--config") {
            try {
                cfg.apply_json_file(argv[i + 1]);
            } catch (const ConfigError& e) {
                std::cerr << "error: " << e.what() << "\n";
                return kExitConfig;
            } catch (const IoError& e) {
                std::cerr << "error: " << e.what() << "\n";
                return kExitIo;
            }
        }
    std::string config_path;

    std::string out, data_csv, log_csv, init_ckpt;

    auto* gen = app.add_subcommand("gen-data", "sample a labeled 2-D dataset");
    gen->add_option("--config", config_path, "json config file");
    add_run_config_flags(gen, cfg);
    gen->add_option("--out", out, "output points csv")->required();

    auto* train = app.add_subcommand("train", "train a denoiser on a dataset");
    train->add_option("--config", config_path, "json config file");
    add_run_config_flags(train, cfg);
    train->add_option("--data", data_csv, "input points csv")->required();
    train->add_option("--out", out, "output checkpoint")->required();
    train->add_option("--log", log_csv, "training log csv");
    train->add_option("--init", init_ckpt, "checkpoint to finetune from");

    SampleOptions sopt;
    auto* sample = app.add_subcommand("sample", "draw samples from a checkpoint");
    sample->add_option("--ckpt", sopt.ckpt, "checkpoint path")->required();
    sample->add_option("--cond", sopt.cond, "class index or 'null'");
    sample->add_option("--n", sopt.n, "sample count");
    sample->add_option("--steps", sopt.steps, "Euler steps (flow sampler)");
    sample->add_option("--guidance", sopt.guidance, "guidance scale");
    sample->add_option("--seed", sopt.seed, "seed");
    sample->add_option("--sampler", sopt.sampler, "flow|ddpm (default: checkpoint objective)");
    sample->add_option("--out", sopt.out_csv, "output samples csv")->required();
    sample->add_option("--trajectories", sopt.traj_csv, "optional trajectory csv");

    ProbeOptions popt;
    auto* probe = app.add_subcommand("probe", "per-class reweighting distance at max noise");
    probe->add_option("--ckpt", popt.ckpt)->required();
    probe->add_option("--mixture", popt.mixture_path, "mixture spec json");
    probe->add_option("--gamma", popt.gamma);
    probe->add_option("--draws", popt.draws);
    probe->add_option("--seed", popt.seed);
    probe->add_option("--out", popt.out_csv)->required();

    FieldOptions fopt;
    std::string grid_str = "-2,2,-2,2,21,21";
    auto* field = app.add_subcommand("score-field", "evaluate the model on a lattice");
    field->add_option("--ckpt", fopt.ckpt)->required();
    field->add_option("--grid", grid_str, "xmin,xmax,ymin,ymax,nx,ny");
    field->add_option("--time", fopt.time_norm, "normalized time in [0,1]");
    field->add_option("--cond", fopt.cond, "class index or 'null'");
    field->add_option("--out", fopt.out_csv)->required();

    auto* experiment = app.add_subcommand("experiment", "sweep one axis and report metrics");
    experiment->add_option("--config", config_path, "json config file");
    add_run_config_flags(experiment, cfg);
    experiment->add_option("--out", out, "results csv")->required();

    FigureSpec fig;
    std::string fig_kind = "scatter";
    auto* figure = app.add_subcommand("figure", "render a csv as an svg");
    figure->add_option("--kind", fig_kind, "scatter|quiver|trajectory|bar");
    figure->add_option("--in", fig.source_csv, "source csv")->required();
    figure->add_option("--out", fig.out_path, "output svg")->required();
    figure->add_option("--width-px", fig.width_px);
    figure->add_option("--height-px", fig.height_px);
    figure->add_option("--arrow-scale", fig.arrow_scale, "data units per unit vector (0=auto)");
    figure->add_option("--point-radius", fig.point_radius);

    BenchOptions bopt;
    auto* benchb = app.add_subcommand("bench-build", "build a composition benchmark");
    benchb->add_option("--corpus", bopt.corpus)->required();
    benchb->add_option("--vocab", bopt.vocab)->required();
    benchb->add_option("--templates", bopt.templates)->required();
    benchb->add_option("--n", bopt.n, "representatives per pool");
    benchb->add_option("--k", bopt.k, "selected pair count");
    benchb->add_option("--threshold", bopt.threshold, "head/tail frequency ratio");
    benchb->add_option("--out", bopt.out_path)->required();

    ReportOptions ropt;
    auto* report = app.add_subcommand("report", "four-panel comparison bundle");
    report->add_option("--balanced-ckpt", ropt.balanced_ckpt)->required();
    report->add_option("--imbalanced-ckpt", ropt.imbalanced_ckpt)->required();
    report->add_option("--mixture", ropt.mixture_path);
    report->add_option("--out-dir", ropt.out_dir)->required();
    report->add_option("--seed", ropt.seed);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : kExitConfig;
    }

    try {
        if (gen->parsed()) cmd_gen_data(cfg, out);
        else if (train->parsed()) cmd_train(cfg, data_csv, out, log_csv, init_ckpt);
        else if (sample->parsed()) cmd_sample(sopt);
        else if (probe->parsed()) cmd_probe(popt);
        else if (field->parsed()) {
            fopt.grid = parse_grid(grid_str);
            cmd_score_field(fopt);
        } else if (experiment->parsed()) cmd_experiment(cfg, out);
        else if (figure->parsed()) {
            fig.kind = figure_kind_from_string(fig_kind);
            cmd_figure(fig);
        } else if (benchb->parsed()) cmd_bench_build(bopt);
        else if (report->parsed()) cmd_report(ropt);
    } catch (const ConfigError& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const InputError& e) {
        std::cerr << "input error: " << e.what() << "\n";
        return kExitInput;
    } catch (const IoError& e) {
        std::cerr << "i/o error: " << e.what() << "\n";
        return kExitIo;
    } catch (const NumericError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return kExitNumeric;
    }
    return kExitOk;
}

} // namespace imbalab::cli
