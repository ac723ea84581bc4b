#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "imbalab/balance.hpp"
#include "imbalab/checkpoint.hpp"
#include "imbalab/synth_eval.hpp"

namespace imbalab::cli {

/// Every tunable of the lab in one bag; subcommands read the fields they
/// need. Values come from defaults, then an optional JSON config file, then
/// command-line flags (strongest).
struct RunConfig {
    // data
    std::string mixture_path;
    std::vector<long> counts = {9900, 100};
    // loss
    std::string kind = "baseline";
    double gamma = 0.8;
    double lambda = 0.9;
    std::string weight_mode = "channel_mean";
    double cond_drop_prob = 0.1;
    double residual_floor = 1e-8;
    // model / training
    std::string objective = "velocity";
    int steps = 20000;
    int batch = 64;
    double lr = 1e-3;
    double lr_final = 0.0; // > 0 enables linear decay to this rate
    std::string optimizer = "adam";
    int width = 128;
    int hidden_layers = 2;
    int schedule_T = 1000;
    double beta_min = 1e-4;
    double beta_max = 0.02;
    // inference / eval
    int flow_steps = 100;
    double guidance = 1.0;
    int eval_samples = 1000;
    int probe_draws = 20000;
    // experiment
    std::string axis = "ratio";
    std::vector<std::string> values;
    int seeds = 5;
    uint64_t seed = 1;
    int max_threads = 0;

    void apply_json_file(const std::string& path);
    void validate() const;

    synth::MixtureSpec mixture() const;
    balance::LossConfig loss_config() const;
    nn::ModelLayout layout(int num_classes) const;
    diffusion::NoiseSchedule schedule() const;
};

/// Prefixes relative paths with $IMBALAB_OUT_ROOT (when set) and creates
/// parent directories.
std::string resolve_output(const std::string& path);

enum class FigureKind { scatter, quiver, trajectory, bar };

FigureKind figure_kind_from_string(const std::string& s);

struct FigureSpec {
    FigureKind kind = FigureKind::scatter;
    std::string source_csv;
    std::string out_path;
    int width_px = 480;
    int height_px = 480;
    double arrow_scale = 0.0; // 0 = auto
    double point_radius = 2.0;
};

void cmd_gen_data(const RunConfig& cfg, const std::string& out_csv);
/// init_ckpt (optional) resumes from existing parameters, e.g. to finetune a
/// trained model under a different loss before re-probing it.
void cmd_train(const RunConfig& cfg, const std::string& data_csv, const std::string& out_ckpt,
               const std::string& log_csv, const std::string& init_ckpt = "");

struct SampleOptions {
    std::string ckpt;
    std::string cond = "0"; // class index or "null"
    int n = 1000;
    int steps = 100;
    double guidance = 1.0;
    uint64_t seed = 1;
    std::string out_csv;
    std::string traj_csv; // optional
    std::string sampler;  // "", "flow" or "ddpm"; default from checkpoint
};
void cmd_sample(const SampleOptions& opt);

struct ProbeOptions {
    std::string ckpt;
    std::string mixture_path; // optional; default lab mixture
    double gamma = 0.8;
    int draws = 20000;
    uint64_t seed = 1;
    std::string out_csv;
};
void cmd_probe(const ProbeOptions& opt);

struct FieldOptions {
    std::string ckpt;
    diffusion::GridSpec grid;
    double time_norm = 0.5;
    std::string cond = "null";
    std::string out_csv;
};
void cmd_score_field(const FieldOptions& opt);

void cmd_experiment(const RunConfig& cfg, const std::string& out_csv);
void cmd_figure(const FigureSpec& spec);

struct BenchOptions {
    std::string corpus;
    std::string vocab;
    std::string templates;
    int n = 6;
    int k = 15;
    double threshold = 100.0;
    std::string out_path;
};
void cmd_bench_build(const BenchOptions& opt);

struct ReportOptions {
    std::string balanced_ckpt;
    std::string imbalanced_ckpt;
    std::string mixture_path; // optional
    std::string out_dir;
    uint64_t seed = 1;
};
void cmd_report(const ReportOptions& opt);

/// Full command-line entry point; returns the process exit code.
int run_cli(int argc, char** argv);
int run_cli(const std::vector<std::string>& args);

} // namespace imbalab::cli
