// Command-line front end: analyze a dataset, run a simulation study, or
// refit p-values from a saved count table.

#include <cstdio>
#include <exception>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mblingam/mblingam.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitBadInput = 2;
constexpr int kExitPipelineFailure = 3;

struct CommonFlags {
    std::string out_prefix = "out";
    std::string format = "both";
    std::uint64_t seed = 1;
    int threads = 0;  // 0 = all available cores
    int order_h = 3;
};

int effective_threads(int requested) {
    return requested > 0 ? requested : mblingam::default_thread_count();
}

bool want_csv(const std::string& format) { return format == "csv" || format == "both"; }
bool want_json(const std::string& format) { return format == "json" || format == "both"; }

void write_pvalue_outputs(const mblingam::PvalueReport& report, const CommonFlags& flags) {
    if (want_csv(flags.format)) {
        mblingam::io::write_pvalues_csv(report, flags.out_prefix + "_pvalues.csv");
    }
    if (want_json(flags.format)) {
        mblingam::io::write_pvalues_json(report, flags.out_prefix + "_pvalues.json");
    }
}

struct ScaleFlags {
    double sigma_sq_min = 1.0 / 9.0;
    double sigma_sq_max = 9.0;
    int num_scales = 13;
    long replicates = 1000;
};

void add_scale_flags(CLI::App* cmd, ScaleFlags& flags) {
    cmd->add_option("--scales-min", flags.sigma_sq_min, "Smallest sigma^2 in the ladder")
        ->capture_default_str();
    cmd->add_option("--scales-max", flags.sigma_sq_max, "Largest sigma^2 in the ladder")
        ->capture_default_str();
    cmd->add_option("--num-scales", flags.num_scales, "Number of ladder scales")
        ->capture_default_str();
    cmd->add_option("--replicates", flags.replicates, "Bootstrap replicates per scale (Q)")
        ->capture_default_str();
}

void add_common_flags(CLI::App* cmd, CommonFlags& flags) {
    cmd->add_option("-o,--out", flags.out_prefix, "Output file prefix")->capture_default_str();
    cmd->add_option("--format", flags.format, "Output format")
        ->check(CLI::IsMember({"csv", "json", "both"}))
        ->capture_default_str();
    cmd->add_option("--seed", flags.seed, "Master seed; all randomness derives from it")
        ->capture_default_str();
    cmd->add_option("--threads", flags.threads, "Worker threads (0 = all cores)")
        ->capture_default_str();
    cmd->add_option("--order", flags.order_h, "Taylor order h of the extrapolated p-value")
        ->capture_default_str();
}

int run_analyze(const std::string& input, const CommonFlags& flags, const ScaleFlags& scales,
                int restarts) {
    const mblingam::DataMatrix data = mblingam::io::read_data_csv(input);
    const mblingam::ScalePlan plan =
        mblingam::build_scale_plan(data.num_samples(), scales.sigma_sq_min, scales.sigma_sq_max,
                                   scales.num_scales, scales.replicates);
    mblingam::IcaConfig ica;
    ica.restarts = restarts;
    const mblingam::BpCountTable table =
        mblingam::count_events(data, plan, ica, flags.seed, effective_threads(flags.threads));
    if (want_csv(flags.format)) {
        mblingam::io::write_counts_csv(table, flags.out_prefix + "_counts.csv");
    }
    if (want_json(flags.format)) {
        mblingam::io::write_counts_json(table, flags.out_prefix + "_counts.json");
    }

    mblingam::PvalueOptions options;
    options.h = flags.order_h;
    const mblingam::PvalueReport report = mblingam::compute_pvalues(table, options);
    write_pvalue_outputs(report, flags);
    return kExitOk;
}

int run_fit(const std::string& input, const CommonFlags& flags) {
    const mblingam::BpCountTable table = mblingam::io::read_counts_csv(input);
    mblingam::PvalueOptions options;
    options.h = flags.order_h;
    const mblingam::PvalueReport report = mblingam::compute_pvalues(table, options);
    write_pvalue_outputs(report, flags);
    return kExitOk;
}

int run_simulate(const std::string& preset, const std::string& config_path,
                 const CommonFlags& flags, CLI::App* cmd, const ScaleFlags& scales, int restarts,
                 int datasets, long samples) {
    mblingam::SimConfig cfg;
    if (!preset.empty()) {
        cfg = mblingam::preset_config(preset);
    } else if (!config_path.empty()) {
        cfg = mblingam::io::read_sim_config(config_path);
    } else {
        throw std::invalid_argument("simulate: pass --preset or --config");
    }

    if (cmd->count("--seed")) cfg.master_seed = flags.seed;
    if (cmd->count("--order")) cfg.h = flags.order_h;
    if (cmd->count("--restarts")) cfg.ica.restarts = restarts;
    if (cmd->count("--datasets")) cfg.datasets = datasets;
    if (cmd->count("--samples")) cfg.n = samples;
    if (cmd->count("--scales-min")) cfg.plan.sigma_sq_min = scales.sigma_sq_min;
    if (cmd->count("--scales-max")) cfg.plan.sigma_sq_max = scales.sigma_sq_max;
    if (cmd->count("--num-scales")) cfg.plan.num_scales = scales.num_scales;
    if (cmd->count("--replicates")) cfg.plan.replicates = scales.replicates;

    std::fprintf(stderr, "simulate: %d datasets, n=%ld, Q=%ld, %d scales\n", cfg.datasets, cfg.n,
                 cfg.plan.replicates, cfg.plan.num_scales);
    const mblingam::CalibrationReport report =
        mblingam::run_experiment(cfg, effective_threads(flags.threads));

    if (want_csv(flags.format)) {
        mblingam::io::write_raw_pvalues_csv(report, flags.out_prefix + "_pvalues_raw.csv");
        mblingam::io::write_rejection_csv(report, flags.out_prefix + "_rejection_curves.csv");
    }
    if (want_json(flags.format)) {
        mblingam::io::write_calibration_json(report, flags.out_prefix + "_report.json");
    }
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"LiNGAM causal discovery with multiscale-bootstrap p-values"};
    app.require_subcommand(1);

    CommonFlags flags;
    ScaleFlags scales;
    int restarts = 8;
    int datasets = 0;
    long samples = 0;
    std::string input;
    std::string preset;
    std::string config_path;
    bool list_presets = false;

    CLI::App* analyze = app.add_subcommand(
        "analyze", "Estimate p-values for all signed pairwise hypotheses of a dataset");
    analyze->add_option("input", input, "Dataset CSV: header row of names, one sample per row")
        ->required();
    add_common_flags(analyze, flags);
    add_scale_flags(analyze, scales);
    analyze->add_option("--restarts", restarts, "ICA restarts per fit")->capture_default_str();

    CLI::App* simulate =
        app.add_subcommand("simulate", "Run a calibration study on synthetic data");
    simulate->add_option("--preset", preset, "Named study configuration");
    simulate->add_option("--config", config_path, "Study configuration JSON file");
    simulate->add_flag("--list-presets", list_presets, "List available presets and exit");
    add_common_flags(simulate, flags);
    add_scale_flags(simulate, scales);
    simulate->add_option("--restarts", restarts, "ICA restarts per fit")->capture_default_str();
    simulate->add_option("--datasets", datasets, "Number of generated datasets");
    simulate->add_option("--samples", samples, "Samples per generated dataset (n)");

    CLI::App* fit = app.add_subcommand("fit", "Fit p-values from a saved bootstrap count table");
    fit->add_option("input", input, "Count table CSV produced by analyze")->required();
    add_common_flags(fit, flags);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitBadInput;
    }

    try {
        if (simulate->parsed() && list_presets) {
            for (const std::string& name : mblingam::preset_names()) std::printf("%s\n", name.c_str());
            return kExitOk;
        }
        if (analyze->parsed()) return run_analyze(input, flags, scales, restarts);
        if (fit->parsed()) return run_fit(input, flags);
        return run_simulate(preset, config_path, flags, simulate, scales, restarts, datasets,
                            samples);
    } catch (const mblingam::io::csv_error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitBadInput;
    } catch (const mblingam::unknown_preset_error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitBadInput;
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitBadInput;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "pipeline failure: %s\n", e.what());
        return kExitPipelineFailure;
    }
}
