// Command-line front end: rate experiments, stability diagnostics, plot-data
// emission, and manifest replay.
//
// Exit codes: 0 success, 2 configuration error, 3 numerical failure beyond
// tolerance.

#include <cstdio>
#include <exception>
#include <string>

#include <CLI11.hpp>

#include "spde/experiment.hpp"

namespace {

spde::ExperimentConfig load_config(const std::string& config_path, long long seed,
                                   int paths, const std::string& out_dir) {
    spde::ExperimentConfig cfg;
    if (!config_path.empty()) cfg = spde::parse_config_file(config_path);
    if (seed >= 0) cfg.master_seed = static_cast<std::uint64_t>(seed);
    if (paths > 0) cfg.n_paths = paths;
    if (!out_dir.empty()) cfg.output_dir = out_dir;
    spde::validate_config(cfg);
    return cfg;
}

void print_reports(const std::vector<spde::RateReport>& reports, const char* axis) {
    for (const spde::RateReport& rep : reports) {
        if (rep.fit_valid)
            std::printf("%s axis, beta=%g: fitted order %.4f (r^2 %.4f)\n", axis,
                        rep.beta, rep.fitted_order, rep.r_squared);
        else
            std::printf("%s axis, beta=%g: insufficient points for fit\n", axis,
                        rep.beta);
        for (const spde::RatePoint& pt : rep.points)
            std::printf("  abscissa %-12g localized max err %-14g energy err %-14g "
                        "omega fraction %.3f\n",
                        pt.abscissa, pt.localized_max_err, pt.localized_energy_err,
                        pt.omega_fraction);
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Spectral-Galerkin solver and convergence harness for stochastic "
                 "evolution equations (GOY/Sabra shell models, 1D nonlinear heat)"};
    app.require_subcommand(1);

    std::string config_path, out_dir, manifest_path, report_dir, scratch_dir;
    long long seed = -1;
    int paths = 0;

    CLI::App* run = app.add_subcommand("run", "Monte-Carlo convergence-rate experiment");
    run->add_option("--config", config_path, "config file (key = value lines)");
    run->add_option("--seed", seed, "override mc.master_seed");
    run->add_option("--paths", paths, "override mc.n_paths");
    run->add_option("--out", out_dir, "override output.dir");

    CLI::App* stab = app.add_subcommand("stability", "discrete stability diagnostics");
    stab->add_option("--config", config_path, "config file");
    stab->add_option("--seed", seed, "override mc.master_seed");
    stab->add_option("--paths", paths, "override mc.n_paths");
    stab->add_option("--out", out_dir, "override output.dir");

    CLI::App* plot = app.add_subcommand("plotdata", "emit gnuplot-ready flat files");
    plot->add_option("--report", report_dir, "directory holding rates_*.csv")
        ->required();

    CLI::App* replay = app.add_subcommand("replay", "rerun a manifest and compare bytes");
    replay->add_option("--manifest", manifest_path, "manifest.txt path")->required();
    replay->add_option("--scratch", scratch_dir, "scratch output directory")->required();

    CLI::App* keys = app.add_subcommand("keys", "list every configuration key");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run) {
            const spde::ExperimentConfig cfg = load_config(config_path, seed, paths, out_dir);
            const spde::RunOutcome out = spde::run_rate_experiment(cfg);
            print_reports(out.time_reports, "time");
            print_reports(out.space_reports, "space");
            std::printf("paths %d, failures %d, wall %.1fs, outputs in %s\n",
                        out.n_paths, out.n_failures, out.wall_seconds,
                        cfg.output_dir.c_str());
            if (!out.ok) {
                std::fprintf(stderr, "error: more than 1%% of paths failed\n");
                return 3;
            }
            return 0;
        }
        if (*stab) {
            const spde::ExperimentConfig cfg = load_config(config_path, seed, paths, out_dir);
            const spde::StabilityOutcome out = spde::run_stability_suite(cfg);
            for (const spde::StabilityRow& r : out.rows)
                std::printf("M %-6d k %-10g lhs_l2 %-12g lhs_quarter %-12g\n", r.M, r.k,
                            r.lhs_l2, r.lhs_quarter);
            std::printf("paths %d, failures %d, max doubling ratio %.3f, %s\n",
                        out.n_paths, out.n_failures, out.max_ratio,
                        out.bounded ? "bounded" : "NOT bounded");
            if (!out.ok) {
                std::fprintf(stderr, "error: stability suite failed\n");
                return 3;
            }
            return 0;
        }
        if (*plot) {
            for (const std::string& fpath : spde::emit_plot_data(report_dir))
                std::printf("wrote %s\n", fpath.c_str());
            return 0;
        }
        if (*replay) {
            const bool match = spde::replay_manifest(manifest_path, scratch_dir);
            std::printf("replay: outputs %s\n", match ? "byte-identical" : "DIFFER");
            return match ? 0 : 3;
        }
        if (*keys) {
            std::fputs(spde::config_key_reference().c_str(), stdout);
            return 0;
        }
    } catch (const spde::config_error& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const spde::file_error& e) {
        std::fprintf(stderr, "file error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    }
    return 0;
}
