#pragma once

// Experiment orchestration: configuration parsing and validation, the
// Monte-Carlo rate experiment (coupled paths across the k- and N-sweeps),
// the stability suite, and plot-data emission.
//
// Config files are flat key = value text with dotted section keys; the CLI
// help lists every key.  (config, master_seed) fully determines every
// result byte: workers own whole paths and results merge in path order, so
// worker count never changes the output.

#include <cstdint>
#include <string>
#include <vector>

#include "spde/analysis.hpp"
#include "spde/scheme.hpp"

namespace spde {

struct ExperimentConfig {
    // model
    Kind model_kind = Kind::Sabra;
    double k0 = 1.0;
    int quad_points = 0;           // 0 = auto (4 * N_ref), heat only
    // noise
    double alpha0 = 1.0;
    int noise_modes = 0;           // 0 = auto (N_ref)
    // diffusion
    GainKind gain = GainKind::BoundedInverse;
    double sigma = 0.2;
    // initial data u0 = amplitude * sum_{n<=init_modes} 2^{-n} e_n
    double init_amplitude = 0.1;
    int init_modes = 8;
    // time and space resolution
    double T = 1.0;
    int M_fine = 16384;
    int N_ref = 64;
    std::vector<int> sweep_M{128, 256, 512, 1024};
    std::vector<int> sweep_N{8, 16, 32};
    // analysis
    std::vector<double> betas{0.0, 0.1, 0.2};
    double epsilon = 0.01;
    // scheme
    SchemeVariant variant = SchemeVariant::SemiImplicit;
    double fp_tol = 1e-12;
    int fp_max_iter = 100;
    double fp_damping = 1.0;
    // monte carlo
    int n_paths = 200;
    std::uint64_t master_seed = 12345;
    int workers = 0;               // 0 = hardware concurrency
    // output
    std::string output_dir = "out";
};

ExperimentConfig parse_config_text(const std::string& text);
ExperimentConfig parse_config_file(const std::string& path);
// Throws config_error naming the offending field.
void validate_config(const ExperimentConfig& cfg);
// Fixed key order, normalized values; identical configs give identical text.
std::string canonical_config_text(const ExperimentConfig& cfg);
std::uint64_t config_hash(const ExperimentConfig& cfg);
// One line per key, for --help.
std::string config_key_reference();

ModelSpec build_model(const ExperimentConfig& cfg);
SpectralState build_initial_state(const ExperimentConfig& cfg);
SchemeConfig build_scheme_config(const ExperimentConfig& cfg);

struct RunOutcome {
    std::vector<RateReport> time_reports;   // one per beta
    std::vector<RateReport> space_reports;  // one per beta
    int n_paths = 0;
    int n_failures = 0;
    bool ok = false;                        // false if > 1% of paths failed
    std::vector<std::string> outputs;       // files written (relative to output_dir)
    double wall_seconds = 0.0;
};

// For each path: sample the finest noise, build the reference, integrate
// every (k, N_ref) and (k_fine, N) on coarsenings/truncations of the same
// path, localize, and aggregate.  Writes rates_time.csv, rates_space.csv
// and manifest.txt into cfg.output_dir.
RunOutcome run_rate_experiment(const ExperimentConfig& cfg);

struct StabilityRow {
    int M = 0;
    double k = 0.0;
    double max_h2 = 0.0;        // E max_m |U^m|^2
    double sum_du_h2 = 0.0;     // E sum_j |U^{j+1} - U^j|^2
    double energy_half = 0.0;   // 2k E sum_j ||U^j||_{1/2}^2
    double lhs_l2 = 0.0;        // sum of the three above
    double max_q2 = 0.0;        // E max_m ||U^m||_{1/4}^2
    double sum_du_q2 = 0.0;     // E sum_j ||U^{j+1} - U^j||_{1/4}^2
    double energy_3q = 0.0;     // k E sum_j ||U^j||_{3/4}^2
    double lhs_quarter = 0.0;   // sum of the three above
};

struct StabilityOutcome {
    std::vector<StabilityRow> rows;   // one per M in the sweep
    int n_paths = 0;
    int n_failures = 0;
    bool bounded = false;             // consecutive lhs ratios within growth_limit
    double max_ratio = 0.0;
    bool ok = false;
    std::vector<std::string> outputs;
    double wall_seconds = 0.0;
};

// Monte-Carlo left-hand sides of the discrete stability estimates across
// the M sweep; asserts boundedness as M doubles.  Writes stability.csv.
StabilityOutcome run_stability_suite(const ExperimentConfig& cfg,
                                     double growth_limit = 1.5);

// Reads rates_*.csv from report_dir and writes gnuplot-ready plot_*.dat
// files (log abscissa, log sqrt-error, fitted line).  Returns files written.
std::vector<std::string> emit_plot_data(const std::string& report_dir);

// Manifest written by run_rate_experiment; replay reruns the embedded
// config and byte-compares the regenerated CSVs.  Returns true on match.
bool replay_manifest(const std::string& manifest_path, const std::string& scratch_dir);

void write_manifest(const ExperimentConfig& cfg, const RunOutcome& outcome,
                    const std::string& path);

// Run fn(0..n-1) on a small thread pool; results must be stored by index.
void parallel_for_indices(int n, int workers, const std::function<void(int)>& fn);

} // namespace spde
