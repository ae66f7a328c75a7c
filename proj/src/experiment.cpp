#include "spde/experiment.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <thread>

namespace spde {

namespace {

constexpr const char* kCodeVersion = "spde-0.1.0";

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string join_ints(const std::vector<int>& xs) {
    std::string s;
    for (std::size_t i = 0; i < xs.size(); ++i)
        s += (i ? "," : "") + std::to_string(xs[i]);
    return s;
}

std::string join_doubles(const std::vector<double>& xs) {
    std::string s;
    for (std::size_t i = 0; i < xs.size(); ++i) s += (i ? "," : "") + fmt(xs[i]);
    return s;
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
}

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

double parse_double(const std::string& key, const std::string& v) {
    char* end = nullptr;
    const double x = std::strtod(v.c_str(), &end);
    if (end == v.c_str() || *end != '\0')
        throw config_error(key, "expected a number, got '" + v + "'");
    return x;
}

long long parse_int(const std::string& key, const std::string& v) {
    char* end = nullptr;
    const long long x = std::strtoll(v.c_str(), &end, 10);
    if (end == v.c_str() || *end != '\0')
        throw config_error(key, "expected an integer, got '" + v + "'");
    return x;
}

const char* kind_name(Kind k) {
    switch (k) {
        case Kind::Goy: return "goy";
        case Kind::Sabra: return "sabra";
        case Kind::Heat1d: return "heat1d";
        case Kind::Zero: return "zero";
    }
    return "?";
}

const char* gain_name(GainKind g) {
    switch (g) {
        case GainKind::BoundedInverse: return "bounded";
        case GainKind::Cosine: return "cosine";
        case GainKind::Additive: return "additive";
    }
    return "?";
}

} // namespace

ExperimentConfig parse_config_text(const std::string& text) {
    ExperimentConfig cfg;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        const std::size_t eq = t.find('=');
        if (eq == std::string::npos)
            throw config_error("line " + std::to_string(lineno),
                               "expected key = value, got '" + t + "'");
        const std::string key = trim(t.substr(0, eq));
        const std::string val = trim(t.substr(eq + 1));
        if (key == "model.kind") {
            if (val == "goy") cfg.model_kind = Kind::Goy;
            else if (val == "sabra") cfg.model_kind = Kind::Sabra;
            else if (val == "heat1d") cfg.model_kind = Kind::Heat1d;
            else if (val == "zero") cfg.model_kind = Kind::Zero;
            else throw config_error(key, "unknown kind '" + val + "'");
        } else if (key == "model.k0") {
            cfg.k0 = parse_double(key, val);
        } else if (key == "model.quad_points") {
            cfg.quad_points = static_cast<int>(parse_int(key, val));
        } else if (key == "noise.alpha0") {
            cfg.alpha0 = parse_double(key, val);
        } else if (key == "noise.modes") {
            cfg.noise_modes = static_cast<int>(parse_int(key, val));
        } else if (key == "diffusion.g") {
            if (val == "bounded") cfg.gain = GainKind::BoundedInverse;
            else if (val == "cosine") cfg.gain = GainKind::Cosine;
            else if (val == "additive") cfg.gain = GainKind::Additive;
            else throw config_error(key, "unknown gain '" + val + "'");
        } else if (key == "diffusion.sigma") {
            cfg.sigma = parse_double(key, val);
        } else if (key == "init.amplitude") {
            cfg.init_amplitude = parse_double(key, val);
        } else if (key == "init.modes") {
            cfg.init_modes = static_cast<int>(parse_int(key, val));
        } else if (key == "time.T") {
            cfg.T = parse_double(key, val);
        } else if (key == "time.M_fine") {
            cfg.M_fine = static_cast<int>(parse_int(key, val));
        } else if (key == "space.N_ref") {
            cfg.N_ref = static_cast<int>(parse_int(key, val));
        } else if (key == "sweep.M") {
            cfg.sweep_M.clear();
            for (const std::string& v : split_list(val))
                cfg.sweep_M.push_back(static_cast<int>(parse_int(key, trim(v))));
        } else if (key == "sweep.N") {
            cfg.sweep_N.clear();
            for (const std::string& v : split_list(val))
                cfg.sweep_N.push_back(static_cast<int>(parse_int(key, trim(v))));
        } else if (key == "analysis.betas") {
            cfg.betas.clear();
            for (const std::string& v : split_list(val))
                cfg.betas.push_back(parse_double(key, trim(v)));
        } else if (key == "analysis.epsilon") {
            cfg.epsilon = parse_double(key, val);
        } else if (key == "scheme.variant") {
            if (val == "semi") cfg.variant = SchemeVariant::SemiImplicit;
            else if (val == "full") cfg.variant = SchemeVariant::FullyImplicit;
            else throw config_error(key, "expected semi or full, got '" + val + "'");
        } else if (key == "scheme.fp_tol") {
            cfg.fp_tol = parse_double(key, val);
        } else if (key == "scheme.fp_max_iter") {
            cfg.fp_max_iter = static_cast<int>(parse_int(key, val));
        } else if (key == "scheme.fp_damping") {
            cfg.fp_damping = parse_double(key, val);
        } else if (key == "mc.n_paths") {
            cfg.n_paths = static_cast<int>(parse_int(key, val));
        } else if (key == "mc.master_seed") {
            cfg.master_seed = static_cast<std::uint64_t>(parse_int(key, val));
        } else if (key == "mc.workers") {
            cfg.workers = static_cast<int>(parse_int(key, val));
        } else if (key == "output.dir") {
            cfg.output_dir = val;
        } else {
            throw config_error(key, "unknown configuration key");
        }
    }
    return cfg;
}

ExperimentConfig parse_config_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw file_error("cannot open config file " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return parse_config_text(ss.str());
}

void validate_config(const ExperimentConfig& cfg) {
    if (cfg.model_kind != Kind::Heat1d && cfg.k0 <= 0.0)
        throw config_error("model.k0", "must be > 0");
    if (cfg.model_kind == Kind::Heat1d && cfg.quad_points != 0 &&
        cfg.quad_points < 4 * cfg.N_ref)
        throw config_error("model.quad_points", "must be >= 4 * space.N_ref (or 0 for auto)");
    if (cfg.alpha0 <= 0.5) throw config_error("noise.alpha0", "must exceed 1/2");
    if (cfg.noise_modes < 0) throw config_error("noise.modes", "must be >= 0");
    if (cfg.sigma < 0.0) throw config_error("diffusion.sigma", "must be >= 0");
    if (cfg.init_modes < 0) throw config_error("init.modes", "must be >= 0");
    if (cfg.T <= 0.0) throw config_error("time.T", "must be > 0");
    if (cfg.M_fine < 1) throw config_error("time.M_fine", "must be >= 1");
    if (cfg.N_ref < 1) throw config_error("space.N_ref", "must be >= 1");
    if (cfg.init_modes > cfg.N_ref)
        throw config_error("init.modes", "must be <= space.N_ref");
    if (cfg.sweep_M.empty()) throw config_error("sweep.M", "must not be empty");
    for (int m : cfg.sweep_M) {
        if (m < 1) throw config_error("sweep.M", "entries must be >= 1");
        if (cfg.M_fine % m != 0)
            throw config_error("sweep.M",
                               "entry " + std::to_string(m) + " does not divide time.M_fine");
    }
    if (cfg.sweep_N.empty()) throw config_error("sweep.N", "must not be empty");
    for (int n : cfg.sweep_N) {
        if (n < 1) throw config_error("sweep.N", "entries must be >= 1");
        if (n > cfg.N_ref)
            throw config_error("sweep.N",
                               "entry " + std::to_string(n) + " exceeds space.N_ref");
    }
    if (cfg.betas.empty()) throw config_error("analysis.betas", "must not be empty");
    for (double b : cfg.betas)
        if (b < 0.0 || b >= 0.25)
            throw config_error("analysis.betas", "entries must lie in [0, 1/4)");
    if (cfg.epsilon <= 0.0 || cfg.epsilon >= 0.5)
        throw config_error("analysis.epsilon", "must lie in (0, 1/2)");
    if (cfg.fp_tol <= 0.0) throw config_error("scheme.fp_tol", "must be > 0");
    if (cfg.fp_max_iter < 1) throw config_error("scheme.fp_max_iter", "must be >= 1");
    if (cfg.fp_damping <= 0.0 || cfg.fp_damping > 1.0)
        throw config_error("scheme.fp_damping", "must lie in (0, 1]");
    if (cfg.n_paths < 1) throw config_error("mc.n_paths", "must be >= 1");
    if (cfg.workers < 0) throw config_error("mc.workers", "must be >= 0");
    if (cfg.output_dir.empty()) throw config_error("output.dir", "must not be empty");
    // the localized threshold needs k < 1 at every sweep point
    for (int m : cfg.sweep_M)
        if (cfg.T / static_cast<double>(m) >= 1.0)
            throw config_error("sweep.M", "localization needs k = T/M < 1");
}

std::string canonical_config_text(const ExperimentConfig& cfg) {
    std::string s;
    s += "model.kind = " + std::string(kind_name(cfg.model_kind)) + "\n";
    s += "model.k0 = " + fmt(cfg.k0) + "\n";
    s += "model.quad_points = " + std::to_string(cfg.quad_points) + "\n";
    s += "noise.alpha0 = " + fmt(cfg.alpha0) + "\n";
    s += "noise.modes = " + std::to_string(cfg.noise_modes) + "\n";
    s += "diffusion.g = " + std::string(gain_name(cfg.gain)) + "\n";
    s += "diffusion.sigma = " + fmt(cfg.sigma) + "\n";
    s += "init.amplitude = " + fmt(cfg.init_amplitude) + "\n";
    s += "init.modes = " + std::to_string(cfg.init_modes) + "\n";
    s += "time.T = " + fmt(cfg.T) + "\n";
    s += "time.M_fine = " + std::to_string(cfg.M_fine) + "\n";
    s += "space.N_ref = " + std::to_string(cfg.N_ref) + "\n";
    s += "sweep.M = " + join_ints(cfg.sweep_M) + "\n";
    s += "sweep.N = " + join_ints(cfg.sweep_N) + "\n";
    s += "analysis.betas = " + join_doubles(cfg.betas) + "\n";
    s += "analysis.epsilon = " + fmt(cfg.epsilon) + "\n";
    s += std::string("scheme.variant = ") +
         (cfg.variant == SchemeVariant::SemiImplicit ? "semi" : "full") + "\n";
    s += "scheme.fp_tol = " + fmt(cfg.fp_tol) + "\n";
    s += "scheme.fp_max_iter = " + std::to_string(cfg.fp_max_iter) + "\n";
    s += "scheme.fp_damping = " + fmt(cfg.fp_damping) + "\n";
    s += "mc.n_paths = " + std::to_string(cfg.n_paths) + "\n";
    s += "mc.master_seed = " + std::to_string(cfg.master_seed) + "\n";
    s += "mc.workers = " + std::to_string(cfg.workers) + "\n";
    s += "output.dir = " + cfg.output_dir + "\n";
    return s;
}

std::uint64_t config_hash(const ExperimentConfig& cfg) {
    // FNV-1a over the canonical text, with worker count and output dir
    // blanked so that runtime placement does not change the hash.
    ExperimentConfig c = cfg;
    c.workers = 0;
    c.output_dir = "out";
    const std::string s = canonical_config_text(c);
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 1099511628211ULL;
    }
    return h;
}

std::string config_key_reference() {
    return "model.kind         goy | sabra | heat1d | zero\n"
           "model.k0           shell wavenumber base (shells)\n"
           "model.quad_points  heat collocation points, 0 = 4*N_ref\n"
           "noise.alpha0       covariance decay exponent, > 1/2\n"
           "noise.modes        Wiener modes, 0 = N_ref\n"
           "diffusion.g        bounded | cosine | additive\n"
           "diffusion.sigma    gain amplitude\n"
           "init.amplitude     u0 = amplitude * sum 2^-n e_n\n"
           "init.modes         number of excited initial modes\n"
           "time.T             final time\n"
           "time.M_fine        finest step count (reference grid)\n"
           "space.N_ref        reference Galerkin dimension\n"
           "sweep.M            comma list; each divides M_fine\n"
           "sweep.N            comma list; each <= N_ref\n"
           "analysis.betas     comma list in [0, 1/4)\n"
           "analysis.epsilon   localization exponent in (0, 1/2)\n"
           "scheme.variant     semi | full\n"
           "scheme.fp_tol      fixed-point residual tolerance\n"
           "scheme.fp_max_iter fixed-point iteration cap\n"
           "scheme.fp_damping  Picard damping in (0, 1]\n"
           "mc.n_paths         Monte-Carlo sample count\n"
           "mc.master_seed     64-bit seed\n"
           "mc.workers         worker threads, 0 = hardware\n"
           "output.dir         output directory\n";
}

ModelSpec build_model(const ExperimentConfig& cfg) {
    const bool heat = cfg.model_kind == Kind::Heat1d;
    EigenSpectrum spec = heat ? EigenSpectrum::heat1d(cfg.N_ref)
                              : EigenSpectrum::shell(cfg.k0, cfg.N_ref);
    NonlinearityKind kind;
    switch (cfg.model_kind) {
        case Kind::Goy: kind = NonlinearityKind::goy(cfg.k0); break;
        case Kind::Sabra: kind = NonlinearityKind::sabra(cfg.k0); break;
        case Kind::Heat1d:
            kind = NonlinearityKind::heat1d(
                cfg.quad_points > 0 ? cfg.quad_points : 4 * cfg.N_ref);
            break;
        case Kind::Zero: kind = NonlinearityKind::zero(); break;
    }
    DiffusionMap diff{cfg.gain, cfg.sigma};
    const int noise_modes = cfg.noise_modes > 0 ? cfg.noise_modes : cfg.N_ref;
    NoiseSpec noise = NoiseSpec::make(heat ? ModelFamily::Heat1d : ModelFamily::Shell,
                                      cfg.k0, cfg.alpha0, noise_modes, cfg.master_seed);
    return make_model(std::move(spec), kind, diff, std::move(noise));
}

SpectralState build_initial_state(const ExperimentConfig& cfg) {
    SpectralState u0(cfg.N_ref);
    for (int n = 1; n <= cfg.init_modes && n <= cfg.N_ref; ++n)
        u0.coeffs[static_cast<std::size_t>(n - 1)] =
            cplx(cfg.init_amplitude * std::ldexp(1.0, -n), 0.0);
    return u0;
}

SchemeConfig build_scheme_config(const ExperimentConfig& cfg) {
    SchemeConfig sc;
    sc.variant = cfg.variant;
    sc.fp_tol = cfg.fp_tol;
    sc.fp_max_iter = cfg.fp_max_iter;
    sc.fp_damping = cfg.fp_damping;
    return sc;
}

void parallel_for_indices(int n, int workers, const std::function<void(int)>& fn) {
    if (workers <= 0) {
        const unsigned hw = std::thread::hardware_concurrency();
        workers = hw == 0 ? 1 : static_cast<int>(hw);
    }
    workers = std::min(workers, n);
    if (workers <= 1) {
        for (int i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(workers));
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            try {
                for (;;) {
                    const int i = next.fetch_add(1);
                    if (i >= n) break;
                    fn(i);
                }
            } catch (...) {
                errors[static_cast<std::size_t>(w)] = std::current_exception();
                next.store(n);  // drain remaining work
            }
        });
    }
    for (std::thread& t : pool) t.join();
    for (const std::exception_ptr& e : errors)
        if (e) std::rethrow_exception(e);
}

namespace {

struct PathResult {
    bool failed = false;
    std::string what;
    // flattened [sweep index][beta index]
    std::vector<ErrorRecord> time_records;
    std::vector<ErrorRecord> space_records;
};

PathResult rate_experiment_path(const ExperimentConfig& cfg, const ModelSpec& model,
                                const SpectralState& u0, const SchemeConfig& scheme,
                                std::uint64_t path_id) {
    PathResult out;
    const double k_fine = cfg.T / static_cast<double>(cfg.M_fine);
    const LocalizationRule rule{cfg.epsilon};
    try {
        const NoisePath fine = sample_path(model.noise, cfg.M_fine, k_fine, path_id);
        const Trajectory ref = reference_solution(u0, fine, model, cfg.N_ref, scheme);
        const double ref_max_q = max_norm_sq(ref, 0.25, model.spectrum);

        for (int M : cfg.sweep_M) {
            const NoisePath coarse = coarsen(fine, cfg.M_fine / M);
            const TimeGrid grid{cfg.T, M};
            const Trajectory traj = integrate(u0, coarse, model, grid, cfg.N_ref, scheme);
            const double thr = rule.threshold(grid.k());
            const bool inside = ref_max_q < thr &&
                                max_norm_sq(traj, 0.25, model.spectrum) < thr;
            const auto errs = error_norms_multi(traj, ref, cfg.betas, model.spectrum);
            for (std::size_t bi = 0; bi < cfg.betas.size(); ++bi) {
                ErrorRecord r;
                r.k = grid.k();
                r.n_modes = cfg.N_ref;
                r.beta = cfg.betas[bi];
                r.in_omega_k = inside;
                r.err_max_beta = errs[bi].first;
                r.err_energy = errs[bi].second;
                r.path_id = path_id;
                out.time_records.push_back(r);
            }
        }
        for (int N : cfg.sweep_N) {
            const TimeGrid grid{cfg.T, cfg.M_fine};
            const Trajectory traj = integrate(u0, fine, model, grid, N, scheme);
            const double thr = rule.threshold(k_fine);
            const bool inside = ref_max_q < thr &&
                                max_norm_sq(traj, 0.25, model.spectrum) < thr;
            const auto errs = error_norms_multi(traj, ref, cfg.betas, model.spectrum);
            for (std::size_t bi = 0; bi < cfg.betas.size(); ++bi) {
                ErrorRecord r;
                r.k = k_fine;
                r.n_modes = N;
                r.beta = cfg.betas[bi];
                r.in_omega_k = inside;
                r.err_max_beta = errs[bi].first;
                r.err_energy = errs[bi].second;
                r.path_id = path_id;
                out.space_records.push_back(r);
            }
        }
    } catch (const std::exception& e) {
        out.failed = true;
        out.what = e.what();
        out.time_records.clear();
        out.space_records.clear();
    }
    return out;
}

RateReport aggregate_axis(RateAxis axis, double beta, std::size_t beta_index,
                          std::size_t n_betas, std::size_t sweep_size,
                          const std::vector<PathResult>& results,
                          const std::vector<double>& abscissae, int n_paths_total) {
    RateReport rep;
    rep.axis = axis;
    rep.beta = beta;
    rep.n_paths = n_paths_total;
    std::vector<std::pair<double, double>> fit_points;
    for (std::size_t si = 0; si < sweep_size; ++si) {
        std::vector<ErrorRecord> records;
        for (const PathResult& pr : results) {
            if (pr.failed) continue;
            const auto& vec = axis == RateAxis::Time ? pr.time_records : pr.space_records;
            records.push_back(vec[si * n_betas + beta_index]);
        }
        if (records.empty()) continue;
        const LocalizedEstimate est = localized_error_estimate(records);
        RatePoint pt;
        pt.abscissa = abscissae[si];
        pt.localized_max_err = est.mean_localized_max_err;
        pt.localized_energy_err = est.mean_localized_energy_err;
        pt.omega_fraction = est.omega_fraction;
        rep.points.push_back(pt);
        if (est.mean_localized_max_err > 0.0)
            fit_points.emplace_back(pt.abscissa, std::sqrt(est.mean_localized_max_err));
    }
    if (fit_points.size() >= 3) {
        const auto [order, r2] = fit_order(fit_points);
        rep.fit_valid = true;
        rep.fitted_order = order;
        rep.r_squared = r2;
    }
    return rep;
}

void write_rate_csv(const std::string& path, const std::vector<RateReport>& reports,
                    int n_failures) {
    std::FILE* f = std::fopen(path.c_str(), "w");
    if (!f) throw file_error("cannot open " + path);
    std::fprintf(f,
                 "axis,abscissa,localized_max_err,localized_energy_err,"
                 "omega_fraction,n_paths,fitted_order,r_squared,n_failures\n");
    for (const RateReport& rep : reports) {
        std::fprintf(f, "# beta=%s%s\n", fmt(rep.beta).c_str(),
                     rep.fit_valid ? "" : " insufficient points for fit");
        const char* axis = rep.axis == RateAxis::Time ? "time" : "space";
        for (const RatePoint& pt : rep.points)
            std::fprintf(f, "%s,%s,%s,%s,%s,%d,%s,%s,%d\n", axis,
                         fmt(pt.abscissa).c_str(), fmt(pt.localized_max_err).c_str(),
                         fmt(pt.localized_energy_err).c_str(),
                         fmt(pt.omega_fraction).c_str(), rep.n_paths,
                         rep.fit_valid ? fmt(rep.fitted_order).c_str() : "nan",
                         rep.fit_valid ? fmt(rep.r_squared).c_str() : "nan",
                         n_failures);
    }
    std::fclose(f);
}

} // namespace

RunOutcome run_rate_experiment(const ExperimentConfig& cfg) {
    validate_config(cfg);
    const auto t0 = std::chrono::steady_clock::now();
    const ModelSpec model = build_model(cfg);
    const SpectralState u0 = build_initial_state(cfg);
    const SchemeConfig scheme = build_scheme_config(cfg);

    std::vector<PathResult> results(static_cast<std::size_t>(cfg.n_paths));
    parallel_for_indices(cfg.n_paths, cfg.workers, [&](int i) {
        results[static_cast<std::size_t>(i)] = rate_experiment_path(
            cfg, model, u0, scheme, static_cast<std::uint64_t>(i));
    });

    RunOutcome out;
    out.n_paths = cfg.n_paths;
    for (const PathResult& r : results)
        if (r.failed) ++out.n_failures;
    out.ok = out.n_failures <= cfg.n_paths / 100;

    std::vector<double> time_abscissae, space_abscissae;
    for (int M : cfg.sweep_M) time_abscissae.push_back(cfg.T / static_cast<double>(M));
    for (int N : cfg.sweep_N)
        space_abscissae.push_back(model.spectrum.mu[static_cast<std::size_t>(N - 1)]);

    const int n_effective = cfg.n_paths - out.n_failures;
    for (std::size_t bi = 0; bi < cfg.betas.size(); ++bi) {
        out.time_reports.push_back(aggregate_axis(RateAxis::Time, cfg.betas[bi], bi,
                                                  cfg.betas.size(), cfg.sweep_M.size(),
                                                  results, time_abscissae, n_effective));
        out.space_reports.push_back(aggregate_axis(
            RateAxis::Space, cfg.betas[bi], bi, cfg.betas.size(), cfg.sweep_N.size(),
            results, space_abscissae, n_effective));
    }

    std::filesystem::create_directories(cfg.output_dir);
    const std::string time_csv = cfg.output_dir + "/rates_time.csv";
    const std::string space_csv = cfg.output_dir + "/rates_space.csv";
    write_rate_csv(time_csv, out.time_reports, out.n_failures);
    write_rate_csv(space_csv, out.space_reports, out.n_failures);
    out.outputs = {"rates_time.csv", "rates_space.csv"};
    out.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                                     t0)
                           .count();
    write_manifest(cfg, out, cfg.output_dir + "/manifest.txt");
    return out;
}

StabilityOutcome run_stability_suite(const ExperimentConfig& cfg, double growth_limit) {
    validate_config(cfg);
    const auto t0 = std::chrono::steady_clock::now();
    const ModelSpec model = build_model(cfg);
    const SpectralState u0 = build_initial_state(cfg);
    const SchemeConfig scheme = build_scheme_config(cfg);
    const double k_fine = cfg.T / static_cast<double>(cfg.M_fine);

    struct PathStats {
        bool failed = false;
        std::vector<std::array<double, 6>> per_m;  // six statistics per M
    };
    std::vector<PathStats> stats(static_cast<std::size_t>(cfg.n_paths));

    const std::vector<double> w_half = norm_weights(model.spectrum, 0.5, cfg.N_ref);
    const std::vector<double> w_quarter = norm_weights(model.spectrum, 0.25, cfg.N_ref);
    const std::vector<double> w_3q = norm_weights(model.spectrum, 0.75, cfg.N_ref);

    parallel_for_indices(cfg.n_paths, cfg.workers, [&](int i) {
        PathStats& ps = stats[static_cast<std::size_t>(i)];
        try {
            const NoisePath fine =
                sample_path(model.noise, cfg.M_fine, k_fine, static_cast<std::uint64_t>(i));
            for (int M : cfg.sweep_M) {
                const NoisePath coarse = coarsen(fine, cfg.M_fine / M);
                const TimeGrid grid{cfg.T, M};
                const Trajectory traj =
                    integrate(u0, coarse, model, grid, cfg.N_ref, scheme);
                const double k = grid.k();
                double max_h2 = 0.0, max_q2 = 0.0;
                CompensatedSum du_h2, du_q2, en_half, en_3q;
                for (std::size_t j = 0; j < traj.states.size(); ++j) {
                    const double h2 = h_norm_sq(traj.states[j]);
                    max_h2 = std::max(max_h2, h2);
                    if (j >= 1) {
                        max_q2 = std::max(max_q2,
                                          weighted_norm_sq(traj.states[j], w_quarter));
                        en_half.add(weighted_norm_sq(traj.states[j], w_half));
                        en_3q.add(weighted_norm_sq(traj.states[j], w_3q));
                        const SpectralState du = traj.states[j] - traj.states[j - 1];
                        du_h2.add(h_norm_sq(du));
                        du_q2.add(weighted_norm_sq(du, w_quarter));
                    }
                }
                ps.per_m.push_back({max_h2, du_h2.value(), 2.0 * k * en_half.value(),
                                    max_q2, du_q2.value(), k * en_3q.value()});
            }
        } catch (const std::exception&) {
            ps.failed = true;
            ps.per_m.clear();
        }
    });

    StabilityOutcome out;
    out.n_paths = cfg.n_paths;
    for (const PathStats& ps : stats)
        if (ps.failed) ++out.n_failures;
    const int effective = cfg.n_paths - out.n_failures;
    if (effective == 0) {
        out.ok = false;
        out.bounded = false;
        return out;
    }

    for (std::size_t mi = 0; mi < cfg.sweep_M.size(); ++mi) {
        StabilityRow row;
        row.M = cfg.sweep_M[mi];
        row.k = cfg.T / static_cast<double>(row.M);
        CompensatedSum s[6];
        for (const PathStats& ps : stats) {
            if (ps.failed) continue;
            for (int c = 0; c < 6; ++c) s[c].add(ps.per_m[mi][static_cast<std::size_t>(c)]);
        }
        row.max_h2 = s[0].value() / effective;
        row.sum_du_h2 = s[1].value() / effective;
        row.energy_half = s[2].value() / effective;
        row.lhs_l2 = row.max_h2 + row.sum_du_h2 + row.energy_half;
        row.max_q2 = s[3].value() / effective;
        row.sum_du_q2 = s[4].value() / effective;
        row.energy_3q = s[5].value() / effective;
        row.lhs_quarter = row.max_q2 + row.sum_du_q2 + row.energy_3q;
        out.rows.push_back(row);
    }

    out.bounded = true;
    out.max_ratio = 1.0;
    for (std::size_t i = 1; i < out.rows.size(); ++i) {
        for (double ratio : {out.rows[i].lhs_l2 / out.rows[i - 1].lhs_l2,
                             out.rows[i].lhs_quarter / out.rows[i - 1].lhs_quarter}) {
            const double r = std::max(ratio, 1.0 / ratio);
            out.max_ratio = std::max(out.max_ratio, r);
            if (!(r <= growth_limit)) out.bounded = false;
        }
    }
    for (const StabilityRow& r : out.rows)
        if (!std::isfinite(r.lhs_l2) || !std::isfinite(r.lhs_quarter)) out.bounded = false;
    out.ok = out.bounded && out.n_failures <= cfg.n_paths / 100;

    std::filesystem::create_directories(cfg.output_dir);
    const std::string path = cfg.output_dir + "/stability.csv";
    std::FILE* f = std::fopen(path.c_str(), "w");
    if (!f) throw file_error("cannot open " + path);
    std::fprintf(f,
                 "M,k,max_h2,sum_du_h2,energy_half,lhs_l2,max_q2,sum_du_q2,"
                 "energy_3q,lhs_quarter,n_paths,n_failures\n");
    for (const StabilityRow& r : out.rows)
        std::fprintf(f, "%d,%s,%s,%s,%s,%s,%s,%s,%s,%s,%d,%d\n", r.M, fmt(r.k).c_str(),
                     fmt(r.max_h2).c_str(), fmt(r.sum_du_h2).c_str(),
                     fmt(r.energy_half).c_str(), fmt(r.lhs_l2).c_str(),
                     fmt(r.max_q2).c_str(), fmt(r.sum_du_q2).c_str(),
                     fmt(r.energy_3q).c_str(), fmt(r.lhs_quarter).c_str(), out.n_paths,
                     out.n_failures);
    std::fclose(f);
    out.outputs = {"stability.csv"};
    out.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return out;
}

namespace {

struct RateCsvRow {
    std::string axis;
    double beta = 0.0;
    double abscissa = 0.0;
    double max_err = 0.0;
    double fitted_order = 0.0;
    bool fit_valid = false;
};

std::vector<RateCsvRow> read_rate_csv(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw file_error("emit_plot_data: missing input " + path);
    std::vector<RateCsvRow> rows;
    std::string line;
    double beta = 0.0;
    bool first = true;
    while (std::getline(f, line)) {
        if (first) {  // header
            first = false;
            continue;
        }
        if (line.rfind("# beta=", 0) == 0) {
            beta = std::strtod(line.c_str() + 7, nullptr);
            continue;
        }
        if (line.empty() || line[0] == '#') continue;
        const std::vector<std::string> cells = split_list(line);
        if (cells.size() < 9) throw file_error("emit_plot_data: malformed row in " + path);
        RateCsvRow r;
        r.axis = cells[0];
        r.beta = beta;
        r.abscissa = std::strtod(cells[1].c_str(), nullptr);
        r.max_err = std::strtod(cells[2].c_str(), nullptr);
        r.fitted_order = std::strtod(cells[6].c_str(), nullptr);
        r.fit_valid = cells[6] != "nan";
        rows.push_back(r);
    }
    return rows;
}

} // namespace

std::vector<std::string> emit_plot_data(const std::string& report_dir) {
    std::vector<std::string> written;
    for (const char* which : {"time", "space"}) {
        const std::string in = report_dir + "/rates_" + which + ".csv";
        const std::vector<RateCsvRow> rows = read_rate_csv(in);
        // group by beta, preserving file order
        std::vector<double> betas;
        for (const RateCsvRow& r : rows)
            if (std::find(betas.begin(), betas.end(), r.beta) == betas.end())
                betas.push_back(r.beta);
        for (std::size_t bi = 0; bi < betas.size(); ++bi) {
            const std::string outp = report_dir + "/plot_" + which + "_beta" +
                                     std::to_string(bi) + ".dat";
            std::FILE* f = std::fopen(outp.c_str(), "w");
            if (!f) throw file_error("emit_plot_data: cannot open " + outp);
            std::fprintf(f, "# beta=%s columns: log_abscissa log_err fitted_line\n",
                         fmt(betas[bi]).c_str());
            // anchor the fitted line through the mean of the data points
            double mx = 0.0, my = 0.0;
            int n = 0;
            double order = 0.0;
            bool valid = false;
            for (const RateCsvRow& r : rows) {
                if (r.beta != betas[bi] || r.max_err <= 0.0) continue;
                mx += std::log(r.abscissa);
                my += std::log(std::sqrt(r.max_err));
                order = r.fitted_order;
                valid = r.fit_valid;
                ++n;
            }
            if (n > 0) {
                mx /= n;
                my /= n;
                for (const RateCsvRow& r : rows) {
                    if (r.beta != betas[bi] || r.max_err <= 0.0) continue;
                    const double lx = std::log(r.abscissa);
                    const double ly = std::log(std::sqrt(r.max_err));
                    const double fit = valid ? my + order * (lx - mx)
                                             : std::numeric_limits<double>::quiet_NaN();
                    std::fprintf(f, "%s %s %s\n", fmt(lx).c_str(), fmt(ly).c_str(),
                                 fmt(fit).c_str());
                }
            }
            std::fclose(f);
            written.push_back(outp);
        }
    }
    return written;
}

void write_manifest(const ExperimentConfig& cfg, const RunOutcome& outcome,
                    const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "w");
    if (!f) throw file_error("cannot open " + path);
    char hash[32];
    std::snprintf(hash, sizeof hash, "%016llx",
                  static_cast<unsigned long long>(config_hash(cfg)));
    std::fprintf(f, "code_version=%s\n", kCodeVersion);
    std::fprintf(f, "config_hash=%s\n", hash);
    std::fprintf(f, "n_paths=%d\n", outcome.n_paths);
    std::fprintf(f, "n_failures=%d\n", outcome.n_failures);
    std::fprintf(f, "wall_time_s=%.3f\n", outcome.wall_seconds);
    for (const std::string& o : outcome.outputs)
        std::fprintf(f, "output=%s\n", o.c_str());
    std::fprintf(f, "config_begin\n%sconfig_end\n", canonical_config_text(cfg).c_str());
    std::fclose(f);
}

namespace {

bool files_identical(const std::string& a, const std::string& b) {
    std::ifstream fa(a, std::ios::binary), fb(b, std::ios::binary);
    if (!fa || !fb) return false;
    std::stringstream sa, sb;
    sa << fa.rdbuf();
    sb << fb.rdbuf();
    return sa.str() == sb.str();
}

} // namespace

bool replay_manifest(const std::string& manifest_path, const std::string& scratch_dir) {
    std::ifstream f(manifest_path);
    if (!f) throw file_error("replay: cannot open " + manifest_path);
    std::string line, config_text;
    std::vector<std::string> outputs;
    bool in_config = false;
    while (std::getline(f, line)) {
        if (line == "config_begin") {
            in_config = true;
            continue;
        }
        if (line == "config_end") {
            in_config = false;
            continue;
        }
        if (in_config) {
            config_text += line + "\n";
            continue;
        }
        if (line.rfind("output=", 0) == 0) outputs.push_back(line.substr(7));
    }
    if (config_text.empty()) throw file_error("replay: manifest has no embedded config");
    ExperimentConfig cfg = parse_config_text(config_text);
    const std::string original_dir =
        std::filesystem::path(manifest_path).parent_path().string();
    cfg.output_dir = scratch_dir;
    run_rate_experiment(cfg);
    for (const std::string& o : outputs) {
        const std::string orig = (original_dir.empty() ? "." : original_dir) + "/" + o;
        if (!files_identical(orig, scratch_dir + "/" + o)) return false;
    }
    return true;
}

} // namespace spde
