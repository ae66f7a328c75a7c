#include "spde/noise.hpp"

#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <cstring>

namespace spde {

NoiseSpec NoiseSpec::make(ModelFamily family, double k0, double alpha0,
                          int n_noise_modes, std::uint64_t master_seed) {
    if (alpha0 <= 0.5)
        throw domain_error("noise: alpha0 must exceed 1/2 for a trace-class Q");
    if (n_noise_modes < 1) throw domain_error("noise: need at least one mode");
    if (family == ModelFamily::Shell && k0 <= 0.0)
        throw domain_error("noise: shell family needs k0 > 0");
    NoiseSpec s;
    s.alpha0 = alpha0;
    s.n_noise_modes = n_noise_modes;
    s.master_seed = master_seed;
    s.family = family;
    s.k0 = k0;
    s.q.resize(static_cast<std::size_t>(n_noise_modes));
    CompensatedSum tr;
    for (int n = 1; n <= n_noise_modes; ++n) {
        const double base = family == ModelFamily::Shell
                                ? k0 * std::ldexp(1.0, n)
                                : static_cast<double>(n);
        const double qn = std::pow(base, -2.0 * alpha0);
        s.q[static_cast<std::size_t>(n - 1)] = qn;
        tr.add(qn);
    }
    s.trace_q = tr.value();
    return s;
}

NoisePath sample_path(const NoiseSpec& spec, int m_fine, double k_fine,
                      std::uint64_t path_id) {
    if (m_fine < 1) throw domain_error("sample_path: M_fine must be >= 1");
    if (k_fine <= 0.0) throw domain_error("sample_path: k_fine must be > 0");
    NoisePath p;
    p.rows = m_fine;
    p.modes = spec.n_noise_modes;
    p.k_fine = k_fine;
    p.path_id = path_id;
    p.increments.resize(static_cast<std::size_t>(m_fine) *
                        static_cast<std::size_t>(spec.n_noise_modes));
    std::vector<double> scale(static_cast<std::size_t>(spec.n_noise_modes));
    for (int n = 0; n < spec.n_noise_modes; ++n)
        scale[static_cast<std::size_t>(n)] =
            std::sqrt(k_fine * spec.q[static_cast<std::size_t>(n)]);
    for (int j = 0; j < m_fine; ++j) {
        double* row = &p.increments[static_cast<std::size_t>(j) *
                                    static_cast<std::size_t>(spec.n_noise_modes)];
        for (int n = 0; n < spec.n_noise_modes; ++n)
            row[n] = scale[static_cast<std::size_t>(n)] *
                     normal_at(spec.master_seed, path_id,
                               static_cast<std::uint64_t>(j),
                               static_cast<std::uint64_t>(n));
    }
    return p;
}

namespace {

// Pairwise (tree) sum of len consecutive entries with stride; associativity
// of dyadic trees is what makes coarsen compose exactly.
double tree_sum(const double* base, int len, int stride) {
    if (len == 1) return *base;
    const int half = len / 2;
    return tree_sum(base, half, stride) + tree_sum(base + static_cast<std::ptrdiff_t>(half) * stride, len - half, stride);
}

bool is_pow2(int x) { return x > 0 && (x & (x - 1)) == 0; }

} // namespace

NoisePath coarsen(const NoisePath& path, int factor) {
    if (factor < 1 || path.rows % factor != 0)
        throw grid_error("coarsen: factor must divide the number of rows");
    if (factor == 1) return path;
    NoisePath c;
    c.rows = path.rows / factor;
    c.modes = path.modes;
    c.k_fine = path.k_fine * static_cast<double>(factor);
    c.path_id = path.path_id;
    c.increments.resize(static_cast<std::size_t>(c.rows) *
                        static_cast<std::size_t>(c.modes));
    const bool dyadic = is_pow2(factor);
    for (int j = 0; j < c.rows; ++j) {
        for (int n = 0; n < c.modes; ++n) {
            const double* base = &path.increments[static_cast<std::size_t>(j) *
                                                      static_cast<std::size_t>(factor) *
                                                      static_cast<std::size_t>(path.modes) +
                                                  static_cast<std::size_t>(n)];
            double s;
            if (dyadic) {
                s = tree_sum(base, factor, path.modes);
            } else {
                s = 0.0;
                for (int r = 0; r < factor; ++r)
                    s += base[static_cast<std::size_t>(r) * static_cast<std::size_t>(path.modes)];
            }
            c.increments[static_cast<std::size_t>(j) * static_cast<std::size_t>(c.modes) +
                         static_cast<std::size_t>(n)] = s;
        }
    }
    return c;
}

double DiffusionMap::g(double x) const {
    switch (kind) {
        case GainKind::BoundedInverse: return sigma / (1.0 + x);
        case GainKind::Cosine: return sigma * std::cos(x);
        case GainKind::Additive: return sigma;
    }
    return 0.0;
}

SpectralState apply_G(const DiffusionMap& map, const SpectralState& u,
                      const double* dw_row, int dw_modes) {
    const int N = u.n_modes();
    const double gain = map.g(h_norm(u));
    SpectralState r(N);
    const int m = std::min(N, dw_modes);
    for (int n = 0; n < m; ++n)
        r.coeffs[static_cast<std::size_t>(n)] = cplx(gain * dw_row[n], 0.0);
    return r;
}

void save_path(const NoisePath& path, const NoiseSpec& spec, const std::string& file) {
    std::FILE* f = std::fopen(file.c_str(), "w");
    if (!f) throw file_error("save_path: cannot open " + file);
    std::fprintf(f, "# seed=%" PRIu64 " path_id=%" PRIu64 " k_fine=%.17g rows=%d modes=%d\n",
                 spec.master_seed, path.path_id, path.k_fine, path.rows, path.modes);
    std::fprintf(f, "# q=");
    for (int n = 0; n < spec.n_noise_modes; ++n)
        std::fprintf(f, "%s%.17g", n ? "," : "", spec.q[static_cast<std::size_t>(n)]);
    std::fprintf(f, "\n");
    for (int j = 0; j < path.rows; ++j) {
        for (int n = 0; n < path.modes; ++n)
            std::fprintf(f, "%s%.17g", n ? "," : "", path.at(j, n));
        std::fprintf(f, "\n");
    }
    std::fclose(f);
}

NoisePath load_path(const std::string& file) {
    std::FILE* f = std::fopen(file.c_str(), "r");
    if (!f) throw file_error("load_path: cannot open " + file);
    NoisePath p;
    char line[1 << 16];
    std::uint64_t seed = 0;
    if (!std::fgets(line, sizeof line, f) ||
        std::sscanf(line, "# seed=%" SCNu64 " path_id=%" SCNu64 " k_fine=%lg rows=%d modes=%d",
                    &seed, &p.path_id, &p.k_fine, &p.rows, &p.modes) != 5) {
        std::fclose(f);
        throw file_error("load_path: malformed header in " + file);
    }
    if (!std::fgets(line, sizeof line, f)) {  // q list; values recomputable
        std::fclose(f);
        throw file_error("load_path: missing q header in " + file);
    }
    p.increments.resize(static_cast<std::size_t>(p.rows) *
                        static_cast<std::size_t>(p.modes));
    for (int j = 0; j < p.rows; ++j) {
        if (!std::fgets(line, sizeof line, f)) {
            std::fclose(f);
            throw file_error("load_path: truncated data in " + file);
        }
        const char* s = line;
        for (int n = 0; n < p.modes; ++n) {
            char* end = nullptr;
            p.increments[static_cast<std::size_t>(j) * static_cast<std::size_t>(p.modes) +
                         static_cast<std::size_t>(n)] = std::strtod(s, &end);
            if (end == s) {
                std::fclose(f);
                throw file_error("load_path: malformed row in " + file);
            }
            s = (*end == ',') ? end + 1 : end;
        }
    }
    std::fclose(f);
    return p;
}

} // namespace spde
