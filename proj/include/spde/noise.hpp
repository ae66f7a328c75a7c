#pragma once

// Q-Wiener increments and the diffusion coefficient G.
//
// The driving noise is W(t) = sum_n sqrt(q_n) w_n(t) psi_n with diagonal
// trace-class covariance q_n = mu_n^(-alpha0), i.e. lambda_n^(-2 alpha0) in
// the shell wavenumber lambda_n = k0 2^n and n^(-2 alpha0) for heat1d.
// Increments are sampled at the finest dyadic grid and coarsened by exact
// block sums, so coarse and fine schemes see the same Brownian path.
//
// G is the scalar-gain family G(u) h = g(|u|_0) h with g Lipschitz.

#include <cstdint>
#include <string>
#include <vector>

#include "spde/rng.hpp"
#include "spde/spectral.hpp"

namespace spde {

struct NoiseSpec {
    double alpha0 = 1.0;
    int n_noise_modes = 0;
    std::uint64_t master_seed = 0;
    ModelFamily family = ModelFamily::Shell;
    double k0 = 1.0;           // shells only
    std::vector<double> q;     // q_n, n = 1..n_noise_modes
    double trace_q = 0.0;      // sum of q_n

    static NoiseSpec make(ModelFamily family, double k0, double alpha0,
                          int n_noise_modes, std::uint64_t master_seed);
};

// A realization of the scaled increments at the finest grid: row j holds
// Delta_j W in the first n_noise_modes coordinates, with per-entry law
// N(0, k_fine * q_n).
struct NoisePath {
    int rows = 0;
    int modes = 0;
    double k_fine = 0.0;
    std::uint64_t path_id = 0;
    std::vector<double> increments;  // row-major rows x modes

    double at(int row, int mode) const {
        return increments[static_cast<std::size_t>(row) * static_cast<std::size_t>(modes) +
                          static_cast<std::size_t>(mode)];
    }
    const double* row(int r) const {
        return &increments[static_cast<std::size_t>(r) * static_cast<std::size_t>(modes)];
    }
};

// Deterministic in (spec.master_seed, path_id); draws are addressed by
// (seed, path, row, mode) so generation order never matters.
NoisePath sample_path(const NoiseSpec& spec, int m_fine, double k_fine,
                      std::uint64_t path_id);

// Row j of the result sums rows j*factor .. (j+1)*factor - 1.  Power-of-two
// factors sum pairwise so that coarsen(coarsen(p, a), b) == coarsen(p, a*b)
// exactly for dyadic factors.
NoisePath coarsen(const NoisePath& path, int factor);

enum class GainKind { BoundedInverse, Cosine, Additive };

// g(x) choices, all Lipschitz with |g(0)| finite:
//   BoundedInverse: g(x) = sigma / (1 + x),  L = sigma
//   Cosine:         g(x) = sigma * cos(x),   L = sigma
//   Additive:       g(x) = sigma,            L = 0
struct DiffusionMap {
    GainKind kind = GainKind::BoundedInverse;
    double sigma = 1.0;

    double g(double x) const;
    double lipschitz() const { return kind == GainKind::Additive ? 0.0 : sigma; }
};

// pi_N G(u) dW: component n is g(|u|_0) dW_n for n <= min(noise modes, N),
// zero beyond.
SpectralState apply_G(const DiffusionMap& map, const SpectralState& u,
                      const double* dw_row, int dw_modes);

// Path dump/restore for experiment replay (header: seed, path id, k_fine,
// q_n list; then one CSV row per step).
void save_path(const NoisePath& path, const NoiseSpec& spec, const std::string& file);
NoisePath load_path(const std::string& file);

} // namespace spde
