#pragma once

// Euler-Maruyama time steppers for du = -[A u + B(u,u)] dt + G(u) dW.
//
// Semi-implicit step (one linear solve per step):
//   (I + k A_N + k L_{U^j}) U^{j+1} = U^j + pi_N G(U^j) Delta_{j+1} W,
// where L_u v = pi_N B(u, v).  For shell kinds L is real-linear only
// (v -> P v + Q conj(v)), so the solve runs on the interleaved real system
// of size 2N with bandwidth 5; the heat operator is complex-linear and
// solves densely; the Zero kind is diagonal.
//
// Fully implicit step: X + k A_N X + k pi_N B(X, X) = rhs, solved by damped
// Picard iteration whose inner map freezes the first slot at the current
// iterate and reuses the semi-implicit linear machinery.  The noise
// coefficient is evaluated at U^j in both variants.

#include <memory>
#include <vector>

#include "spde/noise.hpp"
#include "spde/nonlinearity.hpp"
#include "spde/spectral.hpp"

namespace spde {

struct TimeGrid {
    double T = 1.0;
    int M = 1;
    double k() const { return T / static_cast<double>(M); }
};

enum class SchemeVariant { SemiImplicit, FullyImplicit };

struct SchemeConfig {
    SchemeVariant variant = SchemeVariant::SemiImplicit;
    double fp_tol = 1e-12;
    int fp_max_iter = 100;
    double fp_damping = 1.0;
    double cond_limit = 1e12;        // step fails beyond this condition estimate
    double residual_factor = 1e-10;  // linear solve must satisfy |Ax-b| <= f(1+|b|)
};

// The (A, B, G, Q) instantiation a run integrates.
struct ModelSpec {
    EigenSpectrum spectrum;
    NonlinearityKind kind;
    DiffusionMap diffusion;
    NoiseSpec noise;
};

ModelSpec make_model(EigenSpectrum spectrum, NonlinearityKind kind,
                     DiffusionMap diffusion, NoiseSpec noise);

struct StepDiag {
    int fp_iters = 0;         // 0 for the semi-implicit variant
    double residual = 0.0;    // linear residual, or final fixed-point residual
    double cond = 1.0;        // condition estimate of the solved system
    double norm_h = 0.0;      // |U^{j+1}|
    double norm_quarter = 0.0;// ||U^{j+1}||_{1/4}
};

struct Trajectory {
    TimeGrid grid;
    std::vector<SpectralState> states;  // M + 1 entries, states[0] = pi_N u0
    std::vector<StepDiag> diags;        // M entries

    int n_modes() const { return states.empty() ? 0 : states.front().n_modes(); }
};

// One step of each variant.  `diag` is optional; `fp_history`, when given,
// receives the residual after every accepted Picard update.
SpectralState semi_implicit_step(const SpectralState& u_j, const double* dw_row,
                                 int dw_modes, const ModelSpec& model,
                                 const TimeGrid& grid, int n_modes,
                                 const SchemeConfig& cfg, StepDiag* diag = nullptr);

SpectralState fully_implicit_step(const SpectralState& u_j, const double* dw_row,
                                  int dw_modes, const ModelSpec& model,
                                  const TimeGrid& grid, int n_modes,
                                  const SchemeConfig& cfg, StepDiag* diag = nullptr,
                                  std::vector<double>* fp_history = nullptr);

// Integrate the whole grid on one noise path (path must have exactly grid.M
// rows at step size grid.k()).  Pure function of its inputs.
Trajectory integrate(const SpectralState& u0, const NoisePath& path,
                     const ModelSpec& model, const TimeGrid& grid, int n_modes,
                     const SchemeConfig& cfg);

// Finest-grid largest-N surrogate for the exact solution; grid is inferred
// from the path (T = rows * k_fine).
Trajectory reference_solution(const SpectralState& u0, const NoisePath& path,
                              const ModelSpec& model, int n_ref,
                              const SchemeConfig& cfg);

// max over all states of ||state||_alpha^2; used for the localized set.
double max_norm_sq(const Trajectory& traj, double alpha, const EigenSpectrum& spec);

// CSV export: (j, t_j, Re u_1..N, Im u_1..N) and per-step diagnostics.
void trajectory_to_csv(const Trajectory& traj, const std::string& file);
void diagnostics_to_csv(const Trajectory& traj, const std::string& file);

} // namespace spde
