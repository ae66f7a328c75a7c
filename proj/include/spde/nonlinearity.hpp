#pragma once

// The bilinear map B(u, v) for the GOY and Sabra shell models, the pointwise
// nonlinearity |u| v of the 1D heat equation, a Zero kind for linear test
// problems, and the operator v -> pi_N B(u, v) frozen at a state u that the
// implicit step solves against.
//
// Shell formulas (lambda_n = k0 * 2^n, indices outside 1..N read as zero):
//
//   GOY:   b_n(u,v) = i lambda_n [ 1/4 conj(v_{n-1}) conj(u_{n+1})
//                                 - 1/2 (conj(u_{n+1}) conj(v_{n+2})
//                                        + conj(v_{n+1}) conj(u_{n+2}))
//                                 + 1/8 conj(u_{n-1}) conj(v_{n-2}) ]
//
//   Sabra: b_n(u,v) = i/3 { lambda_{n+1} [ conj(v_{n+1}) u_{n+2}
//                                          + 2 conj(u_{n+1}) v_{n+2} ]
//                          + lambda_n    [ conj(u_{n-1}) v_{n+1}
//                                          - conj(v_{n-1}) u_{n+1} ]
//                          + lambda_{n-1}[ 2 u_{n-1} v_{n-2}
//                                          + u_{n-2} v_{n-1} ] }
//
// Both maps are additive in each slot but conjugate entries of their
// arguments, so they are bilinear over the reals only; the frozen operator
// v -> B(u, v) decomposes as v -> P v + Q conj(v) with P, Q banded
// (bandwidth 2 in the mode index).
//
// Heat1d: B(u, v)(x) = |u(x)| v(x) on (0, pi) with the Dirichlet sine basis
// psi_n(x) = sqrt(2/pi) sin(n x), evaluated by midpoint collocation on
// quad_points >= 4 N points (the product |u| v is not band-limited; the 4x
// margin keeps aliasing below the discretization error).

#include <memory>
#include <vector>

#include "spde/spectral.hpp"

namespace spde {

enum class Kind { Goy, Sabra, Heat1d, Zero };

struct NonlinearityKind {
    Kind kind = Kind::Zero;
    double k0 = 1.0;       // shell wavenumber base, shells only
    int quad_points = 0;   // collocation grid size, heat only

    static NonlinearityKind goy(double k0) { return {Kind::Goy, k0, 0}; }
    static NonlinearityKind sabra(double k0) { return {Kind::Sabra, k0, 0}; }
    static NonlinearityKind heat1d(int quad_points) {
        return {Kind::Heat1d, 1.0, quad_points};
    }
    static NonlinearityKind zero() { return {Kind::Zero, 1.0, 0}; }

    bool is_shell() const { return kind == Kind::Goy || kind == Kind::Sabra; }
};

// Midpoint-collocation transforms between sine coefficients and grid values,
// cached because the sin() tables dominate the cost of a single apply.
class HeatTransform {
public:
    HeatTransform(int n_modes, int quad_points);

    int n_modes() const { return n_; }
    int quad_points() const { return q_; }

    // values[i] = sum_n c_n psi_n(x_i)
    void synthesize(const SpectralState& u, std::vector<cplx>& values) const;
    // c_n = (pi/Q) sum_i values[i] psi_n(x_i)
    SpectralState analyze(const std::vector<cplx>& values) const;

    double weight() const { return w_; }

private:
    int n_, q_;
    double w_;                  // quadrature weight pi/Q
    std::vector<double> basis_; // basis_[i*n + (n-1)] = psi_n(x_i)
};

// v -> pi_N B(u, v) frozen at u, stored as the complex-linear part P and the
// anti-linear part Q of the map v -> P v + Q conj(v).  For shell kinds both
// parts are banded with bandwidth <= 2; combined() = P + Q is the matrix
// whose column m is B(u, e_m).
class LinearizedOperator {
public:
    LinearizedOperator(int n, SpectralState frozen);

    int size() const { return n_; }
    const SpectralState& frozen_state() const { return frozen_; }

    cplx& p(int row, int col) { return p_[flat(row, col)]; }
    cplx& q(int row, int col) { return q_[flat(row, col)]; }
    cplx p(int row, int col) const { return p_[flat(row, col)]; }
    cplx q(int row, int col) const { return q_[flat(row, col)]; }
    cplx combined(int row, int col) const { return p(row, col) + q(row, col); }

    SpectralState apply(const SpectralState& v) const;

private:
    std::size_t flat(int r, int c) const {
        return static_cast<std::size_t>(r - 1) * static_cast<std::size_t>(n_) +
               static_cast<std::size_t>(c - 1);
    }
    int n_;
    SpectralState frozen_;
    std::vector<cplx> p_, q_;
};

// pi_N B(u, v); u and v must have the same n_modes.
SpectralState bilinear_apply(const NonlinearityKind& kind, const SpectralState& u,
                             const SpectralState& v,
                             const HeatTransform* transform = nullptr);

LinearizedOperator linearize(const NonlinearityKind& kind, const SpectralState& u,
                             const HeatTransform* transform = nullptr);

// Re <B(u, v), v> over the truncation; shells only (the heat nonlinearity
// carries no cancellation claim).
double energy_pairing(const NonlinearityKind& kind, const SpectralState& u,
                      const SpectralState& v);

// Monte-Carlo sup of ||B(u,v)||_{-alpha} / (||u||_{1/2-(alpha+beta)} ||v||_beta)
// over random unit-norm pairs at dimension n_modes.
double estimate_bilinear_constant(const NonlinearityKind& kind,
                                  const EigenSpectrum& spec, int n_modes,
                                  double alpha, double beta, int samples,
                                  std::uint64_t rng_seed);

// Banded view of the frozen shell operator used by the time stepper:
// for each row n, coefficients p[n][d], q[n][d] with d = col - n in [-2, 2].
struct ShellBands {
    int n = 0;
    // stride-5 arrays, entry (row n, offset d) at (n-1)*5 + (d+2)
    std::vector<cplx> p, q;
    cplx pat(int row, int d) const {
        return p[static_cast<std::size_t>(row - 1) * 5 + static_cast<std::size_t>(d + 2)];
    }
    cplx qat(int row, int d) const {
        return q[static_cast<std::size_t>(row - 1) * 5 + static_cast<std::size_t>(d + 2)];
    }
};

void shell_linearized_bands(const NonlinearityKind& kind, const SpectralState& u,
                            ShellBands& bands);

} // namespace spde
