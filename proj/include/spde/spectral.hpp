#pragma once

// States in the eigenbasis of A and the fractional-power norms built on it.
//
// The operator A is diagonal in the fixed orthonormal basis {psi_n}:
//   A psi_n = mu_n psi_n,  mu_n > 0 strictly increasing.
// Concrete spectra:
//   shell:  mu_n = (k0 * 2^n)^2   (the square of the shell wavenumber)
//   heat1d: mu_n = n^2            (Dirichlet Laplacian on (0, pi))
//
// Every fractional space V_alpha = D(A^alpha) carries the norm
//   ||u||_alpha^2 = sum_n mu_n^(2 alpha) |u_n|^2,
// so alpha = 0 is the H-norm and alpha = 1/2 the energy norm.  H is treated
// as a *real* Hilbert space: the inner product is Re sum_n u_n conj(v_n),
// which is what the scheme's variational identities pair against.

#include <cmath>
#include <complex>
#include <cstdint>
#include <string>
#include <vector>

#include "spde/errors.hpp"

namespace spde {

using cplx = std::complex<double>;

enum class ModelFamily { Shell, Heat1d };

// Eigenvalues of A, materialized up to a finite prefix.  mu is 1-based in
// the math and 0-based in storage: mu_n == mu[n-1].
struct EigenSpectrum {
    std::vector<double> mu;
    ModelFamily label = ModelFamily::Shell;

    int size() const { return static_cast<int>(mu.size()); }

    // mu_n = (k0 * 2^n)^2, n = 1..n_modes
    static EigenSpectrum shell(double k0, int n_modes) {
        if (k0 <= 0.0) throw domain_error("shell spectrum requires k0 > 0");
        if (n_modes < 1) throw domain_error("spectrum needs at least one mode");
        EigenSpectrum s;
        s.label = ModelFamily::Shell;
        s.mu.resize(n_modes);
        double lambda = k0;
        for (int n = 0; n < n_modes; ++n) {
            lambda *= 2.0;                 // lambda_n = k0 * 2^n
            s.mu[n] = lambda * lambda;
        }
        return s;
    }

    // mu_n = n^2, n = 1..n_modes
    static EigenSpectrum heat1d(int n_modes) {
        if (n_modes < 1) throw domain_error("spectrum needs at least one mode");
        EigenSpectrum s;
        s.label = ModelFamily::Heat1d;
        s.mu.resize(n_modes);
        for (int n = 1; n <= n_modes; ++n)
            s.mu[n - 1] = static_cast<double>(n) * static_cast<double>(n);
        return s;
    }
};

// Finite coefficient vector of a function in the eigenbasis of A.  Entries
// beyond n_modes are semantically zero.
struct SpectralState {
    std::vector<cplx> coeffs;

    SpectralState() = default;
    explicit SpectralState(int n) : coeffs(static_cast<std::size_t>(n)) {
        if (n < 1) throw dimension_error("state needs at least one mode");
    }

    int n_modes() const { return static_cast<int>(coeffs.size()); }

    // 1-based access matching the math; out-of-range reads are zero.
    cplx mode(int n) const {
        if (n < 1 || n > n_modes()) return cplx(0.0, 0.0);
        return coeffs[static_cast<std::size_t>(n - 1)];
    }

    static SpectralState zero(int n) { return SpectralState(n); }

    static SpectralState unit(int n, int mode, cplx amplitude = cplx(1.0, 0.0)) {
        SpectralState u(n);
        if (mode < 1 || mode > n) throw dimension_error("unit mode out of range");
        u.coeffs[static_cast<std::size_t>(mode - 1)] = amplitude;
        return u;
    }
};

inline bool all_finite(const SpectralState& u) {
    for (const cplx& c : u.coeffs)
        if (!std::isfinite(c.real()) || !std::isfinite(c.imag())) return false;
    return true;
}

inline void require_finite(const SpectralState& u, const char* where) {
    if (!all_finite(u))
        throw invalid_state_error(std::string(where) + ": non-finite coefficient");
}

// Kahan-compensated accumulator.  mu_n grows geometrically for shells, so
// naive left-to-right summation of mu^(2a)|u|^2 loses digits.
struct CompensatedSum {
    double sum = 0.0;
    double carry = 0.0;
    void add(double x) {
        double y = x - carry;
        double t = sum + y;
        carry = (t - sum) - y;
        sum = t;
    }
    double value() const { return sum; }
};

// Weights mu_n^(2 alpha) for the first n_modes of the spectrum.
inline std::vector<double> norm_weights(const EigenSpectrum& spec, double alpha,
                                        int n_modes) {
    if (n_modes > spec.size())
        throw dimension_error("norm_weights: more modes than materialized spectrum");
    std::vector<double> w(static_cast<std::size_t>(n_modes));
    for (int n = 0; n < n_modes; ++n)
        w[static_cast<std::size_t>(n)] =
            (alpha == 0.0) ? 1.0 : std::pow(spec.mu[static_cast<std::size_t>(n)], 2.0 * alpha);
    return w;
}

// ||u||^2 with precomputed weights; the hot path of the time stepper.
inline double weighted_norm_sq(const SpectralState& u, const std::vector<double>& w) {
    const int n = std::min<int>(u.n_modes(), static_cast<int>(w.size()));
    CompensatedSum acc;
    for (int i = 0; i < n; ++i)
        acc.add(w[static_cast<std::size_t>(i)] * std::norm(u.coeffs[static_cast<std::size_t>(i)]));
    return acc.value();
}

// ||u||_alpha = sqrt( sum mu_n^(2 alpha) |u_n|^2 ).
inline double norm_sq(const SpectralState& u, double alpha, const EigenSpectrum& spec) {
    require_finite(u, "norm");
    if (u.n_modes() > spec.size())
        throw dimension_error("norm: state has more modes than spectrum");
    CompensatedSum acc;
    for (int n = 0; n < u.n_modes(); ++n) {
        double w = (alpha == 0.0)
                       ? 1.0
                       : std::pow(spec.mu[static_cast<std::size_t>(n)], 2.0 * alpha);
        acc.add(w * std::norm(u.coeffs[static_cast<std::size_t>(n)]));
    }
    return acc.value();
}

inline double norm(const SpectralState& u, double alpha, const EigenSpectrum& spec) {
    return std::sqrt(norm_sq(u, alpha, spec));
}

// |u| = ||u||_0, the plain H-norm (no spectrum needed since mu^0 = 1).
inline double h_norm_sq(const SpectralState& u) {
    require_finite(u, "h_norm");
    CompensatedSum acc;
    for (const cplx& c : u.coeffs) acc.add(std::norm(c));
    return acc.value();
}

inline double h_norm(const SpectralState& u) { return std::sqrt(h_norm_sq(u)); }

// Real inner product (u, v) = Re sum_n u_n conj(v_n).
inline double h_inner(const SpectralState& u, const SpectralState& v) {
    const int n = std::min(u.n_modes(), v.n_modes());
    CompensatedSum acc;
    for (int i = 0; i < n; ++i) {
        const cplx a = u.coeffs[static_cast<std::size_t>(i)];
        const cplx b = v.coeffs[static_cast<std::size_t>(i)];
        acc.add(a.real() * b.real() + a.imag() * b.imag());
    }
    return acc.value();
}

// Galerkin projection pi_N: first N coefficients, zero-padded if N exceeds
// the input dimension.  Idempotent.
inline SpectralState project(const SpectralState& u, int N) {
    if (N < 1) throw dimension_error("project: N must be >= 1");
    SpectralState r(N);
    const int n = std::min(N, u.n_modes());
    for (int i = 0; i < n; ++i)
        r.coeffs[static_cast<std::size_t>(i)] = u.coeffs[static_cast<std::size_t>(i)];
    return r;
}

// Component n of A^power u is mu_n^power u_n.
inline SpectralState apply_A(const SpectralState& u, const EigenSpectrum& spec,
                             double power) {
    require_finite(u, "apply_A");
    if (u.n_modes() > spec.size())
        throw dimension_error("apply_A: state has more modes than spectrum");
    SpectralState r(u.n_modes());
    for (int n = 0; n < u.n_modes(); ++n) {
        double w = (power == 0.0)
                       ? 1.0
                       : std::pow(spec.mu[static_cast<std::size_t>(n)], power);
        r.coeffs[static_cast<std::size_t>(n)] = w * u.coeffs[static_cast<std::size_t>(n)];
    }
    return r;
}

inline SpectralState operator+(const SpectralState& a, const SpectralState& b) {
    if (a.n_modes() != b.n_modes()) throw dimension_error("state +: size mismatch");
    SpectralState r(a.n_modes());
    for (int i = 0; i < a.n_modes(); ++i)
        r.coeffs[static_cast<std::size_t>(i)] =
            a.coeffs[static_cast<std::size_t>(i)] + b.coeffs[static_cast<std::size_t>(i)];
    return r;
}

inline SpectralState operator-(const SpectralState& a, const SpectralState& b) {
    if (a.n_modes() != b.n_modes()) throw dimension_error("state -: size mismatch");
    SpectralState r(a.n_modes());
    for (int i = 0; i < a.n_modes(); ++i)
        r.coeffs[static_cast<std::size_t>(i)] =
            a.coeffs[static_cast<std::size_t>(i)] - b.coeffs[static_cast<std::size_t>(i)];
    return r;
}

inline SpectralState operator*(cplx s, const SpectralState& a) {
    SpectralState r(a.n_modes());
    for (int i = 0; i < a.n_modes(); ++i)
        r.coeffs[static_cast<std::size_t>(i)] = s * a.coeffs[static_cast<std::size_t>(i)];
    return r;
}

} // namespace spde
