#pragma once

// Direct solvers used by the time stepper.
//
// The semi-implicit step solves (I + k A_N + k L_u) X = rhs once per time
// step.  For the shell models L_u is only *real*-linear in X (the b_n
// formulas conjugate entries of X), so the step is a real system of size 2N
// with bandwidth 5 in the interleaved (Re_1, Im_1, Re_2, Im_2, ...)
// ordering.  For the heat model the operator is complex-linear and dense.
// Both factorizations use partial pivoting and report a cheap condition
// proxy (ratio of extreme |U_jj|) for the step-failure guard.

#include <complex>
#include <vector>

#include "spde/errors.hpp"

namespace spde {

// General real band matrix, LAPACK-style storage with room for pivot fill:
// entry (i, j) lives at ab[(kl + ku + i - j) * n + j] for
// max(0, j - ku - kl) <= i <= min(n - 1, j + kl).
class BandedRealMatrix {
public:
    BandedRealMatrix() = default;
    BandedRealMatrix(int n, int kl, int ku);

    void reset_zero();
    int size() const { return n_; }
    int lower() const { return kl_; }
    int upper() const { return ku_; }

    double& at(int i, int j) { return ab_[idx(i, j)]; }
    double at(int i, int j) const { return ab_[idx(i, j)]; }

    // Dense row i of A x (used for residual checks); x and y have length n.
    void multiply(const double* x, double* y) const;

    // In-place LU with partial pivoting.  Throws step-like failure via
    // return flag; callers translate.  Returns false on exact singularity.
    bool factor();

    // Solve with the factored data; overwrites b with the solution.
    void solve(double* b) const;

    // max |U_jj| / min |U_jj| of the factored matrix.
    double condition_estimate() const;

    bool factored() const { return factored_; }

private:
    std::size_t idx(int i, int j) const {
        return static_cast<std::size_t>(kl_ + ku_ + i - j) * static_cast<std::size_t>(n_) +
               static_cast<std::size_t>(j);
    }

    int n_ = 0, kl_ = 0, ku_ = 0;
    bool factored_ = false;
    std::vector<double> ab_;
    std::vector<int> ipiv_;
};

// Dense complex matrix with LU solve; row-major.
class DenseComplexMatrix {
public:
    DenseComplexMatrix() = default;
    explicit DenseComplexMatrix(int n);

    void reset_zero();
    int size() const { return n_; }

    std::complex<double>& at(int i, int j) {
        return a_[static_cast<std::size_t>(i) * static_cast<std::size_t>(n_) +
                  static_cast<std::size_t>(j)];
    }
    std::complex<double> at(int i, int j) const {
        return a_[static_cast<std::size_t>(i) * static_cast<std::size_t>(n_) +
                  static_cast<std::size_t>(j)];
    }

    void multiply(const std::complex<double>* x, std::complex<double>* y) const;

    bool factor();
    void solve(std::complex<double>* b) const;
    double condition_estimate() const;

    bool factored() const { return factored_; }

private:
    int n_ = 0;
    bool factored_ = false;
    std::vector<std::complex<double>> a_;
    std::vector<int> ipiv_;
};

} // namespace spde
