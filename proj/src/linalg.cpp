#include "spde/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace spde {

// ---------------------------------------------------------------- banded --

BandedRealMatrix::BandedRealMatrix(int n, int kl, int ku)
    : n_(n), kl_(kl), ku_(ku) {
    if (n < 1 || kl < 0 || ku < 0) throw domain_error("banded matrix: bad shape");
    ab_.assign(static_cast<std::size_t>(2 * kl + ku + 1) * static_cast<std::size_t>(n), 0.0);
    ipiv_.assign(static_cast<std::size_t>(n), 0);
}

void BandedRealMatrix::reset_zero() {
    std::fill(ab_.begin(), ab_.end(), 0.0);
    factored_ = false;
}

void BandedRealMatrix::multiply(const double* x, double* y) const {
    for (int i = 0; i < n_; ++i) {
        double s = 0.0;
        const int jlo = std::max(0, i - kl_);
        const int jhi = std::min(n_ - 1, i + ku_);
        for (int j = jlo; j <= jhi; ++j) s += ab_[idx(i, j)] * x[j];
        y[i] = s;
    }
}

bool BandedRealMatrix::factor() {
    // Column LU with partial pivoting; pivoting widens the upper band from
    // ku to ku + kl, which the storage already accommodates.
    const int band_hi = ku_ + kl_;
    for (int j = 0; j < n_; ++j) {
        const int ilim = std::min(n_ - 1, j + kl_);
        int piv = j;
        double pmax = std::abs(ab_[idx(j, j)]);
        for (int i = j + 1; i <= ilim; ++i) {
            const double v = std::abs(ab_[idx(i, j)]);
            if (v > pmax) { pmax = v; piv = i; }
        }
        ipiv_[static_cast<std::size_t>(j)] = piv;
        if (pmax == 0.0) return false;
        if (piv != j) {
            const int chi = std::min(n_ - 1, j + band_hi);
            for (int c = j; c <= chi; ++c)
                std::swap(ab_[idx(j, c)], ab_[idx(piv, c)]);
        }
        const double djj = ab_[idx(j, j)];
        for (int i = j + 1; i <= ilim; ++i) {
            const double l = ab_[idx(i, j)] / djj;
            ab_[idx(i, j)] = l;
            const int chi = std::min(n_ - 1, j + band_hi);
            for (int c = j + 1; c <= chi; ++c)
                ab_[idx(i, c)] -= l * ab_[idx(j, c)];
        }
    }
    factored_ = true;
    return true;
}

void BandedRealMatrix::solve(double* b) const {
    const int band_hi = ku_ + kl_;
    // forward: apply pivots and L
    for (int j = 0; j < n_; ++j) {
        const int piv = ipiv_[static_cast<std::size_t>(j)];
        if (piv != j) std::swap(b[j], b[piv]);
        const int ilim = std::min(n_ - 1, j + kl_);
        for (int i = j + 1; i <= ilim; ++i) b[i] -= ab_[idx(i, j)] * b[j];
    }
    // back substitution with U
    for (int i = n_ - 1; i >= 0; --i) {
        double s = b[i];
        const int jhi = std::min(n_ - 1, i + band_hi);
        for (int j = i + 1; j <= jhi; ++j) s -= ab_[idx(i, j)] * b[j];
        b[i] = s / ab_[idx(i, i)];
    }
}

double BandedRealMatrix::condition_estimate() const {
    double dmax = 0.0, dmin = 0.0;
    for (int j = 0; j < n_; ++j) {
        const double d = std::abs(ab_[idx(j, j)]);
        if (j == 0) { dmax = dmin = d; continue; }
        dmax = std::max(dmax, d);
        dmin = std::min(dmin, d);
    }
    if (dmin == 0.0) return std::numeric_limits<double>::infinity();
    return dmax / dmin;
}

// ----------------------------------------------------------------- dense --

DenseComplexMatrix::DenseComplexMatrix(int n) : n_(n) {
    if (n < 1) throw domain_error("dense matrix: bad size");
    a_.assign(static_cast<std::size_t>(n) * static_cast<std::size_t>(n),
              std::complex<double>(0.0, 0.0));
    ipiv_.assign(static_cast<std::size_t>(n), 0);
}

void DenseComplexMatrix::reset_zero() {
    std::fill(a_.begin(), a_.end(), std::complex<double>(0.0, 0.0));
    factored_ = false;
}

void DenseComplexMatrix::multiply(const std::complex<double>* x,
                                  std::complex<double>* y) const {
    for (int i = 0; i < n_; ++i) {
        std::complex<double> s(0.0, 0.0);
        const std::complex<double>* row = &a_[static_cast<std::size_t>(i) *
                                              static_cast<std::size_t>(n_)];
        for (int j = 0; j < n_; ++j) s += row[j] * x[j];
        y[i] = s;
    }
}

bool DenseComplexMatrix::factor() {
    for (int j = 0; j < n_; ++j) {
        int piv = j;
        double pmax = std::abs(at(j, j));
        for (int i = j + 1; i < n_; ++i) {
            const double v = std::abs(at(i, j));
            if (v > pmax) { pmax = v; piv = i; }
        }
        ipiv_[static_cast<std::size_t>(j)] = piv;
        if (pmax == 0.0) return false;
        if (piv != j)
            for (int c = 0; c < n_; ++c) std::swap(at(j, c), at(piv, c));
        const std::complex<double> djj = at(j, j);
        for (int i = j + 1; i < n_; ++i) {
            const std::complex<double> l = at(i, j) / djj;
            at(i, j) = l;
            for (int c = j + 1; c < n_; ++c) at(i, c) -= l * at(j, c);
        }
    }
    factored_ = true;
    return true;
}

void DenseComplexMatrix::solve(std::complex<double>* b) const {
    // factor() swaps whole rows (L part included), so all pivots apply to b
    // before the triangular sweeps
    for (int j = 0; j < n_; ++j) {
        const int piv = ipiv_[static_cast<std::size_t>(j)];
        if (piv != j) std::swap(b[j], b[piv]);
    }
    for (int j = 0; j < n_; ++j)
        for (int i = j + 1; i < n_; ++i) b[i] -= at(i, j) * b[j];
    for (int i = n_ - 1; i >= 0; --i) {
        std::complex<double> s = b[i];
        for (int j = i + 1; j < n_; ++j) s -= at(i, j) * b[j];
        b[i] = s / at(i, i);
    }
}

double DenseComplexMatrix::condition_estimate() const {
    double dmax = 0.0, dmin = 0.0;
    for (int j = 0; j < n_; ++j) {
        const double d = std::abs(at(j, j));
        if (j == 0) { dmax = dmin = d; continue; }
        dmax = std::max(dmax, d);
        dmin = std::min(dmin, d);
    }
    if (dmin == 0.0) return std::numeric_limits<double>::infinity();
    return dmax / dmin;
}

} // namespace spde
