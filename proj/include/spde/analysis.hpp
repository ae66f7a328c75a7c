#pragma once

// Discretization errors against the reference surrogate, the localized set
// Omega_k, Monte-Carlo estimators of the localized error functionals, and
// log-log order fitting.
//
// The error of a coarse run is e^j = u_ref(t_j) - U^j with the coarse state
// zero-padded into the reference mode set, so the truncated tail of the
// reference counts toward the error.  The localized set keeps the paths
// whose V_{1/4} norms stay below eps * log(1/k) on both the fine and the
// coarse grid.

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "spde/scheme.hpp"

namespace spde {

struct LocalizationRule {
    double epsilon = 0.01;
    // eps * log(1/k); positive for k < 1
    double threshold(double k) const;
};

struct ErrorRecord {
    double k = 0.0;
    int n_modes = 0;
    double beta = 0.0;
    bool in_omega_k = false;
    double err_max_beta = 0.0;  // max_{1<=j<=M} ||e^j||_beta^2
    double err_energy = 0.0;    // k sum_{j=1..M} ||e^j||_{1/2+beta}^2
    std::uint64_t path_id = 0;
};

struct RatePoint {
    double abscissa = 0.0;        // k (time axis) or mu_N (space axis)
    double localized_max_err = 0.0;
    double localized_energy_err = 0.0;
    double omega_fraction = 0.0;
};

enum class RateAxis { Time, Space };

struct RateReport {
    RateAxis axis = RateAxis::Time;
    double beta = 0.0;
    std::vector<RatePoint> points;
    bool fit_valid = false;     // false when fewer than 3 points
    double fitted_order = 0.0;  // slope of log sqrt(max statistic) vs log abscissa
    double r_squared = 0.0;
    int n_paths = 0;
};

// (max_j ||e^j||_beta^2, k sum_j ||e^j||_{1/2+beta}^2) of traj against ref.
// ref must refine traj in time and dominate it in modes.
std::pair<double, double> error_norms(const Trajectory& traj, const Trajectory& ref,
                                      double beta, const EigenSpectrum& spec);

// Same, for several betas in one pass over the grid.
std::vector<std::pair<double, double>> error_norms_multi(
    const Trajectory& traj, const Trajectory& ref, const std::vector<double>& betas,
    const EigenSpectrum& spec);

// Both the reference max (fine grid, all snapshots) and the coarse max must
// be below threshold(k); k is the coarse step size.
bool omega_k_indicator(const Trajectory& traj, const Trajectory& ref,
                       const LocalizationRule& rule, const EigenSpectrum& spec);

struct LocalizedEstimate {
    double mean_localized_max_err = 0.0;
    double mean_localized_energy_err = 0.0;
    double omega_fraction = 0.0;
};

// Sample means of 1_Omega * err over all records (excluded paths count as
// zero, matching E[1_Omega X]).
LocalizedEstimate localized_error_estimate(const std::vector<ErrorRecord>& records);

// Least-squares slope of log e against log h; e ~ h^order.
std::pair<double, double> fit_order(const std::vector<std::pair<double, double>>& points);

// Fraction of records whose sqrt(err_max) + sqrt(err_energy) meets or
// exceeds threshold(k, N).
double exceedance_probability(const std::vector<ErrorRecord>& records,
                              const std::function<double(double, int)>& threshold);

// Convenience threshold Theta * (k^theta0 + mu_N^{-theta1}).
std::function<double(double, int)> power_threshold(double theta_scale, double theta0,
                                                   double theta1,
                                                   const EigenSpectrum& spec);

// Streaming accumulator for E||u(t + dt) - u(t)||_beta^2 over an ensemble of
// equally-gridded trajectories; gaps are in fine steps.
class IncrementMomentAccumulator {
public:
    IncrementMomentAccumulator(std::vector<int> gaps, double beta,
                               const EigenSpectrum& spec);
    void add_path(const Trajectory& traj);
    // list of (dt, mean squared increment)
    std::vector<std::pair<double, double>> finalize() const;

private:
    std::vector<int> gaps_;
    double beta_;
    const EigenSpectrum* spec_;
    std::vector<double> sums_;
    std::vector<std::int64_t> counts_;
    double k_fine_ = 0.0;
};

// One-call version over a whole ensemble.
std::vector<std::pair<double, double>> increment_moment_scan(
    const std::vector<Trajectory>& ensemble, double beta, const EigenSpectrum& spec,
    const std::vector<int>& gaps);

} // namespace spde
