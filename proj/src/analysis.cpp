#include "spde/analysis.hpp"

#include <algorithm>
#include <cmath>

namespace spde {

double LocalizationRule::threshold(double k) const {
    if (epsilon <= 0.0) throw domain_error("localization: epsilon must be > 0");
    if (k <= 0.0 || k >= 1.0)
        throw domain_error("localization: threshold defined for k in (0, 1)");
    return epsilon * std::log(1.0 / k);
}

std::vector<std::pair<double, double>> error_norms_multi(
    const Trajectory& traj, const Trajectory& ref, const std::vector<double>& betas,
    const EigenSpectrum& spec) {
    const int m_coarse = traj.grid.M;
    const int m_fine = ref.grid.M;
    if (m_fine % m_coarse != 0)
        throw grid_error("error_norms: reference grid does not refine the coarse grid");
    const int stride = m_fine / m_coarse;
    const int n_ref = ref.n_modes();
    const int n_traj = traj.n_modes();
    if (n_traj > n_ref)
        throw grid_error("error_norms: reference has fewer modes than the trajectory");

    const std::size_t nb = betas.size();
    std::vector<std::vector<double>> w_beta(nb), w_energy(nb);
    for (std::size_t b = 0; b < nb; ++b) {
        w_beta[b] = norm_weights(spec, betas[b], n_ref);
        w_energy[b] = norm_weights(spec, 0.5 + betas[b], n_ref);
    }
    const double k = traj.grid.k();

    std::vector<double> max_beta(nb, 0.0);
    std::vector<CompensatedSum> energy(nb);
    std::vector<double> d2(static_cast<std::size_t>(n_ref));
    for (int j = 1; j <= m_coarse; ++j) {
        const SpectralState& a = ref.states[static_cast<std::size_t>(j) *
                                            static_cast<std::size_t>(stride)];
        const SpectralState& b = traj.states[static_cast<std::size_t>(j)];
        for (int n = 0; n < n_ref; ++n) {
            const cplx d = a.coeffs[static_cast<std::size_t>(n)] -
                           (n < n_traj ? b.coeffs[static_cast<std::size_t>(n)]
                                       : cplx(0.0, 0.0));
            d2[static_cast<std::size_t>(n)] = std::norm(d);
        }
        for (std::size_t bi = 0; bi < nb; ++bi) {
            CompensatedSum sb, se;
            for (int n = 0; n < n_ref; ++n) {
                sb.add(w_beta[bi][static_cast<std::size_t>(n)] * d2[static_cast<std::size_t>(n)]);
                se.add(w_energy[bi][static_cast<std::size_t>(n)] * d2[static_cast<std::size_t>(n)]);
            }
            max_beta[bi] = std::max(max_beta[bi], sb.value());
            energy[bi].add(se.value());
        }
    }
    std::vector<std::pair<double, double>> out(nb);
    for (std::size_t bi = 0; bi < nb; ++bi)
        out[bi] = {max_beta[bi], k * energy[bi].value()};
    return out;
}

std::pair<double, double> error_norms(const Trajectory& traj, const Trajectory& ref,
                                      double beta, const EigenSpectrum& spec) {
    return error_norms_multi(traj, ref, {beta}, spec).front();
}

bool omega_k_indicator(const Trajectory& traj, const Trajectory& ref,
                       const LocalizationRule& rule, const EigenSpectrum& spec) {
    const double thr = rule.threshold(traj.grid.k());
    const double ref_max = max_norm_sq(ref, 0.25, spec);
    if (ref_max >= thr) return false;
    const double traj_max = max_norm_sq(traj, 0.25, spec);
    return traj_max < thr;
}

LocalizedEstimate localized_error_estimate(const std::vector<ErrorRecord>& records) {
    if (records.empty())
        throw domain_error("localized_error_estimate: no records");
    CompensatedSum sum_max, sum_energy;
    int inside = 0;
    for (const ErrorRecord& r : records) {
        if (r.in_omega_k) {
            sum_max.add(r.err_max_beta);
            sum_energy.add(r.err_energy);
            ++inside;
        }
    }
    const double n = static_cast<double>(records.size());
    return LocalizedEstimate{sum_max.value() / n, sum_energy.value() / n,
                             static_cast<double>(inside) / n};
}

std::pair<double, double> fit_order(const std::vector<std::pair<double, double>>& points) {
    if (points.size() < 3)
        throw domain_error("fit_order: need at least 3 points");
    const int n = static_cast<int>(points.size());
    double mx = 0.0, my = 0.0;
    for (const auto& [h, e] : points) {
        if (h <= 0.0 || e <= 0.0)
            throw domain_error("fit_order: abscissae and errors must be positive");
        mx += std::log(h);
        my += std::log(e);
    }
    mx /= n;
    my /= n;
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (const auto& [h, e] : points) {
        const double dx = std::log(h) - mx;
        const double dy = std::log(e) - my;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    if (sxx == 0.0) throw domain_error("fit_order: abscissae are all equal");
    const double slope = sxy / sxx;
    const double r2 = (syy == 0.0) ? 1.0 : (sxy * sxy) / (sxx * syy);
    return {slope, r2};
}

double exceedance_probability(const std::vector<ErrorRecord>& records,
                              const std::function<double(double, int)>& threshold) {
    if (records.empty())
        throw domain_error("exceedance_probability: no records");
    int count = 0;
    for (const ErrorRecord& r : records) {
        const double stat = std::sqrt(r.err_max_beta) + std::sqrt(r.err_energy);
        if (stat >= threshold(r.k, r.n_modes)) ++count;
    }
    return static_cast<double>(count) / static_cast<double>(records.size());
}

std::function<double(double, int)> power_threshold(double theta_scale, double theta0,
                                                   double theta1,
                                                   const EigenSpectrum& spec) {
    std::vector<double> mu = spec.mu;
    return [theta_scale, theta0, theta1, mu](double k, int n_modes) {
        if (n_modes < 1 || n_modes > static_cast<int>(mu.size()))
            throw dimension_error("power_threshold: N outside the spectrum");
        const double lam = mu[static_cast<std::size_t>(n_modes - 1)];
        return theta_scale * (std::pow(k, theta0) + std::pow(lam, -theta1));
    };
}

IncrementMomentAccumulator::IncrementMomentAccumulator(std::vector<int> gaps,
                                                       double beta,
                                                       const EigenSpectrum& spec)
    : gaps_(std::move(gaps)), beta_(beta), spec_(&spec) {
    if (gaps_.empty()) throw domain_error("increment scan: no gaps");
    for (int g : gaps_)
        if (g < 1) throw grid_error("increment scan: gaps must be >= 1 fine steps");
    sums_.assign(gaps_.size(), 0.0);
    counts_.assign(gaps_.size(), 0);
}

void IncrementMomentAccumulator::add_path(const Trajectory& traj) {
    if (k_fine_ == 0.0)
        k_fine_ = traj.grid.k();
    else if (std::abs(k_fine_ - traj.grid.k()) > 1e-12 * k_fine_)
        throw grid_error("increment scan: mixed grids in the ensemble");
    const std::vector<double> w = norm_weights(*spec_, beta_, traj.n_modes());
    const int m = traj.grid.M;
    for (std::size_t gi = 0; gi < gaps_.size(); ++gi) {
        const int g = gaps_[gi];
        if (g > m) throw grid_error("increment scan: gap exceeds the grid");
        CompensatedSum acc;
        for (int j = 0; j + g <= m; ++j) {
            const SpectralState& a = traj.states[static_cast<std::size_t>(j + g)];
            const SpectralState& b = traj.states[static_cast<std::size_t>(j)];
            CompensatedSum d2;
            for (int n = 0; n < traj.n_modes(); ++n)
                d2.add(w[static_cast<std::size_t>(n)] *
                       std::norm(a.coeffs[static_cast<std::size_t>(n)] -
                                 b.coeffs[static_cast<std::size_t>(n)]));
            acc.add(d2.value());
        }
        sums_[gi] += acc.value();
        counts_[gi] += m - g + 1;
    }
}

std::vector<std::pair<double, double>> IncrementMomentAccumulator::finalize() const {
    std::vector<std::pair<double, double>> out;
    out.reserve(gaps_.size());
    for (std::size_t gi = 0; gi < gaps_.size(); ++gi) {
        if (counts_[gi] == 0)
            throw domain_error("increment scan: no samples accumulated");
        out.emplace_back(static_cast<double>(gaps_[gi]) * k_fine_,
                         sums_[gi] / static_cast<double>(counts_[gi]));
    }
    return out;
}

std::vector<std::pair<double, double>> increment_moment_scan(
    const std::vector<Trajectory>& ensemble, double beta, const EigenSpectrum& spec,
    const std::vector<int>& gaps) {
    if (ensemble.empty()) throw domain_error("increment scan: empty ensemble");
    IncrementMomentAccumulator acc(gaps, beta, spec);
    for (const Trajectory& t : ensemble) acc.add_path(t);
    return acc.finalize();
}

} // namespace spde
