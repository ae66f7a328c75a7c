#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "spde/analysis.hpp"

using namespace spde;

namespace {

ModelSpec zero_model(int n, double sigma) {
    return make_model(EigenSpectrum::shell(1.0, n), NonlinearityKind::zero(),
                      DiffusionMap{GainKind::Additive, sigma},
                      NoiseSpec::make(ModelFamily::Shell, 1.0, 1.0, n, 404));
}

Trajectory constant_trajectory(int n, int m, double k, cplx value) {
    Trajectory t;
    t.grid = TimeGrid{k * m, m};
    SpectralState s(n);
    for (cplx& c : s.coeffs) c = value;
    t.states.assign(static_cast<std::size_t>(m) + 1, s);
    return t;
}

} // namespace

TEST_CASE("localization threshold: eps log(1/k)") {
    const LocalizationRule rule{0.1};
    CHECK(rule.threshold(std::exp(-10.0)) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK_THROWS_AS(rule.threshold(1.5), domain_error);
    // monotone in eps
    const LocalizationRule bigger{0.2};
    CHECK(bigger.threshold(0.01) > rule.threshold(0.01));
}

TEST_CASE("error_norms: self-comparison is zero") {
    const ModelSpec model = zero_model(4, 1.0);
    const TimeGrid grid{1.0, 16};
    const NoisePath path = sample_path(model.noise, 16, grid.k(), 0);
    const Trajectory traj =
        integrate(SpectralState::unit(4, 1), path, model, grid, 4, SchemeConfig{});
    const auto [emax, eenergy] = error_norms(traj, traj, 0.1, model.spectrum);
    CHECK(emax == 0.0);
    CHECK(eenergy == 0.0);
}

TEST_CASE("error_norms: single-mode scalar recursion oracle") {
    // Zero kind, no noise: both resolutions have closed forms, so the error
    // functionals can be assembled by hand.
    const int n = 1;
    const ModelSpec model = zero_model(n, 0.0);
    const int m_fine = 64, m_coarse = 8;
    const TimeGrid fine_grid{1.0, m_fine}, coarse_grid{1.0, m_coarse};
    NoisePath fine;
    fine.rows = m_fine;
    fine.modes = n;
    fine.k_fine = fine_grid.k();
    fine.increments.assign(static_cast<std::size_t>(m_fine), 0.0);
    const SpectralState u0 = SpectralState::unit(1, 1);
    const Trajectory ref = integrate(u0, fine, model, fine_grid, n, SchemeConfig{});
    const Trajectory traj =
        integrate(u0, coarsen(fine, m_fine / m_coarse), model, coarse_grid, n, SchemeConfig{});

    const double mu = model.spectrum.mu[0];
    const double df = 1.0 / (1.0 + fine_grid.k() * mu);
    const double dc = 1.0 / (1.0 + coarse_grid.k() * mu);
    const double beta = 0.1;
    const double wb = std::pow(mu, 2.0 * beta);
    const double we = std::pow(mu, 2.0 * (0.5 + beta));
    double emax_expect = 0.0, energy_expect = 0.0;
    for (int j = 1; j <= m_coarse; ++j) {
        const double uf = std::pow(df, 8 * j);
        const double uc = std::pow(dc, j);
        const double d2 = (uf - uc) * (uf - uc);
        emax_expect = std::max(emax_expect, wb * d2);
        energy_expect += we * d2;
    }
    energy_expect *= coarse_grid.k();

    const auto [emax, eenergy] = error_norms(traj, ref, beta, model.spectrum);
    CHECK(emax == doctest::Approx(emax_expect).epsilon(1e-12));
    CHECK(eenergy == doctest::Approx(energy_expect).epsilon(1e-12));
}

TEST_CASE("error_norms: beta = 0 cross-checked against direct summation") {
    const int n = 6;
    const ModelSpec model = zero_model(n, 0.7);
    const int m_fine = 32, m_coarse = 8;
    const NoisePath fine = sample_path(model.noise, m_fine, 1.0 / m_fine, 5);
    const SpectralState u0 = SpectralState::unit(n, 2);
    const Trajectory ref =
        integrate(u0, fine, model, TimeGrid{1.0, m_fine}, n, SchemeConfig{});
    const Trajectory traj = integrate(u0, coarsen(fine, 4), model,
                                      TimeGrid{1.0, m_coarse}, 4, SchemeConfig{});
    const auto [emax, eenergy] = error_norms(traj, ref, 0.0, model.spectrum);
    double direct_max = 0.0;
    for (int j = 1; j <= m_coarse; ++j) {
        double s = 0.0;
        for (int m = 1; m <= n; ++m)
            s += std::norm(ref.states[static_cast<std::size_t>(4 * j)].mode(m) -
                           traj.states[static_cast<std::size_t>(j)].mode(m));
        direct_max = std::max(direct_max, s);
    }
    CHECK(emax == doctest::Approx(direct_max).epsilon(1e-12));
    CHECK(eenergy > 0.0);

    // swapped roles keep the same distance (padding is symmetric)
    const auto [emax_state, _] = error_norms(traj, ref, 0.0, model.spectrum);
    CHECK(emax_state == doctest::Approx(direct_max).epsilon(1e-12));
}

TEST_CASE("error_norms is symmetric when both runs share grid and modes") {
    const ModelSpec model = zero_model(5, 0.9);
    const int m = 16;
    const NoisePath pa = sample_path(model.noise, m, 1.0 / m, 1);
    const NoisePath pb = sample_path(model.noise, m, 1.0 / m, 2);
    const SpectralState u0 = SpectralState::unit(5, 1);
    const Trajectory a = integrate(u0, pa, model, TimeGrid{1.0, m}, 5, SchemeConfig{});
    const Trajectory b = integrate(u0, pb, model, TimeGrid{1.0, m}, 5, SchemeConfig{});
    const auto [e_ab_max, e_ab_en] = error_norms(a, b, 0.1, model.spectrum);
    const auto [e_ba_max, e_ba_en] = error_norms(b, a, 0.1, model.spectrum);
    CHECK(e_ab_max == doctest::Approx(e_ba_max).epsilon(1e-14));
    CHECK(e_ab_en == doctest::Approx(e_ba_en).epsilon(1e-14));
    CHECK(e_ab_max > 0.0);
}

TEST_CASE("error_norms rejects non-nesting grids") {
    const ModelSpec model = zero_model(2, 0.0);
    const Trajectory a = constant_trajectory(2, 6, 1.0 / 6, cplx(0, 0));
    const Trajectory b = constant_trajectory(2, 4, 0.25, cplx(0, 0));
    CHECK_THROWS_AS(error_norms(b, a, 0.0, model.spectrum), grid_error);
}

TEST_CASE("omega_k_indicator: zero trajectories always inside") {
    const ModelSpec model = zero_model(4, 0.0);
    const Trajectory z = constant_trajectory(4, 8, 1.0 / 64, cplx(0, 0));
    CHECK(omega_k_indicator(z, z, LocalizationRule{0.01}, model.spectrum));
}

TEST_CASE("omega_k_indicator: threshold arithmetic and eps monotonicity") {
    const ModelSpec model = zero_model(1, 0.0);
    // ||u||_{1/4}^2 per step: mu_1^{1/2} |c|^2 = 2 |c|^2
    const double k = std::exp(-10.0);
    const int m = 4;
    auto with_norm_sq = [&](double target) {
        return constant_trajectory(1, m, k / m, cplx(std::sqrt(target / 2.0), 0.0));
    };
    const LocalizationRule rule{0.1};  // threshold = 1.0 at k = e^{-10}
    Trajectory inside = with_norm_sq(0.5);
    Trajectory outside = with_norm_sq(1.5);
    inside.grid = TimeGrid{1.0, static_cast<int>(1.0 / k)};
    outside.grid = inside.grid;
    CHECK(omega_k_indicator(inside, inside, rule, model.spectrum));
    CHECK_FALSE(omega_k_indicator(outside, inside, rule, model.spectrum));
    CHECK_FALSE(omega_k_indicator(inside, outside, rule, model.spectrum));
    // a larger eps never shrinks the set
    CHECK(omega_k_indicator(inside, inside, LocalizationRule{0.3}, model.spectrum));
}

TEST_CASE("localized_error_estimate: indicator algebra") {
    std::vector<ErrorRecord> records;
    CHECK_THROWS_AS(localized_error_estimate(records), domain_error);

    ErrorRecord r;
    r.in_omega_k = true;
    r.err_max_beta = 0.3;
    r.err_energy = 0.1;
    records.push_back(r);
    const LocalizedEstimate single = localized_error_estimate(records);
    CHECK(single.mean_localized_max_err == doctest::Approx(0.3));
    CHECK(single.omega_fraction == 1.0);

    // all excluded
    std::vector<ErrorRecord> excluded(3);
    for (ErrorRecord& e : excluded) {
        e.in_omega_k = false;
        e.err_max_beta = 9.0;
        e.err_energy = 9.0;
    }
    const LocalizedEstimate none = localized_error_estimate(excluded);
    CHECK(none.mean_localized_max_err == 0.0);
    CHECK(none.mean_localized_energy_err == 0.0);
    CHECK(none.omega_fraction == 0.0);

    // mixed list against a direct loop
    std::vector<ErrorRecord> mixed;
    double sum_max = 0.0, sum_energy = 0.0;
    int inside = 0;
    for (int i = 0; i < 10; ++i) {
        ErrorRecord e;
        e.in_omega_k = (i % 3 != 0);
        e.err_max_beta = 0.1 * i;
        e.err_energy = 0.05 * i;
        if (e.in_omega_k) {
            sum_max += e.err_max_beta;
            sum_energy += e.err_energy;
            ++inside;
        }
        mixed.push_back(e);
    }
    const LocalizedEstimate est = localized_error_estimate(mixed);
    CHECK(est.mean_localized_max_err == doctest::Approx(sum_max / 10.0).epsilon(1e-14));
    CHECK(est.mean_localized_energy_err ==
          doctest::Approx(sum_energy / 10.0).epsilon(1e-14));
    CHECK(est.omega_fraction == doctest::Approx(inside / 10.0));
    // localized mean never exceeds the unlocalized mean
    double unloc = 0.0;
    for (const ErrorRecord& e : mixed) unloc += e.err_max_beta;
    CHECK(est.mean_localized_max_err <= unloc / 10.0);
}

TEST_CASE("fit_order: exact power laws") {
    const auto [o1, r1] = fit_order({{0.1, 0.01}, {0.2, 0.02}, {0.4, 0.04}});
    CHECK(o1 == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(r1 == doctest::Approx(1.0).epsilon(1e-12));

    std::vector<std::pair<double, double>> half;
    for (double h : {1e-1, 1e-2, 1e-3}) half.emplace_back(h, 3.0 * std::sqrt(h));
    const auto [o2, r2] = fit_order(half);
    CHECK(o2 == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(r2 == doctest::Approx(1.0).epsilon(1e-12));

    CHECK_THROWS_AS(fit_order({{0.1, 0.01}, {0.2, 0.02}}), domain_error);
    CHECK_THROWS_AS(fit_order({{0.1, -0.01}, {0.2, 0.02}, {0.4, 0.04}}), domain_error);
}

TEST_CASE("fit_order: bounded multiplicative noise moves the slope < 0.05") {
    for (std::uint64_t rep = 0; rep < 100; ++rep) {
        std::vector<std::pair<double, double>> pts;
        const double truth = 0.75;
        for (double h : {1e-1, 3e-2, 1e-2, 3e-3, 1e-3}) {
            const double noise = 1.0 + 0.05 * (2.0 * uniform_at(88, rep, static_cast<std::uint64_t>(h * 1e6), 0) - 1.0);
            pts.emplace_back(h, 2.0 * std::pow(h, truth) * noise);
        }
        const auto [order, r2] = fit_order(pts);
        CHECK(std::abs(order - truth) < 0.05);
        CHECK(r2 > 0.99);
    }
}

TEST_CASE("exceedance_probability: boundary thresholds and enumeration") {
    std::vector<ErrorRecord> records(4);
    const double stats[4] = {0.5, 1.0, 2.0, 4.0};
    for (int i = 0; i < 4; ++i) {
        records[static_cast<std::size_t>(i)].k = 0.01;
        records[static_cast<std::size_t>(i)].n_modes = 2;
        // err_max = s^2 so sqrt(err_max) + sqrt(err_energy) = s with energy 0
        records[static_cast<std::size_t>(i)].err_max_beta = stats[i] * stats[i];
        records[static_cast<std::size_t>(i)].err_energy = 0.0;
    }
    CHECK(exceedance_probability(records, [](double, int) { return 1e30; }) == 0.0);
    CHECK(exceedance_probability(records, [](double, int) { return 0.0; }) == 1.0);
    CHECK(exceedance_probability(records, [](double, int) { return 1.5; }) == 0.5);
    CHECK(exceedance_probability(records, [](double, int) { return 1.0; }) ==
          doctest::Approx(0.75));
    CHECK_THROWS_AS(exceedance_probability({}, [](double, int) { return 1.0; }),
                    domain_error);

    const EigenSpectrum spec = EigenSpectrum::shell(1.0, 4);
    const auto thr = power_threshold(2.0, 0.5, 0.25, spec);
    // k = 0.01, mu_2 = 16: 2 (0.1 + 16^{-1/4}) = 2 (0.1 + 0.5) = 1.2
    CHECK(thr(0.01, 2) == doctest::Approx(1.2).epsilon(1e-12));
}

TEST_CASE("increment_moment_scan: constant trajectory and Brownian scaling") {
    const EigenSpectrum spec = EigenSpectrum::shell(1.0, 1);
    // constant trajectory: all moments vanish
    const Trajectory c = constant_trajectory(1, 32, 1.0 / 32, cplx(0.7, -0.2));
    const auto zero_moments = increment_moment_scan({c}, 0.0, spec, {1, 2, 4});
    for (const auto& [dt, m2] : zero_moments) CHECK(m2 == 0.0);

    // pure Brownian single mode: E |u(t+dt) - u(t)|^2 = q_1 dt
    const NoiseSpec nspec = NoiseSpec::make(ModelFamily::Shell, 1.0, 1.0, 1, 31337);
    const int m_fine = 64;
    const double k = 1.0 / 1024;
    std::vector<Trajectory> ensemble;
    for (int p = 0; p < 2000; ++p) {
        const NoisePath path = sample_path(nspec, m_fine, k, static_cast<std::uint64_t>(p));
        Trajectory t;
        t.grid = TimeGrid{k * m_fine, m_fine};
        SpectralState s(1);
        t.states.push_back(s);
        double w = 0.0;
        for (int j = 0; j < m_fine; ++j) {
            w += path.at(j, 0);
            s.coeffs[0] = cplx(w, 0.0);
            t.states.push_back(s);
        }
        ensemble.push_back(std::move(t));
    }
    const auto moments = increment_moment_scan(ensemble, 0.0, spec, {1, 2, 4});
    const double q1 = nspec.q[0];
    double prev = 0.0;
    for (const auto& [dt, m2] : moments) {
        CHECK(m2 == doctest::Approx(q1 * dt).epsilon(0.05));
        CHECK(m2 >= prev);  // variance additivity: nondecreasing in dt
        prev = m2;
    }

    CHECK_THROWS_AS(increment_moment_scan(ensemble, 0.0, spec, {1024}), grid_error);
    CHECK_THROWS_AS(increment_moment_scan({}, 0.0, spec, {1}), domain_error);
}
