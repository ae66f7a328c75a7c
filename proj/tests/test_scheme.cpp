#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>

#include "spde/scheme.hpp"

using namespace spde;

namespace {

ModelSpec sabra_model(int n, double sigma, GainKind gain = GainKind::BoundedInverse,
                      double alpha0 = 1.0) {
    return make_model(EigenSpectrum::shell(1.0, n), NonlinearityKind::sabra(1.0),
                      DiffusionMap{gain, sigma},
                      NoiseSpec::make(ModelFamily::Shell, 1.0, alpha0, n, 2024));
}

ModelSpec zero_model(int n, double sigma, GainKind gain = GainKind::Additive) {
    return make_model(EigenSpectrum::shell(1.0, n), NonlinearityKind::zero(),
                      DiffusionMap{gain, sigma},
                      NoiseSpec::make(ModelFamily::Shell, 1.0, 1.0, n, 2024));
}

SpectralState random_state(int n, std::uint64_t seed, std::uint64_t tag,
                           int lo = 1, int hi = 1 << 30) {
    SpectralState u(n);
    for (int m = 1; m <= n; ++m) {
        if (m < lo || m > hi) continue;
        u.coeffs[static_cast<std::size_t>(m - 1)] =
            cplx(normal_at(seed, tag, static_cast<std::uint64_t>(m), 0),
                 normal_at(seed, tag, static_cast<std::uint64_t>(m), 1));
    }
    return u;
}

NoisePath zero_path(int rows, int modes, double k) {
    NoisePath p;
    p.rows = rows;
    p.modes = modes;
    p.k_fine = k;
    p.increments.assign(static_cast<std::size_t>(rows) * static_cast<std::size_t>(modes),
                        0.0);
    return p;
}

} // namespace

TEST_CASE("semi-implicit step: diagonal closed form (zero kind, no noise)") {
    const int n = 4;
    const ModelSpec model = zero_model(n, 0.0);
    const TimeGrid grid{2.0, 4};  // k = 0.5
    const std::vector<double> dw(static_cast<std::size_t>(n), 0.0);
    const SpectralState u = SpectralState::unit(n, 1);
    const SpectralState x =
        semi_implicit_step(u, dw.data(), n, model, grid, n, SchemeConfig{});
    // mu_1 = 4: x_1 = 1 / (1 + 0.5 * 4) = 1/3
    CHECK(std::abs(x.mode(1) - cplx(1.0 / 3.0, 0.0)) < 1e-15);
    for (int m = 2; m <= n; ++m) CHECK(std::abs(x.mode(m)) == 0.0);
}

TEST_CASE("semi-implicit step: additive noise diagonal solve") {
    const int n = 3;
    const ModelSpec model = zero_model(n, 1.0);
    const TimeGrid grid{1.0, 10};  // k = 0.1
    const double dw[3] = {0.3, -0.7, 0.2};
    const SpectralState u = random_state(n, 5, 0);
    const SpectralState x =
        semi_implicit_step(u, dw, n, model, grid, n, SchemeConfig{});
    for (int m = 1; m <= n; ++m) {
        const cplx expect = (u.mode(m) + dw[m - 1]) /
                            (1.0 + 0.1 * model.spectrum.mu[static_cast<std::size_t>(m - 1)]);
        CHECK(std::abs(x.mode(m) - expect) <= 1e-14 * (1.0 + std::abs(expect)));
    }
}

TEST_CASE("semi-implicit step satisfies the variational identity (Sabra)") {
    const int n = 16;
    const ModelSpec model = sabra_model(n, 0.3);
    const TimeGrid grid{1.0, 1000};
    const double k = grid.k();
    for (std::uint64_t t = 0; t < 20; ++t) {
        const SpectralState u = random_state(n, 31, t);
        const NoisePath path = sample_path(model.noise, 1, k, t);
        StepDiag diag;
        const SpectralState x = semi_implicit_step(u, path.row(0), path.modes, model,
                                                   grid, n, SchemeConfig{}, &diag);
        // residual through the independent bilinear_apply route
        const SpectralState rhs = u + apply_G(model.diffusion, u, path.row(0), path.modes);
        const SpectralState axu = apply_A(x, model.spectrum, 1.0);
        const SpectralState bux = bilinear_apply(model.kind, u, x);
        double resid = 0.0, rhs_norm = 0.0;
        for (int m = 1; m <= n; ++m) {
            const cplx r = x.mode(m) + k * axu.mode(m) + k * bux.mode(m) - rhs.mode(m);
            resid += std::norm(r);
            rhs_norm += std::norm(rhs.mode(m));
        }
        CHECK(std::sqrt(resid) <= 1e-10 * (1.0 + std::sqrt(rhs_norm)));
        CHECK(diag.cond < 1e8);
    }
}

TEST_CASE("fully implicit equals semi-implicit for the zero kind") {
    const int n = 6;
    const ModelSpec model = zero_model(n, 0.8);
    const TimeGrid grid{1.0, 50};
    const NoisePath path = sample_path(model.noise, 1, grid.k(), 3);
    const SpectralState u = random_state(n, 77, 0);
    const SpectralState a =
        semi_implicit_step(u, path.row(0), path.modes, model, grid, n, SchemeConfig{});
    SchemeConfig full;
    full.variant = SchemeVariant::FullyImplicit;
    const SpectralState b =
        fully_implicit_step(u, path.row(0), path.modes, model, grid, n, full);
    for (int m = 1; m <= n; ++m) CHECK(a.mode(m) == b.mode(m));
}

TEST_CASE("fully implicit: substitution residual and iteration count (Sabra)") {
    const int n = 16;
    const ModelSpec model = sabra_model(n, 0.3);
    const TimeGrid grid{1.0, 1000};  // k = 1e-3, inside the contraction regime
    const double k = grid.k();
    SchemeConfig cfg;
    cfg.variant = SchemeVariant::FullyImplicit;
    cfg.fp_tol = 1e-12;
    for (std::uint64_t t = 0; t < 20; ++t) {
        const SpectralState u = cplx(0.3, 0.0) * random_state(n, 41, t);
        const NoisePath path = sample_path(model.noise, 1, k, t);
        StepDiag diag;
        const SpectralState x = fully_implicit_step(u, path.row(0), path.modes, model,
                                                    grid, n, cfg, &diag);
        CHECK(diag.fp_iters <= 10);
        // direct substitution into X + kAX + kB(X,X) = rhs
        const SpectralState rhs = u + apply_G(model.diffusion, u, path.row(0), path.modes);
        const SpectralState ax = apply_A(x, model.spectrum, 1.0);
        const SpectralState bxx = bilinear_apply(model.kind, x, x);
        double resid = 0.0;
        for (int m = 1; m <= n; ++m)
            resid += std::norm(x.mode(m) + k * ax.mode(m) + k * bxx.mode(m) - rhs.mode(m));
        CHECK(std::sqrt(resid) <= 1e-12);
    }
}

TEST_CASE("fully implicit: residual decreases monotonically across iterations") {
    const int n = 16;
    const ModelSpec model = sabra_model(n, 0.3);
    const TimeGrid grid{1.0, 1000};
    SchemeConfig cfg;
    cfg.variant = SchemeVariant::FullyImplicit;
    cfg.fp_tol = 1e-12;
    int checked = 0;
    for (std::uint64_t t = 0; t < 100; ++t) {
        const SpectralState u = cplx(0.5, 0.0) * random_state(n, 43, t);
        const NoisePath path = sample_path(model.noise, 1, grid.k(), t);
        std::vector<double> history;
        (void)fully_implicit_step(u, path.row(0), path.modes, model, grid, n, cfg,
                                  nullptr, &history);
        for (std::size_t i = 1; i < history.size(); ++i) {
            CHECK(history[i] <= history[i - 1]);
            ++checked;
        }
    }
    CHECK(checked > 0);
}

TEST_CASE("fully implicit: nonconvergence surfaces as an error") {
    const int n = 8;
    const ModelSpec model = sabra_model(n, 0.0);
    const TimeGrid grid{1.0, 2};  // huge k, far outside the contraction regime
    SchemeConfig cfg;
    cfg.variant = SchemeVariant::FullyImplicit;
    cfg.fp_tol = 1e-16;
    cfg.fp_max_iter = 3;
    const SpectralState u = cplx(10.0, 0.0) * random_state(n, 47, 0);
    const std::vector<double> dw(static_cast<std::size_t>(n), 0.0);
    CHECK_THROWS_AS(fully_implicit_step(u, dw.data(), n, model, grid, n, cfg),
                    nonconvergence_error);
}

TEST_CASE("integrate: grid preconditions") {
    const int n = 4;
    const ModelSpec model = zero_model(n, 0.0);
    const NoisePath path = zero_path(8, n, 0.125);
    CHECK_THROWS_AS(integrate(SpectralState::zero(n), path, model, TimeGrid{1.0, 0}, n,
                              SchemeConfig{}),
                    grid_error);
    CHECK_THROWS_AS(integrate(SpectralState::zero(n), path, model, TimeGrid{1.0, 4}, n,
                              SchemeConfig{}),
                    grid_error);
}

TEST_CASE("integrate: zero kind, zero noise follows (1 + k mu)^(-j)") {
    const int n = 5;
    const ModelSpec model = zero_model(n, 0.0);
    const int M = 64;
    const TimeGrid grid{1.0, M};
    const NoisePath path = zero_path(M, n, grid.k());
    SpectralState u0(n);
    for (int m = 1; m <= n; ++m)
        u0.coeffs[static_cast<std::size_t>(m - 1)] = cplx(1.0, -0.5) * (1.0 / m);
    const Trajectory traj = integrate(u0, path, model, grid, n, SchemeConfig{});
    REQUIRE(static_cast<int>(traj.states.size()) == M + 1);
    for (int m = 1; m <= n; ++m) {
        cplx expect = u0.mode(m);
        const double decay = 1.0 / (1.0 + grid.k() * model.spectrum.mu[static_cast<std::size_t>(m - 1)]);
        for (int j = 1; j <= M; ++j) {
            expect *= decay;
            CHECK(std::abs(traj.states[static_cast<std::size_t>(j)].mode(m) - expect) <=
                  1e-12 * (1.0 + std::abs(expect)));
        }
    }
}

TEST_CASE("integrate: additive-noise diagonal recursion oracle") {
    const int n = 6;
    const ModelSpec model = zero_model(n, 1.0);
    const int M = 128;
    const TimeGrid grid{1.0, M};
    const NoisePath path = sample_path(model.noise, M, grid.k(), 17);
    const SpectralState u0 = random_state(n, 53, 0);
    const Trajectory traj = integrate(u0, path, model, grid, n, SchemeConfig{});
    // independent scalar recursion on the same increments
    for (int m = 1; m <= n; ++m) {
        cplx x = u0.mode(m);
        const double denom = 1.0 + grid.k() * model.spectrum.mu[static_cast<std::size_t>(m - 1)];
        for (int j = 0; j < M; ++j) {
            x = (x + path.at(j, m - 1)) / denom;
            CHECK(std::abs(traj.states[static_cast<std::size_t>(j + 1)].mode(m) - x) <=
                  1e-12 * (1.0 + std::abs(x)));
        }
    }
}

TEST_CASE("integrate is bitwise deterministic") {
    const int n = 12;
    const ModelSpec model = sabra_model(n, 0.4);
    const TimeGrid grid{1.0, 256};
    const NoisePath path = sample_path(model.noise, 256, grid.k(), 9);
    const SpectralState u0 = cplx(0.2, 0.0) * random_state(n, 59, 0);
    const Trajectory a = integrate(u0, path, model, grid, n, SchemeConfig{});
    const Trajectory b = integrate(u0, path, model, grid, n, SchemeConfig{});
    REQUIRE(a.states.size() == b.states.size());
    for (std::size_t j = 0; j < a.states.size(); ++j)
        CHECK(std::memcmp(a.states[j].coeffs.data(), b.states[j].coeffs.data(),
                          a.states[j].coeffs.size() * sizeof(cplx)) == 0);
}

TEST_CASE("discrete energy inequality for noise-free shell runs") {
    // |U^{j+1}|^2 + |U^{j+1} - U^j|^2 + 2k ||U^{j+1}||_{1/2}^2 <= |U^j|^2 + tol
    // for interior-supported data (the cancellation keeps the bilinear term
    // out of the balance up to truncation-boundary leaks).
    const int n = 32;
    for (Kind kindsel : {Kind::Sabra, Kind::Goy, Kind::Zero}) {
        ModelSpec model = make_model(
            EigenSpectrum::shell(1.0, n),
            kindsel == Kind::Zero ? NonlinearityKind::zero()
                                  : NonlinearityKind{kindsel, 1.0, 0},
            DiffusionMap{GainKind::Additive, 0.0},
            NoiseSpec::make(ModelFamily::Shell, 1.0, 1.0, n, 2024));
        const int M = 50;
        const TimeGrid grid{0.05, M};
        const double k = grid.k();
        const NoisePath path = zero_path(M, n, k);
        const SpectralState u0 = random_state(n, 61, 1, 3, 8);
        const Trajectory traj = integrate(u0, path, model, grid, n, SchemeConfig{});
        const std::vector<double> w_half = norm_weights(model.spectrum, 0.5, n);
        for (int j = 0; j < M; ++j) {
            const SpectralState& prev = traj.states[static_cast<std::size_t>(j)];
            const SpectralState& next = traj.states[static_cast<std::size_t>(j + 1)];
            const double lhs = h_norm_sq(next) + h_norm_sq(next - prev) +
                               2.0 * k * weighted_norm_sq(next, w_half);
            CHECK(lhs <= h_norm_sq(prev) + 1e-10 * (1.0 + h_norm_sq(prev)));
        }
    }
}

TEST_CASE("semi-implicit and fully implicit agree as k -> 0") {
    const int n = 12;
    const ModelSpec model = sabra_model(n, 0.3);
    const SpectralState u0 = cplx(0.5, 0.0) * random_state(n, 67, 0);
    const int m_fine = 400;
    const double T = 1.0;
    const NoisePath fine = sample_path(model.noise, m_fine, T / m_fine, 4);
    double prev_diff = -1.0;
    for (int M : {100, 200, 400}) {
        const NoisePath path = coarsen(fine, m_fine / M);
        const TimeGrid grid{T, M};
        SchemeConfig semi;
        SchemeConfig full;
        full.variant = SchemeVariant::FullyImplicit;
        const Trajectory a = integrate(u0, path, model, grid, n, semi);
        const Trajectory b = integrate(u0, path, model, grid, n, full);
        double diff = 0.0;
        for (std::size_t j = 0; j < a.states.size(); ++j)
            diff = std::max(diff, h_norm(a.states[j] - b.states[j]));
        if (prev_diff >= 0.0) CHECK(diff < prev_diff);
        prev_diff = diff;
    }
}

TEST_CASE("reference_solution: self-comparison and path sensitivity") {
    const int n = 10;
    const ModelSpec model = sabra_model(n, 0.4);
    const NoisePath p0 = sample_path(model.noise, 128, 1.0 / 128, 0);
    const NoisePath p1 = sample_path(model.noise, 128, 1.0 / 128, 1);
    const SpectralState u0 = cplx(0.2, 0.0) * random_state(n, 71, 0);
    const Trajectory r0 = reference_solution(u0, p0, model, n, SchemeConfig{});
    const Trajectory r0b = reference_solution(u0, p0, model, n, SchemeConfig{});
    const Trajectory r1 = reference_solution(u0, p1, model, n, SchemeConfig{});
    double same = 0.0, diff = 0.0;
    for (std::size_t j = 0; j < r0.states.size(); ++j) {
        same = std::max(same, h_norm(r0.states[j] - r0b.states[j]));
        diff = std::max(diff, h_norm(r0.states[j] - r1.states[j]));
    }
    CHECK(same == 0.0);
    CHECK(diff > 0.0);
}

TEST_CASE("heat model integrates and stays real for real data") {
    const int n = 8;
    ModelSpec model = make_model(EigenSpectrum::heat1d(n), NonlinearityKind::heat1d(4 * n),
                                 DiffusionMap{GainKind::BoundedInverse, 0.5},
                                 NoiseSpec::make(ModelFamily::Heat1d, 1.0, 1.0, n, 2024));
    const int M = 64;
    const TimeGrid grid{1.0, M};
    const NoisePath path = sample_path(model.noise, M, grid.k(), 2);
    SpectralState u0(n);
    u0.coeffs[0] = cplx(1.0, 0.0);
    u0.coeffs[1] = cplx(-0.4, 0.0);
    const Trajectory traj = integrate(u0, path, model, grid, n, SchemeConfig{});
    for (const SpectralState& s : traj.states)
        for (const cplx& c : s.coeffs) CHECK(std::abs(c.imag()) < 1e-14);
    // diagnostics populated
    REQUIRE(static_cast<int>(traj.diags.size()) == M);
    for (const StepDiag& d : traj.diags) CHECK(std::isfinite(d.norm_h));
}

TEST_CASE("trajectory and diagnostics CSV export") {
    const int n = 3;
    const ModelSpec model = zero_model(n, 1.0);
    const TimeGrid grid{1.0, 4};
    const NoisePath path = sample_path(model.noise, 4, grid.k(), 0);
    const Trajectory traj =
        integrate(SpectralState::unit(n, 1), path, model, grid, n, SchemeConfig{});
    trajectory_to_csv(traj, "traj_test.csv");
    diagnostics_to_csv(traj, "diag_test.csv");
    std::FILE* f = std::fopen("traj_test.csv", "r");
    REQUIRE(f != nullptr);
    char header[256];
    REQUIRE(std::fgets(header, sizeof header, f) != nullptr);
    CHECK(std::strncmp(header, "j,t,re_u1", 9) == 0);
    int lines = 0;
    while (std::fgets(header, sizeof header, f)) ++lines;
    std::fclose(f);
    CHECK(lines == 5);
    std::remove("traj_test.csv");
    std::remove("diag_test.csv");
}
