#include "spde/scheme.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <string>

#include "spde/linalg.hpp"

namespace spde {

ModelSpec make_model(EigenSpectrum spectrum, NonlinearityKind kind,
                     DiffusionMap diffusion, NoiseSpec noise) {
    const bool shell_kind = kind.is_shell();
    const bool shell_spec = spectrum.label == ModelFamily::Shell;
    if (kind.kind == Kind::Heat1d && shell_spec)
        throw domain_error("model: heat nonlinearity on a shell spectrum");
    if (shell_kind && !shell_spec)
        throw domain_error("model: shell nonlinearity on a heat spectrum");
    if (noise.family != spectrum.label)
        throw domain_error("model: noise family does not match the spectrum");
    return ModelSpec{std::move(spectrum), kind, diffusion, std::move(noise)};
}

namespace {

// Per-run solver workspace.  Holds the frozen-operator assembly and the
// factorization buffers so a full trajectory does no per-step allocation
// beyond the stored states.
class StepSolver {
public:
    StepSolver(const ModelSpec& model, double k, int n)
        : model_(model), k_(k), n_(n) {
        if (n < 1) throw dimension_error("step solver: N >= 1 required");
        if (n > model.spectrum.size())
            throw dimension_error("step solver: N exceeds materialized spectrum");
        mu_ = &model.spectrum.mu;
        switch (model.kind.kind) {
            case Kind::Zero:
                break;
            case Kind::Goy:
            case Kind::Sabra:
                band_ = BandedRealMatrix(2 * n, 5, 5);
                band_copy_ = band_;
                rwork_.resize(static_cast<std::size_t>(2 * n));
                rres_.resize(static_cast<std::size_t>(2 * n));
                break;
            case Kind::Heat1d: {
                const int q = model.kind.quad_points > 0 ? model.kind.quad_points : 4 * n;
                transform_ = std::make_unique<HeatTransform>(n, q);
                dense_ = DenseComplexMatrix(n);
                dense_copy_ = dense_;
                grid_vals_.resize(static_cast<std::size_t>(q));
                absu_.resize(static_cast<std::size_t>(q));
                basis_cols_.resize(static_cast<std::size_t>(q) * static_cast<std::size_t>(n));
                SpectralState em(n);
                for (int m = 1; m <= n; ++m) {
                    em.coeffs.assign(static_cast<std::size_t>(n), cplx(0, 0));
                    em.coeffs[static_cast<std::size_t>(m - 1)] = cplx(1, 0);
                    std::vector<cplx> v;
                    transform_->synthesize(em, v);
                    for (int i = 0; i < q; ++i)
                        basis_cols_[static_cast<std::size_t>(i) * static_cast<std::size_t>(n) +
                                    static_cast<std::size_t>(m - 1)] =
                            v[static_cast<std::size_t>(i)].real();
                }
                break;
            }
        }
        cwork_.resize(static_cast<std::size_t>(n));
        cres_.resize(static_cast<std::size_t>(n));
    }

    const HeatTransform* transform() const { return transform_.get(); }

    // Solve (I + k A + k L_frozen) X = rhs; returns X and fills residual/cond.
    SpectralState solve(const SpectralState& frozen, const SpectralState& rhs,
                        const SchemeConfig& cfg, int step_index, double* residual_out,
                        double* cond_out) {
        switch (model_.kind.kind) {
            case Kind::Zero: return solve_diagonal(rhs, residual_out, cond_out);
            case Kind::Goy:
            case Kind::Sabra:
                return solve_shell(frozen, rhs, cfg, step_index, residual_out, cond_out);
            case Kind::Heat1d:
                return solve_heat(frozen, rhs, cfg, step_index, residual_out, cond_out);
        }
        throw unsupported_kind_error("step solver: unknown kind");
    }

private:
    SpectralState solve_diagonal(const SpectralState& rhs, double* residual_out,
                                 double* cond_out) {
        SpectralState x(n_);
        for (int i = 0; i < n_; ++i) {
            const double d = 1.0 + k_ * (*mu_)[static_cast<std::size_t>(i)];
            x.coeffs[static_cast<std::size_t>(i)] =
                rhs.coeffs[static_cast<std::size_t>(i)] / d;
        }
        if (residual_out) *residual_out = 0.0;
        if (cond_out) *cond_out = 1.0;  // row-equilibrated diagonal is the identity
        return x;
    }

    SpectralState solve_shell(const SpectralState& frozen, const SpectralState& rhs,
                              const SchemeConfig& cfg, int step_index,
                              double* residual_out, double* cond_out) {
        shell_linearized_bands(model_.kind, frozen, bands_);
        band_.reset_zero();
        for (int m = 1; m <= n_; ++m) {
            const int r0 = 2 * (m - 1);
            const double diag = 1.0 + k_ * (*mu_)[static_cast<std::size_t>(m - 1)];
            band_.at(r0, r0) += diag;
            band_.at(r0 + 1, r0 + 1) += diag;
            for (int d = -2; d <= 2; ++d) {
                const int col = m + d;
                if (col < 1 || col > n_) continue;
                const cplx p = k_ * bands_.pat(m, d);
                const cplx q = k_ * bands_.qat(m, d);
                const int c0 = 2 * (col - 1);
                band_.at(r0, c0) += p.real() + q.real();
                band_.at(r0, c0 + 1) += -p.imag() + q.imag();
                band_.at(r0 + 1, c0) += p.imag() + q.imag();
                band_.at(r0 + 1, c0 + 1) += p.real() - q.real();
            }
        }
        band_copy_ = band_;
        // Row equilibration: the stiff diagonal spans many orders of
        // magnitude, and the condition guard should see only genuine
        // trouble, not the spread of 1 + k mu_n.
        if (static_cast<int>(rscale_.size()) != 2 * n_)
            rscale_.resize(static_cast<std::size_t>(2 * n_));
        for (int r = 0; r < 2 * n_; ++r) {
            double s = 0.0;
            const int clo = std::max(0, r - 5);
            const int chi = std::min(2 * n_ - 1, r + 5);
            for (int c = clo; c <= chi; ++c) s = std::max(s, std::abs(band_.at(r, c)));
            if (s == 0.0)
                throw step_failure_error("singular step system", step_index,
                                         std::numeric_limits<double>::infinity());
            rscale_[static_cast<std::size_t>(r)] = s;
            for (int c = clo; c <= chi; ++c) band_.at(r, c) /= s;
        }
        double* b = rwork_.data();
        for (int m = 0; m < n_; ++m) {
            b[2 * m] = rhs.coeffs[static_cast<std::size_t>(m)].real() /
                       rscale_[static_cast<std::size_t>(2 * m)];
            b[2 * m + 1] = rhs.coeffs[static_cast<std::size_t>(m)].imag() /
                           rscale_[static_cast<std::size_t>(2 * m + 1)];
        }
        if (!band_.factor())
            throw step_failure_error("singular step system", step_index,
                                     std::numeric_limits<double>::infinity());
        const double cond = band_.condition_estimate();
        if (cond > cfg.cond_limit)
            throw step_failure_error("ill-conditioned step system", step_index, cond);
        band_.solve(b);
        // residual against the unfactored copy
        band_copy_.multiply(b, rres_.data());
        double rn = 0.0, bn = 0.0;
        for (int m = 0; m < n_; ++m) {
            const double br = rhs.coeffs[static_cast<std::size_t>(m)].real();
            const double bi = rhs.coeffs[static_cast<std::size_t>(m)].imag();
            rn += (rres_[static_cast<std::size_t>(2 * m)] - br) *
                  (rres_[static_cast<std::size_t>(2 * m)] - br);
            rn += (rres_[static_cast<std::size_t>(2 * m + 1)] - bi) *
                  (rres_[static_cast<std::size_t>(2 * m + 1)] - bi);
            bn += br * br + bi * bi;
        }
        rn = std::sqrt(rn);
        bn = std::sqrt(bn);
        if (rn > cfg.residual_factor * (1.0 + bn))
            throw step_failure_error("linear solve residual out of tolerance",
                                     step_index, cond);
        SpectralState x(n_);
        for (int m = 0; m < n_; ++m)
            x.coeffs[static_cast<std::size_t>(m)] =
                cplx(b[2 * m], b[2 * m + 1]);
        if (residual_out) *residual_out = rn;
        if (cond_out) *cond_out = cond;
        return x;
    }

    SpectralState solve_heat(const SpectralState& frozen, const SpectralState& rhs,
                             const SchemeConfig& cfg, int step_index,
                             double* residual_out, double* cond_out) {
        transform_->synthesize(frozen, grid_vals_);
        const int q = transform_->quad_points();
        for (int i = 0; i < q; ++i)
            absu_[static_cast<std::size_t>(i)] =
                std::abs(grid_vals_[static_cast<std::size_t>(i)]);
        dense_.reset_zero();
        const double w = transform_->weight();
        // (I + k diag(mu) + k C diag(|u|) S), assembled row by row
        for (int r = 1; r <= n_; ++r) {
            for (int c = 1; c <= n_; ++c) {
                double s = 0.0;
                for (int i = 0; i < q; ++i)
                    s += basis_cols_[static_cast<std::size_t>(i) * static_cast<std::size_t>(n_) +
                                     static_cast<std::size_t>(r - 1)] *
                         absu_[static_cast<std::size_t>(i)] *
                         basis_cols_[static_cast<std::size_t>(i) * static_cast<std::size_t>(n_) +
                                     static_cast<std::size_t>(c - 1)];
                dense_.at(r - 1, c - 1) = cplx(k_ * w * s, 0.0);
            }
            dense_.at(r - 1, r - 1) += 1.0 + k_ * (*mu_)[static_cast<std::size_t>(r - 1)];
        }
        dense_copy_ = dense_;
        if (static_cast<int>(rscale_.size()) != n_)
            rscale_.resize(static_cast<std::size_t>(n_));
        for (int r = 0; r < n_; ++r) {
            double s = 0.0;
            for (int c = 0; c < n_; ++c) s = std::max(s, std::abs(dense_.at(r, c)));
            if (s == 0.0)
                throw step_failure_error("singular step system", step_index,
                                         std::numeric_limits<double>::infinity());
            rscale_[static_cast<std::size_t>(r)] = s;
            for (int c = 0; c < n_; ++c) dense_.at(r, c) /= s;
        }
        for (int m = 0; m < n_; ++m)
            cwork_[static_cast<std::size_t>(m)] = rhs.coeffs[static_cast<std::size_t>(m)] /
                                                  rscale_[static_cast<std::size_t>(m)];
        if (!dense_.factor())
            throw step_failure_error("singular step system", step_index,
                                     std::numeric_limits<double>::infinity());
        const double cond = dense_.condition_estimate();
        if (cond > cfg.cond_limit)
            throw step_failure_error("ill-conditioned step system", step_index, cond);
        dense_.solve(cwork_.data());
        dense_copy_.multiply(cwork_.data(), cres_.data());
        double rn = 0.0, bn = 0.0;
        for (int m = 0; m < n_; ++m) {
            rn += std::norm(cres_[static_cast<std::size_t>(m)] -
                            rhs.coeffs[static_cast<std::size_t>(m)]);
            bn += std::norm(rhs.coeffs[static_cast<std::size_t>(m)]);
        }
        rn = std::sqrt(rn);
        bn = std::sqrt(bn);
        if (rn > cfg.residual_factor * (1.0 + bn))
            throw step_failure_error("linear solve residual out of tolerance",
                                     step_index, cond);
        SpectralState x(n_);
        x.coeffs = cwork_;
        if (residual_out) *residual_out = rn;
        if (cond_out) *cond_out = cond;
        return x;
    }

    const ModelSpec& model_;
    double k_;
    int n_;
    const std::vector<double>* mu_ = nullptr;

    ShellBands bands_;
    BandedRealMatrix band_, band_copy_;
    std::vector<double> rwork_, rres_, rscale_;

    std::unique_ptr<HeatTransform> transform_;
    DenseComplexMatrix dense_, dense_copy_;
    std::vector<cplx> grid_vals_, cwork_, cres_;
    std::vector<double> absu_;
    std::vector<double> basis_cols_;
};

SpectralState step_rhs(const SpectralState& u_j, const double* dw_row, int dw_modes,
                       const ModelSpec& model) {
    SpectralState g = apply_G(model.diffusion, u_j, dw_row, dw_modes);
    return u_j + g;
}

// ||X + kA X + k B(X,X) - rhs||_0, the fixed-point residual of (Algo-2).
double implicit_residual(const SpectralState& x, const SpectralState& rhs,
                         const ModelSpec& model, double k, int n,
                         const HeatTransform* tr) {
    SpectralState bxx = bilinear_apply(model.kind, x, x, tr);
    CompensatedSum acc;
    for (int m = 0; m < n; ++m) {
        const cplx r = x.coeffs[static_cast<std::size_t>(m)] *
                           (1.0 + k * model.spectrum.mu[static_cast<std::size_t>(m)]) +
                       k * bxx.coeffs[static_cast<std::size_t>(m)] -
                       rhs.coeffs[static_cast<std::size_t>(m)];
        acc.add(std::norm(r));
    }
    return std::sqrt(acc.value());
}

void fill_diag(StepDiag* diag, const SpectralState& x, const ModelSpec& model,
               const std::vector<double>& w_quarter, int iters, double residual,
               double cond) {
    if (!diag) return;
    diag->fp_iters = iters;
    diag->residual = residual;
    diag->cond = cond;
    diag->norm_h = h_norm(x);
    diag->norm_quarter = std::sqrt(weighted_norm_sq(x, w_quarter));
}

SpectralState do_fully_implicit(StepSolver& solver, const SpectralState& u_j,
                                const SpectralState& rhs, const ModelSpec& model,
                                double k, int n, const SchemeConfig& cfg,
                                int step_index, double* residual_out,
                                double* cond_out, int* iters_out,
                                std::vector<double>* fp_history) {
    SpectralState x = u_j;
    double cond_max = 1.0;
    double res = implicit_residual(x, rhs, model, k, n, solver.transform());
    if (fp_history) fp_history->clear();
    for (int it = 1; it <= cfg.fp_max_iter; ++it) {
        if (res <= cfg.fp_tol) {
            if (residual_out) *residual_out = res;
            if (cond_out) *cond_out = cond_max;
            if (iters_out) *iters_out = it - 1;
            return x;
        }
        double cond = 1.0;
        SpectralState y = solver.solve(x, rhs, cfg, step_index, nullptr, &cond);
        cond_max = std::max(cond_max, cond);
        if (cfg.fp_damping == 1.0) {
            x = y;
        } else {
            for (int m = 0; m < n; ++m)
                x.coeffs[static_cast<std::size_t>(m)] =
                    (1.0 - cfg.fp_damping) * x.coeffs[static_cast<std::size_t>(m)] +
                    cfg.fp_damping * y.coeffs[static_cast<std::size_t>(m)];
        }
        res = implicit_residual(x, rhs, model, k, n, solver.transform());
        if (fp_history) fp_history->push_back(res);
        if (res <= cfg.fp_tol) {
            if (residual_out) *residual_out = res;
            if (cond_out) *cond_out = cond_max;
            if (iters_out) *iters_out = it;
            return x;
        }
    }
    throw nonconvergence_error("fixed-point iteration did not converge", res,
                               cfg.fp_max_iter);
}

} // namespace

SpectralState semi_implicit_step(const SpectralState& u_j, const double* dw_row,
                                 int dw_modes, const ModelSpec& model,
                                 const TimeGrid& grid, int n_modes,
                                 const SchemeConfig& cfg, StepDiag* diag) {
    require_finite(u_j, "semi_implicit_step");
    if (u_j.n_modes() != n_modes)
        throw dimension_error("semi_implicit_step: U^j must live in H_N");
    StepSolver solver(model, grid.k(), n_modes);
    const SpectralState rhs = step_rhs(u_j, dw_row, dw_modes, model);
    double res = 0.0, cond = 1.0;
    SpectralState x = solver.solve(u_j, rhs, cfg, 0, &res, &cond);
    fill_diag(diag, x, model, norm_weights(model.spectrum, 0.25, n_modes), 0, res, cond);
    return x;
}

SpectralState fully_implicit_step(const SpectralState& u_j, const double* dw_row,
                                  int dw_modes, const ModelSpec& model,
                                  const TimeGrid& grid, int n_modes,
                                  const SchemeConfig& cfg, StepDiag* diag,
                                  std::vector<double>* fp_history) {
    require_finite(u_j, "fully_implicit_step");
    if (u_j.n_modes() != n_modes)
        throw dimension_error("fully_implicit_step: U^j must live in H_N");
    StepSolver solver(model, grid.k(), n_modes);
    const SpectralState rhs = step_rhs(u_j, dw_row, dw_modes, model);
    double res = 0.0, cond = 1.0;
    int iters = 0;
    SpectralState x = do_fully_implicit(solver, u_j, rhs, model, grid.k(), n_modes,
                                        cfg, 0, &res, &cond, &iters, fp_history);
    fill_diag(diag, x, model, norm_weights(model.spectrum, 0.25, n_modes), iters, res,
              cond);
    return x;
}

Trajectory integrate(const SpectralState& u0, const NoisePath& path,
                     const ModelSpec& model, const TimeGrid& grid, int n_modes,
                     const SchemeConfig& cfg) {
    if (grid.M < 1) throw grid_error("integrate: M must be >= 1");
    if (path.rows != grid.M)
        throw grid_error("integrate: path must be coarsened to exactly M rows");
    if (std::abs(path.k_fine - grid.k()) > 1e-12 * std::max(1.0, grid.k()))
        throw grid_error("integrate: path step size does not match the grid");
    require_finite(u0, "integrate");

    const double k = grid.k();
    StepSolver solver(model, k, n_modes);
    const std::vector<double> w_quarter = norm_weights(model.spectrum, 0.25, n_modes);

    Trajectory traj;
    traj.grid = grid;
    traj.states.reserve(static_cast<std::size_t>(grid.M) + 1);
    traj.diags.reserve(static_cast<std::size_t>(grid.M));
    traj.states.push_back(project(u0, n_modes));

    for (int j = 0; j < grid.M; ++j) {
        const SpectralState& u = traj.states.back();
        const SpectralState rhs = step_rhs(u, path.row(j), path.modes, model);
        SpectralState x(n_modes);
        StepDiag d;
        try {
            if (cfg.variant == SchemeVariant::SemiImplicit) {
                x = solver.solve(u, rhs, cfg, j, &d.residual, &d.cond);
            } else {
                x = do_fully_implicit(solver, u, rhs, model, k, n_modes, cfg, j,
                                      &d.residual, &d.cond, &d.fp_iters, nullptr);
            }
        } catch (const nonconvergence_error& e) {
            throw step_failure_error(
                std::string("step ") + std::to_string(j) + ": " + e.what(), j,
                e.last_residual);
        }
        if (!all_finite(x))
            throw step_failure_error("non-finite state produced", j, d.cond);
        d.norm_h = h_norm(x);
        d.norm_quarter = std::sqrt(weighted_norm_sq(x, w_quarter));
        traj.diags.push_back(d);
        traj.states.push_back(std::move(x));
    }
    return traj;
}

Trajectory reference_solution(const SpectralState& u0, const NoisePath& path,
                              const ModelSpec& model, int n_ref,
                              const SchemeConfig& cfg) {
    TimeGrid grid;
    grid.M = path.rows;
    grid.T = path.k_fine * static_cast<double>(path.rows);
    return integrate(u0, path, model, grid, n_ref, cfg);
}

double max_norm_sq(const Trajectory& traj, double alpha, const EigenSpectrum& spec) {
    const std::vector<double> w = norm_weights(spec, alpha, traj.n_modes());
    double m = 0.0;
    for (const SpectralState& s : traj.states)
        m = std::max(m, weighted_norm_sq(s, w));
    return m;
}

void trajectory_to_csv(const Trajectory& traj, const std::string& file) {
    std::FILE* f = std::fopen(file.c_str(), "w");
    if (!f) throw file_error("trajectory_to_csv: cannot open " + file);
    const int n = traj.n_modes();
    std::fprintf(f, "j,t");
    for (int m = 1; m <= n; ++m) std::fprintf(f, ",re_u%d", m);
    for (int m = 1; m <= n; ++m) std::fprintf(f, ",im_u%d", m);
    std::fprintf(f, "\n");
    const double k = traj.grid.k();
    for (std::size_t j = 0; j < traj.states.size(); ++j) {
        std::fprintf(f, "%zu,%.17g", j, static_cast<double>(j) * k);
        for (int m = 0; m < n; ++m)
            std::fprintf(f, ",%.17g",
                         traj.states[j].coeffs[static_cast<std::size_t>(m)].real());
        for (int m = 0; m < n; ++m)
            std::fprintf(f, ",%.17g",
                         traj.states[j].coeffs[static_cast<std::size_t>(m)].imag());
        std::fprintf(f, "\n");
    }
    std::fclose(f);
}

void diagnostics_to_csv(const Trajectory& traj, const std::string& file) {
    std::FILE* f = std::fopen(file.c_str(), "w");
    if (!f) throw file_error("diagnostics_to_csv: cannot open " + file);
    std::fprintf(f, "j,fp_iters,residual,norm0,norm_quarter\n");
    for (std::size_t j = 0; j < traj.diags.size(); ++j) {
        const StepDiag& d = traj.diags[j];
        std::fprintf(f, "%zu,%d,%.17g,%.17g,%.17g\n", j + 1, d.fp_iters, d.residual,
                     d.norm_h, d.norm_quarter);
    }
    std::fclose(f);
}

} // namespace spde
