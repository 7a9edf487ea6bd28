#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <cstdlib>
#include <cstdio>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "hardylab/comparators.hpp"
#include "hardylab/config.hpp"
#include "hardylab/couplings.hpp"
#include "hardylab/parallel.hpp"
#include "hardylab/quadrature.hpp"
#include "hardylab/stable_kernel.hpp"

namespace hardylab {

struct PicardConfig {
    int max_iterations = 12;
    double rel_tolerance = 1e-4;
    int time_nodes = 24;                   // graded s-subintervals on (0, t/2]
    double space_truncation_radius = 14.0; // grid half-extent, units of t^{1/a}
    int origin_refinement_levels = 3;
    double resolution = 1.0;               // uniform refinement multiplier
    double damping = 1.0;                  // relaxation weight on the update
    int anderson_window = 30;              // 0 = plain (damped) iteration
    double metric_radius = 10.0;           // convergence metric region, units
                                           // of t^{1/a}; the band beyond it is
                                           // a truncation buffer for the tail
                                           // closure

    void validate() const {
        if (!(rel_tolerance > 0.0))
            throw std::domain_error("PicardConfig: rel_tolerance must be positive");
        if (time_nodes < 16)
            throw std::domain_error("PicardConfig: need time_nodes >= 16");
        if (max_iterations < 1 || origin_refinement_levels < 0 ||
            !(space_truncation_radius > 2.0) || !(resolution > 0.0) ||
            !(damping > 0.0 && damping <= 1.0))
            throw std::domain_error("PicardConfig: invalid field");
    }
};

namespace detail {

/// Symmetric grid: refined linear core near the origin, unit-scale linear
/// middle, geometric growth capped at half a kernel width (the ratio field
/// keeps w-scale structure transverse to the diagonal at every radius).
inline std::vector<double> sym_graded_grid(double w, double extent_factor,
                                           int refine_levels, double resolution) {
    const double h0 = 0.05 * w / resolution;
    const double cap = 0.5 * w / resolution;
    const double R = extent_factor * w;
    std::vector<double> pos{0.0};
    double step = h0 / static_cast<double>(1 << refine_levels);
    double x = 0.0;
    while (x < R) {
        x += step;
        pos.push_back(std::min(x, R));
        if (step < h0 && x >= 24.0 * step) {
            step *= 2.0;
        } else if (x >= w) {
            step = std::min(cap, step * (1.0 + 0.12 / resolution));
        }
    }
    std::vector<double> grid;
    grid.reserve(2 * pos.size());
    for (std::size_t i = pos.size(); i-- > 1;) grid.push_back(-pos[i]);
    for (double v : pos) grid.push_back(v);
    return grid;
}

/// Panel breakpoints in the rescaled peak variable u, |u| <= 64, graded
/// around the peak at u = 0.
inline std::vector<double> u_panel_breaks() {
    std::vector<double> b{0.0};
    for (double h = 0.25; h <= 64.0; h *= M_SQRT2) {
        b.push_back(h);
        b.push_back(-h);
    }
    std::sort(b.begin(), b.end());
    return b;
}

} // namespace detail

/// One self-similar Picard solve of the Duhamel equation anchored at time
/// `t_anchor`: values of p_t(x,y) on a graded (x,y) grid, extended to every
/// other time through the exact homogeneity of the operator.
class PerturbedKernel {
public:
    /// `warm`, when given, seeds the iteration with the scale-free ratio
    /// field of an already-solved kernel (same parameter point); the fixed
    /// point itself does not depend on the seed.
    PerturbedKernel(const ParameterPoint& pt, const PicardConfig& cfg,
                    double t_anchor, const PerturbedKernel* warm = nullptr,
                    std::vector<double> explicit_grid = {})
        : point_(pt), cfg_(cfg), t_(t_anchor), free_(pt.d, pt.alpha) {
        cfg.validate();
        if (pt.d != 1)
            throw std::domain_error("PerturbedKernel: d = 1 solver");
        if (!(pt.alpha > 1.0 && pt.alpha < 2.0))
            throw std::domain_error("PerturbedKernel: alpha must lie in (1,2)");
        if (!(t_anchor > 0.0))
            throw std::domain_error("PerturbedKernel: anchor time must be positive");
        w_ = std::pow(t_, 1.0 / pt.alpha);
        grid_ = explicit_grid.empty()
                    ? detail::sym_graded_grid(w_, cfg.space_truncation_radius,
                                              cfg.origin_refinement_levels,
                                              cfg.resolution)
                    : std::move(explicit_grid);
        solve(warm);
    }

    const ParameterPoint& point() const { return point_; }
    double anchor() const { return t_; }
    const std::vector<double>& grid() const { return grid_; }
    const std::vector<double>& values() const { return vals_; }
    int iterations_used() const { return iterations_; }
    int seed_iterations() const { return seed_iterations_; }
    double last_correction() const { return corrections_.empty() ? 0.0
                                                                 : corrections_.back(); }
    const std::vector<double>& corrections() const { return corrections_; }
    bool converged() const { return converged_; }
    bool diverged() const { return diverged_; }
    double min_value() const { return min_value_; }

    /// p_t(x, y) for arbitrary t > 0: exact free factor times the ratio
    /// field mapped through the homogeneity of the operator.
    double eval(double t, double x, double y) const {
        if (!(t > 0.0)) throw std::domain_error("PerturbedKernel::eval: t > 0");
        const double mu = std::pow(t_ / t, 1.0 / point_.alpha);
        return free_.density(t, std::abs(x - y)) * ratio_interp(mu * x, mu * y);
    }

    /// p_t(x,y) / p~_t(x,y), the dimensionless ratio field.
    double ratio(double t, double x, double y) const {
        const double mu = std::pow(t_ / t, 1.0 / point_.alpha);
        return ratio_interp(mu * x, mu * y);
    }

    /// Row mass integral of p_t(x, .) with algebraic tail closure.
    double mass(double t, double x) const {
        const double lam = std::pow(t / t_, 1.0 / point_.alpha);
        const double R = grid_.back() * lam;
        double total = 0.0;
        for (std::size_t i = 0; i + 1 < grid_.size(); ++i) {
            const double a = grid_[i] * lam, b = grid_[i + 1] * lam;
            total += gauss_panel([&](double y) { return eval(t, x, y); }, a, b).value;
        }
        auto tail = [&](double y) { return eval(t, x, y); };
        total += integrate(tail, R, 80.0 * R, 1e-9).value;
        total += integrate(tail, -80.0 * R, -R, 1e-9).value;
        return total;
    }

private:
    void solve(const PerturbedKernel* warm) {
        const std::size_t n = grid_.size();
        base_.resize(n * n);
        auto anchor_free = free_.scaled(t_);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j)
                base_[i * n + j] = anchor_free.density(std::abs(grid_[i] - grid_[j]));
        vals_ = base_;
        rho_.assign(n * n, 1.0);
        clamp_ = 0.98 * grid_.back();

        // cold full-resolution starts build a coarse companion solve on the
        // subsampled (hence nested) grid: it seeds the iteration and then
        // serves as the correction level of a two-grid cycle. Neither role
        // moves the fixed point.
        if (warm == nullptr && point_.kappa != 0.0 && cfg_.resolution >= 0.65) {
            PicardConfig coarse = cfg_;
            coarse.resolution = 0.6 * cfg_.resolution; // recurses while >= 0.65
            coarse.max_iterations = 60;
            coarse.rel_tolerance = std::min(cfg_.rel_tolerance, 3e-5);
            std::vector<double> half;
            const std::size_t zero_at =
                static_cast<std::size_t>(std::find(grid_.begin(), grid_.end(), 0.0) -
                                         grid_.begin());
            coarse_map_.clear();
            for (std::size_t i = 0; i < grid_.size(); ++i) {
                const std::size_t off =
                    i >= zero_at ? i - zero_at : zero_at - i;
                if (off % 2 == 0 || i == 0 || i + 1 == grid_.size()) {
                    half.push_back(grid_[i]);
                    coarse_map_.push_back(i);
                }
            }
            seed_ = std::make_unique<PerturbedKernel>(point_, coarse, t_, nullptr,
                                                      std::move(half));
            seed_iterations_ = seed_->seed_iterations() + seed_->iterations_used();
            warm = seed_.get();
        }
        if (warm != nullptr) {
            const double mu = std::pow(warm->t_ / t_, 1.0 / point_.alpha);
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < n; ++j) {
                    rho_[i * n + j] =
                        warm->ratio_interp(mu * grid_[i], mu * grid_[j]);
                    vals_[i * n + j] = base_[i * n + j] * rho_[i * n + j];
                }
        }

        metric_mask_.assign(n * n, 0);
        {
            const double R = cfg_.metric_radius * w_;
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < n; ++j)
                    metric_mask_[i * n + j] =
                        std::abs(grid_[i]) <= R && std::abs(grid_[j]) <= R;
        }

        converged_ = false;
        iterations_ = 0;
        if (point_.kappa == 0.0) {
            // the Duhamel correction carries a factor kappa: exact degeneracy
            converged_ = true;
            iterations_ = 1;
            corrections_.push_back(0.0);
            finish_stats();
            return;
        }

        const double q = point_.alpha / (point_.alpha - 1.0);
        s_marks_ = graded_breaks(
            0.0, 0.5 * t_, static_cast<std::size_t>(cfg_.time_nodes * cfg_.resolution),
            q);
        ubreaks_ = detail::u_panel_breaks();

        // Fixed-point solve of v = G(v) := base - kappa D[v]. The reported
        // correction is always the relative sup-norm of the raw Picard
        // update G(v) - v. The march toward the fixed point is accelerated:
        // with a coarse companion each sweep is followed by a two-grid
        // correction, otherwise Anderson mixing over the history (the plain
        // series diverges once |kappa| ||D|| exceeds one).
        const std::size_t nn = n * n;
        std::vector<double> f(nn);
        std::vector<double> rho_f, e_c, e_ratio;
        std::vector<double> f_prev, x_prev;
        std::vector<std::vector<double>> dX, dF;
        double best = 1e300;
        int growth_run = 0;
        for (int it = 0; it < cfg_.max_iterations; ++it) {
            picard_update(vals_, 1.0, f);

            double delta = 0.0, scale = 0.0;
            std::size_t arg = 0;
            for (std::size_t m = 0; m < nn; ++m) {
                if (!metric_mask_[m]) continue;
                if (std::abs(f[m]) > delta) { delta = std::abs(f[m]); arg = m; }
                scale = std::max(scale, std::abs(vals_[m]));
            }
            if (std::getenv("HARDYLAB_TRACE"))
                std::fprintf(stderr,
                             "  [res %.2f] sweep %d: |f|max %.3e at (x=%g, y=%g)\n",
                             cfg_.resolution, iterations_, delta, grid_[arg / n],
                             grid_[arg % n]);
            corrections_.push_back(delta / scale);
            ++iterations_;
            if (corrections_.back() < cfg_.rel_tolerance) {
                converged_ = true;
                break;
            }
            growth_run = corrections_.back() > 2.0 * best ? growth_run + 1 : 0;
            best = std::min(best, corrections_.back());
            if (growth_run >= 4 || corrections_.back() > 100.0) {
                diverged_ = true;
                break;
            }

            if (seed_) {
                // two-grid cycle: solve (I + kappa D_c) e = f on the coarse
                // companion, prolongate in ratio form, correct
                const std::size_t nc = seed_->grid_.size();
                e_c.assign(nc * nc, 0.0);
                std::vector<double> r_c(nc * nc);
                for (std::size_t a = 0; a < nc; ++a)
                    for (std::size_t b = 0; b < nc; ++b)
                        r_c[a * nc + b] =
                            f[coarse_map_[a] * n + coarse_map_[b]];
                seed_->solve_correction(r_c, 10, 0.03, e_c);
                e_ratio.resize(nc * nc);
                for (std::size_t m = 0; m < nc * nc; ++m)
                    e_ratio[m] = e_c[m] / seed_->base_[m];
                for (std::size_t i = 0; i < n; ++i)
                    for (std::size_t j = 0; j < n; ++j)
                        vals_[i * n + j] +=
                            base_[i * n + j] *
                            seed_->field_interp(e_ratio, 0.0, grid_[i], grid_[j]);
            } else if (cfg_.anderson_window > 0) {
                // Anderson mixing (QR least squares on the residual history)
                if (corrections_.size() >= 2 &&
                    corrections_.back() >
                        20.0 * corrections_[corrections_.size() - 2]) {
                    dX.clear();
                    dF.clear();
                }
                if (!x_prev.empty()) {
                    std::vector<double> dx(nn), df(nn);
                    for (std::size_t m = 0; m < nn; ++m) {
                        dx[m] = vals_[m] - x_prev[m];
                        df[m] = f[m] - f_prev[m];
                    }
                    dX.push_back(std::move(dx));
                    dF.push_back(std::move(df));
                    if (static_cast<int>(dX.size()) > cfg_.anderson_window) {
                        dX.erase(dX.begin());
                        dF.erase(dF.begin());
                    }
                }
                x_prev = vals_;
                f_prev = f;
                anderson_step(f, dX, dF, cfg_.damping, vals_);
            } else {
                for (std::size_t m = 0; m < nn; ++m)
                    vals_[m] += cfg_.damping * f[m];
            }
            for (std::size_t m = 0; m < nn; ++m) rho_[m] = vals_[m] / base_[m];
        }
        if (converged_) {
            // land exactly on the accepted Picard image
            for (std::size_t m = 0; m < nn; ++m) vals_[m] += f[m];
            for (std::size_t m = 0; m < nn; ++m) rho_[m] = vals_[m] / base_[m];
        }
        finish_stats();
    }

    /// f := G(v) - v on this level, where G(v) = scale_b * base - kappa D[v].
    /// `scale_b` = 1 solves the kernel equation; scale_b = 0 with an external
    /// right-hand side added by the caller turns it into a correction solve.
    void picard_update(const std::vector<double>& v, double scale_b,
                       std::vector<double>& f) const {
        const std::size_t n = grid_.size();
        const std::size_t nn = n * n;
        std::vector<double> rho_v(nn);
        const double limit = scale_b == 1.0 ? 1.0 : 0.0;
        for (std::size_t m = 0; m < nn; ++m) rho_v[m] = v[m] / base_[m];
        std::vector<double> corr(nn, 0.0);
        accumulate_piece(corr, s_marks_, ubreaks_, true, rho_v, limit);
        accumulate_piece(corr, s_marks_, ubreaks_, false, rho_v, limit);
        f.resize(nn);
        for (std::size_t m = 0; m < nn; ++m)
            f[m] = scale_b * base_[m] - point_.kappa * corr[m] - v[m];
    }

    /// Approximately solves (I + kappa D) e = r on this level by Anderson-
    /// mixed iteration e <- r - kappa D e; used as the coarse half of the
    /// two-grid cycle.
    void solve_correction(const std::vector<double>& r, int max_its,
                          double rel_tol, std::vector<double>& e) const {
        const std::size_t nn = e.size();
        double r_sup = 0.0;
        for (std::size_t m = 0; m < nn; ++m)
            if (metric_mask_[m]) r_sup = std::max(r_sup, std::abs(r[m]));
        if (r_sup == 0.0) return;
        std::vector<double> f(nn), f_prev, e_prev;
        std::vector<std::vector<double>> dX, dF;
        for (int it = 0; it < max_its; ++it) {
            picard_update(e, 0.0, f);
            double sup = 0.0;
            for (std::size_t m = 0; m < nn; ++m) {
                f[m] += r[m];
                if (metric_mask_[m]) sup = std::max(sup, std::abs(f[m]));
            }
            if (sup < rel_tol * r_sup) break;
            if (!e_prev.empty()) {
                std::vector<double> dx(nn), df(nn);
                for (std::size_t m = 0; m < nn; ++m) {
                    dx[m] = e[m] - e_prev[m];
                    df[m] = f[m] - f_prev[m];
                }
                dX.push_back(std::move(dx));
                dF.push_back(std::move(df));
            }
            e_prev = e;
            f_prev = f;
            anderson_step(f, dX, dF, 1.0, e);
        }
    }

    /// One Anderson-type-II step: x += omega f - (dX + omega dF) gamma with
    /// gamma from a modified Gram-Schmidt QR least squares on dF.
    static void anderson_step(const std::vector<double>& f,
                              const std::vector<std::vector<double>>& dX,
                              const std::vector<std::vector<double>>& dF,
                              double omega, std::vector<double>& x) {
        const std::size_t nn = x.size();
        if (dX.empty()) {
            for (std::size_t m = 0; m < nn; ++m) x[m] += omega * f[m];
            return;
        }
        const std::size_t k = dX.size();
        std::vector<std::vector<double>> Q;
        std::vector<std::vector<double>> Rcols;
        std::vector<std::size_t> keep;
        Q.reserve(k);
        for (std::size_t a = 0; a < k; ++a) {
            std::vector<double> v = dF[a];
            std::vector<double> r(Q.size() + 1, 0.0);
            for (int pass = 0; pass < 2; ++pass) {
                for (std::size_t q = 0; q < Q.size(); ++q) {
                    double dot = 0.0;
                    for (std::size_t m = 0; m < nn; ++m) dot += Q[q][m] * v[m];
                    r[q] += dot;
                    for (std::size_t m = 0; m < nn; ++m) v[m] -= dot * Q[q][m];
                }
            }
            double nrm = 0.0;
            for (double vm : v) nrm += vm * vm;
            nrm = std::sqrt(nrm);
            double col_nrm = 0.0;
            for (double vm : dF[a]) col_nrm += vm * vm;
            col_nrm = std::sqrt(col_nrm);
            if (!(nrm > 1e-10 * col_nrm)) continue; // dependent column
            r.back() = nrm;
            for (auto& vm : v) vm /= nrm;
            Q.push_back(std::move(v));
            Rcols.push_back(std::move(r));
            keep.push_back(a);
        }
        const std::size_t kk = Q.size();
        std::vector<double> c(kk), gamma_k(kk, 0.0);
        for (std::size_t qq = 0; qq < kk; ++qq) {
            double dot = 0.0;
            for (std::size_t m = 0; m < nn; ++m) dot += Q[qq][m] * f[m];
            c[qq] = dot;
        }
        for (std::size_t qq = kk; qq-- > 0;) {
            double s = c[qq];
            for (std::size_t b = qq + 1; b < kk; ++b) s -= Rcols[b][qq] * gamma_k[b];
            gamma_k[qq] = s / Rcols[qq][qq];
        }
        std::vector<double> gamma(k, 0.0);
        for (std::size_t qq = 0; qq < kk; ++qq) gamma[keep[qq]] = gamma_k[qq];
        for (std::size_t m = 0; m < nn; ++m) {
            double upd = omega * f[m];
            for (std::size_t a = 0; a < k; ++a)
                upd -= (dX[a][m] + omega * dF[a][m]) * gamma[a];
            x[m] += upd;
        }
    }

    void finish_stats() {
        min_value_ = vals_.empty() ? 0.0
                                   : *std::min_element(vals_.begin(), vals_.end());
    }

    /// Adds one Duhamel piece. piece_a: int_0^{t/2} p_{t-s} psi dz p~'_s;
    /// otherwise int_0^{t/2} p_s psi dz p~'_{t-s}. The z-integral runs in
    /// the rescaled variable u centered at the narrow factor's peak.
    void accumulate_piece(std::vector<double>& corr,
                          const std::vector<double>& s_marks,
                          const std::vector<double>& ubreaks, bool piece_a,
                          const std::vector<double>& rho_src,
                          double closure_limit) const {
        const std::size_t n = grid_.size();
        static const double gl4x[4] = {-0.8611363115940526, -0.3399810435848563,
                                       0.3399810435848563, 0.8611363115940526};
        static const double gl4w[4] = {0.3478548451374538, 0.6521451548625461,
                                       0.6521451548625461, 0.3478548451374538};

        // s-nodes with 3-point Gauss per graded subinterval
        static const double gl3x[3] = {-0.7745966692414834, 0.0, 0.7745966692414834};
        static const double gl3w[3] = {5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0};
        struct SNode { double s, weight; };
        std::vector<SNode> snodes;
        for (std::size_t i = 0; i + 1 < s_marks.size(); ++i) {
            const double a = s_marks[i], b = s_marks[i + 1];
            for (int g = 0; g < 3; ++g)
                snodes.push_back({0.5 * (a + b) + 0.5 * (b - a) * gl3x[g],
                                  0.5 * (b - a) * gl3w[g]});
        }

        parallel_for(n, [&](std::size_t outer) {
            // piece A: outer = j (column of y); piece B: outer = i (row of x)
            const double center = grid_[outer];
            std::vector<double> zk, qk;
            zk.reserve(256);
            qk.reserve(256);
            for (const auto& sn : snodes) {
                const double s = sn.s, tau = t_ - s;
                const double ws = std::pow(s, 1.0 / point_.alpha);
                const double mu = std::pow(t_ / (piece_a ? tau : s),
                                           1.0 / point_.alpha);
                auto narrow = free_.scaled(s);
                auto wide = free_.scaled(tau);

                // z-panels: rescaled template around the peak plus a ladder
                // at the origin crossing where |z|^{1-a} is singular
                zk.clear();
                qk.clear();
                std::vector<double> breaks;
                breaks.reserve(ubreaks.size() + 40);
                for (double u : ubreaks) breaks.push_back(center + ws * u);
                const double zlo = center - 64.0 * ws, zhi = center + 64.0 * ws;
                if (zlo < 0.0 && zhi > 0.0)
                    append_ladder(breaks, 0.0, 1e-8 * w_, 64.0 * ws, zlo, zhi, 3.0);
                if (!piece_a) {
                    // cusp of the ratio field along the second slot, at
                    // scale s^{1/a} after the homogeneity map
                    if (ws > zlo && ws < zhi) breaks.push_back(ws);
                    if (-ws > zlo && -ws < zhi) breaks.push_back(-ws);
                }
                const auto bk = finalize_breaks(std::move(breaks), zlo, zhi);
                for (std::size_t b = 0; b + 1 < bk.size(); ++b) {
                    const double mid = 0.5 * (bk[b] + bk[b + 1]);
                    const double half = 0.5 * (bk[b + 1] - bk[b]);
                    if (!(half > 0.0)) continue;
                    if (std::abs(mid) + half < 1e-9 * w_) continue; // origin sliver
                    for (int g = 0; g < 4; ++g) {
                        const double z = mid + half * gl4x[g];
                        if (std::abs(z) < 1e-12 * w_) continue;
                        const double psi = (z > 0.0 ? 1.0 : -1.0) *
                                           std::pow(std::abs(z), 1.0 - point_.alpha);
                        double f;
                        if (piece_a) {
                            // narrow factor: d/dz p~_s(z, y_j)
                            const double r = z - center;
                            f = (r > 0.0 ? 1.0 : -1.0) * narrow.ddr(std::abs(r));
                        } else {
                            // narrow factor: p_s(x_i, z) via the ratio field
                            f = narrow.density(std::abs(z - center)) *
                                field_interp(rho_src, closure_limit, mu * center,
                                             mu * z);
                        }
                        zk.push_back(z);
                        qk.push_back(half * gl4w[g] * psi * f);
                    }
                }

                // inner sweep over the other grid index
                if (piece_a) {
                    const std::size_t j = outer;
                    // separable interpolation lookups for the ratio factor;
                    // out-of-range coordinates fall back to the clamped path
                    struct Look { std::size_t idx; double frac; bool in; };
                    auto make_look = [&](double v) -> Look {
                        if (std::abs(v) > clamp_) return {0, 0.0, false};
                        auto it = std::upper_bound(grid_.begin(), grid_.end(), v);
                        if (it == grid_.begin()) return {0, 0.0, true};
                        if (it == grid_.end()) return {n - 2, 1.0, true};
                        const std::size_t idx =
                            static_cast<std::size_t>(it - grid_.begin()) - 1;
                        return {idx, (v - grid_[idx]) / (grid_[idx + 1] - grid_[idx]),
                                true};
                    };
                    std::vector<Look> zl(zk.size());
                    for (std::size_t k = 0; k < zk.size(); ++k)
                        zl[k] = make_look(mu * zk[k]);
                    for (std::size_t i = 0; i < n; ++i) {
                        const double x = grid_[i];
                        const Look xi = make_look(mu * x);
                        double acc = 0.0;
                        if (xi.in) {
                            const double* row0 = &rho_src[xi.idx * n];
                            const double* row1 = row0 + n;
                            const double fx = xi.frac;
                            for (std::size_t k = 0; k < zk.size(); ++k) {
                                double r;
                                if (zl[k].in) {
                                    const std::size_t c = zl[k].idx;
                                    const double fz = zl[k].frac;
                                    const double a =
                                        row0[c] + fz * (row0[c + 1] - row0[c]);
                                    const double b =
                                        row1[c] + fz * (row1[c + 1] - row1[c]);
                                    r = a + fx * (b - a);
                                } else {
                                    r = field_interp(rho_src, closure_limit,
                                                     mu * x, mu * zk[k]);
                                }
                                acc += qk[k] * wide.density(std::abs(x - zk[k])) * r;
                            }
                        } else {
                            for (std::size_t k = 0; k < zk.size(); ++k)
                                acc += qk[k] * wide.density(std::abs(x - zk[k])) *
                                       field_interp(rho_src, closure_limit,
                                                    mu * x, mu * zk[k]);
                        }
                        corr[i * n + j] += sn.weight * acc;
                    }
                } else {
                    const std::size_t i = outer;
                    for (std::size_t j = 0; j < n; ++j) {
                        const double y = grid_[j];
                        double acc = 0.0;
                        for (std::size_t k = 0; k < zk.size(); ++k) {
                            const double r = zk[k] - y;
                            const double g = (r > 0.0 ? 1.0 : -1.0) *
                                             wide.ddr(std::abs(r));
                            acc += qk[k] * g;
                        }
                        corr[i * n + j] += sn.weight * acc;
                    }
                }
            }
        }, 1);
    }

    double ratio_interp(double X, double Y) const {
        return field_interp(rho_, 1.0, X, Y);
    }

    /// Bilinear interpolation of a ratio-form field on the grid. Beyond the
    /// grid the argument is clamped radially (preserving |y|/|x| and
    /// |y|/|x-y|) and the excess, where the second coordinate has left the
    /// weight cusp, relaxes toward `limit` at the drift's own decay rate:
    /// the Hardy field strength at radius r falls off like r^{1-a}. Kernel
    /// fields relax to 1, correction fields to 0.
    double field_interp(const std::vector<double>& rho_src, double limit,
                        double X, double Y) const {
        const double m = std::max(std::abs(X), std::abs(Y));
        if (m > clamp_) {
            const double lam = clamp_ / m;
            const double sat = std::min(1.0, std::abs(Y) * lam / w_);
            const double atten =
                std::pow(lam, (point_.alpha - 1.0) * sat);
            const double rc = field_interp(rho_src, limit, X * lam, Y * lam);
            return limit + (rc - limit) * atten;
        }
        const std::size_t n = grid_.size();
        const auto locate = [&](double v, std::size_t& idx, double& frac) {
            auto it = std::upper_bound(grid_.begin(), grid_.end(), v);
            if (it == grid_.begin()) { idx = 0; frac = 0.0; return; }
            if (it == grid_.end()) { idx = n - 2; frac = 1.0; return; }
            idx = static_cast<std::size_t>(it - grid_.begin()) - 1;
            frac = (v - grid_[idx]) / (grid_[idx + 1] - grid_[idx]);
        };
        std::size_t ix, iy;
        double fx, fy;
        locate(X, ix, fx);
        locate(Y, iy, fy);
        const double* r0 = &rho_src[ix * n + iy];
        const double* r1 = r0 + n;
        const double a = r0[0] + fy * (r0[1] - r0[0]);
        const double b = r1[0] + fy * (r1[1] - r1[0]);
        return a + fx * (b - a);
    }

    ParameterPoint point_;
    PicardConfig cfg_;
    double t_ = 1.0;
    double w_ = 1.0;
    FreeKernel free_;
    std::vector<double> grid_;
    std::vector<double> base_; // free kernel on the grid
    std::vector<double> vals_; // current iterate p_T(x_i, y_j)
    std::vector<double> rho_;  // vals / base
    std::vector<double> corrections_;
    std::vector<char> metric_mask_;
    std::vector<double> s_marks_;
    std::vector<double> ubreaks_;
    std::unique_ptr<PerturbedKernel> seed_; // coarse companion (nested grid)
    std::vector<std::size_t> coarse_map_;   // seed node -> own grid index
    double clamp_ = 0.0;
    int iterations_ = 0;
    int seed_iterations_ = 0;
    bool converged_ = false;
    bool diverged_ = false;
    double min_value_ = 0.0;
};

/// The Picard-iterated kernel on a set of target times, one independent
/// anchored solve per time (so the homogeneity check below measures real
/// quadrature differences, not a shared representation).
struct PerturbedKernelField {
    ParameterPoint point;
    std::vector<double> t_grid;
    std::vector<PerturbedKernel> slices;
    int iterations_used = 0;
    double last_correction = 0.0;

    const PerturbedKernel& slice_at(double t) const {
        if (slices.empty()) throw std::runtime_error("field: no slices");
        std::size_t best = 0;
        double gap = 1e300;
        for (std::size_t i = 0; i < slices.size(); ++i) {
            const double g = std::abs(std::log(t / slices[i].anchor()));
            if (g < gap) { gap = g; best = i; }
        }
        return slices[best];
    }

    void save(const std::string& path) const;
    // (loading re-runs the solve from the stored header; see field_io below)
};

inline PerturbedKernelField picard_solve(const ParameterPoint& pt,
                                         const PicardConfig& cfg,
                                         std::vector<double> t_grid = {1.0}) {
    if (t_grid.empty()) throw std::domain_error("picard_solve: empty time grid");
    std::sort(t_grid.begin(), t_grid.end());
    if (!(t_grid.front() > 0.0))
        throw std::domain_error("picard_solve: times must be positive");
    PerturbedKernelField field;
    field.point = pt;
    field.t_grid = t_grid;
    field.slices.reserve(t_grid.size());
    for (double t : t_grid) {
        const PerturbedKernel* warm =
            field.slices.empty() ? nullptr : &field.slices.front();
        field.slices.emplace_back(pt, cfg, t, warm);
        const auto& s = field.slices.back();
        if (s.diverged()) {
            std::ostringstream os;
            os << "picard_solve: corrections grow at t = " << t << ":";
            for (double c : s.corrections()) os << ' ' << c;
            throw std::runtime_error(os.str());
        }
        field.iterations_used =
            std::max(field.iterations_used, s.iterations_used());
        field.last_correction =
            std::max(field.last_correction, s.last_correction());
    }
    return field;
}

// ---------------------------------------------------------------------------
// Q_t and the kernel-difference checks

/// Q_t(x,y) = t L_0 e^{-tL_0}(x,y) - t L_k e^{-tL_k}(x,y). The free part
/// uses the exact scaling identity; the perturbed part centered log-t
/// differences with relative step h.
inline double q_kernel(const PerturbedKernel& k, double t, double x, double y,
                       double h = 1e-3, double* noise = nullptr) {
    FreeKernel fr(k.point().d, k.point().alpha);
    const double free_dt = fr.dt(t, std::abs(x - y));
    const double up = k.eval(t * std::exp(h), x, y);
    const double mid = k.eval(t, x, y);
    const double dn = k.eval(t * std::exp(-h), x, y);
    const double pert_dt = (up - dn) / (2.0 * t * h);
    const double fwd = (up - mid) / (t * h), bwd = (mid - dn) / (t * h);
    const double mismatch = std::abs(fwd - bwd);
    if (noise) *noise = mismatch * t;
    if (mismatch > 0.1 * (std::abs(fwd) + std::abs(bwd)) + 1e-5 * mid / t)
        throw std::runtime_error("q_kernel: one-sided time differences disagree");
    return t * (pert_dt - free_dt);
}

/// Pointwise comparability of the solved kernel with
/// p~_t(x,y) (1 ^ |y|/t^{1/a})^{b-d} over the solve grid.
struct ComparabilitySample {
    double x_max_factor = 10.0; // |x| <= factor * t^{1/a}
    double y_min_factor = 0.1;  // |y| >= factor * t^{1/a} (weight blows below)
    double y_max_factor = 10.0;
};

inline ComparabilityReport verify_heatkernel_comparability(
    const PerturbedKernelField& field, ComparabilitySample sample = {}) {
    if (!(field.point.alpha < 2.0))
        throw std::domain_error("verify_heatkernel_comparability: alpha < 2 only");
    ComparabilityReport rep;
    for (const auto& k : field.slices) {
        const double t = k.anchor();
        const double w = std::pow(t, 1.0 / field.point.alpha);
        for (double x : k.grid()) {
            if (std::abs(x) > sample.x_max_factor * w) continue;
            for (double y : k.grid()) {
                const double ay = std::abs(y);
                if (ay < sample.y_min_factor * w || ay > sample.y_max_factor * w)
                    continue;
                const double comp =
                    std::pow(std::min(1.0, ay / w), field.point.beta - field.point.d);
                rep.add(k.ratio(t, x, y) / comp, point1d(t, x, y));
            }
        }
    }
    return rep;
}

/// |Q_1| against C (L^{g,1} + M^{g,1}) on a sample set; returns the ratio
/// report (ratio_max is the recorded constant C).
inline ComparabilityReport qt_bound_report(const PerturbedKernel& k, double gamma,
                                           const std::vector<double>& xs,
                                           const std::vector<double>& ys) {
    const auto& pt = k.point();
    const ComparatorParams c =
        ComparatorParams::make(pt.d, pt.alpha, pt.beta, gamma, 1.0);
    ComparabilityReport rep;
    const double t = k.anchor();
    for (double x : xs) {
        for (double y : ys) {
            const double comp = eval_L(c, args1d(t, x, y)) + eval_M(c, args1d(t, x, y));
            if (!(comp > 0.0) || !std::isfinite(comp)) continue;
            const double q = std::abs(q_kernel(k, t, x, y));
            rep.add(q / comp, point1d(t, x, y));
        }
    }
    return rep;
}

/// |dt p_t| against the time-derivative comparator
/// t^{-1-d/a} ((t^{1/a}+|x-y|)/t^{1/a})^{-d-a+eps} (1 + t^{1/a}/|y|)^{d-b}.
inline ComparabilityReport dt_bound_check(const PerturbedKernel& k,
                                          double eps = 0.1) {
    const auto& pt = k.point();
    ComparabilityReport rep;
    const double t = k.anchor();
    const double w = std::pow(t, 1.0 / pt.alpha);
    const double h = 1e-3;
    for (double x : k.grid()) {
        if (std::abs(x) > 10.0 * w) continue;
        for (double y : k.grid()) {
            if (std::abs(y) < 0.05 * w || std::abs(y) > 10.0 * w) continue;
            const double dt_p = (k.eval(t * std::exp(h), x, y) -
                                 k.eval(t * std::exp(-h), x, y)) /
                                (2.0 * t * h);
            const double comp = std::pow(t, -1.0 - pt.d / pt.alpha) *
                                std::pow((w + std::abs(x - y)) / w,
                                         -(pt.d + pt.alpha) + eps) *
                                std::pow(1.0 + w / std::abs(y), pt.d - pt.beta);
            rep.add(std::abs(dt_p) / comp, point1d(t, x, y));
        }
    }
    return rep;
}

/// Exploratory probe of the conjectured gradient bound: finite differences
/// of p in x against t^{-(d+1)/a} (t^{1/a}/(t^{1/a}+|x-y|))^{d+g}
/// (1 ^ |y|/t^{1/a})^{b-d}. No pass/fail; records the spread per gamma.
struct GradientProbe {
    double gamma = 0.0;
    double ratio_min = 0.0;
    double ratio_max = 0.0;
    double spread = 0.0;
};

inline std::vector<GradientProbe> probe_gradient_bound(
    const PerturbedKernel& k, const std::vector<double>& gammas) {
    const auto& pt = k.point();
    const double t = k.anchor();
    const double w = std::pow(t, 1.0 / pt.alpha);
    std::vector<GradientProbe> out;
    for (double g : gammas) {
        ComparabilityReport rep;
        const auto& xs = k.grid();
        for (std::size_t i = 1; i + 1 < xs.size(); ++i) {
            const double x = xs[i];
            if (std::abs(x) > 8.0 * w) continue;
            for (double y : xs) {
                const double ay = std::abs(y);
                if (ay < 0.1 * w || ay > 8.0 * w) continue;
                const double grad = (k.eval(t, xs[i + 1], y) - k.eval(t, xs[i - 1], y)) /
                                    (xs[i + 1] - xs[i - 1]);
                const double comp =
                    std::pow(t, -(pt.d + 1.0) / pt.alpha) *
                    std::pow(w / (w + std::abs(x - y)), pt.d + g) *
                    std::pow(std::min(1.0, ay / w), pt.beta - pt.d);
                if (std::abs(grad) < 1e-12) continue; // symmetry nodes
                rep.add(std::abs(grad) / comp, point1d(t, x, y));
            }
        }
        out.push_back({g, rep.ratio_min, rep.ratio_max, rep.spread()});
    }
    return out;
}

// ---------------------------------------------------------------------------
// field serialization (versioned binary: header + grids + values + metadata)

namespace detail {
inline void put_u32(std::ostream& f, std::uint32_t v) {
    f.write(reinterpret_cast<const char*>(&v), sizeof v);
}
inline void put_u64(std::ostream& f, std::uint64_t v) {
    f.write(reinterpret_cast<const char*>(&v), sizeof v);
}
inline void put_f64(std::ostream& f, double v) {
    f.write(reinterpret_cast<const char*>(&v), sizeof v);
}
inline std::uint32_t take_u32(std::istream& f) {
    std::uint32_t v = 0;
    f.read(reinterpret_cast<char*>(&v), sizeof v);
    return v;
}
inline std::uint64_t take_u64(std::istream& f) {
    std::uint64_t v = 0;
    f.read(reinterpret_cast<char*>(&v), sizeof v);
    return v;
}
inline double take_f64(std::istream& f) {
    double v = 0;
    f.read(reinterpret_cast<char*>(&v), sizeof v);
    return v;
}
inline std::uint64_t fnv1a(std::uint64_t h, const void* data, std::size_t len) {
    const auto* b = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < len; ++i) {
        h ^= b[i];
        h *= 1099511628211ull;
    }
    return h;
}
} // namespace detail

struct FieldFileData {
    int d = 0;
    double alpha = 0.0, beta = 0.0, kappa = 0.0;
    int iterations_used = 0;
    double last_correction = 0.0;
    struct Slice {
        double t = 0.0;
        std::vector<double> grid;
        std::vector<double> values;
    };
    std::vector<Slice> slices;
};

inline void save_field(const PerturbedKernelField& field, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("save_field: cannot open " + path);
    using namespace detail;
    std::uint64_t h = 1469598103934665603ull;
    put_u32(f, 0x484c4644u); // "HLFD"
    put_u32(f, 1u);
    put_u32(f, static_cast<std::uint32_t>(field.point.d));
    put_f64(f, field.point.alpha);
    put_f64(f, field.point.beta);
    put_f64(f, field.point.kappa);
    put_u32(f, static_cast<std::uint32_t>(field.iterations_used));
    put_f64(f, field.last_correction);
    put_u32(f, static_cast<std::uint32_t>(field.slices.size()));
    for (const auto& s : field.slices) {
        put_f64(f, s.anchor());
        put_u64(f, s.grid().size());
        f.write(reinterpret_cast<const char*>(s.grid().data()),
                static_cast<std::streamsize>(s.grid().size() * sizeof(double)));
        f.write(reinterpret_cast<const char*>(s.values().data()),
                static_cast<std::streamsize>(s.values().size() * sizeof(double)));
        h = fnv1a(h, s.grid().data(), s.grid().size() * sizeof(double));
        h = fnv1a(h, s.values().data(), s.values().size() * sizeof(double));
    }
    put_u64(f, h);
}

inline void PerturbedKernelField::save(const std::string& path) const {
    save_field(*this, path);
}

inline FieldFileData load_field_data(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("load_field_data: cannot open " + path);
    using namespace detail;
    if (take_u32(f) != 0x484c4644u) throw std::runtime_error("field file: bad magic");
    if (take_u32(f) != 1u) throw std::runtime_error("field file: bad version");
    FieldFileData out;
    out.d = static_cast<int>(take_u32(f));
    out.alpha = take_f64(f);
    out.beta = take_f64(f);
    out.kappa = take_f64(f);
    out.iterations_used = static_cast<int>(take_u32(f));
    out.last_correction = take_f64(f);
    const std::uint32_t ns = take_u32(f);
    std::uint64_t h = 1469598103934665603ull;
    for (std::uint32_t i = 0; i < ns; ++i) {
        FieldFileData::Slice s;
        s.t = take_f64(f);
        const auto n = static_cast<std::size_t>(take_u64(f));
        s.grid.resize(n);
        s.values.resize(n * n);
        f.read(reinterpret_cast<char*>(s.grid.data()),
               static_cast<std::streamsize>(n * sizeof(double)));
        f.read(reinterpret_cast<char*>(s.values.data()),
               static_cast<std::streamsize>(n * n * sizeof(double)));
        h = fnv1a(h, s.grid.data(), s.grid.size() * sizeof(double));
        h = fnv1a(h, s.values.data(), s.values.size() * sizeof(double));
        out.slices.push_back(std::move(s));
    }
    const std::uint64_t want = take_u64(f);
    if (!f) throw std::runtime_error("field file: truncated");
    if (want != h) throw std::runtime_error("field file: checksum mismatch");
    return out;
}

} // namespace hardylab
