#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "hardylab/quadrature.hpp"
#include "hardylab/special_functions.hpp"
#include "hardylab/stable_profile.hpp"

namespace hardylab {

/// Scalar kernel evaluation together with an evaluation-error estimate.
struct KernelValue {
    double value = 0.0;
    double abs_error = 0.0;
};

struct SpaceTimePoint {
    double t = 1.0;
    std::vector<double> x;
    std::vector<double> y;

    double separation() const {
        double s = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) s += (x[i] - y[i]) * (x[i] - y[i]);
        return std::sqrt(s);
    }
};

inline SpaceTimePoint point1d(double t, double x, double y) {
    return SpaceTimePoint{t, {x}, {y}};
}

/// Reference comparator t^{-d/a} (t^{1/a} / (t^{1/a} + r))^{d+a}.
inline double free_comparator(double t, double r, int d, double alpha) {
    const double w = std::pow(t, 1.0 / alpha);
    return std::pow(t, -d / alpha) * std::pow(w / (w + r), d + alpha);
}

/// The free semigroup exp(-t (-Laplace)^{a/2}): radial density, spatial and
/// temporal derivatives. Gaussian and Cauchy branches are closed-form; other
/// alpha go through the cached unit-time profile with exact self-similar
/// scaling, so only t = 1 is ever integrated.
class FreeKernel {
public:
    FreeKernel(int d, double alpha) : d_(d), alpha_(alpha) {
        if (d < 1) throw std::domain_error("FreeKernel: d must be positive");
        if (!(alpha > 0.0 && alpha <= 2.0))
            throw std::domain_error("FreeKernel: alpha must lie in (0,2]");
        if (alpha_ == 2.0 || alpha_ == 1.0) return;
        if (d != 1 && d != 3)
            throw std::domain_error(
                "FreeKernel: general alpha supported for d in {1,3} only");
        prof_ = &StableProfile::get(d, alpha);
        prof2_ = &StableProfile::get(d + 2, alpha);
        prof4_ = &StableProfile::get(d + 4, alpha);
    }

    int d() const { return d_; }
    double alpha() const { return alpha_; }

    /// Relative evaluation-error bound for density values.
    double rel_error() const {
        if (alpha_ == 2.0 || alpha_ == 1.0) return 1e-15;
        return prof_->rel_error();
    }

    double density(double t, double r) const {
        check_time(t);
        if (alpha_ == 2.0) {
            return std::pow(4.0 * M_PI * t, -0.5 * d_) * std::exp(-r * r / (4.0 * t));
        }
        if (alpha_ == 1.0) {
            return cauchy_const() * t * std::pow(t * t + r * r, -0.5 * (d_ + 1));
        }
        const double w = std::pow(t, 1.0 / alpha_);
        return std::pow(t, -d_ / alpha_) * (*prof_)(r / w);
    }

    /// d/dr of the density.
    double ddr(double t, double r) const {
        check_time(t);
        if (alpha_ == 2.0) return -r / (2.0 * t) * density(t, r);
        if (alpha_ == 1.0) {
            return -cauchy_const() * t * (d_ + 1) * r *
                   std::pow(t * t + r * r, -0.5 * (d_ + 3));
        }
        const double w = std::pow(t, 1.0 / alpha_);
        const double rho = r / w;
        return -2.0 * M_PI * rho * std::pow(t, -(d_ + 1.0) / alpha_) * (*prof2_)(rho);
    }

    double d2dr2(double t, double r) const {
        check_time(t);
        if (alpha_ == 2.0)
            return (-1.0 / (2.0 * t) + r * r / (4.0 * t * t)) * density(t, r);
        if (alpha_ == 1.0) {
            const double q = t * t + r * r;
            return cauchy_const() * t * (d_ + 1) *
                   ((d_ + 3) * r * r * std::pow(q, -0.5 * (d_ + 5)) -
                    std::pow(q, -0.5 * (d_ + 3)));
        }
        const double w = std::pow(t, 1.0 / alpha_);
        const double rho = r / w;
        return std::pow(t, -(d_ + 2.0) / alpha_) *
               (-2.0 * M_PI * (*prof2_)(rho) +
                4.0 * M_PI * M_PI * rho * rho * (*prof4_)(rho));
    }

    /// Time derivative through the self-similarity identity
    /// dt p = -t^{-1} [ (d/a) p + (1/a) r dr p ].
    double dt(double t, double r) const {
        return -(d_ / alpha_ * density(t, r) + r / alpha_ * ddr(t, r)) / t;
    }

    /// d/dr of the time derivative.
    double ddr_dt(double t, double r) const {
        return -((d_ + 1.0) / alpha_ * ddr(t, r) + r / alpha_ * d2dr2(t, r)) / t;
    }

    /// Per-time cached evaluator for quadrature-heavy inner loops: the
    /// t-powers are hoisted and the profile goes through the lookup table.
    struct Scaled {
        const FreeKernel* k = nullptr;
        double t = 1.0, w = 1.0;
        double dens_scale = 1.0, grad_scale = 1.0;

        double density(double r) const {
            if (k->alpha_ == 2.0) return dens_scale * std::exp(-r * r / (4.0 * t));
            if (k->alpha_ == 1.0) return k->density(t, r);
            return dens_scale * k->prof_->fast_value(r / w);
        }
        double ddr(double r) const {
            if (k->alpha_ == 2.0) return -r / (2.0 * t) * density(r);
            if (k->alpha_ == 1.0) return k->ddr(t, r);
            const double rho = r / w;
            return -2.0 * M_PI * rho * grad_scale * k->prof2_->fast_value(rho);
        }
    };

    Scaled scaled(double t) const {
        check_time(t);
        Scaled s;
        s.k = this;
        s.t = t;
        s.w = std::pow(t, 1.0 / alpha_);
        s.dens_scale = alpha_ == 2.0 ? std::pow(4.0 * M_PI * t, -0.5 * d_)
                                     : std::pow(t, -d_ / alpha_);
        s.grad_scale = std::pow(t, -(d_ + 1.0) / alpha_);
        return s;
    }

    /// Total mass (should be 1); quadrature plus algebraic tail closure.
    ValueWithError mass(double t) const {
        check_time(t);
        // scale invariant, evaluate at unit time
        if (alpha_ == 2.0 || alpha_ == 1.0) {
            auto f = [&](double r) {
                return surface() * std::pow(r, d_ - 1) * density(1.0, r);
            };
            auto near = integrate(f, 0.0, 100.0, 1e-13);
            auto far = integrate(f, 100.0, 1e7, 1e-13); // r^{-1-a} tail: ~1e-7 cut
            return {near.value + far.value, near.abs_error + far.abs_error + 1e-7};
        }
        const double R = prof_->grid_extent();
        auto f = [&](double r) {
            return surface() * std::pow(r, d_ - 1) * (*prof_)(r);
        };
        auto core = integrate(f, 0.0, R, 1e-13);
        // integral of surface * r^{d-1} * tail(r) beyond R, term by term
        double tail = 0.0;
        double x = std::pow(R, -alpha_);
        for (int m = 1; m <= 6; ++m) {
            tail += surface() * tail_coeff(m - 1) * std::pow(x, m) / (alpha_ * m);
        }
        return {core.value + tail, core.abs_error + std::abs(tail) * 1e-6 +
                                       core.value * prof_->rel_error()};
    }

private:
    void check_time(double t) const {
        if (!(t > 0.0)) throw std::domain_error("FreeKernel: t must be positive");
    }
    double cauchy_const() const {
        return gamma_fn(0.5 * (d_ + 1)) * std::pow(M_PI, -0.5 * (d_ + 1));
    }
    double surface() const { // |S^{d-1}|
        return 2.0 * std::pow(M_PI, 0.5 * d_) / gamma_fn(0.5 * d_);
    }
    double tail_coeff(int m) const {
        // coefficient a_{m+1} of r^{-d-a(m+1)}
        const double am = alpha_ * (m + 1);
        double sign = (m % 2 == 0) ? 1.0 : -1.0;
        double factorial = 1.0;
        for (int k = 2; k <= m + 1; ++k) factorial *= k;
        return std::pow(M_PI, -0.5 * d_ - 1.0) * sign *
               std::exp(std::lgamma(0.5 * (d_ + am)) + std::lgamma(1.0 + 0.5 * am) +
                        am * std::log(2.0)) /
               factorial * sinpi(0.5 * am);
    }

    int d_;
    double alpha_;
    const StableProfile* prof_ = nullptr;
    const StableProfile* prof2_ = nullptr;
    const StableProfile* prof4_ = nullptr;
};

// ---------------------------------------------------------------------------
// point-based wrappers

inline KernelValue free_kernel(const SpaceTimePoint& p, int d, double alpha) {
    FreeKernel k(d, alpha);
    const double v = k.density(p.t, p.separation());
    return {v, std::abs(v) * k.rel_error()};
}

inline std::vector<double> free_kernel_gradient(const SpaceTimePoint& p, int d,
                                                double alpha) {
    if (!(alpha > 1.0 && alpha <= 2.0))
        throw std::domain_error("free_kernel_gradient: alpha must lie in (1,2]");
    FreeKernel k(d, alpha);
    const double r = p.separation();
    std::vector<double> g(p.x.size(), 0.0);
    if (r == 0.0) return g;
    const double slope = k.ddr(p.t, r);
    for (std::size_t i = 0; i < g.size(); ++i)
        g[i] = (p.x[i] - p.y[i]) / r * slope;
    return g;
}

inline KernelValue free_kernel_dt(const SpaceTimePoint& p, int d, double alpha) {
    if (!(alpha > 1.0 && alpha <= 2.0))
        throw std::domain_error("free_kernel_dt: alpha must lie in (1,2]");
    FreeKernel k(d, alpha);
    const double v = k.dt(p.t, p.separation());
    return {v, std::abs(v) * 4.0 * k.rel_error()};
}

inline std::vector<double> free_kernel_grad_dt(const SpaceTimePoint& p, int d,
                                               double alpha) {
    if (!(alpha > 1.0 && alpha <= 2.0))
        throw std::domain_error("free_kernel_grad_dt: alpha must lie in (1,2]");
    FreeKernel k(d, alpha);
    const double r = p.separation();
    std::vector<double> g(p.x.size(), 0.0);
    if (r == 0.0) return g;
    const double slope = k.ddr_dt(p.t, r);
    for (std::size_t i = 0; i < g.size(); ++i)
        g[i] = (p.x[i] - p.y[i]) / r * slope;
    return g;
}

/// grad Lambda_0^{-gamma} e^{-t Lambda_0}(x,y) = (1/Gamma(g)) int s^{g-1}
/// grad e^{-(s+t) Lambda_0}(x,y) ds, evaluated on a logarithmic grid with
/// analytic endpoint closures.
inline std::vector<double> riesz_smoothed_gradient(double gamma,
                                                   const SpaceTimePoint& p, int d,
                                                   double alpha) {
    if (!(alpha > 1.0 && alpha <= 2.0))
        throw std::domain_error("riesz_smoothed_gradient: alpha must lie in (1,2]");
    if (!(gamma >= 0.0 && gamma < (d + 1) / alpha))
        throw std::domain_error("riesz_smoothed_gradient: gamma outside [0,(d+1)/a)");
    if (gamma == 0.0) return free_kernel_gradient(p, d, alpha);

    FreeKernel k(d, alpha);
    const double r = p.separation();
    std::vector<double> g(p.x.size(), 0.0);
    if (r == 0.0) return g;

    const double scale = p.t + std::pow(r, alpha);
    const double s_lo = 1e-8 * scale, s_hi = 1e8 * scale;
    auto integrand = [&](double sigma) {
        const double s = std::exp(sigma);
        return std::pow(s, gamma) * k.ddr(s + p.t, r);
    };
    const auto core = integrate(integrand, std::log(s_lo), std::log(s_hi), 1e-10);
    const double low_closure = std::pow(s_lo, gamma) / gamma * k.ddr(p.t, r);
    const double decay = (d + 2.0) / alpha - gamma; // |ddr| ~ s^{-(d+2)/a}
    const double high_closure = std::pow(s_hi, gamma) * k.ddr(s_hi, r) / decay;
    const double total = (core.value + low_closure + high_closure) / gamma_fn(gamma);
    const double tail_est = std::abs(high_closure) / gamma_fn(gamma);
    if (tail_est > std::max(1e-10, 1e-6 * std::abs(total)))
        throw std::runtime_error("riesz_smoothed_gradient: slow time-integral decay");
    for (std::size_t i = 0; i < g.size(); ++i)
        g[i] = (p.x[i] - p.y[i]) / r * total;
    return g;
}

/// | int p~_s(x,z) p~_t(z,y) dz - p~_{s+t}(x,y) |, the semigroup sanity
/// residual. d = 1 integrates along the line, d = 3 uses bipolar coordinates.
inline double chapman_kolmogorov_residual(double s, double t, double x, double y,
                                          int d, double alpha) {
    if (!(s > 0.0 && t > 0.0))
        throw std::domain_error("chapman_kolmogorov_residual: s,t must be positive");
    FreeKernel k(d, alpha);
    if (d == 1) {
        const double ws = std::pow(s, 1.0 / alpha), wt = std::pow(t, 1.0 / alpha);
        const double span = std::max({ws, wt, std::abs(x - y)});
        const double Z = 3000.0 * span;
        std::vector<double> breaks;
        append_ladder(breaks, x, 0.25 * ws, Z, std::min(x, y) - Z, std::max(x, y) + Z);
        append_ladder(breaks, y, 0.25 * wt, Z, std::min(x, y) - Z, std::max(x, y) + Z);
        auto bk = finalize_breaks(std::move(breaks), std::min(x, y) - Z,
                                  std::max(x, y) + Z);
        auto f = [&](double z) {
            return k.density(s, std::abs(x - z)) * k.density(t, std::abs(z - y));
        };
        ValueWithError conv;
        for (std::size_t i = 0; i + 1 < bk.size(); ++i) {
            auto piece = integrate(f, bk[i], bk[i + 1], 1e-12, 12);
            conv.value += piece.value;
            conv.abs_error += piece.abs_error;
        }
        return std::abs(conv.value - k.density(s + t, std::abs(x - y)));
    }
    if (d == 3) {
        const double rho = std::abs(x - y); // x,y taken along an axis
        auto inner = [&](double a) {
            auto fb = [&](double b) { return b * k.density(t, b); };
            return integrate(fb, std::abs(a - rho), a + rho, 1e-10).value;
        };
        auto fa = [&](double a) { return a * k.density(s, a) * inner(a); };
        const double Z = 60.0 * std::max({std::pow(s, 1.0 / alpha),
                                          std::pow(t, 1.0 / alpha), rho, 1.0});
        double conv;
        if (rho > 0.0) {
            conv = 2.0 * M_PI / rho * integrate(fa, 0.0, Z, 1e-9).value;
        } else {
            auto f0 = [&](double a) {
                return 4.0 * M_PI * a * a * k.density(s, a) * k.density(t, a);
            };
            conv = integrate(f0, 0.0, Z, 1e-9).value;
        }
        return std::abs(conv - k.density(s + t, rho));
    }
    throw std::domain_error("chapman_kolmogorov_residual: d must be 1 or 3");
}

} // namespace hardylab
