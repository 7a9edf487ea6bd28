#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>

#include "hardylab/config.hpp"
#include "hardylab/special_functions.hpp"

namespace hardylab {

/// Sharp Hardy--Kato--Herbst constant 2^a Gamma((d+a)/4)^2 / Gamma((d-a)/4)^2.
inline double kappa_star(int d, double alpha) {
    if (d < 1) throw std::domain_error("kappa_star: d must be a positive integer");
    if (!(alpha > 0.0 && alpha <= 2.0 && alpha < d))
        throw std::domain_error("kappa_star: requires 0 < alpha < d and alpha <= 2");
    const double q = gamma_fn((d + alpha) / 4.0) / gamma_fn((d - alpha) / 4.0);
    return std::pow(2.0, alpha) * q * q;
}

/// Coupling parameterization Psi(beta).
///
/// For alpha < 2 the four-Gamma expression is evaluated in the rearranged
/// form  2^{alpha-1} G(b/2) G((d+a-b)/2) rgamma((d-b)/2) / G((b-a)/2 + 1),
/// which is regular through beta = alpha and returns exactly 0 at beta = d
/// (the rgamma factor vanishes there).
inline double psi_coupling(int d, double alpha, double beta) {
    if (d < 1) throw std::domain_error("psi_coupling: d must be a positive integer");
    if (!(alpha > 1.0 && alpha <= 2.0))
        throw std::domain_error("psi_coupling: alpha must lie in (1,2]");
    if (alpha == 2.0) return d - beta;
    if (!(beta > 0.0 && beta < d + alpha))
        throw std::domain_error("psi_coupling: beta outside (0, d+alpha)");
    return std::pow(2.0, alpha - 1.0) * gamma_fn(beta / 2.0) *
           gamma_fn((d + alpha - beta) / 2.0) * rgamma((d - beta) / 2.0) /
           gamma_fn((beta - alpha) / 2.0 + 1.0);
}

/// Critical coupling kappa_c = Psi((d+alpha)/2); closed Gamma form for
/// alpha < 2, (d-2)/2 for alpha = 2.
inline double kappa_crit(int d, double alpha) {
    if (d < 1) throw std::domain_error("kappa_crit: d must be a positive integer");
    if (!(alpha > 1.0 && alpha <= 2.0 && alpha < 0.5 * (d + 2)))
        throw std::domain_error("kappa_crit: requires alpha in (1,2], alpha < (d+2)/2");
    if (alpha == 2.0) return 0.5 * (d - 2);
    const double q = gamma_fn((d + alpha) / 4.0) / gamma_fn((d - alpha) / 4.0);
    return std::pow(2.0, alpha + 1.0) / (d - alpha) * q * q;
}

/// Closed-form derivative of Psi via digamma, arranged so that the
/// Gamma pole at beta = d cancels analytically (psi_times_rgamma).
inline double dpsi_dbeta(int d, double alpha, double beta) {
    if (!(alpha > 1.0 && alpha <= 2.0))
        throw std::domain_error("dpsi_dbeta: alpha must lie in (1,2]");
    if (alpha == 2.0) return -1.0;
    if (!(beta > 0.0 && beta < d + alpha))
        throw std::domain_error("dpsi_dbeta: beta outside (0, d+alpha)");
    const double e = (d + alpha - beta) / 2.0;
    const double b1 = (beta - alpha) / 2.0 + 1.0;
    const double w = (d - beta) / 2.0;
    const double a = std::pow(2.0, alpha - 1.0) * gamma_fn(beta / 2.0) *
                     gamma_fn(e) / gamma_fn(b1);
    const double logderiv = 0.5 * (digamma(beta / 2.0) - digamma(e) - digamma(b1));
    return a * (logderiv * rgamma(w) + 0.5 * psi_times_rgamma(w));
}

/// Inverts kappa = Psi(beta) on the monotone branch beta in ((d+alpha)/2, d+M)
/// by bisection. Requires kappa < kappa_crit(d, alpha).
inline double beta_from_kappa(int d, double alpha, double kappa,
                              double rel_tol = tol().inversion_residual) {
    const double kc = kappa_crit(d, alpha);
    if (!(kappa < kc))
        throw std::domain_error("beta_from_kappa: no root, kappa >= kappa_crit");
    if (alpha == 2.0) return d - kappa;

    const double target_tol = rel_tol * (1.0 + std::abs(kappa));
    double lo = 0.5 * (d + alpha);           // Psi(lo) = kappa_c > kappa
    double hi = d + alpha;                   // Psi -> -inf at the right edge
    double gap = 1e-9 * (d + alpha);
    while (psi_coupling(d, alpha, hi - gap) >= kappa) {
        gap *= 0.25;
        if (gap < 1e-300)
            throw std::runtime_error("beta_from_kappa: bracket not found");
    }
    hi -= gap;
    double mid = 0.5 * (lo + hi), val = 0.0;
    for (int it = 0; it < 300; ++it) {
        mid = 0.5 * (lo + hi);
        val = psi_coupling(d, alpha, mid);
        if (std::abs(val - kappa) <= target_tol) return mid;
        if (val > kappa) lo = mid; else hi = mid;  // Psi decreasing
        if (hi - lo <= 4.0 * std::numeric_limits<double>::epsilon() * mid) break;
    }
    if (std::abs(val - kappa) > target_tol)
        throw std::runtime_error("beta_from_kappa: tolerance unreachable");
    return mid;
}

/// Validated parameter tuple (d, alpha, beta, kappa) with derived exponents.
struct ParameterPoint {
    int d = 1;
    double alpha = 2.0;
    double beta = 0.0;
    double kappa = 0.0;
    double M = 0.0;            // alpha if alpha < 2, +inf if alpha = 2
    double d_beta = 0.0;       // d / ((d - beta) v 0), 1/0 = inf
    double d_beta_prime = 1.0; // 1 v d/beta

    static ParameterPoint make(int d, double alpha, double beta) {
        if (d < 1) throw std::domain_error("ParameterPoint: d must be positive");
        if (!(alpha > 1.0 && alpha <= 2.0))
            throw std::domain_error("ParameterPoint: alpha must lie in (1,2]");
        if (!(alpha < 0.5 * (d + 2)))
            throw std::domain_error("ParameterPoint: requires alpha < (d+2)/2");
        const double M = alpha < 2.0 ? alpha
                                     : std::numeric_limits<double>::infinity();
        if (!(beta > 0.5 * (d + alpha) && beta < d + M))
            throw std::domain_error(
                "ParameterPoint: beta outside ((d+alpha)/2, d+M)");
        ParameterPoint p;
        p.d = d;
        p.alpha = alpha;
        p.beta = beta;
        p.kappa = psi_coupling(d, alpha, beta);
        p.M = M;
        p.d_beta = beta >= d ? std::numeric_limits<double>::infinity()
                             : d / (d - beta);
        p.d_beta_prime = std::max(1.0, d / beta);
        return p;
    }

    static ParameterPoint from_kappa(int d, double alpha, double kappa) {
        return make(d, alpha, beta_from_kappa(d, alpha, kappa));
    }

    /// Degenerate reference point kappa = 0, beta = d (the free semigroup).
    /// For d <= alpha the admissible beta-window excludes beta = d, but the
    /// drift vanishes identically here, so the window constraint is moot;
    /// degeneracy checks rely on this configuration.
    static ParameterPoint free_point(int d, double alpha) {
        if (d < 1) throw std::domain_error("ParameterPoint: d must be positive");
        if (!(alpha > 1.0 && alpha <= 2.0 && alpha < 0.5 * (d + 2)))
            throw std::domain_error("ParameterPoint: alpha out of range");
        ParameterPoint p;
        p.d = d;
        p.alpha = alpha;
        p.beta = d;
        p.kappa = 0.0;
        p.M = alpha < 2.0 ? alpha : std::numeric_limits<double>::infinity();
        p.d_beta = std::numeric_limits<double>::infinity();
        p.d_beta_prime = 1.0;
        return p;
    }
};

/// Admissible integrability exponents for the norm-equivalence theorems:
/// open window ((d_beta)', d/(alpha s) ^ d_beta).
struct ExponentWindow {
    double lower = 0.0;        // exclusive
    double upper = 0.0;        // exclusive, may be +inf
    bool nonempty = false;
    bool part1_applies = false; // alpha s < alpha - 1

    bool contains(double p) const { return nonempty && p > lower && p < upper; }
};

inline ExponentWindow admissible_p_window(const ParameterPoint& pt, double s) {
    if (!(s > 0.0 && s <= 1.0))
        throw std::domain_error("admissible_p_window: s must lie in (0,1]");
    ExponentWindow w;
    w.lower = pt.d_beta_prime;
    w.upper = std::min(pt.d / (pt.alpha * s), pt.d_beta);
    w.nonempty = w.lower < w.upper;
    w.part1_applies = pt.alpha * s < pt.alpha - 1.0;
    return w;
}

} // namespace hardylab
