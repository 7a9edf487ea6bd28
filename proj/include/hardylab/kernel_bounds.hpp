#pragma once

#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

#include "hardylab/comparators.hpp"
#include "hardylab/quadrature.hpp"

namespace hardylab {

// ---------------------------------------------------------------------------
// composition of two algebraic kernels (one spatial dimension)

/// Left side of the two-kernel composition estimate:
/// int (t-s)^{-d} ((t-s)/((t-s)+|x-z|))^{d+N} s^{-d} (s/(s+|z-y|))^{d+N} dz.
inline ValueWithError composition_integral(double N, double s, double t, double x,
                                           double y) {
    if (!(N > 0.0)) throw std::domain_error("composition_integral: N must be > 0");
    if (!(0.0 < s && s < t)) throw std::domain_error("composition_integral: need 0<s<t");
    auto f = [&](double z) {
        return std::pow((t - s) / ((t - s) + std::abs(x - z)), 1.0 + N) / (t - s) *
               std::pow(s / (s + std::abs(z - y)), 1.0 + N) / s;
    };
    const double span = 100.0 * (std::abs(x - y) + t);
    const double lo = std::min(x, y) - span, hi = std::max(x, y) + span;
    std::vector<double> breaks;
    append_ladder(breaks, x, 0.25 * (t - s), span, lo, hi);
    append_ladder(breaks, y, 0.25 * s, span, lo, hi);
    const auto bk = finalize_breaks(std::move(breaks), lo, hi);
    ValueWithError out;
    for (std::size_t i = 0; i + 1 < bk.size(); ++i) {
        const auto piece = integrate(f, bk[i], bk[i + 1], 1e-10, 12);
        out.value += piece.value;
        out.abs_error += piece.abs_error;
    }
    // algebraic tails beyond the window decay like |z|^{-2-2N}
    out.abs_error += (f(lo) + f(hi)) * span / (1.0 + 2.0 * N);
    return out;
}

inline double composition_comparator(double N, double t, double x, double y) {
    return std::pow(t / (t + std::abs(x - y)), 1.0 + N) / t;
}

/// Ratio of the composition integral to its comparator at one configuration.
inline double check_composition_ratio(double N, double s, double t, double x,
                                      double y) {
    return composition_integral(N, s, t, x, y).value /
           composition_comparator(N, t, x, y);
}

/// Lower-bound mechanism of the composition proof: for |x-y| >= 2t the
/// integral restricted to the ball B(y, |x-y|/2) already dominates a
/// fixed multiple of the comparator. Returns that restricted ratio.
inline double composition_lower_bound_ball(double N, double s, double t, double x,
                                           double y) {
    if (!(std::abs(x - y) >= 2.0 * t))
        throw std::domain_error("composition_lower_bound_ball: needs |x-y| >= 2t");
    auto f = [&](double z) {
        return std::pow((t - s) / ((t - s) + std::abs(x - z)), 1.0 + N) / (t - s) *
               std::pow(s / (s + std::abs(z - y)), 1.0 + N) / s;
    };
    const double R = 0.5 * std::abs(x - y);
    std::vector<double> breaks;
    append_ladder(breaks, y, 0.25 * s, R, y - R, y + R);
    const auto bk = finalize_breaks(std::move(breaks), y - R, y + R);
    ValueWithError restricted;
    for (std::size_t i = 0; i + 1 < bk.size(); ++i) {
        const auto piece = integrate(f, bk[i], bk[i + 1], 1e-10, 12);
        restricted.value += piece.value;
    }
    return restricted.value / composition_comparator(N, t, x, y);
}

/// Sweep driver for the composition estimate; aggregates the two-sided
/// bracket over s/t and |x-y| samples.
inline ComparabilityReport composition_sweep(double N, double t,
                                             const std::vector<double>& s_fracs,
                                             const std::vector<double>& seps) {
    ComparabilityReport rep;
    for (double frac : s_fracs) {
        for (double r : seps) {
            const double ratio = check_composition_ratio(N, frac * t, t, r, 0.0);
            rep.add(ratio, point1d(t, r, 0.0));
        }
    }
    return rep;
}

// ---------------------------------------------------------------------------
// the three basic weighted estimates

struct Lem1TtReport {
    double a_ratio = 0.0;      // int_{B(0,t)} (t/|x|)^{d-eps} dx / t^d
    double b_min = 0.0;        // normalized tail integral across probes
    double b_max = 0.0;
    double c_constant = 0.0;   // max over probes of LHS / Mf
};

/// Direct Hardy--Littlewood maximal function of the indicator of [0,1] at x,
/// maximized over a grid of candidate intervals.
inline double maximal_indicator01(double x) {
    double best = 0.0;
    const double lo = std::min(0.0, x) - 5.0, hi = std::max(1.0, x) + 5.0;
    const int G = 240;
    for (int i = 0; i <= G; ++i) {
        const double a = lo + (x - lo) * i / G;
        for (int j = 0; j <= G; ++j) {
            const double b = x + (hi - x) * j / G;
            if (b - a < 1e-9) continue;
            const double cover = std::max(0.0, std::min(b, 1.0) - std::max(a, 0.0));
            best = std::max(best, cover / (b - a));
        }
    }
    return best;
}

inline Lem1TtReport lem1tt_checks(double eps, double t, int d, double alpha) {
    if (d != 1) throw std::domain_error("lem1tt_checks: implemented for d = 1");
    if (!(eps > 0.0 && eps < d)) throw std::domain_error("lem1tt_checks: eps in (0,d)");
    Lem1TtReport rep;

    // (a) singular-weight integral over B(0,t); integrable x^{eps-1} endpoint
    {
        auto f = [&](double x) { return std::pow(t / x, 1.0 - eps); };
        std::vector<double> breaks{0.0};
        for (double z = t * 1e-14; z < t; z *= 3.0) breaks.push_back(z);
        const auto bk = finalize_breaks(std::move(breaks), 0.0, t);
        double v = 0.0;
        for (std::size_t i = 1; i + 1 < bk.size(); ++i)
            v += integrate(f, bk[i], bk[i + 1], 1e-12).value;
        // [0, first]: int x^{eps-1} closed form
        v += std::pow(t, 1.0 - eps) * std::pow(bk[1], eps) / eps;
        rep.a_ratio = 2.0 * v / t; // both signs of x, over t^d
    }

    // (b) normalized algebraic-tail integral: independent of x and t
    {
        auto value_at = [&](double tt, double x) {
            const double w = std::pow(tt, 1.0 / alpha);
            auto f = [&](double y) {
                return std::pow(w / (w + std::abs(x - y)), 1.0 + eps) / w;
            };
            const double U = 1e6 * w;
            std::vector<double> breaks;
            append_ladder(breaks, x, 0.25 * w, U, x - U, x + U);
            const auto bk = finalize_breaks(std::move(breaks), x - U, x + U);
            double v = 0.0;
            for (std::size_t i = 0; i + 1 < bk.size(); ++i)
                v += integrate(f, bk[i], bk[i + 1], 1e-11).value;
            // tails: 2 int_U^inf (w/(w+u))^{1+eps} du / w = 2 (w/(w+U))^{eps} ... /eps
            v += 2.0 * std::pow(w / (w + U), eps) / eps;
            return v;
        };
        rep.b_min = 1e300;
        rep.b_max = 0.0;
        for (double tt : {0.1, 1.0, 10.0}) {
            for (double x : {-3.0, 0.0, 7.5}) {
                const double v = value_at(tt, x);
                rep.b_min = std::min(rep.b_min, v);
                rep.b_max = std::max(rep.b_max, v);
            }
        }
    }

    // (c) maximal-function domination on f = indicator of [0,1]
    {
        auto lhs = [&](double tt, double x) {
            const double w = std::pow(tt, 1.0 / alpha);
            auto f = [&](double y) {
                return std::pow(w / (w + std::abs(x - y)), 1.0 + eps) / w;
            };
            return integrate(f, 0.0, 1.0, 1e-11).value;
        };
        for (double tt : {0.05, 0.7, 3.0}) {
            for (double x : {0.0, 0.4, 1.7, -2.5}) {
                rep.c_constant =
                    std::max(rep.c_constant, lhs(tt, x) / maximal_indicator01(x));
            }
        }
    }
    return rep;
}

// ---------------------------------------------------------------------------
// the Duhamel-type double integrals against T and H

struct DifferenceIntegralResult {
    double lhs = 0.0;
    double rhs = 0.0;
    double ratio = 0.0;
    double quad_error = 0.0;
};

namespace detail {

/// z-integral of T^g_{t-s}(x,z) |z|^{1-a} H^{g,de}_s(z,y) over one interval,
/// with ladders resolving the two kernel peaks, the origin singularity and
/// the weight kink of T.
inline ValueWithError th_inner_z(const ComparatorParams& c, double s, double t,
                                 double x, double y, double z_lo, double z_hi,
                                 int level = 1) {
    const double wt = std::pow(t - s, 1.0 / c.alpha);
    const double ws = std::pow(s, 1.0 / c.alpha);
    auto f = [&](double z) {
        return eval_T(c, args1d(t - s, x, z)) *
               std::pow(std::abs(z), 1.0 - c.alpha) *
               eval_H(c, args1d(s, z, y));
    };
    const double span = z_hi - z_lo;
    const double ratio = level > 1 ? std::sqrt(2.0) : 2.0;
    std::vector<double> breaks;
    append_ladder(breaks, x, 0.25 * wt / level, span, z_lo, z_hi, ratio);
    append_ladder(breaks, y, 0.25 * ws / level, span, z_lo, z_hi, ratio);
    append_ladder(breaks, 0.0, 1e-10 * std::max({std::abs(x), std::abs(y), 1.0}),
                  span, z_lo, z_hi, level > 1 ? 2.0 : 3.0);
    for (double kink : {wt, -wt}) {
        if (kink > z_lo && kink < z_hi) breaks.push_back(kink);
    }
    const auto bk = finalize_breaks(std::move(breaks), z_lo, z_hi);
    ValueWithError out;
    for (std::size_t i = 0; i + 1 < bk.size(); ++i) {
        // skip the innermost sliver at the origin: |z|^{1-a} is integrable and
        // the remainder there is O(width^{2-a})
        if (std::abs(bk[i]) < 1e-300 && std::abs(bk[i + 1]) < 1e-9) continue;
        if (std::abs(bk[i + 1]) < 1e-300 && std::abs(bk[i]) < 1e-9) continue;
        const auto piece = gauss_panel(f, bk[i], bk[i + 1]);
        out.value += piece.value;
        out.abs_error += piece.abs_error;
    }
    return out;
}

/// Time integral with nodes graded toward both endpoints, exponent a/(a-1).
template <class Inner>
ValueWithError th_time_integral(double t, double alpha, Inner&& inner,
                                int level = 1) {
    const double q = alpha / (alpha - 1.0);
    ValueWithError out;
    auto half = [&](bool left) {
        const auto marks =
            graded_breaks(0.0, 0.5 * t, static_cast<std::size_t>(12 * level), q);
        for (std::size_t i = 0; i + 1 < marks.size(); ++i) {
            double a = marks[i], b = marks[i + 1];
            if (a == 0.0) a = std::min(1e-9 * t, 0.1 * b);
            auto g = [&](double u) { return left ? inner(u) : inner(t - u); };
            const auto piece = gauss_panel(g, a, b);
            out.value += piece.value;
            out.abs_error += piece.abs_error;
        }
    };
    half(true);
    half(false);
    return out;
}

} // namespace detail

/// Double integral of T^g_{t-s}(x,z)|z|^{1-a}H^{g,de}_s(z,y) over all z and
/// s in (0,t), on the cancellation region |y| >= t^{1/a},
/// |x-y| <= (|x|^|y|)/2; compared against |y|^{1-de} M^{g,de}_t(x,y).
inline DifferenceIntegralResult difference_integral_42(const ComparatorParams& c,
                                                       double t, double x,
                                                       double y, int level = 1) {
    if (c.d != 1) throw std::domain_error("difference_integral_42: d = 1 only");
    const auto a = args1d(t, x, y);
    const double w = std::pow(t, 1.0 / c.alpha);
    if (!(a.ay >= w && a.axy <= 0.5 * std::min(a.ax, a.ay)))
        throw std::domain_error("difference_integral_42: point outside lemma region");
    const double Z = 10.0 * std::max({a.ax, a.ay, w});
    auto inner = [&](double s) {
        return detail::th_inner_z(c, s, t, x, y, -Z, Z, level).value;
    };
    const auto lhs = detail::th_time_integral(t, c.alpha, inner, level);
    DifferenceIntegralResult res;
    res.lhs = lhs.value;
    res.quad_error = lhs.abs_error;
    res.rhs = std::pow(a.ay, 1.0 - c.delta) * eval_M(c, a);
    res.ratio = res.lhs / res.rhs;
    return res;
}

/// Same integrand, z restricted to the annulus |x|/16 <= |z| <= 4|x|, on the
/// complementary region; compared against L^{g,de}_t(x,y).
inline DifferenceIntegralResult difference_integral_43(const ComparatorParams& c,
                                                       double t, double x, double y,
                                                       double band_lo = 0.0,
                                                       double band_hi = 0.0,
                                                       int level = 1) {
    if (c.d != 1) throw std::domain_error("difference_integral_43: d = 1 only");
    const auto a = args1d(t, x, y);
    const double w = std::pow(t, 1.0 / c.alpha);
    const bool in_region =
        a.ay <= w || (a.ay >= w && a.axy >= 0.5 * std::min(a.ax, a.ay));
    if (!in_region)
        throw std::domain_error("difference_integral_43: point outside lemma region");
    double lo = band_lo > 0.0 ? band_lo : std::abs(x) / 16.0;
    double hi = band_hi > 0.0 ? band_hi : 4.0 * std::abs(x);
    auto inner = [&](double s) {
        return detail::th_inner_z(c, s, t, x, y, lo, hi, level).value +
               detail::th_inner_z(c, s, t, x, y, -hi, -lo, level).value;
    };
    const auto lhs = detail::th_time_integral(t, c.alpha, inner, level);
    DifferenceIntegralResult res;
    res.lhs = lhs.value;
    res.quad_error = lhs.abs_error;
    res.rhs = eval_L(c, a);
    res.ratio = res.lhs / res.rhs;
    return res;
}

// ---------------------------------------------------------------------------
// L^p -> L^q smoothing spot check

struct SmoothingReport {
    double slope = 0.0;
    double expected = 0.0;
    bool probe_extremal = false;  // the fixed Gaussian attains the rate
    double bound_sup = 0.0;       // sup_t ratio(t) * t^{(d/a)(1/p-1/q)}
    std::vector<std::pair<double, double>> samples; // (t, norm ratio)
};

/// Applies the extremal kernel t^{-d/a}((t^{1/a}+|x-y|)/t^{1/a})^{-d-a}
/// (1+t^{1/a}/|y|)^theta to one fixed Gaussian and fits the log-log slope
/// of ||T_t f||_q / ||f||_p across five decades of t.
///
/// A single fixed bump attains the p->q decay rate only in the extremal
/// regimes: p = 1 (bump much narrower than every kernel width) and p = q
/// (bump much wider). The probe width is chosen accordingly and
/// `probe_extremal` records whether slope equality is meaningful; in
/// between, `bound_sup` still certifies the upper bound itself.
inline SmoothingReport smoothing_spot_check(double theta, double p, double q,
                                            int d, double alpha) {
    if (d != 1) throw std::domain_error("smoothing_spot_check: d = 1 only");
    if (!(p >= 1.0 && q >= p))
        throw std::domain_error("smoothing_spot_check: need 1 <= p <= q");
    if (theta > 0.0 && !(p > 1.0 / (1.0 - theta)))
        throw std::domain_error("smoothing_spot_check: p below d/(d-theta)");

    const double t_lo = 1e-2, t_hi = 1e2;
    const bool same = p == q;
    const double sigma = same ? 2.0 * std::pow(t_hi, 1.0 / alpha)
                              : 0.25 * std::pow(t_lo, 1.0 / alpha);
    const double c0 = same ? 0.5 * sigma : 1.0;
    auto f = [&](double y) {
        const double u = (y - c0) / sigma;
        return std::exp(-0.5 * u * u);
    };
    auto fp_norm = [&]() {
        auto g = [&](double y) { return std::pow(f(y), p); };
        return std::pow(
            integrate(g, c0 - 12.0 * sigma, c0 + 12.0 * sigma, 1e-12).value,
            1.0 / p);
    };

    SmoothingReport rep;
    rep.expected = -(d / alpha) * (1.0 / p - 1.0 / q);
    rep.probe_extremal = same || p == 1.0;
    const double fnorm = fp_norm();

    for (double t : logspace(t_lo, t_hi, 9)) {
        const double w = std::pow(t, 1.0 / alpha);
        auto Tf = [&](double x) {
            auto kern = [&](double y) {
                double v = std::pow(t, -1.0 / alpha) *
                           std::pow(w / (w + std::abs(x - y)), 1.0 + alpha);
                if (theta != 0.0) v *= std::pow(1.0 + w / std::abs(y), theta);
                return v * f(y);
            };
            const double lo = c0 - 12.0 * sigma, hi = c0 + 12.0 * sigma;
            std::vector<double> breaks{x, 0.0};
            append_ladder(breaks, x, 0.25 * w, hi - lo, lo, hi);
            const auto bk = finalize_breaks(std::move(breaks), lo, hi);
            double v = 0.0;
            for (std::size_t i = 0; i + 1 < bk.size(); ++i)
                v += integrate(kern, bk[i], bk[i + 1], 1e-9, 12).value;
            return v;
        };
        const double X = 60.0 * std::max(w, 1.0) + std::abs(c0) + 12.0 * sigma;
        auto outer = [&](double x) { return std::pow(std::abs(Tf(x)), q); };
        double nq = 0.0;
        const double m = std::max(2.0, 3.0 * sigma);
        for (auto [lo, hi] : {std::pair<double, double>{-X, -m},
                              {-m, c0 + m},
                              {c0 + m, X}})
            nq += integrate(outer, lo, hi, 1e-8, 13).value;
        const double ratio = std::pow(nq, 1.0 / q) / fnorm;
        rep.samples.emplace_back(t, ratio);
        rep.bound_sup = std::max(rep.bound_sup, ratio * std::pow(t, -rep.expected));
    }

    // least-squares slope in log-log coordinates
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (auto [t, r] : rep.samples) {
        const double lx = std::log(t), ly = std::log(r);
        sx += lx; sy += ly; sxx += lx * lx; sxy += lx * ly;
    }
    const double n = static_cast<double>(rep.samples.size());
    rep.slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    return rep;
}

} // namespace hardylab
