#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>

#include "hardylab/stable_kernel.hpp"

namespace hardylab {

/// Exponent bundle for the comparator kernels T, H, L, M.
struct ComparatorParams {
    int d = 1;
    double alpha = 1.5;
    double beta = 0.0;
    double gamma = 0.5;
    double delta = 0.0;

    static ComparatorParams make(int d, double alpha, double beta, double gamma,
                                 double delta = 0.0) {
        if (!(gamma > 0.0 && gamma < alpha))
            throw std::domain_error("ComparatorParams: gamma must lie in (0, alpha)");
        if (!(beta > 0.5 * (d + alpha) && beta < d + alpha))
            throw std::domain_error("ComparatorParams: beta outside admissible range");
        if (delta < 0.0)
            throw std::domain_error("ComparatorParams: delta must be >= 0");
        return {d, alpha, beta, gamma, delta};
    }
};

/// Moduli entering the comparator kernels: |x|, |y|, |x-y| at time t.
struct KernelArgs {
    double t = 1.0;
    double ax = 0.0;
    double ay = 0.0;
    double axy = 0.0;
};

inline KernelArgs args1d(double t, double x, double y) {
    return {t, std::abs(x), std::abs(y), std::abs(x - y)};
}

inline KernelArgs args_of(const SpaceTimePoint& p) {
    double ax = 0.0, ay = 0.0;
    for (double v : p.x) ax += v * v;
    for (double v : p.y) ay += v * v;
    return {p.t, std::sqrt(ax), std::sqrt(ay), p.separation()};
}

/// T^g_t(x,y) = (1 ^ |y|/t^{1/a})^{b-d} t^{-d/a} (t^{1/a}/(t^{1/a}+|x-y|))^{d+g}
inline double eval_T(const ComparatorParams& c, const KernelArgs& a) {
    if (!(a.t > 0.0)) throw std::domain_error("eval_T: t must be positive");
    const double w = std::pow(a.t, 1.0 / c.alpha);
    const double weight = std::pow(std::min(1.0, a.ay / w), c.beta - c.d);
    return weight * std::pow(a.t, -c.d / c.alpha) *
           std::pow(w / (w + a.axy), c.d + c.gamma);
}

/// H^{g,de}_t(x,y) = t^{-(d+de)/a} (t^{1/a}/(t^{1/a}+|x-y|))^{d+g}
inline double eval_H(const ComparatorParams& c, const KernelArgs& a) {
    if (!(a.t > 0.0)) throw std::domain_error("eval_H: t must be positive");
    const double w = std::pow(a.t, 1.0 / c.alpha);
    return std::pow(a.t, -(c.d + c.delta) / c.alpha) *
           std::pow(w / (w + a.axy), c.d + c.gamma);
}

/// Three-region kernel L^{g,de}_t; the |x| ~ |y| band of the middle summand
/// is fixed as 1/2 <= |x|/|y| <= 2.
inline double eval_L(const ComparatorParams& c, const KernelArgs& a) {
    if (!(a.t > 0.0)) throw std::domain_error("eval_L: t must be positive");
    const double w = std::pow(a.t, 1.0 / c.alpha);
    const double tfac = std::pow(a.t, (1.0 - c.delta) / c.alpha);
    const double body = std::pow(a.t, -c.d / c.alpha) *
                        std::pow(w / (w + a.axy), c.d + c.gamma);
    double v = 0.0;
    if (a.ay <= w) {
        v += std::pow(a.ay / w, c.beta - c.d - (c.alpha - c.gamma)) * body * tfac;
        if (a.ay > 0.0 && a.ax >= 0.5 * a.ay && a.ax <= 2.0 * a.ay)
            v += std::pow(a.ay / w, 1.0 + c.beta - c.d - c.alpha) *
                 std::pow(a.t, -c.d / c.alpha) * tfac;
    }
    if (a.ay >= w && a.axy >= 0.5 * std::min(a.ax, a.ay))
        v += body * std::pow(a.ay, 1.0 - c.delta);
    return v;
}

/// M^{g,de}_t, supported on |y| >= t^{1/a}, |x-y| <= (|x| ^ |y|)/2.
inline double eval_M(const ComparatorParams& c, const KernelArgs& a) {
    if (!(a.t > 0.0)) throw std::domain_error("eval_M: t must be positive");
    const double w = std::pow(a.t, 1.0 / c.alpha);
    if (!(a.ay >= w && a.axy <= 0.5 * std::min(a.ax, a.ay))) return 0.0;
    return std::pow(std::max(a.ax, a.ay) / w, c.delta - c.alpha) *
           std::pow(a.t, -c.d / c.alpha) *
           std::pow(w / (w + a.axy), c.d + c.gamma);
}

/// Min/max of pointwise ratios (computed quantity over comparator) across a
/// sample set.
struct ComparabilityReport {
    double ratio_min = std::numeric_limits<double>::infinity();
    double ratio_max = 0.0;
    std::size_t sample_count = 0;
    SpaceTimePoint worst_point;

    void add(double ratio, const SpaceTimePoint& where) {
        if (!(ratio > 0.0) || !std::isfinite(ratio)) return;
        if (ratio > ratio_max) {
            ratio_max = ratio;
            worst_point = where;
        }
        ratio_min = std::min(ratio_min, ratio);
        ++sample_count;
    }

    void merge(const ComparabilityReport& other) {
        if (other.ratio_max > ratio_max) {
            ratio_max = other.ratio_max;
            worst_point = other.worst_point;
        }
        ratio_min = std::min(ratio_min, other.ratio_min);
        sample_count += other.sample_count;
    }

    double spread() const { return ratio_max / ratio_min; }
};

} // namespace hardylab
