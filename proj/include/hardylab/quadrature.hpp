#pragma once

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace hardylab {

struct ValueWithError {
    double value = 0.0;
    double abs_error = 0.0;
};

/// Adaptive Gauss--Kronrod 15-point integration on [a, b].
template <class F>
ValueWithError integrate(F&& f, double a, double b,
                         double rel_tol = 1e-12, int max_depth = 15) {
    double err = 0.0;
    const double v = boost::math::quadrature::gauss_kronrod<double, 15>::integrate(
        f, a, b, max_depth, rel_tol, &err);
    return {v, err};
}

/// Fixed 15-point Gauss--Legendre rule on one panel, error from the
/// embedded 7-point rule.
template <class F>
ValueWithError gauss_panel(F&& f, double a, double b) {
    const double v15 = boost::math::quadrature::gauss<double, 15>::integrate(f, a, b);
    const double v7 = boost::math::quadrature::gauss<double, 7>::integrate(f, a, b);
    return {v15, std::abs(v15 - v7)};
}

/// Integrates across consecutive panels given by sorted breakpoints.
template <class F>
ValueWithError integrate_panels(F&& f, const std::vector<double>& breaks) {
    ValueWithError total;
    for (std::size_t i = 0; i + 1 < breaks.size(); ++i) {
        if (breaks[i + 1] <= breaks[i]) continue;
        const auto piece = gauss_panel(f, breaks[i], breaks[i + 1]);
        total.value += piece.value;
        total.abs_error += piece.abs_error;
    }
    return total;
}

inline std::vector<double> linspace(double a, double b, std::size_t n) {
    if (n < 2) throw std::invalid_argument("linspace: need n >= 2");
    std::vector<double> v(n);
    for (std::size_t i = 0; i < n; ++i)
        v[i] = a + (b - a) * static_cast<double>(i) / static_cast<double>(n - 1);
    v.back() = b;
    return v;
}

inline std::vector<double> logspace(double a, double b, std::size_t n) {
    if (!(a > 0.0 && b > a)) throw std::invalid_argument("logspace: need 0 < a < b");
    std::vector<double> v = linspace(std::log(a), std::log(b), n);
    for (auto& x : v) x = std::exp(x);
    v.back() = b;
    return v;
}

/// Breakpoints on [a, b] graded toward a with exponent q:
/// a + (b-a) (k/n)^q.
inline std::vector<double> graded_breaks(double a, double b, std::size_t n, double q) {
    std::vector<double> v(n + 1);
    for (std::size_t k = 0; k <= n; ++k)
        v[k] = a + (b - a) * std::pow(static_cast<double>(k) / n, q);
    v.back() = b;
    return v;
}

/// Geometric ladder of breakpoints from `inner` to `outer` around `center`
/// (both sides), clipped to [lo, hi]. Used to resolve an algebraic peak or
/// an endpoint singularity of known scale.
inline void append_ladder(std::vector<double>& breaks, double center,
                          double inner, double outer, double lo, double hi,
                          double ratio = 2.0) {
    if (!(inner > 0.0) || !(outer > inner)) return;
    auto push = [&](double z) {
        if (z > lo && z < hi) breaks.push_back(z);
    };
    push(center);
    for (double h = inner; h < outer * ratio; h *= ratio) {
        push(center - h);
        push(center + h);
        if (h > (hi - lo)) break;
    }
}

/// Sorts, dedupes (relative tolerance) and clips a breakpoint set to [lo, hi].
inline std::vector<double> finalize_breaks(std::vector<double> breaks,
                                           double lo, double hi) {
    breaks.push_back(lo);
    breaks.push_back(hi);
    std::sort(breaks.begin(), breaks.end());
    std::vector<double> out;
    out.reserve(breaks.size());
    const double scale = std::max(std::abs(lo), std::abs(hi));
    for (double z : breaks) {
        if (z < lo || z > hi) continue;
        if (out.empty() || z - out.back() > 1e-14 * scale) out.push_back(z);
    }
    if (out.size() < 2) out = {lo, hi};
    return out;
}

} // namespace hardylab
