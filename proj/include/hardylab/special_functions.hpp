#pragma once

#include <cmath>
#include <stdexcept>

namespace hardylab {

inline constexpr double euler_gamma = 0.57721566490153286060651209008240243;

inline bool is_nonpositive_integer(double z, double eps = 0.0) {
    return z <= 0.5 && std::abs(z - std::round(z)) <= eps && std::round(z) <= 0.0;
}

/// sin(pi x), cos(pi x) with argument reduction done in exact arithmetic.
inline double sinpi(double x) {
    const double n = std::round(x);
    const double r = x - n;
    const double s = std::sin(M_PI * r);
    return (static_cast<long long>(n) & 1LL) ? -s : s;
}

inline double cospi(double x) {
    const double n = std::round(x);
    const double r = x - n;
    const double c = std::cos(M_PI * r);
    return (static_cast<long long>(n) & 1LL) ? -c : c;
}

namespace detail {

// Lanczos, g = 7, 9 terms.
inline constexpr double lanczos_g = 7.0;
inline constexpr double lanczos_c[9] = {
    0.99999999999980993,
    676.5203681218851,
    -1259.1392167224028,
    771.32342877765313,
    -176.61502916214059,
    12.507343278686905,
    -0.13857109526572012,
    9.9843695780195716e-6,
    1.5056327351493116e-7,
};

inline double gamma_positive(double z) {
    // z >= 0.5
    z -= 1.0;
    double x = lanczos_c[0];
    for (int i = 1; i < 9; ++i) x += lanczos_c[i] / (z + i);
    const double t = z + lanczos_g + 0.5;
    return std::sqrt(2.0 * M_PI) * std::pow(t, z + 0.5) * std::exp(-t) * x;
}

} // namespace detail

/// Gamma function on the real line, reflection for arguments below 1/2.
/// Poles at nonpositive integers raise.
inline double gamma_fn(double z) {
    if (is_nonpositive_integer(z))
        throw std::domain_error("gamma_fn: pole at nonpositive integer");
    if (z >= 0.5) return detail::gamma_positive(z);
    // Gamma(z) Gamma(1-z) = pi / sin(pi z)
    return M_PI / (sinpi(z) * detail::gamma_positive(1.0 - z));
}

/// 1/Gamma(z); entire, with exact zeros at nonpositive integers.
inline double rgamma(double z) {
    if (z >= 0.5) return 1.0 / detail::gamma_positive(z);
    return sinpi(z) * detail::gamma_positive(1.0 - z) / M_PI;
}

/// Digamma via downward reflection plus recurrence-and-asymptotic expansion.
inline double digamma(double z) {
    if (is_nonpositive_integer(z))
        throw std::domain_error("digamma: pole at nonpositive integer");
    double result = 0.0;
    if (z < 0.5) {
        // psi(z) = psi(1-z) - pi cot(pi z)
        result -= M_PI * cospi(z) / sinpi(z);
        z = 1.0 - z;
    }
    while (z < 12.0) {
        result -= 1.0 / z;
        z += 1.0;
    }
    // asymptotic series with Bernoulli numbers B_2..B_14
    const double inv = 1.0 / z, inv2 = inv * inv;
    double series = std::log(z) - 0.5 * inv;
    static constexpr double b[7] = {
        1.0 / 12.0, -1.0 / 120.0, 1.0 / 252.0, -1.0 / 240.0,
        1.0 / 132.0, -691.0 / 32760.0, 1.0 / 12.0,
    };
    double p = inv2;
    for (int n = 0; n < 7; ++n) {
        series -= b[n] * p;
        p *= inv2;
    }
    return result + series;
}

/// psi(z)/Gamma(z), finite everywhere (value (-1)^{n+1} n! at z = -n).
inline double psi_times_rgamma(double z) {
    if (z >= 0.5) return digamma(z) * rgamma(z);
    const double g1 = detail::gamma_positive(1.0 - z);
    return -cospi(z) * g1 + sinpi(z) / M_PI * g1 * digamma(1.0 - z);
}

} // namespace hardylab
