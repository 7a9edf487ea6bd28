#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdio>
#include <random>

#include "hardylab/config.hpp"
#include "hardylab/stable_kernel.hpp"

using namespace hardylab;

TEST_CASE("closed-form branches") {
    CHECK(std::abs(free_kernel(point1d(1.0, 0.0, 0.0), 1, 2.0).value -
                   1.0 / std::sqrt(4.0 * M_PI)) < 1e-14);
    CHECK(std::abs(free_kernel(point1d(1.0, 0.0, 0.0), 1, 1.0).value - 1.0 / M_PI) <
          1e-14);
    // multivariate Cauchy constant in d = 3
    const double v3 = free_kernel(SpaceTimePoint{1.0, {0, 0, 0}, {0, 0, 0}}, 3, 1.0).value;
    CHECK(std::abs(v3 - gamma_fn(2.0) / (M_PI * M_PI)) < 1e-14);
}

TEST_CASE("profile machinery agrees with exact Cauchy density") {
    // alpha = 1 exercises series, oscillatory and tail routes against a
    // closed form, in both supported dimensions.
    for (int d : {1, 3}) {
        StableProfile prof(d, 1.0);
        const double c = gamma_fn(0.5 * (d + 1)) * std::pow(M_PI, -0.5 * (d + 1));
        for (double r : {0.0, 0.3, 1.0, 2.7, 5.0, 12.0, 55.0, 200.0, 5000.0}) {
            const double exact = c * std::pow(1.0 + r * r, -0.5 * (d + 1));
            CHECK(std::abs(prof(r) - exact) < 2e-9 * exact);
        }
    }
    // value at the origin for alpha = 1.5: (1/pi) Gamma(1 + 1/alpha)
    StableProfile p15(1, 1.5);
    CHECK(std::abs(p15(0.0) - gamma_fn(1.0 + 1.0 / 1.5) / M_PI) < 1e-10);
}

TEST_CASE("profile direct routes cross-validate") {
    // series vs oscillatory in the middle band, oscillatory vs tail farther out
    for (double alpha : {1.2, 1.5, 1.8}) {
        for (double r : {0.5, 1.0, 1.8}) {
            const auto s = detail::profile_series(1, alpha, r);
            const auto o = detail::profile_oscillatory(1, alpha, r);
            REQUIRE(s.ok);
            CHECK(std::abs(s.value - o.value) < 1e-10 * s.value);
        }
        for (double r : {10.0, 20.0, 45.0}) {
            const auto a = detail::profile_asymptotic(1, alpha, r);
            const auto o = detail::profile_oscillatory(1, alpha, r);
            REQUIRE(a.value > 0.0);
            const double allow = std::max(3e-9, 3.0 * (a.rel_err + o.rel_err));
            CHECK(std::abs(a.value - o.value) < allow * a.value);
        }
    }
}

TEST_CASE("normalization") {
    for (auto [d, alpha] : {std::pair<int, double>{1, 1.2},
                            {1, 1.5},
                            {1, 1.8},
                            {3, 1.5},
                            {1, 2.0},
                            {1, 1.0}}) {
        FreeKernel k(d, alpha);
        const auto m = k.mass(1.0);
        CHECK(std::abs(m.value - 1.0) < tol().normalization_abs);
    }
}

TEST_CASE("self-similar scaling holds exactly by construction") {
    std::mt19937_64 rng(7u);
    std::uniform_real_distribution<double> ux(-8.0, 8.0), ut(0.05, 20.0);
    for (auto [d, alpha] : {std::pair<int, double>{1, 1.3}, {3, 1.7}, {1, 2.0}}) {
        FreeKernel k(d, alpha);
        for (int i = 0; i < 40; ++i) {
            const double t = ut(rng), r = std::abs(ux(rng));
            const double lhs = k.density(t, r);
            const double w = std::pow(t, 1.0 / alpha);
            const double rhs = std::pow(t, -d / alpha) * k.density(1.0, r / w);
            CHECK(std::abs(lhs - rhs) <= tol().scaling_exact * std::abs(lhs));
        }
    }
}

TEST_CASE("symmetry and radial monotone decrease") {
    FreeKernel k(1, 1.5);
    double prev = k.density(1.0, 0.0);
    for (double r = 0.25; r < 400.0; r *= 1.3) {
        const double v = k.density(1.0, r);
        CHECK(v < prev);
        CHECK(v > 0.0);
        prev = v;
    }
    const auto a = free_kernel(point1d(0.7, 1.3, -2.2), 1, 1.5).value;
    const auto b = free_kernel(point1d(0.7, -2.2, 1.3), 1, 1.5).value;
    CHECK(a == b);
}

TEST_CASE("gradient: exact branches and dimension-shift identity") {
    // radial symmetry at coincidence
    CHECK(free_kernel_gradient(point1d(1.0, 0.4, 0.4), 1, 1.5)[0] == 0.0);

    // alpha = 2 closed form
    const auto p = point1d(0.8, 1.1, -0.4);
    const double g2 = free_kernel_gradient(p, 1, 2.0)[0];
    const double expect = -(1.1 + 0.4) / (2.0 * 0.8) * free_kernel(p, 1, 2.0).value;
    CHECK(std::abs(g2 - expect) < 1e-14);

    // general alpha against centered differences of the density
    FreeKernel k(1, 1.5);
    for (double r : {0.3, 1.1, 4.0, 20.0}) {
        const double h = 1e-3 * std::max(r, 1.0);
        const double fd = (k.density(1.0, r + h) - k.density(1.0, r - h)) / (2.0 * h);
        const double an = k.ddr(1.0, r);
        CHECK(std::abs(fd - an) < 5e-5 * std::abs(an));
    }
    // second derivative identity as well
    for (double r : {0.5, 2.0, 9.0}) {
        const double h = 2e-3 * std::max(r, 1.0);
        const double fd =
            (k.ddr(1.0, r + h) - k.ddr(1.0, r - h)) / (2.0 * h);
        CHECK(std::abs(fd - k.d2dr2(1.0, r)) <
              5e-4 * (std::abs(k.d2dr2(1.0, r)) + 1e-12));
    }
}

TEST_CASE("gradient comparator bracket") {
    // |grad p~_1(x,0)| over the comparator of the derivative bound
    FreeKernel k(1, 1.5);
    double lo = 1e300, hi = 0.0;
    for (double r = 0.1; r <= 100.0; r *= 1.18) {
        const double grad = std::abs(k.ddr(1.0, r));
        // comparator: (r/t^{1/a}) t^{-(d+1)/a} (t^{1/a}/(t^{1/a}+r))^{d+2+a}, t=1, d=1
        const double c = r * std::pow(1.0 / (1.0 + r), 4.5);
        const double ratio = grad / c;
        lo = std::min(lo, ratio);
        hi = std::max(hi, ratio);
    }
    INFO("gradient bracket [" << lo << ", " << hi << "]");
    CHECK(hi / lo <= 50.0);
}

TEST_CASE("time derivative") {
    // conservation: integral of dt over y vanishes (algebraic tail truncated
    // at 2e4 contributes ~1.6e-7); split so the near-field peak and the far
    // tail are each resolved
    FreeKernel k(1, 1.5);
    auto f = [&](double y) { return k.dt(1.0, std::abs(y)); };
    const auto m1 = integrate(f, 0.0, 50.0, 1e-12);
    const auto m2 = integrate(f, 50.0, 20000.0, 1e-12);
    CHECK(std::abs(2.0 * (m1.value + m2.value)) < 1e-6);

    // alpha = 2 closed form at (t, r) = (1, 1), d = 1
    FreeKernel g(1, 2.0);
    const double expect = g.density(1.0, 1.0) * (-0.5 + 0.25);
    CHECK(std::abs(g.dt(1.0, 1.0) - expect) < 1e-14);

    // scaling identity vs finite differences in t for general alpha
    for (double r : {0.0, 0.7, 3.0}) {
        const double h = 1e-4;
        const double fd = (k.density(1.0 + h, r) - k.density(1.0 - h, r)) / (2.0 * h);
        CHECK(std::abs(fd - k.dt(1.0, r)) < 1e-5 * (std::abs(k.dt(1.0, r)) + 1e-10));
    }

    // dt comparator shape stays bracketed: |dt p~_1| vs t^{-1} H^{gamma,1}
    double lo = 1e300, hi = 0.0;
    for (double r = 0.2; r <= 100.0; r *= 1.25) {
        const double v = std::abs(k.dt(1.0, r));
        const double comp = std::pow(1.0 / (1.0 + r), 1.0 + 1.5); // d + gamma, gamma ~ alpha
        const double ratio = v / comp;
        lo = std::min(lo, ratio);
        hi = std::max(hi, ratio);
    }
    INFO("dt bracket [" << lo << ", " << hi << "]");
    CHECK(lo > 0.0);
    CHECK(std::isfinite(hi));
}

TEST_CASE("space-time derivative vs finite differences") {
    FreeKernel k(1, 1.5);
    for (double r : {0.4, 1.5, 6.0}) {
        const double h = 1e-4;
        const double fd = (k.ddr(1.0 + h, r) - k.ddr(1.0 - h, r)) / (2.0 * h);
        CHECK(std::abs(fd - k.ddr_dt(1.0, r)) <
              1e-4 * (std::abs(k.ddr_dt(1.0, r)) + 1e-10));
    }
}

TEST_CASE("free kernel comparator two-sided bracket") {
    for (int d : {1, 3}) {
        for (double alpha : {1.2, 1.5, 1.8}) {
            FreeKernel k(d, alpha);
            double lo = 1e300, hi = 0.0;
            for (double r = 0.0; r <= 1000.0; r = (r == 0.0 ? 0.05 : r * 1.2)) {
                const double ratio =
                    k.density(1.0, r) / free_comparator(1.0, r, d, alpha);
                lo = std::min(lo, ratio);
                hi = std::max(hi, ratio);
            }
            INFO("d=" << d << " alpha=" << alpha << " bracket [" << lo << "," << hi
                      << "]");
            // measured spreads: d=1 stays below 50; d=3 reaches ~66 at
            // alpha=1.8 (peak-to-tail contrast of the true density grows
            // with dimension), so the recorded bound is looser there
            CHECK(hi / lo <= (d == 1 ? tol().free_comparator_spread : 100.0));
        }
    }
}

TEST_CASE("riesz smoothed gradient") {
    const auto p = point1d(1.0, 2.0, 0.0);
    // gamma = 0 reduces to the plain gradient
    const auto g0 = riesz_smoothed_gradient(0.0, p, 1, 1.5);
    const auto g = free_kernel_gradient(p, 1, 1.5);
    CHECK(g0[0] == g[0]);
    // coincidence point
    CHECK(riesz_smoothed_gradient(0.4, point1d(1.0, 1.0, 1.0), 1, 1.5)[0] == 0.0);

    // bracket against t^{-(d+1-ga)/a} (t^{1/a}/(t^{1/a}+r))^{d+1-a g}
    const double gamma = 0.4, alpha = 1.5;
    double lo = 1e300, hi = 0.0;
    for (double t : {0.25, 1.0, 4.0, 16.0}) {
        for (double r : {0.2, 0.7, 2.0, 7.0, 25.0}) {
            const double v =
                std::abs(riesz_smoothed_gradient(gamma, point1d(t, r, 0.0), 1, alpha)[0]);
            const double w = std::pow(t, 1.0 / alpha);
            const double comp = std::pow(t, -(1.0 + 1.0 - gamma * alpha) / alpha) *
                                std::pow(w / (w + r), 1.0 + 1.0 - alpha * gamma);
            const double ratio = v / comp;
            lo = std::min(lo, ratio);
            hi = std::max(hi, ratio);
        }
    }
    INFO("riesz-smoothed gradient bracket [" << lo << ", " << hi << "]");
    CHECK(hi / lo < 100.0);

    CHECK_THROWS_AS(riesz_smoothed_gradient(2.0, p, 1, 1.5), std::domain_error);
}

TEST_CASE("Chapman-Kolmogorov residual") {
    CHECK(chapman_kolmogorov_residual(0.4, 0.6, 0.3, -0.2, 1, 2.0) < 1e-10);
    CHECK(chapman_kolmogorov_residual(0.5, 0.5, 0.0, 1.0, 1, 1.0) < 1e-8);
    CHECK(chapman_kolmogorov_residual(0.5, 0.5, 0.0, 0.0, 1, 1.5) <
          tol().chapman_kolmogorov);
    CHECK(chapman_kolmogorov_residual(0.3, 0.9, 1.0, -0.5, 1, 1.5) <
          tol().chapman_kolmogorov);
    CHECK(chapman_kolmogorov_residual(0.5, 0.5, 0.0, 0.0, 3, 2.0) < 1e-8);
}

TEST_CASE("profile binary cache round-trip") {
    const StableProfile& p = StableProfile::get(1, 1.5);
    const std::string path = "profile_cache_test.bin";
    p.save(path);
    const auto q = StableProfile::load(path);
    for (double r : {0.0, 0.3, 2.0, 30.0, 100.0})
        CHECK(p(r) == q(r));
    CHECK(p.checksum() == q.checksum());

    // corrupt one payload byte: load must fail the checksum
    {
        std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
        f.seekp(64);
        char b = 0;
        f.read(&b, 1);
        f.seekp(64);
        b = static_cast<char>(b ^ 0x40);
        f.write(&b, 1);
    }
    CHECK_THROWS(StableProfile::load(path));
    std::remove(path.c_str());
}
