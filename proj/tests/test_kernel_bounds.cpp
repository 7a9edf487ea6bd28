#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "hardylab/config.hpp"
#include "hardylab/kernel_bounds.hpp"

using namespace hardylab;

namespace {
const ComparatorParams cp_main = ComparatorParams::make(1, 1.25, 1.6, 0.6, 1.0);
}

TEST_CASE("comparator kernels: plug-in values") {
    // T: both factors unity at t=1, x=y, |y|=1
    CHECK(eval_T(cp_main, args1d(1.0, 1.0, 1.0)) == 1.0);
    // weight clamps at one once |y| >= t^{1/a}
    CHECK(eval_T(cp_main, args1d(1.0, 3.0, 2.0)) ==
          std::pow(1.0 / 2.0, 1.0 + 0.6));

    // H^{g,1}_1 at |x-y| = 1 equals 2^{-d-g}
    CHECK(std::abs(eval_H(cp_main, args1d(1.0, 0.0, 1.0)) -
                   std::pow(2.0, -1.6)) < 1e-15);

    // M vanishes off its support
    CHECK(eval_M(cp_main, args1d(1.0, 0.5, 0.5)) == 0.0);   // |y| < t^{1/a}
    CHECK(eval_M(cp_main, args1d(1.0, 9.0, 2.0)) == 0.0);   // |x-y| too large
    CHECK(eval_M(cp_main, args1d(1.0, 2.2, 2.0)) > 0.0);

    // third L summand: plug-in at |y| = 2, |x-y| = 1, delta = 1:
    // (1/(1+1))^{d+g} |y|^{0}
    CHECK(std::abs(eval_L(cp_main, args1d(1.0, 1.0, 2.0)) -
                   std::pow(0.5, 1.6)) < 1e-15);
}

TEST_CASE("comparator kernels: homogeneity at random points") {
    std::mt19937_64 rng(42u);
    std::uniform_real_distribution<double> ux(-5.0, 5.0), ut(0.2, 8.0);
    const ComparatorParams c = ComparatorParams::make(1, 1.5, 1.9, 0.8, 0.7);
    int checked = 0;
    for (int i = 0; i < 100; ++i) {
        const double t = ut(rng), x = ux(rng), y = ux(rng);
        const double lam = std::pow(t, -1.0 / c.alpha);
        const auto at = args1d(t, x, y);
        const auto a1 = args1d(1.0, lam * x, lam * y);
        const double sT = std::pow(t, -c.d / c.alpha);
        const double sH = std::pow(t, -(c.d + c.delta) / c.alpha);
        const double sL = std::pow(t, (1.0 - c.delta - c.d) / c.alpha);
        const double sM = std::pow(t, -c.d / c.alpha);
        CHECK(std::abs(eval_T(c, at) - sT * eval_T(c, a1)) <=
              1e-12 * std::abs(eval_T(c, at)));
        CHECK(std::abs(eval_H(c, at) - sH * eval_H(c, a1)) <=
              1e-12 * std::abs(eval_H(c, at)));
        const double lt = eval_L(c, at);
        CHECK(std::abs(lt - sL * eval_L(c, a1)) <= 1e-12 * std::abs(lt) + 1e-300);
        const double mt = eval_M(c, at);
        CHECK(std::abs(mt - sM * eval_M(c, a1)) <= 1e-12 * std::abs(mt) + 1e-300);
        ++checked;
    }
    CHECK(checked == 100);
}

TEST_CASE("composition estimate: two-sided bracket") {
    // single configurations
    const double r0 = check_composition_ratio(1.0, 0.5, 1.0, 0.0, 0.0);
    CHECK(r0 > 0.05);
    CHECK(r0 < 20.0);

    // aggregated sweep: uniform two-sided bracket in s/t and |x-y|
    const std::vector<double> fracs{0.1, 0.3, 0.5, 0.7, 0.9};
    std::vector<double> seps{0.0};
    for (double r = 0.05; r <= 1000.0; r *= 2.6) seps.push_back(r);
    for (double N : {0.5, 1.0, 2.0}) {
        auto rep = composition_sweep(N, 1.0, fracs, seps);
        INFO("N=" << N << " bracket [" << rep.ratio_min << ", " << rep.ratio_max
                  << "]");
        CHECK(rep.spread() <= tol().composition_spread);
    }

    // scale invariance across a decade of t
    const double q1 = check_composition_ratio(1.0, 0.3, 1.0, 2.0, 0.0);
    const double q10 = check_composition_ratio(1.0, 3.0, 10.0, 20.0, 0.0);
    CHECK(std::abs(q1 - q10) < 1e-3 * q1);

    // lower-bound mechanism: the ball B(y, |x-y|/2) already carries a
    // fixed fraction of the comparator once |x-y| >= 2t
    for (double sep : {2.5, 10.0, 300.0}) {
        const double c = composition_lower_bound_ball(1.0, 0.4, 1.0, sep, 0.0);
        INFO("|x-y|=" << sep << " restricted ratio " << c);
        CHECK(c > 0.05);
    }
    CHECK_THROWS_AS(composition_lower_bound_ball(1.0, 0.4, 1.0, 1.0, 0.0),
                    std::domain_error);
}

TEST_CASE("basic weighted estimates (three parts)") {
    const auto rep = lem1tt_checks(0.5, 1.0, 1, 1.5);

    // (a) exact value 2/eps, constant in t
    CHECK(std::abs(rep.a_ratio - 4.0) < 1e-6);
    const auto rep_small = lem1tt_checks(0.5, 0.1, 1, 1.5);
    const auto rep_large = lem1tt_checks(0.5, 10.0, 1, 1.5);
    CHECK(std::abs(rep_small.a_ratio - rep.a_ratio) < 1e-6);
    CHECK(std::abs(rep_large.a_ratio - rep.a_ratio) < 1e-6);

    // (b) translation invariant, exact value 2/eps
    CHECK(rep.b_max - rep.b_min < 1e-6);
    CHECK(std::abs(rep.b_max - 4.0) < 1e-4);

    // (c) maximal-function domination with a finite constant
    CHECK(rep.c_constant > 0.0);
    CHECK(rep.c_constant < 20.0);
}

TEST_CASE("cancellation-region double integral (full z-range)") {
    // reference configuration of the kernel-difference estimate
    const auto res = difference_integral_42(cp_main, 1.0, 3.2, 4.0);
    INFO("lemma 4.2 ratio " << res.ratio << " (lhs " << res.lhs << ", rhs "
                            << res.rhs << ")");
    CHECK(res.lhs > 0.0);
    CHECK(res.rhs > 0.0);
    CHECK(res.ratio > 1e-3);
    CHECK(res.ratio < 1e3);

    // convergence under quadrature refinement
    const auto fine = difference_integral_42(cp_main, 1.0, 3.2, 4.0, 2);
    CHECK(std::abs(fine.ratio - res.ratio) < 5e-3 * res.ratio);

    // t-scaling: t != 1 equals the rescaled t = 1 result
    const double lam = std::pow(2.7, 1.0 / cp_main.alpha);
    const auto scaled = difference_integral_42(cp_main, 2.7, 3.2 * lam, 4.0 * lam);
    CHECK(std::abs(scaled.ratio - res.ratio) < 2e-3 * res.ratio);

    CHECK_THROWS_AS(difference_integral_42(cp_main, 1.0, 8.0, 2.0),
                    std::domain_error);
}

TEST_CASE("no-cancellation-region double integral (annulus z-range)") {
    // |y| >= t^{1/a} with |x-y| large
    const auto far = difference_integral_43(cp_main, 1.0, 1.5, 6.0);
    INFO("lemma 4.3 ratio " << far.ratio);
    CHECK(far.lhs > 0.0);
    CHECK(far.ratio > 1e-4);
    CHECK(far.ratio < 1e3);

    // |y| < t^{1/a}
    const auto near = difference_integral_43(cp_main, 1.0, 0.8, 0.3);
    CHECK(near.lhs > 0.0);
    CHECK(near.ratio < 1e3);

    // Subcase 2.3 band: |y| < 1 and |z| <= |y|/100
    const double y = 0.5, x = 0.04;
    const auto band =
        difference_integral_43(cp_main, 1.0, x, y, x / 16.0, y / 100.0);
    INFO("subcase 2.3 ratio " << band.ratio);
    CHECK(band.lhs > 0.0);
    CHECK(band.ratio < 1e3);

    CHECK_THROWS_AS(difference_integral_43(cp_main, 1.0, 4.0, 4.2),
                    std::domain_error);
}

TEST_CASE("smoothing spot check") {
    // p = q: flat in t
    const auto flat = smoothing_spot_check(0.0, 2.0, 2.0, 1, 1.5);
    CHECK(flat.probe_extremal);
    CHECK(flat.expected == 0.0);
    CHECK(std::abs(flat.slope - flat.expected) < 0.05);

    // (p, q) = (1, 2): slope -(d/a)(1/p - 1/q) = -1/3
    const auto s12 = smoothing_spot_check(0.0, 1.0, 2.0, 1, 1.5);
    INFO("slope " << s12.slope << " expected " << s12.expected);
    CHECK(s12.probe_extremal);
    CHECK(std::abs(s12.expected - (-1.0 / 3.0)) < 1e-12);
    CHECK(std::abs(s12.slope - s12.expected) < 0.05);

    // negative theta: the weighted kernel is dominated by the theta-free
    // one, so every norm ratio sits below the theta-free ratio and the
    // decay bound carries over
    const auto sneg = smoothing_spot_check(-0.5, 1.0, 2.0, 1, 1.5);
    REQUIRE(sneg.samples.size() == s12.samples.size());
    for (std::size_t i = 0; i < sneg.samples.size(); ++i)
        CHECK(sneg.samples[i].second <= s12.samples[i].second * (1.0 + 1e-9));
    CHECK(sneg.bound_sup <= s12.bound_sup * (1.0 + 1e-9));
    CHECK(sneg.slope < s12.slope + 0.05);

    // intermediate p: the fixed bump certifies the upper bound only
    const auto mid = smoothing_spot_check(0.0, 1.5, 2.0, 1, 1.5);
    CHECK(!mid.probe_extremal);
    CHECK(mid.bound_sup < 1e3);
    CHECK(mid.slope < mid.expected + 0.05);
}
