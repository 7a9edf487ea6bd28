#pragma once

#include <cstddef>

namespace hardylab {

/// Central tolerance/threshold record. Every numeric gate used by the
/// checks and the acceptance suite reads from here, so a tolerance is
/// never duplicated in two places.
struct Tolerances {
    // couplings
    double coupling_exact       = 1e-10;  // closed-form values of kappa*, kappa_c
    double coupling_identity    = 1e-10;  // kappa_c == 2 kappa* / (d - alpha)
    double point_consistency    = 1e-12;  // ParameterPoint kappa vs Psi(beta), relative
    double inversion_residual   = 1e-12;  // |Psi(beta) - kappa| <= tol*(1+|kappa|)
    double digamma_recurrence   = 1e-12;  // psi(z+1)-psi(z)-1/z
    double derivative_fd_rel    = 1e-5;   // dPsi/dbeta vs centered differences
    double psi_limit_at_d       = 1e-4;   // |Psi(d +- 1e-6)|

    // free kernel
    double normalization_abs    = 1e-6;   // |integral of p~_t - 1|
    double scaling_exact        = 1e-12;  // self-similarity identity
    double chapman_kolmogorov   = 1e-5;   // semigroup residual, general alpha
    double free_comparator_spread = 50.0; // two-sided bracket width

    // composition lemma
    double composition_spread   = 20.0;

    // Duhamel / Picard
    double picard_rel_default   = 1e-4;   // relative sup-norm of last correction
    int    picard_max_iter      = 8;
    double kappa_zero_exact     = 1e-10;  // kappa = 0 degeneracy
    double mass_conservation    = 1e-3;
    double heatkernel_spread    = 100.0;
    double qt_refine_drift      = 0.10;   // recorded C moves < 10% under refinement

    // Monte Carlo
    double mc_sigma_factor      = 3.0;    // probe agreement within 3 standard errors

    // Riesz / Schur
    double riesz_scaling_rel    = 1e-4;
    double riesz_spread         = 100.0;
    double schur_slope_eps      = 1e-3;   // slope threshold for the trace classifier
    double schur_p_step         = 1e-2;

    // experiments
    double dual_route_l2        = 1e-3;   // multiplier vs heat-kernel route, relative L2
    double equivalence_spread   = 10.0;
    double refinement_drift     = 0.02;   // ratio reports under grid doubling
};

inline const Tolerances& tol() {
    static const Tolerances t{};
    return t;
}

} // namespace hardylab
