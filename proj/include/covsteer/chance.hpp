#pragma once

#include <Eigen/Dense>

#include "covsteer/block_dynamics.hpp"

namespace covsteer {

/// Standard normal CDF, accurate to machine precision via erfc.
double standard_normal_cdf(double z);

/// Upper tail Pr(Z > z) of the standard normal.
double standard_normal_tail(double z);

/// Inverse standard normal CDF. Wichura's AS241 rational approximation
/// refined by one Newton step on the CDF; absolute error below 1e-9 for
/// p in [1e-12, 1 - 1e-12]. Throws for p outside (0, 1).
double inverse_standard_normal_cdf(double p);

/// Symmetric PSD square root via eigendecomposition. Eigenvalues within
/// -1e-9 * scale of zero are clipped to zero; anything lower is rejected.
MatrixXd psd_sqrt(const MatrixXd& S);

/// Deterministic reformulation of the half-space chance constraint
/// Pr(alpha' x_k > beta) <= p for the Gaussian state at step k:
///
///   alpha' E_k (calA mu0 + calB V)
///     + quantile * || sqrtS (I + calB K)' E_k' alpha || - beta <= 0,
///
/// with sqrtS = (calA Sigma0 calA' + calD calD')^{1/2} and
/// quantile = Phi^{-1}(1 - p). Jointly convex in (V, K) for p < 0.5.
struct DeterministicHalfspaceConstraint {
    int k = 0;
    double beta = 0.0;
    double quantile = 0.0;       // Phi^{-1}(1 - p) > 0
    VectorXd mean_coeff_v;       // alpha' E_k calB, length N n_u
    double mean_offset = 0.0;    // alpha' E_k calA mu0
    VectorXd norm_const;         // sqrtS E_k' alpha, length (N+1) n_x
    VectorXd feedback_seed;      // calB' E_k' alpha, length N n_u; the norm argument is
                                 // norm_const + sqrtS * stack_j(K_j' seed_j)

    /// Norm argument for a concrete block-diagonal feedback (K_0..K_{N-1}),
    /// given the cached sqrtS of the scenario.
    VectorXd norm_argument(const MatrixXd& sqrtS,
                           const std::vector<MatrixXd>& K) const;

    /// Left-hand side value of the deterministic constraint for concrete (V, K).
    double evaluate(const MatrixXd& sqrtS, const VectorXd& V,
                    const std::vector<MatrixXd>& K) const;
};

struct Halfspace;  // environment.hpp

DeterministicHalfspaceConstraint build_halfspace_constraint(const BlockOperators& ops,
                                                            const MatrixXd& sqrtS,
                                                            const VectorXd& mu0,
                                                            const Halfspace& face, int k,
                                                            double p);

}  // namespace covsteer
