#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "covsteer/environment.hpp"
#include "covsteer/policy.hpp"
#include "covsteer/solver.hpp"

namespace covsteer {

/// Closed-form Gaussian tail of one assigned face constraint.
struct FaceTail {
    int region = 0;
    int column = 0;
    int step = 0;
    int face = 0;
    double tail = 0.0;  // Pr(alpha' x_step > beta) from (Xbar, Sigma_X)
};

struct VerificationReport {
    long samples = 0;
    std::uint64_t seed = 0;
    double confidence = 0.99;  // level of the binomial radii

    // Empirical per-step obstacle violation rates (steps 0..N) with binomial
    // confidence radii, plus informational midpoint rates (steps 0..N-1).
    std::vector<double> step_violation_rate;
    std::vector<double> step_violation_radius;
    std::vector<double> midpoint_violation_rate;

    std::vector<FaceTail> face_tails;  // closed form, assigned faces only
    double union_bound = 0.0;          // max over steps of summed face risks

    VectorXd terminal_mean_analytic, terminal_mean_empirical;
    MatrixXd terminal_cov_analytic, terminal_cov_empirical;
    VectorXd dominance_eigs;  // eig(SigmaN - E_N Sigma_X E_N'), analytic
    double cov_rel_error = 0.0;  // empirical vs analytic stacked covariance

    double analytic_cost = 0.0;
    double empirical_cost = 0.0;
    double empirical_cost_se = 0.0;

    bool checked_terminal_covariance = true;
    bool hard_ok = false;  // tails <= eps, terminal mean <= 1e-6, dominance
    std::vector<std::string> failures;

    std::string summary() const;
};

/// Monte Carlo plus closed-form verification of a policy. `schedule` (the
/// integer region assignment, N_R x (N-1)) selects which face tails are
/// computed; pass nullptr to check every region's faces at every step it
/// could gate. Terminal covariance dominance is skipped for mean-only
/// policies (`check_terminal_covariance = false`).
VerificationReport verify_policy(const Scenario& scenario, const Policy& policy,
                                 long samples, std::uint64_t seed,
                                 const Eigen::MatrixXi* schedule = nullptr,
                                 bool check_terminal_covariance = true);

struct MeanOnlyComparison {
    std::vector<int> full_sequence, mean_only_sequence;  // region index per column
    std::vector<std::string> full_regions, mean_only_regions;  // distinct names, in order
    double full_objective = 0.0, mean_only_objective = 0.0;
    std::string summary() const;
};

MeanOnlyComparison compare_mean_only(const Scenario& scenario, const SolveResult& full,
                                     const SolveResult& mean_only);

}  // namespace covsteer
