#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <random>
#include <vector>

#include "covsteer/block_dynamics.hpp"

namespace covsteer {

/// Affine feedback policy u_k = v_k + K_k y_k, where y_k is the uncontrolled
/// deviation state y_{k+1} = A_k y_k + D_k w_k, y_0 = x_0 - mu_0. The lifted
/// feedback matrix is block-diagonal with a zero final column block.
struct Policy {
    std::vector<VectorXd> v;  // N vectors of size n_u
    std::vector<MatrixXd> K;  // N matrices of size n_u x n_x

    int horizon() const { return static_cast<int>(v.size()); }

    static Policy zero(int horizon, int n_u, int n_x);

    /// Stacked feedforward V (N n_u).
    VectorXd stacked_v() const;

    /// Lifted block-diagonal feedback, shape N n_u x (N+1) n_x.
    MatrixXd lifted_K() const;
};

struct GaussianBoundary {
    VectorXd mu0;
    MatrixXd Sigma0;  // symmetric PSD
    VectorXd muN;
    MatrixXd SigmaN;  // symmetric positive definite

    void validate() const;
};

/// Separate mean/covariance steering weights. Q blocks are n_x x n_x PSD,
/// R blocks n_u x n_u positive definite, one per step k = 0..N-1; the lifted
/// Qbar places a zero block at the terminal index.
struct CostWeights {
    std::vector<MatrixXd> Q_mean;
    std::vector<MatrixXd> R_mean;
    std::vector<MatrixXd> Q_cov;
    std::vector<MatrixXd> R_cov;

    void validate(int n_x, int n_u) const;

    static CostWeights uniform(int horizon, const MatrixXd& Q_mean, const MatrixXd& R_mean,
                               const MatrixXd& Q_cov, const MatrixXd& R_cov);
};

/// Xbar = calA mu0 + calB V; independent of the feedback blocks.
VectorXd mean_trajectory(const BlockOperators& ops, const VectorXd& mu0,
                         const Policy& policy);

/// Sigma_X = (I + calB K)(calA Sigma0 calA' + calD calD')(I + calB K)',
/// symmetrized after the product. Rejects non-PSD Sigma0.
MatrixXd state_covariance(const BlockOperators& ops, const MatrixXd& Sigma0,
                          const Policy& policy);

/// J(V,K) with separate mean/covariance weights; equals the single-weight
/// cost when the mean and covariance weights coincide.
double evaluate_cost(const BlockOperators& ops, const GaussianBoundary& boundary,
                     const CostWeights& weights, const Policy& policy);

struct ClosedLoopRollout {
    MatrixXd states;    // (N+1) x n_x, row k is x_k
    MatrixXd controls;  // N x n_u, row k is u_k
};

/// Runs the coupled recursions of Theorem 1 for one realization of
/// (x_0, w_0..w_{N-1}). noise is a stacked N n_w vector.
ClosedLoopRollout simulate_closed_loop(const LinearSystemSchedule& sys,
                                       const GaussianBoundary& boundary,
                                       const Policy& policy, const VectorXd& x0,
                                       const VectorXd& noise);

/// Deterministic, platform-independent standard normal sampler: 64-bit
/// Mersenne Twister mapped through the inverse normal CDF.
class NormalSampler {
  public:
    explicit NormalSampler(std::uint64_t seed) : gen_(seed) {}

    double operator()();
    VectorXd vector(int n);

    /// Sample x0 ~ N(mu0, Sigma0) given a precomputed sqrt of Sigma0.
    VectorXd gaussian(const VectorXd& mu, const MatrixXd& sqrt_cov);

  private:
    std::mt19937_64 gen_;
};

}  // namespace covsteer
