#pragma once

#include <Eigen/Dense>
#include <vector>

namespace covsteer {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Per-step matrices (A_k, B_k, D_k) of a time-varying discrete-time
/// stochastic linear system x_{k+1} = A_k x_k + B_k u_k + D_k w_k,
/// with w_k zero-mean unit-covariance white Gaussian noise.
struct LinearSystemSchedule {
    int horizon = 0;  // N >= 1
    int n_x = 0;
    int n_u = 0;
    int n_w = 0;
    std::vector<MatrixXd> A;  // N matrices, n_x x n_x
    std::vector<MatrixXd> B;  // N matrices, n_x x n_u
    std::vector<MatrixXd> D;  // N matrices, n_x x n_w

    /// Throws std::invalid_argument naming the offending step on shape errors.
    void validate() const;

    /// Time-invariant convenience constructor.
    static LinearSystemSchedule time_invariant(const MatrixXd& A, const MatrixXd& B,
                                               const MatrixXd& D, int horizon);

    /// Planar double integrator with time step dt (positions x,y then
    /// velocities vx,vy), noise matrix D = noise_scale * I_4.
    static LinearSystemSchedule double_integrator_2d(double dt, int horizon,
                                                     double noise_scale);
};

/// Lifted operators of the stacked dynamics X = calA x_0 + calB U + calD W,
/// where X stacks x_0..x_N, U stacks u_0..u_{N-1}, W stacks w_0..w_{N-1}.
struct BlockOperators {
    int horizon = 0;
    int n_x = 0;
    int n_u = 0;
    int n_w = 0;
    MatrixXd calA;  // (N+1)n_x x n_x
    MatrixXd calB;  // (N+1)n_x x N n_u, block strictly lower triangular
    MatrixXd calD;  // (N+1)n_x x N n_w, block strictly lower triangular

    int stacked_dim() const { return (horizon + 1) * n_x; }
};

/// E_k = [0 ... I_{n_x} ... 0], extracts x_k from the stacked state.
struct Selector {
    int k = 0;
    MatrixXd E;  // n_x x (N+1)n_x
};

/// Ordered product A_{k1} A_{k1-1} ... A_{k0}. Requires k0 <= k1 < N.
MatrixXd transition_product(const LinearSystemSchedule& sys, int k1, int k0);

Selector selector(int k, int horizon, int n_x);

BlockOperators assemble_block_operators(const LinearSystemSchedule& sys);

}  // namespace covsteer
