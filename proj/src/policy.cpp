#include "covsteer/policy.hpp"

#include <stdexcept>

#include "covsteer/chance.hpp"

namespace covsteer {

Policy Policy::zero(int horizon, int n_u, int n_x) {
    Policy p;
    p.v.assign(horizon, VectorXd::Zero(n_u));
    p.K.assign(horizon, MatrixXd::Zero(n_u, n_x));
    return p;
}

VectorXd Policy::stacked_v() const {
    const int N = horizon();
    const int n_u = N > 0 ? static_cast<int>(v[0].size()) : 0;
    VectorXd V(N * n_u);
    for (int k = 0; k < N; ++k) V.segment(k * n_u, n_u) = v[k];
    return V;
}

MatrixXd Policy::lifted_K() const {
    const int N = horizon();
    const int n_u = N > 0 ? static_cast<int>(K[0].rows()) : 0;
    const int n_x = N > 0 ? static_cast<int>(K[0].cols()) : 0;
    MatrixXd lifted = MatrixXd::Zero(N * n_u, (N + 1) * n_x);
    for (int k = 0; k < N; ++k) lifted.block(k * n_u, k * n_x, n_u, n_x) = K[k];
    return lifted;
}

void GaussianBoundary::validate() const {
    const int n = static_cast<int>(mu0.size());
    if (muN.size() != n || Sigma0.rows() != n || Sigma0.cols() != n ||
        SigmaN.rows() != n || SigmaN.cols() != n)
        throw std::invalid_argument("boundary: inconsistent dimensions");
    Eigen::SelfAdjointEigenSolver<MatrixXd> e0(0.5 * (Sigma0 + Sigma0.transpose()));
    const double s0 = std::max(1.0, e0.eigenvalues().cwiseAbs().maxCoeff());
    if (e0.eigenvalues().minCoeff() < -1e-9 * s0)
        throw std::invalid_argument("boundary: Sigma0 is not positive semidefinite");
    Eigen::SelfAdjointEigenSolver<MatrixXd> eN(0.5 * (SigmaN + SigmaN.transpose()));
    if (eN.eigenvalues().minCoeff() <= 0.0)
        throw std::invalid_argument("boundary: SigmaN is not positive definite");
}

void CostWeights::validate(int n_x, int n_u) const {
    const size_t N = Q_mean.size();
    if (R_mean.size() != N || Q_cov.size() != N || R_cov.size() != N)
        throw std::invalid_argument("weights: sequences must share the horizon length");
    auto check_psd = [](const MatrixXd& M, int n, bool strict, const char* name) {
        if (M.rows() != n || M.cols() != n)
            throw std::invalid_argument(std::string(name) + ": bad shape");
        Eigen::SelfAdjointEigenSolver<MatrixXd> e(0.5 * (M + M.transpose()));
        const double scale = std::max(1.0, e.eigenvalues().cwiseAbs().maxCoeff());
        const double lo = e.eigenvalues().minCoeff();
        if (strict ? (lo <= 0.0) : (lo < -1e-9 * scale))
            throw std::invalid_argument(std::string(name) + ": not (semi)definite");
    };
    for (size_t k = 0; k < N; ++k) {
        check_psd(Q_mean[k], n_x, false, "Q_mean");
        check_psd(Q_cov[k], n_x, false, "Q_cov");
        check_psd(R_mean[k], n_u, true, "R_mean");
        check_psd(R_cov[k], n_u, true, "R_cov");
    }
}

CostWeights CostWeights::uniform(int horizon, const MatrixXd& Q_mean,
                                 const MatrixXd& R_mean, const MatrixXd& Q_cov,
                                 const MatrixXd& R_cov) {
    CostWeights w;
    w.Q_mean.assign(horizon, Q_mean);
    w.R_mean.assign(horizon, R_mean);
    w.Q_cov.assign(horizon, Q_cov);
    w.R_cov.assign(horizon, R_cov);
    return w;
}

VectorXd mean_trajectory(const BlockOperators& ops, const VectorXd& mu0,
                         const Policy& policy) {
    if (mu0.size() != ops.n_x) throw std::invalid_argument("mean_trajectory: mu0 shape");
    if (policy.horizon() != ops.horizon)
        throw std::invalid_argument("mean_trajectory: policy horizon mismatch");
    return ops.calA * mu0 + ops.calB * policy.stacked_v();
}

namespace {

// calA Sigma0 calA' + calD calD', the covariance of the uncontrolled stack.
MatrixXd open_loop_covariance(const BlockOperators& ops, const MatrixXd& Sigma0) {
    Eigen::SelfAdjointEigenSolver<MatrixXd> e(0.5 * (Sigma0 + Sigma0.transpose()));
    const double scale = std::max(1.0, e.eigenvalues().cwiseAbs().maxCoeff());
    if (e.eigenvalues().minCoeff() < -1e-9 * scale)
        throw std::invalid_argument("state_covariance: Sigma0 is not PSD");
    return ops.calA * Sigma0 * ops.calA.transpose() +
           ops.calD * ops.calD.transpose();
}

}  // namespace

MatrixXd state_covariance(const BlockOperators& ops, const MatrixXd& Sigma0,
                          const Policy& policy) {
    const MatrixXd S = open_loop_covariance(ops, Sigma0);
    const MatrixXd closed = MatrixXd::Identity(S.rows(), S.cols()) +
                            ops.calB * policy.lifted_K();
    MatrixXd cov = closed * S * closed.transpose();
    return 0.5 * (cov + cov.transpose());
}

double evaluate_cost(const BlockOperators& ops, const GaussianBoundary& boundary,
                     const CostWeights& weights, const Policy& policy) {
    const int N = ops.horizon;
    const int nx = ops.n_x, nu = ops.n_u;
    weights.validate(nx, nu);
    const MatrixXd S = open_loop_covariance(ops, boundary.Sigma0);
    const MatrixXd K = policy.lifted_K();
    const MatrixXd closed = MatrixXd::Identity(S.rows(), S.cols()) + ops.calB * K;
    MatrixXd Qbar_cov = MatrixXd::Zero((N + 1) * nx, (N + 1) * nx);
    MatrixXd Qbar_mean = MatrixXd::Zero((N + 1) * nx, (N + 1) * nx);
    MatrixXd Rbar_cov = MatrixXd::Zero(N * nu, N * nu);
    MatrixXd Rbar_mean = MatrixXd::Zero(N * nu, N * nu);
    for (int k = 0; k < N; ++k) {
        Qbar_cov.block(k * nx, k * nx, nx, nx) = weights.Q_cov[k];
        Qbar_mean.block(k * nx, k * nx, nx, nx) = weights.Q_mean[k];
        Rbar_cov.block(k * nu, k * nu, nu, nu) = weights.R_cov[k];
        Rbar_mean.block(k * nu, k * nu, nu, nu) = weights.R_mean[k];
    }
    const VectorXd Xbar = mean_trajectory(ops, boundary.mu0, policy);
    const VectorXd V = policy.stacked_v();
    const double cov_terms =
        (closed.transpose() * Qbar_cov * closed * S).trace() +
        (K.transpose() * Rbar_cov * K * S).trace();
    const double mean_terms = Xbar.dot(Qbar_mean * Xbar) + V.dot(Rbar_mean * V);
    return cov_terms + mean_terms;
}

ClosedLoopRollout simulate_closed_loop(const LinearSystemSchedule& sys,
                                       const GaussianBoundary& boundary,
                                       const Policy& policy, const VectorXd& x0,
                                       const VectorXd& noise) {
    const int N = sys.horizon;
    if (x0.size() != sys.n_x) throw std::invalid_argument("simulate: x0 shape");
    if (noise.size() != N * sys.n_w) throw std::invalid_argument("simulate: noise shape");
    if (policy.horizon() != N) throw std::invalid_argument("simulate: policy horizon");
    ClosedLoopRollout out;
    out.states.resize(N + 1, sys.n_x);
    out.controls.resize(N, sys.n_u);
    VectorXd x = x0;
    VectorXd y = x0 - boundary.mu0;
    out.states.row(0) = x.transpose();
    for (int k = 0; k < N; ++k) {
        const VectorXd u = policy.v[k] + policy.K[k] * y;
        const VectorXd w = noise.segment(k * sys.n_w, sys.n_w);
        x = sys.A[k] * x + sys.B[k] * u + sys.D[k] * w;
        y = sys.A[k] * y + sys.D[k] * w;
        out.controls.row(k) = u.transpose();
        out.states.row(k + 1) = x.transpose();
    }
    return out;
}

double NormalSampler::operator()() {
    // Top 53 bits, shifted to the open interval (0, 1).
    const double u = (static_cast<double>(gen_() >> 11) + 0.5) * 0x1.0p-53;
    return inverse_standard_normal_cdf(u);
}

VectorXd NormalSampler::vector(int n) {
    VectorXd v(n);
    for (int i = 0; i < n; ++i) v[i] = (*this)();
    return v;
}

VectorXd NormalSampler::gaussian(const VectorXd& mu, const MatrixXd& sqrt_cov) {
    return mu + sqrt_cov * vector(static_cast<int>(sqrt_cov.cols()));
}

}  // namespace covsteer
