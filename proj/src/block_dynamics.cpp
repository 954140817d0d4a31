#include "covsteer/block_dynamics.hpp"

#include <stdexcept>
#include <string>

namespace covsteer {

void LinearSystemSchedule::validate() const {
    if (horizon < 1) throw std::invalid_argument("horizon must be >= 1");
    if (n_x < 1 || n_u < 1 || n_w < 1)
        throw std::invalid_argument("state/input/noise dimensions must be positive");
    auto check = [&](const std::vector<MatrixXd>& seq, int rows, int cols,
                     const char* name) {
        if (static_cast<int>(seq.size()) != horizon)
            throw std::invalid_argument(std::string(name) + ": expected " +
                                        std::to_string(horizon) + " matrices, got " +
                                        std::to_string(seq.size()));
        for (int k = 0; k < horizon; ++k) {
            if (seq[k].rows() != rows || seq[k].cols() != cols)
                throw std::invalid_argument(std::string(name) + "[" + std::to_string(k) +
                                            "] has shape " + std::to_string(seq[k].rows()) +
                                            "x" + std::to_string(seq[k].cols()) +
                                            ", expected " + std::to_string(rows) + "x" +
                                            std::to_string(cols));
        }
    };
    check(A, n_x, n_x, "A");
    check(B, n_x, n_u, "B");
    check(D, n_x, n_w, "D");
}

LinearSystemSchedule LinearSystemSchedule::time_invariant(const MatrixXd& A,
                                                          const MatrixXd& B,
                                                          const MatrixXd& D,
                                                          int horizon) {
    LinearSystemSchedule sys;
    sys.horizon = horizon;
    sys.n_x = static_cast<int>(A.rows());
    sys.n_u = static_cast<int>(B.cols());
    sys.n_w = static_cast<int>(D.cols());
    sys.A.assign(horizon, A);
    sys.B.assign(horizon, B);
    sys.D.assign(horizon, D);
    sys.validate();
    return sys;
}

LinearSystemSchedule LinearSystemSchedule::double_integrator_2d(double dt, int horizon,
                                                                double noise_scale) {
    MatrixXd A = MatrixXd::Identity(4, 4);
    A(0, 2) = dt;
    A(1, 3) = dt;
    MatrixXd B = MatrixXd::Zero(4, 2);
    B(0, 0) = 0.5 * dt * dt;
    B(1, 1) = 0.5 * dt * dt;
    B(2, 0) = dt;
    B(3, 1) = dt;
    MatrixXd D = noise_scale * MatrixXd::Identity(4, 4);
    return time_invariant(A, B, D, horizon);
}

MatrixXd transition_product(const LinearSystemSchedule& sys, int k1, int k0) {
    if (k0 > k1 || k0 < 0 || k1 >= sys.horizon)
        throw std::invalid_argument("transition_product requires 0 <= k0 <= k1 < N");
    MatrixXd P = sys.A[k0];
    for (int k = k0 + 1; k <= k1; ++k) P = sys.A[k] * P;
    return P;
}

Selector selector(int k, int horizon, int n_x) {
    if (k < 0 || k > horizon)
        throw std::invalid_argument("selector index k must satisfy 0 <= k <= N");
    Selector sel;
    sel.k = k;
    sel.E = MatrixXd::Zero(n_x, (horizon + 1) * n_x);
    sel.E.middleCols(k * n_x, n_x).setIdentity();
    return sel;
}

BlockOperators assemble_block_operators(const LinearSystemSchedule& sys) {
    sys.validate();
    const int N = sys.horizon;
    const int nx = sys.n_x, nu = sys.n_u, nw = sys.n_w;
    BlockOperators ops;
    ops.horizon = N;
    ops.n_x = nx;
    ops.n_u = nu;
    ops.n_w = nw;
    ops.calA.setZero((N + 1) * nx, nx);
    ops.calB.setZero((N + 1) * nx, N * nu);
    ops.calD.setZero((N + 1) * nx, N * nw);

    // Row block k holds x_k = Abar_k x_0 + sum_{j<k} A_{k-1,j+1} (B_j u_j + D_j w_j).
    // Built incrementally: row k+1 = A_k * row k, then the fresh B_k/D_k blocks.
    ops.calA.topRows(nx).setIdentity();
    for (int k = 0; k < N; ++k) {
        const auto prev_A = ops.calA.middleRows(k * nx, nx);
        ops.calA.middleRows((k + 1) * nx, nx) = sys.A[k] * prev_A;
        ops.calB.middleRows((k + 1) * nx, nx).leftCols(k * nu) =
            sys.A[k] * ops.calB.middleRows(k * nx, nx).leftCols(k * nu);
        ops.calB.block((k + 1) * nx, k * nu, nx, nu) = sys.B[k];
        ops.calD.middleRows((k + 1) * nx, nx).leftCols(k * nw) =
            sys.A[k] * ops.calD.middleRows(k * nx, nx).leftCols(k * nw);
        ops.calD.block((k + 1) * nx, k * nw, nx, nw) = sys.D[k];
    }
    return ops;
}

}  // namespace covsteer
