#include "covsteer/program_builder.hpp"

#include <sstream>
#include <stdexcept>

namespace covsteer {

namespace {

using Triplet = Eigen::Triplet<double>;

/// Rows of the cost vector u with J = ||u||^2; each row is an affine
/// functional offset + coeffs' x over the layout variables.
struct AffineRow {
    double offset = 0.0;
    std::vector<std::pair<int, double>> coeffs;  // (var index, coefficient)
};

void push_coeff(AffineRow& row, int var, double coef) {
    if (coef != 0.0) row.coeffs.emplace_back(var, coef);
}

}  // namespace

Policy DecisionLayout::decode_policy(const VectorXd& x) const {
    Policy p = Policy::zero(N, n_u, n_x);
    for (int k = 0; k < N; ++k)
        for (int u = 0; u < n_u; ++u) p.v[k][u] = x[v_index(k, u)];
    if (!mean_only)
        for (int k = 0; k < N; ++k)
            for (int u = 0; u < n_u; ++u)
                for (int xx = 0; xx < n_x; ++xx) p.K[k](u, xx) = x[k_index(k, u, xx)];
    return p;
}

std::string AssembledProgram::debug_dump() const {
    std::ostringstream os;
    os << "variables: " << program.num_vars << " (V " << layout.num_v() << ", K "
       << layout.num_k() << ", t 1, binaries " << layout.num_binaries() << ")\n";
    os << "equalities: " << program.b.size() << "\n";
    os << "cone rows: " << program.cone_rows() << "\n";
    int orth = 0, soc = 0, psd = 0;
    for (const auto& c : program.cones) {
        if (c.type == ConeType::NonNegative) orth += c.dim;
        if (c.type == ConeType::SecondOrder) ++soc;
        if (c.type == ConeType::PositiveSemidefinite) ++psd;
    }
    os << "orthant rows: " << orth << ", SOC blocks: " << soc
       << ", PSD blocks: " << psd << "\n";
    os << "gated constraints: " << gated.size() << "\n";
    return os.str();
}

AssembledProgram assemble(const Scenario& sc, bool mean_only) {
    const auto& sys = sc.system;
    const int N = sys.horizon, n_x = sys.n_x, n_u = sys.n_u;
    const int N_R = static_cast<int>(sc.regions.size());
    const auto ops = assemble_block_operators(sys);
    const int nX = ops.stacked_dim();  // (N+1) n_x

    AssembledProgram out;
    DecisionLayout& L = out.layout;
    L.N = N;
    L.n_x = n_x;
    L.n_u = n_u;
    L.N_R = N_R;
    L.mean_only = mean_only;
    L.v_offset = 0;
    L.k_offset = L.num_v();
    L.t_index = L.num_v() + L.num_k();
    L.binary_offset = L.t_index + 1;
    L.num_vars = L.binary_offset + L.num_binaries();

    const MatrixXd S = ops.calA * sc.boundary.Sigma0 * ops.calA.transpose() +
                       ops.calD * ops.calD.transpose();
    out.sqrtS = psd_sqrt(S);
    const MatrixXd& sqrtS = out.sqrtS;

    // Per-step weight square roots.
    std::vector<MatrixXd> Qm, Rm, Qc, Rc;
    for (int k = 0; k < N; ++k) {
        Qm.push_back(psd_sqrt(sc.weights.Q_mean[k]));
        Rm.push_back(psd_sqrt(sc.weights.R_mean[k]));
        Qc.push_back(psd_sqrt(sc.weights.Q_cov[k]));
        Rc.push_back(psd_sqrt(sc.weights.R_cov[k]));
    }

    ConicProgram& P = out.program;
    P.num_vars = L.num_vars;
    P.c = VectorXd::Zero(L.num_vars);
    P.c[L.t_index] = 1.0;

    std::vector<Triplet> Atrips, Gtrips;
    std::vector<double> bvals, hvals;
    int grow = 0;  // next row of G

    auto add_g_row = [&](double h) {
        hvals.push_back(h);
        return grow++;
    };

    // ---- Orthant block: variable bounds (and binary interval rows). ----
    const int num_cont_bounded = L.num_v() + L.num_k();
    for (int i = 0; i < num_cont_bounded; ++i) {
        const double lo = (i < L.num_v()) ? sc.v_lo : sc.k_lo;
        const double hi = (i < L.num_v()) ? sc.v_hi : sc.k_hi;
        Gtrips.emplace_back(add_g_row(-lo), i, -1.0);  // -x <= -lo
        Gtrips.emplace_back(add_g_row(hi), i, 1.0);    //  x <=  hi
    }
    for (int bidx = 0; bidx < L.num_binaries(); ++bidx) {
        const int var = L.binary_offset + bidx;
        P.binary_vars.push_back(var);
        P.binary_lo_row.push_back(grow);
        Gtrips.emplace_back(add_g_row(0.0), var, -1.0);  // -m <= 0
        P.binary_hi_row.push_back(grow);
        Gtrips.emplace_back(add_g_row(1.0), var, 1.0);   //  m <= 1
    }
    P.cones.push_back({ConeType::NonNegative, grow, 0, -1});

    // ---- Cost epigraph SOC: ||[2u; 1 - t]|| <= 1 + t  <=>  ||u||^2 <= t. ----
    std::vector<AffineRow> u_rows;
    // (a) Rbar_mean^{1/2} V.
    for (int k = 0; k < N; ++k)
        for (int u = 0; u < n_u; ++u) {
            AffineRow row;
            for (int up = 0; up < n_u; ++up)
                push_coeff(row, L.v_index(k, up), Rm[k](u, up));
            u_rows.push_back(std::move(row));
        }
    // (b) Qbar_mean^{1/2} (calA mu0 + calB V); terminal block is zero.
    const VectorXd Amu0 = ops.calA * sc.boundary.mu0;
    for (int k = 0; k < N; ++k) {
        const MatrixXd QB = Qm[k] * ops.calB.middleRows(k * n_x, n_x);
        const VectorXd off = Qm[k] * Amu0.segment(k * n_x, n_x);
        for (int i = 0; i < n_x; ++i) {
            AffineRow row;
            row.offset = off[i];
            for (int j = 0; j < L.num_v(); ++j) push_coeff(row, L.v_offset + j, QB(i, j));
            u_rows.push_back(std::move(row));
        }
    }
    if (!mean_only) {
        // (c) vec(Qbar_cov^{1/2} (I + calB K) S^{1/2}), nonzero block rows only.
        for (int k = 0; k < N; ++k) {
            const MatrixXd QS = Qc[k] * sqrtS.middleRows(k * n_x, n_x);  // n_x x nX
            const MatrixXd QB = Qc[k] * ops.calB.middleRows(k * n_x, n_x);
            for (int i = 0; i < n_x; ++i) {
                for (int j = 0; j < nX; ++j) {
                    AffineRow row;
                    row.offset = QS(i, j);
                    for (int k2 = 0; k2 < k; ++k2)  // calB block row k is zero for k2 >= k
                        for (int u = 0; u < n_u; ++u) {
                            const double bu = QB(i, k2 * n_u + u);
                            if (bu == 0.0) continue;
                            for (int xx = 0; xx < n_x; ++xx)
                                push_coeff(row, L.k_index(k2, u, xx),
                                           bu * sqrtS(k2 * n_x + xx, j));
                        }
                    u_rows.push_back(std::move(row));
                }
            }
        }
        // (d) vec(Rbar_cov^{1/2} K S^{1/2}).
        for (int k = 0; k < N; ++k)
            for (int u = 0; u < n_u; ++u)
                for (int j = 0; j < nX; ++j) {
                    AffineRow row;
                    for (int up = 0; up < n_u; ++up) {
                        const double r = Rc[k](u, up);
                        if (r == 0.0) continue;
                        for (int xx = 0; xx < n_x; ++xx)
                            push_coeff(row, L.k_index(k, up, xx),
                                       r * sqrtS(k * n_x + xx, j));
                    }
                    u_rows.push_back(std::move(row));
                }
    } else {
        // Covariance cost is constant for K = 0: tr(Qbar_cov S).
        double cc = 0.0;
        for (int k = 0; k < N; ++k)
            cc += (sc.weights.Q_cov[k] * S.block(k * n_x, k * n_x, n_x, n_x)).trace();
        L.cost_constant = cc;
    }
    {
        const int c0 = add_g_row(1.0);  // s0 = 1 + t
        Gtrips.emplace_back(c0, L.t_index, -1.0);
        for (const auto& row : u_rows) {
            const int r = add_g_row(2.0 * row.offset);
            for (const auto& [var, coef] : row.coeffs) Gtrips.emplace_back(r, var, -2.0 * coef);
        }
        const int cl = add_g_row(1.0);  // s_last = 1 - t
        Gtrips.emplace_back(cl, L.t_index, 1.0);
        P.cones.push_back(
            {ConeType::SecondOrder, static_cast<int>(u_rows.size()) + 2, 0, -1});
    }

    // ---- Region chance constraints (Eq. 26), big-M gated when N_R > 1. ----
    const double kabs = std::max(std::abs(sc.k_lo), std::abs(sc.k_hi));
    const double sqrtS_norm2 = sqrtS.selfadjointView<Eigen::Lower>().operatorNorm();
    auto add_region_soc = [&](int r, int column, int face_idx, int step, int gate_var) {
        const Halfspace face = sc.lift(sc.regions[r].faces[face_idx]);
        const auto con =
            build_halfspace_constraint(ops, sqrtS, sc.boundary.mu0, face, step, sc.epsilon);
        const double q = con.quantile;

        double big_m = 0.0;
        if (gate_var >= 0) {
            // Interval bound on mean_offset + mean_coeff' V — beta.
            double mean_max = con.mean_offset - con.beta;
            for (int i = 0; i < con.mean_coeff_v.size(); ++i)
                mean_max += std::max(con.mean_coeff_v[i] * sc.v_lo,
                                     con.mean_coeff_v[i] * sc.v_hi);
            // Norm bound: ||const|| + ||sqrtS||_2 * ||stack(K_j' seed_j)||,
            // with |(K_j' seed_j)_x| <= kabs * ||seed_j||_1 per component.
            double stack_sq = 0.0;
            if (!mean_only)
                for (int k2 = 0; k2 < N; ++k2) {
                    const double l1 =
                        con.feedback_seed.segment(k2 * n_u, n_u).lpNorm<1>();
                    stack_sq += n_x * (kabs * l1) * (kabs * l1);
                }
            const double norm_max =
                con.norm_const.norm() + sqrtS_norm2 * std::sqrt(stack_sq);
            big_m = std::max(0.0, mean_max + q * norm_max) + 1.0;
        }

        // SOC rows: s0 = (beta - mean_offset + bigM)/q - (mean_coeff'V + bigM m)/q;
        // s_i = norm_const_i + (sqrtS stack(K' seed))_i.
        const int s0 = add_g_row((con.beta - con.mean_offset + big_m) / q);
        for (int i = 0; i < con.mean_coeff_v.size(); ++i)
            if (con.mean_coeff_v[i] != 0.0)
                Gtrips.emplace_back(s0, L.v_offset + i, con.mean_coeff_v[i] / q);
        if (gate_var >= 0) Gtrips.emplace_back(s0, gate_var, big_m / q);

        for (int i = 0; i < nX; ++i) {
            const int ri = add_g_row(con.norm_const[i]);
            if (mean_only) continue;
            for (int k2 = 0; k2 < N; ++k2)
                for (int u = 0; u < n_u; ++u) {
                    const double sd = con.feedback_seed[k2 * n_u + u];
                    if (sd == 0.0) continue;
                    for (int xx = 0; xx < n_x; ++xx) {
                        const double coef = sqrtS(i, k2 * n_x + xx) * sd;
                        if (coef != 0.0)
                            Gtrips.emplace_back(ri, L.k_index(k2, u, xx), -coef);
                    }
                }
        }
        out.gated.push_back({r, column, step, face_idx, big_m,
                             static_cast<int>(P.cones.size())});
        P.cones.push_back({ConeType::SecondOrder, nX + 1, 0, gate_var});
    };

    if (N_R == 1) {
        for (int step = 0; step < N; ++step)
            for (int f = 0; f < static_cast<int>(sc.regions[0].faces.size()); ++f)
                add_region_soc(0, std::max(0, step - 1), f, step, -1);
    } else {
        for (int r = 0; r < N_R; ++r)
            for (int col = 0; col < N - 1; ++col)
                for (int f = 0; f < static_cast<int>(sc.regions[r].faces.size()); ++f)
                    for (int step : {col, col + 1})
                        add_region_soc(r, col, f, step, L.binary_index(r, col));
    }

    // ---- Terminal covariance PSD block (omitted in mean-only mode). ----
    if (!mean_only) {
        Eigen::SelfAdjointEigenSolver<MatrixXd> es(sc.boundary.SigmaN);
        if (es.eigenvalues().minCoeff() <= 0.0)
            throw std::invalid_argument("terminal covariance must be positive definite");
        const MatrixXd Tn = es.operatorInverseSqrt();
        const MatrixXd TS = Tn * sqrtS.middleRows(N * n_x, n_x);    // n_x x nX
        const MatrixXd TB = Tn * ops.calB.middleRows(N * n_x, n_x); // n_x x N n_u
        const int side = n_x + nX;
        const double rt2 = std::sqrt(2.0);
        // svec packing: column-major lower triangle. Row index of entry
        // (i2 >= j2) within the svec of a matrix of this side:
        auto sidx = [&](int i2, int j2) {
            return j2 * side - j2 * (j2 - 1) / 2 + (i2 - j2);
        };
        const int base = grow;
        for (int i = 0; i < svec_dim(side); ++i) add_g_row(0.0);
        for (int d = 0; d < side; ++d) hvals[base + sidx(d, d)] = 1.0;  // identity diagonal
        for (int a = 0; a < n_x; ++a)
            for (int j = 0; j < nX; ++j) {
                const int r = base + sidx(n_x + j, a);
                hvals[r] = rt2 * TS(a, j);
                for (int k2 = 0; k2 < N; ++k2)
                    for (int u = 0; u < n_u; ++u) {
                        const double bu = TB(a, k2 * n_u + u);
                        if (bu == 0.0) continue;
                        for (int xx = 0; xx < n_x; ++xx) {
                            const double coef = bu * sqrtS(k2 * n_x + xx, j);
                            if (coef != 0.0)
                                Gtrips.emplace_back(r, L.k_index(k2, u, xx), -rt2 * coef);
                        }
                    }
            }
        P.cones.push_back({ConeType::PositiveSemidefinite, svec_dim(side), side, -1});
    }

    // ---- Equalities: terminal mean, assignment columns. ----
    int arow = 0;
    {
        const MatrixXd EB = ops.calB.middleRows(N * n_x, n_x);
        const VectorXd rhs = sc.boundary.muN - Amu0.segment(N * n_x, n_x);
        for (int i = 0; i < n_x; ++i) {
            for (int j = 0; j < L.num_v(); ++j)
                if (EB(i, j) != 0.0) Atrips.emplace_back(arow, L.v_offset + j, EB(i, j));
            bvals.push_back(rhs[i]);
            ++arow;
        }
    }
    for (int col = 0; col < L.num_binary_cols(); ++col) {
        for (int r = 0; r < N_R; ++r)
            Atrips.emplace_back(arow, L.binary_index(r, col), 1.0);
        bvals.push_back(1.0);
        ++arow;
    }

    P.A = SparseMat(arow, L.num_vars);
    P.A.setFromTriplets(Atrips.begin(), Atrips.end());
    P.b = Eigen::Map<VectorXd>(bvals.data(), bvals.size());
    P.G = SparseMat(grow, L.num_vars);
    P.G.setFromTriplets(Gtrips.begin(), Gtrips.end());
    P.h = Eigen::Map<VectorXd>(hvals.data(), hvals.size());
    P.check_consistent();
    return out;
}

}  // namespace covsteer
