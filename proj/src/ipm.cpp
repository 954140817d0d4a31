#include "covsteer/conic.hpp"

#include <Eigen/Cholesky>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <memory>
#include <stdexcept>

namespace covsteer {

int svec_dim(int side) { return side * (side + 1) / 2; }

VectorXd svec(const MatrixXd& M) {
    const int n = static_cast<int>(M.rows());
    VectorXd v(svec_dim(n));
    const double rt2 = std::sqrt(2.0);
    int off = 0;
    for (int j = 0; j < n; ++j)
        for (int i = j; i < n; ++i) v[off++] = (i == j) ? M(i, j) : rt2 * M(i, j);
    return v;
}

MatrixXd smat(const VectorXd& v, int side) {
    MatrixXd M(side, side);
    const double inv_rt2 = 1.0 / std::sqrt(2.0);
    int off = 0;
    for (int j = 0; j < side; ++j)
        for (int i = j; i < side; ++i) {
            const double x = (i == j) ? v[off] : inv_rt2 * v[off];
            M(i, j) = x;
            M(j, i) = x;
            ++off;
        }
    return M;
}

std::string to_string(SolveStatus s) {
    switch (s) {
        case SolveStatus::Optimal: return "optimal";
        case SolveStatus::Infeasible: return "infeasible";
        case SolveStatus::Unbounded: return "unbounded";
        default: return "numerical_failure";
    }
}

void ConicProgram::check_consistent() const {
    if (c.size() != num_vars) throw std::invalid_argument("conic: c size");
    if (A.cols() != num_vars || A.rows() != b.size())
        throw std::invalid_argument("conic: equality shape");
    if (G.cols() != num_vars || G.rows() != h.size())
        throw std::invalid_argument("conic: cone shape");
    int rows = 0;
    for (const auto& cb : cones) {
        if (cb.dim <= 0) throw std::invalid_argument("conic: empty cone block");
        if (cb.type == ConeType::PositiveSemidefinite && svec_dim(cb.side) != cb.dim)
            throw std::invalid_argument("conic: PSD svec dimension mismatch");
        if (cb.type == ConeType::SecondOrder && cb.dim < 2)
            throw std::invalid_argument("conic: SOC dimension must be >= 2");
        rows += cb.dim;
    }
    if (rows != h.size()) throw std::invalid_argument("conic: cone rows do not sum to h");
}

namespace {

struct SparseRow {
    std::vector<std::pair<int, double>> entries;  // (column, value)
};

// Program-level precomputation shared by all branch-and-bound nodes.
struct BlockData {
    ConeBlock meta;
    int row0 = 0;              // row offset in the base program
    // Orthant: per-row sparse coefficients.
    std::vector<SparseRow> rows;
    // SOC / PSD: dense local block over the active columns.
    std::vector<int> cols;
    MatrixXd Gloc;             // dim x nloc
    MatrixXd GtJG;             // SOC only: Gloc' J Gloc (nloc x nloc)
};

}  // namespace

class PreparedProgram {
  public:
    int n = 0;       // variables
    int p = 0;       // equalities
    VectorXd c;
    MatrixXd A;      // dense, p x n
    VectorXd b;
    VectorXd h;      // base right-hand side for all cone rows
    std::vector<BlockData> blocks;

    explicit PreparedProgram(const ConicProgram& prog) {
        prog.check_consistent();
        n = prog.num_vars;
        p = static_cast<int>(prog.b.size());
        c = prog.c;
        A = MatrixXd(prog.A);
        b = prog.b;
        h = prog.h;
        SparseMat Grow = prog.G;  // row-major iteration via transpose views is
        Grow.makeCompressed();    // awkward; gather per-row entries once here.
        std::vector<SparseRow> all_rows(prog.G.rows());
        for (int k = 0; k < Grow.outerSize(); ++k)
            for (SparseMat::InnerIterator it(Grow, k); it; ++it)
                all_rows[it.row()].entries.emplace_back(it.col(), it.value());

        int row0 = 0;
        for (const auto& cb : prog.cones) {
            BlockData bd;
            bd.meta = cb;
            bd.row0 = row0;
            if (cb.type == ConeType::NonNegative) {
                bd.rows.assign(all_rows.begin() + row0, all_rows.begin() + row0 + cb.dim);
            } else {
                std::vector<char> used(n, 0);
                for (int r = 0; r < cb.dim; ++r)
                    for (const auto& [col, val] : all_rows[row0 + r].entries) used[col] = 1;
                for (int j = 0; j < n; ++j)
                    if (used[j]) bd.cols.push_back(j);
                std::vector<int> local(n, -1);
                for (size_t j = 0; j < bd.cols.size(); ++j) local[bd.cols[j]] = (int)j;
                bd.Gloc = MatrixXd::Zero(cb.dim, (int)bd.cols.size());
                for (int r = 0; r < cb.dim; ++r)
                    for (const auto& [col, val] : all_rows[row0 + r].entries)
                        bd.Gloc(r, local[col]) = val;
                if (cb.type == ConeType::SecondOrder) {
                    // J = diag(1, -1, ..., -1)
                    bd.GtJG = bd.Gloc.row(0).transpose() * bd.Gloc.row(0) -
                              bd.Gloc.bottomRows(cb.dim - 1).transpose() *
                                  bd.Gloc.bottomRows(cb.dim - 1);
                }
            }
            row0 += cb.dim;
            blocks.push_back(std::move(bd));
        }
    }
};

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Nesterov-Todd scaling state for one cone block.
struct Scaling {
    // orthant
    VectorXd d;       // s_i / z_i  (W^2 diagonal)
    // SOC
    double eta = 1.0;
    VectorXd wbar;
    // PSD
    MatrixXd R, Rinv;
    // all
    VectorXd lambda;  // scaled point, lambda = W z = W^{-T} s
};

struct ActiveBlock {
    const BlockData* data = nullptr;
    int off = 0;  // row offset in the active (node-local) stacking
};

// SOC helpers -----------------------------------------------------------

VectorXd soc_wbar_apply(const VectorXd& wbar, const VectorXd& v) {
    const int d = static_cast<int>(v.size());
    const double w0 = wbar[0];
    const auto w1 = wbar.tail(d - 1);
    const auto v1 = v.tail(d - 1);
    const double w1v1 = w1.dot(v1);
    VectorXd out(d);
    out[0] = w0 * v[0] + w1v1;
    out.tail(d - 1) = v1 + (v[0] + w1v1 / (1.0 + w0)) * w1;
    return out;
}

VectorXd soc_wbar_inv_apply(const VectorXd& wbar, const VectorXd& v) {
    const int d = static_cast<int>(v.size());
    const double w0 = wbar[0];
    const auto w1 = wbar.tail(d - 1);
    const auto v1 = v.tail(d - 1);
    const double w1v1 = w1.dot(v1);
    VectorXd out(d);
    out[0] = w0 * v[0] - w1v1;
    out.tail(d - 1) = v1 + (-v[0] + w1v1 / (1.0 + w0)) * w1;
    return out;
}

double soc_residual(const VectorXd& v) { return v[0] - v.tail(v.size() - 1).norm(); }

// Largest alpha >= 0 with s + alpha ds staying in the Lorentz cone.
double soc_step_to_boundary(const VectorXd& s, const VectorXd& ds) {
    const int d = static_cast<int>(s.size());
    const auto s1 = s.tail(d - 1);
    const auto d1 = ds.tail(d - 1);
    const double a = ds[0] * ds[0] - d1.squaredNorm();
    const double b = 2.0 * (s[0] * ds[0] - s1.dot(d1));
    const double c = s[0] * s[0] - s1.squaredNorm();
    double alpha = kInf;
    if (std::abs(a) < 1e-14 * (1.0 + std::abs(b))) {
        if (b < 0.0) alpha = -c / b;
    } else {
        const double disc = b * b - 4.0 * a * c;
        if (disc >= 0.0) {
            const double sq = std::sqrt(disc);
            const double r1 = (-b - sq) / (2.0 * a);
            const double r2 = (-b + sq) / (2.0 * a);
            const double lo = std::min(r1, r2), hi = std::max(r1, r2);
            if (lo > 0.0)
                alpha = lo;
            else if (hi > 0.0 && a < 0.0)
                alpha = hi;
            else if (hi > 0.0 && lo <= 0.0 && c <= 0.0)
                alpha = hi;
        }
    }
    if (ds[0] < 0.0) alpha = std::min(alpha, -s[0] / ds[0]);
    return alpha;
}

double psd_min_eig(const MatrixXd& M) {
    Eigen::SelfAdjointEigenSolver<MatrixXd> eig(M, Eigen::EigenvaluesOnly);
    return eig.eigenvalues().minCoeff();
}

MatrixXd psd_chol(const MatrixXd& M) {
    // Cholesky with an eigenvalue-based fallback for nearly singular iterates.
    Eigen::LLT<MatrixXd> llt(M);
    if (llt.info() == Eigen::Success) return llt.matrixL();
    Eigen::SelfAdjointEigenSolver<MatrixXd> eig(M);
    VectorXd lam = eig.eigenvalues().cwiseMax(1e-14 * (1.0 + eig.eigenvalues().maxCoeff()));
    MatrixXd B = eig.eigenvectors() * lam.cwiseSqrt().asDiagonal();
    Eigen::HouseholderQR<MatrixXd> qr(B.transpose());
    MatrixXd Rq = qr.matrixQR().topRows(M.rows()).triangularView<Eigen::Upper>();
    return Rq.transpose();
}

// The HSD interior-point engine over an active view of a prepared program.
class HsdSolver {
  public:
    HsdSolver(const PreparedProgram& prep, const NodeOverride& node,
              const ConicSolveOptions& opts)
        : prep_(prep), opts_(opts) {
        std::vector<char> skip(prep.blocks.size(), 0);
        for (int idx : node.skip_cones) skip[idx] = 1;
        int off = 0;
        for (size_t i = 0; i < prep.blocks.size(); ++i) {
            if (skip[i]) continue;
            active_.push_back({&prep.blocks[i], off});
            off += prep.blocks[i].meta.dim;
        }
        m_ = off;
        h_ = VectorXd(m_);
        for (const auto& ab : active_)
            h_.segment(ab.off, ab.data->meta.dim) =
                prep.h.segment(ab.data->row0, ab.data->meta.dim);
        for (const auto& [row, val] : node.h_edits) {
            for (const auto& ab : active_) {
                if (row >= ab.data->row0 && row < ab.data->row0 + ab.data->meta.dim) {
                    h_[ab.off + (row - ab.data->row0)] = val;
                    break;
                }
            }
        }
        nu_ = 0.0;
        for (const auto& ab : active_) {
            switch (ab.data->meta.type) {
                case ConeType::NonNegative: nu_ += ab.data->meta.dim; break;
                case ConeType::SecondOrder: nu_ += 1.0; break;
                case ConeType::PositiveSemidefinite: nu_ += ab.data->meta.side; break;
            }
        }
    }

    ConicSolution run();

  private:
    const PreparedProgram& prep_;
    ConicSolveOptions opts_;
    std::vector<ActiveBlock> active_;
    int m_ = 0;
    double nu_ = 0.0;
    VectorXd h_;

    std::vector<Scaling> scal_;
    MatrixXd Hfac_work_;
    Eigen::LDLT<MatrixXd> Hldlt_;
    MatrixXd HinvAt_;
    Eigen::LDLT<MatrixXd> Sldlt_;

    VectorXd matvec_G(const VectorXd& x) const {
        VectorXd out = VectorXd::Zero(m_);
        for (const auto& ab : active_) {
            const auto& bd = *ab.data;
            if (bd.meta.type == ConeType::NonNegative) {
                for (int r = 0; r < bd.meta.dim; ++r) {
                    double acc = 0.0;
                    for (const auto& [col, val] : bd.rows[r].entries) acc += val * x[col];
                    out[ab.off + r] = acc;
                }
            } else {
                VectorXd xl(bd.cols.size());
                for (size_t j = 0; j < bd.cols.size(); ++j) xl[j] = x[bd.cols[j]];
                out.segment(ab.off, bd.meta.dim) = bd.Gloc * xl;
            }
        }
        return out;
    }

    VectorXd matvec_Gt(const VectorXd& z) const {
        VectorXd out = VectorXd::Zero(prep_.n);
        for (const auto& ab : active_) {
            const auto& bd = *ab.data;
            if (bd.meta.type == ConeType::NonNegative) {
                for (int r = 0; r < bd.meta.dim; ++r) {
                    const double zr = z[ab.off + r];
                    if (zr == 0.0) continue;
                    for (const auto& [col, val] : bd.rows[r].entries) out[col] += val * zr;
                }
            } else {
                VectorXd contrib =
                    bd.Gloc.transpose() * z.segment(ab.off, bd.meta.dim);
                for (size_t j = 0; j < bd.cols.size(); ++j) out[bd.cols[j]] += contrib[j];
            }
        }
        return out;
    }

    // --- per-block cone algebra, dispatching on type --------------------

    void set_identity(VectorXd& v) const {
        for (const auto& ab : active_) {
            const auto& meta = ab.data->meta;
            auto seg = v.segment(ab.off, meta.dim);
            switch (meta.type) {
                case ConeType::NonNegative: seg.setOnes(); break;
                case ConeType::SecondOrder:
                    seg.setZero();
                    seg[0] = 1.0;
                    break;
                case ConeType::PositiveSemidefinite:
                    seg = svec(MatrixXd::Identity(meta.side, meta.side));
                    break;
            }
        }
    }

    // Minimum "eigenvalue" of v with respect to the cone, blockwise.
    double min_eig(const VectorXd& v) const {
        double lo = kInf;
        for (const auto& ab : active_) {
            const auto& meta = ab.data->meta;
            const auto seg = v.segment(ab.off, meta.dim);
            switch (meta.type) {
                case ConeType::NonNegative: lo = std::min(lo, seg.minCoeff()); break;
                case ConeType::SecondOrder: lo = std::min(lo, soc_residual(seg)); break;
                case ConeType::PositiveSemidefinite:
                    lo = std::min(lo, psd_min_eig(smat(seg, meta.side)));
                    break;
            }
        }
        return lo;
    }

    bool compute_scalings(const VectorXd& s, const VectorXd& z) {
        scal_.resize(active_.size());
        for (size_t i = 0; i < active_.size(); ++i) {
            const auto& ab = active_[i];
            const auto& meta = ab.data->meta;
            const auto sseg = s.segment(ab.off, meta.dim);
            const auto zseg = z.segment(ab.off, meta.dim);
            Scaling& sc = scal_[i];
            switch (meta.type) {
                case ConeType::NonNegative: {
                    sc.d = sseg.cwiseQuotient(zseg);
                    sc.lambda = sseg.cwiseProduct(zseg).cwiseSqrt();
                    if (!(sc.d.allFinite()) || sc.d.minCoeff() <= 0.0) return false;
                    break;
                }
                case ConeType::SecondOrder: {
                    const double a = sseg[0] * sseg[0] -
                                     sseg.tail(meta.dim - 1).squaredNorm();
                    const double bq = zseg[0] * zseg[0] -
                                      zseg.tail(meta.dim - 1).squaredNorm();
                    if (!(a > 0.0 && bq > 0.0)) return false;
                    const VectorXd sbar = sseg / std::sqrt(a);
                    const VectorXd zbar = zseg / std::sqrt(bq);
                    const double gamma = std::sqrt((1.0 + sbar.dot(zbar)) / 2.0);
                    VectorXd wbar(meta.dim);
                    wbar[0] = (sbar[0] + zbar[0]) / (2.0 * gamma);
                    wbar.tail(meta.dim - 1) =
                        (sbar.tail(meta.dim - 1) - zbar.tail(meta.dim - 1)) /
                        (2.0 * gamma);
                    sc.wbar = wbar;
                    sc.eta = std::pow(a / bq, 0.25);
                    sc.lambda = sc.eta * soc_wbar_apply(wbar, zseg);
                    break;
                }
                case ConeType::PositiveSemidefinite: {
                    const MatrixXd S = smat(sseg, meta.side);
                    const MatrixXd Z = smat(zseg, meta.side);
                    const MatrixXd Ls = psd_chol(S);
                    const MatrixXd Lz = psd_chol(Z);
                    Eigen::JacobiSVD<MatrixXd> svd(Lz.transpose() * Ls,
                                                   Eigen::ComputeThinU |
                                                       Eigen::ComputeThinV);
                    VectorXd sig = svd.singularValues();
                    if (sig.minCoeff() <= 0.0) return false;
                    const VectorXd isqrt = sig.cwiseSqrt().cwiseInverse();
                    sc.R = Ls * svd.matrixV() * isqrt.asDiagonal();
                    sc.Rinv = isqrt.asDiagonal() * svd.matrixU().transpose() *
                              Lz.transpose();
                    sc.lambda = VectorXd(meta.dim);
                    // lambda matrix is diag(sig); store as svec.
                    sc.lambda = svec(MatrixXd(sig.asDiagonal()));
                    break;
                }
            }
        }
        return true;
    }

    VectorXd lambda_vec() const {
        VectorXd l(m_);
        for (size_t i = 0; i < active_.size(); ++i)
            l.segment(active_[i].off, active_[i].data->meta.dim) = scal_[i].lambda;
        return l;
    }

    enum class Op { W, Wt, WinvT, WtW_inv_from_raw };

    // Apply W to a vector, blockwise.
    VectorXd apply_W(const VectorXd& v) const { return apply(v, Op::W); }
    VectorXd apply_Wt(const VectorXd& v) const { return apply(v, Op::Wt); }
    VectorXd apply_WinvT(const VectorXd& v) const { return apply(v, Op::WinvT); }

    VectorXd apply(const VectorXd& v, Op op) const {
        VectorXd out(m_);
        for (size_t i = 0; i < active_.size(); ++i) {
            const auto& ab = active_[i];
            const auto& meta = ab.data->meta;
            const Scaling& sc = scal_[i];
            const auto seg = v.segment(ab.off, meta.dim);
            auto oseg = out.segment(ab.off, meta.dim);
            switch (meta.type) {
                case ConeType::NonNegative: {
                    const VectorXd w = sc.d.cwiseSqrt();
                    if (op == Op::WinvT)
                        oseg = seg.cwiseQuotient(w);
                    else
                        oseg = seg.cwiseProduct(w);
                    break;
                }
                case ConeType::SecondOrder: {
                    if (op == Op::WinvT)
                        oseg = soc_wbar_inv_apply(sc.wbar, seg) / sc.eta;
                    else
                        oseg = sc.eta * soc_wbar_apply(sc.wbar, seg);
                    break;
                }
                case ConeType::PositiveSemidefinite: {
                    const MatrixXd M = smat(seg, meta.side);
                    if (op == Op::W)
                        oseg = svec(sc.R.transpose() * M * sc.R);
                    else if (op == Op::Wt)
                        oseg = svec(sc.R * M * sc.R.transpose());
                    else  // W^{-T}
                        oseg = svec(sc.Rinv * M * sc.Rinv.transpose());
                    break;
                }
            }
        }
        return out;
    }

    // (W'W)^{-1} v, blockwise.
    VectorXd apply_WtW_inv(const VectorXd& v) const {
        VectorXd out(m_);
        for (size_t i = 0; i < active_.size(); ++i) {
            const auto& ab = active_[i];
            const auto& meta = ab.data->meta;
            const Scaling& sc = scal_[i];
            const auto seg = v.segment(ab.off, meta.dim);
            auto oseg = out.segment(ab.off, meta.dim);
            switch (meta.type) {
                case ConeType::NonNegative:
                    oseg = seg.cwiseQuotient(sc.d);
                    break;
                case ConeType::SecondOrder: {
                    // (W^2)^{-1} = eta^{-2} (2 (J wbar)(J wbar)' - J)
                    const int d = meta.dim;
                    VectorXd jw(d);
                    jw[0] = sc.wbar[0];
                    jw.tail(d - 1) = -sc.wbar.tail(d - 1);
                    VectorXd jv(d);
                    jv[0] = seg[0];
                    jv.tail(d - 1) = -seg.tail(d - 1);
                    oseg = (2.0 * sc.wbar.dot(jv) * jw - jv) / (sc.eta * sc.eta);
                    break;
                }
                case ConeType::PositiveSemidefinite: {
                    const MatrixXd Pinv = sc.Rinv.transpose() * sc.Rinv;
                    oseg = svec(Pinv * smat(seg, meta.side) * Pinv);
                    break;
                }
            }
        }
        return out;
    }

    // Jordan product u o v, blockwise.
    VectorXd jordan(const VectorXd& u, const VectorXd& v) const {
        VectorXd out(m_);
        for (size_t i = 0; i < active_.size(); ++i) {
            const auto& ab = active_[i];
            const auto& meta = ab.data->meta;
            const auto us = u.segment(ab.off, meta.dim);
            const auto vs = v.segment(ab.off, meta.dim);
            auto oseg = out.segment(ab.off, meta.dim);
            switch (meta.type) {
                case ConeType::NonNegative:
                    oseg = us.cwiseProduct(vs);
                    break;
                case ConeType::SecondOrder:
                    oseg[0] = us.dot(vs);
                    oseg.tail(meta.dim - 1) = us[0] * vs.tail(meta.dim - 1) +
                                              vs[0] * us.tail(meta.dim - 1);
                    break;
                case ConeType::PositiveSemidefinite: {
                    const MatrixXd U = smat(us, meta.side);
                    const MatrixXd V = smat(vs, meta.side);
                    oseg = svec(0.5 * (U * V + V * U));
                    break;
                }
            }
        }
        return out;
    }

    // Solve lambda o u = v for u, blockwise (lambda from the current scaling).
    VectorXd jordan_div_lambda(const VectorXd& v) const {
        VectorXd out(m_);
        for (size_t i = 0; i < active_.size(); ++i) {
            const auto& ab = active_[i];
            const auto& meta = ab.data->meta;
            const Scaling& sc = scal_[i];
            const auto vs = v.segment(ab.off, meta.dim);
            auto oseg = out.segment(ab.off, meta.dim);
            switch (meta.type) {
                case ConeType::NonNegative:
                    oseg = vs.cwiseQuotient(sc.lambda);
                    break;
                case ConeType::SecondOrder: {
                    const int d = meta.dim;
                    const auto l = sc.lambda;
                    const double det = l[0] * l[0] - l.tail(d - 1).squaredNorm();
                    const double u0 = (l[0] * vs[0] - l.tail(d - 1).dot(vs.tail(d - 1))) / det;
                    oseg[0] = u0;
                    oseg.tail(d - 1) = (vs.tail(d - 1) - u0 * l.tail(d - 1)) / l[0];
                    break;
                }
                case ConeType::PositiveSemidefinite: {
                    // lambda matrix is diagonal, so the Lyapunov solve is
                    // elementwise in matrix coordinates.
                    const MatrixXd V = smat(vs, meta.side);
                    const MatrixXd L = smat(sc.lambda, meta.side);
                    MatrixXd U(meta.side, meta.side);
                    for (int r = 0; r < meta.side; ++r)
                        for (int cidx = 0; cidx < meta.side; ++cidx)
                            U(r, cidx) = 2.0 * V(r, cidx) / (L(r, r) + L(cidx, cidx));
                    oseg = svec(U);
                    break;
                }
            }
        }
        return out;
    }

    double step_to_boundary(const VectorXd& v, const VectorXd& dv) const {
        double alpha = kInf;
        for (const auto& ab : active_) {
            const auto& meta = ab.data->meta;
            const auto vs = v.segment(ab.off, meta.dim);
            const auto ds = dv.segment(ab.off, meta.dim);
            switch (meta.type) {
                case ConeType::NonNegative:
                    for (int r = 0; r < meta.dim; ++r)
                        if (ds[r] < 0.0) alpha = std::min(alpha, -vs[r] / ds[r]);
                    break;
                case ConeType::SecondOrder:
                    alpha = std::min(alpha, soc_step_to_boundary(vs, ds));
                    break;
                case ConeType::PositiveSemidefinite: {
                    const MatrixXd S = smat(vs, meta.side);
                    const MatrixXd D = smat(ds, meta.side);
                    const MatrixXd L = psd_chol(S);
                    const MatrixXd M = L.triangularView<Eigen::Lower>().solve(
                        L.triangularView<Eigen::Lower>().solve(D).transpose());
                    const double lo = psd_min_eig(0.5 * (M + M.transpose()));
                    if (lo < 0.0) alpha = std::min(alpha, -1.0 / lo);
                    break;
                }
            }
        }
        return alpha;
    }

    // Assemble and factor the KKT system for the current scaling.
    bool factor_kkt() {
        const int n = prep_.n;
        MatrixXd H = MatrixXd::Zero(n, n);
        for (size_t i = 0; i < active_.size(); ++i) {
            const auto& bd = *active_[i].data;
            const Scaling& sc = scal_[i];
            switch (bd.meta.type) {
                case ConeType::NonNegative: {
                    for (int r = 0; r < bd.meta.dim; ++r) {
                        const double w = 1.0 / sc.d[r];
                        const auto& es = bd.rows[r].entries;
                        for (const auto& [ci, vi] : es)
                            for (const auto& [cj, vj] : es) H(ci, cj) += w * vi * vj;
                    }
                    break;
                }
                case ConeType::SecondOrder: {
                    const int d = bd.meta.dim;
                    VectorXd jw(d);
                    jw[0] = sc.wbar[0];
                    jw.tail(d - 1) = -sc.wbar.tail(d - 1);
                    const VectorXd u = bd.Gloc.transpose() * jw;
                    const double ie2 = 1.0 / (sc.eta * sc.eta);
                    const int nl = static_cast<int>(bd.cols.size());
                    MatrixXd Hloc = ie2 * (2.0 * u * u.transpose() - bd.GtJG);
                    for (int a = 0; a < nl; ++a)
                        for (int bcol = 0; bcol < nl; ++bcol)
                            H(bd.cols[a], bd.cols[bcol]) += Hloc(a, bcol);
                    break;
                }
                case ConeType::PositiveSemidefinite: {
                    const MatrixXd Pinv = sc.Rinv.transpose() * sc.Rinv;
                    const int nl = static_cast<int>(bd.cols.size());
                    MatrixXd Mloc(bd.meta.dim, nl);
                    for (int j = 0; j < nl; ++j)
                        Mloc.col(j) =
                            svec(Pinv * smat(bd.Gloc.col(j), bd.meta.side) * Pinv);
                    MatrixXd Hloc = bd.Gloc.transpose() * Mloc;
                    Hloc = 0.5 * (Hloc + Hloc.transpose());
                    for (int a = 0; a < nl; ++a)
                        for (int bcol = 0; bcol < nl; ++bcol)
                            H(bd.cols[a], bd.cols[bcol]) += Hloc(a, bcol);
                    break;
                }
            }
        }
        const double reg = 1e-11 * std::max(1.0, H.diagonal().maxCoeff());
        H.diagonal().array() += reg;
        Hldlt_.compute(H);
        if (Hldlt_.info() != Eigen::Success) return false;
        if (prep_.p > 0) {
            HinvAt_ = Hldlt_.solve(prep_.A.transpose());
            MatrixXd S = prep_.A * HinvAt_;
            S = 0.5 * (S + S.transpose());
            S.diagonal().array() += 1e-12 * std::max(1.0, S.diagonal().maxCoeff());
            Sldlt_.compute(S);
            if (Sldlt_.info() != Eigen::Success) return false;
        }
        return true;
    }

    // Solve [0 A' G'; A 0 0; G 0 -W'W] (dx,dy,dz) = (r1, r2, r3).
    void kkt_solve(const VectorXd& r1, const VectorXd& r2, const VectorXd& r3,
                   VectorXd& dx, VectorXd& dy, VectorXd& dz) const {
        const VectorXd w3 = apply_WtW_inv(r3);
        const VectorXd rt = r1 + matvec_Gt(w3);
        if (prep_.p > 0) {
            const VectorXd x0 = Hldlt_.solve(rt);
            dy = Sldlt_.solve(prep_.A * x0 - r2);
            dx = x0 - HinvAt_ * dy;
        } else {
            dy.resize(0);
            dx = Hldlt_.solve(rt);
        }
        dz = apply_WtW_inv(matvec_G(dx) - r3);
    }
};

ConicSolution HsdSolver::run() {
    ConicSolution sol;
    const int n = prep_.n;
    const VectorXd& c = prep_.c;
    const VectorXd& b = prep_.b;

    VectorXd x = VectorXd::Zero(n), y = VectorXd::Zero(prep_.p);
    VectorXd s(m_), z(m_), e(m_);
    set_identity(e);

    // Cold start from two least-squares KKT solves with unit scaling.
    {
        scal_.resize(active_.size());
        VectorXd ones = VectorXd::Ones(m_);
        for (size_t i = 0; i < active_.size(); ++i) {
            const auto& meta = active_[i].data->meta;
            Scaling& sc = scal_[i];
            switch (meta.type) {
                case ConeType::NonNegative:
                    sc.d = VectorXd::Ones(meta.dim);
                    break;
                case ConeType::SecondOrder:
                    sc.eta = 1.0;
                    sc.wbar = VectorXd::Zero(meta.dim);
                    sc.wbar[0] = 1.0;
                    break;
                case ConeType::PositiveSemidefinite:
                    sc.R = MatrixXd::Identity(meta.side, meta.side);
                    sc.Rinv = sc.R;
                    break;
            }
        }
        if (!factor_kkt()) {
            sol.status = SolveStatus::NumericalFailure;
            return sol;
        }
        VectorXd dx, dy, dz;
        kkt_solve(VectorXd::Zero(n), b, h_, dx, dy, dz);
        x = dx;
        if (prep_.p > 0) y = dy;
        s = h_ - matvec_G(x);
        double lo = min_eig(s);
        if (lo <= 0.0) s += (1.0 - lo) * e;
        kkt_solve(-c, VectorXd::Zero(prep_.p), VectorXd::Zero(m_), dx, dy, dz);
        z = matvec_G(dx);
        lo = min_eig(z);
        if (lo <= 0.0) z += (1.0 - lo) * e;
    }
    double tau = 1.0, kappa = 1.0;

    const double norm_b = 1.0 + b.norm();
    const double norm_h = 1.0 + h_.norm();
    const double norm_c = 1.0 + c.norm();

    // Best iterate bookkeeping: dense LDLT noise can stall progress just
    // above the target tolerances, in which case we return the best point
    // seen provided it is within a modest multiple of the request.
    double best_metric = std::numeric_limits<double>::infinity();
    VectorXd best_x;
    double best_obj = 0.0, best_pres = 0.0, best_dres = 0.0, best_gap = 0.0;
    int stall = 0;

    for (int iter = 0; iter < opts_.max_iterations; ++iter) {
        const VectorXd Gx = matvec_G(x);
        const VectorXd Gtz = matvec_Gt(z);
        const VectorXd hrx = (prep_.p > 0 ? VectorXd(prep_.A.transpose() * y) :
                                            VectorXd(VectorXd::Zero(n))) +
                             Gtz + c * tau;
        const VectorXd hry = (prep_.p > 0 ? VectorXd(prep_.A * x - b * tau) :
                                            VectorXd(VectorXd::Zero(0)));
        const VectorXd hrz = s + Gx - h_ * tau;
        const double by = (prep_.p > 0) ? b.dot(y) : 0.0;
        const double hrt = kappa + c.dot(x) + by + h_.dot(z);

        const double gap = s.dot(z);
        const double mu = (gap + tau * kappa) / (nu_ + 1.0);

        const double pcost = c.dot(x) / tau;
        const double dcost = -(by + h_.dot(z)) / tau;
        const double pres = std::max(hry.size() ? hry.norm() / (tau * norm_b) : 0.0,
                                     hrz.norm() / (tau * norm_h));
        const double dres = hrx.norm() / (tau * norm_c);
        const double g = gap / (tau * tau);
        const double relgap = g / std::max(1.0, std::abs(pcost));

        if (opts_.verbose)
            std::printf("it %3d  pcost % .6e dcost % .6e pres %.2e dres %.2e gap %.2e "
                        "tau %.2e kap %.2e\n",
                        iter, pcost, dcost, pres, dres, relgap, tau, kappa);

        sol.iterations = iter;
        sol.primal_residual = pres;
        sol.dual_residual = dres;
        sol.gap = relgap;
        if (pres <= opts_.feas_tol && dres <= opts_.feas_tol && relgap <= opts_.gap_tol) {
            sol.status = SolveStatus::Optimal;
            sol.x = x / tau;
            sol.objective = pcost;
            return sol;
        }
        const double metric = std::max({pres, dres, relgap});
        if (metric < 0.9 * best_metric) {
            best_metric = metric;
            best_x = x / tau;
            best_obj = pcost;
            best_pres = pres;
            best_dres = dres;
            best_gap = relgap;
            stall = 0;
        } else if (++stall >= 8) {
            break;
        }
        // Certificate tests for infeasibility / unboundedness.
        const double denom_p = -(h_.dot(z) + by);
        if (denom_p > 0.0) {
            const VectorXd cert = (prep_.p > 0 ? VectorXd(prep_.A.transpose() * y + Gtz)
                                               : Gtz);
            if (cert.norm() / (denom_p * norm_c) <= opts_.feas_tol) {
                sol.status = SolveStatus::Infeasible;
                return sol;
            }
        }
        const double denom_d = -c.dot(x);
        if (denom_d > 0.0) {
            const double dinf = std::max(
                (prep_.p > 0 ? (prep_.A * x).norm() : 0.0) / norm_b,
                (Gx + s).norm() / norm_h);
            if (dinf / denom_d <= opts_.feas_tol) {
                sol.status = SolveStatus::Unbounded;
                return sol;
            }
        }

        if (!compute_scalings(s, z) || !factor_kkt()) break;
        const VectorXd lambda = lambda_vec();

        // dtau numerator/denominator pieces shared by both passes.
        VectorXd x1, y1, z1;
        kkt_solve(-c, b, h_, x1, y1, z1);
        const double q1 = c.dot(x1) + (prep_.p > 0 ? b.dot(y1) : 0.0) + h_.dot(z1);

        auto direction = [&](double eta_r, const VectorXd& dtilde, double dkt,
                             VectorXd& dx, VectorXd& dy, VectorXd& dz, VectorXd& ds,
                             double& dtau, double& dkappa) {
            VectorXd x2, y2, z2;
            kkt_solve(-eta_r * hrx, -eta_r * hry,
                      -eta_r * hrz - apply_Wt(dtilde), x2, y2, z2);
            const double q2 = c.dot(x2) + (prep_.p > 0 ? b.dot(y2) : 0.0) + h_.dot(z2);
            dtau = (dkt + tau * eta_r * hrt + tau * q2) / (kappa - tau * q1);
            dx = dtau * x1 + x2;
            if (prep_.p > 0) dy = dtau * y1 + y2;
            dz = dtau * z1 + z2;
            ds = apply_Wt(dtilde - apply_W(dz));
            dkappa = -eta_r * hrt - (dtau * q1 + q2);
        };

        // Predictor.
        VectorXd dxa, dya, dza, dsa;
        double dtaua, dkappaa;
        {
            const VectorXd dtilde = -lambda;
            direction(1.0, dtilde, -tau * kappa, dxa, dya, dza, dsa, dtaua, dkappaa);
        }
        double alpha_aff = std::min(step_to_boundary(s, dsa), step_to_boundary(z, dza));
        if (dtaua < 0.0) alpha_aff = std::min(alpha_aff, -tau / dtaua);
        if (dkappaa < 0.0) alpha_aff = std::min(alpha_aff, -kappa / dkappaa);
        alpha_aff = std::min(1.0, alpha_aff);
        const double gap_aff = (s + alpha_aff * dsa).dot(z + alpha_aff * dza) +
                               (tau + alpha_aff * dtaua) * (kappa + alpha_aff * dkappaa);
        double sigma = gap_aff / (gap + tau * kappa);
        sigma = std::pow(std::clamp(sigma, 0.0, 1.0), 3.0);

        // Corrector.
        VectorXd dx, dy, dz, ds;
        double dtau, dkappa;
        {
            const VectorXd corr = jordan(apply_WinvT(dsa), apply_W(dza));
            VectorXd rhs = -jordan(lambda, lambda) - corr + sigma * mu * e;
            const VectorXd dtilde = jordan_div_lambda(rhs);
            const double dkt = -tau * kappa - dtaua * dkappaa + sigma * mu;
            direction(1.0 - sigma, dtilde, dkt, dx, dy, dz, ds, dtau, dkappa);
        }
        double alpha = std::min(step_to_boundary(s, ds), step_to_boundary(z, dz));
        if (dtau < 0.0) alpha = std::min(alpha, -tau / dtau);
        if (dkappa < 0.0) alpha = std::min(alpha, -kappa / dkappa);
        alpha = std::min(1.0, 0.99 * alpha);
        if (!std::isfinite(alpha) || alpha <= 0.0) break;

        x += alpha * dx;
        if (prep_.p > 0) y += alpha * dy;
        z += alpha * dz;
        s += alpha * ds;
        tau += alpha * dtau;
        kappa += alpha * dkappa;
    }
    const double relaxed = 1e3 * std::max(opts_.feas_tol, opts_.gap_tol);
    if (best_x.size() && best_metric <= relaxed) {
        sol.status = SolveStatus::Optimal;
        sol.x = best_x;
        sol.objective = best_obj;
        sol.primal_residual = best_pres;
        sol.dual_residual = best_dres;
        sol.gap = best_gap;
        return sol;
    }
    sol.status = SolveStatus::NumericalFailure;
    sol.x = x / tau;
    sol.objective = c.dot(x) / tau;
    return sol;
}

}  // namespace

std::shared_ptr<PreparedProgram> InteriorPointBackend::prepare(const ConicProgram& p) {
    return std::make_shared<PreparedProgram>(p);
}

ConicSolution InteriorPointBackend::solve_prepared(PreparedProgram& prep,
                                                   const NodeOverride& node,
                                                   const ConicSolveOptions& o) {
    HsdSolver solver(prep, node, o);
    return solver.run();
}

ConicSolution InteriorPointBackend::solve(const ConicProgram& p,
                                          const ConicSolveOptions& o) {
    auto prep = prepare(p);
    return solve_prepared(*prep, NodeOverride{}, o);
}

}  // namespace covsteer
