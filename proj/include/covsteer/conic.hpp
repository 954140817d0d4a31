#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <memory>
#include <string>
#include <vector>

namespace covsteer {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using SparseMat = Eigen::SparseMatrix<double>;

enum class ConeType { NonNegative, SecondOrder, PositiveSemidefinite };

/// One block of the product cone. For PSD blocks dim is the svec length
/// side*(side+1)/2 with off-diagonal entries scaled by sqrt(2).
struct ConeBlock {
    ConeType type = ConeType::NonNegative;
    int dim = 0;
    int side = 0;      // PSD only
    int gate_var = -1; // big-M gate: block is redundant whenever this binary is 0
};

/// Canonical conic program
///
///   minimize    c' x
///   subject to  A x = b
///               G x + s = h,  s in K
///
/// where K is the product of the declared cone blocks. Binary variables are
/// marked by index; their [0,1] interval bounds are ordinary orthant rows
/// recorded in binary_lo_row / binary_hi_row so a branch-and-bound node can
/// tighten them by editing h alone.
struct ConicProgram {
    int num_vars = 0;
    VectorXd c;
    SparseMat A;
    VectorXd b;
    SparseMat G;
    VectorXd h;
    std::vector<ConeBlock> cones;

    std::vector<int> binary_vars;
    std::vector<int> binary_lo_row;  // row of G encoding  -x_i + s = -lo
    std::vector<int> binary_hi_row;  // row of G encoding   x_i + s =  hi

    int cone_rows() const { return static_cast<int>(h.size()); }
    void check_consistent() const;
};

enum class SolveStatus { Optimal, Infeasible, Unbounded, NumericalFailure };

std::string to_string(SolveStatus s);

struct ConicSolution {
    SolveStatus status = SolveStatus::NumericalFailure;
    VectorXd x;
    double objective = 0.0;
    int iterations = 0;
    double primal_residual = 0.0;
    double dual_residual = 0.0;
    double gap = 0.0;
};

struct ConicSolveOptions {
    double feas_tol = 1e-9;
    double gap_tol = 1e-9;
    int max_iterations = 120;
    bool verbose = false;
};

/// Per-node overrides applied on top of a prepared base program: edited
/// right-hand-side entries of h and cone blocks to skip entirely.
struct NodeOverride {
    std::vector<std::pair<int, double>> h_edits;  // (row, new value)
    std::vector<int> skip_cones;                  // indices into cones
};

class PreparedProgram;

/// Convex conic backend: solves the continuous relaxation of a ConicProgram
/// (integrality marks ignored; binaries carry their interval bound rows).
class ConicBackend {
  public:
    struct Capabilities {
        bool nonnegative = false;
        bool second_order = false;
        bool semidefinite = false;
    };

    virtual ~ConicBackend() = default;
    virtual Capabilities capabilities() const = 0;
    virtual ConicSolution solve(const ConicProgram& p, const ConicSolveOptions& o) = 0;

    /// Factor out the program-dependent precomputation so branch-and-bound
    /// nodes (which differ only in h and skipped gated cones) are cheap.
    virtual std::shared_ptr<PreparedProgram> prepare(const ConicProgram& p) = 0;
    virtual ConicSolution solve_prepared(PreparedProgram& prep, const NodeOverride& node,
                                         const ConicSolveOptions& o) = 0;
};

/// Bundled primal-dual interior-point implementation (homogeneous self-dual
/// embedding with Nesterov-Todd scaling and a Mehrotra corrector) supporting
/// nonnegative, second-order, and positive-semidefinite cones.
class InteriorPointBackend : public ConicBackend {
  public:
    Capabilities capabilities() const override { return {true, true, true}; }
    ConicSolution solve(const ConicProgram& p, const ConicSolveOptions& o) override;
    std::shared_ptr<PreparedProgram> prepare(const ConicProgram& p) override;
    ConicSolution solve_prepared(PreparedProgram& prep, const NodeOverride& node,
                                 const ConicSolveOptions& o) override;
};

// svec packing: symmetric matrix to vector with off-diagonals scaled by
// sqrt(2), so inner products agree with the Frobenius inner product.
VectorXd svec(const MatrixXd& M);
MatrixXd smat(const VectorXd& v, int side);
int svec_dim(int side);

}  // namespace covsteer
