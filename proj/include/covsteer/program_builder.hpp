#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "covsteer/block_dynamics.hpp"
#include "covsteer/chance.hpp"
#include "covsteer/conic.hpp"
#include "covsteer/environment.hpp"
#include "covsteer/policy.hpp"

namespace covsteer {

/// Index layout of the decision vector of the assembled conic program:
///   [ V (N n_u) | K entries (k-major: (k,u,x) -> k n_u n_x + u n_x + x,
///     omitted in mean-only mode) | t (cost epigraph) |
///     binaries M_{r,k} (column-major: k N_R + r; omitted when N_R = 1) ].
struct DecisionLayout {
    int N = 0, n_x = 0, n_u = 0, N_R = 0;
    bool mean_only = false;

    int v_offset = 0;
    int k_offset = 0;  // == v_offset + N n_u; valid only when !mean_only
    int t_index = 0;
    int binary_offset = 0;  // first binary; binaries exist only when N_R > 1
    int num_vars = 0;

    /// Constant added to the epigraph value to recover J (nonzero only in
    /// mean-only mode, where the covariance cost term is policy-independent).
    double cost_constant = 0.0;

    int num_v() const { return N * n_u; }
    int num_k() const { return mean_only ? 0 : N * n_u * n_x; }
    int num_binary_cols() const { return N_R > 1 ? N - 1 : 0; }
    int num_binaries() const { return num_binary_cols() * N_R; }

    int v_index(int k, int u) const { return v_offset + k * n_u + u; }
    int k_index(int k, int u, int x) const {
        return k_offset + k * n_u * n_x + u * n_x + x;
    }
    int binary_index(int r, int k) const { return binary_offset + k * N_R + r; }

    /// Decode a relaxation/solution vector into a policy (K zero blocks in
    /// mean-only mode).
    Policy decode_policy(const VectorXd& x) const;
};

/// The assembled program together with its layout and the per-(r,k,face,step)
/// constraint metadata used for reporting and solution checking.
struct AssembledProgram {
    ConicProgram program;
    DecisionLayout layout;

    /// One record per gated second-order cone, aligned with the order the
    /// region cones were appended; used for diagnostics and tests.
    struct GatedConstraint {
        int region = 0;
        int column = 0;  // binary column index (gates steps column, column+1)
        int step = 0;    // time index the face constraint applies to
        int face = 0;    // face index within the region
        double big_m = 0.0;
        int cone_index = 0;  // index into program.cones
    };
    std::vector<GatedConstraint> gated;

    MatrixXd sqrtS;  // cached (calA Sigma0 calA' + calD calD')^{1/2}

    /// Human-readable dump of variables, cones, and row counts.
    std::string debug_dump() const;
};

/// Build the full mixed-integer conic program for a scenario. In mean-only
/// mode the feedback variables are dropped (K = 0) and the terminal
/// covariance constraint is omitted.
AssembledProgram assemble(const Scenario& scenario, bool mean_only = false);

}  // namespace covsteer
