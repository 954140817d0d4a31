#pragma once

#include <Eigen/Dense>
#include <memory>
#include <string>

#include "covsteer/conic.hpp"
#include "covsteer/policy.hpp"
#include "covsteer/program_builder.hpp"

namespace covsteer {

enum class MipStatus { Optimal, Infeasible, LimitExceeded, Error };

std::string to_string(MipStatus s);

struct SolveOptions {
    double gap_tol = 1e-6;       // relative bound gap target
    long node_limit = 100000;
    double time_limit = 600.0;   // seconds of wall time
    bool depth_first = false;    // default: best-first by node bound
    int workers = 1;             // accepted for forward compatibility; >= 1
    bool verbose = false;
    ConicSolveOptions backend;
};

struct SolveResult {
    MipStatus status = MipStatus::Error;
    Policy policy;
    Eigen::MatrixXi schedule;  // N_R x (N-1) integer assignment matrix
    double objective = 0.0;    // epigraph value + layout cost constant
    double gap = 0.0;          // relative MIP gap at termination
    long nodes = 0;
    double wall_time = 0.0;
    std::string message;

    /// Region index assigned to each binary column, -1 when no binaries.
    std::vector<int> region_sequence() const;
};

/// Branch-and-bound over the binaries of an assembled program, solving node
/// relaxations with the given conic backend. Deterministic for fixed options
/// in single-worker mode.
SolveResult solve_micp(const AssembledProgram& assembled, ConicBackend& backend,
                       const SolveOptions& options = {});

}  // namespace covsteer
