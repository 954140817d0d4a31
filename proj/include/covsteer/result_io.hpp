#pragma once

#include <string>

#include "covsteer/environment.hpp"
#include "covsteer/solver.hpp"

namespace covsteer {

/// Self-contained solve result: provenance (scenario path and digest), solver
/// options and outcome, the affine policy, the region schedule, and the
/// closed-form per-step means and covariance blocks.
struct ResultDocument {
    std::string scenario_path;
    std::string scenario_digest;  // FNV-1a 64-bit hex of the canonical scenario JSON
    bool mean_only = false;

    double gap_tol = 1e-6;
    long node_limit = 0;
    double time_limit = 0.0;
    std::string search = "best";

    MipStatus status = MipStatus::Error;
    double objective = 0.0;
    double gap = 0.0;
    long nodes = 0;
    double wall_time = 0.0;
    std::string message;

    Policy policy;
    Eigen::MatrixXi schedule;  // N_R x (N-1); empty when N_R == 1

    // Closed-form moments under the policy: row k of `means` is Xbar_k,
    // covariances[k] is the k-th diagonal block of Sigma_X.
    MatrixXd means;
    std::vector<MatrixXd> covariances;
};

/// Digest of the canonical (serialized) scenario JSON, for pairing results
/// with the scenario they were solved from.
std::string scenario_digest(const Scenario& scenario);

/// Builds a document from a solve outcome; fills moments from the policy.
ResultDocument make_result_document(const Scenario& scenario,
                                    const std::string& scenario_path,
                                    bool mean_only, const SolveOptions& options,
                                    const SolveResult& result);

std::string result_to_json(const ResultDocument& doc);
ResultDocument parse_result(const std::string& json_text);

void save_result(const ResultDocument& doc, const std::string& path);
ResultDocument load_result(const std::string& path);

}  // namespace covsteer
