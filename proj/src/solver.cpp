#include "covsteer/solver.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <queue>
#include <stdexcept>

namespace covsteer {

std::string to_string(MipStatus s) {
    switch (s) {
        case MipStatus::Optimal: return "optimal";
        case MipStatus::Infeasible: return "infeasible";
        case MipStatus::LimitExceeded: return "limit_exceeded";
        case MipStatus::Error: return "error";
    }
    return "unknown";
}

std::vector<int> SolveResult::region_sequence() const {
    std::vector<int> seq;
    for (int k = 0; k < schedule.cols(); ++k) {
        int pick = -1;
        for (int r = 0; r < schedule.rows(); ++r)
            if (schedule(r, k) == 1) pick = r;
        seq.push_back(pick);
    }
    return seq;
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Node {
    std::vector<signed char> state;  // per binary: -1 free, 0, 1
    double bound = -kInf;
    long id = 0;
};

struct NodeOrder {
    bool operator()(const Node& a, const Node& b) const {
        if (a.bound != b.bound) return a.bound > b.bound;  // min-heap on bound
        return a.id > b.id;                                // deterministic ties
    }
};

/// Eq. (25) propagation: a fixed 1 zeroes its column; a column with all but
/// one variable fixed 0 forces the survivor to 1. Returns false on conflict.
bool propagate(std::vector<signed char>& state, int N_R, int cols) {
    bool changed = true;
    while (changed) {
        changed = false;
        for (int k = 0; k < cols; ++k) {
            int ones = 0, frees = 0, free_r = -1;
            for (int r = 0; r < N_R; ++r) {
                const signed char v = state[k * N_R + r];
                if (v == 1) ++ones;
                if (v == -1) {
                    ++frees;
                    free_r = r;
                }
            }
            if (ones > 1) return false;
            if (ones == 1) {
                for (int r = 0; r < N_R; ++r)
                    if (state[k * N_R + r] == -1) {
                        state[k * N_R + r] = 0;
                        changed = true;
                    }
            } else if (frees == 0) {
                return false;  // all zero, no region for this column
            } else if (frees == 1) {
                state[k * N_R + free_r] = 1;
                changed = true;
            }
        }
    }
    return true;
}

}  // namespace

SolveResult solve_micp(const AssembledProgram& assembled, ConicBackend& backend,
                       const SolveOptions& options) {
    const auto t0 = std::chrono::steady_clock::now();
    auto elapsed = [&] {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    };

    const ConicProgram& P = assembled.program;
    const DecisionLayout& L = assembled.layout;
    const int nb = static_cast<int>(P.binary_vars.size());
    const int N_R = L.N_R, cols = L.num_binary_cols();
    if (options.workers < 1) throw std::invalid_argument("workers must be >= 1");

    SolveResult res;
    res.schedule = Eigen::MatrixXi::Zero(N_R, cols);

    auto prep = backend.prepare(P);

    // Map each gated cone to its binary index for node skipping.
    std::vector<std::vector<int>> cones_of_binary(nb);
    for (size_t ci = 0; ci < P.cones.size(); ++ci) {
        const int gv = P.cones[ci].gate_var;
        if (gv >= 0) cones_of_binary[gv - L.binary_offset].push_back(static_cast<int>(ci));
    }

    auto node_override = [&](const std::vector<signed char>& state) {
        NodeOverride ov;
        for (int i = 0; i < nb; ++i) {
            if (state[i] == 0) {
                ov.h_edits.emplace_back(P.binary_hi_row[i], 0.0);  // m <= 0
                for (int ci : cones_of_binary[i]) ov.skip_cones.push_back(ci);
            } else if (state[i] == 1) {
                ov.h_edits.emplace_back(P.binary_lo_row[i], -1.0);  // -m <= -1
            }
        }
        return ov;
    };

    auto solve_node = [&](const std::vector<signed char>& state) {
        auto ov = node_override(state);
        auto sol = backend.solve_prepared(*prep, ov, options.backend);
        if (sol.status == SolveStatus::NumericalFailure) {
            // Retry once at a tightened tolerance before pruning with warning.
            ConicSolveOptions tight = options.backend;
            tight.max_iterations = 2 * options.backend.max_iterations;
            tight.feas_tol = options.backend.feas_tol * 0.1;
            tight.gap_tol = options.backend.gap_tol * 0.1;
            sol = backend.solve_prepared(*prep, ov, tight);
            if (sol.status == SolveStatus::NumericalFailure)
                res.message += "node pruned after numerical failure; ";
        }
        return sol;
    };

    double incumbent = kInf;
    bool have_incumbent = false;
    VectorXd incumbent_x;

    std::priority_queue<Node, std::vector<Node>, NodeOrder> open;
    std::vector<Node> dfs_stack;
    long next_id = 0;

    auto push_node = [&](Node&& n) {
        if (options.depth_first)
            dfs_stack.push_back(std::move(n));
        else
            open.push(std::move(n));
    };
    auto pop_node = [&]() {
        Node n;
        if (options.depth_first) {
            n = std::move(dfs_stack.back());
            dfs_stack.pop_back();
        } else {
            n = open.top();
            open.pop();
        }
        return n;
    };
    auto have_nodes = [&] {
        return options.depth_first ? !dfs_stack.empty() : !open.empty();
    };

    {
        Node root;
        root.state.assign(nb, -1);
        root.id = next_id++;
        push_node(std::move(root));
    }

    double best_open_bound = -kInf;
    bool limits_hit = false;

    while (have_nodes()) {
        Node node = pop_node();
        ++res.nodes;
        if (res.nodes > options.node_limit || elapsed() > options.time_limit) {
            limits_hit = true;
            best_open_bound = node.bound;
            break;
        }
        if (have_incumbent &&
            node.bound >= incumbent - options.gap_tol * std::max(1.0, std::abs(incumbent)))
            continue;  // pruned by bound

        auto sol = solve_node(node.state);
        if (sol.status == SolveStatus::Infeasible ||
            sol.status == SolveStatus::NumericalFailure)
            continue;
        if (sol.status == SolveStatus::Unbounded)
            throw std::runtime_error("relaxation unbounded; program is malformed");
        const double bound = sol.objective;
        if (options.verbose)
            std::printf("node %ld bound %.8f incumbent %s\n", res.nodes, bound,
                        have_incumbent ? std::to_string(incumbent).c_str() : "none");
        if (have_incumbent &&
            bound >= incumbent - options.gap_tol * std::max(1.0, std::abs(incumbent)))
            continue;

        // Integrality check.
        // Most fractional = closest to 0.5; the ascending scan over the
        // column-major layout breaks ties by earliest column, lowest region.
        int frac_idx = -1;
        double best_closeness = -1.0;
        for (int i = 0; i < nb; ++i) {
            const double v = sol.x[P.binary_vars[i]];
            if (std::abs(v - std::round(v)) <= 1e-6) continue;
            const double closeness = 0.5 - std::abs(v - 0.5);
            if (closeness > best_closeness + 1e-12) {
                best_closeness = closeness;
                frac_idx = i;
            }
        }
        if (frac_idx < 0) {
            // Integer at tolerance. Unless every binary was already fixed,
            // re-solve with the rounded assignment pinned so the incumbent
            // carries no residual big-M slack from m = 1 - O(1e-7).
            double leaf_obj = bound;
            VectorXd leaf_x = sol.x;
            bool all_fixed = true;
            for (int i = 0; i < nb; ++i) all_fixed &= node.state[i] != -1;
            if (!all_fixed && nb > 0) {
                std::vector<signed char> fixed(nb);
                for (int i = 0; i < nb; ++i)
                    fixed[i] = static_cast<signed char>(
                        std::lround(sol.x[P.binary_vars[i]]));
                if (!propagate(fixed, N_R, cols)) continue;
                auto leaf = solve_node(fixed);
                if (leaf.status != SolveStatus::Optimal) continue;
                leaf_obj = leaf.objective;
                leaf_x = leaf.x;
                for (int i = 0; i < nb; ++i) leaf_x[P.binary_vars[i]] = fixed[i];
            }
            if (leaf_obj < incumbent) {
                incumbent = leaf_obj;
                have_incumbent = true;
                incumbent_x = leaf_x;
            }
            continue;
        }

        for (int fix : {1, 0}) {
            Node child;
            child.state = node.state;
            child.state[frac_idx] = static_cast<signed char>(fix);
            if (!propagate(child.state, N_R, cols)) continue;
            child.bound = bound;
            child.id = next_id++;
            push_node(std::move(child));
        }
    }

    res.wall_time = elapsed();
    if (have_incumbent) {
        // Remaining open bound decides the reported gap.
        double open_bound = limits_hit ? best_open_bound : incumbent;
        if (!options.depth_first && !open.empty())
            open_bound = std::min(open_bound, open.top().bound);
        if (options.depth_first)
            for (const auto& n : dfs_stack) open_bound = std::min(open_bound, n.bound);
        if (!std::isfinite(open_bound)) open_bound = incumbent;
        res.gap = std::max(0.0, (incumbent - open_bound) /
                                    std::max(1.0, std::abs(incumbent)));
        res.status = (limits_hit && res.gap > options.gap_tol)
                         ? MipStatus::LimitExceeded
                         : MipStatus::Optimal;
        res.policy = L.decode_policy(incumbent_x);
        res.objective = incumbent + L.cost_constant;
        for (int k = 0; k < cols; ++k)
            for (int r = 0; r < N_R; ++r)
                res.schedule(r, k) =
                    static_cast<int>(std::round(incumbent_x[L.binary_index(r, k)]));
    } else {
        res.status = limits_hit ? MipStatus::LimitExceeded : MipStatus::Infeasible;
        res.gap = kInf;
    }
    return res;
}

}  // namespace covsteer
