// covsteer: covariance steering with obstacle avoidance.
//
// Exit codes (all subcommands): 0 success/optimal, 1 error (bad input,
// numerical failure), 2 problem proven infeasible, 3 node/time limit reached
// before the gap target, 4 verification or validation hard check failed.

#include <exception>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "covsteer/environment.hpp"
#include "covsteer/plot.hpp"
#include "covsteer/program_builder.hpp"
#include "covsteer/result_io.hpp"
#include "covsteer/solver.hpp"
#include "covsteer/verify.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitInfeasible = 2;
constexpr int kExitLimit = 3;
constexpr int kExitCheckFailed = 4;

covsteer::Scenario load_validated(const std::string& path) {
    covsteer::Scenario sc = covsteer::load_scenario(path);
    sc.validate();
    return sc;
}

int run_solve(const std::string& scenario_path, const std::string& out_path,
              bool mean_only, covsteer::SolveOptions options) {
    covsteer::Scenario sc = load_validated(scenario_path);
    const auto report = covsteer::validate_decomposition(sc);
    if (!report.ok)
        std::cerr << "warning: " << report.message << "\n";

    covsteer::AssembledProgram assembled = covsteer::assemble(sc, mean_only);
    covsteer::InteriorPointBackend backend;
    const covsteer::SolveResult result =
        covsteer::solve_micp(assembled, backend, options);

    std::cout << "status: " << covsteer::to_string(result.status) << "\n"
              << "objective: " << result.objective << "\n"
              << "gap: " << result.gap << "\n"
              << "nodes: " << result.nodes << "\n"
              << "wall time: " << result.wall_time << " s\n";
    if (!result.message.empty()) std::cout << result.message << "\n";

    if (!out_path.empty()) {
        const auto doc = covsteer::make_result_document(sc, scenario_path,
                                                        mean_only, options, result);
        covsteer::save_result(doc, out_path);
        std::cout << "wrote " << out_path << "\n";
    }
    switch (result.status) {
        case covsteer::MipStatus::Optimal: return kExitOk;
        case covsteer::MipStatus::Infeasible: return kExitInfeasible;
        case covsteer::MipStatus::LimitExceeded: return kExitLimit;
        default: return kExitError;
    }
}

int run_verify(const std::string& result_path, const std::string& scenario_override,
               long samples, std::uint64_t seed) {
    const covsteer::ResultDocument doc = covsteer::load_result(result_path);
    const std::string scenario_path =
        scenario_override.empty() ? doc.scenario_path : scenario_override;
    covsteer::Scenario sc = load_validated(scenario_path);
    if (covsteer::scenario_digest(sc) != doc.scenario_digest)
        std::cerr << "warning: scenario digest mismatch; result may have been "
                     "produced from a different scenario file\n";
    if (doc.policy.v.empty()) {
        std::cerr << "error: result contains no policy to verify\n";
        return kExitError;
    }
    const Eigen::MatrixXi* schedule =
        doc.schedule.size() > 0 ? &doc.schedule : nullptr;
    const auto report = covsteer::verify_policy(sc, doc.policy, samples, seed,
                                                schedule, !doc.mean_only);
    std::cout << report.summary();
    return report.hard_ok ? kExitOk : kExitCheckFailed;
}

int run_plot(const std::string& scenario_path, const std::string& result_path,
             const std::string& out_path) {
    covsteer::Scenario sc = load_validated(scenario_path);
    covsteer::ResultDocument doc;
    const covsteer::ResultDocument* doc_ptr = nullptr;
    if (!result_path.empty()) {
        doc = covsteer::load_result(result_path);
        doc_ptr = &doc;
    }
    covsteer::save_svg(covsteer::render_svg(sc, doc_ptr), out_path);
    std::cout << "wrote " << out_path << "\n";
    return kExitOk;
}

int run_validate(const std::string& scenario_path, double min_coverage,
                 int samples, std::uint64_t seed) {
    covsteer::Scenario sc = load_validated(scenario_path);
    const auto report =
        covsteer::validate_decomposition(sc, min_coverage, samples, seed);
    for (const auto& note : report.notes) std::cout << note << "\n";
    std::cout << "coverage: " << report.coverage << "\n"
              << (report.ok ? "decomposition OK" : report.message) << "\n";
    return report.ok ? kExitOk : kExitCheckFailed;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{
        "Covariance steering with convex-region obstacle avoidance: solves for "
        "an affine feedback policy steering a Gaussian state distribution "
        "between boundary conditions under per-face chance constraints."};
    app.require_subcommand(1);

    // solve
    std::string scenario_path, out_path;
    bool mean_only = false;
    covsteer::SolveOptions options;
    std::string search = "best";
    auto* solve = app.add_subcommand("solve", "Solve a scenario");
    solve->add_option("scenario", scenario_path, "Scenario JSON file")
        ->required()
        ->check(CLI::ExistingFile);
    solve->add_option("-o,--output", out_path, "Write the result JSON here");
    solve->add_flag("--mean-only", mean_only,
                    "Steer only the mean (K = 0, no terminal covariance)");
    solve->add_option("--gap-tol", options.gap_tol, "Relative MIP gap target")
        ->check(CLI::PositiveNumber);
    solve->add_option("--node-limit", options.node_limit, "Max explored nodes")
        ->check(CLI::PositiveNumber);
    solve->add_option("--time-limit", options.time_limit, "Wall-time limit [s]")
        ->check(CLI::PositiveNumber);
    solve->add_option("--search", search, "Node selection: best | depth")
        ->check(CLI::IsMember({"best", "depth"}));
    solve->add_option("--workers", options.workers, "Worker threads (>= 1)")
        ->check(CLI::PositiveNumber);
    solve->add_flag("--verbose", options.verbose, "Per-node progress output");

    // verify
    std::string result_path, scenario_override;
    long samples = 100000;
    std::uint64_t seed = 20240901;
    auto* verify = app.add_subcommand("verify", "Monte Carlo verification of a result");
    verify->add_option("result", result_path, "Result JSON file")
        ->required()
        ->check(CLI::ExistingFile);
    verify->add_option("--scenario", scenario_override,
                       "Scenario file (default: path recorded in the result)");
    verify->add_option("--samples", samples, "Monte Carlo sample count")
        ->check(CLI::PositiveNumber);
    verify->add_option("--seed", seed, "Sampler seed");

    // plot
    std::string plot_scenario, plot_result, plot_out = "plot.svg";
    auto* plot = app.add_subcommand("plot", "Render a scenario (and result) to SVG");
    plot->add_option("scenario", plot_scenario, "Scenario JSON file")
        ->required()
        ->check(CLI::ExistingFile);
    plot->add_option("--result", plot_result, "Result JSON to overlay");
    plot->add_option("-o,--output", plot_out, "Output SVG path");

    // validate
    std::string val_scenario;
    double min_coverage = 0.99;
    int val_samples = 100000;
    std::uint64_t val_seed = 20240901;
    auto* validate = app.add_subcommand("validate", "Check a region decomposition");
    validate->add_option("scenario", val_scenario, "Scenario JSON file")
        ->required()
        ->check(CLI::ExistingFile);
    validate->add_option("--coverage", min_coverage, "Required free-space coverage");
    validate->add_option("--samples", val_samples, "Coverage sample count")
        ->check(CLI::PositiveNumber);
    validate->add_option("--seed", val_seed, "Coverage sampling seed");

    CLI11_PARSE(app, argc, argv);

    try {
        if (solve->parsed()) {
            options.depth_first = (search == "depth");
            return run_solve(scenario_path, out_path, mean_only, options);
        }
        if (verify->parsed()) return run_verify(result_path, scenario_override, samples, seed);
        if (plot->parsed()) return run_plot(plot_scenario, plot_result, plot_out);
        if (validate->parsed())
            return run_validate(val_scenario, min_coverage, val_samples, val_seed);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitError;
    }
    return kExitError;
}
