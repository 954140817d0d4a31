#include <doctest.h>

#include "covsteer/environment.hpp"
#include "covsteer/program_builder.hpp"
#include "covsteer/result_io.hpp"
#include "covsteer/solver.hpp"

using namespace covsteer;

namespace {

std::string scenario_path(const std::string& name) {
    return std::string(SCENARIO_DIR) + "/" + name;
}

ResultDocument solved_document(const std::string& name) {
    Scenario sc = load_scenario(scenario_path(name));
    AssembledProgram ap = assemble(sc);
    InteriorPointBackend backend;
    SolveOptions opts;
    const SolveResult res = solve_micp(ap, backend, opts);
    REQUIRE(res.status == MipStatus::Optimal);
    return make_result_document(sc, scenario_path(name), false, opts, res);
}

}  // namespace

TEST_CASE("result documents round trip through JSON losslessly") {
    const ResultDocument doc = solved_document("toy_corridor.json");
    const ResultDocument back = parse_result(result_to_json(doc));

    CHECK(back.scenario_path == doc.scenario_path);
    CHECK(back.scenario_digest == doc.scenario_digest);
    CHECK(back.mean_only == doc.mean_only);
    CHECK(back.status == doc.status);
    CHECK(back.objective == doc.objective);  // exact: JSON doubles round trip
    CHECK(back.gap == doc.gap);
    CHECK(back.nodes == doc.nodes);
    REQUIRE(back.policy.v.size() == doc.policy.v.size());
    for (std::size_t k = 0; k < doc.policy.v.size(); ++k) {
        CHECK((back.policy.v[k] - doc.policy.v[k]).norm() == 0.0);
        CHECK((back.policy.K[k] - doc.policy.K[k]).norm() == 0.0);
    }
    REQUIRE(back.schedule.rows() == doc.schedule.rows());
    CHECK((back.schedule.array() == doc.schedule.array()).all());
    CHECK((back.means - doc.means).norm() == 0.0);
    REQUIRE(back.covariances.size() == doc.covariances.size());
    for (std::size_t k = 0; k < doc.covariances.size(); ++k)
        CHECK((back.covariances[k] - doc.covariances[k]).norm() == 0.0);
}

TEST_CASE("digest is stable and sensitive to scenario content") {
    Scenario sc = load_scenario(scenario_path("toy_corridor.json"));
    const std::string d1 = scenario_digest(sc);
    const std::string d2 = scenario_digest(sc);
    CHECK(d1 == d2);
    CHECK(d1.size() == 16);
    Scenario other = sc;
    other.epsilon = 0.01;
    CHECK(scenario_digest(other) != d1);
}

TEST_CASE("save and load through a file") {
    const ResultDocument doc = solved_document("minimal_convex.json");
    const std::string path = "test_result_io_roundtrip.json";
    save_result(doc, path);
    const ResultDocument back = load_result(path);
    CHECK(back.objective == doc.objective);
    CHECK(back.scenario_digest == doc.scenario_digest);
    std::remove(path.c_str());
}

TEST_CASE("moments recorded in the document match the policy closed forms") {
    const ResultDocument doc = solved_document("minimal_convex.json");
    Scenario sc = load_scenario(scenario_path("minimal_convex.json"));
    const auto ops = assemble_block_operators(sc.system);
    const VectorXd Xbar = mean_trajectory(ops, sc.boundary.mu0, doc.policy);
    const MatrixXd SigmaX = state_covariance(ops, sc.boundary.Sigma0, doc.policy);
    const int n_x = sc.system.n_x;
    REQUIRE(doc.means.rows() == sc.horizon() + 1);
    for (int k = 0; k <= sc.horizon(); ++k) {
        CHECK((doc.means.row(k).transpose() - Xbar.segment(k * n_x, n_x)).norm() <=
              1e-12);
        CHECK((doc.covariances[k] - SigmaX.block(k * n_x, k * n_x, n_x, n_x)).norm() <=
              1e-12);
    }
}
