#include <doctest.h>

#include <cmath>

#include "covsteer/chance.hpp"
#include "covsteer/environment.hpp"
#include "covsteer/program_builder.hpp"

using namespace covsteer;

namespace {

std::string scenario_path(const std::string& name) {
    return std::string(SCENARIO_DIR) + "/" + name;
}

}  // namespace

TEST_CASE("layout indexing is contiguous and ordered V, K, t, binaries") {
    Scenario sc = load_scenario(scenario_path("doubleslit_wide.json"));
    AssembledProgram ap = assemble(sc);
    const auto& L = ap.layout;
    CHECK(L.N == 20);
    CHECK(L.n_x == 4);
    CHECK(L.n_u == 2);
    CHECK(L.N_R == 4);
    CHECK(L.num_v() == 40);
    CHECK(L.num_k() == 160);
    CHECK(L.num_binary_cols() == 19);
    CHECK(L.num_binaries() == 76);
    CHECK(L.v_index(0, 0) == 0);
    CHECK(L.k_offset == 40);
    CHECK(L.t_index == 200);
    CHECK(L.binary_offset == 201);
    CHECK(L.num_vars == 277);
    CHECK(L.binary_index(0, 0) == 201);
    CHECK(L.binary_index(3, 18) == 276);
    CHECK(static_cast<int>(ap.program.binary_vars.size()) == 76);
}

TEST_CASE("single-region scenarios carry no integrality marks") {
    Scenario sc = load_scenario(scenario_path("minimal_convex.json"));
    AssembledProgram ap = assemble(sc);
    CHECK(ap.layout.num_binaries() == 0);
    CHECK(ap.program.binary_vars.empty());
    CHECK(ap.gated.empty());
    for (const auto& cone : ap.program.cones) CHECK(cone.gate_var == -1);
}

TEST_CASE("gated cone bookkeeping matches the column structure") {
    Scenario sc = load_scenario(scenario_path("doubleslit_wide.json"));
    AssembledProgram ap = assemble(sc);
    // Per column: each region's faces at two steps. Faces: 1 + 2 + 2 + 1 = 6.
    CHECK(static_cast<int>(ap.gated.size()) == 19 * 6 * 2);
    for (const auto& g : ap.gated) {
        CHECK(g.column >= 0);
        CHECK(g.column < 19);
        CHECK((g.step == g.column || g.step == g.column + 1));
        CHECK(g.big_m > 0.0);
        const auto& cone = ap.program.cones[g.cone_index];
        CHECK(cone.type == ConeType::SecondOrder);
        CHECK(cone.gate_var == ap.layout.binary_index(g.region, g.column));
    }
}

TEST_CASE("assignment equalities force one region per column") {
    Scenario sc = load_scenario(scenario_path("toy_corridor.json"));
    AssembledProgram ap = assemble(sc);
    const auto& L = ap.layout;
    REQUIRE(L.num_binary_cols() == 3);
    // The last rows of A are the column-sum constraints; each should touch
    // exactly the binaries of one column with unit coefficients and b = 1.
    const int m = static_cast<int>(ap.program.b.size());
    const Eigen::SparseMatrix<double, Eigen::RowMajor> Ar(ap.program.A);
    int sum_rows = 0;
    for (int i = 0; i < m; ++i) {
        int touched = 0;
        bool only_unit_binaries = true;
        for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(Ar, i);
             it; ++it) {
            ++touched;
            if (it.col() < L.binary_offset || it.value() != 1.0)
                only_unit_binaries = false;
        }
        if (only_unit_binaries && touched == L.N_R && ap.program.b[i] == 1.0)
            ++sum_rows;
    }
    CHECK(sum_rows == L.num_binary_cols());
}

TEST_CASE("mean-only mode drops feedback variables and adds the cost constant") {
    Scenario sc = load_scenario(scenario_path("minimal_convex.json"));
    AssembledProgram full = assemble(sc, false);
    AssembledProgram mean = assemble(sc, true);
    CHECK(mean.layout.mean_only);
    CHECK(mean.layout.num_k() == 0);
    CHECK(mean.layout.num_vars == mean.layout.num_v() + 1);
    CHECK(full.layout.cost_constant == 0.0);
    // Constant equals the covariance cost of the zero policy.
    const auto ops = assemble_block_operators(sc.system);
    Policy zero = Policy::zero(sc.horizon(), sc.system.n_u, sc.system.n_x);
    const double J_zero = evaluate_cost(ops, sc.boundary, sc.weights, zero);
    VectorXd mu = mean_trajectory(ops, sc.boundary.mu0, zero);
    double mean_part = 0.0;
    for (int k = 0; k < sc.horizon(); ++k)
        mean_part += mu.segment(k * 4, 4).dot(sc.weights.Q_mean[k] * mu.segment(k * 4, 4));
    CHECK(mean.layout.cost_constant ==
          doctest::Approx(J_zero - mean_part).epsilon(1e-9));
}

TEST_CASE("deterministic constraint evaluation matches manual recomputation") {
    Scenario sc = load_scenario(scenario_path("toy_corridor.json"));
    AssembledProgram ap = assemble(sc);
    const auto ops = assemble_block_operators(sc.system);
    // A concrete policy with nonzero feedback.
    Policy p = Policy::zero(sc.horizon(), sc.system.n_u, sc.system.n_x);
    for (int k = 0; k < sc.horizon(); ++k) {
        p.v[k] = VectorXd::Constant(2, 0.1 * (k + 1));
        p.K[k] = MatrixXd::Constant(2, 4, 0.01 * (k + 1));
    }
    const Halfspace face = sc.lift(sc.regions[0].faces[0]);
    const auto con = build_halfspace_constraint(ops, ap.sqrtS, sc.boundary.mu0,
                                                face, 2, sc.epsilon);
    const VectorXd Xbar = mean_trajectory(ops, sc.boundary.mu0, p);
    const MatrixXd SigmaX = state_covariance(ops, sc.boundary.Sigma0, p);
    const double mean = face.alpha.dot(Xbar.segment(2 * 4, 4));
    const double var = face.alpha.dot(SigmaX.block(2 * 4, 2 * 4, 4, 4) * face.alpha);
    const double lhs_expected = mean +
                                inverse_standard_normal_cdf(1.0 - sc.epsilon) *
                                    std::sqrt(var) -
                                face.beta;
    const double lhs = con.evaluate(ap.sqrtS, p.stacked_v(), p.K);
    CHECK(lhs == doctest::Approx(lhs_expected).epsilon(1e-9));
}

TEST_CASE("debug dump mentions the cone inventory") {
    Scenario sc = load_scenario(scenario_path("toy_corridor.json"));
    AssembledProgram ap = assemble(sc);
    const std::string dump = ap.debug_dump();
    CHECK(dump.find("variables") != std::string::npos);
}
