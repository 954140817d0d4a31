#include <doctest.h>

#include <fstream>
#include <sstream>
#include <stdexcept>

#include "covsteer/environment.hpp"

using namespace covsteer;

namespace {

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    REQUIRE(in.good());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

std::string scenario_path(const std::string& name) {
    return std::string(SCENARIO_DIR) + "/" + name;
}

}  // namespace

TEST_CASE("all shipped scenarios parse and validate") {
    for (const char* name :
         {"minimal_convex.json", "toy_corridor.json", "infeasible_box.json",
          "doubleslit_wide.json", "doubleslit_narrow.json", "cluttered.json"}) {
        CAPTURE(name);
        Scenario sc = load_scenario(scenario_path(name));
        CHECK(sc.horizon() >= 1);
        CHECK(sc.n_pos() == 2);
        for (const auto& r : sc.regions) {
            REQUIRE(r.certificate.size() == 2);
            CHECK(r.contains(r.certificate, 1e-9));
            CHECK(sc.domain.contains(r.certificate, 1e-9));
        }
    }
}

TEST_CASE("preset expands to the documented double integrator") {
    Scenario sc = load_scenario(scenario_path("minimal_convex.json"));
    REQUIRE(sc.system.n_x == 4);
    REQUIRE(sc.system.n_u == 2);
    const double dt = 0.5;
    MatrixXd A = MatrixXd::Identity(4, 4);
    A(0, 2) = dt;
    A(1, 3) = dt;
    CHECK((sc.system.A[0] - A).norm() == doctest::Approx(0.0).epsilon(1e-14));
    CHECK((sc.system.D[0] - 0.02 * MatrixXd::Identity(4, 4)).norm() ==
          doctest::Approx(0.0).epsilon(1e-14));
}

TEST_CASE("JSON round trip preserves the scenario") {
    Scenario sc = load_scenario(scenario_path("doubleslit_wide.json"));
    Scenario back = parse_scenario(scenario_to_json(sc));
    CHECK(back.system.horizon == sc.system.horizon);
    CHECK((back.boundary.mu0 - sc.boundary.mu0).norm() == 0.0);
    CHECK((back.boundary.SigmaN - sc.boundary.SigmaN).norm() == 0.0);
    CHECK(back.epsilon == sc.epsilon);
    CHECK(back.regions.size() == sc.regions.size());
    CHECK(back.obstacles.size() == sc.obstacles.size());
    CHECK(back.v_hi == sc.v_hi);
    CHECK(back.k_lo == sc.k_lo);
    // Canonical serialization is stable under a round trip.
    CHECK(scenario_to_json(back) == scenario_to_json(sc));
}

TEST_CASE("lift zero-pads a position face into state space") {
    Scenario sc = load_scenario(scenario_path("minimal_convex.json"));
    Halfspace face;
    face.alpha = Eigen::Vector2d(1.0, -2.0);
    face.beta = 3.0;
    const Halfspace lifted = sc.lift(face);
    REQUIRE(lifted.alpha.size() == 4);
    CHECK(lifted.alpha[0] == 1.0);
    CHECK(lifted.alpha[1] == -2.0);
    CHECK(lifted.alpha[2] == 0.0);
    CHECK(lifted.alpha[3] == 0.0);
    CHECK(lifted.beta == 3.0);
}

TEST_CASE("domain box solves the face bounds") {
    Scenario sc = load_scenario(scenario_path("doubleslit_wide.json"));
    VectorXd lo, hi;
    sc.domain_box(lo, hi);
    CHECK(lo[0] == doctest::Approx(-12.0).epsilon(1e-6));
    CHECK(hi[0] == doctest::Approx(2.0).epsilon(1e-6));
    CHECK(lo[1] == doctest::Approx(-6.0).epsilon(1e-6));
    CHECK(hi[1] == doctest::Approx(4.0).epsilon(1e-6));
}

TEST_CASE("validation rejects broken scenarios") {
    const std::string text = read_file(scenario_path("minimal_convex.json"));

    SUBCASE("epsilon outside (0, 0.5)") {
        Scenario sc = parse_scenario(text);
        sc.epsilon = 0.7;
        CHECK_THROWS_AS(sc.validate(), std::invalid_argument);
    }
    SUBCASE("inverted variable bounds") {
        Scenario sc = parse_scenario(text);
        sc.v_lo = 5.0;
        sc.v_hi = -5.0;
        CHECK_THROWS_AS(sc.validate(), std::invalid_argument);
    }
    SUBCASE("position index out of range") {
        Scenario sc = parse_scenario(text);
        sc.position_dims = {0, 7};
        CHECK_THROWS_AS(sc.validate(), std::invalid_argument);
    }
    SUBCASE("region with empty interior") {
        Scenario sc = parse_scenario(text);
        Halfspace f;
        f.alpha = Eigen::Vector2d(1.0, 0.0);
        f.beta = -10.0;  // x <= -10 contradicts the domain x >= -3
        sc.regions[0].faces.push_back(f);
        CHECK_THROWS_AS(sc.validate(), std::invalid_argument);
    }
}

TEST_CASE("decomposition validation certifies the shipped obstacle fields") {
    for (const char* name :
         {"doubleslit_wide.json", "doubleslit_narrow.json", "cluttered.json"}) {
        CAPTURE(name);
        Scenario sc = load_scenario(scenario_path(name));
        const auto report = validate_decomposition(sc, 0.99, 20000);
        CHECK(report.ok);
        CHECK(report.coverage >= 0.99);
    }
}

TEST_CASE("region overlapping an obstacle is a hard error") {
    Scenario sc = load_scenario(scenario_path("doubleslit_wide.json"));
    // Widen the top slit region into the upper wall block.
    sc.regions[1].faces[1].beta = 2.5;
    CHECK_THROWS(validate_decomposition(sc));
}

TEST_CASE("max margin distinguishes empty and full polytopes") {
    std::vector<Halfspace> feasible;
    Halfspace a;
    a.alpha = Eigen::Vector2d(1.0, 0.0);
    a.beta = 1.0;
    feasible.push_back(a);
    a.alpha = Eigen::Vector2d(-1.0, 0.0);
    feasible.push_back(a);
    a.alpha = Eigen::Vector2d(0.0, 1.0);
    feasible.push_back(a);
    a.alpha = Eigen::Vector2d(0.0, -1.0);
    feasible.push_back(a);
    CHECK(polytope_max_margin(feasible, 2, 10.0) == doctest::Approx(1.0).epsilon(1e-6));

    std::vector<Halfspace> empty = feasible;
    a.alpha = Eigen::Vector2d(1.0, 0.0);
    a.beta = -2.0;  // x <= -2 contradicts x >= -1
    empty.push_back(a);
    CHECK(polytope_max_margin(empty, 2, 10.0) < 0.0);
}
