#include <Eigen/Dense>
#include <vector>

#include "covsteer/conic.hpp"
#include "doctest.h"

using namespace covsteer;

namespace {

ConicProgram make_program(int n, const std::vector<Eigen::Triplet<double>>& a_trip,
                          const VectorXd& b,
                          const std::vector<Eigen::Triplet<double>>& g_trip,
                          const VectorXd& h, std::vector<ConeBlock> cones,
                          const VectorXd& c) {
    ConicProgram p;
    p.num_vars = n;
    p.c = c;
    p.A.resize(b.size(), n);
    p.A.setFromTriplets(a_trip.begin(), a_trip.end());
    p.b = b;
    p.G.resize(h.size(), n);
    p.G.setFromTriplets(g_trip.begin(), g_trip.end());
    p.h = h;
    p.cones = std::move(cones);
    return p;
}

}  // namespace

TEST_CASE("LP with equality and bounds") {
    // min -x0 - 2 x1  s.t. x0 + x1 = 1, 0 <= x <= 1  -> x = (0,1), obj -2
    std::vector<Eigen::Triplet<double>> at{{0, 0, 1.0}, {0, 1, 1.0}};
    VectorXd b(1);
    b << 1.0;
    // rows: x0 >= 0 (s = x0), x1 >= 0, x0 <= 1 (s = 1 - x0), x1 <= 1
    std::vector<Eigen::Triplet<double>> gt{
        {0, 0, -1.0}, {1, 1, -1.0}, {2, 0, 1.0}, {3, 1, 1.0}};
    VectorXd h(4);
    h << 0, 0, 1, 1;
    VectorXd c(2);
    c << -1.0, -2.0;
    auto p = make_program(2, at, b, gt, h, {{ConeType::NonNegative, 4, 0, -1}}, c);

    InteriorPointBackend backend;
    auto sol = backend.solve(p, {});
    REQUIRE(sol.status == SolveStatus::Optimal);
    CHECK(sol.objective == doctest::Approx(-2.0).epsilon(1e-7));
    CHECK(sol.x[0] == doctest::Approx(0.0).epsilon(1e-6));
    CHECK(sol.x[1] == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("SOCP: distance from a point to a line") {
    // min t s.t. ||(x0 - 3, x1 - 4)|| <= t, x0 + x1 = 0.
    // Closest point on x0+x1=0 to (3,4): (-0.5, 0.5), distance sqrt(2)*3.5.
    std::vector<Eigen::Triplet<double>> at{{0, 0, 1.0}, {0, 1, 1.0}};
    VectorXd b = VectorXd::Zero(1);
    // SOC rows: s = (t, x0 - 3, x1 - 4) => h - Gx with h = (0,-3,-4)
    std::vector<Eigen::Triplet<double>> gt{
        {0, 2, -1.0}, {1, 0, -1.0}, {2, 1, -1.0}};
    VectorXd h(3);
    h << 0, -3, -4;
    VectorXd c = VectorXd::Zero(3);
    c[2] = 1.0;
    auto p = make_program(3, at, b, gt, h, {{ConeType::SecondOrder, 3, 0, -1}}, c);

    InteriorPointBackend backend;
    auto sol = backend.solve(p, {});
    REQUIRE(sol.status == SolveStatus::Optimal);
    CHECK(sol.objective == doctest::Approx(3.5 * std::sqrt(2.0)).epsilon(1e-7));
    CHECK(sol.x[0] == doctest::Approx(-0.5).epsilon(1e-5));
    CHECK(sol.x[1] == doctest::Approx(0.5).epsilon(1e-5));
}

TEST_CASE("SDP: largest eigenvalue epigraph") {
    // min t s.t. t I - C >= 0 for fixed symmetric C -> t = lambda_max(C).
    MatrixXd C(3, 3);
    C << 2, 1, 0, 1, 3, 1, 0, 1, 4;
    Eigen::SelfAdjointEigenSolver<MatrixXd> eig(C);
    const double lmax = eig.eigenvalues().maxCoeff();

    // s = svec(t I - C) = h - G t with h = svec(-C), G = -svec(I).
    const VectorXd svec_i = svec(MatrixXd::Identity(3, 3));
    std::vector<Eigen::Triplet<double>> gt;
    for (int i = 0; i < svec_i.size(); ++i)
        if (svec_i[i] != 0.0) gt.emplace_back(i, 0, -svec_i[i]);
    VectorXd h = svec(-C);
    VectorXd c(1);
    c << 1.0;
    auto p = make_program(1, {}, VectorXd(), gt, h,
                          {{ConeType::PositiveSemidefinite, svec_dim(3), 3, -1}}, c);

    InteriorPointBackend backend;
    auto sol = backend.solve(p, {});
    REQUIRE(sol.status == SolveStatus::Optimal);
    CHECK(sol.objective == doctest::Approx(lmax).epsilon(1e-7));
}

TEST_CASE("mixed cones: SOCP with PSD trust region") {
    // min x0 + x1 s.t. ||x|| <= 1 (SOC), diag(x0+1, x1+1) >= 0 (PSD box),
    // optimum at x = -(1,1)/sqrt(2).
    std::vector<Eigen::Triplet<double>> gt;
    // SOC: s = (1, x0, x1)
    gt.emplace_back(1, 0, -1.0);
    gt.emplace_back(2, 1, -1.0);
    // PSD 2x2 diag: svec rows (d0, sqrt2*offdiag, d1)
    gt.emplace_back(3, 0, -1.0);
    gt.emplace_back(5, 1, -1.0);
    VectorXd h(6);
    h << 1, 0, 0, 1, 0, 1;
    VectorXd c(2);
    c << 1, 1;
    auto p = make_program(2, {}, VectorXd(), gt, h,
                          {{ConeType::SecondOrder, 3, 0, -1},
                           {ConeType::PositiveSemidefinite, 3, 2, -1}},
                          c);
    InteriorPointBackend backend;
    auto sol = backend.solve(p, {});
    REQUIRE(sol.status == SolveStatus::Optimal);
    CHECK(sol.objective == doctest::Approx(-std::sqrt(2.0)).epsilon(1e-7));
}

TEST_CASE("infeasible bounds are certified") {
    // x >= 2 and x <= 1 simultaneously.
    std::vector<Eigen::Triplet<double>> gt{{0, 0, -1.0}, {1, 0, 1.0}};
    VectorXd h(2);
    h << -2, 1;
    VectorXd c(1);
    c << 1.0;
    auto p = make_program(1, {}, VectorXd(), gt, h, {{ConeType::NonNegative, 2, 0, -1}}, c);
    InteriorPointBackend backend;
    auto sol = backend.solve(p, {});
    CHECK(sol.status == SolveStatus::Infeasible);
}

TEST_CASE("unbounded problem is certified") {
    // min -x s.t. x >= 0.
    std::vector<Eigen::Triplet<double>> gt{{0, 0, -1.0}};
    VectorXd h = VectorXd::Zero(1);
    VectorXd c(1);
    c << -1.0;
    auto p = make_program(1, {}, VectorXd(), gt, h, {{ConeType::NonNegative, 1, 0, -1}}, c);
    InteriorPointBackend backend;
    auto sol = backend.solve(p, {});
    CHECK(sol.status == SolveStatus::Unbounded);
}

TEST_CASE("node overrides tighten bounds and skip gated cones") {
    // min x0 with 0 <= x0 <= 1 and a gated SOC ||x0 - 5|| <= 0.5 that is
    // dropped at this node; then the same program with the bound rows
    // re-pinned to [1, 1].
    std::vector<Eigen::Triplet<double>> gt{
        {0, 0, -1.0}, {1, 0, 1.0}, {3, 0, -1.0}};
    VectorXd h(4);
    h << 0, 1, 0.5, -5;
    VectorXd c(1);
    c << 1.0;
    auto p = make_program(1, {}, VectorXd(), gt, h,
                          {{ConeType::NonNegative, 2, 0, -1},
                           {ConeType::SecondOrder, 2, 0, 0}},
                          c);
    InteriorPointBackend backend;
    auto prep = backend.prepare(p);

    NodeOverride drop;
    drop.skip_cones = {1};
    auto sol = backend.solve_prepared(*prep, drop, {});
    REQUIRE(sol.status == SolveStatus::Optimal);
    CHECK(sol.objective == doctest::Approx(0.0).epsilon(1e-6));

    NodeOverride pin;
    pin.skip_cones = {1};
    pin.h_edits = {{0, -1.0}};  // lower bound row: s = x - 1
    sol = backend.solve_prepared(*prep, pin, {});
    REQUIRE(sol.status == SolveStatus::Optimal);
    CHECK(sol.objective == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(sol.x[0] == doctest::Approx(1.0).epsilon(1e-6));
}
