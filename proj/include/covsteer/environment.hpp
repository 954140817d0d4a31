#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "covsteer/block_dynamics.hpp"
#include "covsteer/policy.hpp"

namespace covsteer {

/// Closed half-space { p : alpha' p <= beta } over the position coordinates.
struct Halfspace {
    VectorXd alpha;  // position-space normal (length |position_dims|)
    double beta = 0.0;
    std::string name;  // optional label for diagnostics
};

/// Intersection of half-spaces; nonempty interior certified on scenario load.
struct ConvexRegion {
    std::string name;
    std::vector<Halfspace> faces;
    VectorXd certificate;  // an interior point, filled in by Scenario::validate

    /// True if alpha' p <= beta + tol for every face.
    bool contains(const VectorXd& p, double tol = 0.0) const;
};

/// Obstacles are convex polytopes; used for validation and plotting only,
/// the optimizer consumes regions exclusively.
struct Obstacle {
    std::string name;
    std::vector<Halfspace> faces;

    bool contains(const VectorXd& p, double tol = 0.0) const;
};

struct Scenario {
    std::string name;
    LinearSystemSchedule system;
    GaussianBoundary boundary;
    CostWeights weights;
    double epsilon = 1e-3;  // per-face violation probability bound

    /// Elementwise bounds on the decision variables, broadcast scalars.
    double v_lo = -100.0, v_hi = 100.0;
    double k_lo = -10.0, k_hi = 10.0;

    /// Indices of the position coordinates inside the state vector.
    std::vector<int> position_dims;

    ConvexRegion domain;  // chi_Omega, the overall workspace polytope
    std::vector<ConvexRegion> regions;
    std::vector<Obstacle> obstacles;

    int horizon() const { return system.horizon; }
    int n_pos() const { return static_cast<int>(position_dims.size()); }

    /// Lift a position-space half-space into state space by zero-padding.
    Halfspace lift(const Halfspace& face) const;

    /// Axis-aligned bounding box of the domain polytope (solved by LPs).
    void domain_box(VectorXd& lo, VectorXd& hi) const;

    /// Checks all invariants and fills region/domain certificate points.
    /// Throws std::invalid_argument naming the violated invariant.
    void validate();
};

/// Load / parse a scenario from the JSON schema documented in README.md.
Scenario load_scenario(const std::string& path);
Scenario parse_scenario(const std::string& json_text);
std::string scenario_to_json(const Scenario& scenario);

struct DecompositionReport {
    bool ok = false;
    double coverage = 1.0;  // fraction of sampled free points inside some region
    std::vector<std::string> notes;  // per-check diagnostics
    std::string message;
};

/// Checks that no region interior intersects an obstacle interior (certified
/// by a max-margin feasibility program per pair; overlapping pairs raise a
/// hard error), then estimates how much of the obstacle-free domain the
/// regions cover by rejection sampling. Coverage below `min_coverage` makes
/// the report not ok but does not throw.
DecompositionReport validate_decomposition(const Scenario& scenario,
                                           double min_coverage = 0.99,
                                           int samples = 100000,
                                           std::uint64_t seed = 20240901);

/// Maximum inscribed-ball radius of {a_i' p <= b_i} with the radius capped;
/// strictly positive iff the polytope has nonempty interior. Returns -1 on
/// an infeasible (empty) system. Exposed for tests.
double polytope_max_margin(const std::vector<Halfspace>& faces, int dim, double cap);

}  // namespace covsteer
