#include "covsteer/environment.hpp"

#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>

#include "covsteer/conic.hpp"
#include "json.hpp"

namespace covsteer {

namespace {

using nlohmann::json;

bool faces_contain(const std::vector<Halfspace>& faces, const VectorXd& p, double tol) {
    for (const auto& f : faces) {
        if (f.alpha.size() != p.size())
            throw std::invalid_argument("halfspace dimension mismatch in contains()");
        if (f.alpha.dot(p) > f.beta + tol) return false;
    }
    return true;
}

json matrix_to_json(const MatrixXd& M) {
    json rows = json::array();
    for (int i = 0; i < M.rows(); ++i) {
        json row = json::array();
        for (int j = 0; j < M.cols(); ++j) row.push_back(M(i, j));
        rows.push_back(row);
    }
    return rows;
}

json vector_to_json(const VectorXd& v) {
    json out = json::array();
    for (int i = 0; i < v.size(); ++i) out.push_back(v[i]);
    return out;
}

VectorXd vector_from_json(const json& j, const std::string& what) {
    if (!j.is_array()) throw std::invalid_argument(what + ": expected an array");
    VectorXd v(j.size());
    for (size_t i = 0; i < j.size(); ++i) v[i] = j[i].get<double>();
    return v;
}

MatrixXd matrix_from_json(const json& j, const std::string& what) {
    if (!j.is_array() || j.empty())
        throw std::invalid_argument(what + ": expected a matrix");
    // A flat array of numbers is interpreted as a diagonal matrix.
    if (j[0].is_number()) {
        const VectorXd d = vector_from_json(j, what);
        return MatrixXd(d.asDiagonal());
    }
    const size_t rows = j.size(), cols = j[0].size();
    MatrixXd M(rows, cols);
    for (size_t i = 0; i < rows; ++i) {
        if (!j[i].is_array() || j[i].size() != cols)
            throw std::invalid_argument(what + ": ragged rows");
        for (size_t k = 0; k < cols; ++k) M(i, k) = j[i][k].get<double>();
    }
    return M;
}

// Accepts a single matrix (applied to every step) or a list of per-step
// matrices (a 3-D array).
std::vector<MatrixXd> matrix_schedule_from_json(const json& j, int horizon,
                                                const std::string& what) {
    if (!j.is_array() || j.empty())
        throw std::invalid_argument(what + ": expected a matrix or list of matrices");
    if (j[0].is_array() && !j[0].empty() && j[0][0].is_array()) {
        std::vector<MatrixXd> out;
        for (size_t k = 0; k < j.size(); ++k)
            out.push_back(matrix_from_json(j[k], what + "[" + std::to_string(k) + "]"));
        if (static_cast<int>(out.size()) != horizon)
            throw std::invalid_argument(what + ": schedule length does not match horizon");
        return out;
    }
    return std::vector<MatrixXd>(horizon, matrix_from_json(j, what));
}

std::vector<Halfspace> faces_from_json(const json& j, const std::string& what) {
    std::vector<Halfspace> faces;
    for (size_t i = 0; i < j.size(); ++i) {
        Halfspace f;
        f.alpha = vector_from_json(j[i].at("alpha"), what + ".alpha");
        f.beta = j[i].at("beta").get<double>();
        if (j[i].contains("name")) f.name = j[i]["name"].get<std::string>();
        if (f.alpha.norm() == 0.0)
            throw std::invalid_argument(what + ": zero face normal");
        faces.push_back(std::move(f));
    }
    if (faces.empty()) throw std::invalid_argument(what + ": no faces");
    return faces;
}

json faces_to_json(const std::vector<Halfspace>& faces) {
    json out = json::array();
    for (const auto& f : faces) {
        json jf;
        jf["alpha"] = vector_to_json(f.alpha);
        jf["beta"] = f.beta;
        if (!f.name.empty()) jf["name"] = f.name;
        out.push_back(jf);
    }
    return out;
}

/// Solve min/max of coordinate `coord` over {a_i' p <= b_i}.
double polytope_extent(const std::vector<Halfspace>& faces, int dim, int coord,
                       bool maximize) {
    ConicProgram lp;
    lp.num_vars = dim;
    lp.c = VectorXd::Zero(dim);
    lp.c[coord] = maximize ? -1.0 : 1.0;
    lp.A = Eigen::SparseMatrix<double>(0, dim);
    lp.b = VectorXd::Zero(0);
    const int m = static_cast<int>(faces.size());
    lp.G = Eigen::SparseMatrix<double>(m, dim);
    lp.h = VectorXd::Zero(m);
    std::vector<Eigen::Triplet<double>> trips;
    for (int i = 0; i < m; ++i) {
        for (int jx = 0; jx < dim; ++jx)
            if (faces[i].alpha[jx] != 0.0) trips.emplace_back(i, jx, faces[i].alpha[jx]);
        lp.h[i] = faces[i].beta;
    }
    lp.G.setFromTriplets(trips.begin(), trips.end());
    lp.cones.push_back({ConeType::NonNegative, m, 0, -1});
    InteriorPointBackend backend;
    auto sol = backend.solve(lp, {});
    if (sol.status == SolveStatus::Unbounded)
        throw std::invalid_argument("domain polytope is unbounded");
    if (sol.status != SolveStatus::Optimal)
        throw std::runtime_error("domain extent LP failed (" + to_string(sol.status) + ")");
    return sol.x[coord];
}

}  // namespace

double polytope_max_margin(const std::vector<Halfspace>& faces, int dim, double cap) {
    ConicProgram lp;
    lp.num_vars = dim + 1;
    lp.c = VectorXd::Zero(dim + 1);
    lp.c[dim] = -1.0;  // maximize the inscribed radius t
    lp.A = Eigen::SparseMatrix<double>(0, dim + 1);
    lp.b = VectorXd::Zero(0);
    const int m = static_cast<int>(faces.size()) + 1;
    lp.G = Eigen::SparseMatrix<double>(m, dim + 1);
    lp.h = VectorXd::Zero(m);
    std::vector<Eigen::Triplet<double>> trips;
    for (int i = 0; i < m - 1; ++i) {
        const auto& f = faces[i];
        for (int jx = 0; jx < dim; ++jx)
            if (f.alpha[jx] != 0.0) trips.emplace_back(i, jx, f.alpha[jx]);
        trips.emplace_back(i, dim, f.alpha.norm());
        lp.h[i] = f.beta;
    }
    trips.emplace_back(m - 1, dim, 1.0);  // t <= cap keeps the LP bounded
    lp.h[m - 1] = cap;
    lp.G.setFromTriplets(trips.begin(), trips.end());
    lp.cones.push_back({ConeType::NonNegative, m, 0, -1});

    InteriorPointBackend backend;
    auto sol = backend.solve(lp, {});
    if (sol.status == SolveStatus::Infeasible) return -1.0;
    if (sol.status != SolveStatus::Optimal)
        throw std::runtime_error("max-margin LP failed (" + to_string(sol.status) + ")");
    return sol.x[dim];
}

bool ConvexRegion::contains(const VectorXd& p, double tol) const {
    return faces_contain(faces, p, tol);
}

bool Obstacle::contains(const VectorXd& p, double tol) const {
    return faces_contain(faces, p, tol);
}

Halfspace Scenario::lift(const Halfspace& face) const {
    if (face.alpha.size() != n_pos())
        throw std::invalid_argument("lift: face has wrong position dimension");
    Halfspace out;
    out.alpha = VectorXd::Zero(system.n_x);
    for (int i = 0; i < n_pos(); ++i) out.alpha[position_dims[i]] = face.alpha[i];
    out.beta = face.beta;
    out.name = face.name;
    return out;
}

void Scenario::domain_box(VectorXd& lo, VectorXd& hi) const {
    const int dim = n_pos();
    lo.resize(dim);
    hi.resize(dim);
    for (int d = 0; d < dim; ++d) {
        lo[d] = polytope_extent(domain.faces, dim, d, false);
        hi[d] = polytope_extent(domain.faces, dim, d, true);
    }
}

void Scenario::validate() {
    system.validate();
    boundary.validate();
    weights.validate(system.n_x, system.n_u);
    if (static_cast<int>(weights.Q_mean.size()) != system.horizon)
        throw std::invalid_argument("scenario: weight schedule length != horizon");
    if (boundary.mu0.size() != system.n_x)
        throw std::invalid_argument("scenario: boundary dimension != state dimension");
    if (!(epsilon > 0.0 && epsilon < 0.5))
        throw std::invalid_argument("scenario: epsilon must lie in (0, 0.5)");
    if (!(v_lo < v_hi) || !(k_lo < k_hi))
        throw std::invalid_argument("scenario: variable bounds must satisfy lo < hi");
    const int dim = n_pos();
    if (dim == 0) throw std::invalid_argument("scenario: empty position_dims");
    for (int idx : position_dims)
        if (idx < 0 || idx >= system.n_x)
            throw std::invalid_argument("scenario: position index out of range");
    auto check_faces = [&](const std::vector<Halfspace>& faces, const std::string& what) {
        if (faces.empty()) throw std::invalid_argument(what + " has no faces");
        for (const auto& f : faces) {
            if (f.alpha.size() != dim)
                throw std::invalid_argument(what + ": face dimension != position dimension");
            if (f.alpha.norm() == 0.0)
                throw std::invalid_argument(what + ": zero face normal");
        }
    };
    check_faces(domain.faces, "domain");
    if (regions.empty()) throw std::invalid_argument("scenario: no regions");
    for (const auto& r : regions) check_faces(r.faces, "region " + r.name);
    for (const auto& o : obstacles) check_faces(o.faces, "obstacle " + o.name);

    // Certificates: domain and every region must have nonempty interior
    // (Chebyshev-center point from the max-margin program); region
    // certificates must lie inside the domain and outside every obstacle.
    VectorXd lo, hi;
    domain_box(lo, hi);  // also proves the domain is bounded
    const double cap = (hi - lo).norm();
    {
        std::vector<Halfspace> faces = domain.faces;
        const double t = polytope_max_margin(faces, dim, cap);
        if (t <= 1e-7) throw std::invalid_argument("domain has empty interior");
    }
    for (auto& r : regions) {
        // Intersect with the domain so unbounded region face sets are fine.
        std::vector<Halfspace> faces = r.faces;
        faces.insert(faces.end(), domain.faces.begin(), domain.faces.end());
        ConicProgram lp;  // reuse the margin machinery to recover the point
        const int m = static_cast<int>(faces.size()) + 1;
        lp.num_vars = dim + 1;
        lp.c = VectorXd::Zero(dim + 1);
        lp.c[dim] = -1.0;
        lp.A = Eigen::SparseMatrix<double>(0, dim + 1);
        lp.b = VectorXd::Zero(0);
        lp.G = Eigen::SparseMatrix<double>(m, dim + 1);
        lp.h = VectorXd::Zero(m);
        std::vector<Eigen::Triplet<double>> trips;
        for (int i = 0; i < m - 1; ++i) {
            for (int jx = 0; jx < dim; ++jx)
                if (faces[i].alpha[jx] != 0.0)
                    trips.emplace_back(i, jx, faces[i].alpha[jx]);
            trips.emplace_back(i, dim, faces[i].alpha.norm());
            lp.h[i] = faces[i].beta;
        }
        trips.emplace_back(m - 1, dim, 1.0);
        lp.h[m - 1] = cap;
        lp.G.setFromTriplets(trips.begin(), trips.end());
        lp.cones.push_back({ConeType::NonNegative, m, 0, -1});
        InteriorPointBackend backend;
        auto sol = backend.solve(lp, {});
        if (sol.status != SolveStatus::Optimal || sol.x[dim] <= 1e-7)
            throw std::invalid_argument("region " + r.name +
                                        " has empty interior within the domain");
        r.certificate = sol.x.head(dim);
        for (const auto& o : obstacles)
            if (o.contains(r.certificate))
                throw std::invalid_argument("region " + r.name +
                                            " certificate point lies inside obstacle " +
                                            o.name);
    }
}

Scenario parse_scenario(const std::string& json_text) {
    json j = json::parse(json_text);
    Scenario sc;
    sc.name = j.value("name", std::string("scenario"));

    const json& jsys = j.at("system");
    if (jsys.contains("preset") || jsys.contains("type")) {
        const std::string type =
            (jsys.contains("preset") ? jsys["preset"] : jsys["type"]).get<std::string>();
        if (type != "double_integrator_2d")
            throw std::invalid_argument("unknown system preset: " + type);
        sc.system = LinearSystemSchedule::double_integrator_2d(
            jsys.at("dt").get<double>(), jsys.at("horizon").get<int>(),
            jsys.at("noise_scale").get<double>());
    } else {
        const int N = jsys.at("horizon").get<int>();
        LinearSystemSchedule sys;
        sys.horizon = N;
        sys.A = matrix_schedule_from_json(jsys.at("A"), N, "system.A");
        sys.B = matrix_schedule_from_json(jsys.at("B"), N, "system.B");
        sys.D = matrix_schedule_from_json(jsys.at("D"), N, "system.D");
        sys.n_x = static_cast<int>(sys.A[0].rows());
        sys.n_u = static_cast<int>(sys.B[0].cols());
        sys.n_w = static_cast<int>(sys.D[0].cols());
        sc.system = std::move(sys);
    }

    const json& jb = j.at("boundary");
    sc.boundary.mu0 = vector_from_json(jb.at("mu0"), "boundary.mu0");
    sc.boundary.Sigma0 = matrix_from_json(jb.at("Sigma0"), "boundary.Sigma0");
    sc.boundary.muN = vector_from_json(jb.at("muN"), "boundary.muN");
    sc.boundary.SigmaN = matrix_from_json(jb.at("SigmaN"), "boundary.SigmaN");

    const json& jw = j.at("weights");
    const int N = sc.system.horizon;
    sc.weights.Q_mean = matrix_schedule_from_json(jw.at("Q_mean"), N, "weights.Q_mean");
    sc.weights.R_mean = matrix_schedule_from_json(jw.at("R_mean"), N, "weights.R_mean");
    sc.weights.Q_cov = matrix_schedule_from_json(jw.at("Q_cov"), N, "weights.Q_cov");
    sc.weights.R_cov = matrix_schedule_from_json(jw.at("R_cov"), N, "weights.R_cov");

    sc.epsilon = j.value("epsilon", 1e-3);
    if (j.contains("bounds")) {
        const json& bounds = j["bounds"];
        sc.v_lo = bounds.value("v_lo", sc.v_lo);
        sc.v_hi = bounds.value("v_hi", sc.v_hi);
        sc.k_lo = bounds.value("k_lo", sc.k_lo);
        sc.k_hi = bounds.value("k_hi", sc.k_hi);
    }
    for (const auto& idx : j.at("position_dims"))
        sc.position_dims.push_back(idx.get<int>());

    sc.domain.name = "domain";
    sc.domain.faces = faces_from_json(j.at("domain").at("faces"), "domain");

    for (const auto& jr : j.at("regions")) {
        ConvexRegion r;
        r.name = jr.value("name", std::string("region"));
        r.faces = faces_from_json(jr.at("faces"), "region " + r.name);
        sc.regions.push_back(std::move(r));
    }
    if (j.contains("obstacles")) {
        for (const auto& jo : j["obstacles"]) {
            Obstacle o;
            o.name = jo.value("name", std::string("obstacle"));
            o.faces = faces_from_json(jo.at("faces"), "obstacle " + o.name);
            sc.obstacles.push_back(std::move(o));
        }
    }
    sc.validate();
    return sc;
}

Scenario load_scenario(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open scenario file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_scenario(buf.str());
}

std::string scenario_to_json(const Scenario& sc) {
    json j;
    j["name"] = sc.name;
    json jsys;
    jsys["horizon"] = sc.system.horizon;
    json A = json::array(), B = json::array(), D = json::array();
    for (int k = 0; k < sc.system.horizon; ++k) {
        A.push_back(matrix_to_json(sc.system.A[k]));
        B.push_back(matrix_to_json(sc.system.B[k]));
        D.push_back(matrix_to_json(sc.system.D[k]));
    }
    jsys["A"] = A;
    jsys["B"] = B;
    jsys["D"] = D;
    j["system"] = jsys;

    json jb;
    jb["mu0"] = vector_to_json(sc.boundary.mu0);
    jb["Sigma0"] = matrix_to_json(sc.boundary.Sigma0);
    jb["muN"] = vector_to_json(sc.boundary.muN);
    jb["SigmaN"] = matrix_to_json(sc.boundary.SigmaN);
    j["boundary"] = jb;

    json jw;
    json qm = json::array(), rm = json::array(), qc = json::array(), rc = json::array();
    for (int k = 0; k < sc.system.horizon; ++k) {
        qm.push_back(matrix_to_json(sc.weights.Q_mean[k]));
        rm.push_back(matrix_to_json(sc.weights.R_mean[k]));
        qc.push_back(matrix_to_json(sc.weights.Q_cov[k]));
        rc.push_back(matrix_to_json(sc.weights.R_cov[k]));
    }
    jw["Q_mean"] = qm;
    jw["R_mean"] = rm;
    jw["Q_cov"] = qc;
    jw["R_cov"] = rc;
    j["weights"] = jw;

    j["epsilon"] = sc.epsilon;
    j["bounds"]["v_lo"] = sc.v_lo;
    j["bounds"]["v_hi"] = sc.v_hi;
    j["bounds"]["k_lo"] = sc.k_lo;
    j["bounds"]["k_hi"] = sc.k_hi;
    j["position_dims"] = sc.position_dims;
    j["domain"]["faces"] = faces_to_json(sc.domain.faces);

    json regs = json::array();
    for (const auto& r : sc.regions) {
        json jr;
        jr["name"] = r.name;
        jr["faces"] = faces_to_json(r.faces);
        regs.push_back(jr);
    }
    j["regions"] = regs;
    json obs = json::array();
    for (const auto& o : sc.obstacles) {
        json jo;
        jo["name"] = o.name;
        jo["faces"] = faces_to_json(o.faces);
        obs.push_back(jo);
    }
    j["obstacles"] = obs;
    return j.dump(2);
}

DecompositionReport validate_decomposition(const Scenario& scenario,
                                           double min_coverage, int samples,
                                           std::uint64_t seed) {
    DecompositionReport rep;
    const int dim = scenario.n_pos();
    VectorXd lo, hi;
    scenario.domain_box(lo, hi);
    const double cap = (hi - lo).norm();
    std::ostringstream msg;

    // Region–obstacle emptiness certificates: if the combined half-space
    // system of a region and an obstacle has nonempty interior they overlap,
    // which breaks the Eq. (21) premise — a hard error.
    for (const auto& r : scenario.regions) {
        for (const auto& o : scenario.obstacles) {
            std::vector<Halfspace> both = r.faces;
            both.insert(both.end(), o.faces.begin(), o.faces.end());
            const double t = polytope_max_margin(both, dim, cap);
            if (t > 1e-6)
                throw std::runtime_error("region " + r.name + " overlaps obstacle " +
                                         o.name + " (interior margin " +
                                         std::to_string(t) + ")");
            rep.notes.push_back("region " + r.name + " / obstacle " + o.name +
                                ": empty intersection certified");
        }
    }

    // Rejection-sampled coverage of the obstacle-free domain.
    std::mt19937_64 gen(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    long free_count = 0, covered = 0;
    VectorXd p(dim);
    for (int i = 0; i < samples; ++i) {
        for (int d = 0; d < dim; ++d) p[d] = lo[d] + (hi[d] - lo[d]) * unit(gen);
        if (!scenario.domain.contains(p)) continue;
        bool in_obstacle = false;
        for (const auto& o : scenario.obstacles)
            if (o.contains(p)) {
                in_obstacle = true;
                break;
            }
        if (in_obstacle) continue;
        ++free_count;
        for (const auto& r : scenario.regions)
            if (r.contains(p, 1e-12)) {
                ++covered;
                break;
            }
    }
    rep.coverage = free_count > 0 ? static_cast<double>(covered) / free_count : 1.0;
    if (rep.coverage < min_coverage)
        msg << "coverage " << rep.coverage << " below " << min_coverage << "; ";

    rep.ok = rep.coverage >= min_coverage;
    rep.message = rep.ok ? "decomposition ok" : msg.str();
    return rep;
}

}  // namespace covsteer
