#include "covsteer/result_io.hpp"

#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "covsteer/block_dynamics.hpp"

namespace covsteer {

namespace {

using nlohmann::json;

json matrix_to_json(const MatrixXd& m) {
    json rows = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

MatrixXd matrix_from_json(const json& j) {
    if (!j.is_array()) throw std::runtime_error("expected a matrix (array of rows)");
    const auto rows = j.size();
    if (rows == 0) return MatrixXd(0, 0);
    const auto cols = j[0].size();
    MatrixXd m(rows, cols);
    for (std::size_t i = 0; i < rows; ++i) {
        if (j[i].size() != cols) throw std::runtime_error("ragged matrix rows");
        for (std::size_t k = 0; k < cols; ++k) m(i, k) = j[i][k].get<double>();
    }
    return m;
}

json vector_to_json(const VectorXd& v) {
    json out = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
    return out;
}

VectorXd vector_from_json(const json& j) {
    VectorXd v(j.size());
    for (std::size_t i = 0; i < j.size(); ++i) v[i] = j[i].get<double>();
    return v;
}

}  // namespace

std::string scenario_digest(const Scenario& scenario) {
    const std::string canonical = scenario_to_json(scenario);
    std::uint64_t h = 1469598103934665603ull;  // FNV-1a 64-bit offset basis
    for (unsigned char c : canonical) {
        h ^= c;
        h *= 1099511628211ull;
    }
    std::ostringstream os;
    os << std::hex;
    os.width(16);
    os.fill('0');
    os << h;
    return os.str();
}

ResultDocument make_result_document(const Scenario& scenario,
                                    const std::string& scenario_path,
                                    bool mean_only, const SolveOptions& options,
                                    const SolveResult& result) {
    ResultDocument doc;
    doc.scenario_path = scenario_path;
    doc.scenario_digest = scenario_digest(scenario);
    doc.mean_only = mean_only;
    doc.gap_tol = options.gap_tol;
    doc.node_limit = options.node_limit;
    doc.time_limit = options.time_limit;
    doc.search = options.depth_first ? "depth" : "best";
    doc.status = result.status;
    doc.objective = result.objective;
    doc.gap = result.gap;
    doc.nodes = result.nodes;
    doc.wall_time = result.wall_time;
    doc.message = result.message;
    doc.policy = result.policy;
    doc.schedule = result.schedule;

    if (result.status == MipStatus::Optimal ||
        (result.status == MipStatus::LimitExceeded && !result.policy.v.empty())) {
        const auto ops = assemble_block_operators(scenario.system);
        const int N = scenario.horizon(), n_x = scenario.system.n_x;
        const VectorXd Xbar =
            mean_trajectory(ops, scenario.boundary.mu0, result.policy);
        const MatrixXd SigmaX =
            state_covariance(ops, scenario.boundary.Sigma0, result.policy);
        doc.means.resize(N + 1, n_x);
        for (int k = 0; k <= N; ++k) {
            doc.means.row(k) = Xbar.segment(k * n_x, n_x).transpose();
            doc.covariances.push_back(SigmaX.block(k * n_x, k * n_x, n_x, n_x));
        }
    }
    return doc;
}

std::string result_to_json(const ResultDocument& doc) {
    json j;
    j["scenario_path"] = doc.scenario_path;
    j["scenario_digest"] = doc.scenario_digest;
    j["mean_only"] = doc.mean_only;
    j["options"] = {{"gap_tol", doc.gap_tol},
                    {"node_limit", doc.node_limit},
                    {"time_limit", doc.time_limit},
                    {"search", doc.search}};
    j["status"] = to_string(doc.status);
    j["objective"] = doc.objective;
    j["gap"] = doc.gap;
    j["nodes"] = doc.nodes;
    j["wall_time"] = doc.wall_time;
    j["message"] = doc.message;

    json v = json::array(), K = json::array();
    for (const auto& vk : doc.policy.v) v.push_back(vector_to_json(vk));
    for (const auto& Kk : doc.policy.K) K.push_back(matrix_to_json(Kk));
    j["policy"] = {{"v", std::move(v)}, {"K", std::move(K)}};

    json sched = json::array();
    for (Eigen::Index r = 0; r < doc.schedule.rows(); ++r) {
        json row = json::array();
        for (Eigen::Index k = 0; k < doc.schedule.cols(); ++k)
            row.push_back(doc.schedule(r, k));
        sched.push_back(std::move(row));
    }
    j["schedule"] = std::move(sched);

    json means = json::array(), covs = json::array();
    for (Eigen::Index k = 0; k < doc.means.rows(); ++k)
        means.push_back(vector_to_json(doc.means.row(k).transpose()));
    for (const auto& c : doc.covariances) covs.push_back(matrix_to_json(c));
    j["means"] = std::move(means);
    j["covariances"] = std::move(covs);
    return j.dump(2);
}

ResultDocument parse_result(const std::string& json_text) {
    json j = json::parse(json_text);
    ResultDocument doc;
    doc.scenario_path = j.value("scenario_path", std::string());
    doc.scenario_digest = j.value("scenario_digest", std::string());
    doc.mean_only = j.value("mean_only", false);
    if (j.contains("options")) {
        const auto& o = j["options"];
        doc.gap_tol = o.value("gap_tol", 1e-6);
        doc.node_limit = o.value("node_limit", 0l);
        doc.time_limit = o.value("time_limit", 0.0);
        doc.search = o.value("search", std::string("best"));
    }
    const std::string status = j.value("status", std::string("error"));
    if (status == "optimal")
        doc.status = MipStatus::Optimal;
    else if (status == "infeasible")
        doc.status = MipStatus::Infeasible;
    else if (status == "limit_exceeded")
        doc.status = MipStatus::LimitExceeded;
    else
        doc.status = MipStatus::Error;
    doc.objective = j.value("objective", 0.0);
    doc.gap = j.value("gap", 0.0);
    doc.nodes = j.value("nodes", 0l);
    doc.wall_time = j.value("wall_time", 0.0);
    doc.message = j.value("message", std::string());

    if (j.contains("policy")) {
        for (const auto& vk : j["policy"]["v"])
            doc.policy.v.push_back(vector_from_json(vk));
        for (const auto& Kk : j["policy"]["K"])
            doc.policy.K.push_back(matrix_from_json(Kk));
    }
    if (j.contains("schedule") && !j["schedule"].empty()) {
        const auto& s = j["schedule"];
        doc.schedule.resize(s.size(), s[0].size());
        for (std::size_t r = 0; r < s.size(); ++r)
            for (std::size_t k = 0; k < s[r].size(); ++k)
                doc.schedule(r, k) = s[r][k].get<int>();
    }
    if (j.contains("means")) {
        const auto& m = j["means"];
        if (!m.empty()) {
            doc.means.resize(m.size(), m[0].size());
            for (std::size_t k = 0; k < m.size(); ++k)
                doc.means.row(k) = vector_from_json(m[k]).transpose();
        }
        for (const auto& c : j["covariances"])
            doc.covariances.push_back(matrix_from_json(c));
    }
    return doc;
}

void save_result(const ResultDocument& doc, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out << result_to_json(doc) << "\n";
}

ResultDocument load_result(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open result file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_result(buf.str());
}

}  // namespace covsteer
