#include "covsteer/verify.hpp"

#include <cmath>
#include <sstream>

#include "covsteer/chance.hpp"

namespace covsteer {

namespace {

VectorXd position_of(const Scenario& sc, const VectorXd& state) {
    VectorXd p(sc.n_pos());
    for (int i = 0; i < sc.n_pos(); ++i) p[i] = state[sc.position_dims[i]];
    return p;
}

bool in_any_obstacle(const Scenario& sc, const VectorXd& pos) {
    for (const auto& o : sc.obstacles)
        if (o.contains(pos)) return true;
    return false;
}

}  // namespace

VerificationReport verify_policy(const Scenario& sc, const Policy& policy,
                                 long samples, std::uint64_t seed,
                                 const Eigen::MatrixXi* schedule,
                                 bool check_terminal_covariance) {
    const auto& sys = sc.system;
    const int N = sys.horizon, n_x = sys.n_x, n_u = sys.n_u, n_w = sys.n_w;
    const auto ops = assemble_block_operators(sys);

    VerificationReport rep;
    rep.samples = samples;
    rep.seed = seed;
    rep.checked_terminal_covariance = check_terminal_covariance;

    // ---- Closed forms. ----
    const VectorXd Xbar = mean_trajectory(ops, sc.boundary.mu0, policy);
    const MatrixXd SigmaX = state_covariance(ops, sc.boundary.Sigma0, policy);
    rep.analytic_cost = evaluate_cost(ops, sc.boundary, sc.weights, policy);
    rep.terminal_mean_analytic = Xbar.tail(n_x);
    rep.terminal_cov_analytic = SigmaX.bottomRightCorner(n_x, n_x);
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(sc.boundary.SigmaN -
                                               rep.terminal_cov_analytic);
    rep.dominance_eigs = es.eigenvalues();

    const int N_R = static_cast<int>(sc.regions.size());
    std::vector<double> step_risk(N + 1, 0.0);
    auto add_tail = [&](int r, int col, int step, int f) {
        const Halfspace face = sc.lift(sc.regions[r].faces[f]);
        const double mean = face.alpha.dot(Xbar.segment(step * n_x, n_x));
        const double var = face.alpha.dot(
            SigmaX.block(step * n_x, step * n_x, n_x, n_x) * face.alpha);
        const double sd = std::sqrt(std::max(var, 0.0));
        const double tail = sd > 0.0
                                ? standard_normal_tail((face.beta - mean) / sd)
                                : (mean > face.beta ? 1.0 : 0.0);
        rep.face_tails.push_back({r, col, step, f, tail});
        step_risk[step] += sc.epsilon;  // per-face allocated risk (union bound)
    };
    if (schedule && schedule->size() > 0) {
        for (int col = 0; col < schedule->cols(); ++col)
            for (int r = 0; r < schedule->rows(); ++r)
                if ((*schedule)(r, col) == 1)
                    for (int f = 0; f < static_cast<int>(sc.regions[r].faces.size()); ++f)
                        for (int step : {col, col + 1}) add_tail(r, col, step, f);
    } else if (N_R == 1) {
        for (int step = 0; step < N; ++step)
            for (int f = 0; f < static_cast<int>(sc.regions[0].faces.size()); ++f)
                add_tail(0, std::max(0, step - 1), step, f);
    }
    rep.union_bound = 0.0;
    for (double v : step_risk) rep.union_bound = std::max(rep.union_bound, v);

    // ---- Monte Carlo. ----
    const MatrixXd sqrt0 = psd_sqrt(sc.boundary.Sigma0);
    rep.step_violation_rate.assign(N + 1, 0.0);
    rep.step_violation_radius.assign(N + 1, 0.0);
    rep.midpoint_violation_rate.assign(N, 0.0);
    std::vector<long> hits(N + 1, 0), mid_hits(N, 0);

    VectorXd mean_acc = VectorXd::Zero(n_x);
    MatrixXd cov_acc = MatrixXd::Zero(n_x, n_x);
    MatrixXd stack_cov_acc = MatrixXd::Zero((N + 1) * n_x, (N + 1) * n_x);
    double dev_cost_acc = 0.0, dev_cost_sq = 0.0;

    // Deterministic mean-part of the cost (exact, not sampled).
    double mean_part = 0.0;
    for (int k = 0; k < N; ++k) {
        const VectorXd xb = Xbar.segment(k * n_x, n_x);
        mean_part += xb.dot(sc.weights.Q_mean[k] * xb) +
                     policy.v[k].dot(sc.weights.R_mean[k] * policy.v[k]);
    }

    NormalSampler sampler(seed);
    for (long t = 0; t < samples; ++t) {
        const VectorXd x0 = sampler.gaussian(sc.boundary.mu0, sqrt0);
        const VectorXd noise = sampler.vector(N * n_w);
        const auto roll = simulate_closed_loop(sys, sc.boundary, policy, x0, noise);
        for (int k = 0; k <= N; ++k) {
            const VectorXd pos = position_of(sc, roll.states.row(k).transpose());
            if (in_any_obstacle(sc, pos)) ++hits[k];
            if (k < N) {
                const VectorXd pos2 =
                    position_of(sc, roll.states.row(k + 1).transpose());
                if (in_any_obstacle(sc, 0.5 * (pos + pos2))) ++mid_hits[k];
            }
        }
        const VectorXd xN = roll.states.row(N).transpose();
        mean_acc += xN;
        cov_acc += (xN - Xbar.tail(n_x)) * (xN - Xbar.tail(n_x)).transpose();
        VectorXd dev((N + 1) * n_x);
        for (int k = 0; k <= N; ++k)
            dev.segment(k * n_x, n_x) =
                roll.states.row(k).transpose() - Xbar.segment(k * n_x, n_x);
        stack_cov_acc += dev * dev.transpose();
        double c = 0.0;
        for (int k = 0; k < N; ++k) {
            const VectorXd dx = dev.segment(k * n_x, n_x);
            const VectorXd du = roll.controls.row(k).transpose() - policy.v[k];
            c += dx.dot(sc.weights.Q_cov[k] * dx) + du.dot(sc.weights.R_cov[k] * du);
        }
        dev_cost_acc += c;
        dev_cost_sq += c * c;
    }
    if (samples > 0) {
        const double n = static_cast<double>(samples);
        const double zconf = inverse_standard_normal_cdf(0.5 + rep.confidence / 2.0);
        for (int k = 0; k <= N; ++k) {
            const double p = hits[k] / n;
            rep.step_violation_rate[k] = p;
            rep.step_violation_radius[k] = zconf * std::sqrt(p * (1.0 - p) / n);
            if (k < N) rep.midpoint_violation_rate[k] = mid_hits[k] / n;
        }
        rep.terminal_mean_empirical = mean_acc / n;
        rep.terminal_cov_empirical = cov_acc / n;
        const MatrixXd stack_emp = stack_cov_acc / n;
        rep.cov_rel_error = (stack_emp - SigmaX).norm() / std::max(1e-300, SigmaX.norm());
        const double dev_mean = dev_cost_acc / n;
        rep.empirical_cost = mean_part + dev_mean;
        rep.empirical_cost_se =
            std::sqrt(std::max(0.0, dev_cost_sq / n - dev_mean * dev_mean) / n);
    } else {
        rep.terminal_mean_empirical = VectorXd::Zero(n_x);
        rep.terminal_cov_empirical = MatrixXd::Zero(n_x, n_x);
    }

    // ---- Hard checks. ----
    std::ostringstream fail;
    for (const auto& ft : rep.face_tails)
        if (ft.tail > sc.epsilon + 1e-9) {
            rep.failures.push_back("face tail exceeds epsilon at step " +
                                   std::to_string(ft.step) + " (region " +
                                   sc.regions[ft.region].name + ", tail " +
                                   std::to_string(ft.tail) + ")");
        }
    if ((rep.terminal_mean_analytic - sc.boundary.muN).lpNorm<Eigen::Infinity>() > 1e-6)
        rep.failures.push_back("terminal mean misses target beyond 1e-6");
    if (check_terminal_covariance && rep.dominance_eigs.minCoeff() < -1e-8)
        rep.failures.push_back("terminal covariance dominance violated (min eig " +
                               std::to_string(rep.dominance_eigs.minCoeff()) + ")");
    rep.hard_ok = rep.failures.empty();
    return rep;
}

std::string VerificationReport::summary() const {
    std::ostringstream os;
    os.precision(6);
    os << "verification: " << samples << " samples, seed " << seed << "\n";
    double worst_rate = 0.0;
    for (double r : step_violation_rate) worst_rate = std::max(worst_rate, r);
    os << "max per-step obstacle violation rate: " << worst_rate << "\n";
    double worst_tail = 0.0;
    for (const auto& ft : face_tails) worst_tail = std::max(worst_tail, ft.tail);
    os << "max closed-form face tail: " << worst_tail
       << " (union bound per step: " << union_bound << ")\n";
    os << "terminal mean error (analytic): "
       << (terminal_mean_analytic.size() ? "computed" : "n/a") << "\n";
    if (dominance_eigs.size())
        os << "min eig(SigmaN - E_N Sigma_X E_N'): " << dominance_eigs.minCoeff()
           << (checked_terminal_covariance ? "" : " (not enforced, mean-only)") << "\n";
    os << "stacked covariance relative error: " << cov_rel_error << "\n";
    os << "cost: analytic " << analytic_cost << ", empirical " << empirical_cost
       << " +- " << empirical_cost_se << "\n";
    if (hard_ok) {
        os << "hard checks: PASS\n";
    } else {
        os << "hard checks: FAIL\n";
        for (const auto& f : failures) os << "  - " << f << "\n";
    }
    return os.str();
}

MeanOnlyComparison compare_mean_only(const Scenario& sc, const SolveResult& full,
                                     const SolveResult& mean_only) {
    MeanOnlyComparison cmp;
    cmp.full_sequence = full.region_sequence();
    cmp.mean_only_sequence = mean_only.region_sequence();
    cmp.full_objective = full.objective;
    cmp.mean_only_objective = mean_only.objective;
    auto names = [&](const std::vector<int>& seq) {
        std::vector<std::string> out;
        for (int r : seq)
            if (r >= 0 && (out.empty() || out.back() != sc.regions[r].name))
                out.push_back(sc.regions[r].name);
        return out;
    };
    cmp.full_regions = names(cmp.full_sequence);
    cmp.mean_only_regions = names(cmp.mean_only_sequence);
    return cmp;
}

std::string MeanOnlyComparison::summary() const {
    std::ostringstream os;
    os << "full policy route:";
    for (const auto& r : full_regions) os << " " << r;
    os << " (objective " << full_objective << ")\n";
    os << "mean-only route:";
    for (const auto& r : mean_only_regions) os << " " << r;
    os << " (objective " << mean_only_objective << ")\n";
    return os.str();
}

}  // namespace covsteer
