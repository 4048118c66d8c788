#include "lowrank/evaluation.hpp"

#include "lowrank/norms.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace lowrank {

namespace {

// Weight matrix from an exact occupancy layer: zero out floating-point dust
// below the support guard, then renormalize.
Matrix occupancy_weights(const Matrix& occupancy) {
    Matrix rho = (occupancy.array() > 1e-12).select(occupancy, 0.0);
    const double total = rho.sum();
    if (total <= 0.0) throw std::invalid_argument("occupancy layer has empty support");
    return rho / total;
}

double plugin_slack(const SlackConfig& cfg, int S, int H, int K) {
    const double hs = static_cast<double>(H) * static_cast<double>(S) / cfg.delta;
    return cfg.scale_c * static_cast<double>(H) *
           std::sqrt(static_cast<double>(S) * std::log(hs) / static_cast<double>(K));
}

double weighted_abs_diff(const Matrix& rho, const MaskedMatrix& z, const MaskedMatrix& y) {
    double acc = 0.0;
    for (Eigen::Index i = 0; i < rho.rows(); ++i)
        for (Eigen::Index j = 0; j < rho.cols(); ++j)
            if (rho(i, j) > 0.0) acc += rho(i, j) * (z.at(i, j) - y.at(i, j));
    return std::abs(acc);
}

double first_step_estimate(const Vector& mu1, const Matrix& pi1, const Matrix& q1) {
    double j = 0.0;
    for (Eigen::Index s = 0; s < q1.rows(); ++s)
        for (Eigen::Index a = 0; a < q1.cols(); ++a) j += mu1(s) * pi1(s, a) * q1(s, a);
    return j;
}

}  // namespace

OPERun evaluate_policy_infinite(const LowRankMDP& mdp, const Policy& behavior,
                                const Policy& target, const MEConfig& me_config) {
    if (behavior.horizon() != mdp.horizon || target.horizon() != mdp.horizon)
        throw std::invalid_argument("evaluate_policy_infinite: horizon mismatch");
    const int S = mdp.num_states, A = mdp.num_actions, H = mdp.horizon;
    const OccupancyMeasure occ_b = occupancy_measures(mdp, behavior);
    const OccupancyMeasure occ_t = occupancy_measures(mdp, target);

    OPERun run;
    run.mode = EvalMode::kInfiniteSample;
    run.q_estimates.resize(static_cast<std::size_t>(H));
    run.per_step_z.resize(static_cast<std::size_t>(H));
    run.diagnostics.resize(static_cast<std::size_t>(H));

    const Matrix dummy_policy = Matrix::Constant(S, A, 1.0 / static_cast<double>(A));
    Matrix q_next = Matrix::Zero(S, A);
    for (int t = H - 1; t >= 0; --t) {
        const auto ti = static_cast<std::size_t>(t);
        const double L = static_cast<double>(H - t);
        const Matrix rho = occupancy_weights(occ_b.state_action[ti]);
        const Mask supp = support_of(rho, 0.0);
        const Matrix& next_policy = (t + 1 < H) ? target.step(t + 1) : dummy_policy;
        const MaskedMatrix y_full =
            bellman_apply(mdp.kernel_slice(t), mdp.rewards[ti], next_policy, q_next);

        MEProblem problem;
        problem.weights = rho;
        problem.observed = y_full.values;
        problem.entry_bound = L;
        problem.rank_param = mdp.rank_param;
        problem.mode = MEMode::kEquality;
        MESolution sol;
        try {
            sol = solve_me(problem, me_config);
        } catch (const MESolverFailure& e) {
            std::ostringstream msg;
            msg << "matrix estimation failed at step " << (t + 1) << ": " << e.what();
            throw MESolverFailure(msg.str(), e.best_residual());
        }
        q_next = sol.estimate;
        run.q_estimates[ti] = sol.estimate;
        run.per_step_z[ti] = MaskedMatrix((supp).select(y_full.values,
                                          std::numeric_limits<double>::quiet_NaN()), supp);

        StepDiagnostics& diag = run.diagnostics[ti];
        diag.t = t + 1;
        diag.support_size = static_cast<int>(supp.count());
        diag.residual = sol.constraint_residual;
        diag.max_norm_certificate = sol.max_norm_value;
        diag.cap = std::sqrt(static_cast<double>(mdp.rank_param)) * L;
        diag.slack = 0.0;
        diag.iterations = sol.iterations;
        diag.converged = sol.converged;
        diag.emp_discrepancy = operator_norm(rho - occ_t.state_action[ti]);
    }
    run.estimate = first_step_estimate(mdp.initial_dist, target.step(0), run.q_estimates[0]);
    return run;
}

OPERun evaluate_policy_finite(const OfflineDataset& dataset, const Policy& target,
                              const Vector& initial_dist, const MEConfig& me_config,
                              const SlackConfig& slack_config) {
    const int S = dataset.num_states, A = dataset.num_actions, H = dataset.horizon;
    const int K = dataset.num_trajectories();
    if (K == 0) throw std::invalid_argument("evaluate_policy_finite: empty dataset");
    if (target.horizon() != H) throw std::invalid_argument("evaluate_policy_finite: horizon mismatch");
    if (slack_config.mode == SlackConfig::Mode::kOracle && slack_config.oracle_mdp == nullptr)
        throw std::invalid_argument("evaluate_policy_finite: oracle slack requires an MDP");
    const LowRankMDP* oracle = slack_config.oracle_mdp;
    const int rank_param = oracle != nullptr ? oracle->rank_param : slack_config.rank_param;
    if (rank_param < 1)
        throw std::invalid_argument("evaluate_policy_finite: rank parameter unavailable");
    const EmpiricalModel em = empirical_model(dataset);

    OPERun run;
    run.mode = EvalMode::kFiniteSample;
    run.q_estimates.resize(static_cast<std::size_t>(H));
    run.per_step_z.resize(static_cast<std::size_t>(H));
    run.diagnostics.resize(static_cast<std::size_t>(H));

    const Matrix dummy_policy = Matrix::Constant(S, A, 1.0 / static_cast<double>(A));
    Matrix q_next = Matrix::Zero(S, A);
    for (int t = H - 1; t >= 0; --t) {
        const auto ti = static_cast<std::size_t>(t);
        const double L = static_cast<double>(H - t);
        const Matrix& rho = em.empirical_occupancy[ti];
        const Mask supp = support_of(rho, 0.0);
        const Matrix& next_policy = (t + 1 < H) ? target.step(t + 1) : dummy_policy;
        const MaskedMatrix z = bellman_apply(em.kernel_slice(t), em.observed_rewards[ti].values,
                                             next_policy, q_next, supp);

        double slack = 0.0;
        if (slack_config.mode == SlackConfig::Mode::kOracle) {
            const MaskedMatrix y = bellman_apply(oracle->kernel_slice(t),
                                                 oracle->rewards[ti], next_policy, q_next, supp);
            slack = weighted_abs_diff(rho, z, y);
        } else {
            slack = plugin_slack(slack_config, S, H, K);
        }

        MEProblem problem;
        problem.weights = rho;
        problem.observed = z.values;
        problem.entry_bound = L;
        problem.rank_param = rank_param;
        problem.mode = MEMode::kInnerProduct;
        problem.slack = slack;
        MESolution sol;
        try {
            sol = solve_me(problem, me_config);
        } catch (const MESolverFailure& e) {
            std::ostringstream msg;
            msg << "matrix estimation failed at step " << (t + 1) << ": " << e.what();
            throw MESolverFailure(msg.str(), e.best_residual());
        }
        q_next = sol.estimate;
        run.q_estimates[ti] = sol.estimate;
        run.per_step_z[ti] = z;

        StepDiagnostics& diag = run.diagnostics[ti];
        diag.t = t + 1;
        diag.support_size = static_cast<int>(supp.count());
        diag.residual = sol.constraint_residual;
        diag.max_norm_certificate = sol.max_norm_value;
        diag.cap = std::sqrt(static_cast<double>(rank_param)) * L;
        diag.slack = slack;
        diag.iterations = sol.iterations;
        diag.converged = sol.converged;
        diag.emp_discrepancy = std::numeric_limits<double>::quiet_NaN();
    }
    run.estimate = first_step_estimate(initial_dist, target.step(0), run.q_estimates[0]);
    return run;
}

BoundBreakdown bound_infinite(const LowRankMDP& mdp, const Policy& behavior, const Policy& target,
                              const DiscrepancyConfig& dis_config) {
    const OccupancyMeasure occ_b = occupancy_measures(mdp, behavior);
    const OccupancyMeasure occ_t = occupancy_measures(mdp, target);
    BoundBreakdown out;
    double sum = 0.0;
    for (int t = 0; t < mdp.horizon; ++t) {
        const auto ti = static_cast<std::size_t>(t);
        const DiscrepancyResult dis =
            operator_discrepancy(occ_b.state_action[ti], occ_t.state_action[ti], dis_config);
        out.per_step.push_back(dis.value);
        sum += dis.value;
    }
    const double dsa = static_cast<double>(mdp.rank_param) * mdp.num_states * mdp.num_actions;
    out.total = 2.0 * mdp.horizon * std::sqrt(dsa) * sum;
    return out;
}

BoundBreakdown bound_finite(const LowRankMDP& mdp, const Policy& behavior, const Policy& target,
                            int K, double delta, double C) {
    if (K < 1) throw std::invalid_argument("bound_finite: K must be >= 1");
    const OccupancyMeasure occ_b = occupancy_measures(mdp, behavior);
    const OccupancyMeasure occ_t = occupancy_measures(mdp, target);
    BoundBreakdown out;
    double sum = 0.0;
    for (int t = 0; t < mdp.horizon; ++t) {
        const auto ti = static_cast<std::size_t>(t);
        const double value = operator_norm(occ_b.state_action[ti] - occ_t.state_action[ti]);
        out.per_step.push_back(value);
        sum += value;
    }
    const double S = mdp.num_states, A = mdp.num_actions, H = mdp.horizon;
    const double d = mdp.rank_param;
    out.statistical_term =
        C * H * H * std::sqrt(d * (S + A) * std::log(H * S / delta) / static_cast<double>(K));
    out.total = 2.0 * H * std::sqrt(d * S * A) * sum + out.statistical_term;
    out.regime_exceeded = !(K > 2 && K < static_cast<int>(S) * static_cast<int>(A));
    return out;
}

}  // namespace lowrank
