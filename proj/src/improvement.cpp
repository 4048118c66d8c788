#include "lowrank/improvement.hpp"

#include "lowrank/norms.hpp"
#include "lowrank/rng.hpp"

#include <cmath>
#include <iostream>
#include <limits>

namespace lowrank {

namespace {

Vector dirichlet_row(SplitMix64& rng, Eigen::Index n, double concentration) {
    Vector v(n);
    double sum = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        v(i) = sample_gamma(rng, concentration);
        sum += v(i);
    }
    if (sum <= 0.0) {
        v.setZero();
        v(static_cast<Eigen::Index>(rng.next_below(static_cast<std::uint64_t>(n)))) = 1.0;
        return v;
    }
    return v / sum;
}

}  // namespace

CandidateSet build_candidate_set(const Policy& behavior, const std::vector<double>& B, int d,
                                 int S, int A, int n_candidates, std::uint64_t seed) {
    const int H = behavior.horizon();
    if (static_cast<int>(B.size()) != H)
        throw std::invalid_argument("build_candidate_set: budget vector length must equal H");
    for (double b : B)
        if (b < 0.0) throw std::invalid_argument("build_candidate_set: budgets must be nonnegative");
    if (n_candidates < 1) throw std::invalid_argument("build_candidate_set: n_candidates must be >= 1");

    CandidateSet set;
    set.bounds = B;
    set.rank_param = d;
    set.policies.push_back(behavior);
    set.constraint_norms.push_back(std::vector<double>(static_cast<std::size_t>(H), 0.0));

    // Per-step budgets shrink geometrically away from the final step; compute
    // in log space since the factor underflows for long horizons.
    const double log_factor =
        0.5 * std::log(static_cast<double>(d) * static_cast<double>(S) * static_cast<double>(S) *
                       static_cast<double>(A));
    set.step_budgets.resize(static_cast<std::size_t>(H), 0.0);
    for (int t = 0; t < H; ++t) {
        const double b = B[static_cast<std::size_t>(t)];
        if (b <= 0.0) continue;
        const double log_budget = std::log(b) + static_cast<double>(t + 1 - H) * log_factor;
        if (log_budget >= std::log(1e-14))
            set.step_budgets[static_cast<std::size_t>(t)] = std::exp(log_budget);
    }

    bool any_budget = false;
    for (double b : set.step_budgets) any_budget |= b >= 1e-14;
    if (!any_budget) return set;  // every step is snapped to the behavior policy

    SplitMix64 rng(SplitMix64::derive(seed, 0xCA11D1DULL));
    const int wanted = n_candidates - 1;
    const long proposal_cap = 100L * n_candidates;
    long proposals = 0;
    while (static_cast<int>(set.policies.size()) - 1 < wanted && proposals < proposal_cap) {
        ++proposals;
        Policy candidate = behavior;
        std::vector<double> norms(static_cast<std::size_t>(H), 0.0);
        bool accepted = true;
        bool changed = false;
        for (int t = 0; t < H; ++t) {
            const auto ti = static_cast<std::size_t>(t);
            const double budget = set.step_budgets[ti];
            if (budget < 1e-14) continue;  // snapped to the behavior row
            Matrix mixture(S, A);
            for (Eigen::Index s = 0; s < S; ++s)
                mixture.row(s) = dirichlet_row(rng, A, 0.3).transpose();
            const Matrix direction = mixture - behavior.step(t);
            const double dir_norm = operator_norm(direction);
            if (dir_norm < 1e-12) continue;
            const double alpha = std::min(1.0, rng.next_double() * budget / dir_norm);
            candidate.per_step[ti] = behavior.step(t) + alpha * direction;
            norms[ti] = operator_norm(candidate.per_step[ti] - behavior.step(t));
            changed = true;
            if (norms[ti] > budget + 1e-9) {
                accepted = false;
                break;
            }
        }
        if (!accepted || !changed) continue;
        set.policies.push_back(std::move(candidate));
        set.constraint_norms.push_back(std::move(norms));
    }
    if (set.policies.size() == 1 && wanted > 0)
        std::cerr << "build_candidate_set: warning: no proposal met the operator-norm budget "
                     "after "
                  << proposals << " attempts; set contains only the behavior policy\n";
    return set;
}

OptimizeResult optimize_policy(const OfflineDataset& dataset, const CandidateSet& candidates,
                               const MEConfig& me_config, const SlackConfig& slack_config) {
    if (candidates.policies.empty())
        throw std::invalid_argument("optimize_policy: empty candidate set");
    SlackConfig slack = slack_config;
    if (slack.rank_param == 0) slack.rank_param = candidates.rank_param;
    // The initial distribution enters only through the first-step weighting;
    // the empirical one from the dataset is the data-only choice.
    Vector mu1 = Vector::Zero(dataset.num_states);
    for (const auto& traj : dataset.trajectories) mu1(traj[0].state) += 1.0;
    mu1 /= mu1.sum();

    OptimizeResult out;
    out.estimates.assign(candidates.policies.size(), std::numeric_limits<double>::quiet_NaN());
    out.runs.resize(candidates.policies.size());
    int best = -1;
    for (std::size_t i = 0; i < candidates.policies.size(); ++i) {
        try {
            out.runs[i] = evaluate_policy_finite(dataset, candidates.policies[i], mu1, me_config,
                                                 slack);
            out.estimates[i] = out.runs[i].estimate;
            if (best < 0 || out.estimates[i] > out.estimates[static_cast<std::size_t>(best)])
                best = static_cast<int>(i);
        } catch (const std::exception& e) {
            std::cerr << "optimize_policy: candidate " << i << " failed: " << e.what() << "\n";
        }
    }
    if (best < 0) throw std::runtime_error("optimize_policy: every candidate evaluation failed");
    out.best_index = best;
    out.best = candidates.policies[static_cast<std::size_t>(best)];
    return out;
}

double suboptimality_bound(const CandidateSet& candidates, int K, double delta, double C) {
    if (candidates.policies.empty() || candidates.bounds.empty())
        throw std::invalid_argument("suboptimality_bound: empty candidate set");
    const double H = static_cast<double>(candidates.bounds.size());
    const double S = static_cast<double>(candidates.policies[0].per_step[0].rows());
    const double A = static_cast<double>(candidates.policies[0].per_step[0].cols());
    const double d = static_cast<double>(candidates.rank_param);
    double budget_sum = 0.0;
    for (double b : candidates.bounds) budget_sum += b;
    const double set_size = static_cast<double>(candidates.policies.size());
    const double log_term = std::log(set_size * H * S / delta);
    return 4.0 * H * std::sqrt(d * S * A) * budget_sum +
           C * H * H * std::sqrt(d * (S + A) * log_term / static_cast<double>(K));
}

}  // namespace lowrank
