#pragma once

#include "lowrank/evaluation.hpp"
#include "lowrank/mdp.hpp"
#include "lowrank/offline_data.hpp"

#include <cstdint>
#include <vector>

namespace lowrank {

/// Finite candidate policy set for constrained improvement. Membership is
/// governed by per-step operator-norm budgets that shrink geometrically with
/// distance from the final step; the behavior policy is always member 0.
struct CandidateSet {
    std::vector<Policy> policies;
    std::vector<double> bounds;  // B_t, length H
    int rank_param = 0;
    bool behavior_included = true;
    // Measured ||pi_t - pi^beta_t||_op per candidate and step, against the
    // per-step budget B_t * (d S^2 A)^{(t-H)/2}.
    std::vector<std::vector<double>> constraint_norms;
    std::vector<double> step_budgets;

    int size() const { return static_cast<int>(policies.size()); }
};

/**
 * Rejection-sampled candidate set around `behavior`. Proposals mix each row
 * toward a sparse random row (Dirichlet draw), scaled so the per-step
 * operator-norm distance lands around half the step budget, and are accepted
 * iff every step satisfies its budget. Budgets below 1e-14 snap the step back
 * to the behavior row (the geometric factor underflows for long horizons).
 * If no proposal beyond the behavior policy is accepted after
 * 100 * n_candidates attempts, the set is returned with a warning flag on
 * stderr; it always contains the behavior policy.
 */
CandidateSet build_candidate_set(const Policy& behavior, const std::vector<double>& B, int d,
                                 int S, int A, int n_candidates, std::uint64_t seed);

struct OptimizeResult {
    Policy best;
    int best_index = 0;
    std::vector<double> estimates;   // J-hat per candidate; NaN where evaluation failed
    std::vector<OPERun> runs;        // per surviving candidate (index-aligned, empty on failure)
};

/// Evaluate every candidate on the dataset and return the argmax of the
/// estimates (ties break toward the lowest index). Candidates whose
/// evaluation fails are excluded with a warning; all failing is an error.
OptimizeResult optimize_policy(const OfflineDataset& dataset, const CandidateSet& candidates,
                               const MEConfig& me_config = {}, const SlackConfig& slack_config = {});

/// 4 H sqrt(d S A) sum_t B_t + C H^2 sqrt(d (S+A) log(|set| H S / delta) / K).
double suboptimality_bound(const CandidateSet& candidates, int K, double delta, double C);

}  // namespace lowrank
