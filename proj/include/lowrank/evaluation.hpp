#pragma once

#include "lowrank/completion.hpp"
#include "lowrank/discrepancy.hpp"
#include "lowrank/mdp.hpp"
#include "lowrank/offline_data.hpp"
#include "lowrank/types.hpp"

#include <vector>

namespace lowrank {

enum class EvalMode { kInfiniteSample, kFiniteSample };

struct StepDiagnostics {
    int t = 0;                        // 1-based step index
    int support_size = 0;             // |supp(rho_t)|
    double residual = 0.0;            // ME constraint residual
    double max_norm_certificate = 0.0;
    double cap = 0.0;                 // sqrt(d) * L_t
    double slack = 0.0;               // finite mode: inner-product slack used
    int iterations = 0;
    bool converged = false;
    double emp_discrepancy = 0.0;     // ||rho_t - d_t^theta||_op when the oracle is known, else NaN
};

/// Output of one backward evaluation pass.
struct OPERun {
    EvalMode mode = EvalMode::kInfiniteSample;
    double estimate = 0.0;                 // J-hat
    std::vector<Matrix> q_estimates;       // H matrices Q-hat_t
    std::vector<MaskedMatrix> per_step_z;  // H partial backup targets on supp(rho_t)
    std::vector<StepDiagnostics> diagnostics;
};

/// How the finite-sample program's slack is chosen. The constraint couples the
/// empirical backup to its population counterpart, which is not observable
/// from data; oracle mode computes it exactly from a known MDP, plugin mode
/// substitutes the concentration-rate surrogate c * H * sqrt(S log(HS/delta)/K).
struct SlackConfig {
    enum class Mode { kOracle, kPlugin };
    Mode mode = Mode::kPlugin;
    const LowRankMDP* oracle_mdp = nullptr;  // required in oracle mode
    double scale_c = 1.0;
    double delta = 0.05;
    int rank_param = 0;  // d for the completion step when no oracle MDP supplies it
};

/**
 * Backward Q-iteration with exact-equality matrix estimation. The weight
 * matrix at step t is the exact behavior occupancy d_t^beta (entries above
 * 1e-12, renormalized), backup targets are computed with the true kernel on
 * that support, and each step solves the equality-mode completion. Failures
 * of the completion solver propagate with the step index attached.
 */
OPERun evaluate_policy_infinite(const LowRankMDP& mdp, const Policy& behavior,
                                const Policy& target, const MEConfig& me_config = {});

/**
 * Finite-sample pass: weights are the empirical occupancy n_t/K, backup
 * targets use the empirical kernel on its support, and each step solves the
 * inner-product-mode completion with the slack from `slack_config`.
 */
OPERun evaluate_policy_finite(const OfflineDataset& dataset, const Policy& target,
                              const Vector& initial_dist, const MEConfig& me_config = {},
                              const SlackConfig& slack_config = {});

struct BoundBreakdown {
    double total = 0.0;
    std::vector<double> per_step;      // discrepancy values, one per t
    double statistical_term = 0.0;     // finite bound only
    bool regime_exceeded = false;      // finite bound: K outside 2 < K < SA
};

/// 2 H sqrt(d S A) * sum_t Dis(d_t^beta, d_t^theta), with per-step breakdown.
BoundBreakdown bound_infinite(const LowRankMDP& mdp, const Policy& behavior, const Policy& target,
                              const DiscrepancyConfig& dis_config = {});

/// 2 H sqrt(d S A) * sum_t ||d_t^beta - d_t^theta||_op
///   + C H^2 sqrt(d (S + A) log(H S / delta) / K).
/// Evaluated for any K >= 1; regime_exceeded flags K outside (2, SA).
BoundBreakdown bound_finite(const LowRankMDP& mdp, const Policy& behavior, const Policy& target,
                            int K, double delta, double C);

}  // namespace lowrank
