#pragma once

#include "lowrank/types.hpp"

#include <cstdint>
#include <optional>
#include <variant>
#include <vector>

namespace lowrank {

// ---------------------------------------------------------------------------
// Transition factorizations
// ---------------------------------------------------------------------------

/// P(s'|s,a) = sum_i next_given_state[i](s', s) * action_weight[i](a).
/// Each next_given_state[i] column (fixed s) is a distribution over s' and the
/// action_weight vectors form a convex combination per action, so row sums are
/// exactly one by construction.
struct FormIFactors {
    std::vector<Matrix> next_given_state;  // each S x S, (s', s)
    std::vector<Vector> action_weight;     // each length A
};

/// P(s'|s,a) = sum_i state_weight[i](s) * next_given_action[i](s', a).
struct FormIIFactors {
    std::vector<Vector> state_weight;      // each length S
    std::vector<Matrix> next_given_action; // each S x A, (s', a)
};

/// P(s'|s,a) = sum_i next_state[i](s') * state_weight[i](s) * action_weight[i](a).
/// Satisfies both of the factored forms above.
struct FullFactors {
    std::vector<Vector> next_state;    // each length S
    std::vector<Vector> state_weight;  // each length S
    std::vector<Vector> action_weight; // each length A
};

using TransitionFactors = std::variant<FormIFactors, FormIIFactors, FullFactors>;

enum class FactorizationForm { kFormI, kFormII, kFullyFactorized, kUniform };

const char* to_string(FactorizationForm form);
FactorizationForm factorization_form_from_string(const std::string& name);

/// Dense kernel, one row per (s, a) in sa_index order, reconstructed from the
/// declared factors.
Matrix reconstruct_kernel(const TransitionFactors& factors, Eigen::Index num_states,
                          Eigen::Index num_actions);

// ---------------------------------------------------------------------------
// Core types
// ---------------------------------------------------------------------------

/// Finite-horizon tabular MDP whose transition kernels carry a declared
/// low-dimensional factorization and whose per-step reward matrices have rank
/// at most floor(rank_param / 2). Immutable after construction.
struct LowRankMDP {
    int num_states = 0;
    int num_actions = 0;
    int horizon = 0;
    int rank_param = 0;
    FactorizationForm form = FactorizationForm::kUniform;
    std::vector<Matrix> rewards;             // H matrices, S x A, entries in [0, 1]
    std::vector<Matrix> kernels;             // H matrices, (S*A) x S
    std::vector<TransitionFactors> factors;  // H entries
    Vector initial_dist;                     // length S

    KernelSlice kernel_slice(int t) const { return KernelSlice{&kernels[static_cast<std::size_t>(t)], nullptr}; }

    /// Throws std::invalid_argument if any structural invariant fails:
    /// stochastic kernels, factor reconstruction within 1e-9, reward rank,
    /// initial distribution normalization.
    void validate() const;
};

/// Horizon-indexed row-stochastic decision rule.
struct Policy {
    std::vector<Matrix> per_step;  // H matrices, S x A, rows on the simplex

    int horizon() const { return static_cast<int>(per_step.size()); }
    const Matrix& step(int t) const { return per_step[static_cast<std::size_t>(t)]; }
    void validate() const;
};

struct OccupancyMeasure {
    std::vector<Matrix> state_action;  // H matrices d_t, S x A
    std::vector<Vector> state_only;    // H vectors mu_t, length S
};

// ---------------------------------------------------------------------------
// Generators
// ---------------------------------------------------------------------------

/**
 * Random MDP instance satisfying the declared factorization exactly.
 *
 * Factors are drawn from seeded uniforms and combined as convex mixtures so
 * every P_t(.|s,a) sums to one without any post-hoc projection. Rewards are
 * nonnegative rank-floor(d/2) factor products scaled into [0, 1]. The
 * `kUniform` form produces P_t(s'|s,a) = 1/S with a uniform initial
 * distribution; the other forms use a random full-support initial
 * distribution.
 *
 * Requires 2 <= d <= 2*min(S, A); throws std::invalid_argument otherwise.
 */
LowRankMDP random_low_rank_mdp(int num_states, int num_actions, int horizon, int rank_param,
                               std::uint64_t seed, FactorizationForm form);

/// Uniform-kernel MDP (P = 1/S everywhere, uniform initial distribution) with
/// random low-rank rewards. The disjoint-support experiments build on this.
LowRankMDP uniform_mdp(int num_states, int num_actions, int horizon, int rank_param,
                       std::uint64_t seed);

/// Policy with every row uniform over all actions.
Policy uniform_policy(int num_states, int num_actions, int horizon);

/// Policy with rows drawn from seeded uniforms and normalized (full support).
Policy random_policy(int num_states, int num_actions, int horizon, std::uint64_t seed);

/// Per state and step, a uniformly random subset of `support_size` actions
/// carrying uniform probability; all other actions get exactly zero.
Policy random_supported_policy(int num_states, int num_actions, int horizon, int support_size,
                               std::uint64_t seed);

// ---------------------------------------------------------------------------
// Exact dynamic-programming oracles
// ---------------------------------------------------------------------------

/// Forward recursion: d_1(s,a) = mu_1(s) pi_1(a|s), mu_{t+1} = kernel' d_t,
/// d_{t+1} = (mu_{t+1} 1') o pi_{t+1}.
OccupancyMeasure occupancy_measures(const LowRankMDP& mdp, const Policy& policy);

/// Q_t for t = 1..H via backward application of the exact one-step backup.
/// Q_{H+1} is the zero matrix; 0 <= Q_t <= H - t + 1 when rewards sit in [0,1].
std::vector<Matrix> exact_q_values(const LowRankMDP& mdp, const Policy& policy);

/**
 * Expected total reward of `policy`, computed two ways: first-step
 * Q-weighting sum_{s,a} mu_1(s) pi_1(a|s) Q_1(s,a) and the occupancy-weighted
 * reward sum over all steps. Throws std::logic_error if the two routes
 * disagree beyond 1e-10.
 */
double exact_return(const LowRankMDP& mdp, const Policy& policy);

/**
 * One-step backup (Bf)(s,a) = r(s,a) + sum_{s',a'} P(s'|s,a) pi(a'|s') f(s',a')
 * restricted to `support` (all entries when absent). Entries outside the
 * support come back undefined, never silently zero. Reading an undefined
 * kernel row raises OffSupportError. When f is identically zero the
 * continuation vanishes and the kernel is not consulted, so the terminal-step
 * convention (f = 0 past the horizon) works on partial kernels.
 */
MaskedMatrix bellman_apply(const KernelSlice& kernel, const Matrix& reward,
                           const Matrix& next_policy, const Matrix& f,
                           const std::optional<Mask>& support = std::nullopt);

}  // namespace lowrank
