#pragma once

#include "lowrank/mdp.hpp"
#include "lowrank/types.hpp"

#include <cstdint>
#include <vector>

namespace lowrank {

struct Transition {
    int state = 0;
    int action = 0;
    double reward = 0.0;
};

/// K trajectories of H (s, a, r) triples collected under a behavior policy.
/// Rewards are recorded exactly as the MDP emits them (no observation noise).
struct OfflineDataset {
    std::vector<std::vector<Transition>> trajectories;  // K x H
    std::uint64_t seed = 0;
    int num_states = 0;
    int num_actions = 0;
    int horizon = 0;

    int num_trajectories() const { return static_cast<int>(trajectories.size()); }
};

/// Visitation counts, empirical occupancy n_t/K, empirical partial kernels
/// (defined only for visited pairs) and observed rewards derived from a
/// dataset. Unvisited entries are explicitly undefined rather than zero.
struct EmpiricalModel {
    std::vector<Eigen::MatrixXi> counts;       // H matrices n_t, S x A
    std::vector<Matrix> empirical_occupancy;   // H matrices n_t / K
    std::vector<Matrix> kernel_probs;          // H matrices (S*A) x S; row valid iff defined
    std::vector<std::vector<std::uint8_t>> kernel_defined;  // H vectors of length S*A
    std::vector<MaskedMatrix> observed_rewards;             // H partial S x A

    int horizon() const { return static_cast<int>(counts.size()); }
    KernelSlice kernel_slice(int t) const {
        const auto ti = static_cast<std::size_t>(t);
        return KernelSlice{&kernel_probs[ti], &kernel_defined[ti]};
    }
};

/**
 * Draw K independent trajectories from `mdp` under `behavior`. Each
 * trajectory uses its own counter-derived substream of `seed`, so the result
 * is identical whether trajectories are sampled sequentially or in parallel.
 */
OfflineDataset sample_trajectories(const LowRankMDP& mdp, const Policy& behavior, int K,
                                   std::uint64_t seed);

/// Counts, empirical occupancy and empirical kernel for a nonempty dataset.
/// The kernel at the final step has no successor observations and is left
/// fully undefined; the terminal backup never reads it.
EmpiricalModel empirical_model(const OfflineDataset& dataset);

}  // namespace lowrank
