#include "lowrank/offline_data.hpp"

#include "lowrank/rng.hpp"

#include <stdexcept>

namespace lowrank {

namespace {

int sample_categorical(SplitMix64& rng, const double* probs, int n) {
    const double u = rng.next_double();
    double acc = 0.0;
    for (int i = 0; i < n; ++i) {
        acc += probs[i];
        if (u < acc) return i;
    }
    return n - 1;  // guard against rounding at the top of the CDF
}

int sample_row(SplitMix64& rng, const Matrix& m, Eigen::Index row) {
    const Vector p = m.row(row);
    return sample_categorical(rng, p.data(), static_cast<int>(p.size()));
}

}  // namespace

OfflineDataset sample_trajectories(const LowRankMDP& mdp, const Policy& behavior, int K,
                                   std::uint64_t seed) {
    if (K < 1) throw std::invalid_argument("sample_trajectories: K must be >= 1");
    if (behavior.horizon() != mdp.horizon) throw std::invalid_argument("horizon mismatch");
    const int S = mdp.num_states, A = mdp.num_actions, H = mdp.horizon;
    OfflineDataset data;
    data.seed = seed;
    data.num_states = S;
    data.num_actions = A;
    data.horizon = H;
    data.trajectories.resize(static_cast<std::size_t>(K));
    for (int k = 0; k < K; ++k) {
        SplitMix64 rng(SplitMix64::derive(seed, static_cast<std::uint64_t>(k)));
        auto& traj = data.trajectories[static_cast<std::size_t>(k)];
        traj.resize(static_cast<std::size_t>(H));
        int s = sample_categorical(rng, mdp.initial_dist.data(), S);
        for (int t = 0; t < H; ++t) {
            const int a = sample_row(rng, behavior.step(t), s);
            traj[static_cast<std::size_t>(t)] = {s, a, mdp.rewards[static_cast<std::size_t>(t)](s, a)};
            if (t + 1 < H)
                s = sample_row(rng, mdp.kernels[static_cast<std::size_t>(t)], sa_index(s, a, A));
        }
    }
    return data;
}

EmpiricalModel empirical_model(const OfflineDataset& dataset) {
    const int K = dataset.num_trajectories();
    if (K == 0) throw std::invalid_argument("empirical_model: empty dataset");
    const int S = dataset.num_states, A = dataset.num_actions, H = dataset.horizon;
    EmpiricalModel em;
    em.counts.assign(static_cast<std::size_t>(H), Eigen::MatrixXi::Zero(S, A));
    em.kernel_probs.assign(static_cast<std::size_t>(H), Matrix::Zero(S * A, S));
    em.kernel_defined.assign(static_cast<std::size_t>(H),
                             std::vector<std::uint8_t>(static_cast<std::size_t>(S * A), 0));
    for (int t = 0; t < H; ++t) em.observed_rewards.push_back(MaskedMatrix::undefined(S, A));

    std::vector<Eigen::MatrixXi> transition_counts(static_cast<std::size_t>(H),
                                                   Eigen::MatrixXi::Zero(S * A, S));
    for (const auto& traj : dataset.trajectories) {
        for (int t = 0; t < H; ++t) {
            const auto& step = traj[static_cast<std::size_t>(t)];
            em.counts[static_cast<std::size_t>(t)](step.state, step.action) += 1;
            auto& rewards = em.observed_rewards[static_cast<std::size_t>(t)];
            rewards.values(step.state, step.action) = step.reward;
            rewards.defined(step.state, step.action) = true;
            if (t + 1 < H) {
                const int next = traj[static_cast<std::size_t>(t + 1)].state;
                transition_counts[static_cast<std::size_t>(t)](
                    sa_index(step.state, step.action, A), next) += 1;
            }
        }
    }
    for (int t = 0; t < H; ++t) {
        const auto ti = static_cast<std::size_t>(t);
        em.empirical_occupancy.push_back(em.counts[ti].cast<double>() / static_cast<double>(K));
        if (t + 1 == H) continue;  // no successor observations at the final step
        for (Eigen::Index sa = 0; sa < S * A; ++sa) {
            const int visits = transition_counts[ti].row(sa).sum();
            if (visits == 0) continue;
            em.kernel_probs[ti].row(sa) =
                transition_counts[ti].row(sa).cast<double>() / static_cast<double>(visits);
            em.kernel_defined[ti][static_cast<std::size_t>(sa)] = 1;
        }
    }
    return em;
}

}  // namespace lowrank
