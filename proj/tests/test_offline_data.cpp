#include "lowrank/io.hpp"
#include "lowrank/offline_data.hpp"

#include <doctest.h>

#include <cmath>
#include <sstream>

using namespace lowrank;

namespace {

LowRankMDP deterministic_mdp() {
    LowRankMDP mdp;
    mdp.num_states = 2;
    mdp.num_actions = 1;
    mdp.horizon = 3;
    mdp.rank_param = 2;
    mdp.form = FactorizationForm::kFullyFactorized;
    FullFactors f;
    Vector next(2);
    next << 0.0, 1.0;
    f.next_state.push_back(next);
    f.state_weight.push_back(Vector::Ones(2));
    f.action_weight.push_back(Vector::Ones(1));
    for (int t = 0; t < 3; ++t) {
        mdp.factors.push_back(f);
        mdp.kernels.push_back(reconstruct_kernel(f, 2, 1));
        mdp.rewards.push_back(Matrix::Constant(2, 1, 0.5));
    }
    mdp.initial_dist = Vector(2);
    mdp.initial_dist << 1.0, 0.0;
    return mdp;
}

std::string dataset_bytes(const OfflineDataset& data) {
    std::ostringstream ss;
    write_dataset(ss, data);
    return ss.str();
}

}  // namespace

TEST_CASE("deterministic dynamics and policy give identical trajectories") {
    const LowRankMDP mdp = deterministic_mdp();
    const Policy policy = uniform_policy(2, 1, 3);  // single action: deterministic
    const OfflineDataset data = sample_trajectories(mdp, policy, 16, 99);
    for (const auto& traj : data.trajectories) {
        CHECK(traj[0].state == 0);
        CHECK(traj[1].state == 1);
        CHECK(traj[2].state == 1);
        for (const auto& step : traj) CHECK(step.reward == 0.5);
    }
}

TEST_CASE("second-step state frequencies concentrate under a uniform kernel") {
    const int K = 100000;
    const LowRankMDP mdp = random_low_rank_mdp(4, 4, 2, 2, 7, FactorizationForm::kUniform);
    const Policy behavior = random_policy(4, 4, 2, 11);
    const OfflineDataset data = sample_trajectories(mdp, behavior, K, 13);
    Vector freq = Vector::Zero(4);
    for (const auto& traj : data.trajectories) freq(traj[1].state) += 1.0;
    freq /= static_cast<double>(K);
    const double band = 4.0 * std::sqrt(std::log(4.0) / static_cast<double>(K));
    CHECK((freq.array() - 0.25).abs().maxCoeff() <= band);
}

TEST_CASE("sampling is byte-identical for a fixed seed") {
    const LowRankMDP mdp = random_low_rank_mdp(5, 3, 3, 2, 17, FactorizationForm::kFormI);
    const Policy behavior = random_policy(5, 3, 3, 19);
    const OfflineDataset a = sample_trajectories(mdp, behavior, 500, 23);
    const OfflineDataset b = sample_trajectories(mdp, behavior, 500, 23);
    CHECK(dataset_bytes(a) == dataset_bytes(b));
    const OfflineDataset c = sample_trajectories(mdp, behavior, 500, 24);
    CHECK(dataset_bytes(a) != dataset_bytes(c));
}

TEST_CASE("single-trajectory empirical occupancy is a point mass per step") {
    const LowRankMDP mdp = random_low_rank_mdp(4, 3, 3, 2, 29, FactorizationForm::kFormII);
    const Policy behavior = random_policy(4, 3, 3, 31);
    const OfflineDataset data = sample_trajectories(mdp, behavior, 1, 37);
    const EmpiricalModel em = empirical_model(data);
    for (int t = 0; t < 3; ++t) {
        CHECK(em.empirical_occupancy[t].sum() == doctest::Approx(1.0));
        CHECK(em.empirical_occupancy[t].maxCoeff() == doctest::Approx(1.0));
        CHECK((em.counts[t].array() > 0).count() == 1);
    }
}

TEST_CASE("empirical occupancy layers each sum to one") {
    const LowRankMDP mdp = random_low_rank_mdp(4, 4, 4, 2, 41, FactorizationForm::kFormI);
    const Policy behavior = random_policy(4, 4, 4, 43);
    const OfflineDataset data = sample_trajectories(mdp, behavior, 250, 47);
    const EmpiricalModel em = empirical_model(data);
    double total = 0.0;
    for (int t = 0; t < 4; ++t) {
        CHECK(em.counts[t].sum() == 250);
        total += em.empirical_occupancy[t].sum();
    }
    CHECK(total == doctest::Approx(4.0));
}

TEST_CASE("empirical kernel rows are exact count ratios on visited pairs") {
    const LowRankMDP mdp = random_low_rank_mdp(4, 3, 3, 2, 53, FactorizationForm::kFormII);
    const Policy behavior = random_policy(4, 3, 3, 59);
    const OfflineDataset data = sample_trajectories(mdp, behavior, 400, 61);
    const EmpiricalModel em = empirical_model(data);
    for (int t = 0; t + 1 < 3; ++t) {
        for (int sa = 0; sa < 12; ++sa) {
            if (!em.kernel_slice(t).is_defined(sa)) continue;
            CHECK(em.kernel_probs[t].row(sa).sum() == doctest::Approx(1.0).epsilon(1e-15));
        }
        // Defined exactly where the pair was visited.
        for (int s = 0; s < 4; ++s)
            for (int a = 0; a < 3; ++a)
                CHECK(em.kernel_slice(t).is_defined(sa_index(s, a, 3)) ==
                      (em.counts[t](s, a) > 0));
    }
}

TEST_CASE("empirical kernel concentrates around the uniform kernel") {
    const int K = 40000;
    const LowRankMDP mdp = random_low_rank_mdp(4, 4, 2, 2, 67, FactorizationForm::kUniform);
    const Policy behavior = uniform_policy(4, 4, 2);
    const OfflineDataset data = sample_trajectories(mdp, behavior, K, 71);
    const EmpiricalModel em = empirical_model(data);
    const double log_term = std::log(4.0 * 4.0 * static_cast<double>(K));
    for (int sa = 0; sa < 16; ++sa) {
        if (!em.kernel_slice(0).is_defined(sa)) continue;
        const int n = em.counts[0](sa / 4, sa % 4);
        const double band = 3.0 * std::sqrt(4.0 * log_term / static_cast<double>(n));
        CHECK((em.kernel_probs[0].row(sa).array() - 0.25).abs().maxCoeff() <= band);
    }
}

TEST_CASE("empirical occupancy is unbiased across seeds") {
    const LowRankMDP mdp = random_low_rank_mdp(3, 3, 2, 2, 73, FactorizationForm::kFormI);
    const Policy behavior = random_policy(3, 3, 2, 79);
    const OccupancyMeasure occ = occupancy_measures(mdp, behavior);
    const int seeds = 200, K = 100;
    std::vector<Matrix> mean(2, Matrix::Zero(3, 3));
    for (int i = 0; i < seeds; ++i) {
        const EmpiricalModel em =
            empirical_model(sample_trajectories(mdp, behavior, K, 1000 + i));
        for (int t = 0; t < 2; ++t) mean[t] += em.empirical_occupancy[t];
    }
    for (int t = 0; t < 2; ++t) {
        mean[t] /= static_cast<double>(seeds);
        for (int s = 0; s < 3; ++s) {
            for (int a = 0; a < 3; ++a) {
                const double p = occ.state_action[t](s, a);
                const double var = p * (1.0 - p) / static_cast<double>(K);
                const double band = 5.0 * std::sqrt(var / static_cast<double>(seeds)) + 1e-12;
                CHECK(std::abs(mean[t](s, a) - p) <= band);
            }
        }
    }
}

TEST_CASE("empirical support never leaves the exact support") {
    const LowRankMDP mdp = random_low_rank_mdp(5, 5, 3, 2, 83, FactorizationForm::kFormII);
    const Policy behavior = random_supported_policy(5, 5, 3, 2, 89);
    const OccupancyMeasure occ = occupancy_measures(mdp, behavior);
    const OfflineDataset data = sample_trajectories(mdp, behavior, 2000, 97);
    const EmpiricalModel em = empirical_model(data);
    for (int t = 0; t < 3; ++t)
        for (int s = 0; s < 5; ++s)
            for (int a = 0; a < 5; ++a)
                if (em.counts[t](s, a) > 0) CHECK(occ.state_action[t](s, a) > 1e-12);
}

TEST_CASE("rewards are recorded exactly as the MDP emits them") {
    const LowRankMDP mdp = random_low_rank_mdp(4, 4, 2, 2, 101, FactorizationForm::kFormI);
    const Policy behavior = random_policy(4, 4, 2, 103);
    const OfflineDataset data = sample_trajectories(mdp, behavior, 50, 107);
    for (const auto& traj : data.trajectories)
        for (int t = 0; t < 2; ++t)
            CHECK(traj[t].reward == mdp.rewards[t](traj[t].state, traj[t].action));
}
