"""Smoke tests for the Python bindings: each main operation runs end to end
and agrees with an independent numpy computation where one is cheap."""

import numpy as np
import pytest

import lowrank_ope as lro


@pytest.fixture(scope="module")
def small_mdp():
    return lro.random_low_rank_mdp(4, 3, 2, 2, seed=7, form=lro.FactorizationForm.FORM_I)


def test_mdp_shapes_and_validity(small_mdp):
    small_mdp.validate()
    assert small_mdp.num_states == 4
    assert len(small_mdp.rewards) == 2
    assert small_mdp.rewards[0].shape == (4, 3)
    kernel = small_mdp.kernels[0]
    assert kernel.shape == (12, 4)
    np.testing.assert_allclose(kernel.sum(axis=1), 1.0, atol=1e-9)
    np.testing.assert_allclose(small_mdp.initial_dist.sum(), 1.0, atol=1e-12)


def test_exact_return_matches_numpy(small_mdp):
    policy = lro.random_policy(4, 3, 2, seed=11)
    occ = lro.occupancy_measures(small_mdp, policy)
    expected = sum(
        float(np.sum(np.asarray(occ.state_action[t]) * np.asarray(small_mdp.rewards[t])))
        for t in range(2)
    )
    assert lro.exact_return(small_mdp, policy) == pytest.approx(expected, abs=1e-10)


def test_q_values_bounded(small_mdp):
    policy = lro.uniform_policy(4, 3, 2)
    q = lro.exact_q_values(small_mdp, policy)
    assert len(q) == 2
    assert np.all(np.asarray(q[0]) >= -1e-12)
    assert np.all(np.asarray(q[0]) <= 2.0 + 1e-12)


def test_sampling_deterministic(small_mdp):
    policy = lro.random_policy(4, 3, 2, seed=13)
    a = lro.sample_trajectories(small_mdp, policy, 50, seed=3)
    b = lro.sample_trajectories(small_mdp, policy, 50, seed=3)
    assert a.to_csv() == b.to_csv()
    em = lro.empirical_model(a)
    assert sum(int(c.sum()) for c in em.counts) == 100


def test_norms():
    m = np.eye(3)
    assert lro.operator_norm(m) == pytest.approx(1.0)
    assert lro.nuclear_norm(m) == pytest.approx(3.0)
    lower, upper = lro.max_norm_bound(np.ones((4, 5)))
    assert lower == pytest.approx(1.0, abs=1e-9)
    assert upper == pytest.approx(1.0, abs=1e-6)


def test_solve_me_equality_full_support():
    rng = np.random.default_rng(5)
    y = np.outer(rng.uniform(0.2, 1.0, 4), rng.uniform(0.2, 1.0, 4))
    y /= np.abs(y).max()
    weights = np.full((4, 4), 1.0 / 16.0)
    sol = lro.solve_me(weights, y, entry_bound=1.0, rank_param=2, mode="equality")
    assert sol.converged
    assert np.abs(np.asarray(sol.estimate) - y).max() <= 1e-7


def test_discrepancy_full_support_is_zero():
    p = np.full((3, 3), 1.0 / 9.0)
    q = np.zeros((3, 3))
    q[0, 0] = 0.6
    q[2, 1] = 0.4
    result = lro.operator_discrepancy(p, q)
    assert result.value <= 1e-12
    assert lro.empirical_operator_discrepancy(p, q) >= result.value


def test_infinite_evaluation_full_support(small_mdp):
    behavior = lro.random_policy(4, 3, 2, seed=17)
    target = lro.random_policy(4, 3, 2, seed=19)
    run = lro.evaluate_policy_infinite(small_mdp, behavior, target)
    assert run.estimate == pytest.approx(lro.exact_return(small_mdp, target), abs=1e-6)
    bound = lro.bound_infinite(small_mdp, behavior, target)
    assert bound.total <= 1e-9


def test_finite_evaluation_oracle(small_mdp):
    behavior = lro.random_policy(4, 3, 2, seed=23)
    data = lro.sample_trajectories(small_mdp, behavior, 5000, seed=29)
    run = lro.evaluate_policy_finite(
        data, behavior, small_mdp.initial_dist, slack_mode="oracle", oracle_mdp=small_mdp
    )
    assert abs(run.estimate - lro.exact_return(small_mdp, behavior)) <= 0.2
    assert abs(run.estimate) <= 2.0 + 1e-9


def test_candidate_set_and_optimize(small_mdp):
    behavior = lro.random_policy(4, 3, 2, seed=31)
    cands = lro.build_candidate_set(behavior, [0.2, 0.2], 2, 4, 3, 5, seed=37)
    assert cands.size >= 1
    data = lro.sample_trajectories(small_mdp, behavior, 1000, seed=41)
    result = lro.optimize_policy(data, cands, slack_mode="oracle", oracle_mdp=small_mdp)
    finite = [e for e in result.estimates if np.isfinite(e)]
    assert result.estimates[result.best_index] == pytest.approx(max(finite))
    assert lro.suboptimality_bound(cands, 1000) > 0.0


def test_mdp_json_roundtrip(small_mdp):
    text = small_mdp.to_json()
    back = lro.LowRankMDP.from_json(text)
    np.testing.assert_array_equal(np.asarray(back.kernels[0]), np.asarray(small_mdp.kernels[0]))
    assert back.to_json() == text


def test_experiment_csv_runs():
    config = """
    {"kind": "bandit", "grid": {"n": [4], "m": [2], "K": [1], "H": [1], "d": [2]},
     "n_seeds": 2, "seed": 5, "stable_timing": true,
     "dis": {"max_iters": 300}}
    """
    csv = lro.run_experiment_csv(config)
    assert "experiment,n,m,S,A,H,d,K,seed,mode" in csv
    assert "bandit" in csv
