import numpy as np
import pytest

import consensus_irl as ci


def tset_from_triples(triple_lists, n_states, n_actions):
    trs = [
        ci.Trajectory(f"t{i}", np.array(t, dtype=np.int64), {}, False)
        for i, t in enumerate(triple_lists)
    ]
    return ci.TrajectorySet(trs, n_states, n_actions)


def test_estimate_transitions_frequencies():
    # visits of (0,0): twice to 1, once to 2
    tset = tset_from_triples(
        [[(0, 0, 1), (1, 0, 0), (0, 0, 1)], [(0, 0, 2), (2, 0, 0)]], 3, 1
    )
    model = ci.estimate_transitions(tset)
    assert model.probs[0, 0, 1] == pytest.approx(2 / 3)
    assert model.probs[0, 0, 2] == pytest.approx(1 / 3)
    assert model.visit_counts[0, 0] == 3


def test_unseen_pair_gets_self_loop():
    tset = tset_from_triples([[(0, 0, 1)]], 6, 2)
    model = ci.estimate_transitions(tset)
    assert model.probs[5, 1, 5] == 1.0
    assert model.visit_counts[5, 1] == 0


def test_rows_sum_to_one(small_population):
    model = ci.estimate_transitions(small_population.trajectories)
    sums = model.probs.sum(axis=2)
    assert np.abs(sums - 1.0).max() < 1e-9


def test_expected_action_reward_two_state(two_state):
    transitions, reward = two_state
    assert ci.expected_action_reward(0, 0, transitions, reward) == pytest.approx(-1.0)
    assert ci.expected_action_reward(0, 1, transitions, reward) == pytest.approx(1.0)


def test_expected_reward_zero_everywhere(two_state):
    transitions, _ = two_state
    zero = ci.RewardModel(np.zeros(2))
    assert np.all(ci.expected_reward_table(transitions, zero) == 0.0)


def test_expected_reward_uniform_kernel():
    probs = np.full((4, 1, 4), 0.25)
    model = ci.TransitionModel(probs, np.ones((4, 1), dtype=np.int64))
    reward = ci.RewardModel(np.array([0.1, 0.2, 0.3, 0.4]))
    table = ci.expected_reward_table(model, reward)
    assert table == pytest.approx(np.full((4, 1), 0.25))


def test_greedy_policy_two_state(two_state):
    transitions, reward = two_state
    policy = ci.greedy_policy(transitions, reward)
    assert policy.actions[0] == 1


def test_greedy_tie_break_lowest_action():
    # both actions share one kernel: every E(s, a) ties, action 0 must win
    probs = np.zeros((3, 2, 3))
    probs[:, :, 1] = 1.0
    model = ci.TransitionModel(probs, np.ones((3, 2), dtype=np.int64))
    reward = ci.RewardModel(np.array([0.3, -0.2, 0.9]))
    assert np.all(ci.greedy_policy(model, reward).actions == 0)


def test_greedy_invariant_under_constant_shift(small_population):
    model = ci.estimate_transitions(small_population.trajectories)
    rng = np.random.default_rng(3)
    base = rng.uniform(-0.5, 0.5, model.n_states)
    p1 = ci.greedy_policy(model, ci.RewardModel(base))
    p2 = ci.greedy_policy(model, ci.RewardModel(base + 0.4))
    assert np.array_equal(p1.actions, p2.actions)


def test_expected_reward_linear_in_reward(small_population):
    model = ci.estimate_transitions(small_population.trajectories)
    rng = np.random.default_rng(4)
    r1 = rng.uniform(-1, 1, model.n_states)
    r2 = rng.uniform(-1, 1, model.n_states)
    a, b = 0.3, -0.6
    combo = ci.expected_reward_table(model, ci.RewardModel(a * r1 + b * r2))
    split = a * ci.expected_reward_table(model, ci.RewardModel(r1)) + \
        b * ci.expected_reward_table(model, ci.RewardModel(r2))
    assert combo == pytest.approx(split, abs=1e-12)


def test_reward_range_validated():
    with pytest.raises(ci.InputError):
        ci.RewardModel(np.array([0.0, 1.5]))


def test_transition_model_json_round_trip(tmp_path, small_population):
    model = ci.estimate_transitions(small_population.trajectories)
    path = tmp_path / "t.json"
    model.to_json(path)
    back = ci.TransitionModel.from_json(path)
    assert np.array_equal(back.probs, model.probs)
    assert np.array_equal(back.visit_counts, model.visit_counts)


def test_reward_model_json_round_trip(tmp_path):
    reward = ci.RewardModel(np.array([0.25, -1.0, 1.0]), {"stage": "stage1", "seed": 3})
    path = tmp_path / "r.json"
    reward.to_json(path)
    back = ci.RewardModel.from_json(path)
    assert np.array_equal(back.rewards, reward.rewards)
    assert back.metadata == reward.metadata
