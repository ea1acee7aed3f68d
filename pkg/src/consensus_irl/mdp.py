"""Tabular MDP primitives: transition kernel estimation, expected action
rewards, and the greedy consensus policy.

Rewards are per-state and bounded to [-1, 1]; the expected reward of taking
action a in state s is the next-state reward averaged under the kernel,
E(s, a) = sum_s' R(s') * P(s, a, s').
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError, SchemaError
from .trajectories import TrajectorySet

ROW_SUM_TOL = 1e-9


@dataclass
class TransitionModel:
    """Tabular stochastic kernel P(s, a, s') with per-(s, a) visit counts."""

    probs: np.ndarray  # (n_states, n_actions, n_states)
    visit_counts: np.ndarray  # (n_states, n_actions) int

    def __post_init__(self):
        self.probs = np.asarray(self.probs, dtype=float)
        self.visit_counts = np.asarray(self.visit_counts, dtype=np.int64)
        if self.probs.ndim != 3 or self.probs.shape[0] != self.probs.shape[2]:
            raise SchemaError("transition kernel must have shape (S, A, S)")
        if np.any(self.probs < 0):
            raise SchemaError("transition kernel has negative entries")
        rows = self.probs.sum(axis=2)
        if np.any(np.abs(rows - 1.0) > ROW_SUM_TOL):
            worst = np.unravel_index(np.argmax(np.abs(rows - 1.0)), rows.shape)
            raise SchemaError(f"transition row {worst} does not sum to 1")

    @property
    def n_states(self) -> int:
        return self.probs.shape[0]

    @property
    def n_actions(self) -> int:
        return self.probs.shape[1]

    def to_json(self, path) -> None:
        payload = {
            "n_states": self.n_states,
            "n_actions": self.n_actions,
            "probs": self.probs.tolist(),
            "visit_counts": self.visit_counts.tolist(),
        }
        with open(path, "w") as fh:
            json.dump(payload, fh)

    @classmethod
    def from_json(cls, path) -> "TransitionModel":
        with open(path) as fh:
            payload = json.load(fh)
        return cls(np.array(payload["probs"]), np.array(payload["visit_counts"]))


@dataclass
class RewardModel:
    """Per-state reward in [-1, 1] plus metadata from the training run."""

    rewards: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.rewards = np.asarray(self.rewards, dtype=float)
        if self.rewards.ndim != 1:
            raise SchemaError("rewards must be a flat per-state vector")
        if np.any(self.rewards < -1.0 - 1e-12) or np.any(self.rewards > 1.0 + 1e-12):
            raise SchemaError("rewards outside [-1, 1]")

    @property
    def n_states(self) -> int:
        return len(self.rewards)

    def to_json(self, path) -> None:
        payload = {"rewards": self.rewards.tolist(), "metadata": self.metadata}
        with open(path, "w") as fh:
            json.dump(payload, fh, sort_keys=True)

    @classmethod
    def from_json(cls, path) -> "RewardModel":
        with open(path) as fh:
            payload = json.load(fh)
        return cls(np.array(payload["rewards"]), payload.get("metadata", {}))


@dataclass
class DeterministicPolicy:
    """One action per state."""

    actions: np.ndarray

    def __post_init__(self):
        self.actions = np.asarray(self.actions, dtype=np.int64)

    def __getitem__(self, s) -> int:
        return int(self.actions[s])

    def __len__(self) -> int:
        return len(self.actions)


def estimate_transitions(trajectories: TrajectorySet, n_states=None, n_actions=None) -> TransitionModel:
    """Empirical next-state frequencies per (s, a).

    (s, a) pairs never observed get a deterministic self-loop P(s, a, s) = 1,
    which keeps unseen actions reward-neutral relative to the current state.
    No smoothing is applied to observed rows.
    """
    n_states = n_states if n_states is not None else trajectories.n_states
    n_actions = n_actions if n_actions is not None else trajectories.n_actions
    counts = np.zeros((n_states, n_actions, n_states))
    for tr in trajectories:
        s, a, sp = tr.triples[:, 0], tr.triples[:, 1], tr.triples[:, 2]
        if s.max() >= n_states or sp.max() >= n_states:
            raise ParameterError(f"trajectory {tr.id}: state id exceeds n_states")
        if a.max() >= n_actions:
            raise ParameterError(f"trajectory {tr.id}: action id exceeds n_actions")
        np.add.at(counts, (s, a, sp), 1)
    visit = counts.sum(axis=2)
    probs = np.zeros_like(counts)
    seen = visit > 0
    probs[seen] = counts[seen] / visit[seen, None]
    unseen_s, unseen_a = np.nonzero(~seen)
    probs[unseen_s, unseen_a, unseen_s] = 1.0
    return TransitionModel(probs, visit.astype(np.int64))


def expected_reward_table(model: TransitionModel, reward: RewardModel) -> np.ndarray:
    """E(s, a) = sum_s' R(s') P(s, a, s') for every state-action pair."""
    if reward.n_states != model.n_states:
        raise ParameterError("reward and transition model disagree on n_states")
    return model.probs @ reward.rewards


def expected_action_reward(s: int, a: int, model: TransitionModel, reward: RewardModel) -> float:
    """Expected next-state reward of taking action a in state s."""
    if not (0 <= s < model.n_states and 0 <= a < model.n_actions):
        raise ParameterError(f"state/action ({s}, {a}) out of range")
    return float(model.probs[s, a] @ reward.rewards)


def greedy_policy(model: TransitionModel, reward: RewardModel) -> DeterministicPolicy:
    """Argmax_a E(s, a) per state; ties broken toward the lowest action index."""
    table = expected_reward_table(model, reward)
    return DeterministicPolicy(np.argmax(table, axis=1))


def write_expected_reward_csv(model: TransitionModel, reward: RewardModel, path) -> None:
    """Debug export of the full E(s, a) table."""
    table = expected_reward_table(model, reward)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["state"] + [f"action_{a}" for a in range(model.n_actions)])
        for s in range(model.n_states):
            writer.writerow([s] + [repr(float(v)) for v in table[s]])
