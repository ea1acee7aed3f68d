"""Tabular maximum-entropy IRL with a time-indexed soft backward pass.

The reward is parameterized per state (one-hot features), so the feature-
matching gradient is simply the difference between the empirical state
visitation of the demonstrations and the visitation induced by the current
reward. Updates are full-batch gradient ascent, either additive (SGA) or
elementwise-multiplicative exponentiated (ExpSGA), both with a linearly
decaying learning rate.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.special import logsumexp

from .errors import CohortEmptyError, NumericError, ParameterError
from .mdp import RewardModel, TransitionModel
from .trajectories import TrajectorySet

OPTIMIZERS = ("sga", "expsga")
INITS = ("ones", "gaussian")


@dataclass
class IrlConfig:
    """Training knobs for one MaxEnt IRL stage.

    horizon=None means "longest trajectory in the training set". ExpSGA
    multiplies weights by exp(lr * grad) elementwise and therefore needs a
    strictly positive initialization, so it is only valid with init="ones".
    """

    optimizer: str = "sga"
    lr0: float = 0.2
    epochs: int = 200
    init: str = "ones"
    grad_tolerance: float = 1e-4
    horizon: int | None = None
    seed: int = 0

    def __post_init__(self):
        if self.optimizer not in OPTIMIZERS:
            raise ParameterError(f"unknown optimizer {self.optimizer!r}")
        if self.init not in INITS:
            raise ParameterError(f"unknown init {self.init!r}")
        if self.optimizer == "expsga" and self.init != "ones":
            raise ParameterError("expsga requires the all-positive 'ones' init")
        if self.lr0 <= 0:
            raise ParameterError("lr0 must be positive")
        if self.epochs < 1:
            raise ParameterError("epochs must be >= 1")
        if self.horizon is not None and self.horizon < 1:
            raise ParameterError("horizon must be >= 1")

    def with_seed(self, seed: int) -> "IrlConfig":
        return replace(self, seed=seed)


@dataclass
class SoftPolicy:
    """Per-time-step action probabilities pi_t(a | s), shape (horizon, S, A)."""

    probs: np.ndarray

    def __post_init__(self):
        self.probs = np.asarray(self.probs, dtype=float)
        if self.probs.ndim != 3:
            raise ParameterError("soft policy must have shape (horizon, S, A)")

    @property
    def horizon(self) -> int:
        return self.probs.shape[0]


@dataclass
class FeatureExpectations:
    """Per-state expected visitation mass, tagged empirical or model."""

    values: np.ndarray
    role: str

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)


def _reward_vector(reward) -> np.ndarray:
    if isinstance(reward, RewardModel):
        return reward.rewards
    return np.asarray(reward, dtype=float)


def empirical_state_visitation(trajectories: TrajectorySet, n_states=None) -> FeatureExpectations:
    """Mean per-trajectory state visit counts (initial state plus every next state)."""
    if len(trajectories) == 0:
        raise CohortEmptyError("cannot compute visitation of an empty trajectory set")
    n_states = n_states if n_states is not None else trajectories.n_states
    counts = np.zeros(n_states)
    for tr in trajectories:
        np.add.at(counts, tr.states, 1)
    return FeatureExpectations(counts / len(trajectories), "empirical")


def initial_state_distribution(trajectories: TrajectorySet, n_states=None) -> np.ndarray:
    """Empirical frequency of each trajectory's first state."""
    if len(trajectories) == 0:
        raise CohortEmptyError("cannot compute initial distribution of an empty set")
    n_states = n_states if n_states is not None else trajectories.n_states
    d0 = np.zeros(n_states)
    for tr in trajectories:
        d0[tr.triples[0, 0]] += 1
    return d0 / len(trajectories)


def soft_backward_pass(transitions: TransitionModel, reward, horizon: int) -> SoftPolicy:
    """Finite-horizon soft value recursion.

    V_horizon = 0; going backward, Q_t(s,a) = sum_s' P(s,a,s') (R(s') + V_{t+1}(s'))
    and V_t = logsumexp_a Q_t. The returned policy is pi_t(a|s) =
    exp(Q_t(s,a) - V_t(s)). Rewards are collected on arrival at s'.
    """
    r = _reward_vector(reward)
    if horizon < 1:
        raise ParameterError("horizon must be >= 1")
    if len(r) != transitions.n_states:
        raise ParameterError("reward length does not match transition model")
    n_states, n_actions = transitions.n_states, transitions.n_actions
    policy = np.empty((horizon, n_states, n_actions))
    v = np.zeros(n_states)
    for t in range(horizon - 1, -1, -1):
        q = transitions.probs @ (r + v)
        v = logsumexp(q, axis=1)
        if not np.all(np.isfinite(v)):
            s_bad = int(np.flatnonzero(~np.isfinite(v))[0])
            raise NumericError(f"soft backward pass: non-finite value at (t={t}, s={s_bad})")
        policy[t] = np.exp(q - v[:, None])
    return SoftPolicy(policy)


def expected_state_visitation(
    transitions: TransitionModel,
    policy: SoftPolicy,
    initial_distribution: np.ndarray,
    horizon: int | None = None,
) -> FeatureExpectations:
    """Forward pass: total expected state visitation mass over t = 0..horizon."""
    d = np.asarray(initial_distribution, dtype=float)
    if abs(d.sum() - 1.0) > 1e-9 or np.any(d < 0):
        raise ParameterError("initial distribution must be a probability vector")
    horizon = horizon if horizon is not None else policy.horizon
    if horizon > policy.horizon:
        raise ParameterError("horizon exceeds the policy's time range")
    total = d.copy()
    for t in range(horizon):
        # D_{t+1}(s') = sum_{s,a} D_t(s) pi_t(a|s) P(s,a,s')
        d = np.einsum("s,sa,sap->p", d, policy.probs[t], transitions.probs)
        total += d
    return FeatureExpectations(total, "model")


def _rescale_rewards(theta: np.ndarray, optimizer: str) -> tuple[np.ndarray, str]:
    """Affine map of the trained weights into [-1, 1]."""
    if optimizer == "expsga":
        lo, hi = theta.min(), theta.max()
        if hi - lo < 1e-300:
            return np.zeros_like(theta), "degenerate-zero"
        return 2.0 * (theta - lo) / (hi - lo) - 1.0, "minmax"
    peak = np.abs(theta).max()
    if peak < 1e-300:
        return np.zeros_like(theta), "degenerate-zero"
    return theta / peak, "max-abs"


def train_maxent_irl(
    trajectories: TrajectorySet,
    transitions: TransitionModel,
    config: IrlConfig,
    stage: str = "stage1",
) -> RewardModel:
    """Fit a per-state reward by feature-matching gradient ascent.

    The gradient at epoch k is (empirical - model visitation); the step size
    decays linearly, eta_k = lr0 * (1 - k / epochs). Training stops early once
    max|grad| falls below config.grad_tolerance. The final weights are
    affinely rescaled into [-1, 1].
    """
    if len(trajectories) == 0:
        raise CohortEmptyError("cannot train on an empty trajectory set")
    n_states = transitions.n_states
    horizon = config.horizon if config.horizon is not None else trajectories.max_length()

    empirical = empirical_state_visitation(trajectories, n_states).values
    d0 = initial_state_distribution(trajectories, n_states)

    if config.init == "ones":
        theta = np.ones(n_states)
    else:
        theta = np.random.default_rng(config.seed).normal(0.0, 1.0, size=n_states)

    log_rows = []
    grad_max = np.inf
    epochs_run = 0
    for k in range(config.epochs):
        policy = soft_backward_pass(transitions, theta, horizon)
        model = expected_state_visitation(transitions, policy, d0, horizon).values
        grad = empirical - model
        grad_max = float(np.abs(grad).max())
        lr = config.lr0 * (1.0 - k / config.epochs)
        log_rows.append((k, grad_max, lr))
        if grad_max < config.grad_tolerance:
            break
        if config.optimizer == "sga":
            theta = theta + lr * grad
        else:
            theta = theta * np.exp(lr * grad)
        epochs_run = k + 1
        if not np.all(np.isfinite(theta)):
            raise NumericError(f"maxent training diverged at epoch {k}")

    rewards, rescale = _rescale_rewards(theta, config.optimizer)
    unvisited = np.flatnonzero(empirical == 0)
    metadata = {
        "stage": stage,
        "optimizer": config.optimizer,
        "init": config.init,
        "lr0": config.lr0,
        "epochs_requested": config.epochs,
        "epochs_run": epochs_run,
        "final_grad_max": grad_max,
        "grad_tolerance": config.grad_tolerance,
        "horizon": int(horizon),
        "seed": config.seed,
        "rescale": rescale,
        "n_trajectories": len(trajectories),
        "unvisited_states": [int(s) for s in unvisited],
        "training_log": [
            {"epoch": e, "grad_max": g, "lr": lr} for e, g, lr in log_rows
        ],
    }
    return RewardModel(rewards, metadata)


def write_training_log(reward: RewardModel, path) -> None:
    """CSV of (epoch, max|grad|, learning rate) from a RewardModel's metadata."""
    import csv

    rows = reward.metadata.get("training_log", [])
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "grad_max", "lr"])
        for row in rows:
            writer.writerow([row["epoch"], repr(row["grad_max"]), repr(row["lr"])])
