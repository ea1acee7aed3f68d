"""Ground-truth random MDPs and mixed expert populations.

Worlds are garnet-style: every (s, a) row spreads its probability over a
fixed number of uniformly chosen successor states with Dirichlet weights.
The true reward marks a small set of good (+1) and bad (-1) states with the
rest near zero. Expert populations mix Boltzmann-rational demonstrators with
a corrupted subset (random actions, negated reward, or degraded temperature),
each trajectory carrying a ground-truth corruption label so pruning quality
can be measured directly.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import spearmanr

from .errors import ParameterError
from .mdp import DeterministicPolicy, TransitionModel
from .trajectories import Trajectory, TrajectorySet

CORRUPTION_MODES = ("random_policy", "negated_reward", "low_temperature")

# synthetic subjects "die" when they end in a clearly bad true-reward state
DEATH_REWARD_CUTOFF = -0.5


def finite_horizon_values(probs: np.ndarray, rewards: np.ndarray, horizon: int):
    """Hard-max value iteration with rewards collected on arrival.

    Returns (v0, q0): the optimal state values and action values at the
    first step of an undiscounted horizon-step episode.
    """
    v = np.zeros(probs.shape[0])
    q = None
    for _ in range(horizon):
        q = probs @ (rewards + v)
        v = q.max(axis=1)
    return v, q


@dataclass
class SyntheticWorld:
    """A random tabular MDP with known reward and optimal behavior."""

    n_states: int
    n_actions: int
    branching: int
    probs: np.ndarray
    rewards: np.ndarray
    optimal_policy: DeterministicPolicy
    optimal_q: np.ndarray
    horizon: int
    initial_distribution: np.ndarray
    seed: int

    def transition_model(self) -> TransitionModel:
        visit = np.ones((self.n_states, self.n_actions), dtype=np.int64)
        return TransitionModel(self.probs, visit)

    def to_json(self, path) -> None:
        payload = {
            "n_states": self.n_states,
            "n_actions": self.n_actions,
            "branching": self.branching,
            "probs": self.probs.tolist(),
            "rewards": self.rewards.tolist(),
            "optimal_policy": self.optimal_policy.actions.tolist(),
            "optimal_q": self.optimal_q.tolist(),
            "horizon": self.horizon,
            "initial_distribution": self.initial_distribution.tolist(),
            "seed": self.seed,
        }
        with open(path, "w") as fh:
            json.dump(payload, fh)

    @classmethod
    def from_json(cls, path) -> "SyntheticWorld":
        with open(path) as fh:
            p = json.load(fh)
        return cls(
            n_states=p["n_states"],
            n_actions=p["n_actions"],
            branching=p["branching"],
            probs=np.array(p["probs"]),
            rewards=np.array(p["rewards"]),
            optimal_policy=DeterministicPolicy(np.array(p["optimal_policy"])),
            optimal_q=np.array(p["optimal_q"]),
            horizon=p["horizon"],
            initial_distribution=np.array(p["initial_distribution"]),
            seed=p["seed"],
        )


@dataclass
class DemographicTag:
    """Categorical tag sampled per trajectory.

    corrupted_probs, when given, replaces the category distribution for
    corrupted trajectories; by default tags are independent of corruption.
    """

    name: str
    categories: list[str]
    probs: list[float]
    corrupted_probs: list[float] | None = None

    def __post_init__(self):
        for dist in (self.probs, self.corrupted_probs):
            if dist is not None and abs(sum(dist) - 1.0) > 1e-9:
                raise ParameterError(f"tag {self.name}: distribution must sum to 1")


@dataclass
class PopulationConfig:
    n_trajectories: int = 2000
    horizon: int | None = None  # None: use the world's horizon
    expert_beta: float = 5.0
    corrupted_fraction: float = 0.3
    corruption_mode: str = "random_policy"
    corruption_beta: float = 0.5  # only used by low_temperature
    demographics: list[DemographicTag] = field(default_factory=list)
    seed: int = 0

    def __post_init__(self):
        if not (0.0 <= self.corrupted_fraction <= 1.0):
            raise ParameterError("corrupted_fraction must be in [0, 1]")
        if self.corruption_mode not in CORRUPTION_MODES:
            raise ParameterError(f"unknown corruption mode {self.corruption_mode!r}")
        if self.n_trajectories < 1:
            raise ParameterError("n_trajectories must be >= 1")


@dataclass
class LabeledPopulation:
    trajectories: TrajectorySet
    corrupted: dict[str, bool]

    def write_labels_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["trajectory_id", "corrupted"])
            for tid in self.trajectories.ids:
                writer.writerow([tid, int(self.corrupted[tid])])


def read_labels_csv(path) -> dict[str, bool]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        return {row["trajectory_id"]: bool(int(row["corrupted"])) for row in reader}


def generate_world(
    n_states: int, n_actions: int, branching: int, seed: int, horizon: int = 20
) -> SyntheticWorld:
    """Garnet-style random MDP with ground-truth reward and optimal policy.

    Each (s, a) row places Dirichlet(1) probabilities on `branching`
    uniformly chosen successors. About 10% of states get reward +1, 10%
    get -1, the rest 0, with a small uniform jitter; the optimal policy is
    the first step of hard-max value iteration at the given horizon.
    """
    if branching > n_states:
        raise ParameterError("branching factor cannot exceed n_states")
    if n_states < 2 or n_actions < 1 or branching < 1:
        raise ParameterError("need n_states >= 2, n_actions >= 1, branching >= 1")
    rng = np.random.default_rng(seed)
    probs = np.zeros((n_states, n_actions, n_states))
    for s in range(n_states):
        for a in range(n_actions):
            succ = rng.choice(n_states, size=branching, replace=False)
            probs[s, a, succ] = rng.dirichlet(np.ones(branching))

    n_special = max(1, round(0.1 * n_states))
    order = rng.permutation(n_states)
    rewards = np.zeros(n_states)
    rewards[order[:n_special]] = 1.0
    rewards[order[n_special : 2 * n_special]] = -1.0
    rewards = np.clip(rewards + rng.uniform(-0.05, 0.05, size=n_states), -1.0, 1.0)

    _, q0 = finite_horizon_values(probs, rewards, horizon)
    return SyntheticWorld(
        n_states=n_states,
        n_actions=n_actions,
        branching=branching,
        probs=probs,
        rewards=rewards,
        optimal_policy=DeterministicPolicy(np.argmax(q0, axis=1)),
        optimal_q=q0,
        horizon=horizon,
        initial_distribution=np.full(n_states, 1.0 / n_states),
        seed=seed,
    )


def _boltzmann(q: np.ndarray, beta: float) -> np.ndarray:
    z = beta * q
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def generate_population(world: SyntheticWorld, config: PopulationConfig) -> LabeledPopulation:
    """Sample a mixed expert population with ground-truth corruption labels.

    ceil(corrupted_fraction * N) trajectories come from the corruption-mode
    policy; the rest follow a stationary Boltzmann(beta) policy over the
    true optimal action values. Ids, labels, and demographic tags are
    deterministic under the config seed.
    """
    horizon = config.horizon if config.horizon is not None else world.horizon
    if horizon != world.horizon:
        _, q0 = finite_horizon_values(world.probs, world.rewards, horizon)
    else:
        q0 = world.optimal_q
    expert_policy = _boltzmann(q0, config.expert_beta)

    if config.corruption_mode == "random_policy":
        bad_policy = np.full_like(expert_policy, 1.0 / world.n_actions)
    elif config.corruption_mode == "negated_reward":
        _, q_bad = finite_horizon_values(world.probs, -world.rewards, horizon)
        bad_policy = _boltzmann(q_bad, config.expert_beta)
    else:
        bad_policy = _boltzmann(q0, config.corruption_beta)

    n = config.n_trajectories
    n_corrupt = math.ceil(config.corrupted_fraction * n)
    root = np.random.SeedSequence(config.seed)
    member_ss, demo_ss, *traj_ss = root.spawn(n + 2)
    member_rng = np.random.default_rng(member_ss)
    corrupt_idx = set(member_rng.permutation(n)[:n_corrupt].tolist())
    demo_rng = np.random.default_rng(demo_ss)

    trajectories = []
    corrupted = {}
    for i in range(n):
        tid = f"t{i:05d}"
        is_bad = i in corrupt_idx
        policy = bad_policy if is_bad else expert_policy
        rng = np.random.default_rng(traj_ss[i])
        s = int(rng.choice(world.n_states, p=world.initial_distribution))
        triples = np.empty((horizon, 3), dtype=np.int64)
        for t in range(horizon):
            a = int(rng.choice(world.n_actions, p=policy[s]))
            sp = int(rng.choice(world.n_states, p=world.probs[s, a]))
            triples[t] = (s, a, sp)
            s = sp
        demographics = {}
        for tag in config.demographics:
            dist = tag.probs
            if is_bad and tag.corrupted_probs is not None:
                dist = tag.corrupted_probs
            demographics[tag.name] = str(demo_rng.choice(tag.categories, p=dist))
        died = world.rewards[s] <= DEATH_REWARD_CUTOFF
        trajectories.append(Trajectory(tid, triples, demographics, bool(died)))
        corrupted[tid] = is_bad

    tset = TrajectorySet(trajectories, world.n_states, world.n_actions)
    return LabeledPopulation(tset, corrupted)


def policy_value(world: SyntheticWorld, actions: np.ndarray, horizon: int | None = None) -> float:
    """Expected true-reward return of a stationary deterministic policy."""
    horizon = horizon if horizon is not None else world.horizon
    idx = np.arange(world.n_states)
    kernel = world.probs[idx, np.asarray(actions, dtype=int)]
    v = np.zeros(world.n_states)
    for _ in range(horizon):
        v = kernel @ (world.rewards + v)
    return float(world.initial_distribution @ v)


def evaluate_recovery(world: SyntheticWorld, result, labels: dict[str, bool]) -> dict:
    """Recovery metrics of a two-stage run against the synthetic ground truth.

    Spearman correlation of each stage's learned reward with the true reward,
    plus the standard expected-value-difference protocol: each learned reward
    is turned into a policy by finite-horizon planning under the true kernel,
    agreement is the per-state match of that plan with the true optimal
    policy, and EVD is the true-reward value it gives up. Precision/recall of
    the pruned set are measured against the corruption labels.
    """
    if result.reward_stage1.n_states != world.n_states:
        raise ParameterError("result and world disagree on n_states")
    true_value = policy_value(world, world.optimal_policy.actions)

    def stage_metrics(reward):
        rho = spearmanr(reward.rewards, world.rewards).statistic
        _, q0 = finite_horizon_values(world.probs, reward.rewards, world.horizon)
        plan = np.argmax(q0, axis=1)
        agree = float(np.mean(plan == world.optimal_policy.actions))
        evd = true_value - policy_value(world, plan)
        return float(rho), agree, float(evd)

    s1, a1, e1 = stage_metrics(result.reward_stage1)
    s2, a2, e2 = stage_metrics(result.reward_stage2)

    pruned = set(result.pruned_ids)
    corrupted = {tid for tid, bad in labels.items() if bad}
    hit = len(pruned & corrupted)
    precision = hit / len(pruned) if pruned else float("nan")
    recall = hit / len(corrupted) if corrupted else float("nan")
    return {
        "spearman_stage1": s1,
        "spearman_stage2": s2,
        "policy_agreement_stage1": a1,
        "policy_agreement_stage2": a2,
        "evd_stage1": e1,
        "evd_stage2": e2,
        "prune_precision": precision,
        "prune_recall": recall,
    }
