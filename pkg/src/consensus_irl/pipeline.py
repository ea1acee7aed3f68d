"""Two-stage consensus procedure.

Stage 1 fits a reward to every demonstration, trajectories are scored against
the stage-1 greedy policy, the low-consensus tail is pruned, and stage 2
refits on the retained subset. The transition kernel is estimated once from
the full set and shared by both stages: pruning targets decision quality, not
environment dynamics, and refitting the kernel on the retained subset would
starve rarely-taken actions. That choice is recorded in the run manifest.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import os
from dataclasses import dataclass, replace

import numpy as np

from .errors import CohortEmptyError
from .maxent import IrlConfig, train_maxent_irl, write_training_log
from .mdp import (
    DeterministicPolicy,
    RewardModel,
    TransitionModel,
    estimate_transitions,
    greedy_policy,
)
from .prune import (
    PruneConfig,
    TrajectoryScore,
    score_trajectories,
    select_retained,
    write_scores_csv,
)
from .trajectories import TrajectorySet
from .version import __version__


@dataclass
class TwoStageResult:
    """Everything both stages produced, plus the per-state comparison."""

    transitions: TransitionModel
    reward_stage1: RewardModel
    reward_stage2: RewardModel
    policy_stage1: DeterministicPolicy
    policy_stage2: DeterministicPolicy
    scores: list[TrajectoryScore]
    retained_ids: list[str]
    pruned_ids: list[str]
    reward_delta: np.ndarray
    policy_agreement: np.ndarray

    @property
    def n_states(self) -> int:
        return self.reward_stage1.n_states


def run_two_stage(
    trajectories: TrajectorySet,
    irl_config: IrlConfig,
    prune_config: PruneConfig,
) -> TwoStageResult:
    """Fit, score, prune, refit.

    The horizon is resolved once from the full trajectory set so both stages
    roll the soft policy out over the same number of steps even when pruning
    removes the longest trajectories. Stage 2 re-uses the shared kernel, draws
    its initial-state distribution from the retained set, and trains from a
    fresh initialization with seed + 1.
    """
    if len(trajectories) == 0:
        raise CohortEmptyError("cannot run the two-stage procedure on an empty set")
    transitions = estimate_transitions(trajectories)
    horizon = irl_config.horizon
    if horizon is None:
        horizon = trajectories.max_length()
    cfg1 = replace(irl_config, horizon=horizon)

    reward1 = train_maxent_irl(trajectories, transitions, cfg1, stage="stage1")
    policy1 = greedy_policy(transitions, reward1)
    scores = score_trajectories(trajectories, transitions, reward1, policy1)
    retained_ids, pruned_ids = select_retained(scores, prune_config)

    retained = trajectories.subset(retained_ids)
    cfg2 = replace(cfg1, seed=cfg1.seed + 1)
    reward2 = train_maxent_irl(retained, transitions, cfg2, stage="stage2")
    policy2 = greedy_policy(transitions, reward2)

    return TwoStageResult(
        transitions=transitions,
        reward_stage1=reward1,
        reward_stage2=reward2,
        policy_stage1=policy1,
        policy_stage2=policy2,
        scores=scores,
        retained_ids=retained_ids,
        pruned_ids=pruned_ids,
        reward_delta=reward2.rewards - reward1.rewards,
        policy_agreement=policy1.actions == policy2.actions,
    )


def write_reward_delta_csv(result: TwoStageResult, path) -> None:
    import csv

    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["state", "r1", "r2", "delta", "policy1", "policy2", "agree"])
        for s in range(result.n_states):
            writer.writerow(
                [
                    s,
                    repr(float(result.reward_stage1.rewards[s])),
                    repr(float(result.reward_stage2.rewards[s])),
                    repr(float(result.reward_delta[s])),
                    int(result.policy_stage1.actions[s]),
                    int(result.policy_stage2.actions[s]),
                    int(result.policy_agreement[s]),
                ]
            )


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def _jsonable(value):
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, (np.integer, np.floating)):
        return value.item()
    return value


def config_echo(irl_config: IrlConfig, prune_config: PruneConfig, extra: dict | None = None) -> dict:
    echo = {
        "irl": {k: _jsonable(v) for k, v in dataclasses.asdict(irl_config).items()},
        "prune": {k: _jsonable(v) for k, v in dataclasses.asdict(prune_config).items()},
    }
    if extra:
        echo.update(extra)
    return echo


def write_run_directory(
    result: TwoStageResult,
    out_dir,
    irl_config: IrlConfig,
    prune_config: PruneConfig,
    trajectories: TrajectorySet | None = None,
    extra_config: dict | None = None,
    extra_manifest: dict | None = None,
    config_json: dict | None = None,
    extra_artifacts: list | None = None,
) -> dict:
    """Emit the standard run layout and return the manifest dict.

    Files: config.json (echo), rewards_stage1.json, rewards_stage2.json,
    scores.csv, reward_delta.csv, training_log_stage1.csv,
    training_log_stage2.csv, manifest.json. All writers format numbers with
    repr and sort JSON keys, so reruns are byte-identical. config_json, when
    given, replaces the default echo written to config.json (the CLI uses
    this to echo its flat flag namespace).
    """
    os.makedirs(out_dir, exist_ok=True)
    echo = config_echo(irl_config, prune_config, extra_config)
    with open(os.path.join(out_dir, "config.json"), "w") as fh:
        json.dump(config_json if config_json is not None else echo, fh,
                  indent=2, sort_keys=True)

    result.reward_stage1.to_json(os.path.join(out_dir, "rewards_stage1.json"))
    result.reward_stage2.to_json(os.path.join(out_dir, "rewards_stage2.json"))
    write_scores_csv(
        result.scores,
        result.retained_ids,
        os.path.join(out_dir, "scores.csv"),
        trajectories=trajectories,
    )
    write_reward_delta_csv(result, os.path.join(out_dir, "reward_delta.csv"))
    write_training_log(result.reward_stage1, os.path.join(out_dir, "training_log_stage1.csv"))
    write_training_log(result.reward_stage2, os.path.join(out_dir, "training_log_stage2.csv"))

    artifacts = [
        "config.json",
        "rewards_stage1.json",
        "rewards_stage2.json",
        "scores.csv",
        "reward_delta.csv",
        "training_log_stage1.csv",
        "training_log_stage2.csv",
    ] + list(extra_artifacts or [])
    manifest = {
        "tool": "consensus-irl",
        "version": __version__,
        "config": echo,
        "seeds": {
            "stage1": result.reward_stage1.metadata.get("seed"),
            "stage2": result.reward_stage2.metadata.get("seed"),
            "prune": prune_config.seed,
        },
        "transition_kernel": "estimated once from all trajectories and shared by both stages",
        "n_trajectories": len(result.scores),
        "n_retained": len(result.retained_ids),
        "n_pruned": len(result.pruned_ids),
        "hashes": {name: sha256_file(os.path.join(out_dir, name)) for name in artifacts},
    }
    if extra_manifest:
        manifest.update(extra_manifest)
    with open(os.path.join(out_dir, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
    return manifest


def retention_sweep(
    trajectories: TrajectorySet,
    irl_config: IrlConfig,
    prune_config: PruneConfig,
    fractions=(0.2, 0.5, 0.8),
) -> dict[float, TwoStageResult]:
    """Run the two-stage procedure once per retention fraction."""
    results = {}
    for f in fractions:
        cfg = replace(prune_config, retain_fraction=f)
        results[f] = run_two_stage(trajectories, irl_config, cfg)
    return results
