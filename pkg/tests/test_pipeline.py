"""Two-stage orchestration: pruning semantics, determinism, run artifacts."""

import json
import math
from dataclasses import replace

import numpy as np
import pytest

from consensus_irl import (
    CohortEmptyError,
    IrlConfig,
    PruneConfig,
    TrajectorySet,
    estimate_transitions,
    evaluate_recovery,
    generate_population,
    generate_world,
    retention_sweep,
    run_two_stage,
    train_maxent_irl,
    write_run_directory,
)
from consensus_irl.pipeline import sha256_file
from consensus_irl.synth import PopulationConfig

RUN_FILES = [
    "config.json",
    "rewards_stage1.json",
    "rewards_stage2.json",
    "scores.csv",
    "reward_delta.csv",
    "training_log_stage1.csv",
    "training_log_stage2.csv",
    "manifest.json",
]


@pytest.fixture(scope="module")
def quick_result(small_population):
    ts = small_population.trajectories
    return (
        run_two_stage(ts, IrlConfig(epochs=25, seed=3), PruneConfig(retain_fraction=0.5)),
        ts,
    )


def test_full_retention_reproduces_stage1_bitwise(small_population):
    ts = small_population.trajectories
    result = run_two_stage(ts, IrlConfig(epochs=20), PruneConfig(retain_fraction=1.0))
    assert np.array_equal(result.reward_stage1.rewards, result.reward_stage2.rewards)
    assert np.all(result.reward_delta == 0.0)
    assert np.all(result.policy_agreement)
    assert result.retained_ids == [sc.trajectory_id for sc in result.scores]
    assert result.pruned_ids == []


def test_partition_and_monotone_selection(quick_result):
    result, ts = quick_result
    assert len(result.retained_ids) + len(result.pruned_ids) == len(ts)
    assert len(result.retained_ids) == math.ceil(0.5 * len(ts))
    by_id = {sc.trajectory_id: sc.C for sc in result.scores}
    worst_kept = min(by_id[i] for i in result.retained_ids)
    best_cut = max(by_id[i] for i in result.pruned_ids)
    assert worst_kept >= best_cut
    assert result.reward_delta.shape == (ts.n_states,)


def test_stage2_uses_only_retained_trajectories(quick_result):
    """Replaying stage 2 by hand on the retained subset must reproduce it."""
    result, ts = quick_result
    cfg2 = IrlConfig(epochs=25, seed=4, horizon=ts.max_length())
    replay = train_maxent_irl(
        ts.subset(result.retained_ids), result.transitions, cfg2, stage="stage2"
    )
    assert np.array_equal(replay.rewards, result.reward_stage2.rewards)


def test_stage_seeds_are_offset(quick_result):
    result, _ = quick_result
    assert result.reward_stage1.metadata["seed"] == 3
    assert result.reward_stage2.metadata["seed"] == 4
    assert result.reward_stage1.metadata["stage"] == "stage1"
    assert result.reward_stage2.metadata["stage"] == "stage2"


def test_two_stage_is_deterministic(small_population):
    ts = small_population.trajectories
    irl = IrlConfig(epochs=15)
    prune = PruneConfig(retain_fraction=0.4)
    a = run_two_stage(ts, irl, prune)
    b = run_two_stage(ts, irl, prune)
    assert np.array_equal(a.reward_stage1.rewards, b.reward_stage1.rewards)
    assert np.array_equal(a.reward_stage2.rewards, b.reward_stage2.rewards)
    assert a.retained_ids == b.retained_ids


def test_empty_set_is_rejected():
    empty = TrajectorySet([], n_states=2, n_actions=2)
    with pytest.raises(CohortEmptyError):
        run_two_stage(empty, IrlConfig(), PruneConfig())


def test_pruning_improves_policy_agreement_on_corrupted_data():
    """Stage 2 should match the true optimal policy at least as well."""
    diffs = []
    for seed in range(5):
        world = generate_world(60, 3, 4, seed=50 + seed, horizon=15)
        pop = generate_population(
            world,
            PopulationConfig(n_trajectories=600, corrupted_fraction=0.3, seed=seed),
        )
        result = run_two_stage(
            pop.trajectories,
            IrlConfig(epochs=300, lr0=0.4, seed=seed),
            PruneConfig(retain_fraction=0.5),
        )
        metrics = evaluate_recovery(world, result, pop.corrupted)
        diffs.append(metrics["policy_agreement_stage2"] - metrics["policy_agreement_stage1"])
    assert float(np.median(diffs)) >= 0.0


def test_retention_sweep_runs_all_fractions(small_population):
    ts = small_population.trajectories
    results = retention_sweep(ts, IrlConfig(epochs=10), PruneConfig())
    assert sorted(results) == [0.2, 0.5, 0.8]
    for f, result in results.items():
        assert len(result.retained_ids) == math.ceil(f * len(ts))
    # same stage-1 scores in every sweep leg, so retained sets nest
    assert set(results[0.2].retained_ids) <= set(results[0.5].retained_ids)
    assert set(results[0.5].retained_ids) <= set(results[0.8].retained_ids)


def test_run_directory_layout_and_manifest(tmp_path, quick_result):
    result, ts = quick_result
    out = tmp_path / "run"
    manifest = write_run_directory(
        result, out, IrlConfig(epochs=25, seed=3), PruneConfig(retain_fraction=0.5),
        trajectories=ts,
    )
    for name in RUN_FILES:
        assert (out / name).exists(), name
    on_disk = json.loads((out / "manifest.json").read_text())
    assert on_disk == manifest
    for name, digest in manifest["hashes"].items():
        assert sha256_file(out / name) == digest
    assert manifest["seeds"] == {"stage1": 3, "stage2": 4, "prune": 0}
    assert manifest["n_retained"] + manifest["n_pruned"] == len(ts)
    assert "shared" in manifest["transition_kernel"]
    header = (out / "reward_delta.csv").read_text().splitlines()
    assert header[0] == "state,r1,r2,delta,policy1,policy2,agree"
    assert len(header) == ts.n_states + 1


def test_run_directory_rerun_is_byte_identical(tmp_path, quick_result):
    result, ts = quick_result
    irl, prune = IrlConfig(epochs=25, seed=3), PruneConfig(retain_fraction=0.5)
    write_run_directory(result, tmp_path / "a", irl, prune, trajectories=ts)
    write_run_directory(result, tmp_path / "b", irl, prune, trajectories=ts)
    for name in RUN_FILES:
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes(), name


def test_shared_kernel_comes_from_all_trajectories(quick_result, small_population):
    result, ts = quick_result
    expected = estimate_transitions(ts)
    assert np.array_equal(result.transitions.probs, expected.probs)
    retained_only = estimate_transitions(ts.subset(result.retained_ids))
    assert not np.array_equal(result.transitions.probs, retained_only.probs)
