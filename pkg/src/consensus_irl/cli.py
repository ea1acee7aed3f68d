"""Command-line entry point.

One executable, eight subcommands: ingest, cluster, irl, prune, pipeline,
synth, analyze, sweep. Every subcommand accepts --config pointing at a JSON
file whose keys mirror the flag names (flags win over the file; unknown keys
are rejected), takes one global --seed, and writes a manifest.json with the
echoed config, derived seeds, artifact hashes, and tool version.

Seed derivation from the global seed S: stage-1 IRL trains with S, stage-2
with S + 1, random pruning draws with S + 2, and permutation tests run with
S + 3. Exit codes: 0 success, 1 input/config error, 2 numeric failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import replace

import numpy as np

from .analyze import (
    cluster_report,
    end_state_deciles,
    reward_delta_by_state,
    test_pruning_uniformity,
    test_reward_loss_disparity,
    write_cluster_report_csv,
    write_deciles_csv,
    write_tests_csv,
    write_tests_json,
)
from .discretize import ClusterModel, feature_matrix, fit_state_space, trajectories_from_prepared
from .errors import InputError, NumericError, ParameterError
from .ingest import (
    ActionCodec,
    hypotension_codec,
    load_bounds,
    load_normal_values,
    load_records_csv,
    prepare_subjects,
    read_prepared_csv,
    regroup_demographics,
    sepsis_codec,
    write_prepared_csv,
)
from .maxent import IrlConfig, train_maxent_irl, write_training_log
from .mdp import RewardModel, estimate_transitions, greedy_policy, write_expected_reward_csv
from .pipeline import (
    run_two_stage,
    sha256_file,
    write_run_directory,
)
from .prune import (
    PruneConfig,
    read_scores_csv,
    score_trajectories,
    select_retained,
    write_scores_csv,
)
from .synth import (
    DemographicTag,
    PopulationConfig,
    SyntheticWorld,
    evaluate_recovery,
    generate_population,
    generate_world,
    read_labels_csv,
)
from .trajectories import TrajectorySet
from .version import __version__

OUT_ROOT_ENV = "CONSENSUS_IRL_OUT"

_IRL_DEFAULTS = {
    "optimizer": "sga",
    "lr0": 0.2,
    "epochs": 200,
    "init": "ones",
    "grad_tolerance": 1e-4,
    "horizon": None,
    "states": None,
    "actions": None,
}
_PRUNE_DEFAULTS = {
    "method": "deviation",
    "retain": 0.5,
    "percentile": None,
    "threshold": None,
}
_INGEST_DEFAULTS = {
    "records": None,
    "normals": None,
    "bounds": None,
    "codec": None,
    "condition": None,
    "features": None,
    "flags": None,
    "demographics": None,
    "regroup": None,
    "min_share": 0.01,
}
_CLUSTER_DEFAULTS = {
    "prepared": None,
    "k": 200,
    "min_size": 10,
    "restarts": 1,
}
_ANALYZE_DEFAULTS = {
    "attributes": None,
    "permutations": 10_000,
    "top_k": 25,
    "cluster_model": None,
}

SPECS = {
    "synth": {
        "defaults": {
            "states": 100,
            "actions": 4,
            "branching": 5,
            "horizon": 20,
            "trajectories": 2000,
            "corrupted": 0.3,
            "mode": "random_policy",
            "expert_beta": 5.0,
            "corruption_beta": 0.5,
            "demographics": None,
        },
        "required": [],
    },
    "ingest": {
        "defaults": dict(_INGEST_DEFAULTS),
        "required": ["records", "normals", "bounds", "features"],
    },
    "cluster": {
        "defaults": {**_CLUSTER_DEFAULTS, "features": None},
        "required": ["prepared", "features"],
    },
    "irl": {
        "defaults": {**_IRL_DEFAULTS, "trajectories": None},
        "required": ["trajectories"],
    },
    "prune": {
        "defaults": {
            **_PRUNE_DEFAULTS,
            "trajectories": None,
            "rewards": None,
            "states": None,
            "actions": None,
        },
        "required": ["trajectories", "rewards"],
    },
    "pipeline": {
        "defaults": {
            **_IRL_DEFAULTS,
            **_PRUNE_DEFAULTS,
            **_INGEST_DEFAULTS,
            **_CLUSTER_DEFAULTS,
            **_ANALYZE_DEFAULTS,
            "prepared": None,
            "trajectories": None,
            "world": None,
            "labels": None,
        },
        "required": [],
    },
    "analyze": {
        "defaults": {
            **_ANALYZE_DEFAULTS,
            "run": None,
            "trajectories": None,
            "states": None,
            "actions": None,
        },
        "required": ["run", "trajectories"],
    },
    "sweep": {
        "defaults": {},  # filled below from pipeline
        "required": [],
    },
}
SPECS["sweep"]["defaults"] = {**SPECS["pipeline"]["defaults"], "fractions": "0.2,0.5,0.8"}
for _spec in SPECS.values():
    _spec["defaults"].setdefault("seed", 0)
    _spec["defaults"].setdefault("threads", 1)
    _spec["defaults"].setdefault("out", None)


class _Parser(argparse.ArgumentParser):
    """argparse flavor whose usage errors surface as input errors (exit 1)."""

    def error(self, message):
        raise InputError(message)


def _add_flags(sub: argparse.ArgumentParser, defaults: dict) -> None:
    sub.add_argument("--config", help="JSON config file; flags override its keys")
    for key in sorted(defaults):
        flag = "--" + key.replace("_", "-")
        default = defaults[key]
        if isinstance(default, bool):
            raise AssertionError("boolean flags are not used")
        kind = str
        if isinstance(default, int) and not isinstance(default, bool):
            kind = int
        elif isinstance(default, float):
            kind = float
        if key in (
            "retain",
            "corrupted",
            "expert_beta",
            "corruption_beta",
            "percentile",
            "threshold",
            "lr0",
            "grad_tolerance",
            "min_share",
        ):
            kind = float
        if key in ("states", "actions", "horizon", "epochs", "k", "min_size",
                   "restarts", "trajectories", "branching", "permutations",
                   "top_k", "seed", "threads"):
            kind = int
        if key == "trajectories" and defaults[key] is None:
            kind = str  # a path everywhere except synth, where it is a count
        sub.add_argument(flag, dest=key, default=None, type=kind)


def build_parser() -> _Parser:
    parser = _Parser(prog="consensus-irl", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    subs = parser.add_subparsers(dest="command", parser_class=_Parser)
    for name, spec in SPECS.items():
        sub = subs.add_parser(name)
        _add_flags(sub, spec["defaults"])
    return parser


def _merge_config(command: str, args: argparse.Namespace) -> dict:
    spec = SPECS[command]
    merged = dict(spec["defaults"])
    path = getattr(args, "config", None)
    if path:
        try:
            with open(path) as fh:
                loaded = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise InputError(f"cannot read config {path}: {exc}") from exc
        if "cli" in loaded and isinstance(loaded["cli"], dict):
            loaded = loaded["cli"]  # accept an echoed config.json verbatim
        sub = loaded.pop("subcommand", command)
        if sub != command:
            raise InputError(
                f"config file is for subcommand {sub!r}, not {command!r}"
            )
        unknown = set(loaded) - set(merged)
        if unknown:
            raise InputError(
                f"unknown config keys for {command}: " + ", ".join(sorted(unknown))
            )
        merged.update(loaded)
    for key in spec["defaults"]:
        value = getattr(args, key, None)
        if value is not None:
            merged[key] = value
    missing = [key for key in spec["required"] if merged.get(key) is None]
    if missing:
        raise InputError(
            f"{command}: missing required " + ", ".join("--" + m for m in missing)
        )
    if merged.get("threads", 1) < 1:
        raise InputError("--threads must be >= 1")
    return merged


def _out_dir(command: str, cfg: dict) -> str:
    out = cfg.get("out") or f"run_{command}"
    if not os.path.isabs(out):
        out = os.path.join(os.environ.get(OUT_ROOT_ENV, "."), out)
    os.makedirs(out, exist_ok=True)
    return out


def _as_list(value) -> list[str]:
    if value is None:
        return []
    if isinstance(value, str):
        return [v.strip() for v in value.split(",") if v.strip()]
    return [str(v) for v in value]


def _echo(command: str, cfg: dict) -> dict:
    # the output directory names where artifacts land, not what they contain,
    # so it stays out of the echo and runs into different dirs hash identically
    return {"subcommand": command, **{k: cfg[k] for k in sorted(cfg) if k != "out"}}


def _write_manifest(out, command, cfg, seeds, artifacts, extra=None) -> None:
    manifest = {
        "tool": "consensus-irl",
        "version": __version__,
        "subcommand": command,
        "config": _echo(command, cfg),
        "seeds": seeds,
        "threads": cfg.get("threads", 1),
        "hashes": {a: sha256_file(os.path.join(out, a)) for a in artifacts},
    }
    if extra:
        manifest.update(extra)
    with open(os.path.join(out, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)


def _write_config_echo(out, command, cfg) -> None:
    with open(os.path.join(out, "config.json"), "w") as fh:
        json.dump(_echo(command, cfg), fh, indent=2, sort_keys=True)


def _load_trajectories(cfg, key="trajectories") -> TrajectorySet:
    path = cfg[key]
    try:
        return TrajectorySet.from_csv(
            path, n_states=cfg.get("states"), n_actions=cfg.get("actions")
        )
    except OSError as exc:
        raise InputError(f"cannot read trajectories {path}: {exc}") from exc


def _irl_config(cfg) -> IrlConfig:
    return IrlConfig(
        optimizer=cfg["optimizer"],
        lr0=cfg["lr0"],
        epochs=cfg["epochs"],
        init=cfg["init"],
        grad_tolerance=cfg["grad_tolerance"],
        horizon=cfg["horizon"],
        seed=cfg["seed"],
    )


def _prune_config(cfg) -> PruneConfig:
    return PruneConfig(
        method=cfg["method"],
        retain_fraction=cfg["retain"],
        likelihood_percentile=cfg["percentile"],
        likelihood_threshold=cfg["threshold"],
        seed=cfg["seed"] + 2,
    )


# ---------------------------------------------------------------------------
# subcommand handlers


def cmd_synth(cfg) -> None:
    out = _out_dir("synth", cfg)
    world = generate_world(
        cfg["states"], cfg["actions"], cfg["branching"], cfg["seed"], cfg["horizon"]
    )
    tags = []
    if cfg["demographics"]:
        with open(cfg["demographics"]) as fh:
            tags = [DemographicTag(**entry) for entry in json.load(fh)]
    pop_cfg = PopulationConfig(
        n_trajectories=cfg["trajectories"],
        expert_beta=cfg["expert_beta"],
        corrupted_fraction=cfg["corrupted"],
        corruption_mode=cfg["mode"],
        corruption_beta=cfg["corruption_beta"],
        demographics=tags,
        seed=cfg["seed"],
    )
    population = generate_population(world, pop_cfg)
    world.to_json(os.path.join(out, "world.json"))
    population.trajectories.to_csv(os.path.join(out, "trajectories.csv"))
    population.write_labels_csv(os.path.join(out, "labels.csv"))
    _write_config_echo(out, "synth", cfg)
    _write_manifest(
        out,
        "synth",
        cfg,
        {"world": cfg["seed"], "population": cfg["seed"]},
        ["config.json", "world.json", "trajectories.csv", "labels.csv"],
    )
    print(f"synth: wrote {cfg['trajectories']} trajectories to {out}")


def _codec_from_cfg(cfg) -> ActionCodec:
    if cfg["codec"]:
        return ActionCodec.from_json(cfg["codec"])
    if cfg["condition"] == "hypotension":
        return hypotension_codec()
    if cfg["condition"] == "sepsis":
        return sepsis_codec()
    raise InputError(
        "ingest: provide --codec PATH or --condition hypotension|sepsis"
    )


def cmd_ingest(cfg) -> None:
    out = _out_dir("ingest", cfg)
    codec = _codec_from_cfg(cfg)
    features = _as_list(cfg["features"])
    flags = _as_list(cfg["flags"]) or sorted(codec.known_flags)
    demographics = _as_list(cfg["demographics"])
    subjects = load_records_csv(cfg["records"], features, flags, demographics)
    relabel = {}
    if cfg["regroup"]:
        with open(cfg["regroup"]) as fh:
            relabel = json.load(fh)
    if demographics:
        subjects = regroup_demographics(subjects, relabel, cfg["min_share"])
    normals = load_normal_values(cfg["normals"])
    bounds = load_bounds(cfg["bounds"])
    prepared, report = prepare_subjects(subjects, normals, bounds, codec)
    write_prepared_csv(prepared, features, os.path.join(out, "prepared.csv"))
    with open(os.path.join(out, "ingest_report.json"), "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
    _write_config_echo(out, "ingest", cfg)
    _write_manifest(
        out,
        "ingest",
        cfg,
        {},
        ["config.json", "prepared.csv", "ingest_report.json"],
    )
    print(f"ingest: prepared {len(prepared)} subjects to {out}")


def cmd_cluster(cfg) -> None:
    out = _out_dir("cluster", cfg)
    features = _as_list(cfg["features"])
    prepared = read_prepared_csv(cfg["prepared"], features)
    rows, _ = feature_matrix(prepared, features)
    model = fit_state_space(
        rows,
        k=cfg["k"],
        min_size=cfg["min_size"],
        seed=cfg["seed"],
        feature_names=features,
        n_restarts=cfg["restarts"],
    )
    tset, report = trajectories_from_prepared(prepared, model, features)
    model.to_json(os.path.join(out, "cluster_model.json"))
    tset.to_csv(os.path.join(out, "trajectories.csv"))
    report = {
        **report,
        "retained_clusters": len(model.retained_ids),
        "dropped_clusters": sorted(model.dropped_cluster_ids),
        "inertia": model.inertia,
    }
    with open(os.path.join(out, "cluster_report.json"), "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
    _write_config_echo(out, "cluster", cfg)
    _write_manifest(
        out,
        "cluster",
        cfg,
        {"kmeans": cfg["seed"]},
        ["config.json", "cluster_model.json", "trajectories.csv", "cluster_report.json"],
    )
    print(
        f"cluster: {len(model.retained_ids)} retained states, "
        f"{len(tset)} trajectories to {out}"
    )


def cmd_irl(cfg) -> None:
    out = _out_dir("irl", cfg)
    tset = _load_trajectories(cfg)
    transitions = estimate_transitions(tset)
    reward = train_maxent_irl(tset, transitions, _irl_config(cfg))
    reward.to_json(os.path.join(out, "rewards.json"))
    write_training_log(reward, os.path.join(out, "training_log.csv"))
    write_expected_reward_csv(
        transitions, reward, os.path.join(out, "expected_reward.csv")
    )
    _write_config_echo(out, "irl", cfg)
    _write_manifest(
        out,
        "irl",
        cfg,
        {"stage1": cfg["seed"]},
        ["config.json", "rewards.json", "training_log.csv", "expected_reward.csv"],
    )
    print(
        f"irl: trained on {len(tset)} trajectories "
        f"({reward.metadata['epochs_run']} epochs) to {out}"
    )


def cmd_prune(cfg) -> None:
    out = _out_dir("prune", cfg)
    tset = _load_trajectories(cfg)
    transitions = estimate_transitions(tset)
    reward = RewardModel.from_json(cfg["rewards"])
    policy = greedy_policy(transitions, reward)
    scores = score_trajectories(tset, transitions, reward, policy)
    retained_ids, pruned_ids = select_retained(scores, _prune_config(cfg))
    write_scores_csv(scores, retained_ids, os.path.join(out, "scores.csv"), tset)
    tset.subset(retained_ids).to_csv(os.path.join(out, "retained.csv"))
    _write_config_echo(out, "prune", cfg)
    _write_manifest(
        out,
        "prune",
        cfg,
        {"prune": cfg["seed"] + 2},
        ["config.json", "scores.csv", "retained.csv"],
        extra={"n_retained": len(retained_ids), "n_pruned": len(pruned_ids)},
    )
    print(f"prune: retained {len(retained_ids)}/{len(scores)} to {out}")


def _analysis_artifacts(
    out,
    tset: TrajectorySet,
    result,
    cfg,
    cluster_model: ClusterModel | None,
) -> list[str]:
    """Deciles, disparity tests, and cluster tables shared by pipeline/analyze."""
    artifacts = []
    test_seed = cfg["seed"] + 3
    n_perm = cfg["permutations"]

    try:
        deciles = end_state_deciles(result.scores)
    except ParameterError:
        deciles = None
    if deciles is not None:
        write_deciles_csv(deciles, os.path.join(out, "deciles.csv"))
        artifacts.append("deciles.csv")

    attributes = _as_list(cfg["attributes"])
    if not attributes:
        attributes = tset.demographic_tags() + ["died_in_hospital"]
    omnibus = []
    posthoc = {}
    for attribute in attributes:
        try:
            omnibus.append(
                test_pruning_uniformity(
                    tset, result.retained_ids, attribute,
                    n_permutations=n_perm, seed=test_seed,
                )
            )
        except ParameterError:
            pass
        if attribute == "died_in_hospital":
            continue
        try:
            res, pairs = test_reward_loss_disparity(
                tset, result.reward_stage1, result.reward_stage2, attribute,
                n_permutations=n_perm, seed=test_seed,
            )
            omnibus.append(res)
            posthoc[res.name] = pairs
        except ParameterError:
            pass
    if omnibus:
        write_tests_json(omnibus, os.path.join(out, "tests.json"), posthoc)
        write_tests_csv(omnibus, os.path.join(out, "tests.csv"))
        artifacts += ["tests.json", "tests.csv"]

    if cluster_model is not None and cluster_model.feature_stats:
        top_k = min(cfg["top_k"], len(cluster_model.feature_stats))
        report1 = cluster_report(
            cluster_model.feature_stats, result.reward_stage1, top_k, stage="stage1"
        )
        report2 = cluster_report(
            cluster_model.feature_stats, result.reward_stage2, top_k,
            stage="stage2", baseline=report1,
        )
        write_cluster_report_csv(report1, os.path.join(out, "cluster_report_stage1.csv"))
        write_cluster_report_csv(report2, os.path.join(out, "cluster_report_stage2.csv"))
        artifacts += ["cluster_report_stage1.csv", "cluster_report_stage2.csv"]
    return artifacts


def _pipeline_inputs(cfg, out) -> tuple[TrajectorySet, ClusterModel | None, list[str]]:
    """Resolve the pipeline's entry point: raw records, prepared rows, or trajectories."""
    artifacts = []
    cluster_model = None
    if cfg["records"] or cfg["prepared"]:
        features = _as_list(cfg["features"])
        if not features:
            raise InputError("pipeline: --features is required with --records/--prepared")
        if cfg["records"]:
            codec = _codec_from_cfg(cfg)
            flags = _as_list(cfg["flags"]) or sorted(codec.known_flags)
            demographics = _as_list(cfg["demographics"])
            subjects = load_records_csv(cfg["records"], features, flags, demographics)
            relabel = {}
            if cfg["regroup"]:
                with open(cfg["regroup"]) as fh:
                    relabel = json.load(fh)
            if demographics:
                subjects = regroup_demographics(subjects, relabel, cfg["min_share"])
            normals = load_normal_values(cfg["normals"])
            bounds = load_bounds(cfg["bounds"])
            prepared, _ = prepare_subjects(subjects, normals, bounds, codec)
            write_prepared_csv(prepared, features, os.path.join(out, "prepared.csv"))
            artifacts.append("prepared.csv")
        else:
            prepared = read_prepared_csv(cfg["prepared"], features)
        rows, _ = feature_matrix(prepared, features)
        cluster_model = fit_state_space(
            rows,
            k=cfg["k"],
            min_size=cfg["min_size"],
            seed=cfg["seed"],
            feature_names=features,
            n_restarts=cfg["restarts"],
        )
        cluster_model.to_json(os.path.join(out, "cluster_model.json"))
        artifacts.append("cluster_model.json")
        tset, _ = trajectories_from_prepared(prepared, cluster_model, features)
        tset.to_csv(os.path.join(out, "trajectories.csv"))
        artifacts.append("trajectories.csv")
    elif cfg["trajectories"]:
        tset = _load_trajectories(cfg)
        if cfg["cluster_model"]:
            cluster_model = ClusterModel.from_json(cfg["cluster_model"])
    else:
        raise InputError(
            "pipeline: provide --trajectories, --prepared, or --records"
        )
    return tset, cluster_model, artifacts


def _run_pipeline_once(cfg, out) -> dict:
    tset, cluster_model, artifacts = _pipeline_inputs(cfg, out)
    result = run_two_stage(tset, _irl_config(cfg), _prune_config(cfg))
    artifacts += _analysis_artifacts(out, tset, result, cfg, cluster_model)

    extra_manifest = {"subcommand": "pipeline", "threads": cfg.get("threads", 1)}
    if cfg["world"] and cfg["labels"]:
        world = SyntheticWorld.from_json(cfg["world"])
        labels = read_labels_csv(cfg["labels"])
        recovery = evaluate_recovery(world, result, labels)
        with open(os.path.join(out, "recovery.json"), "w") as fh:
            json.dump(recovery, fh, indent=2, sort_keys=True)
        artifacts.append("recovery.json")
        extra_manifest["recovery"] = recovery

    manifest = write_run_directory(
        result,
        out,
        _irl_config(cfg),
        _prune_config(cfg),
        trajectories=tset,
        extra_manifest=extra_manifest,
        config_json=_echo("pipeline", cfg),
        extra_artifacts=artifacts,
    )
    manifest["n_states"] = result.n_states
    manifest["agreement_rate"] = float(np.mean(result.policy_agreement))
    return manifest


def cmd_pipeline(cfg) -> None:
    out = _out_dir("pipeline", cfg)
    manifest = _run_pipeline_once(cfg, out)
    print(
        f"pipeline: retained {manifest['n_retained']}/{manifest['n_trajectories']} "
        f"trajectories, stage agreement {manifest['agreement_rate']:.3f}, run in {out}"
    )


def cmd_sweep(cfg) -> None:
    out = _out_dir("sweep", cfg)
    fractions = [float(f) for f in _as_list(cfg["fractions"])]
    if not fractions:
        raise InputError("sweep: --fractions must name at least one value")
    rows = []
    for fraction in fractions:
        sub_cfg = dict(cfg)
        sub_cfg["retain"] = fraction
        sub_out = os.path.join(out, f"f{int(round(fraction * 100)):03d}")
        os.makedirs(sub_out, exist_ok=True)
        manifest = _run_pipeline_once(sub_cfg, sub_out)
        row = {
            "fraction": fraction,
            "n_retained": manifest["n_retained"],
            "agreement_rate": manifest["agreement_rate"],
        }
        if "recovery" in manifest:
            row["spearman_stage2"] = manifest["recovery"]["spearman_stage2"]
            row["prune_recall"] = manifest["recovery"]["prune_recall"]
        rows.append(row)

    import csv as _csv

    keys = sorted({k for row in rows for k in row})
    with open(os.path.join(out, "sweep_summary.csv"), "w", newline="") as fh:
        writer = _csv.writer(fh)
        writer.writerow(keys)
        for row in rows:
            writer.writerow([
                repr(row[k]) if isinstance(row.get(k), float) else row.get(k, "")
                for k in keys
            ])
    _write_config_echo(out, "sweep", cfg)
    _write_manifest(
        out,
        "sweep",
        cfg,
        {"stage1": cfg["seed"], "stage2": cfg["seed"] + 1,
         "prune": cfg["seed"] + 2, "tests": cfg["seed"] + 3},
        ["config.json", "sweep_summary.csv"],
        extra={"fractions": fractions},
    )
    print(f"sweep: {len(fractions)} fractions done in {out}")


def cmd_analyze(cfg) -> None:
    out = _out_dir("analyze", cfg)
    run = cfg["run"]
    tset = _load_trajectories(cfg)
    reward1 = RewardModel.from_json(os.path.join(run, "rewards_stage1.json"))
    reward2 = RewardModel.from_json(os.path.join(run, "rewards_stage2.json"))
    scores, retained_ids = read_scores_csv(os.path.join(run, "scores.csv"))
    transitions = estimate_transitions(tset)

    class _View:
        pass

    view = _View()
    view.scores = scores
    view.retained_ids = retained_ids
    view.reward_stage1 = reward1
    view.reward_stage2 = reward2
    view.policy_stage1 = greedy_policy(transitions, reward1)
    view.policy_stage2 = greedy_policy(transitions, reward2)
    view.reward_delta = reward2.rewards - reward1.rewards
    view.policy_agreement = view.policy_stage1.actions == view.policy_stage2.actions
    view.n_states = reward1.n_states

    cluster_model = None
    if cfg["cluster_model"]:
        cluster_model = ClusterModel.from_json(cfg["cluster_model"])
    artifacts = _analysis_artifacts(out, tset, view, cfg, cluster_model)
    rows = reward_delta_by_state(view)
    with open(os.path.join(out, "reward_delta.json"), "w") as fh:
        json.dump(rows, fh, indent=2, sort_keys=True)
    artifacts.append("reward_delta.json")
    _write_config_echo(out, "analyze", cfg)
    _write_manifest(
        out,
        "analyze",
        cfg,
        {"tests": cfg["seed"] + 3},
        ["config.json"] + artifacts,
    )
    print(f"analyze: {len(artifacts)} report files in {out}")


HANDLERS = {
    "synth": cmd_synth,
    "ingest": cmd_ingest,
    "cluster": cmd_cluster,
    "irl": cmd_irl,
    "prune": cmd_prune,
    "pipeline": cmd_pipeline,
    "analyze": cmd_analyze,
    "sweep": cmd_sweep,
}


def dispatch(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            parser.print_help()
            return 1
        cfg = _merge_config(args.command, args)
        HANDLERS[args.command](cfg)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 2
    return 0


def main() -> None:
    raise SystemExit(dispatch())


if __name__ == "__main__":
    main()
