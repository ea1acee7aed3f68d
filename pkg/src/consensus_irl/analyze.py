"""Report surfaces: cluster feature tables, score deciles, disparity tests.

Statistical tests use Monte Carlo permutation p-values in place of asymptotic
chi-squared / F distributions and Tukey's range test (pairwise permutation
with Holm correction stands in for the latter). Every emitted report states
this. The statistic definitions themselves are the classical ones, so the
permutation p converges to the textbook p when the asymptotics hold.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError
from .mdp import RewardModel
from .prune import TrajectoryScore
from .trajectories import TrajectorySet

PERMUTATION_NOTE = (
    "p-values are seeded Monte Carlo permutation estimates, "
    "not asymptotic chi-squared/F probabilities"
)


# ---------------------------------------------------------------------------
# cluster feature tables


@dataclass
class ClusterRow:
    cluster: int
    reward: float
    rank: int
    count: int
    means: dict[str, float]
    stds: dict[str, float]
    delta_means: dict[str, float] | None = None
    delta_stds: dict[str, float] | None = None


@dataclass
class ClusterReport:
    """Best and worst clusters by learned reward with feature summaries."""

    stage: str
    best: list[ClusterRow]
    worst: list[ClusterRow]

    @property
    def features(self) -> list[str]:
        if self.best:
            return sorted(self.best[0].means)
        return []


def cluster_report(
    cluster_stats: dict,
    reward: RewardModel,
    top_k: int = 25,
    stage: str = "stage2",
    baseline: "ClusterReport | None" = None,
) -> ClusterReport:
    """Rank clusters by reward and summarize features of the two extremes.

    cluster_stats maps cluster index -> {"count", "means", "stds"} with
    feature statistics in original units. When a baseline report is given
    (e.g. the random-pruning control), each row gains per-feature deltas
    against the baseline row of the same rank position.
    """
    clusters = sorted(cluster_stats)
    if not (1 <= top_k <= len(clusters)):
        raise ParameterError(
            f"top_k={top_k} out of range for {len(clusters)} clusters"
        )
    order = sorted(clusters, key=lambda c: (-reward.rewards[c], c))

    def row(c, rank):
        st = cluster_stats[c]
        return ClusterRow(
            cluster=int(c),
            reward=float(reward.rewards[c]),
            rank=rank,
            count=int(st["count"]),
            means={k: float(v) for k, v in st["means"].items()},
            stds={k: float(v) for k, v in st["stds"].items()},
        )

    rows = [row(c, i) for i, c in enumerate(order)]
    report = ClusterReport(stage=stage, best=rows[:top_k], worst=rows[-top_k:])
    if baseline is not None:
        for side in ("best", "worst"):
            for here, there in zip(getattr(report, side), getattr(baseline, side)):
                here.delta_means = {
                    k: here.means[k] - there.means.get(k, 0.0) for k in here.means
                }
                here.delta_stds = {
                    k: here.stds[k] - there.stds.get(k, 0.0) for k in here.stds
                }
    return report


def write_cluster_report_csv(report: ClusterReport, path) -> None:
    feats = report.features
    has_delta = any(r.delta_means is not None for r in report.best + report.worst)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        header = ["side", "rank", "cluster", "reward", "count"]
        for f in feats:
            header += [f"{f}_mean", f"{f}_std"]
            if has_delta:
                header += [f"{f}_delta_mean", f"{f}_delta_std"]
        writer.writerow(header)
        for side in ("best", "worst"):
            for r in getattr(report, side):
                row = [side, r.rank, r.cluster, repr(r.reward), r.count]
                for f in feats:
                    row += [repr(r.means[f]), repr(r.stds[f])]
                    if has_delta:
                        dm = r.delta_means or {}
                        ds = r.delta_stds or {}
                        row += [repr(dm.get(f, 0.0)), repr(ds.get(f, 0.0))]
                writer.writerow(row)


# ---------------------------------------------------------------------------
# consensus-score deciles


def end_state_deciles(scores: list[TrajectoryScore]) -> list[dict]:
    """Mean end-state reward per consensus-score decile.

    Trajectories are ranked by C ascending (worst consensus first) and split
    into ten buckets whose sizes differ by at most one; bucket i covers the
    percentile band [10i, 10(i+1)).
    """
    if len(scores) < 10:
        raise ParameterError("need at least 10 scored trajectories for deciles")
    ranked = sorted(scores, key=lambda sc: (sc.C, sc.trajectory_id))
    rewards = np.array([sc.end_state_reward for sc in ranked])
    rows = []
    for i, bucket in enumerate(np.array_split(rewards, 10)):
        rows.append(
            {
                "bucket": i,
                "percentile_low": 10 * i,
                "percentile_high": 10 * (i + 1),
                "mean_end_state_reward": float(bucket.mean()),
                "count": int(bucket.size),
            }
        )
    return rows


def write_deciles_csv(rows: list[dict], path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["bucket", "percentile_low", "percentile_high", "mean_end_state_reward", "count"]
        )
        for r in rows:
            writer.writerow(
                [
                    r["bucket"],
                    r["percentile_low"],
                    r["percentile_high"],
                    repr(r["mean_end_state_reward"]),
                    r["count"],
                ]
            )


# ---------------------------------------------------------------------------
# permutation statistics


@dataclass
class TestResult:
    name: str
    statistic: float
    p_value: float
    n_permutations: int
    seed: int
    groups: list = field(default_factory=list)  # (label, size) pairs
    note: str = PERMUTATION_NOTE

    @property
    def p_floor(self) -> float:
        return 1.0 / (self.n_permutations + 1)


@dataclass
class PairwiseResult:
    group_a: str
    group_b: str
    mean_difference: float
    p_value: float
    p_holm: float


def chi_squared_statistic(table) -> float:
    """Pearson chi-squared; cells with zero expected count contribute zero."""
    table = np.asarray(table, dtype=float)
    total = table.sum()
    if total == 0:
        return 0.0
    expected = table.sum(axis=1, keepdims=True) * table.sum(axis=0, keepdims=True) / total
    with np.errstate(invalid="ignore", divide="ignore"):
        contrib = np.where(expected > 0, (table - expected) ** 2 / expected, 0.0)
    return float(contrib.sum())


def anova_f_statistic(groups: list[np.ndarray]) -> float:
    """One-way ANOVA F. Zero within-group variance gives inf (or 0 at the null)."""
    k = len(groups)
    n = sum(len(g) for g in groups)
    grand = np.concatenate(groups).mean()
    ss_between = sum(len(g) * (g.mean() - grand) ** 2 for g in groups)
    ss_within = sum(float(((g - g.mean()) ** 2).sum()) for g in groups)
    if ss_within == 0.0:
        return float("inf") if ss_between > 0 else 0.0
    return float((ss_between / (k - 1)) / (ss_within / (n - k)))


def _canonical_order(labels: np.ndarray, values: np.ndarray):
    # sort rows so the permutation stream is independent of input row order
    order = np.lexsort((values, labels))
    return labels[order], values[order]


def permutation_chi2(
    labels, flags, n_permutations: int = 10_000, seed: int = 0, name: str = "chi2"
) -> TestResult:
    """Independence test of a categorical label against a binary flag.

    The statistic is Pearson chi-squared on the labels x {flag, not-flag}
    contingency table; the p-value is Monte Carlo, permuting the flags, with
    the add-one estimate (1 + #{perm >= observed}) / (1 + n).
    """
    labels = np.asarray(labels)
    flags = np.asarray(flags, dtype=int)
    if labels.shape != flags.shape:
        raise ParameterError("labels and flags must have equal length")
    cats, codes = np.unique(labels, return_inverse=True)
    if len(cats) < 2:
        raise ParameterError("need at least two categories")
    codes, flags = _canonical_order(codes, flags)
    k = len(cats)
    totals = np.bincount(codes, minlength=k)

    def stat(fl):
        ones = np.bincount(codes[fl == 1], minlength=k)
        return chi_squared_statistic(np.stack([ones, totals - ones], axis=1))

    observed = stat(flags)
    rng = np.random.default_rng(seed)
    hits = 0
    for _ in range(n_permutations):
        hits += stat(rng.permutation(flags)) >= observed - 1e-12
    p = (1 + hits) / (1 + n_permutations)
    groups = [(str(c), int(t)) for c, t in zip(cats, totals)]
    return TestResult(name, observed, float(p), n_permutations, seed, groups)


def permutation_anova(
    values, labels, n_permutations: int = 10_000, seed: int = 0, name: str = "anova"
) -> TestResult:
    """One-way ANOVA with a Monte Carlo permutation p-value."""
    values = np.asarray(values, dtype=float)
    labels = np.asarray(labels)
    cats, codes = np.unique(labels, return_inverse=True)
    if len(cats) < 2:
        raise ParameterError("need at least two groups")
    codes, values = _canonical_order(codes, values)

    def stat(v):
        return anova_f_statistic([v[codes == c] for c in range(len(cats))])

    observed = stat(values)
    rng = np.random.default_rng(seed)
    hits = 0
    for _ in range(n_permutations):
        hits += stat(rng.permutation(values)) >= observed - 1e-12
    p = (1 + hits) / (1 + n_permutations)
    sizes = np.bincount(codes, minlength=len(cats))
    groups = [(str(c), int(s)) for c, s in zip(cats, sizes)]
    return TestResult(name, observed, float(p), n_permutations, seed, groups)


def holm_correction(p_values: list[float]) -> list[float]:
    """Step-down Holm adjustment, order preserved."""
    m = len(p_values)
    order = np.argsort(p_values)
    adjusted = np.empty(m)
    running = 0.0
    for i, idx in enumerate(order):
        running = max(running, (m - i) * p_values[idx])
        adjusted[idx] = min(1.0, running)
    return adjusted.tolist()


def pairwise_permutation_tests(
    values, labels, n_permutations: int = 10_000, seed: int = 0
) -> list[PairwiseResult]:
    """Two-sided two-sample permutation tests for every pair of groups."""
    values = np.asarray(values, dtype=float)
    labels = np.asarray(labels)
    cats = sorted(np.unique(labels).tolist())
    pairs = [(a, b) for i, a in enumerate(cats) for b in cats[i + 1 :]]
    seeds = np.random.SeedSequence(seed).spawn(len(pairs))
    raw = []
    for (a, b), ss in zip(pairs, seeds):
        va = np.sort(values[labels == a])
        vb = np.sort(values[labels == b])
        pooled = np.concatenate([va, vb])
        na = len(va)
        observed = abs(va.mean() - vb.mean())
        rng = np.random.default_rng(ss)
        hits = 0
        for _ in range(n_permutations):
            perm = rng.permutation(pooled)
            hits += abs(perm[:na].mean() - perm[na:].mean()) >= observed - 1e-12
        raw.append((a, b, va.mean() - vb.mean(), (1 + hits) / (1 + n_permutations)))
    adjusted = holm_correction([r[3] for r in raw])
    return [
        PairwiseResult(str(a), str(b), float(d), float(p), float(ph))
        for (a, b, d, p), ph in zip(raw, adjusted)
    ]


# ---------------------------------------------------------------------------
# disparity tests over trajectory sets


def _attribute_labels(trajectories: TrajectorySet, attribute: str) -> np.ndarray:
    if attribute == "died_in_hospital":
        return np.array([str(int(tr.died_in_hospital)) for tr in trajectories])
    labels = []
    for tr in trajectories:
        if attribute not in tr.demographics:
            raise ParameterError(
                f"trajectory {tr.id} is missing demographic attribute {attribute!r}"
            )
        labels.append(tr.demographics[attribute])
    return np.array(labels)


def test_pruning_uniformity(
    trajectories: TrajectorySet,
    retained_ids,
    attribute: str,
    n_permutations: int = 10_000,
    seed: int = 0,
) -> TestResult:
    """Is being pruned independent of a demographic attribute?

    Builds the attribute x {pruned, retained} contingency table and tests
    independence by permutation chi-squared.
    """
    retained = set(retained_ids)
    labels = _attribute_labels(trajectories, attribute)
    pruned = np.array([tr.id not in retained for tr in trajectories], dtype=int)
    return permutation_chi2(
        labels,
        pruned,
        n_permutations=n_permutations,
        seed=seed,
        name=f"pruning_uniformity[{attribute}]",
    )


def per_trajectory_reward_delta(trajectory, reward1: RewardModel, reward2: RewardModel) -> float:
    """Mean per-step change in reward over the trajectory's visited next-states."""
    sp = trajectory.triples[:, 2]
    return float(np.mean(reward2.rewards[sp] - reward1.rewards[sp]))


def test_reward_loss_disparity(
    trajectories: TrajectorySet,
    reward1: RewardModel,
    reward2: RewardModel,
    attribute: str,
    n_permutations: int = 10_000,
    seed: int = 0,
    retained_ids=None,
) -> tuple[TestResult, list[PairwiseResult]]:
    """Does the stage-2 vs stage-1 reward change differ across groups?

    The per-trajectory effect is the mean over steps of R2(s') - R1(s').
    Omnibus: one-way ANOVA with permutation p. Posthoc: pairwise two-sample
    permutation tests, Holm-corrected. Groups with fewer than two members
    are dropped with a warning. Pass retained_ids to restrict the population
    to retained trajectories; the default uses every trajectory.
    """
    subset = trajectories
    if retained_ids is not None:
        subset = trajectories.subset(retained_ids)
    labels = _attribute_labels(subset, attribute)
    values = np.array(
        [per_trajectory_reward_delta(tr, reward1, reward2) for tr in subset]
    )
    cats, counts = np.unique(labels, return_counts=True)
    small = [str(c) for c, n in zip(cats, counts) if n < 2]
    if small:
        warnings.warn(
            f"dropping groups with fewer than 2 members: {', '.join(small)}",
            stacklevel=2,
        )
        keep = ~np.isin(labels, small)
        labels, values = labels[keep], values[keep]
    if len(np.unique(labels)) < 2:
        raise ParameterError("need at least two groups with >= 2 members")
    omnibus = permutation_anova(
        values,
        labels,
        n_permutations=n_permutations,
        seed=seed,
        name=f"reward_loss_disparity[{attribute}]",
    )
    posthoc = pairwise_permutation_tests(
        values, labels, n_permutations=n_permutations, seed=seed
    )
    return omnibus, posthoc


# ---------------------------------------------------------------------------
# per-state comparison rows and report serialization


def reward_delta_by_state(result) -> list[dict]:
    """Plot-ready per-state comparison of the two stages."""
    rows = []
    for s in range(result.n_states):
        rows.append(
            {
                "state": s,
                "r1": float(result.reward_stage1.rewards[s]),
                "r2": float(result.reward_stage2.rewards[s]),
                "delta": float(result.reward_delta[s]),
                "policy1": int(result.policy_stage1.actions[s]),
                "policy2": int(result.policy_stage2.actions[s]),
                "agree": bool(result.policy_agreement[s]),
            }
        )
    return rows


def write_tests_json(results, path, posthoc: dict | None = None) -> None:
    """JSON summary of test results; posthoc maps test name -> pairwise list."""
    payload = {"note": PERMUTATION_NOTE, "tests": []}
    for res in results:
        entry = dataclasses.asdict(res)
        entry["p_floor"] = res.p_floor
        if posthoc and res.name in posthoc:
            entry["posthoc"] = [dataclasses.asdict(p) for p in posthoc[res.name]]
        payload["tests"].append(entry)
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)


def write_tests_csv(results, path) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(f"# {PERMUTATION_NOTE}\n")
        writer = csv.writer(fh)
        writer.writerow(
            ["name", "statistic", "p_value", "p_floor", "n_permutations", "seed", "groups"]
        )
        for res in results:
            groups = ";".join(f"{label}:{size}" for label, size in res.groups)
            writer.writerow(
                [
                    res.name,
                    repr(res.statistic),
                    repr(res.p_value),
                    repr(res.p_floor),
                    res.n_permutations,
                    res.seed,
                    groups,
                ]
            )
