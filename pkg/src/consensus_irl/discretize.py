"""Discrete state space over feature rows via seeded k-means.

Features are z-scored before clustering so mixed units cannot dominate the
metric, centers are seeded with k-means++ under a fixed generator, and Lloyd
iterations stop at a relative inertia change below 1e-6 (or 300 rounds).
Clusters smaller than min_size are marked dropped; their rows re-assign to
the nearest retained center rather than disappearing, which keeps trajectory
chains intact. State ids are centroid indices and stay stable across the
drop, so a model fitted with k=200 can emit states with gaps in the id
range.
"""

from __future__ import annotations

import json
import warnings

import numpy as np

from .errors import CohortEmptyError, ParameterError, SchemaError
from .trajectories import Trajectory, TrajectorySet

MAX_LLOYD_ITERATIONS = 300
INERTIA_RELTOL = 1e-6


class ClusterModel:
    """Fitted k-means state space with scaling and per-cluster statistics."""

    def __init__(
        self,
        centroids: np.ndarray,
        feature_names: list[str],
        feature_means: np.ndarray,
        feature_stds: np.ndarray,
        used: np.ndarray,
        member_counts: np.ndarray,
        dropped_cluster_ids: set,
        feature_stats: dict,
        inertia: float,
        seed: int,
    ):
        self.centroids = np.asarray(centroids, dtype=float)
        self.feature_names = list(feature_names)
        self.feature_means = np.asarray(feature_means, dtype=float)
        self.feature_stds = np.asarray(feature_stds, dtype=float)
        self.used = np.asarray(used, dtype=bool)
        self.member_counts = np.asarray(member_counts, dtype=np.int64)
        self.dropped_cluster_ids = set(int(c) for c in dropped_cluster_ids)
        self.feature_stats = feature_stats
        self.inertia = float(inertia)
        self.seed = seed
        if not np.all(np.isfinite(self.centroids)):
            raise ParameterError("centroids must be finite")

    @property
    def k(self) -> int:
        return self.centroids.shape[0]

    @property
    def retained_ids(self) -> list[int]:
        return [c for c in range(self.k) if c not in self.dropped_cluster_ids]

    @property
    def excluded_features(self) -> list[str]:
        return [n for n, u in zip(self.feature_names, self.used) if not u]

    def standardize(self, rows: np.ndarray) -> np.ndarray:
        rows = np.asarray(rows, dtype=float)
        if rows.ndim != 2 or rows.shape[1] != len(self.feature_names):
            raise SchemaError(
                f"expected rows with {len(self.feature_names)} features, "
                f"got shape {rows.shape}"
            )
        z = (rows[:, self.used] - self.feature_means[self.used]) / self.feature_stds[self.used]
        return z

    def centroids_original_units(self) -> np.ndarray:
        """Centers mapped back to original units (used features only)."""
        return self.centroids * self.feature_stds[self.used] + self.feature_means[self.used]

    def to_json(self, path) -> None:
        payload = {
            "centroids": self.centroids.tolist(),
            "feature_names": self.feature_names,
            "feature_means": self.feature_means.tolist(),
            "feature_stds": self.feature_stds.tolist(),
            "used": self.used.astype(int).tolist(),
            "member_counts": self.member_counts.tolist(),
            "dropped_cluster_ids": sorted(self.dropped_cluster_ids),
            "feature_stats": {
                str(c): st for c, st in sorted(self.feature_stats.items())
            },
            "inertia": self.inertia,
            "seed": self.seed,
        }
        with open(path, "w") as fh:
            json.dump(payload, fh, sort_keys=True)

    @classmethod
    def from_json(cls, path) -> "ClusterModel":
        with open(path) as fh:
            p = json.load(fh)
        return cls(
            centroids=np.array(p["centroids"]),
            feature_names=p["feature_names"],
            feature_means=np.array(p["feature_means"]),
            feature_stds=np.array(p["feature_stds"]),
            used=np.array(p["used"], dtype=bool),
            member_counts=np.array(p["member_counts"]),
            dropped_cluster_ids=set(p["dropped_cluster_ids"]),
            feature_stats={int(c): st for c, st in p["feature_stats"].items()},
            inertia=p["inertia"],
            seed=p["seed"],
        )


def _squared_distances(z: np.ndarray, centers: np.ndarray) -> np.ndarray:
    # (n, k) table of squared Euclidean distances
    return ((z[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)


def _kmeans_pp_init(z: np.ndarray, k: int, rng) -> np.ndarray:
    n = z.shape[0]
    centers = np.empty((k, z.shape[1]))
    centers[0] = z[rng.integers(n)]
    d2 = ((z - centers[0]) ** 2).sum(axis=1)
    for j in range(1, k):
        total = d2.sum()
        if total == 0:
            centers[j] = z[rng.integers(n)]
            continue
        centers[j] = z[rng.choice(n, p=d2 / total)]
        d2 = np.minimum(d2, ((z - centers[j]) ** 2).sum(axis=1))
    return centers


def _lloyd(z: np.ndarray, centers: np.ndarray) -> tuple[np.ndarray, np.ndarray, float]:
    inertia = np.inf
    assign = None
    for _ in range(MAX_LLOYD_ITERATIONS):
        d2 = _squared_distances(z, centers)
        assign = d2.argmin(axis=1)
        new_inertia = float(d2[np.arange(len(z)), assign].sum())
        for j in range(centers.shape[0]):
            members = z[assign == j]
            if len(members):
                centers[j] = members.mean(axis=0)
            else:
                # re-seed an empty cluster at the point farthest from its center
                far = d2[np.arange(len(z)), assign].argmax()
                centers[j] = z[far]
        if inertia - new_inertia <= INERTIA_RELTOL * max(new_inertia, 1e-300):
            inertia = new_inertia
            break
        inertia = new_inertia
    d2 = _squared_distances(z, centers)
    assign = d2.argmin(axis=1)
    inertia = float(d2[np.arange(len(z)), assign].sum())
    return centers, assign, inertia


def fit_state_space(
    rows,
    k: int = 200,
    min_size: int = 10,
    seed: int = 0,
    feature_names: list[str] | None = None,
    n_restarts: int = 1,
) -> ClusterModel:
    """Fit the k-means state space over feature rows.

    Zero-variance features are excluded with a warning (they carry no
    clustering signal and would divide by zero under z-scoring). The best of
    n_restarts seeded runs by inertia wins.
    """
    rows = np.asarray(rows, dtype=float)
    if rows.ndim != 2:
        raise ParameterError("rows must be a 2-D array")
    n, d = rows.shape
    if feature_names is None:
        feature_names = [f"f{j}" for j in range(d)]
    if len(feature_names) != d:
        raise ParameterError("feature_names length must match row width")
    if k < 2:
        raise ParameterError("k must be >= 2")
    if n < k:
        raise ParameterError(f"need at least k={k} rows, got {n}")

    means = rows.mean(axis=0)
    stds = rows.std(axis=0)
    used = stds > 0
    if not used.any():
        raise ParameterError("every feature has zero variance")
    if not used.all():
        dead = [feature_names[j] for j in range(d) if not used[j]]
        warnings.warn(
            "excluding zero-variance features: " + ", ".join(dead), stacklevel=2
        )
    z = (rows[:, used] - means[used]) / stds[used]

    best = None
    for child in np.random.SeedSequence(seed).spawn(n_restarts):
        rng = np.random.default_rng(child)
        centers, assign, inertia = _lloyd(z, _kmeans_pp_init(z, k, rng))
        if best is None or inertia < best[2]:
            best = (centers, assign, inertia)
    centers, assign, inertia = best

    member_counts = np.bincount(assign, minlength=k)
    dropped = {int(c) for c in range(k) if member_counts[c] < min_size}
    if len(dropped) == k:
        raise ParameterError(
            f"every cluster has fewer than min_size={min_size} members"
        )

    model = ClusterModel(
        centroids=centers,
        feature_names=feature_names,
        feature_means=means,
        feature_stds=stds,
        used=used,
        member_counts=member_counts,
        dropped_cluster_ids=dropped,
        feature_stats={},
        inertia=inertia,
        seed=seed,
    )
    # statistics in original units over the post-reassignment membership,
    # which is what downstream cluster tables describe
    final_states = assign_states(rows, model)
    stats = {}
    for c in model.retained_ids:
        members = rows[final_states == c]
        if len(members) == 0:
            continue
        stats[c] = {
            "count": int(len(members)),
            "means": {
                feature_names[j]: float(members[:, j].mean()) for j in range(d)
            },
            "stds": {
                feature_names[j]: float(members[:, j].std()) for j in range(d)
            },
        }
    model.feature_stats = stats
    return model


def assign_states(rows, model: ClusterModel) -> np.ndarray:
    """Nearest retained centroid per row, lowest id on ties."""
    z = model.standardize(rows)
    retained = model.retained_ids
    if not retained:
        raise CohortEmptyError("model has no retained clusters")
    d2 = _squared_distances(z, model.centroids[retained])
    picked = d2.argmin(axis=1)  # argmin takes the first minimum: lowest id wins
    return np.array([retained[i] for i in picked], dtype=np.int64)


def build_trajectory_set(
    state_seqs: dict,
    action_seqs: dict,
    demographics: dict,
    outcomes: dict,
    n_states: int,
    n_actions: int,
) -> tuple[TrajectorySet, dict]:
    """Chain per-subject (state, action) sequences into trajectories.

    Subjects with fewer than two time steps cannot form a transition and are
    excluded; the report counts them. Ids enter the set in sorted order.
    """
    trajectories = []
    excluded = 0
    for sid in sorted(state_seqs):
        states = np.asarray(state_seqs[sid], dtype=np.int64)
        actions = np.asarray(action_seqs[sid], dtype=np.int64)
        if len(states) < 2:
            excluded += 1
            continue
        triples = np.stack(
            [states[:-1], actions[: len(states) - 1], states[1:]], axis=1
        )
        trajectories.append(
            Trajectory(
                str(sid),
                triples,
                dict(demographics.get(sid, {})),
                bool(outcomes.get(sid, False)),
            )
        )
    if not trajectories:
        raise CohortEmptyError("no subject has two or more time steps")
    tset = TrajectorySet(trajectories, n_states, n_actions)
    return tset, {"excluded_short": excluded}


def feature_matrix(prepared: dict, features: list[str]) -> tuple[np.ndarray, dict]:
    """Stack prepared records into a row matrix; remember each subject's rows.

    Returns (matrix, {subject_id: slice}) with subjects in sorted order.
    """
    blocks = []
    index = {}
    start = 0
    for sid in sorted(prepared):
        records, _ = prepared[sid]
        block = np.array(
            [[rec.features[f] for f in features] for rec in records], dtype=float
        )
        blocks.append(block)
        index[sid] = slice(start, start + len(records))
        start += len(records)
    if not blocks:
        raise CohortEmptyError("no prepared subjects")
    return np.vstack(blocks), index


def trajectories_from_prepared(
    prepared: dict, model: ClusterModel, features: list[str]
) -> tuple[TrajectorySet, dict]:
    """Full prepared-records path: assign states, then chain trajectories."""
    rows, index = feature_matrix(prepared, features)
    states = assign_states(rows, model)
    state_seqs = {sid: states[index[sid]] for sid in index}
    action_seqs = {sid: prepared[sid][1] for sid in index}
    demographics = {sid: prepared[sid][0][0].demographics for sid in index}
    outcomes = {sid: prepared[sid][0][0].died_in_hospital for sid in index}
    n_actions = int(max(a.max() for a in action_seqs.values())) + 1
    return build_trajectory_set(
        state_seqs, action_seqs, demographics, outcomes, model.k, n_actions
    )
