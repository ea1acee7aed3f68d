"""Discrete trajectories: ordered (state, action, next_state) triples per subject.

A Trajectory is the unit of training, scoring, and pruning. The triples of
one trajectory chain: the next_state of step t equals the state of step t+1.
A TrajectorySet is an ordered collection with a common state/action space,
serializable to a flat CSV (one row per step, demographic tags and the
in-hospital death flag copied onto every row).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import SchemaError

# fixed leading columns of the trajectory CSV; any extra column except
# died_in_hospital is treated as a demographic tag
_CORE_COLUMNS = ("trajectory_id", "step", "state", "action", "next_state")
_DEATH_COLUMN = "died_in_hospital"


@dataclass
class Trajectory:
    """One subject's path through the discrete MDP."""

    id: str
    triples: np.ndarray  # int array of shape (n_steps, 3): state, action, next_state
    demographics: dict[str, str] = field(default_factory=dict)
    died_in_hospital: bool = False

    def __post_init__(self):
        self.triples = np.asarray(self.triples, dtype=np.int64)
        if self.triples.ndim != 2 or self.triples.shape[1] != 3:
            raise SchemaError(f"trajectory {self.id}: triples must have shape (n, 3)")
        if len(self.triples) < 1:
            raise SchemaError(f"trajectory {self.id}: at least one transition required")
        if not np.array_equal(self.triples[:-1, 2], self.triples[1:, 0]):
            raise SchemaError(f"trajectory {self.id}: triples do not chain")

    def __len__(self) -> int:
        return len(self.triples)

    @property
    def states(self) -> np.ndarray:
        """All visited states: the initial state followed by every next_state."""
        return np.concatenate(([self.triples[0, 0]], self.triples[:, 2]))

    @property
    def end_state(self) -> int:
        return int(self.triples[-1, 2])


@dataclass
class TrajectorySet:
    """Ordered trajectory collection over a shared state/action space."""

    trajectories: list[Trajectory]
    n_states: int
    n_actions: int

    def __post_init__(self):
        seen = set()
        for tr in self.trajectories:
            if tr.id in seen:
                raise SchemaError(f"duplicate trajectory id {tr.id!r}")
            seen.add(tr.id)
            if tr.triples.min(initial=0) < 0:
                raise SchemaError(f"trajectory {tr.id}: negative state/action id")
            if tr.triples[:, [0, 2]].max(initial=-1) >= self.n_states:
                raise SchemaError(f"trajectory {tr.id}: state id out of range")
            if tr.triples[:, 1].max(initial=-1) >= self.n_actions:
                raise SchemaError(f"trajectory {tr.id}: action id out of range")

    def __len__(self) -> int:
        return len(self.trajectories)

    def __iter__(self):
        return iter(self.trajectories)

    def __getitem__(self, i) -> Trajectory:
        return self.trajectories[i]

    @property
    def ids(self) -> list[str]:
        return [tr.id for tr in self.trajectories]

    def max_length(self) -> int:
        return max(len(tr) for tr in self.trajectories)

    def subset(self, ids) -> "TrajectorySet":
        """Sub-collection restricted to the given ids, original order kept."""
        keep = set(ids)
        unknown = keep - {tr.id for tr in self.trajectories}
        if unknown:
            raise SchemaError(f"unknown trajectory ids: {sorted(unknown)[:5]}")
        return TrajectorySet(
            [tr for tr in self.trajectories if tr.id in keep],
            self.n_states,
            self.n_actions,
        )

    def demographic_tags(self) -> list[str]:
        tags = sorted({k for tr in self.trajectories for k in tr.demographics})
        return tags

    def to_csv(self, path) -> None:
        tags = self.demographic_tags()
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(list(_CORE_COLUMNS) + tags + [_DEATH_COLUMN])
            for tr in self.trajectories:
                demo = [tr.demographics.get(t, "") for t in tags]
                died = int(tr.died_in_hospital)
                for step, (s, a, sp) in enumerate(tr.triples):
                    writer.writerow([tr.id, step, s, a, sp] + demo + [died])

    @classmethod
    def from_csv(cls, path, n_states=None, n_actions=None) -> "TrajectorySet":
        """Load a trajectory CSV; dimensions inferred from the data if not given."""
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None:
                raise SchemaError(f"{path}: empty file")
            missing = [c for c in _CORE_COLUMNS if c not in reader.fieldnames]
            if missing:
                raise SchemaError(f"{path}: missing columns {missing}")
            tags = [
                c
                for c in reader.fieldnames
                if c not in _CORE_COLUMNS and c != _DEATH_COLUMN
            ]
            rows_by_id: dict[str, list] = {}
            order: list[str] = []
            for row in reader:
                tid = row["trajectory_id"]
                if tid not in rows_by_id:
                    rows_by_id[tid] = []
                    order.append(tid)
                rows_by_id[tid].append(row)

        trajectories = []
        for tid in order:
            rows = sorted(rows_by_id[tid], key=lambda r: int(r["step"]))
            triples = np.array(
                [[int(r["state"]), int(r["action"]), int(r["next_state"])] for r in rows]
            )
            first = rows[0]
            demo = {t: first[t] for t in tags}
            died = bool(int(first[_DEATH_COLUMN])) if _DEATH_COLUMN in first else False
            trajectories.append(Trajectory(tid, triples, demo, died))

        if not trajectories:
            raise SchemaError(f"{path}: no trajectories")
        if n_states is None:
            n_states = 1 + max(int(tr.triples[:, [0, 2]].max()) for tr in trajectories)
        if n_actions is None:
            n_actions = 1 + max(int(tr.triples[:, 1].max()) for tr in trajectories)
        return cls(trajectories, n_states, n_actions)
