import numpy as np
import pytest

from consensus_irl import InputError, Trajectory, TrajectorySet


def make(tid="t0", triples=((0, 1, 2), (2, 0, 1)), **kw):
    return Trajectory(tid, np.array(triples, dtype=np.int64), kw.get("demo", {}),
                      kw.get("died", False))


def test_states_include_initial_and_next():
    tr = make()
    assert tr.states.tolist() == [0, 2, 1]
    assert tr.end_state == 1


def test_chaining_violation_rejected():
    with pytest.raises(InputError):
        make(triples=((0, 1, 2), (3, 0, 1)))


def test_zero_length_rejected():
    with pytest.raises(InputError):
        Trajectory("t0", np.empty((0, 3), dtype=np.int64), {}, False)


def test_set_validates_id_ranges():
    tr = make(triples=((0, 1, 5),))
    with pytest.raises(InputError):
        TrajectorySet([tr], n_states=3, n_actions=2)
    with pytest.raises(InputError):
        TrajectorySet([make(triples=((0, 7, 1),))], n_states=3, n_actions=2)


def test_duplicate_ids_rejected():
    with pytest.raises(InputError):
        TrajectorySet([make("a"), make("a")], 3, 2)


def test_subset_preserves_order_and_checks_ids():
    tset = TrajectorySet([make("a"), make("b"), make("c")], 3, 2)
    sub = tset.subset(["c", "a"])
    assert sub.ids == ["a", "c"]
    assert sub.n_states == 3
    with pytest.raises(InputError):
        tset.subset(["nope"])


def test_max_length_and_tags():
    t1 = make("a", ((0, 0, 1),), demo={"race": "x", "language": "en"})
    t2 = make("b", ((0, 0, 1), (1, 0, 2), (2, 0, 0)), demo={"race": "y"})
    tset = TrajectorySet([t1, t2], 3, 1)
    assert tset.max_length() == 3
    assert tset.demographic_tags() == ["language", "race"]


def test_csv_round_trip(tmp_path, small_population):
    path = tmp_path / "t.csv"
    tset = small_population.trajectories
    tset.to_csv(path)
    back = TrajectorySet.from_csv(path, n_states=tset.n_states,
                                  n_actions=tset.n_actions)
    assert back.ids == tset.ids
    for a, b in zip(tset, back):
        assert np.array_equal(a.triples, b.triples)
        assert a.demographics == b.demographics
        assert a.died_in_hospital == b.died_in_hospital


def test_csv_round_trip_with_demographics(tmp_path):
    t1 = make("a", demo={"race": "x"}, died=True)
    t2 = make("b", demo={"race": "y"}, died=False)
    tset = TrajectorySet([t1, t2], 3, 2)
    path = tmp_path / "t.csv"
    tset.to_csv(path)
    back = TrajectorySet.from_csv(path)
    assert back.ids == ["a", "b"]
    assert back[0].died_in_hospital is True
    assert back[1].demographics == {"race": "y"}


def test_from_csv_infers_dimensions(tmp_path):
    tset = TrajectorySet([make("a", ((0, 3, 4), (4, 1, 2)))], 5, 4)
    path = tmp_path / "t.csv"
    tset.to_csv(path)
    back = TrajectorySet.from_csv(path)
    assert back.n_states == 5
    assert back.n_actions == 4
