import io

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ipminer.events import (EVENT_HEADER, EventInstance, EventTemplate, assign_roles,
                            event_histogram, extract_events, instant_condition, label_condition,
                            pair_condition, quasi_continuous_intervals, read_events, write_events,
                            write_event_histogram)
from ipminer.geometry import InteractionLabel, InteractionParams, PositionCode
from ipminer.graph import LabelledNeighborGraph, PairSeries
from ipminer.trajectory import TimeScope, TrajectoryDataset

import oracles
from conftest import random_corridor

T = EventTemplate
P = InteractionParams(eps_dist=0.1, eps_dir=10.0, eps_vel=0.5)


def series(i, j, ts, dist=0.0, vel=0.0, ddir=0.0, pos_ij=3, pos_ji=3, al_ij=False, al_ji=False):
    n = len(ts)

    def arr(v, dtype):
        return np.asarray(v if np.ndim(v) else [v] * n, dtype=dtype)

    return PairSeries(i, j, np.asarray(ts, dtype=np.int64), arr(dist, float), arr(vel, float),
                      arr(ddir, float), arr(pos_ij, np.int8), arr(pos_ji, np.int8),
                      arr(al_ij, bool), arr(al_ji, bool))


def graph_of(*pairs, params=P):
    ds = TrajectoryDataset(TimeScope(1000, 0.1), {}, 1.0)
    return LabelledNeighborGraph(ds, params, {(s.i, s.j): s for s in pairs})


def label(dist=0.0, vel=0.0, ddir=0.0, pos=PositionCode.V3_LATERAL, aligned=False):
    return InteractionLabel(dist, vel, ddir, pos, aligned)


def test_moving_away_condition():
    assert label_condition(T.MOVING_AWAY, label(dist=0.5), P)
    assert not label_condition(T.MOVING_AWAY, label(dist=0.05), P)


def test_following_condition_needs_every_clause():
    ok = label(ddir=0.0, pos=PositionCode.V1_BEHIND, aligned=True)
    assert label_condition(T.FOLLOWING, ok, P)
    assert not label_condition(T.FOLLOWING, label(pos=PositionCode.V1_BEHIND), P)
    assert not label_condition(T.FOLLOWING, label(ddir=20, pos=PositionCode.V1_BEHIND, aligned=True), P)
    assert not label_condition(T.FOLLOWING, label(dist=0.3, pos=PositionCode.V1_BEHIND, aligned=True), P)
    assert not label_condition(T.FOLLOWING, label(aligned=True), P)


def test_alignment_separates_opposite_and_frontal():
    lab = label(dist=-1.0, ddir=180.0, pos=PositionCode.V5_MOVING_IN_FRONT, aligned=False)
    assert label_condition(T.OPPOSITE_APPROACH, lab, P)
    assert not label_condition(T.FRONTAL_APPROACH, lab, P)
    lab = label(dist=-1.0, ddir=180.0, pos=PositionCode.V6_MOVING_BEHIND_OPPOSITE, aligned=True)
    assert label_condition(T.FRONTAL_APPROACH, lab, P)
    assert not label_condition(T.OPPOSITE_APPROACH, lab, P)


def test_opposite_flanking_reading():
    lab = label(ddir=175.0, pos=PositionCode.V4_FLANKED_SAME_DIR)
    assert label_condition(T.OPPOSITE_FLANKING, lab, P)
    assert not label_condition(T.OPPOSITE_FLANKING, lab, P, literal_opposite_flanking=True)
    same = label(ddir=0.0, pos=PositionCode.V4_FLANKED_SAME_DIR)
    assert not label_condition(T.OPPOSITE_FLANKING, same, P)
    assert label_condition(T.OPPOSITE_FLANKING, same, P, literal_opposite_flanking=True)


def test_instant_condition_uses_orientation_and_needs_edge():
    s = series(1, 2, [5], pos_ij=1, pos_ji=2, al_ij=True, al_ji=True)
    g = graph_of(s)
    assert instant_condition(T.FOLLOWING, (1, 2), 5, g, P)
    assert not instant_condition(T.FOLLOWING, (2, 1), 5, g, P)
    with pytest.raises(KeyError):
        instant_condition(T.FOLLOWING, (1, 2), 6, g, P)


def test_pair_condition_is_either_orientation():
    s = series(1, 2, [1, 2], pos_ij=[1, 2], pos_ji=[2, 1], al_ij=True, al_ji=True)
    assert pair_condition(T.FOLLOWING, s, P).tolist() == [True, True]


@pytest.mark.parametrize("true_at,ts,expected", [
    ({1, 2, 3, 4}, range(1, 5), [(1, 4)]),
    ({1, 2, 4, 5}, range(1, 6), [(1, 5)]),
    ({1, 2, 5, 6}, range(1, 7), [(1, 2), (5, 6)]),
    ({1, 3}, [1, 3], []),            # a missing edge is not a bridgeable failure
    ({4}, range(1, 8), []),          # one instant is not a transition
    ({1, 2, 3}, range(1, 6), [(1, 3)]),  # trailing failure is not absorbed
])
def test_quasi_continuous_examples(true_at, ts, expected):
    ts = list(ts)
    assert quasi_continuous_intervals(ts, [t in true_at for t in ts]) == expected


def test_blocked_instants_break_intervals():
    ts = list(range(1, 11))
    assert quasi_continuous_intervals(ts, [True] * 10, blocked=[(4, 6)]) == [(1, 3), (7, 10)]


def test_extract_examples_through_graph():
    dist = [0.5, 0.5, -0.5, 0.5, 0.5, -0.5, -0.5, 0.5, 0.5]
    g = graph_of(series(3, 8, range(1, 10), dist=dist, vel=2.0))
    got = [e for e in extract_events(g) if e.template is T.MOVING_AWAY]
    assert got == [EventInstance(T.MOVING_AWAY, 3, 8, 1, 5), EventInstance(T.MOVING_AWAY, 3, 8, 8, 9)]


def test_speed_roles():
    g = graph_of(series(1, 2, range(1, 6), dist=0.5, vel=2.0),
                 series(3, 4, range(1, 6), dist=0.5, vel=-2.0),
                 series(5, 6, range(1, 6), dist=0.5, vel=0.0),
                 series(7, 9, range(1, 6), dist=0.5, vel=-0.4))
    subjects = {e.pair: e.subject for e in extract_events(g, templates=[T.MOVING_AWAY])}
    assert subjects == {(1, 2): 1, (3, 4): 4, (5, 6): 5, (7, 9): 7}
    assert assign_roles(T.MOVING_AWAY, (4, 3), (1, 5), g, P) == (4, 3)


def test_follow_roles():
    # j is found behind i, so j is the follower
    g = graph_of(series(1, 2, range(1, 6), pos_ij=2, pos_ji=1, al_ij=True, al_ji=True),
                 series(3, 4, range(1, 6), pos_ij=1, pos_ji=2, al_ij=True, al_ji=True))
    evs = extract_events(g, templates=[T.FOLLOWING])
    assert [(e.subject, e.object) for e in evs] == [(2, 1), (3, 4)]


def test_approach_excludes_specific_occurrences():
    # back-aligned approach on [3, 6] inside a longer closing phase
    pos = [3, 3, 1, 1, 1, 1, 3, 3]
    g = graph_of(series(1, 2, range(1, 9), dist=-0.5, pos_ij=pos, al_ij=True))
    evs = {(e.template, e.interval) for e in extract_events(g)}
    assert (T.BACK_ALIGNED_APPROACH, (3, 6)) in evs
    assert (T.APPROACH, (7, 8)) in evs
    assert (T.APPROACH, (1, 2)) in evs
    assert not any(t is T.APPROACH and lo <= 6 and hi >= 3 for t, (lo, hi) in evs)


def test_approach_kept_when_specific_is_too_short():
    # a lone specific instant never forms an instance, so nothing is excluded
    pos = [3, 3, 1, 3, 3]
    g = graph_of(series(1, 2, range(1, 6), dist=-0.5, pos_ij=pos, al_ij=True))
    evs = {(e.template, e.interval) for e in extract_events(g)}
    assert evs == {(T.APPROACH, (1, 5))}


def test_event_instance_validation():
    with pytest.raises(ValueError):
        EventInstance(T.APPROACH, 1, 1, 0, 4)
    with pytest.raises(ValueError):
        EventInstance(T.APPROACH, 1, 2, 4, 4)


@pytest.mark.parametrize("literal", [False, True])
def test_extraction_matches_brute_force_oracle(literal):
    rng = np.random.default_rng(11 if literal else 12)
    params = InteractionParams(eps_dist=0.08, eps_dir=10.0, eps_vel=0.05)
    pairs = [oracles.random_pair_series(rng, i, i + 1 + int(rng.integers(0, 3)),
                                        int(rng.integers(2, 201)))
             for i in range(0, 400, 4)]
    g = graph_of(*pairs, params=params)
    got = extract_events(g, params, literal_opposite_flanking=literal)
    want = set()
    for s in pairs:
        want |= oracles.oracle_pair_events(s, params, literal)
    assert len(got) == len(set(got))
    assert set(got) == want


@given(st.integers(0, 10_000))
def test_event_invariants_on_random_series(seed):
    rng = np.random.default_rng(seed)
    s = oracles.random_pair_series(rng, 2, 5, int(rng.integers(2, 120)))
    evs = extract_events(graph_of(s))
    covered = set(s.t.tolist())
    by_key = {}
    for e in evs:
        assert e.agents == {2, 5}
        assert e.end >= e.start + 1
        assert set(range(e.start, e.end + 1)) <= covered
        by_key.setdefault((e.template, e.pair), []).append(e.interval)
    for ivs in by_key.values():
        ivs.sort()
        for (a, b), (c, d) in zip(ivs, ivs[1:]):
            assert c > b + 1
    # no general instance covers a specific run longer than one tick
    for general, specific in ((T.APPROACH, oracles.SPECIFIC[T.APPROACH]),
                              (T.MAINTAINING_DISTANCE, oracles.SPECIFIC[T.MAINTAINING_DISTANCE])):
        runs = [e.interval for e in evs if e.template in specific and e.end - e.start > 1]
        for e in evs:
            if e.template is general:
                assert not any(e.start <= hi and lo <= e.end for lo, hi in runs)


def test_workers_and_sorting_on_corridor():
    from ipminer.graph import build_neighbor_graph
    ds = random_corridor(21, n=20, length=200)
    params = InteractionParams(d_search=10.0, r_agent=0.6, eps_dist=0.01, eps_vel=0.05)
    g = build_neighbor_graph(ds, params)
    one = extract_events(g)
    assert one == sorted(one, key=EventInstance.sort_key)
    assert one == extract_events(g, workers=3)
    for e in one:
        a, b = ds.agents[e.subject], ds.agents[e.object]
        assert max(a.start, b.start) < e.start and e.end <= min(a.end, b.end)


def test_csv_round_trip_and_histogram():
    evs = [EventInstance(T.FLANKING, 1, 2, 3, 9), EventInstance(T.APPROACH, 4, 2, 0, 1)]
    buf = io.StringIO()
    assert write_events(evs, buf) == 2
    assert buf.getvalue().splitlines()[0] == ",".join(EVENT_HEADER)
    assert read_events(io.StringIO(buf.getvalue())) == evs
    hist = event_histogram(evs)
    assert list(hist) == list(T) and sum(hist.values()) == 2
    out = io.StringIO()
    assert write_event_histogram(evs, out) == 9
    assert "flanking,1" in out.getvalue().splitlines()
