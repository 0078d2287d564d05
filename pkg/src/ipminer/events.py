"""Event templates and extraction of maximal quasi-continuous event instances."""

from __future__ import annotations

import csv
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .geometry import InteractionLabel, InteractionParams, PositionCode
from .graph import LabelledNeighborGraph, PairSeries


class EventTemplate(Enum):
    MOVING_AWAY = "moving_away"
    FOLLOWING = "following"
    MAINTAINING_DISTANCE = "maintaining_distance"
    BACK_ALIGNED_APPROACH = "back_aligned_approach"
    FRONTAL_APPROACH = "frontal_approach"
    OPPOSITE_APPROACH = "opposite_approach"
    APPROACH = "approach"
    FLANKING = "flanking"
    OPPOSITE_FLANKING = "opposite_flanking"

    @property
    def rank(self) -> int:
        return _RANK[self]


_RANK = {tpl: k for k, tpl in enumerate(EventTemplate)}

SPEED_ROLE = frozenset({
    EventTemplate.MOVING_AWAY, EventTemplate.FRONTAL_APPROACH,
    EventTemplate.OPPOSITE_APPROACH, EventTemplate.APPROACH,
    EventTemplate.FLANKING, EventTemplate.OPPOSITE_FLANKING,
})
FOLLOW_ROLE = frozenset({
    EventTemplate.FOLLOWING, EventTemplate.MAINTAINING_DISTANCE,
    EventTemplate.BACK_ALIGNED_APPROACH,
})

# general template -> more specific templates whose occurrences it must not contain
EXCLUSIONS = {
    EventTemplate.APPROACH: (EventTemplate.BACK_ALIGNED_APPROACH,
                             EventTemplate.FRONTAL_APPROACH,
                             EventTemplate.OPPOSITE_APPROACH),
    EventTemplate.MAINTAINING_DISTANCE: (EventTemplate.FOLLOWING,),
}

_OPPOSITE_CODES = (PositionCode.V5_MOVING_IN_FRONT, PositionCode.V6_MOVING_BEHIND_OPPOSITE)


@dataclass(frozen=True)
class EventInstance:
    template: EventTemplate
    subject: int
    object: int
    start: int
    end: int

    def __post_init__(self):
        if self.subject == self.object:
            raise ValueError("subject and object must differ")
        if self.end < self.start + 1:
            raise ValueError("an event spans at least one transition")

    @property
    def interval(self) -> tuple[int, int]:
        return (self.start, self.end)

    @property
    def agents(self) -> frozenset[int]:
        return frozenset((self.subject, self.object))

    @property
    def pair(self) -> tuple[int, int]:
        return (min(self.subject, self.object), max(self.subject, self.object))

    def sort_key(self):
        return (self.template.rank, self.subject, self.object, self.start)


def _series_condition(template: EventTemplate, dist, ddir, pos, al, params: InteractionParams,
                      literal_opposite_flanking: bool = False):
    """Per-instant condition on label arrays oriented from one agent's side."""
    eps_d, eps_dir = params.eps_dist, params.eps_dir
    same_dir = ddir <= eps_dir
    opposite = ddir >= 180.0 - eps_dir
    opposite_pos = np.isin(pos, [int(c) for c in _OPPOSITE_CODES])
    behind = pos == int(PositionCode.V1_BEHIND)
    closing = dist < -eps_d
    steady = (dist >= -eps_d) & (dist <= eps_d)
    if template is EventTemplate.MOVING_AWAY:
        return dist > eps_d
    if template is EventTemplate.FOLLOWING:
        return same_dir & al & behind & steady
    if template is EventTemplate.MAINTAINING_DISTANCE:
        return steady
    if template is EventTemplate.BACK_ALIGNED_APPROACH:
        return same_dir & al & behind & closing
    if template is EventTemplate.FRONTAL_APPROACH:
        return opposite & al & opposite_pos & closing
    if template is EventTemplate.OPPOSITE_APPROACH:
        return opposite & ~al & opposite_pos & closing
    if template is EventTemplate.APPROACH:
        return closing
    if template is EventTemplate.FLANKING:
        return same_dir & (pos == int(PositionCode.V4_FLANKED_SAME_DIR))
    if template is EventTemplate.OPPOSITE_FLANKING:
        direction_ok = (ddir <= 180.0 - eps_dir) if literal_opposite_flanking else opposite
        return direction_ok & (pos == int(PositionCode.V4_FLANKED_SAME_DIR))
    raise ValueError(f"unknown template {template}")


def label_condition(template: EventTemplate, label: InteractionLabel, params: InteractionParams,
                    literal_opposite_flanking: bool = False) -> bool:
    """Instant condition of ``template`` on one oriented interaction label.

    The negative clauses of APPROACH and MAINTAINING_DISTANCE concern
    whole intervals and are applied during extraction, not here.
    """
    return bool(_series_condition(
        template, np.float64(label.distance_delta), np.float64(label.direction_diff),
        np.int8(int(label.position)), np.bool_(label.aligned), params,
        literal_opposite_flanking))


def instant_condition(template: EventTemplate, pair: tuple[int, int], t: int,
                      graph: LabelledNeighborGraph, params: InteractionParams,
                      literal_opposite_flanking: bool = False) -> bool:
    """Instant condition for the ordered pair ``(i, j)`` at ``t``.

    Raises ``KeyError`` when there is no interaction edge.
    """
    i, j = pair
    return label_condition(template, graph.label(i, j, t), params, literal_opposite_flanking)


def pair_condition(template: EventTemplate, series: PairSeries, params: InteractionParams,
                   literal_opposite_flanking: bool = False) -> np.ndarray:
    """Condition of an unordered pair: holds when it holds in either orientation."""
    fwd = _series_condition(template, series.distance_delta, series.direction_diff,
                            series.position_ij, series.aligned_ij, params,
                            literal_opposite_flanking)
    rev = _series_condition(template, series.distance_delta, series.direction_diff,
                            series.position_ji, series.aligned_ji, params,
                            literal_opposite_flanking)
    return np.asarray(fwd | rev, dtype=bool)


def quasi_continuous_intervals(ts: Sequence[int], cond: Sequence[bool],
                               blocked: Iterable[tuple[int, int]] = ()) -> list[tuple[int, int]]:
    """Maximal quasi-continuous intervals of a condition sampled at instants ``ts``.

    Instants missing from ``ts`` (no edge) and instants inside a ``blocked``
    interval break an event. Inside an interval the condition may fail only
    at isolated instants followed by one where it holds; both endpoints
    satisfy it. Intervals shorter than one transition are dropped.
    """
    ts = np.asarray(ts, dtype=np.int64)
    cond = np.asarray(cond, dtype=bool)
    if len(ts) == 0:
        return []
    ok = np.ones(len(ts), dtype=bool)
    for lo, hi in blocked:
        ok &= ~((ts >= lo) & (ts <= hi))
    true_ts = ts[cond & ok]
    if len(true_ts) == 0:
        return []
    # a bridge between consecutive true instants needs every instant between them
    # to carry an unblocked edge, and at most one failing instant
    covered = set(ts[ok].tolist())
    out = []
    a = prev = int(true_ts[0])
    for t in true_ts[1:].tolist():
        if t - prev == 1 or (t - prev == 2 and prev + 1 in covered):
            prev = t
            continue
        if prev > a:
            out.append((a, prev))
        a = prev = t
    if prev > a:
        out.append((a, prev))
    return out


def _roles(template: EventTemplate, series: PairSeries, lo: int, hi: int,
           params: InteractionParams) -> tuple[int, int]:
    sel = (series.t >= lo) & (series.t <= hi)
    i, j = series.i, series.j
    if template in SPEED_ROLE:
        mean = float(np.mean(series.velocity_delta[sel]))
        if mean < -params.eps_vel:
            return j, i
        return i, j
    behind_i = int(np.count_nonzero(series.position_ij[sel] == int(PositionCode.V1_BEHIND)))
    behind_j = int(np.count_nonzero(series.position_ji[sel] == int(PositionCode.V1_BEHIND)))
    if behind_j > behind_i:
        return j, i
    return i, j


def assign_roles(template: EventTemplate, pair: tuple[int, int], interval: tuple[int, int],
                 graph: LabelledNeighborGraph, params: InteractionParams) -> tuple[int, int]:
    """Subject and object of an extracted interval.

    Speed rules compare the interval-mean velocity difference against
    ``eps_vel``; following rules pick the agent found behind (V1) more
    often. Ties go to the lower agent id as subject.
    """
    return _roles(template, graph.pair(*pair), interval[0], interval[1], params)


def pair_events(series: PairSeries, params: InteractionParams,
                templates: Sequence[EventTemplate] | None = None,
                literal_opposite_flanking: bool = False) -> list[EventInstance]:
    templates = list(EventTemplate) if templates is None else list(templates)
    needed = set(templates)
    for tpl in templates:
        needed.update(EXCLUSIONS.get(tpl, ()))
    intervals: dict[EventTemplate, list[tuple[int, int]]] = {}
    for tpl in sorted(needed, key=lambda x: x.rank):
        if tpl in EXCLUSIONS:
            continue
        intervals[tpl] = quasi_continuous_intervals(
            series.t, pair_condition(tpl, series, params, literal_opposite_flanking))
    for tpl, specific in EXCLUSIONS.items():
        if tpl not in needed:
            continue
        blocked = [iv for s in specific for iv in intervals[s] if iv[1] - iv[0] > 1]
        intervals[tpl] = quasi_continuous_intervals(
            series.t, pair_condition(tpl, series, params, literal_opposite_flanking), blocked)
    out = []
    for tpl in templates:
        for lo, hi in intervals[tpl]:
            subject, obj = _roles(tpl, series, lo, hi, params)
            out.append(EventInstance(tpl, subject, obj, lo, hi))
    return out


def _events_for_pairs(pairs: list[PairSeries], params, templates, literal):
    out = []
    for series in pairs:
        out.extend(pair_events(series, params, templates, literal))
    return out


def extract_events(graph: LabelledNeighborGraph, params: InteractionParams | None = None,
                   templates: Sequence[EventTemplate] | None = None,
                   literal_opposite_flanking: bool = False,
                   workers: int = 1) -> list[EventInstance]:
    """All maximal quasi-continuous event instances, sorted deterministically."""
    params = params or graph.params
    series = [graph.pairs[k] for k in sorted(graph.pairs)]
    if workers > 1 and len(series) > 1:
        size = -(-len(series) // (workers * 4))
        batches = [series[k:k + size] for k in range(0, len(series), size)]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = pool.map(_events_for_pairs, batches, [params] * len(batches),
                             [templates] * len(batches),
                             [literal_opposite_flanking] * len(batches))
            events = [e for part in parts for e in part]
    else:
        events = _events_for_pairs(series, params, templates, literal_opposite_flanking)
    events.sort(key=EventInstance.sort_key)
    return events


EVENT_HEADER = ("template", "subject", "object", "t_start", "t_end")


def write_events(events: Iterable[EventInstance], dest) -> int:
    if isinstance(dest, (str, Path)):
        with open(dest, "w", newline="") as fh:
            return write_events(events, fh)
    writer = csv.writer(dest, lineterminator="\n")
    writer.writerow(EVENT_HEADER)
    n = 0
    for e in events:
        writer.writerow([e.template.value, e.subject, e.object, e.start, e.end])
        n += 1
    return n


def read_events(source) -> list[EventInstance]:
    if isinstance(source, (str, Path)):
        with open(source, newline="") as fh:
            return read_events(fh)
    reader = csv.DictReader(source)
    return [EventInstance(EventTemplate(r["template"]), int(r["subject"]), int(r["object"]),
                          int(r["t_start"]), int(r["t_end"])) for r in reader]


def event_histogram(events: Iterable[EventInstance]) -> dict[EventTemplate, int]:
    counts = Counter(e.template for e in events)
    return {tpl: counts.get(tpl, 0) for tpl in EventTemplate}


def write_event_histogram(events: Iterable[EventInstance], dest) -> int:
    if isinstance(dest, (str, Path)):
        with open(dest, "w", newline="") as fh:
            return write_event_histogram(events, fh)
    writer = csv.writer(dest, lineterminator="\n")
    writer.writerow(("template", "count"))
    hist = event_histogram(events)
    for tpl, count in hist.items():
        writer.writerow((tpl.value, count))
    return len(hist)
