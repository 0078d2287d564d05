"""Frequent static interaction pattern mining.

A static pattern instance is a connected set of events over a group of
agents whose common interval lasts at least ``t_min`` instants and which
already holds every event of the group overlapping that interval for at
least ``t_min`` instants. Instances are grown one agent at a time from the
instances of frequent patterns, grouped by canonical multigraph and kept
when their temporal support reaches ``t_supp``.
"""

from __future__ import annotations

import bisect
import logging
from collections import defaultdict
from dataclasses import dataclass, field
from functools import cached_property
from itertools import combinations
from typing import Iterable, Sequence

from .events import EventInstance
from .isomorphism import DEFAULT_MAX_NODES, PatternMultigraph, canonical_form

logger = logging.getLogger(__name__)


def interval_length(lo: int, hi: int) -> int:
    return max(0, hi - lo + 1)


def overlap(a: tuple[int, int], b: tuple[int, int]) -> int:
    return interval_length(max(a[0], b[0]), min(a[1], b[1]))


def union_length(intervals: Iterable[tuple[int, int]]) -> int:
    total = 0
    cur_lo = cur_hi = None
    for lo, hi in sorted(intervals):
        if cur_hi is None or lo > cur_hi + 1:
            if cur_hi is not None:
                total += cur_hi - cur_lo + 1
            cur_lo, cur_hi = lo, hi
        else:
            cur_hi = max(cur_hi, hi)
    if cur_hi is not None:
        total += cur_hi - cur_lo + 1
    return total


def temporal_support(intervals: Iterable[tuple[int, int]], scope_length: int) -> float:
    """Fraction of the ``scope_length`` instants covered by the intervals."""
    intervals = list(intervals)
    if not intervals:
        raise ValueError("temporal support of an empty instance set")
    if scope_length <= 0:
        raise ValueError("scope length must be positive")
    return union_length(intervals) / scope_length


@dataclass(frozen=True)
class MiningThresholds:
    t_min: int = 20
    t_supp: float = 0.8

    def __post_init__(self):
        if self.t_min < 1:
            raise ValueError("t_min must be at least 1")
        if not 0.0 <= self.t_supp <= 1.0:
            raise ValueError("t_supp must lie in [0, 1]")


@dataclass(frozen=True)
class StaticPatternInstance:
    events: tuple[EventInstance, ...]
    lo: int
    hi: int

    @classmethod
    def of(cls, events: Iterable[EventInstance]) -> "StaticPatternInstance":
        events = tuple(sorted(set(events), key=EventInstance.sort_key))
        if not events:
            raise ValueError("an instance holds at least one event")
        lo = max(e.start for e in events)
        hi = min(e.end for e in events)
        return cls(events, lo, hi)

    @cached_property
    def agents(self) -> frozenset[int]:
        return frozenset(a for e in self.events for a in (e.subject, e.object))

    @property
    def interval(self) -> tuple[int, int]:
        return (self.lo, self.hi)

    def __len__(self) -> int:
        return interval_length(self.lo, self.hi)

    @property
    def size(self) -> int:
        return len(self.agents)

    def multigraph(self) -> tuple[PatternMultigraph, list[int]]:
        return PatternMultigraph.from_labelled_edges(
            (e.subject, e.object, e.template.name) for e in self.events)

    def sort_key(self):
        return (tuple(sorted(self.agents)), self.lo, self.hi,
                tuple(e.sort_key() for e in self.events))


@dataclass
class StaticPattern:
    key: bytes
    shape: PatternMultigraph
    instances: list[StaticPatternInstance]
    support: float

    @property
    def serialization(self) -> str:
        return self.key.decode()

    @property
    def size(self) -> int:
        return self.shape.k


class EventIndex:
    """Events grouped by unordered agent pair, with neighbor sets."""

    def __init__(self, events: Iterable[EventInstance]):
        self.by_pair: dict[tuple[int, int], list[EventInstance]] = defaultdict(list)
        self.neighbors: dict[int, set[int]] = defaultdict(set)
        for e in events:
            self.by_pair[e.pair].append(e)
            self.neighbors[e.subject].add(e.object)
            self.neighbors[e.object].add(e.subject)
        for evs in self.by_pair.values():
            evs.sort(key=lambda e: (e.start, e.sort_key()))

    def over(self, agents: Iterable[int]) -> list[EventInstance]:
        agents = sorted(agents)
        out = []
        for a, b in combinations(agents, 2):
            out.extend(self.by_pair.get((a, b), ()))
        out.sort(key=lambda e: (e.start, e.sort_key()))
        return out


def maximal_event_sets(pool: Sequence[EventInstance], t_min: int,
                       bound: tuple[int, int] | None = None,
                       required: frozenset[EventInstance] = frozenset()) -> list[tuple[EventInstance, ...]]:
    """Event sets S of ``pool`` with S = {e : |I_S ∩ interval(e)| >= t_min}.

    ``pool`` must be sorted by start. Every such set has a common interval
    ``[lo, hi]`` where ``lo`` is the start of one member and ``hi`` the end
    of another, so those windows are enumerated; each one whose induced set
    intersects back to the same window is a fixpoint. ``bound`` restricts
    windows to lie inside it and ``required`` events must all be members.
    """
    if not pool:
        return []
    starts = [e.start for e in pool]
    max_len = max(e.end - e.start for e in pool)
    found: dict[tuple, None] = {}
    for e1 in pool:
        lo = e1.start
        if bound is not None and lo < bound[0]:
            continue
        first = bisect.bisect_left(starts, lo - max_len)
        last = bisect.bisect_right(starts, lo)
        for e2 in pool[first:last]:
            hi = e2.end
            if hi > e1.end or hi - lo + 1 < t_min:
                continue
            if bound is not None and hi > bound[1]:
                continue
            window = (lo, hi)
            stop = bisect.bisect_right(starts, hi)
            lo_scan = bisect.bisect_left(starts, lo - max_len)
            members = [e for e in pool[lo_scan:stop] if overlap(window, e.interval) >= t_min]
            if max(e.start for e in members) != lo or min(e.end for e in members) != hi:
                continue
            if required and not required.issubset(members):
                continue
            found[tuple(members)] = None
    return list(found)


def extract_2_ip(events: Iterable[EventInstance] | EventIndex, t_min: int) -> list[StaticPatternInstance]:
    """All maximal persistent event sets of each agent pair."""
    index = events if isinstance(events, EventIndex) else EventIndex(events)
    out = []
    for pair in sorted(index.by_pair):
        for members in maximal_event_sets(index.by_pair[pair], t_min):
            out.append(StaticPatternInstance.of(members))
    out.sort(key=StaticPatternInstance.sort_key)
    return out


@dataclass
class Candidate:
    instance: StaticPatternInstance
    generators: set[bytes] = field(default_factory=set)


def candidate_generation(frequent: Sequence[StaticPatternInstance], t_min: int,
                         index: EventIndex,
                         pattern_of: dict[StaticPatternInstance, bytes] | None = None) -> list[Candidate]:
    """Grow instances of size k into instances of size k+1.

    Two instances whose agent sets differ by swapping one agent and whose
    intervals share at least ``t_min`` instants are merged; the merge is
    then closed into the maximal event sets over the enlarged agent group
    (recombining every merge over the same group that remains persistent).
    """
    pattern_of = pattern_of or {}
    by_subset: dict[frozenset, list[StaticPatternInstance]] = defaultdict(list)
    for ip in frequent:
        for b in ip.agents:
            by_subset[ip.agents - {b}].append(ip)
    seeds: dict[tuple, set[bytes]] = defaultdict(set)
    seed_events: dict[tuple, tuple[EventInstance, ...]] = {}
    for ip_i in frequent:
        for b in sorted(ip_i.agents):
            for ip_j in by_subset[ip_i.agents - {b}]:
                if ip_j.agents == ip_i.agents:
                    continue
                joint = (max(ip_i.lo, ip_j.lo), min(ip_i.hi, ip_j.hi))
                if interval_length(*joint) < t_min:
                    continue
                group = ip_i.agents | ip_j.agents
                merged = frozenset(ip_i.events) | frozenset(ip_j.events)
                ordered = tuple(sorted(merged, key=EventInstance.sort_key))
                key = (tuple(sorted(group)), joint, tuple(e.sort_key() for e in ordered))
                seed_events[key] = ordered
                seeds[key].update(pattern_of[ip] for ip in (ip_i, ip_j) if ip in pattern_of)
    pools: dict[tuple[int, ...], list[EventInstance]] = {}
    out: dict[StaticPatternInstance, Candidate] = {}
    for key in sorted(seeds):
        group, joint, _ = key
        merged = seed_events[key]
        if group not in pools:
            pools[group] = index.over(group)
        for members in maximal_event_sets(pools[group], t_min, joint, frozenset(merged)):
            inst = StaticPatternInstance.of(members)
            cand = out.setdefault(inst, Candidate(inst))
            cand.generators |= seeds[key]
    return [out[k] for k in sorted(out, key=StaticPatternInstance.sort_key)]


@dataclass
class SipmResult:
    patterns: list[StaticPattern]
    scope_length: int
    thresholds: MiningThresholds
    generators: dict[bytes, set[bytes]] = field(default_factory=dict)
    level_stats: list[dict] = field(default_factory=list)
    truncated: bool = False

    @property
    def instances(self) -> list[StaticPatternInstance]:
        return [ip for p in self.patterns for ip in p.instances]

    def pattern(self, key: bytes) -> StaticPattern:
        for p in self.patterns:
            if p.key == key:
                return p
        raise KeyError(key)


def group_by_pattern(instances: Iterable[StaticPatternInstance],
                     max_nodes: int = DEFAULT_MAX_NODES) -> dict[bytes, tuple[PatternMultigraph, list]]:
    groups: dict[bytes, tuple[PatternMultigraph, list]] = {}
    for ip in instances:
        g, _ = ip.multigraph()
        serial, _ = canonical_form(g, max_nodes)
        key = serial.encode()
        if key not in groups:
            shape, _ = PatternMultigraph.from_labelled_edges(
                (int(s), int(d), lab) for s, d, lab in _parse(serial))
            groups[key] = (shape, [])
        groups[key][1].append(ip)
    return groups


def _parse(serial: str):
    for triple in serial.split(";"):
        nodes, lab = triple.split(":", 1)
        s, d = nodes.split(">")
        yield int(s), int(d), lab


def sipm(events: Iterable[EventInstance], thresholds: MiningThresholds, scope_length: int,
         max_agents: int | None = None, max_nodes: int = DEFAULT_MAX_NODES) -> SipmResult:
    """Level-wise mining of frequent static patterns (two agents and up)."""
    index = EventIndex(events)
    t_min, t_supp = thresholds.t_min, thresholds.t_supp
    candidates = [Candidate(ip) for ip in extract_2_ip(index, t_min)]
    result = SipmResult([], scope_length, thresholds)
    k = 2
    while candidates:
        groups = group_by_pattern((c.instance for c in candidates), max_nodes)
        gen_of = {c.instance: c.generators for c in candidates}
        level_frequent: list[StaticPatternInstance] = []
        pattern_of: dict[StaticPatternInstance, bytes] = {}
        n_frequent = 0
        for key in sorted(groups):
            shape, members = groups[key]
            support = temporal_support((ip.interval for ip in members), scope_length)
            if support < t_supp:
                continue
            members.sort(key=StaticPatternInstance.sort_key)
            result.patterns.append(StaticPattern(key, shape, members, support))
            links: set[bytes] = set()
            for ip in members:
                links |= gen_of.get(ip, set())
                pattern_of[ip] = key
            result.generators[key] = links
            level_frequent.extend(members)
            n_frequent += 1
        result.level_stats.append({"agents": k, "candidates": len(candidates),
                                   "patterns": len(groups), "frequent": n_frequent})
        logger.info("level %d: %d candidates, %d patterns, %d frequent",
                    k, len(candidates), len(groups), n_frequent)
        if max_agents is not None and k >= max_agents:
            break
        if k >= max_nodes:
            logger.warning("stopping at %d agents: larger patterns exceed the isomorphism node bound", k)
            result.truncated = True
            break
        level_frequent.sort(key=StaticPatternInstance.sort_key)
        candidates = candidate_generation(level_frequent, t_min, index, pattern_of)
        k += 1
    result.patterns.sort(key=lambda p: (p.size, p.key))
    return result


# -- direct re-checks of the instance definition ---------------------------

def is_persistent(ip: StaticPatternInstance, t_min: int) -> bool:
    lo = max(e.start for e in ip.events)
    hi = min(e.end for e in ip.events)
    return (lo, hi) == ip.interval and interval_length(lo, hi) >= t_min


def is_connected(ip: StaticPatternInstance) -> bool:
    parent = {a: a for a in ip.agents}

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for e in ip.events:
        parent[find(e.subject)] = find(e.object)
    return len({find(a) for a in ip.agents}) == 1


def is_maximal(ip: StaticPatternInstance, index: EventIndex, t_min: int) -> bool:
    """No event over the instance's agents is missing while overlapping its interval enough."""
    members = set(ip.events)
    for e in index.over(ip.agents):
        if e not in members and overlap(ip.interval, e.interval) >= t_min:
            return False
    return True
