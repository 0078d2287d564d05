"""Frequent evolving interaction pattern mining.

Sequences chain static pattern instances whose starts strictly increase
within a window after the first element, that keep the agents shared by
the first two elements (the kernel) and whose consecutive agent sets
overlap by a Jaccard coefficient of at least ``min_jc``. Sequences are
grouped by a single agent renaming that maps every element at once.
"""

from __future__ import annotations

import bisect
import logging
from collections import defaultdict
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

from .isomorphism import PatternMultigraph, canonical_form, is_isomorphic, node_letter
from .sipm import SipmResult, StaticPatternInstance, temporal_support

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class EvipmConfig:
    t_win: int = 150
    min_jc: float = 0.6
    t_e_supp: float = 0.9
    max_len: int = 4
    max_nodes: int = 16

    def __post_init__(self):
        if self.t_win < 0:
            raise ValueError("t_win must be non-negative")
        if not 0.0 <= self.min_jc <= 1.0:
            raise ValueError("min_jc must lie in [0, 1]")
        if not 0.0 <= self.t_e_supp <= 1.0:
            raise ValueError("t_e_supp must lie in [0, 1]")
        if self.max_len < 1:
            raise ValueError("max_len must be a positive integer")


def jaccard(a: frozenset, b: frozenset) -> float:
    union = a | b
    return len(a & b) / len(union) if union else 0.0


@dataclass(frozen=True)
class SequenceInstance:
    elements: tuple[StaticPatternInstance, ...]

    @property
    def kernel(self) -> frozenset[int]:
        if len(self.elements) < 2:
            return self.elements[0].agents
        return self.elements[0].agents & self.elements[1].agents

    @property
    def starts(self) -> tuple[int, ...]:
        return tuple(e.lo for e in self.elements)

    @property
    def intervals(self) -> list[tuple[int, int]]:
        return [e.interval for e in self.elements]

    @property
    def agents(self) -> frozenset[int]:
        return frozenset().union(*(e.agents for e in self.elements))

    def __len__(self) -> int:
        return len(self.elements)

    def tagged_edges(self) -> list[tuple[int, int, str]]:
        return [(e.subject, e.object, f"{pos}:{e.template.name}")
                for pos, el in enumerate(self.elements) for e in el.events]

    def multigraph(self) -> tuple[PatternMultigraph, list[int]]:
        """All elements over the shared agent universe, labels tagged by position."""
        return PatternMultigraph.from_labelled_edges(self.tagged_edges())

    @cached_property
    def _sort_key(self):
        return tuple(e.sort_key() for e in self.elements)

    def sort_key(self):
        return self._sort_key


def check_sequence(seq: SequenceInstance, config: EvipmConfig) -> list[str]:
    """Names of the sequence-instance clauses that ``seq`` violates."""
    els = seq.elements
    bad = []
    if len(els) < 2:
        return ["length"]
    a1, a2 = els[0].agents, els[1].agents
    if not (a1 <= a2 or a2 <= a1 or jaccard(a1, a2) >= config.min_jc):
        bad.append("first-pair")
    for i in range(1, len(els) - 1):
        if jaccard(els[i].agents, els[i + 1].agents) < config.min_jc:
            bad.append("jaccard")
            break
    if any(els[i].lo >= els[i + 1].lo for i in range(len(els) - 1)):
        bad.append("order")
    if els[-1].lo - els[0].lo > config.t_win:
        bad.append("window")
    kernel = seq.kernel
    if not kernel or any(not kernel <= e.agents for e in els):
        bad.append("kernel")
    return bad


def sequence_isomorphic(s1: SequenceInstance, s2: SequenceInstance) -> bool:
    if len(s1) != len(s2):
        return False
    g1, _ = s1.multigraph()
    g2, _ = s2.multigraph()
    return is_isomorphic(g1, g2) is not None


@dataclass
class EvolvingPattern:
    key: bytes
    elements: list[str]
    instances: list[SequenceInstance]
    support: float

    @property
    def length(self) -> int:
        return len(self.elements)

    @property
    def serialization(self) -> str:
        return " | ".join(self.elements)


def sequence_key(seq: SequenceInstance, max_nodes: int = 16) -> tuple[bytes, list[str]]:
    """Canonical key of a sequence and its elements written with shared letters."""
    g, _ = seq.multigraph()
    serial, _ = canonical_form(g, max_nodes)
    per_element: list[list[str]] = [[] for _ in seq.elements]
    for triple in serial.split(";"):
        nodes, label = triple.split(":", 1)
        pos, template = label.split(":", 1)
        s, d = nodes.split(">")
        per_element[int(pos)].append(f"{node_letter(int(s))}>{node_letter(int(d))}:{template}")
    return serial.encode(), [";".join(parts) for parts in per_element]


class _InstanceIndex:
    """Instances per agent, sorted by start."""

    def __init__(self, instances: Iterable[StaticPatternInstance]):
        by_agent: dict[int, list[StaticPatternInstance]] = defaultdict(list)
        for ip in instances:
            for a in ip.agents:
                by_agent[a].append(ip)
        self.by_agent = {a: sorted(v, key=lambda ip: (ip.lo, ip.sort_key())) for a, v in by_agent.items()}
        self.starts = {a: [ip.lo for ip in v] for a, v in self.by_agent.items()}

    def starting_in(self, agent: int, lo: int, hi: int) -> list[StaticPatternInstance]:
        """Instances with ``agent`` whose start lies in the closed range [lo, hi]."""
        if agent not in self.by_agent:
            return []
        starts = self.starts[agent]
        return self.by_agent[agent][bisect.bisect_left(starts, lo):bisect.bisect_right(starts, hi)]


def initial_pairs(instances: Sequence[StaticPatternInstance], config: EvipmConfig,
                  index: _InstanceIndex | None = None) -> list[SequenceInstance]:
    index = index or _InstanceIndex(instances)
    out = []
    for p1 in instances:
        seen: set[StaticPatternInstance] = set()
        for a in sorted(p1.agents):
            for p2 in index.starting_in(a, p1.lo + 1, p1.lo + config.t_win):
                if p2 in seen:
                    continue
                seen.add(p2)
                x, y = p1.agents, p2.agents
                if not x & y:
                    continue
                if x <= y or y <= x or jaccard(x, y) >= config.min_jc:
                    out.append(SequenceInstance((p1, p2)))
    out.sort(key=SequenceInstance.sort_key)
    return out


def extend(sequences: Sequence[SequenceInstance], instances: Sequence[StaticPatternInstance],
           config: EvipmConfig, index: _InstanceIndex | None = None) -> list[SequenceInstance]:
    index = index or _InstanceIndex(instances)
    out = []
    for seq in sequences:
        kernel = seq.kernel
        last = seq.elements[-1]
        anchor = seq.elements[0].lo
        probe = min(kernel)
        for ip in index.starting_in(probe, last.lo + 1, anchor + config.t_win):
            if not kernel <= ip.agents:
                continue
            if jaccard(last.agents, ip.agents) < config.min_jc:
                continue
            out.append(SequenceInstance(seq.elements + (ip,)))
    out.sort(key=SequenceInstance.sort_key)
    return out


@dataclass
class EvipmResult:
    patterns: list[EvolvingPattern]
    scope_length: int
    config: EvipmConfig
    level_stats: list[dict] = field(default_factory=list)


def _frequent(sequences: Sequence[SequenceInstance], config: EvipmConfig,
              scope_length: int) -> tuple[list[EvolvingPattern], int]:
    groups: dict[bytes, tuple[list[str], list[SequenceInstance]]] = {}
    for seq in sequences:
        key, elements = sequence_key(seq, config.max_nodes)
        groups.setdefault(key, (elements, []))[1].append(seq)
    out = []
    for key in sorted(groups):
        elements, members = groups[key]
        support = temporal_support((iv for s in members for iv in s.intervals), scope_length)
        if support >= config.t_e_supp:
            out.append(EvolvingPattern(key, elements, members, support))
    return out, len(groups)


def evipm(static: SipmResult | Sequence[StaticPatternInstance], config: EvipmConfig,
          scope_length: int | None = None) -> EvipmResult:
    """Level-wise mining of frequent evolving patterns (length 2 to ``max_len``)."""
    if isinstance(static, SipmResult):
        instances = static.instances
        scope_length = scope_length or static.scope_length
    else:
        instances = list(static)
    if not scope_length:
        raise ValueError("scope length is required")
    instances = sorted(set(instances), key=lambda ip: (ip.lo, ip.sort_key()))
    index = _InstanceIndex(instances)
    result = EvipmResult([], scope_length, config)
    if config.max_len < 2:
        return result
    sequences = initial_pairs(instances, config, index)
    length = 2
    while sequences:
        frequent, n_groups = _frequent(sequences, config, scope_length)
        result.patterns.extend(frequent)
        result.level_stats.append({"length": length, "sequences": len(sequences),
                                   "patterns": n_groups, "frequent": len(frequent)})
        logger.info("length %d: %d sequences, %d patterns, %d frequent",
                    length, len(sequences), n_groups, len(frequent))
        if length >= config.max_len:
            break
        survivors = sorted((s for p in frequent for s in p.instances), key=SequenceInstance.sort_key)
        sequences = extend(survivors, instances, config, index)
        length += 1
    result.patterns.sort(key=lambda p: (p.length, p.key))
    return result
