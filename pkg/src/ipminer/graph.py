"""Labelled neighbor graph: per-instant visibility edges with interaction labels."""

from __future__ import annotations

import csv
from collections import defaultdict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, NamedTuple

import numpy as np

from . import geometry as geo
from .geometry import InteractionLabel, InteractionParams, PositionCode
from .trajectory import TrajectoryDataset

# below this many candidate agents an all-pairs distance check beats the grid
_GRID_MIN_AGENTS = 48


class NodeRef(NamedTuple):
    agent_id: int
    t: int


@dataclass(eq=False)
class PairSeries:
    """Label time series of one unordered agent pair ``i < j``.

    ``velocity_delta`` is stored as ``v_i - v_j``; position codes and
    alignment flags are kept for both orientations.
    """

    i: int
    j: int
    t: np.ndarray
    distance_delta: np.ndarray
    velocity_delta: np.ndarray
    direction_diff: np.ndarray
    position_ij: np.ndarray
    position_ji: np.ndarray
    aligned_ij: np.ndarray
    aligned_ji: np.ndarray

    def __len__(self) -> int:
        return len(self.t)

    def index(self, t: int) -> int:
        k = int(np.searchsorted(self.t, t))
        if k == len(self.t) or self.t[k] != t:
            raise KeyError(f"no interaction edge ({self.i}, {self.j}) at t={t}")
        return k

    def label(self, t: int, first: int | None = None) -> InteractionLabel:
        """Label at ``t`` seen from agent ``first`` (defaults to ``i``)."""
        k = self.index(t)
        if first is None or first == self.i:
            return InteractionLabel(
                float(self.distance_delta[k]), float(self.velocity_delta[k]),
                float(self.direction_diff[k]), PositionCode(int(self.position_ij[k])),
                bool(self.aligned_ij[k]))
        if first != self.j:
            raise KeyError(f"agent {first} is not part of pair ({self.i}, {self.j})")
        return InteractionLabel(
            float(self.distance_delta[k]), float(-self.velocity_delta[k]),
            float(self.direction_diff[k]), PositionCode(int(self.position_ji[k])),
            bool(self.aligned_ji[k]))


@dataclass(eq=False)
class LabelledNeighborGraph:
    dataset: TrajectoryDataset
    params: InteractionParams
    pairs: dict[tuple[int, int], PairSeries] = field(default_factory=dict)
    # per-node ego labels; no ego function is defined, so this stays empty
    ego_labels: dict[NodeRef, tuple[float, ...]] = field(default_factory=dict)

    def __post_init__(self):
        self._by_t: dict[int, list[tuple[int, int]]] | None = None

    def nodes(self) -> Iterator[NodeRef]:
        for agent in self.dataset:
            for t in range(agent.start, agent.end + 1):
                yield NodeRef(agent.agent_id, t)

    def ego_edges(self) -> Iterator[tuple[NodeRef, NodeRef]]:
        for agent in self.dataset:
            for t in range(agent.start, agent.end):
                yield NodeRef(agent.agent_id, t), NodeRef(agent.agent_id, t + 1)

    @property
    def ego_edge_count(self) -> int:
        return sum(len(a) - 1 for a in self.dataset)

    @property
    def int_edge_count(self) -> int:
        return sum(len(p) for p in self.pairs.values())

    def int_edges(self) -> Iterator[tuple[int, int, int]]:
        """All interaction edges as ``(t, i, j)`` sorted by instant then pair."""
        by_t = self.edges_by_instant()
        for t in sorted(by_t):
            for i, j in by_t[t]:
                yield t, i, j

    def edges_by_instant(self) -> dict[int, list[tuple[int, int]]]:
        if self._by_t is None:
            by_t: dict[int, list[tuple[int, int]]] = defaultdict(list)
            for key in sorted(self.pairs):
                for t in self.pairs[key].t.tolist():
                    by_t[t].append(key)
            self._by_t = dict(by_t)
        return self._by_t

    def edges_at(self, t: int) -> list[tuple[int, int]]:
        return self.edges_by_instant().get(t, [])

    def pair(self, a: int, b: int) -> PairSeries:
        return self.pairs[(min(a, b), max(a, b))]

    def has_edge(self, a: int, b: int, t: int) -> bool:
        key = (min(a, b), max(a, b))
        if key not in self.pairs:
            return False
        try:
            self.pairs[key].index(t)
        except KeyError:
            return False
        return True

    def label(self, a: int, b: int, t: int) -> InteractionLabel:
        """Interaction label of the ordered pair ``(a, b)`` at ``t``."""
        return self.pair(a, b).label(t, first=a)


class _Packed(NamedTuple):
    ids: np.ndarray
    starts: np.ndarray
    ends: np.ndarray
    offsets: np.ndarray
    xy: np.ndarray
    direction: np.ndarray
    velocity: np.ndarray


def _pack(dataset: TrajectoryDataset) -> _Packed:
    agents = list(dataset)
    lengths = np.array([len(a) for a in agents], dtype=np.int64)
    offsets = np.zeros(len(agents), dtype=np.int64)
    if len(agents):
        offsets[1:] = np.cumsum(lengths)[:-1]
        xy = np.column_stack([np.concatenate([a.x for a in agents]),
                              np.concatenate([a.y for a in agents])])
        direction = np.concatenate([a.direction for a in agents])
        velocity = np.concatenate([a.velocity for a in agents])
    else:
        xy = np.zeros((0, 2))
        direction = velocity = np.zeros(0)
    return _Packed(
        np.array([a.agent_id for a in agents], dtype=np.int64),
        np.array([a.start for a in agents], dtype=np.int64),
        np.array([a.end for a in agents], dtype=np.int64),
        offsets, xy, direction, velocity,
    )


def _candidate_pairs(pos: np.ndarray, d_search: float) -> tuple[np.ndarray, np.ndarray]:
    """Index pairs ``(p, q)``, p < q, whose centers are within ``d_search``."""
    n = len(pos)
    if n < 2:
        empty = np.zeros(0, dtype=np.int64)
        return empty, empty
    if n < _GRID_MIN_AGENTS:
        p, q = np.triu_indices(n, k=1)
    else:
        cells: dict[tuple[int, int], list[int]] = defaultdict(list)
        keys = np.floor(pos / d_search).astype(np.int64)
        for idx, (cx, cy) in enumerate(keys.tolist()):
            cells[(cx, cy)].append(idx)
        ps, qs = [], []
        for (cx, cy), members in cells.items():
            for dx, dy in ((0, 0), (1, -1), (1, 0), (1, 1), (0, 1)):
                other = members if (dx, dy) == (0, 0) else cells.get((cx + dx, cy + dy))
                if not other:
                    continue
                for a_pos, a in enumerate(members):
                    for b in (members[a_pos + 1:] if other is members else other):
                        ps.append(min(a, b))
                        qs.append(max(a, b))
        p = np.array(ps, dtype=np.int64)
        q = np.array(qs, dtype=np.int64)
        order = np.lexsort((q, p))
        p, q = p[order], q[order]
    diff = pos[q] - pos[p]
    close = geo._norm(diff) <= d_search
    return p[close], q[close]


def _visible_edges(packed: _Packed, ts: range, d_search: float, r_agent: float) -> np.ndarray:
    """Rows ``(t, i, j)`` of visible pairs eligible for an interaction edge."""
    rows = []
    for t in ts:
        present = np.nonzero((packed.starts <= t) & (packed.ends >= t))[0]
        if len(present) < 2:
            continue
        pos = packed.xy[packed.offsets[present] + (t - packed.starts[present])]
        eligible = np.nonzero(packed.starts[present] < t)[0]
        if len(eligible) < 2:
            continue
        p, q = _candidate_pairs(pos[eligible], d_search)
        if len(p) == 0:
            continue
        p, q = eligible[p], eligible[q]
        n = len(present)
        exclude = np.zeros((len(p), n), dtype=bool)
        exclude[np.arange(len(p)), p] = True
        exclude[np.arange(len(p)), q] = True
        ids = packed.ids[present]
        a_first = ids[p] < ids[q]
        lo = np.where(a_first, p, q)
        hi = np.where(a_first, q, p)
        blocked = geo.occluded(pos[lo], pos[hi], pos, r_agent, exclude)
        keep = ~blocked
        if keep.any():
            block = np.column_stack([
                np.full(int(keep.sum()), t, dtype=np.int64), ids[lo][keep], ids[hi][keep]])
            rows.append(block)
    if not rows:
        return np.zeros((0, 3), dtype=np.int64)
    return np.concatenate(rows)


def _chunks(t_max: int, workers: int) -> list[range]:
    n = max(1, min(workers * 4, t_max))
    bounds = np.linspace(1, t_max + 1, n + 1).astype(int)
    return [range(a, b) for a, b in zip(bounds[:-1], bounds[1:]) if b > a]


def build_neighbor_graph(dataset: TrajectoryDataset, params: InteractionParams,
                         workers: int = 1) -> LabelledNeighborGraph:
    """Build the labelled neighbor graph of a dataset with derived kinematics.

    An interaction edge exists at ``t`` between two agents present at both
    ``t-1`` and ``t`` that see each other at ``t``; occluders are all agents
    present at ``t``.
    """
    packed = _pack(dataset)
    t_max = dataset.scope.t_max
    if t_max < 1 or len(packed.ids) < 2:
        return LabelledNeighborGraph(dataset, params)
    if workers > 1:
        chunks = _chunks(t_max, workers)
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_visible_edges, [packed] * len(chunks), chunks,
                                  [params.d_search] * len(chunks),
                                  [params.r_agent] * len(chunks)))
        edges = np.concatenate(parts) if parts else np.zeros((0, 3), dtype=np.int64)
    else:
        edges = _visible_edges(packed, range(1, t_max + 1), params.d_search, params.r_agent)
    return LabelledNeighborGraph(dataset, params, label_edges(packed, edges, params))


def label_edges(packed: _Packed, edges: np.ndarray,
                params: InteractionParams) -> dict[tuple[int, int], PairSeries]:
    if len(edges) == 0:
        return {}
    order = np.lexsort((edges[:, 0], edges[:, 2], edges[:, 1]))
    edges = edges[order]
    t, a, b = edges[:, 0], edges[:, 1], edges[:, 2]
    row_of = {int(aid): k for k, aid in enumerate(packed.ids.tolist())}
    ra = np.array([row_of[x] for x in a.tolist()], dtype=np.int64)
    rb = np.array([row_of[x] for x in b.tolist()], dtype=np.int64)
    ga = packed.offsets[ra] + (t - packed.starts[ra])
    gb = packed.offsets[rb] + (t - packed.starts[rb])
    ai0, ai1, bj0, bj1 = packed.xy[ga - 1], packed.xy[ga], packed.xy[gb - 1], packed.xy[gb]
    da, db = packed.direction[ga], packed.direction[gb]
    dist = geo.distance_delta(ai0, ai1, bj0, bj1)
    vel = packed.velocity[ga] - packed.velocity[gb]
    ddir = geo.direction_diff(da, db)
    pos_ab = geo.position_code(ai0, ai1, bj0, bj1, da, db,
                               params.eps_move, params.eps_parallel, params.eps_lat)
    pos_ba = geo.position_code(bj0, bj1, ai0, ai1, db, da,
                               params.eps_move, params.eps_parallel, params.eps_lat)
    al_ab = geo.aligned(ai0, ai1, bj0, bj1, da, params.eps_align)
    al_ba = geo.aligned(bj0, bj1, ai0, ai1, db, params.eps_align)

    pairs: dict[tuple[int, int], PairSeries] = {}
    change = np.nonzero((np.diff(a) != 0) | (np.diff(b) != 0))[0] + 1
    bounds = np.concatenate([[0], change, [len(edges)]])
    for lo, hi in zip(bounds[:-1], bounds[1:]):
        key = (int(a[lo]), int(b[lo]))
        sl = slice(lo, hi)
        pairs[key] = PairSeries(
            key[0], key[1], t[sl].copy(), dist[sl], vel[sl], ddir[sl],
            pos_ab[sl].astype(np.int8), pos_ba[sl].astype(np.int8), al_ab[sl], al_ba[sl])
    return pairs


EDGE_DUMP_HEADER = ("t", "agent_i", "agent_j", "distance_delta", "velocity_delta",
                    "direction_diff", "position_code", "aligned")


def write_edge_dump(graph: LabelledNeighborGraph, dest) -> int:
    """Debug dump of every interaction edge, labelled from the lower id's side."""
    if isinstance(dest, (str, Path)):
        with open(dest, "w", newline="") as fh:
            return write_edge_dump(graph, fh)
    writer = csv.writer(dest, lineterminator="\n")
    writer.writerow(EDGE_DUMP_HEADER)
    count = 0
    for t, i, j in graph.int_edges():
        lab = graph.label(i, j, t)
        writer.writerow([t, i, j, repr(lab.distance_delta), repr(lab.velocity_delta),
                         repr(lab.direction_diff), lab.position.name, int(lab.aligned)])
        count += 1
    return count
