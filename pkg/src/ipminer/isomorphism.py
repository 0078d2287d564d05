"""Isomorphism of edge-labelled directed multigraphs with anonymous nodes.

Candidate node mappings are restricted to nodes with equal signatures:
the multiset of outgoing edge labels, the in/out degrees and the multiset
of incoming labels, refined once with the signatures of the neighbors.
"""

from __future__ import annotations

import string
from collections import Counter
from dataclasses import dataclass
from functools import lru_cache
from typing import Hashable, Iterable

DEFAULT_MAX_NODES = 12


class PatternTooLarge(ValueError):
    pass


@dataclass(frozen=True)
class PatternMultigraph:
    k: int
    edges: tuple[tuple[int, int, str], ...]

    def __post_init__(self):
        object.__setattr__(self, "edges", tuple(sorted(self.edges)))
        nodes = set()
        for src, dst, _ in self.edges:
            if src == dst:
                raise ValueError("self-loops are not allowed")
            nodes.update((src, dst))
        if self.edges and nodes != set(range(self.k)):
            raise ValueError("nodes must be exactly 0..k-1 and all used by edges")
        if not self.edges and self.k > 1:
            raise ValueError("a graph without edges has at most one node")
        if not _connected(self.k, self.edges):
            raise ValueError("pattern multigraph must be connected")

    @classmethod
    def from_labelled_edges(cls, edges: Iterable[tuple[Hashable, Hashable, str]]):
        """Build from edges over arbitrary node ids; returns (graph, node order).

        Nodes are numbered in sorted id order, so ``order[n]`` is the
        original id of node ``n``.
        """
        edges = list(edges)
        order = sorted({n for e in edges for n in e[:2]})
        index = {n: k for k, n in enumerate(order)}
        return cls(len(order), tuple((index[s], index[d], lab) for s, d, lab in edges)), order

    def relabel(self, perm: dict[int, int]) -> "PatternMultigraph":
        return PatternMultigraph(self.k, tuple((perm[s], perm[d], lab) for s, d, lab in self.edges))


def _connected(k: int, edges) -> bool:
    if k <= 1:
        return True
    parent = list(range(k))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for s, d, _ in edges:
        parent[find(s)] = find(d)
    return len({find(n) for n in range(k)}) == 1


@dataclass(frozen=True, order=True)
class VertexSignature:
    out_labels: tuple[tuple[str, int], ...]
    in_degree: int
    out_degree: int
    in_labels: tuple[tuple[str, int], ...]


def vertex_signatures(g: PatternMultigraph) -> list[VertexSignature]:
    out_l = [Counter() for _ in range(g.k)]
    in_l = [Counter() for _ in range(g.k)]
    for s, d, lab in g.edges:
        out_l[s][lab] += 1
        in_l[d][lab] += 1
    return [
        VertexSignature(tuple(sorted(out_l[n].items())), sum(in_l[n].values()),
                        sum(out_l[n].values()), tuple(sorted(in_l[n].items())))
        for n in range(g.k)
    ]


def refined_colors(g: PatternMultigraph) -> list[tuple]:
    """Vertex signatures refined by one round over neighbor signatures."""
    sig = vertex_signatures(g)
    around = [[] for _ in range(g.k)]
    for s, d, lab in g.edges:
        around[s].append((0, lab, sig[d]))
        around[d].append((1, lab, sig[s]))
    return [(sig[n], tuple(sorted(around[n]))) for n in range(g.k)]


def _adjacency(g: PatternMultigraph) -> dict[tuple[int, int], tuple[str, ...]]:
    adj: dict[tuple[int, int], list[str]] = {}
    for s, d, lab in g.edges:
        adj.setdefault((s, d), []).append(lab)
    return {key: tuple(sorted(v)) for key, v in adj.items()}


def is_isomorphic(g1: PatternMultigraph, g2: PatternMultigraph) -> dict[int, int] | None:
    """A node bijection mapping ``g1``'s edge multiset onto ``g2``'s, or None."""
    if g1.k != g2.k or len(g1.edges) != len(g2.edges):
        return None
    c1, c2 = refined_colors(g1), refined_colors(g2)
    if sorted(c1) != sorted(c2):
        return None
    a1, a2 = _adjacency(g1), _adjacency(g2)
    by_color: dict[tuple, list[int]] = {}
    for n, c in enumerate(c2):
        by_color.setdefault(c, []).append(n)
    class_size = Counter(c1)
    order = sorted(range(g1.k), key=lambda n: (class_size[c1[n]], n))
    phi: dict[int, int] = {}
    used: set[int] = set()

    def extend(pos: int) -> bool:
        if pos == len(order):
            return True
        u = order[pos]
        for v in by_color[c1[u]]:
            if v in used:
                continue
            ok = True
            for w, x in phi.items():
                if a1.get((u, w), ()) != a2.get((v, x), ()) or a1.get((w, u), ()) != a2.get((x, v), ()):
                    ok = False
                    break
            if not ok:
                continue
            phi[u] = v
            used.add(v)
            if extend(pos + 1):
                return True
            del phi[u]
            used.discard(v)
        return False

    return dict(phi) if extend(0) else None


def _twins(k: int, classes, adj) -> set[tuple[int, int]]:
    """Pairs of nodes whose exchange is an automorphism.

    Swapping such a pair leaves the search subtree unchanged, so only one
    of them needs exploring at each position.
    """
    out = set()
    for members in classes:
        for x, u in enumerate(members):
            for v in members[x + 1:]:
                if adj.get((u, v), ()) != adj.get((v, u), ()):
                    continue
                if all(adj.get((u, w), ()) == adj.get((v, w), ()) and
                       adj.get((w, u), ()) == adj.get((w, v), ())
                       for w in range(k) if w != u and w != v):
                    out.add((u, v))
                    out.add((v, u))
    return out


@lru_cache(maxsize=65536)
def _canonical(k: int, edges: tuple, max_nodes: int) -> tuple[str, tuple[int, ...]]:
    g = PatternMultigraph(k, edges)
    if k > max_nodes:
        raise PatternTooLarge(f"pattern with {k} nodes exceeds the bound of {max_nodes}")
    colors = refined_colors(g)
    # sources first, so a single edge reads A>B
    distinct = sorted(set(colors), key=lambda c: (-c[0].out_degree, c))
    classes = [[n for n in range(k) if colors[n] == c] for c in distinct]
    slot_class = [ci for ci, members in enumerate(classes) for _ in members]
    adj = _adjacency(g)
    twins = _twins(k, classes, adj)
    best: list = [None, None]
    perm: list[int] = []
    used = [False] * k

    # Encoding grows by the adjacency entries between the new position and all
    # earlier ones, so a prefix that already compares greater can be pruned.
    def search(enc: tuple):
        pos = len(perm)
        if pos == k:
            if best[0] is None or enc < best[0]:
                best[0], best[1] = enc, tuple(perm)
            return
        tried: list[int] = []
        for node in classes[slot_class[pos]]:
            if used[node] or any((t, node) in twins for t in tried):
                continue
            tried.append(node)
            step = []
            for q in range(pos):
                step.append(adj.get((node, perm[q]), ()))
                step.append(adj.get((perm[q], node), ()))
            new = enc + tuple(step)
            if best[0] is not None and new > best[0][:len(new)]:
                continue
            used[node] = True
            perm.append(node)
            search(new)
            perm.pop()
            used[node] = False

    search(())
    order = best[1]
    inverse = {node: p for p, node in enumerate(order)}
    triples = sorted((inverse[s], inverse[d], lab) for s, d, lab in edges)
    return ";".join(f"{s}>{d}:{lab}" for s, d, lab in triples), order


def canonical_form(g: PatternMultigraph, max_nodes: int = DEFAULT_MAX_NODES):
    """Canonical serialization and node order of ``g``.

    ``order[p]`` is the node of ``g`` placed at canonical position ``p``.
    """
    return _canonical(g.k, g.edges, max_nodes)


def canonical_key(g: PatternMultigraph, max_nodes: int = DEFAULT_MAX_NODES) -> bytes:
    return canonical_form(g, max_nodes)[0].encode()


def node_letter(n: int) -> str:
    letters = string.ascii_uppercase
    name = ""
    n += 1
    while n:
        n, rem = divmod(n - 1, 26)
        name = letters[rem] + name
    return name


def lettered(serialization: str) -> str:
    """Rewrite ``0>1:LABEL`` triples with variable letters (``A>B:LABEL``)."""
    if not serialization:
        return serialization
    parts = []
    for triple in serialization.split(";"):
        nodes, lab = triple.split(":", 1)
        s, d = nodes.split(">")
        parts.append(f"{node_letter(int(s))}>{node_letter(int(d))}:{lab}")
    return ";".join(parts)


def to_dot(serialization: str, name: str = "pattern") -> str:
    """Graphviz description of a canonical pattern with lettered nodes."""
    lines = [f"digraph {name} {{"]
    if serialization:
        nodes = set()
        edges = []
        for triple in serialization.split(";"):
            pair, lab = triple.split(":", 1)
            s, d = (node_letter(int(x)) for x in pair.split(">"))
            nodes.update((s, d))
            edges.append(f'  {s} -> {d} [label="{lab.lower()}"];')
        for n in sorted(nodes, key=lambda x: (len(x), x)):
            lines.append(f"  {n};")
        lines.extend(edges)
    lines.append("}")
    return "\n".join(lines) + "\n"
