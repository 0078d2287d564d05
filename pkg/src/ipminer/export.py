"""Artifact writers: pattern catalogs, graph descriptions and density grids."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .evipm import EvipmResult, SequenceInstance
from .isomorphism import lettered, to_dot
from .sipm import SipmResult, StaticPatternInstance
from .trajectory import TrajectoryDataset


def _dump_json(obj, dest: Path) -> None:
    dest.write_text(json.dumps(obj, indent=2, sort_keys=False) + "\n")


def static_catalog(result: SipmResult) -> dict:
    patterns = []
    for pid, p in enumerate(result.patterns):
        patterns.append({
            "id": pid,
            "serialization": p.serialization,
            "letters": lettered(p.serialization),
            "size": p.size,
            "support": p.support,
            "instance_count": len(p.instances),
            "instances": [
                {"agents": sorted(ip.agents), "interval": [ip.lo, ip.hi],
                 "events": [[e.template.value, e.subject, e.object, e.start, e.end]
                            for e in ip.events]}
                for ip in p.instances
            ],
        })
    return {
        "scope_length": result.scope_length,
        "t_min": result.thresholds.t_min,
        "t_supp": result.thresholds.t_supp,
        "pattern_count": len(patterns),
        "patterns": patterns,
    }


def evolving_catalog(result: EvipmResult, static: SipmResult) -> dict:
    pattern_id = {}
    for pid, p in enumerate(static.patterns):
        for ip in p.instances:
            pattern_id[ip] = pid
    patterns = []
    for eid, ep in enumerate(result.patterns):
        patterns.append({
            "id": eid,
            "elements": ep.elements,
            "serialization": ep.serialization,
            "length": ep.length,
            "support": ep.support,
            "instance_count": len(ep.instances),
            "instances": [
                {"starts": list(seq.starts),
                 "elements": [{"static_pattern": pattern_id.get(el), "agents": sorted(el.agents),
                               "interval": [el.lo, el.hi]} for el in seq.elements]}
                for seq in ep.instances
            ],
        })
    cfg = result.config
    return {
        "scope_length": result.scope_length,
        "t_win": cfg.t_win, "min_jc": cfg.min_jc, "t_e_supp": cfg.t_e_supp, "max_len": cfg.max_len,
        "pattern_count": len(patterns),
        "patterns": patterns,
    }


def write_static_catalog(result: SipmResult, dest: Path) -> int:
    cat = static_catalog(result)
    _dump_json(cat, Path(dest))
    return cat["pattern_count"]


def write_evolving_catalog(result: EvipmResult, static: SipmResult, dest: Path) -> int:
    cat = evolving_catalog(result, static)
    _dump_json(cat, Path(dest))
    return cat["pattern_count"]


def write_pattern_graphs(result: SipmResult, directory: Path) -> list[Path]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    out = []
    for pid, p in enumerate(result.patterns):
        path = directory / f"static_{pid:04d}.dot"
        path.write_text(to_dot(p.serialization, f"static_{pid:04d}"))
        out.append(path)
    return out


# -- density grids ----------------------------------------------------------

@dataclass(frozen=True)
class GridSpec:
    cell: float = 5.0
    origin: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        if not self.cell > 0:
            raise ValueError("grid cell size must be positive")

    def index(self, x: float, y: float) -> tuple[int, int]:
        return (math.floor((x - self.origin[0]) / self.cell),
                math.floor((y - self.origin[1]) / self.cell))

    def center(self, ix: int, iy: int) -> tuple[float, float]:
        return (self.origin[0] + (ix + 0.5) * self.cell, self.origin[1] + (iy + 0.5) * self.cell)


def instance_bbox_center(ip: StaticPatternInstance, dataset: TrajectoryDataset) -> tuple[float, float]:
    """Center of the box around every position of the instance's agents over its interval."""
    xs, ys = [], []
    for aid in sorted(ip.agents):
        s = dataset.agents[aid]
        lo, hi = max(ip.lo, s.start) - s.start, min(ip.hi, s.end) - s.start
        if hi < lo:
            continue
        xs.append(s.x[lo:hi + 1])
        ys.append(s.y[lo:hi + 1])
    x = np.concatenate(xs)
    y = np.concatenate(ys)
    return ((float(x.min()) + float(x.max())) / 2, (float(y.min()) + float(y.max())) / 2)


def sequence_point(seq: SequenceInstance, dataset: TrajectoryDataset) -> tuple[float, float]:
    return average_point([instance_bbox_center(el, dataset) for el in seq.elements])


def average_point(centers: Sequence[tuple[float, float]]) -> tuple[float, float]:
    return (sum(c[0] for c in centers) / len(centers), sum(c[1] for c in centers) / len(centers))


DENSITY_HEADER = ("ix", "iy", "x", "y", "count")


def density_grid(points: Iterable[tuple[float, float]], grid: GridSpec) -> list[tuple[int, int, float, float, int]]:
    counts: dict[tuple[int, int], int] = {}
    for x, y in points:
        key = grid.index(x, y)
        counts[key] = counts.get(key, 0) + 1
    rows = []
    for ix, iy in sorted(counts):
        cx, cy = grid.center(ix, iy)
        rows.append((ix, iy, cx, cy, counts[(ix, iy)]))
    return rows


def export_density_grid(element_centers: Iterable[Sequence[tuple[float, float]]], grid: GridSpec,
                        dest) -> int:
    """Write the occupied cells of a pattern's density grid as CSV.

    Each item of ``element_centers`` holds the bounding-box centers of one
    sequence instance's elements and contributes the average of them.
    """
    rows = density_grid((average_point(c) for c in element_centers), grid)
    if isinstance(dest, (str, Path)):
        with open(dest, "w", newline="") as fh:
            return _write_rows(rows, fh)
    return _write_rows(rows, dest)


def _write_rows(rows, fh) -> int:
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(DENSITY_HEADER)
    for ix, iy, x, y, count in rows:
        writer.writerow([ix, iy, repr(x), repr(y), count])
    return len(rows)


def write_density_grids(result: EvipmResult, dataset: TrajectoryDataset, grid: GridSpec,
                        directory: Path) -> list[Path]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    out = []
    for eid, ep in enumerate(result.patterns):
        path = directory / f"evolving_{eid:04d}.csv"
        export_density_grid(
            ([instance_bbox_center(el, dataset) for el in seq.elements] for seq in ep.instances),
            grid, path)
        out.append(path)
    return out
