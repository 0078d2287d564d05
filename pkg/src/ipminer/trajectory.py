"""Agent model over a discrete time scope, CSV ingestion and kinematics.

Positions are stored per agent as contiguous float64 arrays indexed by
``t - start``. Canonical units are meters, seconds and degrees.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO, Iterable, Iterator

import numpy as np

FEET_TO_METERS = 0.3048

CANONICAL_COLUMNS = ("agent_id", "t", "x", "y", "velocity", "direction")

# Column mapping for raw NGSIM trajectory exports (US-101 / I-80 layout).
NGSIM_COLUMNS = {
    "agent_id": "Vehicle_ID",
    "t": "Frame_ID",
    "x": "Local_X",
    "y": "Local_Y",
    "velocity": "v_Vel",
}


class TrajectoryFormatError(ValueError):
    """Raised for malformed or inconsistent trajectory records."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


@dataclass(frozen=True)
class TimeScope:
    t_max: int
    tick_duration: float = 1.0

    def __post_init__(self):
        if self.t_max < 0:
            raise ValueError("t_max must be non-negative")
        if not self.tick_duration > 0:
            raise ValueError("tick_duration must be positive")

    def __len__(self) -> int:
        return self.t_max + 1

    def __contains__(self, t: int) -> bool:
        return 0 <= t <= self.t_max


@dataclass(frozen=True)
class AgentInstant:
    agent_id: int
    t: int
    x: float
    y: float
    direction: float
    velocity: float

    @property
    def position(self) -> tuple[float, float]:
        return (self.x, self.y)


@dataclass(eq=False)
class AgentSeries:
    """One agent over its contiguous lifespan ``[start, end]``.

    ``source_id`` keeps the identifier found in the input file when the
    series is a later fragment of a gapped track.
    """

    agent_id: int
    start: int
    x: np.ndarray
    y: np.ndarray
    direction: np.ndarray
    velocity: np.ndarray
    source_id: int | None = None

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=np.float64)
        self.y = np.asarray(self.y, dtype=np.float64)
        n = len(self.x)
        if n == 0:
            raise ValueError(f"agent {self.agent_id} has no instants")
        self.direction = _column(self.direction, n)
        self.velocity = _column(self.velocity, n)
        if not (len(self.y) == len(self.direction) == len(self.velocity) == n):
            raise ValueError(f"agent {self.agent_id}: ragged attribute arrays")
        if self.source_id is None:
            self.source_id = self.agent_id

    @property
    def end(self) -> int:
        return self.start + len(self.x) - 1

    @property
    def lifespan(self) -> tuple[int, int]:
        return (self.start, self.end)

    def __len__(self) -> int:
        return len(self.x)

    def __contains__(self, t: int) -> bool:
        return self.start <= t <= self.end

    def position(self, t: int) -> tuple[float, float]:
        k = t - self.start
        return (float(self.x[k]), float(self.y[k]))

    def at(self, t: int) -> AgentInstant:
        if t not in self:
            raise KeyError(f"agent {self.agent_id} not present at t={t}")
        k = t - self.start
        return AgentInstant(
            self.agent_id, t, float(self.x[k]), float(self.y[k]),
            float(self.direction[k]), float(self.velocity[k]),
        )

    @property
    def instants(self) -> list[AgentInstant]:
        return [self.at(t) for t in range(self.start, self.end + 1)]


def _column(values, n: int) -> np.ndarray:
    if values is None:
        return np.full(n, np.nan)
    return np.asarray(values, dtype=np.float64)


@dataclass(eq=False)
class TrajectoryDataset:
    scope: TimeScope
    agents: dict[int, AgentSeries] = field(default_factory=dict)
    agent_radius: float = 1.0

    def __post_init__(self):
        if not self.agent_radius > 0:
            raise ValueError("agent_radius must be positive")
        for aid, series in self.agents.items():
            if aid != series.agent_id:
                raise ValueError(f"agent key {aid} != series id {series.agent_id}")
            if series.start < 0 or series.end > self.scope.t_max:
                raise ValueError(f"agent {aid} lifespan outside the time scope")

    def __len__(self) -> int:
        return len(self.agents)

    def __iter__(self) -> Iterator[AgentSeries]:
        for aid in sorted(self.agents):
            yield self.agents[aid]

    def present_at(self, t: int) -> list[AgentSeries]:
        return [a for a in self if t in a]


@dataclass(frozen=True)
class FormatDescriptor:
    """How to read a trajectory CSV.

    ``columns`` maps canonical names (agent_id, t, x, y, velocity,
    direction) to the header names used in the file. ``rebase_time``
    shifts all instants so the earliest record lands on t=0.
    """

    units: str = "m"
    tick_duration: float = 1.0
    columns: dict[str, str] | None = None
    delimiter: str = ","
    rebase_time: bool = False
    agent_radius: float = 1.0

    def __post_init__(self):
        if self.units not in ("m", "ft"):
            raise ValueError(f"unknown units {self.units!r} (expected 'm' or 'ft')")

    @property
    def scale(self) -> float:
        return FEET_TO_METERS if self.units == "ft" else 1.0

    def column(self, name: str) -> str:
        if self.columns and name in self.columns:
            return self.columns[name]
        return name

    @classmethod
    def ngsim(cls, **overrides) -> "FormatDescriptor":
        base = dict(units="ft", tick_duration=0.1, columns=dict(NGSIM_COLUMNS),
                    rebase_time=True, agent_radius=1.83)
        base.update(overrides)
        return cls(**base)


def _parse_number(raw: str, name: str, line: int, integer: bool = False):
    raw = raw.strip()
    try:
        if integer:
            value = float(raw)
            if not value.is_integer():
                raise ValueError
            return int(value)
        value = float(raw)
    except ValueError:
        raise TrajectoryFormatError(f"cannot parse {name}={raw!r}", line) from None
    if not math.isfinite(value):
        raise TrajectoryFormatError(f"non-finite {name}={raw!r}", line)
    return value


def _read_rows(source, fmt: FormatDescriptor) -> Iterator[tuple[int, dict[str, str]]]:
    if isinstance(source, (str, Path)):
        with open(source, newline="") as fh:
            yield from _read_rows(fh, fmt)
        return
    if isinstance(source, (bytes, bytearray)):
        source = io.StringIO(source.decode())
    elif isinstance(source, io.BufferedIOBase) or "b" in getattr(source, "mode", ""):
        source = io.TextIOWrapper(source)
    if fmt.delimiter == "whitespace":
        lines = (" ".join(line.split()) for line in source)
        reader = csv.reader(lines, delimiter=" ")
    else:
        reader = csv.reader(source, delimiter=fmt.delimiter)
    header = None
    for lineno, row in enumerate(reader, start=1):
        if not row or all(not cell.strip() for cell in row):
            continue
        if header is None:
            header = [cell.strip() for cell in row]
            for required in ("agent_id", "t", "x", "y"):
                if fmt.column(required) not in header:
                    raise TrajectoryFormatError(
                        f"missing column {fmt.column(required)!r} in header", lineno)
            continue
        if len(row) != len(header):
            raise TrajectoryFormatError(
                f"expected {len(header)} fields, got {len(row)}", lineno)
        yield lineno, dict(zip(header, row))


def load_trajectories(source, fmt: FormatDescriptor | None = None) -> TrajectoryDataset:
    """Read a trajectory CSV into a dataset.

    Tracks with holes in ``t`` are split at the holes; the first fragment
    keeps the file's id and later fragments receive fresh ids above the
    largest id in the file, allocated in (source id, start) order.
    """
    fmt = fmt or FormatDescriptor()
    scale = fmt.scale
    cols = {name: fmt.column(name) for name in CANONICAL_COLUMNS}
    tracks: dict[int, list[tuple[int, float, float, float, float]]] = {}
    for lineno, rec in _read_rows(source, fmt):
        aid = _parse_number(rec[cols["agent_id"]], "agent_id", lineno, integer=True)
        t = _parse_number(rec[cols["t"]], "t", lineno, integer=True)
        x = _parse_number(rec[cols["x"]], "x", lineno) * scale
        y = _parse_number(rec[cols["y"]], "y", lineno) * scale
        vel = math.nan
        if cols["velocity"] in rec and rec[cols["velocity"]].strip():
            vel = _parse_number(rec[cols["velocity"]], "velocity", lineno) * scale
            if vel < 0:
                raise TrajectoryFormatError(f"negative velocity {vel}", lineno)
        direction = math.nan
        if cols["direction"] in rec and rec[cols["direction"]].strip():
            direction = _parse_number(rec[cols["direction"]], "direction", lineno) % 360.0
        if not fmt.rebase_time and t < 0:
            raise TrajectoryFormatError(f"negative instant t={t}", lineno)
        records = tracks.setdefault(aid, [])
        if records:
            last_t = records[-1][0]
            if t == last_t:
                raise TrajectoryFormatError(f"duplicate record for agent {aid} at t={t}", lineno)
            if t < last_t:
                raise TrajectoryFormatError(
                    f"non-monotone timestamps for agent {aid}: {t} after {last_t}", lineno)
        records.append((t, x, y, vel, direction))

    offset = 0
    if fmt.rebase_time and tracks:
        offset = min(recs[0][0] for recs in tracks.values())

    fragments: list[tuple[int, list]] = []
    for aid in sorted(tracks):
        current: list = []
        for rec in tracks[aid]:
            if current and rec[0] != current[-1][0] + 1:
                fragments.append((aid, current))
                current = []
            current.append(rec)
        fragments.append((aid, current))

    agents: dict[int, AgentSeries] = {}
    next_id = max(tracks) + 1 if tracks else 0
    for aid, recs in fragments:
        new_id = aid
        if aid in agents:
            new_id = next_id
            next_id += 1
        arr = np.array(recs, dtype=np.float64)
        agents[new_id] = AgentSeries(
            agent_id=new_id, start=int(recs[0][0]) - offset,
            x=arr[:, 1], y=arr[:, 2], velocity=arr[:, 3], direction=arr[:, 4],
            source_id=aid,
        )
    t_max = max((a.end for a in agents.values()), default=0)
    return TrajectoryDataset(TimeScope(t_max, fmt.tick_duration), agents, fmt.agent_radius)


def _derived(series: AgentSeries, tick: float) -> tuple[np.ndarray, np.ndarray]:
    n = len(series)
    velocity = np.zeros(n)
    direction = np.zeros(n)
    if n == 1:
        return velocity, direction
    dx = np.diff(series.x)
    dy = np.diff(series.y)
    step = np.hypot(dx, dy)
    velocity[1:] = step / tick
    heading = np.degrees(np.arctan2(dy, dx)) % 360.0
    # atan2 may return -0.0 or round up to exactly 360 after the modulo
    heading[heading >= 360.0] = 0.0
    prev = 0.0
    for k in range(n - 1):
        if step[k] > 0:
            prev = float(heading[k])
        direction[k + 1] = prev
    velocity[0] = velocity[1]
    direction[0] = direction[1]
    return velocity, direction


def derive_kinematics(dataset: TrajectoryDataset, overwrite: bool = False) -> TrajectoryDataset:
    """Fill velocity and direction from consecutive positions.

    Values already present in the input are kept unless ``overwrite``.
    A zero displacement carries the previous direction forward.
    """
    agents = {}
    for series in dataset:
        velocity, direction = _derived(series, dataset.scope.tick_duration)
        if not overwrite:
            velocity = np.where(np.isnan(series.velocity), velocity, series.velocity)
            direction = np.where(np.isnan(series.direction), direction, series.direction)
        agents[series.agent_id] = AgentSeries(
            series.agent_id, series.start, series.x.copy(), series.y.copy(),
            direction, velocity, series.source_id)
    return TrajectoryDataset(dataset.scope, agents, dataset.agent_radius)


def write_trajectories(dataset: TrajectoryDataset, dest) -> None:
    """Write the dataset in the canonical CSV schema (meters)."""
    if isinstance(dest, (str, Path)):
        with open(dest, "w", newline="") as fh:
            write_trajectories(dataset, fh)
        return
    writer = csv.writer(dest, lineterminator="\n")
    writer.writerow(CANONICAL_COLUMNS)
    for series in dataset:
        for k in range(len(series)):
            writer.writerow([
                series.agent_id, series.start + k,
                _fmt(series.x[k]), _fmt(series.y[k]),
                _fmt(series.velocity[k]), _fmt(series.direction[k]),
            ])


def _fmt(value: float) -> str:
    value = float(value)
    return "" if math.isnan(value) else repr(value)


def dataset_from_instants(instants: Iterable[AgentInstant], scope: TimeScope | None = None,
                          agent_radius: float = 1.0) -> TrajectoryDataset:
    """Assemble a dataset from in-memory instants (each agent contiguous)."""
    by_agent: dict[int, list[AgentInstant]] = {}
    for inst in instants:
        by_agent.setdefault(inst.agent_id, []).append(inst)
    agents = {}
    for aid, items in by_agent.items():
        items.sort(key=lambda i: i.t)
        ts = [i.t for i in items]
        if ts != list(range(ts[0], ts[0] + len(ts))):
            raise ValueError(f"agent {aid} is not contiguous in time")
        agents[aid] = AgentSeries(
            aid, ts[0], [i.x for i in items], [i.y for i in items],
            [i.direction for i in items], [i.velocity for i in items])
    if scope is None:
        scope = TimeScope(max((a.end for a in agents.values()), default=0))
    return TrajectoryDataset(scope, agents, agent_radius)
