"""Synthetic trajectory scenarios for demos and tests.

``lane-overtaking`` runs independent two-vehicle overtakes on parallel
roads far enough apart that they never see each other. ``group-cruise``
moves a convoy at constant offsets. ``crossing-pedestrians`` sends two
streams of walkers across each other at an angle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .trajectory import AgentSeries, TimeScope, TrajectoryDataset, derive_kinematics

KINDS = ("lane-overtaking", "group-cruise", "crossing-pedestrians")

ROAD_SPACING = 100.0


@dataclass(frozen=True)
class ScenarioSpec:
    kind: str = "lane-overtaking"
    n_agents: int = 60
    duration: int | None = None
    noise: float = 0.0
    seed: int = 0
    tick: float | None = None
    # lane-overtaking: seconds the overtaker spends beyond the lane boundary
    flank_duration: float = 3.0
    # crossing-pedestrians: angle between the streams in degrees
    crossing_angle: float = 90.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown scenario kind {self.kind!r}; expected one of {KINDS}")
        if self.n_agents < 2:
            raise ValueError("a scenario needs at least two agents")
        if self.kind == "lane-overtaking" and self.n_agents % 2:
            raise ValueError("lane-overtaking needs an even number of agents")
        if self.duration is not None and self.duration < 2:
            raise ValueError("duration must be at least 2 instants")
        if self.noise < 0 or self.flank_duration < 0:
            raise ValueError("noise and flank_duration must be non-negative")
        if self.tick is not None and not self.tick > 0:
            raise ValueError("tick must be positive")


def generate_scenario(spec: ScenarioSpec) -> TrajectoryDataset:
    """Build the dataset described by ``spec``; identical specs give identical data."""
    rng = np.random.default_rng(spec.seed)
    if spec.kind == "lane-overtaking":
        tick = spec.tick or 0.1
        tracks, t_max = _overtaking(spec, tick)
        radius = 1.83
    elif spec.kind == "group-cruise":
        tick = spec.tick or 0.1
        tracks, t_max = _cruise(spec, tick)
        radius = 1.83
    else:
        tick = spec.tick or 0.04
        tracks, t_max = _crossing(spec, tick, rng)
        radius = 0.6
    agents = {}
    for aid, (start, x, y) in enumerate(tracks):
        if spec.noise > 0:
            x = x + rng.normal(0.0, spec.noise, len(x))
            y = y + rng.normal(0.0, spec.noise, len(y))
        agents[aid] = AgentSeries(aid, start, x, y, None, None)
    dataset = TrajectoryDataset(TimeScope(t_max, tick), agents, radius)
    return derive_kinematics(dataset)


def _ramp(n: int, hold: int, ramp: int, lo: float, hi: float, center: int) -> np.ndarray:
    """Lateral profile: ``lo``, linear rise to ``hi``, hold, linear fall back."""
    k = np.arange(n, dtype=np.float64)
    half = hold / 2.0
    dist = np.abs(k - center) - half
    frac = np.clip(1.0 - dist / ramp, 0.0, 1.0)
    return lo + (hi - lo) * frac


def _overtaking(spec: ScenarioSpec, tick: float):
    v_slow, v_fast = 25.0, 30.0
    lane, flank_lane = 2.5, 4.0
    gap0 = 30.0
    ramp = 10
    closing = (v_fast - v_slow) * tick
    cross = int(round(gap0 / closing))
    life = 2 * cross + 1
    # the lane boundary sits halfway up the ramp, so the hold is shortened by one ramp
    hold = max(0, int(round(spec.flank_duration / tick)) - ramp)
    n_pairs = spec.n_agents // 2
    if spec.duration is None:
        stagger = 25
    else:
        stagger = (spec.duration - life) // max(1, n_pairs - 1) if n_pairs > 1 else 0
        if stagger < 0:
            raise ValueError(f"duration must be at least {life} instants for lane-overtaking")
    k = np.arange(life, dtype=np.float64)
    tracks = []
    for p in range(n_pairs):
        start = p * stagger
        road = p * ROAD_SPACING
        slow_x = gap0 + v_slow * tick * k
        fast_x = v_fast * tick * k
        fast_y = road + _ramp(life, hold, ramp, lane, flank_lane, cross)
        tracks.append((start, fast_x, fast_y))
        tracks.append((start, slow_x, np.full(life, road)))
    t_max = spec.duration - 1 if spec.duration is not None else (n_pairs - 1) * stagger + life - 1
    return tracks, max(t_max, (n_pairs - 1) * stagger + life - 1)


def _cruise(spec: ScenarioSpec, tick: float):
    speed, spacing, offset = 25.0, 15.0, 2.5
    n = spec.duration or 300
    k = np.arange(n, dtype=np.float64)
    tracks = []
    for a in range(spec.n_agents):
        x = -spacing * a + speed * tick * k
        y = np.full(n, offset * (a % 2))
        tracks.append((0, x, y))
    return tracks, n - 1


def _crossing(spec: ScenarioSpec, tick: float, rng: np.random.Generator):
    length = 40.0
    duration = spec.duration or 3000
    angle = math.radians(spec.crossing_angle)
    streams = [(0.0, 0.0), (math.cos(angle), math.sin(angle))]
    per_stream = [spec.n_agents - spec.n_agents // 2, spec.n_agents // 2]
    tracks = []
    for s, count in enumerate(per_stream):
        ux, uy = (1.0, 0.0) if s == 0 else streams[1]
        # perpendicular to the stream, for lane jitter
        px, py = -uy, ux
        for m in range(count):
            speed = float(rng.uniform(1.2, 1.4))
            steps = int(length / (speed * tick))
            life = min(steps, duration)
            slot = (duration - life) / max(1, count - 1) if count > 1 else 0.0
            start = int(round(m * slot))
            # walks clipped by a short duration all start at once, so queue them instead
            queue = 2.0 * m if steps > duration else 0.0
            lateral = float(rng.uniform(-0.5, 0.5))
            k = np.arange(life, dtype=np.float64)
            along = -length / 2 - queue + speed * tick * k
            x = ux * along + px * lateral
            y = uy * along + py * lateral
            tracks.append((start, x, y))
    return tracks, duration - 1
