"""Interaction functions between two agents and the visibility predicate.

Every interaction function looks at a pair over two consecutive instants:
agent i at t-1 and t, agent j at t-1 and t. The array kernels below take
points as ``(..., 2)`` arrays so the graph builder can label every edge in
one pass; the ``f_*`` functions are the scalar entry points over a
:class:`PairContext`.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum

import numpy as np

from .trajectory import AgentInstant, AgentSeries


class PositionCode(IntEnum):
    V1_BEHIND = 1
    V2_AHEAD = 2
    V3_LATERAL = 3
    V4_FLANKED_SAME_DIR = 4
    V5_MOVING_IN_FRONT = 5
    V6_MOVING_BEHIND_OPPOSITE = 6
    V7_NOT_MOVING = 7


@dataclass(frozen=True)
class InteractionParams:
    eps_move: float = 0.1
    eps_dir: float = 5.0
    eps_align: float = 2.0
    eps_parallel: float = 4.0
    eps_dist: float = 0.1
    eps_vel: float = 0.15 / 3.6
    eps_lat: float = 3.25
    d_search: float = 25.0
    r_agent: float = 1.83
    # Part of the reference presets but
    # never used by any interaction function or event template.
    eps_route: float = 4.0

    def __post_init__(self):
        for name, value in self.__dict__.items():
            if not value >= 0:
                raise ValueError(f"{name} must be non-negative, got {value}")
        if not self.d_search > self.r_agent:
            raise ValueError("d_search must exceed r_agent")


@dataclass(frozen=True)
class InteractionLabel:
    distance_delta: float
    velocity_delta: float
    direction_diff: float
    position: PositionCode
    aligned: bool


class UndefinedInteraction(ValueError):
    """The context involves an agent's first instant (no previous sample)."""


@dataclass(frozen=True)
class PairContext:
    """Two agents over instants t-1 and t."""

    i_prev: tuple[float, float]
    i_cur: tuple[float, float]
    j_prev: tuple[float, float]
    j_cur: tuple[float, float]
    dir_i: float
    dir_j: float
    vel_i: float
    vel_j: float

    @classmethod
    def from_series(cls, a: AgentSeries, b: AgentSeries, t: int) -> "PairContext":
        for s in (a, b):
            if t not in s or t - 1 not in s:
                raise UndefinedInteraction(
                    f"agent {s.agent_id} has no sample at t={t - 1} or t={t}")
        ka, kb = t - a.start, t - b.start
        return cls(
            a.position(t - 1), a.position(t), b.position(t - 1), b.position(t),
            float(a.direction[ka]), float(b.direction[kb]),
            float(a.velocity[ka]), float(b.velocity[kb]),
        )

    @classmethod
    def from_instants(cls, i_prev: AgentInstant, i_cur: AgentInstant,
                      j_prev: AgentInstant, j_cur: AgentInstant) -> "PairContext":
        if not (i_prev.agent_id == i_cur.agent_id and j_prev.agent_id == j_cur.agent_id):
            raise ValueError("context instants belong to different agents")
        if not (i_cur.t == j_cur.t and i_prev.t == j_prev.t == i_cur.t - 1):
            raise UndefinedInteraction("context instants are not at t-1 and t")
        return cls(i_prev.position, i_cur.position, j_prev.position, j_cur.position,
                   i_cur.direction, j_cur.direction, i_cur.velocity, j_cur.velocity)

    def swapped(self) -> "PairContext":
        return PairContext(self.j_prev, self.j_cur, self.i_prev, self.i_cur,
                           self.dir_j, self.dir_i, self.vel_j, self.vel_i)

    def _arrays(self):
        return tuple(np.asarray(p, dtype=np.float64)
                     for p in (self.i_prev, self.i_cur, self.j_prev, self.j_cur))


# -- array kernels ---------------------------------------------------------

def _norm(v):
    return np.sqrt(v[..., 0] * v[..., 0] + v[..., 1] * v[..., 1])


def distance_delta(i_prev, i_cur, j_prev, j_cur):
    return _norm(i_cur - j_cur) - _norm(i_prev - j_prev)


def direction_diff(dir_i, dir_j):
    diff = np.abs(np.asarray(dir_i) - np.asarray(dir_j))
    return np.minimum(360.0 - diff, diff)


def _heading(prev, cur, direction):
    """Unit heading from displacement, falling back to the recorded direction."""
    disp = cur - prev
    length = _norm(disp)
    rad = np.radians(direction)
    fallback = np.stack([np.cos(rad), np.sin(rad)], axis=-1)
    safe = np.where(length > 0, length, 1.0)[..., None]
    unit = np.where((length > 0)[..., None], disp / safe, fallback)
    return unit, length


def position_code(i_prev, i_cur, j_prev, j_cur, dir_i, dir_j, eps_move, eps_parallel, eps_lat):
    """Relative position of agent i with respect to agent j.

    Both displacements shorter than ``eps_move`` gives V7. Otherwise the
    angle between the two headings classifies the pair as parallel,
    anti-parallel or crossing (V3); parallel and anti-parallel cases are
    resolved by the longitudinal/lateral offset of i in j's heading frame.
    """
    u_i, len_i = _heading(i_prev, i_cur, dir_i)
    u_j, len_j = _heading(j_prev, j_cur, dir_j)
    cos_theta = np.clip(u_i[..., 0] * u_j[..., 0] + u_i[..., 1] * u_j[..., 1], -1.0, 1.0)
    theta = np.degrees(np.arccos(cos_theta))
    offset = i_cur - j_cur
    along = offset[..., 0] * u_j[..., 0] + offset[..., 1] * u_j[..., 1]
    lateral = u_j[..., 0] * offset[..., 1] - u_j[..., 1] * offset[..., 0]

    parallel = theta <= eps_parallel
    anti = ~parallel & (theta >= 180.0 - eps_parallel)
    near = np.abs(lateral) <= eps_lat
    code = np.select(
        [
            (len_i < eps_move) & (len_j < eps_move),
            parallel & near & (along < 0),
            parallel & near,
            parallel,
            anti & (along >= 0),
            anti,
        ],
        [7, 1, 2, 4, 5, 6],
        default=3,
    )
    return code


def aligned(i_prev, i_cur, j_prev, j_cur, dir_i, eps_align):
    """Whether both samples of j lie within ``eps_align`` of the line through i.

    When i did not move, the line passes through i's position along its
    recorded direction; a missing (NaN) direction then yields False.
    """
    u_i, _ = _heading(i_prev, i_cur, dir_i)
    d_prev = np.abs(u_i[..., 0] * (j_prev[..., 1] - i_cur[..., 1])
                    - u_i[..., 1] * (j_prev[..., 0] - i_cur[..., 0]))
    d_cur = np.abs(u_i[..., 0] * (j_cur[..., 1] - i_cur[..., 1])
                   - u_i[..., 1] * (j_cur[..., 0] - i_cur[..., 0]))
    return (d_prev <= eps_align) & (d_cur <= eps_align)


def occluded(a, b, others, r_agent, exclude=None):
    """For each segment ``a[k]-b[k]``, whether any circle in ``others`` blocks it.

    ``a`` and ``b`` have shape (P, 2) and ``others`` shape (N, 2);
    ``exclude`` is an optional (P, N) mask of occluders to ignore for each
    segment (typically the two endpoint agents). The segment is open: a
    circle reached only at an endpoint blocks when the endpoint lies
    strictly inside it.
    """
    d = (b - a)[:, None, :]
    w = others[None, :, :] - a[:, None, :]
    dd = d[..., 0] * d[..., 0] + d[..., 1] * d[..., 1]
    safe = np.where(dd > 0, dd, 1.0)
    u = np.where(dd > 0, (w[..., 0] * d[..., 0] + w[..., 1] * d[..., 1]) / safe, 0.0)
    r2 = r_agent * r_agent
    px = w[..., 0] - u * d[..., 0]
    py = w[..., 1] - u * d[..., 1]
    perp2 = px * px + py * py
    end_a = w[..., 0] * w[..., 0] + w[..., 1] * w[..., 1]
    wb = w - d
    end_b = wb[..., 0] * wb[..., 0] + wb[..., 1] * wb[..., 1]
    at_end = np.where(u <= 0, end_a, end_b)
    blocked = np.where((u > 0) & (u < 1), perp2 <= r2, at_end < r2)
    if exclude is not None:
        blocked &= ~exclude
    return np.any(blocked, axis=1)


# -- scalar API --------------------------------------------------------------

def f_distance(ctx: PairContext) -> float:
    return float(distance_delta(*ctx._arrays()))


def f_velocity(ctx: PairContext) -> float:
    return ctx.vel_i - ctx.vel_j


def f_direction(ctx: PairContext) -> float:
    return float(direction_diff(ctx.dir_i, ctx.dir_j))


def f_position(ctx: PairContext, params: InteractionParams) -> PositionCode:
    code = position_code(*ctx._arrays(), ctx.dir_i, ctx.dir_j,
                         params.eps_move, params.eps_parallel, params.eps_lat)
    return PositionCode(int(code))


def f_align(ctx: PairContext, params: InteractionParams) -> bool:
    return bool(aligned(*ctx._arrays(), ctx.dir_i, params.eps_align))


def interaction_label(ctx: PairContext, params: InteractionParams) -> InteractionLabel:
    return InteractionLabel(
        f_distance(ctx), f_velocity(ctx), f_direction(ctx),
        f_position(ctx, params), f_align(ctx, params),
    )


def visible(a: AgentInstant, b: AgentInstant, others, params: InteractionParams) -> bool:
    """Whether ``a`` and ``b`` see each other at the same instant.

    ``others`` are the agent instants present at that instant; ``a`` and
    ``b`` themselves are ignored if included.
    """
    if a.t != b.t:
        raise ValueError("visibility is defined between instants at the same t")
    if a.agent_id > b.agent_id:
        a, b = b, a
    pa = np.array([a.position], dtype=np.float64)
    pb = np.array([b.position], dtype=np.float64)
    if float(_norm(pb - pa)[0]) > params.d_search:
        return False
    occ = [o.position for o in others if o.agent_id not in (a.agent_id, b.agent_id)]
    if not occ:
        return True
    return not bool(occluded(pa, pb, np.array(occ, dtype=np.float64), params.r_agent)[0])
