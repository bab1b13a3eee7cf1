"""Moving 1-D domain, lateral boundary partition, and surface geometry.

The spatial domain at time t is the interval (a(t), b(t)); the space-time
region is the union of these slices over (0, T).  Each lateral curve carries
a piecewise-constant-in-time boundary kind (Dirichlet or Robin).  Geometric
quantities on the lateral surface (space-time normal, surface weight) are
derived from the curve slopes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .exprlang import Expr, diff_refined, evaluate

SIDE_LEFT = "left"
SIDE_RIGHT = "right"
KIND_DIRICHLET = "dirichlet"
KIND_ROBIN = "robin"

_COVER_TOL = 1e-10


class GeometryError(ValueError):
    pass


def _match(value, t):
    """Broadcast a curve evaluation to the shape of the time argument."""
    shape = np.shape(t)
    if not shape:
        return float(value)
    arr = np.asarray(value, dtype=float)
    if arr.shape == shape:
        return arr
    return np.broadcast_to(arr, shape).copy()


@dataclass(frozen=True)
class MovingDomain:
    """Domain (a(t), b(t)) for t in [0, T] with declared slope/width bounds."""

    a: Expr
    b: Expr
    T: float
    slope_max: float
    width_min: float

    def a_at(self, t):
        return _match(evaluate(self.a, {"t": t}), t)

    def b_at(self, t):
        return _match(evaluate(self.b, {"t": t}), t)

    def a_slope(self, t):
        return _match(diff_refined(self.a, "t", {"t": t}), t)

    def b_slope(self, t):
        return _match(diff_refined(self.b, "t", {"t": t}), t)

    def width(self, t):
        return self.b_at(t) - self.a_at(t)

    def check(self, n=4096):
        """Sampled hypothesis check; returns a list of violation messages."""
        ts = np.linspace(0.0, self.T, n)
        problems = []
        av, bv = self.a_at(ts), self.b_at(ts)
        if not (np.all(np.isfinite(av)) and np.all(np.isfinite(bv))):
            problems.append("non-finite lateral curve value")
            return problems
        w = bv - av
        if np.min(w) < self.width_min - 1e-12:
            i = int(np.argmin(w))
            problems.append(
                f"width b(t)-a(t) = {w[i]:.6g} below width_min = {self.width_min:.6g}"
                f" near t = {ts[i]:.6g}"
            )
        sa, sb = self.a_slope(ts), self.b_slope(ts)
        bound = self.slope_max * (1.0 + 1e-9) + 1e-12
        for name, s in (("a", sa), ("b", sb)):
            m = np.max(np.abs(s))
            if m > bound:
                i = int(np.argmax(np.abs(s)))
                problems.append(
                    f"|{name}'(t)| = {m:.6g} exceeds slope_max = {self.slope_max:.6g}"
                    f" near t = {ts[i]:.6g}"
                )
        return problems


@dataclass(frozen=True)
class Segment:
    t0: float
    t1: float
    kind: str


@dataclass(frozen=True)
class BoundaryPartition:
    """Per-side time segments assigning Dirichlet or Robin kinds."""

    left: tuple
    right: tuple

    def side(self, side):
        return self.left if side == SIDE_LEFT else self.right

    def switch_times(self):
        times = set()
        for segs in (self.left, self.right):
            for s in segs:
                times.add(s.t0)
                times.add(s.t1)
        return sorted(times)

    def kind_at(self, side, t):
        """Kind of the segment containing t (segments are [t0, t1))."""
        segs = self.side(side)
        for s in segs:
            if s.t0 - _COVER_TOL <= t < s.t1 - _COVER_TOL:
                return s.kind
        return segs[-1].kind


@dataclass(frozen=True)
class LateralPoint:
    """A point on a lateral curve with its normal data.

    nu = (nu_x, nu_t) is the unit outward normal of the space-time region,
    n the outward spatial normal of the time slice, cos_nu_t the t-component
    of nu, and w_sigma = sqrt(1 + slope^2) the surface measure per unit time.
    """

    side: str
    t: float
    x: float
    n: int
    nu_x: float
    nu_t: float
    w_sigma: float

    @property
    def cos_nu_t(self):
        return self.nu_t


def lateral_point(domain, side, t):
    """Evaluate curve position and outward normal data at time t.

    On the left curve x = a(t) the outward space-time normal is proportional
    to (-1, a'(t)); on the right curve x = b(t) it is proportional to
    (+1, -b'(t)).  Both satisfy cos_nu_t * w_sigma = signed slope
    (a' on the left, -b' on the right).
    """
    if side not in (SIDE_LEFT, SIDE_RIGHT):
        raise GeometryError(f"unknown side '{side}'")
    if not -1e-12 <= t <= domain.T + 1e-12:
        raise GeometryError(f"t = {t} outside [0, {domain.T}]")
    if side == SIDE_LEFT:
        x = domain.a_at(t)
        slope = domain.a_slope(t)
        raw = (-1.0, slope)
        n = -1
    else:
        x = domain.b_at(t)
        slope = domain.b_slope(t)
        raw = (1.0, -slope)
        n = 1
    if not (math.isfinite(x) and math.isfinite(slope)):
        raise GeometryError(f"non-finite curve value on side '{side}' at t = {t}")
    if abs(slope) > domain.slope_max * (1.0 + 1e-9) + 1e-12:
        raise GeometryError(
            f"slope {slope:.6g} on side '{side}' at t = {t} exceeds "
            f"slope_max = {domain.slope_max}"
        )
    norm = math.hypot(raw[0], raw[1])
    return LateralPoint(
        side=side,
        t=t,
        x=x,
        n=n,
        nu_x=raw[0] / norm,
        nu_t=raw[1] / norm,
        w_sigma=math.sqrt(1.0 + slope * slope),
    )


@dataclass
class PartitionReport:
    ok: bool
    problems: list = field(default_factory=list)
    gaps: list = field(default_factory=list)  # (t0, t1) intervals without Dirichlet


def _structural_problems(partition, T):
    problems = []
    for name, segs in ((SIDE_LEFT, partition.left), (SIDE_RIGHT, partition.right)):
        if not segs:
            problems.append(f"{name} side has no segments")
            continue
        for s in segs:
            if s.kind not in (KIND_DIRICHLET, KIND_ROBIN):
                problems.append(f"{name} side: unknown kind '{s.kind}'")
            if not s.t1 > s.t0:
                problems.append(f"{name} side: segment ({s.t0}, {s.t1}) is empty")
        ordered = sorted(segs, key=lambda s: s.t0)
        if abs(ordered[0].t0) > _COVER_TOL:
            problems.append(f"{name} side: coverage starts at {ordered[0].t0}, not 0")
        if abs(ordered[-1].t1 - T) > _COVER_TOL:
            problems.append(f"{name} side: coverage ends at {ordered[-1].t1}, not T = {T}")
        for prev, nxt in zip(ordered, ordered[1:]):
            if abs(nxt.t0 - prev.t1) > _COVER_TOL:
                problems.append(
                    f"{name} side: segments not contiguous at t = {prev.t1} vs {nxt.t0}"
                )
    return problems


def _merge_intervals(intervals):
    merged = []
    for lo, hi in sorted(intervals):
        if merged and lo <= merged[-1][1] + _COVER_TOL:
            merged[-1][1] = max(merged[-1][1], hi)
        else:
            merged.append([lo, hi])
    return merged


def validate_partition(domain, partition):
    """Check structural coverage plus 'some Dirichlet part at every time'."""
    problems = _structural_problems(partition, domain.T)
    if problems:
        return PartitionReport(ok=False, problems=problems)
    dirichlet = [
        (s.t0, s.t1)
        for segs in (partition.left, partition.right)
        for s in segs
        if s.kind == KIND_DIRICHLET
    ]
    covered = _merge_intervals(dirichlet)
    gaps = []
    cursor = 0.0
    for lo, hi in covered:
        if lo > cursor + _COVER_TOL:
            gaps.append((cursor, lo))
        cursor = max(cursor, hi)
    if cursor < domain.T - _COVER_TOL:
        gaps.append((cursor, domain.T))
    if gaps:
        msgs = [
            f"no Dirichlet part on t in ({lo:.6g}, {hi:.6g})" for lo, hi in gaps
        ]
        return PartitionReport(ok=False, problems=msgs, gaps=gaps)
    return PartitionReport(ok=True)


def is_sigma0_cylindrical(partition):
    """True iff each side's kind is time-constant and some side is Dirichlet.

    With the affine slice map of a 1-D graph domain, endpoints map to
    endpoints, so a full-side Dirichlet part is automatically invariant.
    """
    kinds = []
    for segs in (partition.left, partition.right):
        if not segs:
            return False
        first = segs[0].kind
        if any(s.kind != first for s in segs):
            return False
        kinds.append(first)
    return KIND_DIRICHLET in kinds
