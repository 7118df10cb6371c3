"""Pair configuration, chaos certification and chaotic-set construction.

Certification is table driven: the kinds of the two singular points (and,
for saddles, the position of the other branch relative to the saddle's
eigen-directions and manifolds) select a row of :mod:`branchlab.tables`.
The row lists admissible geometries; a certificate is issued only once one
of them is actually built and validated numerically.

Two geometries exist:

* ``Region``: a Jordan region bounded by one f-arc and one g-arc.  It is
  validated by building the periodic switched solution through an interior
  point and checking that it closes.
* ``Arc``: a segment (or manifold piece) on which both branches are tangent
  and anti-parallel, so switched solutions slide back and forth along it.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import tables
from .branching import (
    EulerBranching,
    LoopRegion,
    SwitchedSolution,
    SwitchingSchedule,
    build_gamma0,
    build_gamma_xj,
    construct_loop,
    solve_switched,
    winding_inside,
)
from .errors import (
    BranchLabError,
    CoincidentEquilibria,
    ConfigurationError,
    ConstructionFailed,
    MultipleEquilibria,
    NoEquilibrium,
    NonHyperbolic,
    ZeroVector,
)
from .fields import (
    Collinearity,
    EquilibriumKind,
    ManifoldDirection,
    Rect,
    SingularPoint,
    collinearity,
    find_singular_points,
    trace_manifold,
)
from .integrate import (
    EventSpec,
    Trajectory,
    integrate_backward_until,
    integrate_through,
    integrate_until,
    intersect_trajectories,
)

__all__ = [
    "Position",
    "Overlap",
    "PairConfiguration",
    "ChaosOptions",
    "ChaoticSetGeometry",
    "ChaosCertificate",
    "detect_configuration",
    "certify",
    "construct_chaotic_set",
    "theta_profile",
    "scrambled_diagnostic",
    "invariance_and_density_report",
    "InvarianceReport",
    "unbounded_proxy",
]

SCHEMA_VERSION = 1


class Position(str, Enum):
    OUTSIDE = "Outside"
    ON_STABLE = "OnStableManifold"
    ON_UNSTABLE = "OnUnstableManifold"


class Overlap(str, Enum):
    STABLE_UNSTABLE = "StableOverlapsUnstable"
    STABLE_STABLE = "StableOverlapsStable"
    UNSTABLE_UNSTABLE = "UnstableOverlapsUnstable"


@dataclass(frozen=True)
class PairConfiguration:
    """Singular points of both branches and their mutual position.

    ``anchor`` names the branch ("F" or "G") whose saddle has the other
    branch's vector parallel to an eigenvector; it is ``None`` when no such
    saddle exists.  ``special_position`` and ``overlap`` are filled only for
    saddle/non-saddle and saddle/saddle pairs respectively.
    """

    sp_f: SingularPoint
    sp_g: SingularPoint
    distinct: bool
    separation: float
    collinear_g_at_f: Optional[Collinearity] = None
    collinear_f_at_g: Optional[Collinearity] = None
    overlap: Optional[Overlap] = None
    second_manifolds_intersect: Optional[bool] = None
    special_position: Optional[Position] = None
    trajectory_overlap: Optional[bool] = None
    anchor: Optional[str] = None

    @property
    def hyperbolic(self) -> bool:
        return self.sp_f.kind.hyperbolic and self.sp_g.kind.hyperbolic

    def to_dict(self) -> dict:
        def val(e):
            return None if e is None else e.value

        return {
            "f": self.sp_f.to_dict(),
            "g": self.sp_g.to_dict(),
            "distinct": self.distinct,
            "separation": self.separation,
            "collinear_g_at_f": val(self.collinear_g_at_f),
            "collinear_f_at_g": val(self.collinear_f_at_g),
            "overlap": val(self.overlap),
            "second_manifolds_intersect": self.second_manifolds_intersect,
            "special_position": val(self.special_position),
            "trajectory_overlap": self.trajectory_overlap,
            "anchor": self.anchor,
        }


@dataclass(frozen=True)
class ChaosOptions:
    theta_tol: float = 1e-6
    tangency_tol: float = 1e-6
    endpoint_margin: float = 0.05
    arc_samples: int = 200
    max_retries: int = 4
    seed_ladder: Tuple[float, ...] = (0.05, 0.1, 0.2, 0.4)
    delta_frac: float = 0.25
    rtol: float = 1e-9
    closure_tol: float = 1e-6
    arclength_factor: float = 8.0
    angle_tol: float = 1e-6
    position_tol: float = 1e-7


@dataclass(frozen=True)
class ChaoticSetGeometry:
    """Constructed chaotic set: a loop region or an anti-parallel arc."""

    variant: str
    loop: Optional[LoopRegion] = None
    arc: Optional[np.ndarray] = None
    theta_checked: bool = False
    theta_max_dev: Optional[float] = None
    source: str = ""
    solutions: Tuple[SwitchedSolution, ...] = ()

    def to_dict(self, max_points: int = 400) -> dict:
        pts = self.loop.polygon if self.variant == "Region" else self.arc
        step = max(1, int(math.ceil(len(pts) / max_points)))
        sub = pts[::step]
        key = "boundary_points" if self.variant == "Region" else "arc_points"
        out = {
            "variant": self.variant,
            "source": self.source,
            key: [[float(x), float(y)] for x, y in sub],
            "theta_checked": self.theta_checked,
            "theta_max_dev": self.theta_max_dev,
        }
        if self.loop is not None:
            out["junctions"] = [[float(v) for v in self.loop.z1], [float(v) for v in self.loop.z2]]
            out["junction_mismatch"] = self.loop.junction_mismatch
        return out


@dataclass(frozen=True)
class ChaosCertificate:
    config: Optional[PairConfiguration]
    geometry: Optional[ChaoticSetGeometry]
    flags: Dict[str, bool]
    provenance: Dict
    refusals: Tuple[str, ...] = ()
    checks: Dict = field(default_factory=dict)

    @property
    def certified(self) -> bool:
        return bool(self.flags.get("devaney"))

    @property
    def reason(self) -> Optional[str]:
        """Machine-readable code of the first refusal."""
        return self.refusals[0].split(":", 1)[0] if self.refusals else None

    def schedules(self) -> List[dict]:
        if self.geometry is None:
            return []
        return [json.loads(s.schedule.to_json()) | {"x0": [float(v) for v in s.x0]} for s in self.geometry.solutions]

    def to_dict(self) -> dict:
        return {
            "schema": SCHEMA_VERSION,
            "config": None if self.config is None else self.config.to_dict(),
            "geometry": None if self.geometry is None else self.geometry.to_dict(),
            "flags": dict(self.flags),
            "provenance": dict(self.provenance),
            "refusals": list(self.refusals),
            "checks": _jsonable(self.checks),
            "solutions": self.schedules(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    return obj


# -- geometry helpers ---------------------------------------------------------


def _unit(v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    n = float(np.linalg.norm(v))
    if n == 0.0:
        raise ZeroVector("zero vector has no direction")
    return v / n


def _polyline_distance(q, P: np.ndarray) -> float:
    """Distance from ``q`` to the open polyline ``P``."""
    q = np.asarray(q, dtype=float)
    if len(P) == 1:
        return float(np.linalg.norm(P[0] - q))
    A, B = P[:-1], P[1:]
    AB = B - A
    L2 = np.maximum(np.sum(AB * AB, axis=1), 1e-300)
    u = np.clip(np.sum((q - A) * AB, axis=1) / L2, 0.0, 1.0)
    C = A + u[:, None] * AB
    return float(np.sqrt(np.min(np.sum((C - q) ** 2, axis=1))))


def _resample(P: np.ndarray, n: int) -> np.ndarray:
    """``n`` points equally spaced in arclength along polyline ``P``."""
    seg = np.linalg.norm(np.diff(P, axis=0), axis=1)
    s = np.concatenate(([0.0], np.cumsum(seg)))
    keep = np.concatenate(([True], seg > 0))
    s, P = s[keep], P[keep]
    target = np.linspace(0.0, s[-1], n)
    return np.column_stack((np.interp(target, s, P[:, 0]), np.interp(target, s, P[:, 1])))


def _branches(fld, sp: SingularPoint, length: float, rtol: float) -> Dict[Tuple[str, int], Trajectory]:
    out = {}
    for direction in (ManifoldDirection.STABLE, ManifoldDirection.UNSTABLE):
        for sign in (1, -1):
            man = trace_manifold(fld, sp, direction, sign, length, rtol=rtol)
            out[(direction.value, sign)] = man
    return out


def _outward_points(man) -> np.ndarray:
    return np.vstack((man.saddle.location, man.points_outward))


# -- configuration ------------------------------------------------------------


def detect_configuration(
    eb: EulerBranching,
    region: Optional[Rect] = None,
    *,
    grid_n: int = 40,
    tol: float = 1e-10,
    classify_tol: float = 1e-8,
    opts: Optional[ChaosOptions] = None,
    strict: bool = True,
) -> PairConfiguration:
    """Locate the singular point of each branch and classify their relation.

    Parameters
    ----------
    eb : EulerBranching
    region : Rect, optional
        Search rectangle, defaults to the branching domain.
    strict : bool
        When true, non-hyperbolic kinds and coincident singular points raise;
        otherwise they are returned for the certifier to refuse.

    Raises
    ------
    NoEquilibrium, MultipleEquilibria
        If a branch does not have exactly one singular point in ``region``.
    CoincidentEquilibria, NonHyperbolic
        Scope violations (``strict`` only).
    """
    opts = opts or ChaosOptions()
    region = eb.domain if region is None else region
    sps = []
    for name, fld in (("f", eb.f), ("g", eb.g)):
        found = find_singular_points(fld, region, grid_n=grid_n, tol=tol, classify_tol=classify_tol)
        if not found:
            raise NoEquilibrium(f"branch {name} has no singular point in {region.as_tuple()}")
        if len(found) > 1:
            raise MultipleEquilibria(f"branch {name} has {len(found)} singular points in {region.as_tuple()}")
        sps.append(found[0])
    sp_f, sp_g = sps
    sep = float(np.linalg.norm(sp_f.location - sp_g.location))
    distinct = sep > 1e-9 * (1.0 + eb.scale)
    hyperbolic = sp_f.kind.hyperbolic and sp_g.kind.hyperbolic
    if strict and not distinct:
        raise CoincidentEquilibria(f"singular points coincide (separation {sep:.3e})")
    if strict and not hyperbolic:
        bad = sp_f if not sp_f.kind.hyperbolic else sp_g
        raise NonHyperbolic(f"singular point at {bad.location} is {bad.kind.value}")
    if not (distinct and hyperbolic):
        return PairConfiguration(sp_f, sp_g, distinct, sep)

    S = EquilibriumKind.SADDLE
    col_g = collinearity(eb.g(sp_f.location), sp_f.eig, opts.angle_tol) if sp_f.kind is S else None
    col_f = collinearity(eb.f(sp_g.location), sp_g.eig, opts.angle_tol) if sp_g.kind is S else None
    anchor = None
    if col_g not in (None, Collinearity.NOT_COLLINEAR):
        anchor = "F"
    elif col_f not in (None, Collinearity.NOT_COLLINEAR):
        anchor = "G"

    kw: dict = {}
    pos_tol = opts.position_tol * (1.0 + eb.scale)
    reach = 1.5 * sep + 0.05 * eb.scale
    if sp_f.kind is S and sp_g.kind is S:
        kw.update(_saddle_overlap(eb, sp_f, sp_g, reach, pos_tol, opts))
    elif S in (sp_f.kind, sp_g.kind):
        sad, fld, other = (sp_f, eb.f, sp_g) if sp_f.kind is S else (sp_g, eb.g, sp_f)
        kw["special_position"] = _position(fld, sad, other.location, reach, pos_tol, opts.rtol)
    if anchor is not None:
        if anchor == "F":
            sad, a_fld, b_fld, col = sp_f, eb.f, eb.g, col_g
        else:
            sad, a_fld, b_fld, col = sp_g, eb.g, eb.f, col_f
        kw["trajectory_overlap"] = _trajectory_overlap(a_fld, b_fld, sad, col, 0.25 * sep, opts)
    return PairConfiguration(sp_f, sp_g, distinct, sep, col_g, col_f, anchor=anchor, **kw)


def _manifold_of(col: Collinearity) -> ManifoldDirection:
    # eigenvalues are sorted descending, so e1 belongs to the positive one
    return ManifoldDirection.UNSTABLE if col is Collinearity.COLLINEAR_E1 else ManifoldDirection.STABLE


def _trajectory_overlap(a_fld, b_fld, sad: SingularPoint, col: Collinearity, radius: float, opts) -> bool:
    """Does the other branch stay parallel to the collinear manifold near the saddle?"""
    direction = _manifold_of(col)
    for sign in (1, -1):
        man = trace_manifold(a_fld, sad, direction, sign, radius, rtol=opts.rtol)
        pts = man.points_outward
        pts = pts[np.linalg.norm(pts - sad.location, axis=1) > 0]
        for p in pts[:: max(1, len(pts) // 50)]:
            u, v = a_fld(p), b_fld(p)
            nu, nv = np.linalg.norm(u), np.linalg.norm(v)
            if nu == 0 or nv == 0:
                continue
            if abs(u[0] * v[1] - u[1] * v[0]) / (nu * nv) > 1e-7:
                return False
    return True


def _position(fld, sad: SingularPoint, q, reach: float, tol: float, rtol: float) -> Position:
    mans = _branches(fld, sad, reach, rtol)
    for (direction, _), man in mans.items():
        if _polyline_distance(q, _outward_points(man)) <= tol:
            return Position.ON_STABLE if direction == "Stable" else Position.ON_UNSTABLE
    return Position.OUTSIDE


def _saddle_overlap(eb, sp_f, sp_g, reach, tol, opts) -> dict:
    """Overlap of the two saddles' manifolds, and whether the remaining two intersect."""
    found = None
    for sad, fld, other, ofld in ((sp_f, eb.f, sp_g, eb.g), (sp_g, eb.g, sp_f, eb.f)):
        mans = _branches(fld, sad, reach, opts.rtol)
        for (direction, _), man in mans.items():
            if _polyline_distance(other.location, _outward_points(man)) > tol:
                continue
            # the manifold passes through the other saddle: match its tangent there
            tangent = fld(other.location)
            col = collinearity(tangent, other.eig, 1e-5)
            if col is Collinearity.NOT_COLLINEAR:
                continue
            mine = ManifoldDirection(direction)
            theirs = _manifold_of(col)
            found = (sad, fld, mine, other, ofld, theirs)
            break
        if found:
            break
    if not found:
        return {}
    sad, fld, mine, other, ofld, theirs = found
    if mine is theirs:
        kind = Overlap.STABLE_STABLE if mine is ManifoldDirection.STABLE else Overlap.UNSTABLE_UNSTABLE
        return {"overlap": kind}
    # remaining manifolds: the other direction at each saddle
    rest_a = ManifoldDirection.UNSTABLE if mine is ManifoldDirection.STABLE else ManifoldDirection.STABLE
    rest_b = ManifoldDirection.UNSTABLE if theirs is ManifoldDirection.STABLE else ManifoldDirection.STABLE
    L = eb.scale
    arcs_a = [trace_manifold(fld, sad, rest_a, s, L, rtol=opts.rtol).arc for s in (1, -1)]
    arcs_b = [trace_manifold(ofld, other, rest_b, s, L, rtol=opts.rtol).arc for s in (1, -1)]
    meet = any(len(a) > 1 and len(b) > 1 and intersect_trajectories(a, b) for a in arcs_a for b in arcs_b)
    return {"overlap": Overlap.STABLE_UNSTABLE, "second_manifolds_intersect": bool(meet)}


def table_row(cfg: PairConfiguration) -> tables.TableRow:
    """Row of the decision tables matching ``cfg``."""
    kf, kg = cfg.sp_f.kind, cfg.sp_g.kind
    if cfg.anchor is None:
        return tables.hyperbolic_row(kf, kg)
    other = kg if cfg.anchor == "F" else kf
    if other.is_node:
        # position of the node relative to the collinear saddle's manifolds
        q = {
            Position.OUTSIDE: "node lies outside manifolds",
            Position.ON_STABLE: "node lies on stable manifold",
            Position.ON_UNSTABLE: "node lies on unstable manifold",
        }[cfg.special_position or Position.OUTSIDE]
    elif other.is_focus:
        q = "trajectory overlaps manifold" if cfg.trajectory_overlap else "trajectory crosses manifolds"
    else:
        if cfg.overlap is None:
            q = "manifolds are not overlapped"
        elif cfg.overlap is Overlap.STABLE_STABLE:
            q = "stable manifolds are overlapped"
        elif cfg.overlap is Overlap.UNSTABLE_UNSTABLE:
            q = "unstable manifolds are overlapped"
        elif cfg.second_manifolds_intersect:
            q = "stable manifold overlaps unstable manifold and second manifolds intersect each other"
        else:
            q = "stable manifold overlaps unstable manifold and second manifolds do not intersect"
    return tables.collinear_row(other, q)


# -- arc geometry -------------------------------------------------------------


def theta_profile(eb: EulerBranching, arc, n: Optional[int] = None) -> np.ndarray:
    """Angle between ``f`` and ``g`` at ``n`` arclength-uniform samples of ``arc``.

    Uses ``atan2(|f x g|, f . g)``, which stays accurate near ``pi``.

    Raises
    ------
    ZeroVector
        If either branch vanishes at a sample.
    """
    P = np.asarray(arc.arc if isinstance(arc, ChaoticSetGeometry) else arc, dtype=float)
    if n is not None and len(P) >= 2:
        P = _resample(P, n)
    fu, fv = eb.f.eval_grid(P[:, 0], P[:, 1])
    gu, gv = eb.g.eval_grid(P[:, 0], P[:, 1])
    nf = np.hypot(fu, fv)
    ng = np.hypot(gu, gv)
    if np.any(nf * ng == 0.0):
        k = int(np.argmin(nf * ng))
        raise ZeroVector(f"a branch vanishes on the arc at {P[k]}")
    return np.arctan2(np.abs(fu * gv - fv * gu), fu * gu + fv * gv)


def _arc_candidates(eb: EulerBranching, cfg: PairConfiguration, opts: ChaosOptions):
    xs, ys = cfg.sp_f.location, cfg.sp_g.location
    d = cfg.separation
    m = opts.endpoint_margin * d
    dom = eb.domain
    u = (ys - xs) / d

    def ray(origin, direction):
        # longest in-domain run, up to one separation
        s_hi = d
        for k in range(60):
            if dom.contains(origin + s_hi * direction):
                break
            s_hi *= 0.9
        s_hi *= 0.98
        if s_hi <= 2 * m:
            return None
        return np.array([origin + s * direction for s in np.linspace(m, s_hi, 64)])

    out = [("segment between singular points", np.array([xs + s * u for s in np.linspace(m, d - m, 64)]))]
    for sp, fld in ((cfg.sp_f, eb.f), (cfg.sp_g, eb.g)):
        if sp.kind is not EquilibriumKind.SADDLE:
            continue
        other = ys if sp is cfg.sp_f else xs
        for (direction, sign), man in _branches(fld, sp, 2.0 * d + 0.05 * eb.scale, opts.rtol).items():
            P = _outward_points(man)
            seg = np.linalg.norm(np.diff(P, axis=0), axis=1)
            s = np.concatenate(([0.0], np.cumsum(seg)))
            dist = np.linalg.norm(P - other, axis=1)
            k = int(np.argmin(dist))
            pieces = []
            if dist[k] <= opts.position_tol * (1 + eb.scale):
                pieces += [(m, s[k] - m), (s[k] + m, s[-1] - m)]
            else:
                pieces.append((m, s[-1] - m))
            for lo, hi in pieces:
                if hi - lo <= m:
                    continue
                sel = (s >= lo) & (s <= hi)
                if sel.sum() < 2:
                    continue
                name = f"{direction.lower()} manifold branch {'+' if sign > 0 else '-'} of saddle at {sp.location.round(6).tolist()}"
                out.append((name, P[sel]))
    for name, origin, direction in (("ray beyond f singular point", xs, -u), ("ray beyond g singular point", ys, u)):
        r = ray(origin, direction)
        if r is not None:
            out.append((name, r))
    return out


def _arc_ok(eb, P: np.ndarray, opts: ChaosOptions) -> Optional[float]:
    """Max ``|theta - pi|`` if ``P`` is an admissible anti-parallel tangent arc, else None."""
    Q = _resample(P, opts.arc_samples)
    try:
        th = theta_profile(eb, Q)
    except ZeroVector:
        return None
    dev = float(np.max(np.abs(th - math.pi)))
    if dev > opts.theta_tol:
        return None
    # both branches must be tangent to the arc, otherwise it is not invariant
    tang = np.gradient(Q, axis=0)
    fu, fv = eb.f.eval_grid(Q[:, 0], Q[:, 1])
    sin = np.abs(fu * tang[:, 1] - fv * tang[:, 0]) / (np.hypot(fu, fv) * np.linalg.norm(tang, axis=1))
    if float(np.max(sin)) > max(opts.tangency_tol, 1e-3 * _curvature_slack(Q)):
        return None
    return dev


def _curvature_slack(Q: np.ndarray) -> float:
    # finite-difference tangents of a curved polyline lag by O(h * curvature)
    d1 = np.diff(Q, axis=0)
    ang = np.abs(np.diff(np.arctan2(d1[:, 1], d1[:, 0])))
    ang = np.minimum(ang, 2 * math.pi - ang)
    return float(ang.max()) if ang.size else 0.0


def _traverse_time(fld, P: np.ndarray) -> float:
    """Time to follow ``fld`` along polyline ``P`` (the field is tangent to it)."""
    Q = _resample(P, 2001)
    ds = np.linalg.norm(np.diff(Q, axis=0), axis=1)
    u, v = fld.eval_grid(Q[:, 0], Q[:, 1])
    w = 1.0 / np.hypot(u, v)
    return float(np.sum(0.5 * (w[:-1] + w[1:]) * ds))


def _arc_solutions(eb, P: np.ndarray, opts, periods: int = 2) -> Tuple[List[SwitchedSolution], float]:
    """Two bouncing switched solutions on the arc; returns them and the worst deviation."""
    seg = np.linalg.norm(np.diff(P, axis=0), axis=1)
    s = np.concatenate(([0.0], np.cumsum(seg)))
    sols = []
    worst = 0.0
    for lo, hi in ((0.25, 0.75), (0.1, 0.9)):
        a_i = int(np.searchsorted(s, lo * s[-1]))
        b_i = int(np.searchsorted(s, hi * s[-1]))
        piece = P[a_i : b_i + 1]
        fwd = piece[-1] - piece[0]
        start = "F" if float(np.dot(eb.f(piece[0]), fwd)) > 0 else "G"
        mover = eb.branch(start)
        back = eb.branch("G" if start == "F" else "F")
        t_out = _traverse_time(mover, piece)
        t_back = _traverse_time(back, piece)
        times = []
        t = 0.0
        for _ in range(periods):
            t += t_out
            times.append(t)
            t += t_back
            times.append(t)
        sched = SwitchingSchedule(start, tuple(times[:-1]))
        sol = solve_switched(eb, piece[0], sched, times[-1], rtol=opts.rtol, meta={"period": t_out + t_back})
        pts = np.vstack([a.p for a in sol.arcs])
        dev = max(_polyline_distance(p, P) for p in pts[:: max(1, len(pts) // 200)])
        worst = max(worst, dev, float(np.linalg.norm(sol.arcs[-1].end - piece[0])))
        sols.append(sol)
    return sols, worst


def _build_arc(eb, cfg, opts) -> Optional[ChaoticSetGeometry]:
    d = cfg.separation
    for name, P in _arc_candidates(eb, cfg, opts):
        dev = _arc_ok(eb, P, opts)
        if dev is None:
            continue
        Q = _resample(P, opts.arc_samples)
        sols, worst = _arc_solutions(eb, Q, opts)
        if worst > 1e-4 * d:
            continue
        return ChaoticSetGeometry("Arc", arc=Q, theta_checked=True, theta_max_dev=dev, source=name, solutions=tuple(sols))
    return None


# -- region geometry ----------------------------------------------------------


def _perp(v) -> np.ndarray:
    u = _unit(v)
    return np.array([-u[1], u[0]])


def _validate_loop(eb, loop: LoopRegion, opts) -> Optional[Tuple[SwitchedSolution, ...]]:
    try:
        x0 = loop.interior_point()
        sol, period = build_gamma0(eb, loop, x0, periods=2, rtol=opts.rtol)
    except BranchLabError:
        return None
    if sol.domain_exit:
        return None
    err = max(float(np.linalg.norm(sol(k * period) - x0)) for k in (1, 2))
    if err > opts.closure_tol * (1.0 + eb.scale):
        return None
    sols = [sol]
    # a second schedule through another interior point
    mid = loop.phi_arc((loop.t1 + loop.t2) / 2)
    for fr in (0.5, 0.3, 0.7):
        xj = x0 + fr * (mid - x0)
        try:
            sols.append(build_gamma_xj(eb, loop, x0, xj, periods=2, rtol=opts.rtol))
            break
        except BranchLabError:
            continue
    return tuple(sols)


def _build_region(eb, cfg, opts, ladder: Optional[Sequence[float]] = None) -> Optional[ChaoticSetGeometry]:
    xs, ys = cfg.sp_f.location, cfg.sp_g.location
    d = cfg.separation
    exclude = [xs, ys]
    cap = opts.arclength_factor * d + 0.02 * eb.scale
    T = 200.0
    ladder = tuple(ladder if ladder is not None else opts.seed_ladder[: opts.max_retries])
    # anchor near one singular point; the anchored trajectory belongs to the other branch
    anchors = (("G", xs, eb.g), ("F", ys, eb.f))
    for off in ladder:
        for role, anchor, fld in anchors:
            vec = fld(anchor)
            if np.linalg.norm(vec) == 0:
                continue
            n = _perp(vec)
            for sgn in (1.0, -1.0):
                seed = anchor + sgn * off * d * n
                if not eb.domain.contains(seed):
                    continue
                try:
                    anchored = integrate_through(fld, seed, T, T, rtol=opts.rtol, max_arclength=cap, branch=role)
                except BranchLabError:
                    continue
                for cand in _seed_points(anchored, anchor, d):
                    loop = _try_loop(eb, role, anchored, cand, exclude, T, cap, opts)
                    if loop is None:
                        continue
                    sols = _validate_loop(eb, loop, opts)
                    if sols is None:
                        continue
                    src = f"loop anchored near {'f' if role == 'G' else 'g'} singular point, offset {off:g}"
                    return ChaoticSetGeometry("Region", loop=loop, source=src, solutions=sols)
    return None


def _seed_points(tr: Trajectory, anchor, d: float) -> List[np.ndarray]:
    """Points of ``tr`` at arclength offsets around its closest approach to ``anchor``."""
    seg = np.linalg.norm(np.diff(tr.p, axis=0), axis=1)
    s = np.concatenate(([0.0], np.cumsum(seg)))
    k = int(np.argmin(np.linalg.norm(tr.p - anchor, axis=1)))
    out = []
    for frac in (0.1, -0.1, 0.3, -0.3, 0.6, -0.6, 1.0, -1.0):
        target = s[k] + frac * d
        if target < s[0] or target > s[-1]:
            continue
        t = float(np.interp(target, s, tr.t))
        out.append(tr(t))
    return out


def _try_loop(eb, role, anchored, cand, exclude, T, cap, opts) -> Optional[LoopRegion]:
    try:
        if role == "G":
            other = integrate_through(eb.f, cand, T, T, rtol=opts.rtol, max_arclength=cap, branch="F")
            return construct_loop(eb, anchored.p[0], cand, exclude=exclude, psi=anchored, phi=other)
        other = integrate_through(eb.g, cand, T, T, rtol=opts.rtol, max_arclength=cap, branch="G")
        return construct_loop(eb, cand, anchored.p[0], exclude=exclude, psi=other, phi=anchored)
    except BranchLabError:
        return None


def construct_chaotic_set(
    eb: EulerBranching,
    cfg: PairConfiguration,
    opts: Optional[ChaosOptions] = None,
    variants: Sequence[str] = ("Arc", "Region"),
) -> ChaoticSetGeometry:
    """Build a chaotic set of one of the requested ``variants``.

    Arcs are searched among the segment between the singular points, the
    rays beyond them and the manifold branches of any saddle.  Regions are
    searched with a seed ladder of offsets perpendicular to the other
    branch's vector at each singular point.

    Raises
    ------
    ConstructionFailed
        When no variant could be built and validated.
    """
    opts = opts or ChaosOptions()
    for v in variants:
        geo = _build_arc(eb, cfg, opts) if v == "Arc" else _build_region(eb, cfg, opts)
        if geo is not None:
            return geo
    raise ConstructionFailed(f"no {' or '.join(variants)} chaotic set found")


# -- certification ------------------------------------------------------------


def unbounded_proxy(eb: EulerBranching, cfg: PairConfiguration, delta_frac: float = 0.25, t_max: float = 200.0) -> dict:
    """Does the other branch's trajectory through each singular point leave its ball?

    The radius is ``delta_frac`` times the separation of the singular points;
    both time directions must exit.
    """
    delta = delta_frac * cfg.separation
    out = {"delta": delta}
    for label, sp, other in (("g_through_f_point", cfg.sp_f, eb.g), ("f_through_g_point", cfg.sp_g, eb.f)):
        c = sp.location
        ev = EventSpec(lambda _t, p, c=c: float(np.hypot(p[0] - c[0], p[1] - c[1])) - delta, "rising", True)
        ok = True
        for sgn in (1.0, -1.0):
            try:
                if sgn > 0:
                    tr, hits = integrate_until(other, c, 0.0, [ev], t_max)
                else:
                    tr, hits = integrate_backward_until(other, c, 0.0, [ev], -t_max)
                left = bool(hits) or tr.domain_exit
            except BranchLabError:
                left = False
            ok = ok and left
        out[label] = ok
    out["passed"] = bool(out["g_through_f_point"] and out["f_through_g_point"])
    return out


def _flags(devaney: bool, ly: bool) -> Dict[str, bool]:
    return {"devaney": devaney, "li_yorke": ly, "distributional": ly}


def certify(
    eb: EulerBranching,
    config: Optional[PairConfiguration] = None,
    opts: Optional[ChaosOptions] = None,
) -> ChaosCertificate:
    """Certify chaos of the inclusion from the decision tables.

    Never raises for scope violations: non-hyperbolic kinds, coincident
    singular points, configuration errors and construction failures are
    returned as refusals with all flags false.
    """
    opts = opts or ChaosOptions()
    checks: Dict = {}
    props = eb.meta.get("properties")
    if props is not None and not props.passed:
        checks["properties_failed"] = props.failed()
    if config is None:
        try:
            config = detect_configuration(eb, opts=opts, strict=False)
        except ConfigurationError as exc:
            return ChaosCertificate(None, None, _flags(False, False), {}, (f"{exc.reason}: {exc}",), checks)
    refusals = []
    if not config.distinct:
        refusals.append(f"CoincidentEquilibria: separation {config.separation:.3e}")
    for name, sp in (("f", config.sp_f), ("g", config.sp_g)):
        if not sp.kind.hyperbolic:
            refusals.append(f"NonHyperbolic: branch {name} singular point is {sp.kind.value}")
    if refusals:
        return ChaosCertificate(config, None, _flags(False, False), {}, tuple(refusals), checks)
    row = table_row(config)
    provenance = row.to_dict()
    checks["unbounded_proxy"] = unbounded_proxy(eb, config, opts.delta_frac)
    order = [v for v in ("Arc", "Region") if v in row.variants]
    try:
        geo = construct_chaotic_set(eb, config, opts, order)
    except ConstructionFailed as exc:
        return ChaosCertificate(config, None, _flags(False, False), provenance, (f"ConstructionFailed: {exc}",), checks)
    provenance["variant"] = geo.variant
    provenance["note"] = "Li-Yorke and distributional chaos follow from the same results and are set jointly"
    ly = geo.variant == "Region" or geo.theta_checked
    if geo.variant == "Region":
        checks["junction_mismatch"] = geo.loop.junction_mismatch
    checks["solution_count"] = len(geo.solutions)
    return ChaosCertificate(config, geo, _flags(True, ly), provenance, (), checks)


# -- diagnostics --------------------------------------------------------------


def scrambled_diagnostic(
    sol_a: SwitchedSolution,
    sol_b: SwitchedSolution,
    horizon: Optional[float] = None,
    eps: float = 1e-3,
    n: int = 10_000,
) -> Dict[str, float]:
    """Distance statistics between two solutions on a uniform time grid."""
    h = min(sol_a.t_end, sol_b.t_end)
    if horizon is not None:
        h = min(h, horizon)
    ts = np.linspace(0.0, h, n)
    dist = np.linalg.norm(sol_a(ts) - sol_b(ts), axis=1)
    return {
        "min_dist": float(dist.min()),
        "max_dist": float(dist.max()),
        "fraction_below_eps": float(np.mean(dist < eps)),
    }


@dataclass(frozen=True)
class InvarianceReport:
    inside_fraction: Tuple[float, ...]
    covered_fraction: Tuple[float, ...]
    uncovered_cells: Tuple[int, ...]
    region_cells: int
    passed: bool

    def to_dict(self) -> dict:
        return {
            "inside_fraction": list(self.inside_fraction),
            "covered_fraction": list(self.covered_fraction),
            "uncovered_cells": list(self.uncovered_cells),
            "region_cells": self.region_cells,
            "passed": self.passed,
        }


def invariance_and_density_report(
    sols: Sequence[SwitchedSolution],
    geometry,
    *,
    n_samples: int = 1000,
    grid: int = 50,
    boundary_tol: float = 1e-6,
) -> InvarianceReport:
    """Inside-fraction of each solution and its coverage of a grid over the region.

    Cells count only when their centre lies in the region.  Passes when
    every solution stays inside and at least one leaves a cell uncovered;
    fewer than two solutions fail.
    """
    loop = geometry.loop if isinstance(geometry, ChaoticSetGeometry) else geometry
    V = loop.polygon
    bb = loop.bbox
    xe = np.linspace(bb.x0, bb.x1, grid + 1)
    ye = np.linspace(bb.y0, bb.y1, grid + 1)
    cx = 0.5 * (xe[:-1] + xe[1:])
    cy = 0.5 * (ye[:-1] + ye[1:])
    CX, CY = np.meshgrid(cx, cy)
    in_region = winding_inside(np.column_stack((CX.ravel(), CY.ravel())), V).reshape(grid, grid)
    n_cells = int(in_region.sum())
    inside, covered, uncovered = [], [], []
    for sol in sols:
        _, P = sol.sample(n_samples)
        ins = winding_inside(P, V, boundary_tol)
        inside.append(float(ins.mean()))
        _, Pd = sol.sample(max(n_samples, 20_000))
        i = np.clip(np.searchsorted(xe, Pd[:, 0], side="right") - 1, 0, grid - 1)
        j = np.clip(np.searchsorted(ye, Pd[:, 1], side="right") - 1, 0, grid - 1)
        hit = np.zeros((grid, grid), dtype=bool)
        hit[j, i] = True
        cov = int((hit & in_region).sum())
        covered.append(cov / n_cells if n_cells else 0.0)
        uncovered.append(n_cells - cov)
    passed = len(sols) >= 2 and all(f == 1.0 for f in inside) and any(u >= 1 for u in uncovered)
    return InvarianceReport(tuple(inside), tuple(covered), tuple(uncovered), n_cells, passed)
