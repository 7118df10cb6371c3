"""The two-branch inclusion, switched solutions and loop-region constructions."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import minimize

from .errors import InvalidSchedule, NeedTwoCrossings, NoCrossing, SameTrajectory
from .fields import PlanarField, Rect, as_point
from .integrate import Crossing, Trajectory, integrate, integrate_through, intersect_trajectories, trajectories_to_csv

__all__ = [
    "EulerBranching",
    "BranchingReport",
    "SwitchingSchedule",
    "SwitchedSolution",
    "SimplePath",
    "LoopRegion",
    "validate_branching",
    "solve_switched",
    "construct_loop",
    "build_gamma0",
    "build_gamma_xj",
    "gamma1_family",
    "build_simple_path",
    "polygonize",
    "winding_inside",
]


@dataclass(frozen=True)
class EulerBranching:
    """Inclusion ``x' in {f(x), g(x)}`` over a rectangular domain."""

    f: PlanarField
    g: PlanarField
    domain: Rect
    branching_check: int = 200
    meta: Dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        # both branches integrate inside the common domain
        object.__setattr__(self, "f", self.f.with_domain(self.domain))
        object.__setattr__(self, "g", self.g.with_domain(self.domain))

    def branch(self, label: str) -> PlanarField:
        if label == "F":
            return self.f
        if label == "G":
            return self.g
        raise ValueError(f"branch label must be 'F' or 'G', got {label!r}")

    @property
    def scale(self) -> float:
        return self.domain.diagonal


@dataclass(frozen=True)
class BranchingReport:
    min_gap: float
    argmin: np.ndarray
    passed: bool
    grid: int
    refined_min: float
    refined_argmin: np.ndarray

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "min_gap": self.min_gap,
            "argmin": [float(v) for v in self.argmin],
            "grid": self.grid,
            "refined_min": self.refined_min,
            "refined_argmin": [float(v) for v in self.refined_argmin],
        }


def validate_branching(eb: EulerBranching, grid: Optional[int] = None) -> BranchingReport:
    """Check ``f != g`` on a ``grid x grid`` lattice over the domain.

    The pass criterion is the lattice minimum of ``|f - g|`` being positive.
    A local minimisation started at the lattice argmin is reported alongside
    (``refined_min``) so isolated coincidence points between lattice nodes
    are visible; it does not affect ``passed``.
    """
    n = eb.branching_check if grid is None else grid
    X, Y = eb.domain.grid(n)
    fu, fv = eb.f.eval_grid(X, Y)
    gu, gv = eb.g.eval_grid(X, Y)
    gap = np.hypot(fu - gu, fv - gv)
    k = int(np.nanargmin(gap))
    j, i = np.unravel_index(k, gap.shape)
    p = np.array([X[j, i], Y[j, i]])
    min_gap = float(gap[j, i])

    d = eb.domain

    def obj(q):
        return float(np.sum((eb.f(q) - eb.g(q)) ** 2))

    res = minimize(obj, p, method="Nelder-Mead", options={"xatol": 1e-12, "fatol": 1e-24, "maxiter": 2000})
    q = res.x if d.contains(res.x) else p
    refined = math.sqrt(obj(q))
    return BranchingReport(min_gap, p, bool(min_gap > 0.0), n, min(refined, min_gap), q)


@dataclass(frozen=True)
class SwitchingSchedule:
    """Active branch at ``t = 0`` and the instants at which it toggles."""

    start: str = "F"
    times: Tuple[float, ...] = ()

    def __post_init__(self):
        if self.start not in ("F", "G"):
            raise InvalidSchedule(f"start must be 'F' or 'G', got {self.start!r}")
        times = tuple(float(t) for t in self.times)
        object.__setattr__(self, "times", times)
        prev = 0.0
        for t in times:
            if not math.isfinite(t) or t <= prev:
                raise InvalidSchedule("switch times must be positive and strictly increasing")
            prev = t

    def branch_at(self, index: int) -> str:
        """Branch active on the ``index``-th interval."""
        other = "G" if self.start == "F" else "F"
        return self.start if index % 2 == 0 else other

    def intervals(self, horizon: float):
        edges = [0.0] + [t for t in self.times if t < horizon] + [horizon]
        for k in range(len(edges) - 1):
            yield self.branch_at(k), edges[k], edges[k + 1]

    def to_json(self) -> str:
        return json.dumps({"start": self.start, "times": list(self.times)})

    @classmethod
    def from_json(cls, text: str) -> "SwitchingSchedule":
        obj = json.loads(text)
        return cls(obj.get("start", "F"), tuple(obj.get("times", ())))


@dataclass(frozen=True)
class SwitchedSolution:
    """A solution of the inclusion: contiguous arcs of alternating branches."""

    x0: np.ndarray
    schedule: SwitchingSchedule
    arcs: Tuple[Trajectory, ...]
    horizon: float
    domain_exit: bool = False
    meta: Dict = field(default_factory=dict)

    @property
    def t_end(self) -> float:
        return self.arcs[-1].t_end

    def __call__(self, t):
        """Position(s) at time(s) ``t``."""
        t_arr = np.atleast_1d(np.asarray(t, dtype=float))
        out = np.empty(t_arr.shape + (2,))
        starts = np.array([a.t_start for a in self.arcs])
        idx = np.clip(np.searchsorted(starts, t_arr, side="right") - 1, 0, len(self.arcs) - 1)
        for k in np.unique(idx):
            mask = idx == k
            arc = self.arcs[k]
            out[mask] = arc(np.clip(t_arr[mask], arc.t_start, arc.t_end))
        return out[0] if np.ndim(t) == 0 else out

    def sample(self, n: int = 10_000, horizon: Optional[float] = None) -> Tuple[np.ndarray, np.ndarray]:
        h = self.t_end if horizon is None else min(horizon, self.t_end)
        ts = np.linspace(0.0, h, n)
        return ts, self(ts)

    def switch_jumps(self) -> List[float]:
        return [float(np.linalg.norm(a.end - b.start)) for a, b in zip(self.arcs, self.arcs[1:])]

    def to_csv(self) -> str:
        return trajectories_to_csv(self.arcs)


@dataclass(frozen=True)
class SimplePath:
    a: np.ndarray
    b: np.ndarray
    arcs: Tuple[Tuple[str, Trajectory], ...]
    discontinuity_count: int

    @property
    def endpoint_error(self) -> float:
        first = self.arcs[0][1]
        last = self.arcs[-1][1]
        return max(float(np.linalg.norm(first.start - self.a)), float(np.linalg.norm(last.end - self.b)))

    @property
    def duration(self) -> float:
        return float(sum(tr.t_end - tr.t_start for _, tr in self.arcs))

    def points(self) -> np.ndarray:
        return np.vstack([tr.p for _, tr in self.arcs])

    def clearance(self, margin: float = 0.01) -> float:
        """Distance from the path interior to ``a`` and ``b``.

        Samples within ``margin * duration`` of the start are ignored for
        ``a`` and near the end for ``b``.
        """
        tau = margin * self.duration
        ts, ps, elapsed = [], [], 0.0
        for _, tr in self.arcs:
            ts.append(tr.t - tr.t_start + elapsed)
            ps.append(tr.p)
            elapsed += tr.t_end - tr.t_start
        t = np.concatenate(ts)
        p = np.vstack(ps)
        da = np.linalg.norm(p[t >= tau] - self.a, axis=1)
        db = np.linalg.norm(p[t <= elapsed - tau] - self.b, axis=1)
        vals = [float(x.min()) for x in (da, db) if x.size]
        return min(vals) if vals else math.inf


def polygonize(traj: Trajectory, sag_tol: float) -> np.ndarray:
    """Polyline through ``traj`` whose chord sag stays below ``sag_tol``."""
    pts = [traj.p[0]]
    for k in range(len(traj) - 1):
        t0, t1 = traj.t[k], traj.t[k + 1]
        mid = traj(0.5 * (t0 + t1))
        chord_mid = 0.5 * (traj.p[k] + traj.p[k + 1])
        dev = float(np.linalg.norm(mid - chord_mid))
        if dev > sag_tol:
            m = int(math.ceil(math.sqrt(dev / sag_tol)))
            inner = np.linspace(t0, t1, m + 1)[1:-1]
            pts.extend(traj(inner))
        pts.append(traj.p[k + 1])
    return np.array(pts)


def _point_segment_distance(P: np.ndarray, V: np.ndarray) -> np.ndarray:
    """Distance from each point in ``P`` to the closed polyline ``V``."""
    A = V
    B = np.roll(V, -1, axis=0)
    AB = B - A
    L2 = np.maximum(np.sum(AB * AB, axis=1), 1e-300)
    out = np.full(len(P), np.inf)
    for s in range(0, len(P), 256):
        Q = P[s : s + 256, None, :]
        u = np.clip(np.sum((Q - A[None]) * AB[None], axis=2) / L2[None], 0.0, 1.0)
        C = A[None] + u[..., None] * AB[None]
        out[s : s + 256] = np.sqrt(np.min(np.sum((Q - C) ** 2, axis=2), axis=1))
    return out


def winding_inside(P, V: np.ndarray, boundary_tol: float = 0.0) -> np.ndarray:
    """Winding-number test of points ``P`` against closed polygon ``V``.

    Points within ``boundary_tol`` of the polygon count as inside.
    """
    P = np.atleast_2d(np.asarray(P, dtype=float))
    A = V
    B = np.roll(V, -1, axis=0)
    wn = np.zeros(len(P), dtype=int)
    for s in range(0, len(P), 256):
        Q = P[s : s + 256, None, :]
        ay = A[None, :, 1] - Q[..., 1]
        by = B[None, :, 1] - Q[..., 1]
        cross = (A[None, :, 0] - Q[..., 0]) * (B[None, :, 1] - Q[..., 1]) - (B[None, :, 0] - Q[..., 0]) * (
            A[None, :, 1] - Q[..., 1]
        )
        up = (ay <= 0) & (by > 0) & (cross > 0)
        down = (ay > 0) & (by <= 0) & (cross < 0)
        wn[s : s + 256] = np.sum(up, axis=1) - np.sum(down, axis=1)
    inside = wn != 0
    if boundary_tol > 0:
        near = _point_segment_distance(P, V) <= boundary_tol
        inside |= near
    return inside


@dataclass(frozen=True)
class LoopRegion:
    """Jordan region bounded by one f-arc (z1 -> z2) and one g-arc (z2 -> z1)."""

    boundary: SimplePath
    z1: np.ndarray
    z2: np.ndarray
    polygon: np.ndarray
    phi: Trajectory
    psi: Trajectory
    t1: float
    t2: float
    s1: float
    s2: float
    junction_mismatch: float

    @property
    def phi_arc(self) -> Trajectory:
        return self.boundary.arcs[0][1]

    @property
    def psi_arc(self) -> Trajectory:
        return self.boundary.arcs[1][1]

    @property
    def bbox(self) -> Rect:
        lo = self.polygon.min(axis=0)
        hi = self.polygon.max(axis=0)
        return Rect(lo[0], lo[1], hi[0], hi[1])

    @property
    def diameter(self) -> float:
        V = self.polygon
        step = max(1, len(V) // 400)
        W = V[::step]
        d = np.sqrt(np.sum((W[:, None, :] - W[None, :, :]) ** 2, axis=2))
        return float(d.max())

    @property
    def area(self) -> float:
        x, y = self.polygon[:, 0], self.polygon[:, 1]
        return 0.5 * abs(float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1))))

    def contains(self, P, boundary_tol: float = 0.0):
        res = winding_inside(P, self.polygon, boundary_tol)
        return bool(res[0]) if np.ndim(P) == 1 else res

    def interior_point(self, n: int = 60) -> np.ndarray:
        """A lattice point deep inside the region (largest boundary clearance)."""
        bb = self.bbox
        X, Y = bb.grid(n)
        P = np.column_stack((X.ravel(), Y.ravel()))
        ins = winding_inside(P, self.polygon)
        P = P[ins]
        if len(P) == 0:
            raise NeedTwoCrossings("loop region has no interior lattice point")
        d = _point_segment_distance(P, self.polygon)
        return P[int(np.argmax(d))]

    def simple_polygon(self) -> bool:
        """True when no two non-adjacent polygon edges intersect."""
        V = self.polygon
        n = len(V)
        step = max(1, n // 1500)
        W = V[::step]
        if not np.allclose(W[-1], V[-1]):
            W = np.vstack((W, V[-1]))
        A = W
        B = np.roll(W, -1, axis=0)
        m = len(A)
        for i in range(m):
            p, r = A[i], B[i] - A[i]
            q = A
            s = B - A
            den = r[0] * s[:, 1] - r[1] * s[:, 0]
            d = q - p
            with np.errstate(divide="ignore", invalid="ignore"):
                u = (d[:, 0] * s[:, 1] - d[:, 1] * s[:, 0]) / den
                v = (d[:, 0] * r[1] - d[:, 1] * r[0]) / den
            hit = (den != 0) & (u > 1e-9) & (u < 1 - 1e-9) & (v > 1e-9) & (v < 1 - 1e-9)
            idx = np.nonzero(hit)[0]
            idx = idx[(np.abs(idx - i) > 1) & (np.abs(idx - i) < m - 1)]
            if idx.size:
                return False
        return True


def _snap(tr: Trajectory, start: np.ndarray, end: np.ndarray) -> Trajectory:
    p = tr.p.copy()
    p[0] = start
    p[-1] = end
    return replace(tr, p=p)


def _time_cap(eb: EulerBranching) -> float:
    return 200.0


def construct_loop(
    eb: EulerBranching,
    psi_seed,
    phi_seed,
    *,
    t_cap: Optional[float] = None,
    rtol: float = 1e-9,
    min_separation: Optional[float] = None,
    exclude: Sequence = (),
    psi: Optional[Trajectory] = None,
    phi: Optional[Trajectory] = None,
) -> LoopRegion:
    """Loop bounded by the g-trajectory through ``psi_seed`` and the
    f-trajectory through ``phi_seed``.

    Both trajectories are integrated in both time directions until they
    leave the domain (or ``t_cap``).  Among pairs of consecutive crossings
    along the f-trajectory, ``z1 = phi(t1) = psi(s2)`` and
    ``z2 = phi(t2) = psi(s1)`` with ``t1 < t2`` and ``s1 < s2``, the pair
    enclosing the largest area is kept; regions containing any point of
    ``exclude`` (typically the equilibria) are skipped.

    Raises
    ------
    NeedTwoCrossings
        If no admissible pair of transversal crossings exists.
    """
    T = _time_cap(eb) if t_cap is None else t_cap
    if psi is None:
        psi = integrate_through(eb.g, psi_seed, T, T, rtol=rtol, branch="G")
    if phi is None:
        phi = integrate_through(eb.f, phi_seed, T, T, rtol=rtol, branch="F")
    scale = eb.scale
    min_sep = 1e-4 * scale if min_separation is None else min_separation
    speed_floor = 1e-7 * scale
    crossings = [
        c
        for c in intersect_trajectories(phi, psi, tol=1e-11 * (1 + scale))
        if np.linalg.norm(eb.f(c.p)) > speed_floor and np.linalg.norm(eb.g(c.p)) > speed_floor
    ]
    if len(crossings) < 2:
        raise NeedTwoCrossings(f"found {len(crossings)} transversal crossing(s)")
    sag = 1e-6 * scale
    best = None
    for c1, c2 in zip(crossings, crossings[1:]):
        if not c1.tb > c2.tb:
            continue
        if np.linalg.norm(c1.p - c2.p) < min_sep:
            continue
        loop = _assemble_loop(phi, psi, c1, c2, sag)
        if any(loop.contains(as_point(q)) for q in exclude):
            continue
        if best is None or loop.area > best.area:
            best = loop
    if best is None:
        raise NeedTwoCrossings("no crossing pair bounds an admissible region")
    return best


def _assemble_loop(phi, psi, c1: Crossing, c2: Crossing, sag: float) -> LoopRegion:
    t1, t2 = c1.ta, c2.ta
    s1, s2 = c2.tb, c1.tb
    mismatch = max(float(np.linalg.norm(phi(t1) - psi(s2))), float(np.linalg.norm(phi(t2) - psi(s1))))
    z1, z2 = c1.p, c2.p
    phi_arc = _snap(phi.segment(t1, t2), z1, z2)
    psi_arc = _snap(psi.segment(s1, s2), z2, z1)
    poly = np.vstack((polygonize(phi_arc, sag)[:-1], polygonize(psi_arc, sag)[:-1]))
    boundary = SimplePath(z1, z1, (("F", phi_arc), ("G", psi_arc)), 1)
    return LoopRegion(boundary, z1, z2, poly, phi, psi, t1, t2, s1, s2, mismatch)


def solve_switched(
    eb: EulerBranching,
    x0,
    schedule: SwitchingSchedule,
    horizon: float,
    *,
    rtol: float = 1e-9,
    atol: float = 1e-12,
    max_step: Optional[float] = None,
    meta: Optional[dict] = None,
    confine: bool = True,
) -> SwitchedSolution:
    """Integrate the active branch between consecutive switch instants.

    Switching is instantaneous and keeps the position.  With ``confine``
    (the default) an arc leaving the domain ends the run and the partial
    solution is returned with ``domain_exit`` set; otherwise the fields are
    integrated on the whole plane.
    """
    x = as_point(x0)
    if not horizon > 0:
        raise ValueError("horizon must be positive")
    arcs = []
    exited = False
    for label, ta, tb in schedule.intervals(horizon):
        if tb <= ta:
            continue
        fld = eb.branch(label) if confine else eb.branch(label).with_domain(None)
        tr = integrate(fld, x, ta, tb, rtol=rtol, atol=atol, max_step=max_step, branch=label)
        arcs.append(tr)
        x = tr.end
        if tr.domain_exit:
            exited = True
            break
    return SwitchedSolution(as_point(x0), schedule, tuple(arcs), float(horizon), exited, dict(meta or {}))


class _Passage:
    """Entry/exit of the f-trajectory through a point across the loop's g-arc."""

    def __init__(self, eb: EulerBranching, loop: LoopRegion, x, rtol: float):
        self.x = as_point(x)
        T = _time_cap(eb)
        self.traj = integrate_through(eb.f, self.x, T, T, rtol=rtol, branch="F")
        lo, hi = loop.s1, loop.s2
        span = hi - lo
        tol = 1e-9 * (1 + abs(span))
        cands = [
            c
            for c in intersect_trajectories(self.traj, loop.psi, tol=1e-11 * (1 + eb.scale))
            if lo - tol <= c.tb <= hi + tol
        ]
        # crossing at the start point itself counts as the forward hit (T1 = 0)
        eps_t = 1e-9
        fwd = [c for c in cands if c.ta >= -eps_t]
        if not fwd:
            raise NoCrossing(f"f-trajectory from {self.x} does not reach the g-boundary arc")
        self.fg = min(fwd, key=lambda c: c.ta)
        back = [c for c in cands if c.ta < self.fg.ta - eps_t * (1 + abs(self.fg.ta)) and c.ta <= eps_t]
        if not back and abs(self.fg.ta) <= eps_t:
            # x sits on the g-arc where its f-trajectory enters: it is its own entry point
            later = [c for c in fwd if c.ta > eps_t]
            if later:
                back = [self.fg]
                self.fg = min(later, key=lambda c: c.ta)
        if not back:
            raise NoCrossing(f"backward f-trajectory from {self.x} does not reach the g-boundary arc")
        self.gf = max(back, key=lambda c: c.ta)
        self.t_fg = 0.0 if abs(self.fg.ta) <= eps_t else self.fg.ta
        self.t_gf = self.gf.ta
        self.s_fg = self.fg.tb
        self.s_gf = self.gf.tb

    @property
    def t_phi(self) -> float:
        """f-time from the entry point to the exit point."""
        return self.t_fg - self.t_gf


def build_gamma0(
    eb: EulerBranching,
    loop: LoopRegion,
    x0,
    *,
    periods: int = 10,
    rtol: float = 1e-9,
):
    """Periodic switched solution through ``x0`` inside ``loop``.

    Follows f from ``x0`` to the g-arc (time ``T1``), the g-arc back to the
    entry point of that f-trajectory (``T_psi``) and f again (``T_phi``).
    Switch instants are ``T_{2k} = T1 + (k-1) T_phi + k T_psi`` and
    ``T_{2k+1} = T1 + k T_phi + k T_psi``.  Returns ``(solution, period)``;
    the construction times are in ``solution.meta``.
    """
    ps = _Passage(eb, loop, x0, rtol)
    T1 = ps.t_fg
    T_phi = ps.t_phi
    T_psi = ps.s_gf - ps.s_fg
    if not (T_psi > 0 and T_phi > 0):
        raise NoCrossing("g-arc orientation does not close the cycle through x0")
    period = T_phi + T_psi
    times = gamma0_times(T1, T_phi, T_psi, periods)
    start = "F"
    if T1 == 0.0:
        # starting on the g-arc: the first switch happens at t = 0
        start = "G"
        times = [t for t in times if t > 0.0]
    sched = SwitchingSchedule(start, tuple(times))
    horizon = T1 + periods * period
    meta = {"T1": T1, "T_phi": T_phi, "T_psi": T_psi, "period": period, "x0fg": ps.fg.p, "x0gf": ps.gf.p}
    sol = solve_switched(eb, ps.x, sched, horizon, rtol=rtol, meta=meta)
    return sol, period


def gamma0_times(T1: float, T_phi: float, T_psi: float, periods: int) -> List[float]:
    """Switch instants ``T_1 .. T_{2 periods + 1}`` of the periodic solution."""
    times = [T1]
    for k in range(1, periods + 1):
        times.append(T1 + (k - 1) * T_phi + k * T_psi)
        times.append(T1 + k * T_phi + k * T_psi)
    return times


def gamma_xj_times(T1, T_psi_0j, T_phi_j, T_psi_j0, T_phi_0, periods: int) -> List[float]:
    times = [T1]
    for k in range(1, periods + 1):
        times.append(T1 + k * T_psi_0j + (k - 1) * T_phi_j + (k - 1) * T_psi_j0 + (k - 1) * T_phi_0)
        times.append(T1 + k * T_psi_0j + k * T_phi_j + (k - 1) * T_psi_j0 + (k - 1) * T_phi_0)
        times.append(T1 + k * T_psi_0j + k * T_phi_j + k * T_psi_j0 + (k - 1) * T_phi_0)
        times.append(T1 + k * T_psi_0j + k * T_phi_j + k * T_psi_j0 + k * T_phi_0)
    return times


def build_gamma_xj(
    eb: EulerBranching,
    loop: LoopRegion,
    x0,
    xj,
    *,
    periods: int = 10,
    rtol: float = 1e-9,
    same_tol: Optional[float] = None,
) -> SwitchedSolution:
    """Switched solution alternating between the f-trajectories of ``x0`` and ``xj``.

    Cycle: f from ``x0`` to the g-arc, g to the entry of ``xj``'s
    f-trajectory, f through ``xj`` back to the g-arc, g to the entry of
    ``x0``'s f-trajectory, f through ``x0``; repeated.

    Raises
    ------
    SameTrajectory
        If ``xj`` lies on the f-trajectory through ``x0``.
    """
    p0 = _Passage(eb, loop, x0, rtol)
    pj = _Passage(eb, loop, xj, rtol)
    tol = 1e-7 * (1 + eb.scale) if same_tol is None else same_tol
    if np.linalg.norm(p0.fg.p - pj.fg.p) <= tol or np.linalg.norm(p0.x - pj.x) <= tol:
        raise SameTrajectory("xj lies on the f-trajectory through x0")
    T1 = p0.t_fg
    T_psi_0j = pj.s_gf - p0.s_fg
    T_phi_j = pj.t_phi
    T_psi_j0 = p0.s_gf - pj.s_fg
    T_phi_0 = p0.t_phi
    if min(T_psi_0j, T_phi_j, T_psi_j0, T_phi_0) <= 0:
        raise NoCrossing("g-arc order does not admit the four-segment cycle")
    period = T_psi_0j + T_phi_j + T_psi_j0 + T_phi_0
    times = gamma_xj_times(T1, T_psi_0j, T_phi_j, T_psi_j0, T_phi_0, periods)
    start = "F"
    if T1 == 0.0:
        start = "G"
        times = [t for t in times if t > 0.0]
    meta = {
        "T1": T1,
        "T_psi_0j": T_psi_0j,
        "T_phi_j": T_phi_j,
        "T_psi_j0": T_psi_j0,
        "T_phi_0": T_phi_0,
        "period": period,
        "xj": pj.x,
    }
    sched = SwitchingSchedule(start, tuple(times))
    return solve_switched(eb, p0.x, sched, T1 + periods * period, rtol=rtol, meta=meta)


def gamma1_family(
    eb: EulerBranching,
    loop: LoopRegion,
    x0,
    n: int = 8,
    *,
    periods: int = 10,
    rtol: float = 1e-9,
) -> List[SwitchedSolution]:
    """``n`` representatives of the uncountable family indexed by ``xj``.

    Points ``xj`` are taken on the segment from ``x0`` towards the middle of
    the f-boundary arc, skipping any that share ``x0``'s f-trajectory.
    """
    x0 = as_point(x0)
    mid_phi = loop.phi_arc((loop.phi_arc.t_start + loop.phi_arc.t_end) / 2)
    mid_psi = loop.psi_arc((loop.psi_arc.t_start + loop.psi_arc.t_end) / 2)
    out = []
    fracs = np.linspace(0.15, 0.85, max(n, 1) + 2)[1:-1]
    for target in (mid_phi, mid_psi):
        for fr in fracs:
            if len(out) >= n:
                break
            xj = x0 + fr * (target - x0)
            if not loop.contains(xj):
                continue
            try:
                out.append(build_gamma_xj(eb, loop, x0, xj, periods=periods, rtol=rtol))
            except (SameTrajectory, NoCrossing):
                continue
    return out


def build_simple_path(eb: EulerBranching, a, b, loop: LoopRegion, *, rtol: float = 1e-9) -> SimplePath:
    """Simple path from ``a`` to ``b`` generated by switched solutions in ``loop``.

    ``a == b`` yields the closed path a -> g-arc -> a.  When ``b`` is
    downstream of ``a`` on one f-trajectory the path is that single arc.
    Otherwise the path runs f to the g-arc, along it to the entry point of
    ``b``'s f-trajectory and along f to ``b``; when the g-arc order requires
    it, the path detours once around the f-boundary arc.
    """
    a = as_point(a)
    b = as_point(b)
    pa = _Passage(eb, loop, a, rtol)
    same_tol = 1e-7 * (1 + eb.scale)

    def f_arc(ps: _Passage, t_from: float, t_to: float):
        return ("F", ps.traj.segment(t_from, t_to))

    def g_arc(s_from: float, s_to: float):
        return ("G", loop.psi.segment(s_from, s_to))

    if np.linalg.norm(a - b) <= same_tol:
        arcs = [f_arc(pa, 0.0, pa.t_fg), g_arc(pa.s_fg, pa.s_gf), f_arc(pa, pa.t_gf, 0.0)]
        if pa.t_fg == 0.0:
            arcs = arcs[1:]
        return _chain(a, b, arcs)
    pb = _Passage(eb, loop, b, rtol)
    if np.linalg.norm(pa.fg.p - pb.fg.p) <= same_tol:
        # b on a's f-trajectory: locate b's time along a's trajectory
        tb = _time_on(pa.traj, b)
        if tb > 0.0 and tb <= pa.t_fg + 1e-12:
            return _chain(a, b, [f_arc(pa, 0.0, tb)])
        arcs = [f_arc(pa, 0.0, pa.t_fg), g_arc(pa.s_fg, pa.s_gf), f_arc(pa, pa.t_gf, tb)]
        if pa.t_fg == 0.0:
            arcs = arcs[1:]
        return _chain(a, b, arcs)
    first = [f_arc(pa, 0.0, pa.t_fg)] if pa.t_fg > 0.0 else []
    last = [f_arc(pb, pb.t_gf, 0.0)]
    if pb.s_gf > pa.s_fg:
        arcs = first + [g_arc(pa.s_fg, pb.s_gf)] + last
    else:
        # ride the g-arc to z1, the f-boundary to z2, then the g-arc again
        phi_arc = loop.phi.segment(loop.t1, loop.t2)
        arcs = first + [g_arc(pa.s_fg, loop.s2), ("F", phi_arc), g_arc(loop.s1, pb.s_gf)] + last
    return _chain(a, b, arcs)


def _time_on(traj: Trajectory, q: np.ndarray) -> float:
    d = np.linalg.norm(traj.p - q, axis=1)
    k = int(np.argmin(d))
    lo = traj.t[max(k - 1, 0)]
    hi = traj.t[min(k + 1, len(traj) - 1)]
    from scipy.optimize import minimize_scalar

    res = minimize_scalar(lambda t: float(np.sum((traj(t) - q) ** 2)), bounds=(lo, hi), method="bounded",
                          options={"xatol": 1e-13})
    return float(res.x)


def _chain(a, b, arcs) -> SimplePath:
    """Stitch arcs end to end in time and snap the path endpoints."""
    out = []
    elapsed = 0.0
    for label, tr in arcs:
        if tr.t_end - tr.t_start <= 0:
            continue
        out.append((label, tr.shifted(elapsed - tr.t_start)))
        elapsed += tr.t_end - tr.t_start
    lab0, tr0 = out[0]
    out[0] = (lab0, _snap(tr0, a, tr0.end))
    labn, trn = out[-1]
    out[-1] = (labn, _snap(trn, trn.start, b))
    return SimplePath(a, b, tuple(out), len(out) - 1)
