"""Single-branch time stepping, event location and trajectory intersection.

The stepper is the Dormand-Prince 5(4) embedded pair with a PI step-size
controller.  Trajectories store the derivative at every sample so they can
be evaluated between samples by cubic Hermite interpolation.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field, replace
from typing import Callable, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from .errors import NonFinite, StepUnderflow
from .fields import PlanarField, Rect, as_point

__all__ = [
    "Trajectory",
    "EventSpec",
    "EventHit",
    "Crossing",
    "integrate",
    "integrate_until",
    "integrate_through",
    "intersect_trajectories",
    "trajectories_to_csv",
]

# Dormand-Prince tableau
_C = (0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0)
_A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
    (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84),
)
_B = (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0)
_E = (
    71 / 57600,
    0.0,
    -71 / 16695,
    71 / 1920,
    -17253 / 339200,
    22 / 525,
    -1 / 40,
)


@dataclass(frozen=True)
class Trajectory:
    """Samples ``(t_k, p_k)`` of one branch with derivatives ``dp_k``.

    ``t`` is strictly increasing.  A trajectory integrated backward in time
    is stored in chronological order as well; ``t_origin`` records the time
    of the initial condition.
    """

    branch: str
    t: np.ndarray
    p: np.ndarray
    dp: np.ndarray
    t_origin: float = 0.0
    domain_exit: bool = False
    near_equilibrium: bool = False
    status: str = "complete"

    def __len__(self) -> int:
        return len(self.t)

    @property
    def t_start(self) -> float:
        return float(self.t[0])

    @property
    def t_end(self) -> float:
        return float(self.t[-1])

    @property
    def start(self) -> np.ndarray:
        return self.p[0]

    @property
    def end(self) -> np.ndarray:
        return self.p[-1]

    def _locate(self, tq):
        idx = np.searchsorted(self.t, tq, side="right") - 1
        return np.clip(idx, 0, len(self.t) - 2)

    def __call__(self, tq):
        """Hermite-interpolated position(s) at time(s) ``tq``."""
        tq_arr = np.asarray(tq, dtype=float)
        if len(self.t) == 1:
            return np.broadcast_to(self.p[0], tq_arr.shape + (2,)).copy()
        i = self._locate(tq_arr)
        t0 = self.t[i]
        h = self.t[i + 1] - t0
        s = ((tq_arr - t0) / h)[..., None]
        p0, p1 = self.p[i], self.p[i + 1]
        m0, m1 = self.dp[i] * h[..., None], self.dp[i + 1] * h[..., None]
        s2 = s * s
        s3 = s2 * s
        return (2 * s3 - 3 * s2 + 1) * p0 + (s3 - 2 * s2 + s) * m0 + (-2 * s3 + 3 * s2) * p1 + (s3 - s2) * m1

    def velocity(self, tq):
        """Derivative of the Hermite interpolant."""
        tq_arr = np.asarray(tq, dtype=float)
        if len(self.t) == 1:
            return np.broadcast_to(self.dp[0], tq_arr.shape + (2,)).copy()
        i = self._locate(tq_arr)
        t0 = self.t[i]
        h = self.t[i + 1] - t0
        s = ((tq_arr - t0) / h)[..., None]
        p0, p1 = self.p[i], self.p[i + 1]
        m0, m1 = self.dp[i] * h[..., None], self.dp[i + 1] * h[..., None]
        s2 = s * s
        d = (6 * s2 - 6 * s) * p0 + (3 * s2 - 4 * s + 1) * m0 + (-6 * s2 + 6 * s) * p1 + (3 * s2 - 2 * s) * m1
        return d / h[..., None]

    def segment(self, ta: float, tb: float) -> "Trajectory":
        """Sub-trajectory on ``[ta, tb]`` with interpolated endpoints."""
        ta, tb = float(ta), float(tb)
        if not (self.t[0] - 1e-12 <= ta < tb <= self.t[-1] + 1e-12):
            raise ValueError(f"segment [{ta}, {tb}] outside [{self.t[0]}, {self.t[-1]}]")
        ta = max(ta, self.t[0])
        tb = min(tb, self.t[-1])
        span = tb - ta
        inner = (self.t > ta + 1e-9 * span) & (self.t < tb - 1e-9 * span)
        t = np.concatenate(([ta], self.t[inner], [tb]))
        p = np.vstack((self(ta), self.p[inner], self(tb)))
        dp = np.vstack((self.velocity(ta), self.dp[inner], self.velocity(tb)))
        return replace(self, t=t, p=p, dp=dp, t_origin=ta, status="segment")

    def shifted(self, dt: float) -> "Trajectory":
        return replace(self, t=self.t + dt, t_origin=self.t_origin + dt)

    def arclength(self) -> float:
        return float(np.sum(np.linalg.norm(np.diff(self.p, axis=0), axis=1)))

    def rows(self):
        for tk, pk in zip(self.t, self.p):
            yield float(tk), float(pk[0]), float(pk[1]), self.branch

    def to_csv(self) -> str:
        return trajectories_to_csv([self])

    def to_json(self) -> str:
        return json.dumps([{"t": t, "x": x, "y": y, "branch": b} for t, x, y, b in self.rows()])


def trajectories_to_csv(trajs: Sequence[Trajectory]) -> str:
    """CSV with header ``t,x,y,branch``; shared switch samples are written once."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t", "x", "y", "branch"])
    last_t = None
    for traj in trajs:
        for t, x, y, b in traj.rows():
            if last_t is not None and t <= last_t:
                continue
            w.writerow([repr(t), repr(x), repr(y), b])
            last_t = t
    return buf.getvalue()


@dataclass(frozen=True)
class EventSpec:
    """Scalar event ``fn(t, p)``; ``direction`` is taken along the integration.

    ``"rising"`` fires when the value changes from negative to non-negative
    in the order the integrator visits the points, ``"falling"`` the
    reverse.
    """

    fn: Callable
    direction: str = "any"
    terminal: bool = False

    def __post_init__(self):
        if self.direction not in ("rising", "falling", "any"):
            raise ValueError(f"bad event direction {self.direction!r}")


class EventHit(NamedTuple):
    t: float
    p: np.ndarray
    spec_index: int


class Crossing(NamedTuple):
    p: np.ndarray
    ta: float
    tb: float


def _dp_step(f, t, y, fy, h):
    # scalar arithmetic: numpy overhead dominates for two components
    func = f.func
    x0, y0 = float(y[0]), float(y[1])
    ku = [float(fy[0])]
    kv = [float(fy[1])]
    for i in range(1, 7):
        xi, yi = x0, y0
        for a, u, v in zip(_A[i], ku, kv):
            if a:
                xi += h * a * u
                yi += h * a * v
        u, v = func(xi, yi)
        ku.append(float(u))
        kv.append(float(v))
    xn, yn, ex, ey = x0, y0, 0.0, 0.0
    for b, e, u, v in zip(_B, _E, ku, kv):
        xn += h * b * u
        yn += h * b * v
        ex += h * e * u
        ey += h * e * v
    return np.array((xn, yn)), np.array((ku[6], kv[6])), np.array((ex, ey))


def _fire(prev, cur, direction):
    if prev == 0.0 or not np.isfinite(prev) or not np.isfinite(cur):
        return False
    if direction == "rising":
        return prev < 0.0 <= cur
    if direction == "falling":
        return prev > 0.0 >= cur
    return (prev < 0.0 <= cur) or (prev > 0.0 >= cur)


def _refine(f, fn, t, y, fy, h, v0, tol_t):
    """Bisect on a re-integrated sub-step until the bracket is below tol_t."""
    lo, hi = 0.0, h
    p_hi = None
    while abs(hi - lo) > tol_t:
        mid = 0.5 * (lo + hi)
        p_mid, _, _ = _dp_step(f, t, y, fy, mid)
        v = fn(t + mid, p_mid)
        if (v < 0.0) == (v0 < 0.0) and v != 0.0:
            lo = mid
        else:
            hi, p_hi = mid, p_mid
            if v == 0.0:
                break
    if p_hi is None:
        p_hi, _, _ = _dp_step(f, t, y, fy, hi)
    return t + hi, p_hi


def _initial_step(f, t0, y0, f0, direction, rtol, atol, order=5):
    scale = atol + np.abs(y0) * rtol
    d0 = np.linalg.norm(y0 / scale) / math.sqrt(2)
    d1 = np.linalg.norm(f0 / scale) / math.sqrt(2)
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    y1 = y0 + h0 * direction * f0
    f1 = f(y1)
    d2 = np.linalg.norm((f1 - f0) / scale) / math.sqrt(2) / h0
    if d1 <= 1e-15 and d2 <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** (1.0 / (order + 1))
    # tiny |y0| with O(1) speed drives h0 toward |y0|/|f0|; error control rejects oversize steps
    return max(min(100 * h0, h1), 1e-8 * max(1.0, abs(t0)))


def _run(
    field: PlanarField,
    x0,
    t0: float,
    t_end: float,
    rtol: float,
    atol: float,
    max_step: Optional[float],
    domain: Optional[Rect],
    events: Sequence[EventSpec],
    max_arclength: Optional[float],
    near_tol: float,
    branch: Optional[str],
):
    y = as_point(x0)
    f = field
    if domain is None:
        domain = field.domain
    if domain is not None and not domain.contains(y, pad=1e-12 * domain.diagonal):
        raise ValueError(f"initial point {y} outside domain {domain}")
    if max_step is None:
        max_step = domain.diagonal / 50.0 if domain is not None else math.inf
    fy = f(y)
    if not np.all(np.isfinite(fy)):
        raise NonFinite(f"{field.name} non-finite at {y}")
    direction = 1.0 if t_end > t0 else -1.0
    t = float(t0)
    ts, ps, fs = [t], [y], [fy]
    hits: List[EventHit] = []
    ev_prev = [spec.fn(t, y) for spec in events]
    dom_prev = domain.margin(y) if domain is not None else None
    speed_floor = near_tol * 10.0
    near_eq = bool(np.linalg.norm(fy) <= speed_floor)
    arclen = 0.0
    h = min(_initial_step(f, t, y, fy, direction, rtol, atol), max_step)
    err_prev = 1e-4
    status = "complete"
    domain_exit = False
    n_reject = 0

    while direction * (t_end - t) > 0.0:
        h = min(h, max_step, abs(t_end - t))
        h_min = 1e-14 * max(1.0, abs(t))
        # a short final sub-step that lands on t_end is not an underflow
        if h < h_min and abs(t_end - t) > h_min:
            raise StepUnderflow(f"step size underflow at t={t}, p={y}")
        y_new, f_new, err = _dp_step(f, t, y, fy, direction * h)
        if not (np.all(np.isfinite(y_new)) and np.all(np.isfinite(f_new))):
            h *= 0.25
            n_reject += 1
            continue
        sc = atol + rtol * np.maximum(np.abs(y), np.abs(y_new))
        err_norm = float(np.sqrt(np.mean((err / sc) ** 2)))
        if err_norm > 1.0:
            h *= max(0.2, 0.9 * err_norm ** (-0.2))
            n_reject += 1
            continue
        t_new = t + direction * h if abs(t_end - t) > h else t_end
        # earliest terminal condition inside this step
        stop_at = None
        step_hits = []
        tol_t = 1e-12 * (1.0 + abs(t))
        for k, spec in enumerate(events):
            v = spec.fn(t_new, y_new)
            if _fire(ev_prev[k], v, spec.direction):
                th, ph = _refine(f, spec.fn, t, y, fy, direction * h, ev_prev[k], tol_t)
                step_hits.append(EventHit(th, ph, k))
                if spec.terminal:
                    if stop_at is None or direction * (th - stop_at[0]) < 0:
                        stop_at = (th, ph, "event")
            if v != 0.0:
                ev_prev[k] = v
        if domain is not None:
            m = domain.margin(y_new)
            if m < 0.0 <= dom_prev:
                fn = lambda _t, p: domain.margin(p)  # noqa: E731
                th, ph = _refine(f, fn, t, y, fy, direction * h, max(dom_prev, 1e-300), tol_t)
                if stop_at is None or direction * (th - stop_at[0]) < 0:
                    stop_at = (th, ph, "domain_exit")
            dom_prev = m
        if stop_at is not None:
            th, ph, why = stop_at
            step_hits = [hh for hh in step_hits if direction * (hh.t - th) <= 0]
            hits.extend(sorted(step_hits, key=lambda hh: direction * hh.t))
            if direction * (th - t) > 0:
                fh = f(ph)
                ts.append(th)
                ps.append(ph)
                fs.append(fh)
            status = why
            domain_exit = why == "domain_exit"
            break
        hits.extend(sorted(step_hits, key=lambda hh: direction * hh.t))
        arclen += float(np.linalg.norm(y_new - y))
        t, y, fy = t_new, y_new, f_new
        ts.append(t)
        ps.append(y)
        fs.append(fy)
        if not near_eq and float(np.linalg.norm(fy)) <= speed_floor:
            near_eq = True
        if max_arclength is not None and arclen >= max_arclength:
            status = "arclength"
            break
        fac = 0.9 * err_norm ** (-0.7 / 5.0) * err_prev ** (0.4 / 5.0) if err_norm > 0 else 5.0
        h *= min(5.0, max(0.2, fac))
        err_prev = max(err_norm, 1e-4)

    ts_a = np.array(ts)
    ps_a = np.array(ps)
    fs_a = np.array(fs)
    if direction < 0:
        ts_a, ps_a, fs_a = ts_a[::-1], ps_a[::-1], fs_a[::-1]
    traj = Trajectory(
        branch=branch if branch is not None else field.name,
        t=ts_a,
        p=ps_a,
        dp=fs_a,
        t_origin=float(t0),
        domain_exit=domain_exit,
        near_equilibrium=near_eq,
        status=status,
    )
    return traj, hits


def integrate(
    field: PlanarField,
    x0,
    t0: float,
    t1: float,
    *,
    rtol: float = 1e-9,
    atol: float = 1e-12,
    max_step: Optional[float] = None,
    domain: Optional[Rect] = None,
    max_arclength: Optional[float] = None,
    near_tol: float = 1e-9,
    branch: Optional[str] = None,
) -> Trajectory:
    """Integrate ``x' = field(x)`` from ``(t0, x0)`` to ``t1``.

    ``t1 < t0`` integrates backward in time.  The run stops early, with the
    partial trajectory flagged, when the path leaves the domain (``status``
    ``"domain_exit"``) or exceeds ``max_arclength``.

    Raises
    ------
    StepUnderflow
        If the step size collapses (stiffness or a singularity).
    """
    if t1 == t0:
        raise ValueError("t1 must differ from t0")
    traj, _ = _run(field, x0, t0, t1, rtol, atol, max_step, domain, (), max_arclength, near_tol, branch)
    return traj


def integrate_until(
    field: PlanarField,
    x0,
    t0: float,
    events: Sequence[EventSpec],
    t_max: float,
    *,
    rtol: float = 1e-9,
    atol: float = 1e-12,
    max_step: Optional[float] = None,
    domain: Optional[Rect] = None,
    near_tol: float = 1e-9,
    branch: Optional[str] = None,
) -> Tuple[Trajectory, List[EventHit]]:
    """Integrate forward to ``t_max`` while locating event zero crossings.

    Every sign change is bracketed within an accepted step and bisected on
    re-integrated sub-steps to ``|dt| <= 1e-12 (1 + |t|)``.  A terminal event
    ends the run at the hit.  If no event fires the hit list is empty.
    """
    if not t_max > t0:
        raise ValueError("t_max must exceed t0")
    return _run(field, x0, t0, t_max, rtol, atol, max_step, domain, tuple(events), None, near_tol, branch)


def integrate_backward_until(field, x0, t0, events, t_min, **kw):
    """Reversed-time counterpart of :func:`integrate_until`."""
    if not t_min < t0:
        raise ValueError("t_min must be below t0")
    return _run(
        field,
        x0,
        t0,
        t_min,
        kw.get("rtol", 1e-9),
        kw.get("atol", 1e-12),
        kw.get("max_step"),
        kw.get("domain"),
        tuple(events),
        None,
        kw.get("near_tol", 1e-9),
        kw.get("branch"),
    )


def integrate_through(
    field: PlanarField,
    x0,
    t_back: float,
    t_fwd: float,
    **kw,
) -> Trajectory:
    """Trajectory through ``x0`` on ``[-t_back, t_fwd]`` (``x0`` at ``t = 0``)."""
    parts = []
    if t_back > 0:
        parts.append(integrate(field, x0, 0.0, -t_back, **kw))
    if t_fwd > 0:
        parts.append(integrate(field, x0, 0.0, t_fwd, **kw))
    if not parts:
        raise ValueError("need t_back > 0 or t_fwd > 0")
    if len(parts) == 1:
        return replace(parts[0], t_origin=0.0)
    back, fwd = parts
    return Trajectory(
        branch=fwd.branch,
        t=np.concatenate((back.t[:-1], fwd.t)),
        p=np.vstack((back.p[:-1], fwd.p)),
        dp=np.vstack((back.dp[:-1], fwd.dp)),
        t_origin=0.0,
        domain_exit=back.domain_exit or fwd.domain_exit,
        near_equilibrium=back.near_equilibrium or fwd.near_equilibrium,
        status=f"{back.status}|{fwd.status}",
    )


def _candidate_pairs(P, Q, pad_p, pad_q, chunk=256):
    pmin = np.minimum(P[:-1], P[1:]) - pad_p[:, None]
    pmax = np.maximum(P[:-1], P[1:]) + pad_p[:, None]
    qmin = np.minimum(Q[:-1], Q[1:]) - pad_q[:, None]
    qmax = np.maximum(Q[:-1], Q[1:]) + pad_q[:, None]
    out_i, out_j = [], []
    for s in range(0, len(pmin), chunk):
        a0 = pmin[s : s + chunk, None, :]
        a1 = pmax[s : s + chunk, None, :]
        ok = np.all((a0 <= qmax[None]) & (qmin[None] <= a1), axis=2)
        ii, jj = np.nonzero(ok)
        out_i.append(ii + s)
        out_j.append(jj)
    if not out_i:
        return np.zeros(0, int), np.zeros(0, int)
    return np.concatenate(out_i), np.concatenate(out_j)


def _sag(traj: Trajectory) -> np.ndarray:
    h = np.diff(traj.t)
    dv = np.linalg.norm(np.diff(traj.dp, axis=0), axis=1)
    return 0.25 * h * dv + 1e-12


def intersect_trajectories(a: Trajectory, b: Trajectory, tol: float = 1e-10) -> List[Crossing]:
    """All transversal crossings of two trajectories, sorted by ``ta``.

    Chord intersections of the sample polylines give starting guesses that
    are refined by Newton's method on the Hermite interpolants until
    ``|a(ta) - b(tb)| <= tol``.  Tangential contacts are discarded.
    """
    if len(a) < 2 or len(b) < 2:
        return []
    P, Q = a.p, b.p
    ii, jj = _candidate_pairs(P, Q, _sag(a), _sag(b))
    found: List[Crossing] = []
    for i, j in zip(ii, jj):
        p0, p1 = P[i], P[i + 1]
        q0, q1 = Q[j], Q[j + 1]
        r = p1 - p0
        s = q1 - q0
        den = r[0] * s[1] - r[1] * s[0]
        if den == 0.0:
            continue
        d = q0 - p0
        u = (d[0] * s[1] - d[1] * s[0]) / den
        v = (d[0] * r[1] - d[1] * r[0]) / den
        if not (-0.25 <= u <= 1.25 and -0.25 <= v <= 1.25):
            continue
        ta = a.t[i] + min(max(u, 0.0), 1.0) * (a.t[i + 1] - a.t[i])
        tb = b.t[j] + min(max(v, 0.0), 1.0) * (b.t[j + 1] - b.t[j])
        res = _newton_cross(a, b, ta, tb, tol)
        if res is None:
            continue
        ta, tb = res
        va, vb = a.velocity(ta), b.velocity(tb)
        sin = abs(va[0] * vb[1] - va[1] * vb[0]) / max(np.linalg.norm(va) * np.linalg.norm(vb), 1e-300)
        if sin < 1e-7:
            continue
        dup = False
        for c in found:
            if abs(c.ta - ta) <= 1e-8 * (1 + abs(ta)) and abs(c.tb - tb) <= 1e-8 * (1 + abs(tb)):
                dup = True
                break
        if not dup:
            pa = a(ta)
            found.append(Crossing(0.5 * (pa + b(tb)), float(ta), float(tb)))
    found.sort(key=lambda c: c.ta)
    return found


def _newton_cross(a, b, ta, tb, tol, max_iter=30):
    lo_a, hi_a = a.t[0], a.t[-1]
    lo_b, hi_b = b.t[0], b.t[-1]
    for _ in range(max_iter):
        F = a(ta) - b(tb)
        if np.linalg.norm(F) <= tol:
            return ta, tb
        J = np.column_stack((a.velocity(ta), -b.velocity(tb)))
        det = J[0, 0] * J[1, 1] - J[0, 1] * J[1, 0]
        if det == 0.0:
            return None
        dta = (J[1, 1] * F[0] - J[0, 1] * F[1]) / det
        dtb = (-J[1, 0] * F[0] + J[0, 0] * F[1]) / det
        ta = ta - dta
        tb = tb - dtb
        if not (lo_a - 1e-12 <= ta <= hi_a + 1e-12 and lo_b - 1e-12 <= tb <= hi_b + 1e-12):
            return None
        ta = min(max(ta, lo_a), hi_a)
        tb = min(max(tb, lo_b), hi_b)
    F = a(ta) - b(tb)
    return (ta, tb) if np.linalg.norm(F) <= tol else None
