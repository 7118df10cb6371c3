"""Planar vector fields, Jacobians, singular points and their classification."""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import NonFinite, ZeroVector

__all__ = [
    "Rect",
    "PlanarField",
    "linear_field",
    "EquilibriumKind",
    "Eigenstructure",
    "SingularPoint",
    "SearchResult",
    "Collinearity",
    "ManifoldDirection",
    "InvariantManifold",
    "as_point",
    "jacobian",
    "classify",
    "find_singular_points",
    "collinearity",
    "trace_manifold",
    "analyze_point",
]


def as_point(p) -> np.ndarray:
    """Coerce ``p`` to a finite float array of shape (2,)."""
    arr = np.asarray(p, dtype=float).reshape(-1)
    if arr.shape != (2,):
        raise ValueError(f"expected a planar point, got shape {np.shape(p)}")
    if not np.all(np.isfinite(arr)):
        raise NonFinite(f"non-finite point {arr}")
    return arr


@dataclass(frozen=True)
class Rect:
    """Axis-aligned rectangle ``[x0, x1] x [y0, y1]``."""

    x0: float
    y0: float
    x1: float
    y1: float

    def __post_init__(self):
        if not (self.x1 > self.x0 and self.y1 > self.y0):
            raise ValueError(f"degenerate rectangle {self}")

    @classmethod
    def parse(cls, text: str) -> "Rect":
        vals = [float(v) for v in text.split(",")]
        if len(vals) != 4:
            raise ValueError(f"region needs x0,y0,x1,y1, got {text!r}")
        return cls(*vals)

    @property
    def diagonal(self) -> float:
        return math.hypot(self.x1 - self.x0, self.y1 - self.y0)

    def contains(self, p, pad: float = 0.0) -> bool:
        x, y = float(p[0]), float(p[1])
        return (self.x0 - pad <= x <= self.x1 + pad) and (self.y0 - pad <= y <= self.y1 + pad)

    def margin(self, p) -> float:
        """Signed distance-like margin: positive inside, negative outside."""
        x, y = float(p[0]), float(p[1])
        return min(x - self.x0, self.x1 - x, y - self.y0, self.y1 - y)

    def grid(self, n: int, m: Optional[int] = None):
        m = n if m is None else m
        xs = np.linspace(self.x0, self.x1, n)
        ys = np.linspace(self.y0, self.y1, m)
        return np.meshgrid(xs, ys, indexing="xy")

    def as_tuple(self):
        return (self.x0, self.y0, self.x1, self.y1)


@dataclass(frozen=True)
class PlanarField:
    """A branch of the inclusion: a map ``(x, y) -> (dx, dy)``.

    ``func`` receives two floats (or two broadcastable arrays for grid
    evaluation) and returns a pair.  ``jac``, when given, returns the 2x2
    Jacobian at a point; otherwise central differences are used.
    """

    name: str
    func: Callable
    domain: Optional[Rect] = None
    jac: Optional[Callable] = None
    fd_step: Optional[float] = None

    def __call__(self, p) -> np.ndarray:
        dx, dy = self.func(float(p[0]), float(p[1]))
        return np.array([float(dx), float(dy)])

    def eval_xy(self, x: float, y: float):
        dx, dy = self.func(x, y)
        return float(dx), float(dy)

    def eval_grid(self, X, Y):
        """Evaluate on arrays; returns ``(U, V)`` broadcast to ``X``'s shape."""
        X = np.asarray(X, dtype=float)
        Y = np.asarray(Y, dtype=float)
        U, V = self.func(X, Y)
        U, V, _ = np.broadcast_arrays(np.asarray(U, dtype=float), np.asarray(V, dtype=float), X)
        return np.array(U, dtype=float), np.array(V, dtype=float)

    @property
    def jacobian_mode(self) -> str:
        return "analytic" if self.jac is not None else "finite-difference"

    def with_domain(self, domain: Optional[Rect]) -> "PlanarField":
        return PlanarField(self.name, self.func, domain, self.jac, self.fd_step)

    def scaled(self, c: float, name: Optional[str] = None) -> "PlanarField":
        """Field multiplied by a constant ``c``."""
        func = self.func
        jac = self.jac

        def scaled_func(x, y):
            dx, dy = func(x, y)
            return c * dx, c * dy

        scaled_jac = None if jac is None else (lambda p: c * np.asarray(jac(p), dtype=float))
        return PlanarField(name or f"{c}*{self.name}", scaled_func, self.domain, scaled_jac, self.fd_step)


def linear_field(A, center=(0.0, 0.0), name: str = "linear", domain: Optional[Rect] = None) -> PlanarField:
    """Affine field ``A @ (p - center)`` with its analytic Jacobian."""
    A = np.array(A, dtype=float).reshape(2, 2)
    cx, cy = (float(c) for c in center)
    a11, a12, a21, a22 = A.ravel()

    def func(x, y):
        u = x - cx
        v = y - cy
        return a11 * u + a12 * v, a21 * u + a22 * v

    return PlanarField(name, func, domain, lambda p: A.copy())


class EquilibriumKind(str, Enum):
    STABLE_NODE = "StableNode"
    UNSTABLE_NODE = "UnstableNode"
    STABLE_FOCUS = "StableFocus"
    UNSTABLE_FOCUS = "UnstableFocus"
    SADDLE = "Saddle"
    NON_HYPERBOLIC = "NonHyperbolic"
    DEGENERATE_ZERO_DET = "DegenerateZeroDet"

    @property
    def hyperbolic(self) -> bool:
        return self not in (EquilibriumKind.NON_HYPERBOLIC, EquilibriumKind.DEGENERATE_ZERO_DET)

    @property
    def is_node(self) -> bool:
        return self in (EquilibriumKind.STABLE_NODE, EquilibriumKind.UNSTABLE_NODE)

    @property
    def is_focus(self) -> bool:
        return self in (EquilibriumKind.STABLE_FOCUS, EquilibriumKind.UNSTABLE_FOCUS)

    @property
    def label(self) -> str:
        """Lower-case wording used in the configuration tables."""
        return {
            "StableNode": "stable node",
            "UnstableNode": "unstable node",
            "StableFocus": "stable focus",
            "UnstableFocus": "unstable focus",
            "Saddle": "unstable saddle",
            "NonHyperbolic": "non-hyperbolic",
            "DegenerateZeroDet": "degenerate",
        }[self.value]


@dataclass(frozen=True)
class Eigenstructure:
    """Eigenvalues sorted by descending real part, with unit eigenvectors.

    ``e1``/``e2`` are ``None`` for complex pairs.  For a repeated real
    eigenvalue ``multiplicity`` is 2 and, for a defective matrix, ``e1`` and
    ``e2`` coincide.
    """

    lambda1: complex
    lambda2: complex
    e1: Optional[np.ndarray]
    e2: Optional[np.ndarray]
    multiplicity: int = 1

    @property
    def is_real(self) -> bool:
        return self.e1 is not None

    @property
    def values(self):
        return (self.lambda1, self.lambda2)

    def stable_pair(self):
        """(eigenvalue, eigenvector) with negative real part; saddles only."""
        return (self.lambda2, self.e2) if self.lambda2.real < 0 else (self.lambda1, self.e1)

    def unstable_pair(self):
        return (self.lambda1, self.e1) if self.lambda1.real > 0 else (self.lambda2, self.e2)


@dataclass(frozen=True)
class SingularPoint:
    location: np.ndarray
    jac: np.ndarray
    eig: Eigenstructure
    kind: EquilibriumKind
    residual: float

    def to_dict(self) -> dict:
        def cplx(z):
            return {"re": float(z.real), "im": float(z.imag)}

        return {
            "location": [float(v) for v in self.location],
            "kind": self.kind.value,
            "jacobian": [[float(v) for v in row] for row in self.jac],
            "eigenvalues": [cplx(self.eig.lambda1), cplx(self.eig.lambda2)],
            "eigenvectors": None
            if self.eig.e1 is None
            else [[float(v) for v in self.eig.e1], [float(v) for v in self.eig.e2]],
            "multiplicity": self.eig.multiplicity,
            "residual": float(self.residual),
        }


class SearchResult(list):
    """List of singular points plus the count of non-converged Newton seeds."""

    def __init__(self, items=(), n_dropped: int = 0):
        super().__init__(items)
        self.n_dropped = n_dropped


def jacobian(field: PlanarField, p, h: Optional[float] = None) -> np.ndarray:
    """Jacobian of ``field`` at ``p``.

    Uses the analytic Jacobian when attached; otherwise central differences
    with step ``h`` (default ``1e-6 * (1 + |p|)``).
    """
    p = as_point(p)
    if field.jac is not None and h is None:
        J = np.array(field.jac(p), dtype=float).reshape(2, 2)
    else:
        if h is None:
            h = field.fd_step if field.fd_step is not None else 1e-6 * (1.0 + float(np.linalg.norm(p)))
        J = np.empty((2, 2))
        for k in range(2):
            dp = np.zeros(2)
            dp[k] = h
            J[:, k] = (field(p + dp) - field(p - dp)) / (2.0 * h)
    if not np.all(np.isfinite(J)):
        raise NonFinite(f"non-finite Jacobian of {field.name} at {p}")
    return J


def _unit_eigenvector(A: np.ndarray, lam: float) -> np.ndarray:
    a11, a12, a21, a22 = A.ravel()
    c1 = np.array([a12, lam - a11])
    c2 = np.array([lam - a22, a21])
    v = c1 if np.linalg.norm(c1) >= np.linalg.norm(c2) else c2
    n = np.linalg.norm(v)
    if n == 0.0:
        # A - lam I vanishes: every vector is an eigenvector
        return None
    v = v / n
    if v[0] < 0 or (v[0] == 0 and v[1] < 0):
        v = -v
    return v


def _eigen(A: np.ndarray) -> Eigenstructure:
    tr = A[0, 0] + A[1, 1]
    det = A[0, 0] * A[1, 1] - A[0, 1] * A[1, 0]
    disc = tr * tr - 4.0 * det
    scale = max(1.0, float(np.abs(A).max())) ** 2
    if disc < -1e-14 * scale:
        s = cmath.sqrt(disc)
        l1 = complex(0.5 * tr, 0.5 * abs(s.imag))
        return Eigenstructure(l1, l1.conjugate(), None, None, 1)
    disc = max(disc, 0.0)
    sq = math.sqrt(disc)
    q = 0.5 * (tr + math.copysign(sq, tr))
    if q != 0.0:
        la, lb = q, det / q
    else:
        la = lb = 0.0
    l1, l2 = (la, lb) if la >= lb else (lb, la)
    repeated = sq <= 1e-12 * math.sqrt(scale)
    if repeated:
        l1 = l2 = 0.5 * tr
        off = abs(A[0, 1]) + abs(A[1, 0]) + abs(A[0, 0] - A[1, 1])
        if off <= 1e-14 * math.sqrt(scale):
            e1, e2 = np.array([1.0, 0.0]), np.array([0.0, 1.0])
        else:
            e1 = _unit_eigenvector(A, l1)
            e2 = e1.copy()
        return Eigenstructure(complex(l1), complex(l2), e1, e2, 2)
    e1 = _unit_eigenvector(A, l1)
    e2 = _unit_eigenvector(A, l2)
    return Eigenstructure(complex(l1), complex(l2), e1, e2, 1)


def classify(jac, tol: float = 1e-8):
    """Classify an equilibrium from its Jacobian.

    Returns ``(EquilibriumKind, Eigenstructure)``.  ``tol`` is relative to
    ``1 + |J|`` for real parts and ``(1 + |J|)**2`` for the determinant.
    """
    A = np.asarray(jac, dtype=float).reshape(2, 2)
    if not np.all(np.isfinite(A)):
        raise NonFinite("non-finite Jacobian")
    norm = float(np.linalg.norm(A, 2))
    re_tol = tol * (1.0 + norm)
    det_tol = tol * (1.0 + norm) ** 2
    det = A[0, 0] * A[1, 1] - A[0, 1] * A[1, 0]
    eig = _eigen(A)
    if abs(det) <= det_tol:
        return EquilibriumKind.DEGENERATE_ZERO_DET, eig
    if det < 0:
        return EquilibriumKind.SADDLE, eig
    re = eig.lambda1.real
    if abs(re) <= re_tol or abs(eig.lambda2.real) <= re_tol:
        return EquilibriumKind.NON_HYPERBOLIC, eig
    if eig.is_real:
        kind = EquilibriumKind.STABLE_NODE if re < 0 else EquilibriumKind.UNSTABLE_NODE
    else:
        kind = EquilibriumKind.STABLE_FOCUS if re < 0 else EquilibriumKind.UNSTABLE_FOCUS
    return kind, eig


def analyze_point(field: PlanarField, p, tol: float = 1e-8) -> SingularPoint:
    """Build a :class:`SingularPoint` at a known zero ``p``."""
    p = as_point(p)
    J = jacobian(field, p)
    kind, eig = classify(J, tol)
    return SingularPoint(p, J, eig, kind, float(np.linalg.norm(field(p))))


def _newton(field, p, tol, max_iter=50, region=None):
    p = p.copy()
    for _ in range(max_iter):
        v = field(p)
        if not np.all(np.isfinite(v)):
            return None
        if np.linalg.norm(v) <= tol:
            return p
        J = jacobian(field, p)
        try:
            step = np.linalg.solve(J, v)
        except np.linalg.LinAlgError:
            return None
        p = p - step
        if not np.all(np.isfinite(p)):
            return None
        if region is not None and not region.contains(p, pad=0.5 * region.diagonal):
            return None
    v = field(p)
    return p if np.all(np.isfinite(v)) and np.linalg.norm(v) <= tol else None


def find_singular_points(
    field: PlanarField,
    region: Rect,
    grid_n: int = 40,
    tol: float = 1e-10,
    classify_tol: float = 1e-8,
) -> SearchResult:
    """Locate the zeros of ``field`` inside ``region``.

    Newton's method is started from the centre of every grid cell whose
    corner values bracket zero in both components.  Converged points are
    deduplicated (distance below ``10 * tol``), classified and returned in
    lexicographic order.
    """
    if grid_n < 2:
        raise ValueError("grid_n must be >= 2")
    if tol <= 0:
        raise ValueError("tol must be positive")
    X, Y = region.grid(grid_n + 1)
    U, V = field.eval_grid(X, Y)
    found: list[np.ndarray] = []
    dropped = 0
    for j in range(grid_n):
        for i in range(grid_n):
            cu = U[j : j + 2, i : i + 2]
            cv = V[j : j + 2, i : i + 2]
            if not (np.all(np.isfinite(cu)) and np.all(np.isfinite(cv))):
                continue
            if cu.min() > 0 or cu.max() < 0 or cv.min() > 0 or cv.max() < 0:
                continue
            seed = np.array([0.5 * (X[j, i] + X[j, i + 1]), 0.5 * (Y[j, i] + Y[j + 1, i])])
            root = _newton(field, seed, tol, region=region)
            if root is None:
                dropped += 1
                continue
            if not region.contains(root, pad=1e-12 * region.diagonal):
                continue
            if any(np.linalg.norm(root - q) < max(10 * tol, 1e-9 * (1 + np.linalg.norm(q))) for q in found):
                continue
            found.append(root)
    found.sort(key=lambda q: (q[0], q[1]))
    points = [analyze_point(field, q, classify_tol) for q in found]
    return SearchResult(points, dropped)


class Collinearity(str, Enum):
    NOT_COLLINEAR = "NotCollinear"
    COLLINEAR_E1 = "CollinearE1"
    COLLINEAR_E2 = "CollinearE2"


def _unsigned_angle(a: np.ndarray, b: np.ndarray) -> float:
    c = float(np.dot(a, b) / (np.linalg.norm(a) * np.linalg.norm(b)))
    s = float((a[0] * b[1] - a[1] * b[0]) / (np.linalg.norm(a) * np.linalg.norm(b)))
    return math.atan2(abs(s), c)


def collinearity(g_at_xstar, eig: Eigenstructure, tol_angle: float = 1e-6) -> Collinearity:
    """Is the other branch's vector at a saddle parallel to an eigenvector?

    Both orientations count (the multiplier may be negative).
    """
    g = np.asarray(g_at_xstar, dtype=float)
    if np.linalg.norm(g) == 0.0:
        raise ZeroVector("other branch vanishes at the singular point")
    if not eig.is_real:
        raise ValueError("collinearity needs real eigenvectors")
    for vec, tag in ((eig.e1, Collinearity.COLLINEAR_E1), (eig.e2, Collinearity.COLLINEAR_E2)):
        ang = _unsigned_angle(g, vec)
        if ang <= tol_angle or ang >= math.pi - tol_angle:
            return tag
    return Collinearity.NOT_COLLINEAR


class ManifoldDirection(str, Enum):
    STABLE = "Stable"
    UNSTABLE = "Unstable"


@dataclass(frozen=True)
class InvariantManifold:
    saddle: SingularPoint
    direction: ManifoldDirection
    sign: int
    arc: "object"  # integrate.Trajectory
    seed: np.ndarray = field(default=None)

    @property
    def points_outward(self) -> np.ndarray:
        """Arc samples ordered from the saddle outward."""
        pts = self.arc.p
        return pts[::-1] if self.direction is ManifoldDirection.STABLE else pts

    @property
    def domain_exit(self) -> bool:
        return self.arc.domain_exit


def trace_manifold(
    field: PlanarField,
    saddle: SingularPoint,
    direction: ManifoldDirection | str,
    sign: int,
    length: float,
    eps_seed: Optional[float] = None,
    rtol: float = 1e-9,
    max_step: Optional[float] = None,
    t_max: Optional[float] = None,
) -> InvariantManifold:
    """Trace one branch of a saddle's stable or unstable manifold.

    Starts ``eps_seed`` away from the saddle along ``sign * e_k`` and runs
    forward time for the unstable manifold, reversed time for the stable
    one, until the arc is ``length`` long or leaves the field's domain.
    """
    from .integrate import integrate

    if saddle.kind is not EquilibriumKind.SADDLE:
        raise ValueError("trace_manifold needs a saddle")
    direction = ManifoldDirection(direction)
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    loc = saddle.location
    if eps_seed is None:
        eps_seed = 1e-5 * (1.0 + float(np.linalg.norm(loc)))
    if direction is ManifoldDirection.UNSTABLE:
        lam, vec = saddle.eig.unstable_pair()
    else:
        lam, vec = saddle.eig.stable_pair()
    lam = abs(lam.real)
    seed = loc + sign * eps_seed * vec
    if t_max is None:
        t_max = (math.log(max(length, eps_seed) / eps_seed) + 40.0) / lam
    t1 = t_max if direction is ManifoldDirection.UNSTABLE else -t_max
    arc = integrate(field, seed, 0.0, t1, rtol=rtol, max_step=max_step, max_arclength=length)
    return InvariantManifold(saddle, direction, sign, arc, seed)
