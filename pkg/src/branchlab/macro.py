"""IS-LM / QY-ML macroeconomic model as a two-branch inclusion.

State is ``(Y, R)``: output and the long-term real interest rate.  The
nominal short rate is ``i = R - MP + pi_e``.  The demand branch is

    Y' = alpha_d (I - S),   R' = beta_d (L - M - M_CB)

and the supply branch is

    Y' = alpha_s (Qeff - Y),   R' = beta_s (M + M_CB - L).

Both money equations share one zero curve (LM = ML as point sets).
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, fields, replace
from enum import Enum
from pathlib import Path
from typing import Callable, Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.optimize import brentq

from .branching import EulerBranching, SwitchingSchedule, validate_branching
from .errors import (
    BranchingViolated,
    BranchLabError,
    ExprDomainError,
    MultipleEquilibria,
    NoEquilibrium,
    ParamError,
)
from .expr import Expr
from .fields import EquilibriumKind, PlanarField, Rect, classify, find_singular_points

__all__ = [
    "EconParams",
    "EconFunctions",
    "PropertyCheck",
    "PropertyReport",
    "PropertyViolation",
    "Phase",
    "CyclePhases",
    "Model",
    "DEFAULT_DOMAIN",
    "islm_field",
    "qyml_field",
    "validate_properties",
    "build_islm_qyml",
    "cycle_schedule",
    "verify_propositions",
    "load_model",
    "reference_model",
]

DEFAULT_DOMAIN = Rect(1.0, -5.0, 100.0, 10.0)

_POSITIVE = ("M_CB", "MP", "pi_e", "alpha_d", "beta_d", "alpha_s", "beta_s")


class PropertyViolation(BranchLabError):
    reason = "PropertyViolation"


@dataclass(frozen=True)
class EconParams:
    """Coefficients of the linear reference model and the model constants.

    ``I = e_I + i_Y Y + i_R R``, ``S = e_S + s_Y Y + s_R R``,
    ``L = l_Y Y + l_R i``, ``M = m_Y Y + m_R i`` and
    ``Qeff = q_0 + q_Y Y + q_R R``.  Only the constants in ``_POSITIVE`` are
    checked here; sign conditions on the coefficients belong to
    :func:`validate_properties`.
    """

    e_I: float = 20.0
    i_Y: float = 0.3
    i_R: float = -4.0
    e_S: float = 2.0
    s_Y: float = 0.5
    s_R: float = 3.0
    l_Y: float = 0.6
    l_R: float = -5.0
    m_Y: float = 0.2
    m_R: float = 2.0
    q_0: float = 30.0
    q_Y: float = 0.5
    q_R: float = -6.0
    M_CB: float = 10.0
    MP: float = 0.02
    pi_e: float = 0.03
    alpha_d: float = 1.0
    beta_d: float = 1.0
    alpha_s: float = 1.0
    beta_s: float = 1.0

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
                raise ParamError(f"parameter {f.name} must be a finite number, got {v!r}")
            object.__setattr__(self, f.name, float(v))
        for name in _POSITIVE:
            if getattr(self, name) <= 0:
                raise ParamError(f"parameter {name} must be > 0, got {getattr(self, name)!r}")

    def rate_offset(self) -> float:
        """``i - R``."""
        return self.pi_e - self.MP

    def with_overrides(self, **kw) -> "EconParams":
        unknown = set(kw) - {f.name for f in fields(self)}
        if unknown:
            raise ParamError(f"unknown parameter(s): {', '.join(sorted(unknown))}")
        return replace(self, **kw)

    def to_dict(self) -> dict:
        return asdict(self)


Fn2 = Callable[..., object]


@dataclass(frozen=True)
class EconFunctions:
    """The economic functions of both sub-models.

    ``I, S, Qeff`` take ``(Y, R)``; ``L, M`` take ``(Y, i)``.  When the
    production composite is supplied, ``K, N, T`` are the factor functions of
    ``(Y, R)`` and ``Q`` the outer production function of ``(K, N, T)``;
    ``Qeff`` is then their composition.  ``linear`` holds the coefficients
    when the functions are the reference affine ones.
    """

    I: Fn2
    S: Fn2
    L: Fn2
    M: Fn2
    Qeff: Fn2
    K: Optional[Fn2] = None
    N: Optional[Fn2] = None
    T: Optional[Fn2] = None
    Q: Optional[Fn2] = None
    linear: Optional[EconParams] = None
    sources: Dict[str, str] = field(default_factory=dict, compare=False)

    @property
    def composite(self) -> bool:
        return self.Q is not None

    @classmethod
    def from_params(cls, p: EconParams) -> "EconFunctions":
        return cls(
            I=lambda Y, R: p.e_I + p.i_Y * Y + p.i_R * R,
            S=lambda Y, R: p.e_S + p.s_Y * Y + p.s_R * R,
            L=lambda Y, i: p.l_Y * Y + p.l_R * i,
            M=lambda Y, i: p.m_Y * Y + p.m_R * i,
            Qeff=lambda Y, R: p.q_0 + p.q_Y * Y + p.q_R * R,
            linear=p,
        )

    @classmethod
    def from_expressions(cls, exprs: Mapping[str, str]) -> "EconFunctions":
        """Build from source strings.

        Required keys: ``I``, ``S`` (in Y, R), ``L``, ``M`` (in Y, i), and
        either ``Q`` / ``Qeff`` in (Y, R) or all of ``K``, ``N``, ``T`` in
        (Y, R) together with ``Q`` in (K, N, T).
        """
        missing = [k for k in ("I", "S", "L", "M") if k not in exprs]
        composite = all(k in exprs for k in ("K", "N", "T"))
        if not composite and not ("Q" in exprs or "Qeff" in exprs):
            missing.append("Q")
        if composite and "Q" not in exprs:
            missing.append("Q")
        if missing:
            raise ParamError(f"missing expression(s): {', '.join(missing)}")
        unknown = set(exprs) - {"I", "S", "L", "M", "Q", "Qeff", "K", "N", "T"}
        if unknown:
            raise ParamError(f"unknown expression key(s): {', '.join(sorted(unknown))}")

        def yr(key):
            e = Expr.parse(exprs[key], ("Y", "R"))
            return lambda Y, R: e(Y=Y, R=R)

        def yi(key):
            e = Expr.parse(exprs[key], ("Y", "i"))
            return lambda Y, i: e(Y=Y, i=i)

        kw = dict(I=yr("I"), S=yr("S"), L=yi("L"), M=yi("M"))
        if composite:
            q = Expr.parse(exprs["Q"], ("K", "N", "T"))
            K, N, T = yr("K"), yr("N"), yr("T")

            def Q(k, n, t):
                return q(K=k, N=n, T=t)

            kw.update(K=K, N=N, T=T, Q=Q, Qeff=lambda Y, R: Q(K(Y, R), N(Y, R), T(Y, R)))
        else:
            kw["Qeff"] = yr("Qeff" if "Qeff" in exprs else "Q")
        return cls(**kw, sources=dict(exprs))


def _nan_on_domain_error(fn):
    def wrapped(*args):
        try:
            return fn(*args)
        except ExprDomainError:
            return math.nan

    return wrapped


def islm_field(funcs: EconFunctions, params: EconParams, domain: Optional[Rect] = None) -> PlanarField:
    """Demand-side branch ``f`` over ``(Y, R)``."""
    I, S = _nan_on_domain_error(funcs.I), _nan_on_domain_error(funcs.S)
    L, M = _nan_on_domain_error(funcs.L), _nan_on_domain_error(funcs.M)
    ad, bd, off, mcb = params.alpha_d, params.beta_d, params.rate_offset(), params.M_CB

    def func(Y, R):
        i = R + off
        return ad * (I(Y, R) - S(Y, R)), bd * (L(Y, i) - M(Y, i) - mcb)

    jac = None
    lp = funcs.linear
    if lp is not None:
        A = np.array(
            [[ad * (lp.i_Y - lp.s_Y), ad * (lp.i_R - lp.s_R)], [bd * (lp.l_Y - lp.m_Y), bd * (lp.l_R - lp.m_R)]]
        )
        jac = lambda p: A.copy()  # noqa: E731
    return PlanarField("IS-LM", func, domain, jac)


def qyml_field(funcs: EconFunctions, params: EconParams, domain: Optional[Rect] = None) -> PlanarField:
    """Supply-side branch ``g``; its money equation is the exact negative of the demand one."""
    Q = _nan_on_domain_error(funcs.Qeff)
    L, M = _nan_on_domain_error(funcs.L), _nan_on_domain_error(funcs.M)
    a_s, bs, off, mcb = params.alpha_s, params.beta_s, params.rate_offset(), params.M_CB

    def func(Y, R):
        i = R + off
        return a_s * (Q(Y, R) - Y), bs * -(L(Y, i) - M(Y, i) - mcb)

    jac = None
    lp = funcs.linear
    if lp is not None:
        A = np.array(
            [[a_s * (lp.q_Y - 1.0), a_s * lp.q_R], [-bs * (lp.l_Y - lp.m_Y), -bs * (lp.l_R - lp.m_R)]]
        )
        jac = lambda p: A.copy()  # noqa: E731
    return PlanarField("QY-ML", func, domain, jac)


# -- property validation -------------------------------------------------------


@dataclass(frozen=True)
class PropertyCheck:
    """One condition evaluated over the sample grid.

    ``margin`` is positive where the condition holds; ``worst_point`` is the
    grid point of smallest margin.
    """

    condition: str
    pass_fraction: float
    worst_point: Tuple[float, float]
    worst_margin: float
    passed: bool

    def to_dict(self) -> dict:
        return {
            "condition": self.condition,
            "pass_fraction": self.pass_fraction,
            "worst_point": list(self.worst_point),
            "worst_margin": self.worst_margin,
            "pass": self.passed,
        }


@dataclass(frozen=True)
class PropertyReport:
    checks: Tuple[PropertyCheck, ...]
    warnings: Tuple[str, ...]
    grid: int
    domain: Rect
    y_limit: float

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def failed(self) -> List[str]:
        return [c.condition for c in self.checks if not c.passed]

    def __getitem__(self, condition: str) -> PropertyCheck:
        for c in self.checks:
            if c.condition == condition:
                return c
        raise KeyError(condition)

    def to_dict(self) -> dict:
        return {
            "pass": self.passed,
            "failed": self.failed(),
            "checks": [c.to_dict() for c in self.checks],
            "warnings": list(self.warnings),
            "grid": self.grid,
            "domain": list(self.domain.as_tuple()),
            "y_limit": self.y_limit,
        }


def _partial(fn, args: Sequence[np.ndarray], k: int) -> np.ndarray:
    x = args[k]
    h = 1e-6 * np.maximum(1.0, np.abs(x))
    up = list(args)
    dn = list(args)
    up[k] = x + h
    dn[k] = x - h
    with np.errstate(all="ignore"):
        return (np.asarray(fn(*up), dtype=float) - np.asarray(fn(*dn), dtype=float)) / (2 * h)


def _check(name: str, margin, Y: np.ndarray, R: np.ndarray) -> PropertyCheck:
    m = np.broadcast_to(np.asarray(margin, dtype=float), Y.shape)
    m = np.where(np.isfinite(m), m, -np.inf)
    ok = m > 0
    k = int(np.argmin(m))
    return PropertyCheck(
        name, float(ok.mean()), (float(Y.flat[k]), float(R.flat[k])), float(m.flat[k]), bool(ok.all())
    )


def _root_in_R(fn: Callable[[float], float], lo: float, hi: float) -> float:
    """Zero of ``fn(R)``, widening ``[lo, hi]`` until it brackets one."""
    with np.errstate(all="ignore"):
        for _ in range(40):
            a, b = fn(lo), fn(hi)
            if np.isfinite(a) and np.isfinite(b) and a * b <= 0:
                return float(brentq(fn, lo, hi, xtol=1e-14, rtol=1e-14))
            w = hi - lo
            lo, hi = lo - w, hi + w
    return math.nan


def _safe(fn):
    def wrapped(*a):
        try:
            return float(fn(*a))
        except (ExprDomainError, ZeroDivisionError, OverflowError, ValueError):
            return math.nan

    return wrapped


def validate_properties(
    funcs: EconFunctions,
    params: EconParams,
    grid: int = 50,
    domain: Rect = DEFAULT_DOMAIN,
    y_limit: float = 1e-3,
) -> PropertyReport:
    """Evaluate the sign, slope and intersection conditions on a lattice.

    Partials are central differences.  The two limit conditions at
    ``Y -> 0+`` are evaluated at ``Y = y_limit`` by solving each curve for
    ``R``.  Grid points with a non-positive nominal rate ``i`` produce a
    warning, not a failure.
    """
    if domain.x0 <= 0:
        raise ParamError("the property grid must have Y > 0")
    Y, R = domain.grid(grid)
    off = params.rate_offset()
    i = R + off
    I_Y, I_R = _partial(funcs.I, (Y, R), 0), _partial(funcs.I, (Y, R), 1)
    S_Y, S_R = _partial(funcs.S, (Y, R), 0), _partial(funcs.S, (Y, R), 1)
    L_Y, L_R = _partial(funcs.L, (Y, i), 0), _partial(funcs.L, (Y, i), 1)
    M_Y, M_R = _partial(funcs.M, (Y, i), 0), _partial(funcs.M, (Y, i), 1)
    Q_Y = _partial(funcs.Qeff, (Y, R), 0)

    checks = [
        _check("0<I_Y<1", np.minimum(I_Y, 1 - I_Y), Y, R),
        _check("I_R<0", -I_R, Y, R),
        _check("0<S_Y<1", np.minimum(S_Y, 1 - S_Y), Y, R),
        _check("S_R>0", S_R, Y, R),
        _check("L_Y>0", L_Y, Y, R),
        _check("L_R<0", -L_R, Y, R),
        _check("0<M_Y<L_Y", np.minimum(M_Y, L_Y - M_Y), Y, R),
        _check("M_R>0", M_R, Y, R),
    ]
    if funcs.composite:
        with np.errstate(all="ignore"):
            KNT = tuple(np.asarray(fn(Y, R), dtype=float) * np.ones_like(Y) for fn in (funcs.K, funcs.N, funcs.T))
        for k, name in enumerate("KNT"):
            checks.append(_check(f"Q_{name}>0", _partial(funcs.Q, KNT, k), Y, R))
        for name, fn in zip("KNT", (funcs.K, funcs.N, funcs.T)):
            checks.append(_check(f"{name}_Y>0", _partial(fn, (Y, R), 0), Y, R))
            checks.append(_check(f"{name}_R<0", -_partial(fn, (Y, R), 1), Y, R))
    checks.append(_check("I_Y<S_Y", S_Y - I_Y, Y, R))
    checks.append(_check("Q_Y<1", 1 - Q_Y, Y, R))

    I, S, L, M, Q = (_safe(fn) for fn in (funcs.I, funcs.S, funcs.L, funcs.M, funcs.Qeff))
    y0 = float(y_limit)
    r_is = _root_in_R(lambda r: I(y0, r) - S(y0, r), domain.y0, domain.y1)
    r_lm = _root_in_R(lambda r: L(y0, r + off) - M(y0, r + off) - params.M_CB, domain.y0, domain.y1)
    r_qy = _root_in_R(lambda r: Q(y0, r) - y0, domain.y0, domain.y1)
    at = (np.array([[y0]]), np.array([[math.nan]]))
    for name, a, b in (("R_IS(0+)>R_LM(0+)", r_is, r_lm), ("R_QY(0+)>R_ML(0+)", r_qy, r_lm)):
        c = _check(name, np.array([[a - b]]), *at)
        checks.append(replace(c, worst_point=(y0, a)))

    warnings = []
    n_bad = int(np.count_nonzero(i <= 0))
    if n_bad:
        warnings.append(f"nominal rate i <= 0 at {n_bad} of {i.size} grid points")
    return PropertyReport(tuple(checks), tuple(warnings), grid, domain, y0)


def build_islm_qyml(
    funcs: EconFunctions,
    params: EconParams,
    domain: Rect = DEFAULT_DOMAIN,
    *,
    force: bool = False,
    grid: int = 50,
) -> EulerBranching:
    """Assemble the inclusion with ``f`` = IS-LM and ``g`` = QY-ML.

    The property report and branching report are attached as
    ``eb.meta["properties"]`` and ``eb.meta["branching"]``.

    Raises
    ------
    PropertyViolation
        If a property condition fails and ``force`` is false.
    BranchingViolated
        If ``f = g`` at some lattice point.
    """
    report = validate_properties(funcs, params, grid, domain)
    if not report.passed and not force:
        raise PropertyViolation(f"failed conditions: {', '.join(report.failed())}")
    eb = EulerBranching(islm_field(funcs, params), qyml_field(funcs, params), domain)
    br = validate_branching(eb)
    if not br.passed:
        raise BranchingViolated(f"f = g at ({br.argmin[0]:.6g}, {br.argmin[1]:.6g})")
    eb.meta.update(properties=report, branching=br, forced=bool(force and not report.passed))
    return eb


# -- economic cycle --------------------------------------------------------------


class Phase(str, Enum):
    RECESSION = "Recession"
    EXPANSION = "Expansion"

    @classmethod
    def parse(cls, text: str) -> "Phase":
        t = text.strip().lower()
        for p in cls:
            if t in (p.value.lower(), p.value[0].lower()):
                return p
        raise ParamError(f"unknown cycle phase {text!r}")


@dataclass(frozen=True)
class CyclePhases:
    phases: Tuple[Tuple[Phase, float], ...]

    def __post_init__(self):
        if not self.phases:
            raise ParamError("at least one cycle phase is required")
        norm = []
        for ph, dur in self.phases:
            ph = ph if isinstance(ph, Phase) else Phase.parse(ph)
            dur = float(dur)
            if not (math.isfinite(dur) and dur > 0):
                raise ParamError(f"phase durations must be positive, got {dur!r}")
            if norm and norm[-1][0] is ph:
                raise ParamError("cycle phases must alternate")
            norm.append((ph, dur))
        object.__setattr__(self, "phases", tuple(norm))

    @classmethod
    def parse(cls, text: str) -> "CyclePhases":
        """``"R:2,E:3"`` style list."""
        items = []
        for part in text.split(","):
            try:
                ph, dur = part.split(":")
                items.append((Phase.parse(ph), float(dur)))
            except ValueError:
                raise ParamError(f"bad cycle item {part!r}; expected PHASE:DURATION") from None
        return cls(tuple(items))

    @property
    def total(self) -> float:
        return float(sum(d for _, d in self.phases))


def cycle_schedule(phases: CyclePhases, start_phase: Optional[Phase] = None) -> SwitchingSchedule:
    """Recession runs IS-LM (``F``), expansion runs QY-ML (``G``).

    Switch instants are the cumulative phase durations, excluding the end of
    the final phase.
    """
    first = phases.phases[0][0]
    if start_phase is not None and Phase(start_phase) is not first:
        raise ParamError(f"start phase {Phase(start_phase).value} does not match the first phase {first.value}")
    times = np.cumsum([d for _, d in phases.phases])[:-1]
    return SwitchingSchedule("F" if first is Phase.RECESSION else "G", tuple(float(t) for t in times))


# -- propositions ---------------------------------------------------------------


def _unique_equilibrium(fld: PlanarField, domain: Rect, name: str):
    pts = find_singular_points(fld, domain)
    if not pts:
        raise NoEquilibrium(f"{name}: no equilibrium in the domain")
    if len(pts) > 1:
        raise MultipleEquilibria(f"{name}: {len(pts)} equilibria in the domain")
    return pts[0]


def _spectrum(J: np.ndarray) -> dict:
    det = float(np.linalg.det(J))
    tr = float(np.trace(J))
    disc = tr * tr - 4 * det
    lam = np.linalg.eigvals(J)
    lam = sorted(lam, key=lambda z: (-z.real, -z.imag))
    return {
        "det": det,
        "trace": tr,
        "discriminant": disc,
        "eigenvalues": [[float(z.real), float(z.imag)] for z in lam],
        "kind": classify(J)[0].value,
    }


def verify_propositions(funcs: EconFunctions, params: EconParams, domain: Rect = DEFAULT_DOMAIN) -> dict:
    """Check the stability claims at both equilibria.

    The demand equilibrium must have both eigenvalues in the left half-plane
    (node iff the discriminant is positive); the supply equilibrium must have
    ``det J < 0``.  The determinant is also rebuilt from the economic
    partials and reported as ``det_from_partials``.
    """
    f, g = islm_field(funcs, params), qyml_field(funcs, params)
    sp_f = _unique_equilibrium(f, domain, "IS-LM")
    sp_g = _unique_equilibrium(g, domain, "QY-ML")

    Y, R = (np.array([v]) for v in sp_f.location)
    i = R + params.rate_offset()
    d = lambda fn, a, k: float(_partial(fn, a, k)[0])  # noqa: E731
    I_Y, I_R, S_Y, S_R = d(funcs.I, (Y, R), 0), d(funcs.I, (Y, R), 1), d(funcs.S, (Y, R), 0), d(funcs.S, (Y, R), 1)
    L_Y, L_R, M_Y, M_R = d(funcs.L, (Y, i), 0), d(funcs.L, (Y, i), 1), d(funcs.M, (Y, i), 0), d(funcs.M, (Y, i), 1)
    det_partials = params.alpha_d * params.beta_d * ((I_Y - S_Y) * (L_R - M_R) - (I_R - S_R) * (L_Y - M_Y))

    islm = {"location": [float(v) for v in sp_f.location], "jacobian": sp_f.jac.tolist(), **_spectrum(sp_f.jac)}
    islm["det_from_partials"] = det_partials
    islm["stable"] = all(z[0] < 0 for z in islm["eigenvalues"])
    islm["kind_by_discriminant"] = (
        ("StableNode" if islm["discriminant"] > 0 else "StableFocus") if islm["stable"] else None
    )
    qyml = {"location": [float(v) for v in sp_g.location], "jacobian": sp_g.jac.tolist(), **_spectrum(sp_g.jac)}
    qyml["saddle"] = qyml["det"] < 0
    return {
        "islm": islm,
        "qyml": qyml,
        "holds": bool(islm["stable"] and qyml["saddle"]),
        "islm_kind": sp_f.kind.value,
        "qyml_kind": sp_g.kind.value,
    }


# -- model files -----------------------------------------------------------------


@dataclass(frozen=True)
class Model:
    name: str
    funcs: EconFunctions
    params: EconParams
    domain: Rect = DEFAULT_DOMAIN

    def branching(self, *, force: bool = False) -> EulerBranching:
        return build_islm_qyml(self.funcs, self.params, self.domain, force=force)


def reference_model(**overrides) -> Model:
    p = EconParams().with_overrides(**overrides)
    return Model("linear_reference", EconFunctions.from_params(p), p)


def load_model(src: Union[str, Path, Mapping]) -> Model:
    """Load a model from a JSON file path or an already-parsed mapping.

    Schema: ``{"builtin": "linear_reference", "params": {...}}`` (overrides
    may also sit at top level) or ``{"expressions": {...}, "constants":
    {...}}``.  An optional ``"domain": [Y0, R0, Y1, R1]`` replaces the
    default rectangle.
    """
    if isinstance(src, Mapping):
        obj, name = dict(src), "model"
    else:
        path = Path(src)
        obj, name = json.loads(path.read_text()), path.stem
    name = obj.pop("name", name)
    domain = DEFAULT_DOMAIN
    if "domain" in obj:
        domain = Rect(*[float(v) for v in obj.pop("domain")])
    obj.pop("description", None)
    obj.pop("notes", None)
    if "builtin" in obj:
        kind = obj.pop("builtin")
        if kind != "linear_reference":
            raise ParamError(f"unknown builtin model {kind!r}")
        overrides = dict(obj.pop("params", {}))
        overrides.update(obj)
        p = EconParams().with_overrides(**overrides)
        return Model(name, EconFunctions.from_params(p), p, domain)
    if "expressions" in obj:
        exprs = obj.pop("expressions")
        consts = dict(obj.pop("constants", {}))
        consts.update(obj)
        allowed = set(_POSITIVE)
        bad = set(consts) - allowed
        if bad:
            raise ParamError(f"expression models take only the constants {sorted(allowed)}; got {sorted(bad)}")
        p = EconParams().with_overrides(**consts)
        return Model(name, EconFunctions.from_expressions(exprs), p, domain)
    raise ParamError("model file needs either 'builtin' or 'expressions'")
