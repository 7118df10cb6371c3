"""Acceptance suite: thirteen end-to-end criteria at their stated tolerances.

Each criterion is a function returning ``(passed, detail)``.  Under pytest
every criterion is one test and its verdict line is echoed in the terminal
summary; run this file directly to print the verdict lines only.
"""

from __future__ import annotations

import contextlib
import io
import json
import math
import os
import sys
import tempfile
import time
from functools import lru_cache

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(__file__))

from branchlab.branching import gamma1_family, build_gamma0  # noqa: E402
from branchlab.chaos import certify, invariance_and_density_report, scrambled_diagnostic, theta_profile  # noqa: E402
from branchlab.cli import main as cli_main  # noqa: E402
from branchlab.errors import ExprSyntaxError  # noqa: E402
from branchlab.expr import eval_expr, parse_expr, to_source  # noqa: E402
from branchlab.fields import EquilibriumKind as K  # noqa: E402
from branchlab.fields import classify, linear_field  # noqa: E402
from branchlab.integrate import integrate  # noqa: E402
from branchlab.macro import (  # noqa: E402
    DEFAULT_DOMAIN,
    EconFunctions,
    islm_field,
    qyml_field,
    reference_model,
    validate_properties,
    verify_propositions,
)
from corpus import node_pair, node_pair_loop, table1_cases, table2_cases  # noqa: E402

VERDICTS: list = []


@lru_cache(maxsize=None)
def _node_setup():
    eb = node_pair()
    loop = node_pair_loop(eb)
    x0 = loop.interior_point()
    g0, period = build_gamma0(eb, loop, x0, periods=10)
    family = gamma1_family(eb, loop, x0, 2, periods=10)
    return eb, loop, x0, g0, period, family


def _cli(argv):
    out, err = io.StringIO(), io.StringIO()
    with contextlib.redirect_stdout(out), contextlib.redirect_stderr(err):
        code = cli_main(argv)
    return code, out.getvalue(), err.getvalue()


# -- criteria ---------------------------------------------------------------------------


def criterion_1():
    """Canonical classifications with hand eigenvalues."""
    cases = [
        ([[1, 0], [0, 1]], K.UNSTABLE_NODE, (1, 1)),
        ([[-1, -1], [1, -1]], K.STABLE_FOCUS, (complex(-1, 1), complex(-1, -1))),
        ([[1, 0], [0, -1]], K.SADDLE, (1, -1)),
        ([[0, 1], [-1, 0]], K.NON_HYPERBOLIC, (1j, -1j)),
    ]
    worst, kinds_ok = 0.0, True
    for A, kind, lam in cases:
        got, eig = classify(A)
        kinds_ok &= got is kind
        worst = max(worst, abs(eig.lambda1 - lam[0]), abs(eig.lambda2 - lam[1]))
    _, sad = classify([[1, 0], [0, -1]])
    vec_ok = np.allclose(np.abs(sad.e1), [1, 0]) and np.allclose(np.abs(sad.e2), [0, 1])
    return kinds_ok and vec_ok and worst <= 1e-9, f"kinds ok={kinds_ok}, max eigenvalue error {worst:.1e}"


def criterion_2():
    """Closed-form endpoints and monotone error under rtol halving."""
    rot = linear_field([[0, -1], [1, 0]])
    cases = [
        (linear_field(np.eye(2)), (1.0, 0.0), 1.0, (math.e, 0.0)),
        (rot, (1.0, 0.0), math.pi / 2, (0.0, 1.0)),
        (linear_field(-np.eye(2)), (3.0, 4.0), 10.0, (3 * math.exp(-10), 4 * math.exp(-10))),
    ]
    worst, monotone = 0.0, True
    for fld, x0, T, exact in cases:
        worst = max(worst, float(np.linalg.norm(integrate(fld, x0, 0.0, T, rtol=1e-9).end - exact)))
        errs = [float(np.linalg.norm(integrate(fld, x0, 0.0, T, rtol=1e-5 / 2**k, atol=1e-14).end - exact)) for k in range(8)]
        monotone &= all(b <= a * (1 + 1e-9) + 1e-15 for a, b in zip(errs, errs[1:]))
    return worst <= 1e-6 and monotone, f"max endpoint error {worst:.1e} at rtol 1e-9, monotone={monotone}"


def criterion_3():
    """Stability of both reference equilibria against hand quadratics."""
    m = reference_model()
    rep = verify_propositions(m.funcs, m.params)
    lam = sorted(z[0] for z in rep["islm"]["eigenvalues"])
    # lambda^2 + 7.2 lambda + 4.2 = 0
    hand = sorted([(-7.2 - math.sqrt(35.04)) / 2, (-7.2 + math.sqrt(35.04)) / 2])
    ok_f = np.allclose(lam, [-6.5597, -0.6403], atol=1e-3) and np.allclose(lam, hand, atol=1e-9)
    ok_f &= rep["islm_kind"] == "StableNode"
    det = rep["qyml"]["det"]
    ok_g = abs(det - (-0.5 * 7 - (-6) * (-0.4))) <= 1e-6 and rep["qyml_kind"] == "Saddle"
    return ok_f and ok_g, f"IS-LM eigenvalues {lam[1]:.4f}, {lam[0]:.4f} ({rep['islm_kind']}); QY-ML det {det:.6f}"


def criterion_4():
    """Every hyperbolic-pairs row certified with matching provenance."""
    t0 = time.perf_counter()
    bad = []
    rows = table1_cases()
    for row, eb in rows:
        c = certify(eb)
        ok = c.flags["devaney"] and c.provenance.get("row") == row
        if ok and c.provenance.get("variant") == "Region":
            ok = c.flags["li_yorke"] and c.flags["distributional"]
        if not ok:
            bad.append(row)
    dt = time.perf_counter() - t0
    return not bad, f"{len(rows) - len(bad)}/{len(rows)} rows certified in {dt:.1f} s" + (f"; failed: {bad}" if bad else "")


def criterion_5():
    """Every collinear-saddle sub-row certified; arc rows anti-parallel to 1e-6."""
    bad, arcs, worst = [], 0, 0.0
    rows = table2_cases()
    for row, eb in rows:
        c = certify(eb)
        ok = c.flags["devaney"] and c.provenance.get("row") == row
        if ok and c.geometry.variant == "Arc":
            arcs += 1
            dev = float(np.max(np.abs(theta_profile(eb, c.geometry.arc) - math.pi)))
            worst = max(worst, dev)
            ok = dev <= 1e-6
        if not ok:
            bad.append(row)
    return not bad, f"{len(rows) - len(bad)}/{len(rows)} sub-rows, {arcs} arcs, max |theta - pi| {worst:.1e}"


def criterion_6():
    """Periodic solution closes each period; switch times follow the recurrence."""
    _, _, x0, g0, period, _ = _node_setup()
    ret = max(float(np.linalg.norm(g0(k * period) - x0)) for k in (1, 2, 3))
    m, times = g0.meta, g0.schedule.times
    T1, Tp, Ts = m["T1"], m["T_phi"], m["T_psi"]
    rec = 0.0
    for k in range(1, (len(times) - 1) // 2 + 1):
        rec = max(rec, abs(times[2 * k - 1] - (T1 + (k - 1) * Tp + k * Ts)), abs(times[2 * k] - (T1 + k * Tp + k * Ts)))
    return ret <= 1e-4 and rec <= 1e-12 and times[0] == T1, f"return error {ret:.1e}, recurrence error {rec:.1e}"


def criterion_7():
    """Solutions stay in the loop region; the periodic one leaves cells uncovered."""
    _, loop, _, g0, _, family = _node_setup()
    rep = invariance_and_density_report([g0, *family[:2]], loop, n_samples=1000, grid=50, boundary_tol=1e-6)
    ok = rep.passed and all(f == 1.0 for f in rep.inside_fraction) and rep.uncovered_cells[0] >= 1
    return ok, f"inside fractions {rep.inside_fraction}, uncovered cells {rep.uncovered_cells[0]} of {rep.region_cells}"


def criterion_8():
    """Finite-horizon scrambling proxy between two switched solutions."""
    _, loop, _, g0, period, family = _node_setup()
    d = scrambled_diagnostic(g0, family[0], horizon=10 * period)
    ok = d["min_dist"] < 1e-2 and d["max_dist"] > 0.1 * loop.diameter
    return ok, f"min {d['min_dist']:.1e}, max {d['max_dist']:.3f} vs 0.1 diameter {0.1 * loop.diameter:.3f}"


def criterion_9():
    """End-to-end demo on the reference macro model."""
    with tempfile.TemporaryDirectory() as tmp:
        code, out, _ = _cli(["demo", "islm", "--out", tmp])
    d = json.loads(out)
    eq_ok = np.allclose(d["equilibria"]["islm"], [46.7833, 1.2348], atol=1e-3) and np.allclose(
        d["equilibria"]["qyml"], [45.8339, 1.1806], atol=1e-3
    )
    curve = max(abs(v) for v in d["other_branch_R_dot"].values())
    ok = code == 0 and d["certified"] and d["variant"] == "Region"
    ok = ok and d["provenance"] == "stable node - unstable saddle" and eq_ok and curve <= 1e-6
    return ok, f"exit {code}, {d['variant']} '{d['provenance']}', other-branch R' {curve:.1e}"


def criterion_10():
    """Reference passes every condition; three targeted violations fail exactly their own."""
    ref = reference_model()
    rep = validate_properties(ref.funcs, ref.params, grid=50, domain=DEFAULT_DOMAIN)
    ok = rep.passed and all(c.pass_fraction == 1.0 for c in rep.checks)
    got = {}
    for over, cond in (({"i_Y": 0.7}, "I_Y<S_Y"), ({"m_Y": 0.9}, "0<M_Y<L_Y"), ({"q_Y": 1.2}, "Q_Y<1")):
        m = reference_model(**over)
        got[cond] = validate_properties(m.funcs, m.params).failed()
        ok &= got[cond] == [cond]
    return ok, f"reference {len(rep.checks)} conditions pass; violations -> {got}"


def criterion_11():
    """Money-equation antisymmetry on a 100 x 100 lattice."""
    p = reference_model(beta_d=1.7, beta_s=0.6).params
    fn = EconFunctions.from_params(p)
    f, g = islm_field(fn, p), qyml_field(fn, p)
    X, Y = DEFAULT_DOMAIN.grid(100)
    _, rf = f.eval_grid(X, Y)
    _, rg = g.eval_grid(X, Y)
    worst = float(np.max(np.abs(p.beta_s * rf + p.beta_d * rg)))
    return worst <= 1e-12 and X.size == 10_000, f"max |beta_s R'_f + beta_d R'_g| = {worst:.1e} over {X.size} points"


def criterion_12():
    """Parser round trip, documented values and error offsets."""
    from test_expr import CORPUS

    trip = all(parse_expr(to_source(parse_expr(s))) == parse_expr(s) for s in CORPUS)
    vals = [
        abs(eval_expr(parse_expr("20 + 0.3*Y - 4*R"), {"Y": 10, "R": 1}) - 19) <= 1e-12,
        eval_expr(parse_expr("-Y^2"), {"Y": 3}) == -9,
        abs(eval_expr(parse_expr("exp(ln(2.5))"), {}) - 2.5) <= 1e-12,
    ]
    try:
        parse_expr("0.3*Y +")
        offset = None
    except ExprSyntaxError as exc:
        offset = exc.offset
    ok = trip and all(vals) and offset == 7 and len(CORPUS) >= 50
    return ok, f"round trip {len(CORPUS)} expressions ok={trip}, examples ok={all(vals)}, offset {offset}"


def criterion_13():
    """Refusals for coincident and centre fixtures with exit code 1."""
    fixtures = {
        "CoincidentEquilibria": ["--f=-x,-y", "--g=-2*x+y,-x-2*y", "--region=-1,-1,1,1"],
        "NonHyperbolic": ["--f=-y,x", "--g=2-x,-y", "--region=-1,-1,3,1"],
    }
    seen = {}
    for reason, argv in fixtures.items():
        code, out, err = _cli(["certify", *argv])
        e = json.loads(err.strip().splitlines()[-1])
        seen[reason] = (code, e["error"], json.loads(out)["flags"]["devaney"])
    ok = all(v == (1, r, False) for r, v in seen.items())
    return ok, "; ".join(f"{r}: exit {v[0]}, reason {v[1]}" for r, v in seen.items())


CRITERIA = [globals()[f"criterion_{k}"] for k in range(1, 14)]


def _verdict(k, fn):
    t0 = time.perf_counter()
    ok, detail = fn()
    line = f"ACCEPTANCE {k:2d} {'PASS' if ok else 'FAIL'} ({time.perf_counter() - t0:.1f} s) {fn.__doc__.strip()} {detail}"
    return ok, line


@pytest.mark.parametrize("k", range(1, 14), ids=[f"criterion_{k}" for k in range(1, 14)])
def test_acceptance(k):
    ok, line = _verdict(k, CRITERIA[k - 1])
    VERDICTS.append(line)
    print(line)
    assert ok, line


if __name__ == "__main__":
    failed = 0
    for k, fn in enumerate(CRITERIA, 1):
        ok, line = _verdict(k, fn)
        failed += not ok
        print(line, flush=True)
    sys.exit(1 if failed else 0)
