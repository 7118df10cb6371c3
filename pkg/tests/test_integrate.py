import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from branchlab.errors import StepUnderflow
from branchlab.fields import PlanarField, Rect, linear_field
from branchlab.integrate import (
    EventSpec,
    integrate,
    integrate_backward_until,
    integrate_through,
    integrate_until,
    intersect_trajectories,
    trajectories_to_csv,
)

GROWTH = linear_field(np.eye(2), name="growth")
ROTATION = PlanarField("rotation", lambda x, y: (-y, x))
DECAY = linear_field(-np.eye(2), name="decay")

CLOSED_FORM = [
    (GROWTH, (1.0, 0.0), 1.0, (math.e, 0.0)),
    (ROTATION, (1.0, 0.0), math.pi / 2, (0.0, 1.0)),
    (DECAY, (3.0, 4.0), 10.0, (3 * math.exp(-10), 4 * math.exp(-10))),
]


@pytest.mark.parametrize("fld,x0,T,exact", CLOSED_FORM, ids=["exp", "rotation", "decay"])
def test_closed_form_endpoints(fld, x0, T, exact):
    tr = integrate(fld, x0, 0.0, T, rtol=1e-9)
    assert tr.t_end == T
    assert np.linalg.norm(tr.end - np.array(exact)) <= 1e-6


def test_decay_endpoint_tight():
    tr = integrate(DECAY, (3.0, 4.0), 0.0, 10.0)
    assert np.allclose(tr.end, [3e0 * math.exp(-10), 4 * math.exp(-10)], atol=1e-9)


@pytest.mark.parametrize("fld,x0,T,exact", CLOSED_FORM, ids=["exp", "rotation", "decay"])
def test_halving_rtol_never_increases_error(fld, x0, T, exact):
    errs = []
    for k in range(8):
        rtol = 1e-5 / 2**k
        tr = integrate(fld, x0, 0.0, T, rtol=rtol, atol=1e-14)
        errs.append(float(np.linalg.norm(tr.end - np.array(exact))))
    for a, b in zip(errs, errs[1:]):
        assert b <= a * (1 + 1e-9) + 1e-15


@pytest.mark.parametrize("fld,x0,T,exact", CLOSED_FORM, ids=["exp", "rotation", "decay"])
def test_error_bounded_by_rtol(fld, x0, T, exact):
    for rtol in (1e-6, 1e-8):
        tr = integrate(fld, x0, 0.0, T, rtol=rtol)
        assert np.linalg.norm(tr.end - np.array(exact)) <= 100 * rtol * max(1.0, np.linalg.norm(exact))


def test_backward_integration_stored_chronologically():
    tr = integrate(GROWTH, (1.0, 0.0), 0.0, -1.0)
    assert np.all(np.diff(tr.t) > 0)
    assert tr.t_origin == 0.0
    assert abs(tr(-1.0)[0] - math.exp(-1)) <= 1e-8


def test_dense_output_matches_closed_form():
    tr = integrate(ROTATION, (1.0, 0.0), 0.0, 3.0)
    ts = np.linspace(0, 3, 101)
    P = tr(ts)
    assert np.max(np.abs(P - np.column_stack((np.cos(ts), np.sin(ts))))) <= 1e-7


def test_domain_exit_flags_partial():
    tr = integrate(GROWTH, (1.0, 0.0), 0.0, 10.0, domain=Rect(-2, -2, 2, 2))
    assert tr.domain_exit
    assert tr.t_end < 10.0
    assert abs(tr.end[0] - 2.0) <= 1e-6


def test_t1_equal_t0_rejected():
    with pytest.raises(ValueError):
        integrate(GROWTH, (1, 0), 1.0, 1.0)


def test_singular_field_underflows():
    blow = PlanarField("blow", lambda x, y: (1.0 / (1.0 - x) ** 2, 0.0 * y))
    with pytest.raises(StepUnderflow):
        integrate(blow, (0.0, 0.0), 0.0, 5.0)


@given(
    st.floats(-2, 2),
    st.floats(-2, 2),
    st.floats(0.1, 2.0),
    st.sampled_from([[[-1, 2], [-2, -1]], [[0.5, 1], [1, -0.5]], [[0, -1], [1, 0]]]),
)
def test_time_reversal_returns_to_start(x, y, T, A):
    fld = linear_field(A)
    fwd = integrate(fld, (x, y), 0.0, T, rtol=1e-10)
    back = integrate(fld, fwd.end, T, 0.0, rtol=1e-10)
    assert np.linalg.norm(back.start - np.array([x, y])) <= 1e-7 * (1 + math.hypot(x, y))


# -- events ---------------------------------------------------------------------


def _norm_minus_one(t, p):
    return float(np.hypot(p[0], p[1])) - 1.0


def test_event_rising_growth():
    tr, hits = integrate_until(GROWTH, (0.5, 0.0), 0.0, [EventSpec(_norm_minus_one, "rising", True)], 5.0)
    assert len(hits) == 1
    assert abs(hits[0].t - math.log(2)) <= 1e-9
    assert tr.t_end == hits[0].t


def test_event_falling_rotation():
    ev = EventSpec(lambda t, p: p[0], "falling", True)
    _, hits = integrate_until(ROTATION, (1.0, 0.0), 0.0, [ev], 5.0)
    assert abs(hits[0].t - math.pi / 2) <= 1e-9


def test_event_falling_decay():
    _, hits = integrate_until(DECAY, (2.0, 0.0), 0.0, [EventSpec(_norm_minus_one, "falling")], 5.0)
    assert abs(hits[0].t - math.log(2)) <= 1e-9


def test_event_no_hit_returns_empty():
    tr, hits = integrate_until(DECAY, (0.5, 0.0), 0.0, [EventSpec(_norm_minus_one, "rising")], 2.0)
    assert hits == []
    assert tr.t_end == 2.0


def test_event_values_refined():
    evs = [EventSpec(lambda t, p: p[0], "any"), EventSpec(lambda t, p: p[1], "any")]
    _, hits = integrate_until(ROTATION, (1.0, 0.0), 0.0, evs, 7.0)
    assert len(hits) >= 4
    for h in hits:
        assert abs(evs[h.spec_index].fn(h.t, h.p)) <= 1e-10
    # zeros of cos and sin on (0, 7]
    expect = sorted([math.pi / 2, math.pi, 3 * math.pi / 2, 2 * math.pi])
    got = sorted(h.t for h in hits)
    for t in expect:
        assert min(abs(t - g) for g in got) <= 1e-9


def test_integrate_until_requires_forward():
    with pytest.raises(ValueError):
        integrate_until(GROWTH, (1, 0), 0.0, [], -1.0)


def test_backward_until():
    ev = EventSpec(_norm_minus_one, "rising", True)
    tr, hits = integrate_backward_until(DECAY, (0.5, 0.0), 0.0, [ev], -5.0)
    assert abs(hits[0].t + math.log(2)) <= 1e-9


# -- intersections ----------------------------------------------------------------


def _line(p0, v, T=3.0):
    fld = PlanarField("line", lambda x, y: (v[0] + 0 * x, v[1] + 0 * y))
    return integrate(fld, p0, 0.0, T, max_step=0.05)


def test_crossing_of_two_lines():
    a = _line((0, 0), (1, 1))
    b = _line((0, 2), (1, -1))
    cs = intersect_trajectories(a, b)
    assert len(cs) == 1
    assert np.allclose(cs[0].p, [1, 1], atol=1e-10)
    assert abs(cs[0].ta - 1) <= 1e-9 and abs(cs[0].tb - 1) <= 1e-9


def test_circle_against_horizontal_line():
    circle = integrate(ROTATION, (0.0, 1.0), 0.0, 2 * math.pi - 0.1)
    line = _line((-2.0, 0.0), (1.0, 0.0), T=4.0)
    cs = intersect_trajectories(circle, line)
    xs = sorted(c.p[0] for c in cs)
    assert len(xs) == 2
    assert np.allclose(xs, [-1, 1], atol=1e-7)


def test_spiral_crossing_radii_decay():
    spiral = integrate(linear_field([[-1, -1], [1, -1]]), (0.0, 2.0), 0.0, 12.0, rtol=1e-11, atol=1e-14)
    ray = _line((1e-7, 0.0), (1.0, 0.0), T=3.0)
    cs = sorted(intersect_trajectories(spiral, ray, tol=1e-13), key=lambda c: c.ta)
    assert len(cs) >= 2
    # polar closed form: r = 2 exp(-theta') with theta' the angle swept from (0, 2)
    r = [c.p[0] for c in cs]
    assert abs(r[0] - 2 * math.exp(-1.5 * math.pi)) <= 1e-6
    assert abs(r[1] / r[0] - math.exp(-2 * math.pi)) <= 1e-6


def test_intersection_symmetry():
    a = integrate(ROTATION, (0.0, 1.0), 0.0, 6.0)
    b = _line((-2.0, 0.3), (1.0, 0.0), T=4.0)
    ab = intersect_trajectories(a, b)
    ba = intersect_trajectories(b, a)
    assert len(ab) == len(ba) == 2
    for c in ab:
        twin = min(ba, key=lambda d: np.linalg.norm(d.p - c.p))
        assert np.linalg.norm(twin.p - c.p) <= 1e-9
        assert abs(twin.ta - c.tb) <= 1e-8 and abs(twin.tb - c.ta) <= 1e-8


def test_parallel_lines_do_not_cross():
    assert intersect_trajectories(_line((0, 0), (1, 0)), _line((0, 1), (1, 0))) == []


def test_integrate_through_spans_both_directions():
    tr = integrate_through(GROWTH, (1.0, 0.0), 1.0, 1.0)
    assert tr.t_start == -1.0 and tr.t_end == 1.0
    assert abs(tr(0.0)[0] - 1.0) <= 1e-12


def test_csv_format():
    tr = integrate(ROTATION, (1.0, 0.0), 0.0, 0.5, branch="F")
    text = trajectories_to_csv([tr])
    lines = text.split("\n")
    assert lines[0] == "t,x,y,branch"
    assert "\r" not in text
    assert lines[1].startswith("0.0,1.0,0.0,F")
    assert text.endswith("\n")
