import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from branchlab.errors import BranchingViolated, MultipleEquilibria, NoEquilibrium, ParamError
from branchlab.fields import Rect
from branchlab.macro import (
    DEFAULT_DOMAIN,
    CyclePhases,
    EconFunctions,
    EconParams,
    Phase,
    PropertyViolation,
    build_islm_qyml,
    cycle_schedule,
    islm_field,
    load_model,
    qyml_field,
    reference_model,
    validate_properties,
    verify_propositions,
)

REF = reference_model()
F = islm_field(REF.funcs, REF.params)
G = qyml_field(REF.funcs, REF.params)
# equilibria by hand: 18 - 0.2Y - 7R = 0 and 30 - 0.5Y - 6R = 0 against 0.4Y - 7R = 10.07
EQ_F = np.linalg.solve([[0.2, 7.0], [0.4, -7.0]], [18.0, 10.07])
EQ_G = np.linalg.solve([[0.5, 6.0], [0.4, -7.0]], [30.0, 10.07])

REF_EXPRESSIONS = {
    "I": "20 + 0.3*Y - 4*R",
    "S": "2 + 0.5*Y + 3*R",
    "L": "0.6*Y - 5*i",
    "M": "0.2*Y + 2*i",
    "Q": "30 + 0.5*Y - 6*R",
}

ys = st.floats(1, 100)
rs = st.floats(-5, 10)


def _hand_islm(Y, R):
    return 18 - 0.2 * Y - 7 * R, 0.4 * Y - 7 * R - 10.07


def _hand_qyml(Y, R):
    return 30 - 0.5 * Y - 6 * R, -(0.4 * Y - 7 * R - 10.07)


# -- fields -----------------------------------------------------------------------


def test_islm_at_origin():
    assert np.allclose(F((0.0, 0.0)), [18.0, -10.07], atol=1e-12)


def test_reference_equilibria():
    assert np.linalg.norm(F(EQ_F)) <= 1e-3 and np.linalg.norm(G(EQ_G)) <= 1e-3
    assert np.allclose(EQ_F, [46.7833, 1.2348], atol=1e-3)
    assert np.allclose(EQ_G, [45.8339, 1.1806], atol=1e-3)
    assert np.linalg.norm(EQ_F - EQ_G) > 0.1


@given(ys, rs)
def test_fields_match_hand_forms(Y, R):
    assert np.allclose(F((Y, R)), _hand_islm(Y, R), rtol=0, atol=1e-10)
    assert np.allclose(G((Y, R)), _hand_qyml(Y, R), rtol=0, atol=1e-10)


@given(ys, rs)
def test_alpha_d_doubling(Y, R):
    p = REF.params.with_overrides(alpha_d=2.0)
    F2 = islm_field(EconFunctions.from_params(p), p)
    a, b = F((Y, R)), F2((Y, R))
    assert b[0] == 2 * a[0] and b[1] == a[1]


@given(ys, rs, st.floats(0.1, 5), st.floats(0.1, 5))
def test_money_antisymmetry(Y, R, bd, bs):
    p = REF.params.with_overrides(beta_d=bd, beta_s=bs)
    fn = EconFunctions.from_params(p)
    rf, rg = islm_field(fn, p)((Y, R))[1], qyml_field(fn, p)((Y, R))[1]
    assert abs(bs * rf + bd * rg) <= 1e-12 * max(1.0, abs(bs * rf))


def test_shared_money_curve_at_equilibria():
    # each equilibrium lies on the common LM = ML curve
    assert abs(G(EQ_F)[1]) <= 1e-6
    assert abs(F(EQ_G)[1]) <= 1e-6


def test_analytic_jacobians():
    assert np.allclose(F.jac(EQ_F), [[-0.2, -7], [0.4, -7]])
    assert np.allclose(G.jac(EQ_G), [[-0.5, -6], [-0.4, 7]])
    assert F.jacobian_mode == "analytic"


@pytest.mark.parametrize("name", ["M_CB", "MP", "pi_e", "alpha_d", "beta_d", "alpha_s", "beta_s"])
def test_positive_constants_enforced(name):
    with pytest.raises(ParamError):
        EconParams(**{name: 0.0})


def test_params_reject_unknown_and_nonfinite():
    with pytest.raises(ParamError):
        EconParams().with_overrides(zeta=1.0)
    with pytest.raises(ParamError):
        EconParams(e_I=math.nan)
    assert EconParams().rate_offset() == pytest.approx(0.01, abs=1e-15)


def test_expression_model_matches_builtin():
    fn = EconFunctions.from_expressions(REF_EXPRESSIONS)
    Fe, Ge = islm_field(fn, REF.params), qyml_field(fn, REF.params)
    rng = np.random.default_rng(7)
    for Y, R in zip(rng.uniform(1, 100, 100), rng.uniform(-5, 10, 100)):
        assert np.allclose(Fe((Y, R)), F((Y, R)), atol=1e-12)
        assert np.allclose(Ge((Y, R)), G((Y, R)), atol=1e-12)


def test_expression_composite_production():
    exprs = dict(REF_EXPRESSIONS)
    del exprs["Q"]
    exprs.update(K="10 + 0.25*Y - 2*R", N="5 + 0.125*Y - R", T="15 + 0.125*Y - 3*R", Q="K + N + T")
    fn = EconFunctions.from_expressions(exprs)
    assert fn.composite
    for Y, R in ((1.0, 0.0), (50.0, 2.0), (80.0, -3.0)):
        assert fn.Qeff(Y, R) == pytest.approx(30 + 0.5 * Y - 6 * R, abs=1e-12)
    assert validate_properties(fn, REF.params).passed


def test_expression_missing_and_unknown_keys():
    with pytest.raises(ParamError):
        EconFunctions.from_expressions({"I": "1"})
    with pytest.raises(ParamError):
        EconFunctions.from_expressions({**REF_EXPRESSIONS, "Z": "1"})


def test_log_domain_error_is_nan():
    fn = EconFunctions.from_expressions({**REF_EXPRESSIONS, "I": "ln(Y) - 4*R"})
    assert np.isnan(islm_field(fn, REF.params)((-1.0, 0.0))[0])


# -- properties ---------------------------------------------------------------------


def test_reference_properties_pass():
    rep = validate_properties(REF.funcs, REF.params, grid=50, domain=DEFAULT_DOMAIN)
    assert rep.passed and rep.failed() == []
    assert all(c.pass_fraction == 1.0 for c in rep.checks)
    assert rep["I_Y<S_Y"].passed and rep["R_IS(0+)>R_LM(0+)"].passed


@pytest.mark.parametrize(
    "override,condition",
    [({"i_Y": 0.7}, "I_Y<S_Y"), ({"m_Y": 0.9}, "0<M_Y<L_Y"), ({"q_Y": 1.2}, "Q_Y<1")],
)
def test_targeted_violations(override, condition):
    m = reference_model(**override)
    rep = validate_properties(m.funcs, m.params)
    assert rep.failed() == [condition]
    assert rep[condition].pass_fraction < 1.0


def test_limit_margins_match_hand_values():
    rep = validate_properties(REF.funcs, REF.params)
    # R_IS(0+) = 18/7 vs R_LM(0+) = -10.07/7 (at Y = 1e-3, affine so the limit is exact to O(1e-3))
    assert rep["R_IS(0+)>R_LM(0+)"].worst_margin == pytest.approx(18 / 7 + 10.07 / 7, abs=1e-3)
    assert rep["R_QY(0+)>R_ML(0+)"].worst_margin == pytest.approx(5 + 10.07 / 7, abs=1e-3)


def test_nominal_rate_warning():
    rep = validate_properties(REF.funcs, REF.params)
    assert any("nominal rate" in w for w in rep.warnings)


def test_report_json():
    d = json.loads(json.dumps(validate_properties(REF.funcs, REF.params).to_dict()))
    assert d["checks"] and {"condition", "pass_fraction", "worst_point", "pass"} <= set(d["checks"][0])


# -- building the inclusion ---------------------------------------------------------


def test_build_reference():
    eb = build_islm_qyml(REF.funcs, REF.params, DEFAULT_DOMAIN)
    assert eb.meta["branching"].passed and eb.meta["properties"].passed
    assert not eb.meta["forced"]


def test_build_refuses_failing_properties():
    m = reference_model(i_Y=0.7)
    with pytest.raises(PropertyViolation):
        build_islm_qyml(m.funcs, m.params)
    eb = build_islm_qyml(m.funcs, m.params, force=True)
    assert eb.meta["forced"] and eb.meta["properties"].failed() == ["I_Y<S_Y"]


def test_build_detects_coincident_branches():
    # I - S = Q - Y = 0 and the money term vanishes where L - M = M_CB
    fn = EconFunctions.from_expressions({"I": "0", "S": "0", "L": "Y + 10", "M": "Y", "Q": "Y"})
    with pytest.raises(BranchingViolated):
        build_islm_qyml(fn, REF.params, force=True)


# -- cycles ---------------------------------------------------------------------------


def test_cycle_recession_first():
    ph = CyclePhases(((Phase.RECESSION, 2), (Phase.EXPANSION, 3), (Phase.RECESSION, 2)))
    s = cycle_schedule(ph)
    assert s.start == "F" and s.times == (2.0, 5.0)
    assert ph.total == 7.0


def test_cycle_single_phase():
    assert cycle_schedule(CyclePhases((("E", 4),))).times == ()
    assert cycle_schedule(CyclePhases((("E", 4),))).start == "G"


def test_cycle_irregular():
    s = cycle_schedule(CyclePhases.parse("R:1,E:2,R:1.5,E:0.5"))
    assert s.times == (1.0, 3.0, 4.5)


@pytest.mark.parametrize("text", ["R:1,R:2", "R:0", "X:1", "R1", "R:-2"])
def test_cycle_invalid(text):
    with pytest.raises(ParamError):
        CyclePhases.parse(text)


def test_cycle_start_phase_mismatch():
    with pytest.raises(ParamError):
        cycle_schedule(CyclePhases.parse("R:1,E:1"), Phase.EXPANSION)


@given(st.lists(st.floats(0.01, 10), min_size=1, max_size=12), st.sampled_from(list(Phase)))
def test_cycle_times_are_cumulative(durs, first):
    order = [first, Phase.EXPANSION if first is Phase.RECESSION else Phase.RECESSION]
    ph = CyclePhases(tuple((order[k % 2], d) for k, d in enumerate(durs)))
    s = cycle_schedule(ph)
    assert len(s.times) == len(durs) - 1
    assert np.allclose(s.times, np.cumsum(durs)[:-1])
    assert (s.start == "F") == (first is Phase.RECESSION)


# -- propositions ----------------------------------------------------------------------


def test_propositions_reference():
    rep = verify_propositions(REF.funcs, REF.params)
    assert rep["holds"]
    a, b = rep["islm"], rep["qyml"]
    # hand quadratic: lambda^2 + 7.2 lambda + 4.2 = 0
    lam = sorted([(-7.2 + math.sqrt(35.04)) / 2, (-7.2 - math.sqrt(35.04)) / 2], reverse=True)
    assert a["det"] == pytest.approx(4.2, abs=1e-9) and a["trace"] == pytest.approx(-7.2, abs=1e-9)
    assert a["discriminant"] == pytest.approx(35.04, abs=1e-9)
    assert [z[0] for z in a["eigenvalues"]] == pytest.approx(lam, abs=1e-9)
    assert np.allclose(lam, [-0.6403, -6.5597], atol=1e-3)
    assert a["kind_by_discriminant"] == "StableNode" and rep["islm_kind"] == "StableNode"
    assert a["det_from_partials"] == pytest.approx(4.2, abs=1e-6)
    # hand quadratic: lambda^2 - 6.5 lambda - 5.9 = 0
    assert b["det"] == pytest.approx(-5.9, abs=1e-6)
    mu = sorted([(6.5 + math.sqrt(6.5**2 + 23.6)) / 2, (6.5 - math.sqrt(6.5**2 + 23.6)) / 2], reverse=True)
    assert [z[0] for z in b["eigenvalues"]] == pytest.approx(mu, abs=1e-9)
    assert np.allclose(mu, [7.307, -0.807], atol=1e-3)
    assert rep["qyml_kind"] == "Saddle" and b["saddle"]


def test_propositions_scale_with_speeds():
    base = verify_propositions(REF.funcs, REF.params)
    m = reference_model(alpha_d=3.0, beta_d=3.0)
    rep = verify_propositions(m.funcs, m.params)
    for x, y in zip(base["islm"]["eigenvalues"], rep["islm"]["eigenvalues"]):
        assert y[0] == pytest.approx(3 * x[0], abs=1e-9)
    assert rep["islm_kind"] == base["islm_kind"]


def test_propositions_no_equilibrium():
    with pytest.raises(NoEquilibrium):
        verify_propositions(REF.funcs, REF.params, Rect(60, 5, 90, 9))


def test_propositions_multiple_equilibria():
    fn = EconFunctions.from_expressions({**REF_EXPRESSIONS, "I": "20 + 0.3*Y - 4*R + 0.01*(Y - 50)^2"})
    # reduces to 0.01 Y^2 - 1.6 Y + 53.07 = 0 on the LM curve: two real roots near 47 and 113
    with pytest.raises(MultipleEquilibria):
        verify_propositions(fn, REF.params, Rect(1, -5, 150, 10))


# -- model files --------------------------------------------------------------------------


def test_load_builtin_with_overrides(tmp_path):
    p = tmp_path / "m.json"
    p.write_text(json.dumps({"builtin": "linear_reference", "params": {"i_Y": 0.35}, "domain": [1, -4, 90, 9]}))
    m = load_model(p)
    assert m.name == "m" and m.params.i_Y == 0.35 and m.domain.as_tuple() == (1, -4, 90, 9)


def test_load_expression_model():
    m = load_model({"name": "e", "expressions": REF_EXPRESSIONS, "constants": {"M_CB": 12.0}})
    assert m.params.M_CB == 12.0
    assert islm_field(m.funcs, m.params)((0.0, 0.0))[1] == pytest.approx(-7 * 0.01 - 12.0, abs=1e-12)


def test_load_rejects_bad_models():
    with pytest.raises(ParamError):
        load_model({"builtin": "other"})
    with pytest.raises(ParamError):
        load_model({"expressions": REF_EXPRESSIONS, "constants": {"i_Y": 0.2}})
    with pytest.raises(ParamError):
        load_model({"params": {}})


def test_packaged_models_load():
    from importlib import resources

    root = resources.files("branchlab") / "models"
    names = sorted(p.name for p in root.iterdir() if p.name.endswith(".json"))
    assert {"linear_reference.json", "broken_iY.json", "kaldor.json"} <= set(names)
    for n in names:
        load_model(str(root / n))
