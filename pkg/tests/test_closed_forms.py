import logging
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from analysis import closed_forms
from analysis.converter_models import CompensatorParams, PowerStageParams, Scheme, build_model, type3_guideline
from analysis.harmonic_balance import TransferFunction
from analysis.sampled_data import critical_vs_approx
from presets.design_examples import DesignExamples
from utils.errors import ModelError
from utils.results import ABOVE, BELOW
from utils.settings import Settings


def _q(D):
    return 1.0 - 2.0 * D + 2.0 * D * D


def _type3(p2_ratio=None):
    ps = PowerStageParams(**DesignExamples.EX4_POWER_STAGE)
    cp = type3_guideline(ps, DesignExamples.EX4_KC, DesignExamples.EX4_KAPPA_Z)
    if p2_ratio is not None:
        cp = cp.with_values(p2=p2_ratio * ps.omega_s)
    return ps, cp


@settings(max_examples=30, deadline=None)
@given(st.floats(min_value=0.05, max_value=0.95))
def test_pvmc_forms_without_esr(D):
    ps = PowerStageParams(**DesignExamples.EX1_POWER_STAGE)
    eq28 = closed_forms.pvmc_vs_star(ps, 80.0, D, "eq28").value
    assert eq28 == pytest.approx(closed_forms.pvmc_vs_star(ps, 80.0, D, "eq30").value, rel=1e-12)
    assert closed_forms.pvmc_vs_star(ps, 80.0, D, "eq29").value == pytest.approx(
        closed_forms.pvmc_vs_star(ps, 80.0, D, "eq63").value)


def test_pvmc_closed_form_matches_approximate_boundary(pvmc_stage, pvmc_comp):
    m = build_model(pvmc_stage, pvmc_comp)
    D = 0.41
    expected = critical_vs_approx(m, D * m.T).value
    assert closed_forms.pvmc_vs_star(pvmc_stage, 80.0, D, "eq30").value == pytest.approx(expected, rel=1e-9)


def test_pvmc_loading_forms(stable_stage):
    eq64 = closed_forms.pvmc_vs_star(stable_stage, 8.4, 0.4, "eq64")
    eq65 = closed_forms.pvmc_vs_star(stable_stage, 8.4, 0.4, "eq65")
    assert "tau" in eq64.validity_note
    assert eq64.value > 0.0
    assert eq65.value > 0.0


def test_unknown_pvmc_form(pvmc_stage):
    with pytest.raises(ValueError):
        closed_forms.pvmc_vs_star(pvmc_stage, 80.0, 0.4, "eq99")


def test_duty_must_lie_inside_period(pvmc_stage):
    with pytest.raises(ModelError):
        closed_forms.pvmc_vs_star(pvmc_stage, 80.0, 1.0)


def test_v2_esr_bounds_are_reciprocal(pvmc_stage):
    results = closed_forms.v2_conditions(pvmc_stage.with_values(Rc=0.01, vs=10.0), 80.0, 0.3)
    assert results["eq34"].value == pytest.approx(1.0 / results["eq35"].value)
    assert results["eq33"].stable_side == ABOVE


def test_v2_no_esr_bound_above_half_duty(pvmc_stage):
    results = closed_forms.v2_conditions(pvmc_stage, 80.0, 0.6)
    assert results["eq35"].value == math.inf
    assert results["eq34"].value == 0.0


def test_cf_pvr_critical_duty_quarter(pvmc_stage):
    # Rc C/T = 5/8 puts the ramp-free boundary at D = 1/4
    ps = pvmc_stage.with_values(Rc=5.0 / 8.0 * pvmc_stage.T / pvmc_stage.C)
    assert closed_forms.cf_pvr_critical_duty(ps).value == pytest.approx(0.25, rel=1e-12)


def test_cf_pvr_small_esr_is_unstable_everywhere(pvmc_stage):
    result = closed_forms.cf_pvr_critical_duty(pvmc_stage.with_values(Rc=1e-3))
    assert result.value == 0.0
    assert "unstable" in result.validity_note


def test_cmc_critical_duty_solves_ramp_free_condition(cmc_stage):
    duty = closed_forms.cmc_critical_duty(cmc_stage)
    D = duty["eq38"].value
    a = cmc_stage.rho * cmc_stage.Rc * cmc_stage.T / cmc_stage.L / 4.0
    assert D - 0.5 - a * _q(D) == pytest.approx(0.0, abs=1e-12)
    assert duty["eq38_first_order"].value == pytest.approx(D, abs=1e-3)
    assert closed_forms.cmc_criteria(cmc_stage, D, ma=0.0)["eq37"].value == pytest.approx(0.0, abs=1e-3)


def test_cmc_critical_duty_without_esr(cmc_stage):
    assert closed_forms.cmc_critical_duty(cmc_stage.with_values(Rc=0.0))["eq38"].value == 0.5


def test_cmc_critical_duty_no_root(cmc_stage):
    with pytest.raises(ModelError):
        closed_forms.cmc_critical_duty(cmc_stage.with_values(Rc=1.0, L=1e-7))


def test_cmc_open_loop_ramp(cmc_stage):
    results = closed_forms.cmc_criteria(cmc_stage, 0.7)
    assert results["eq36"].value == pytest.approx(cmc_stage.vs / cmc_stage.L * 0.2)
    assert results["eq39"].stable_side == BELOW


def test_cmc_design_ramp(cmc_stage):
    ma = closed_forms.cmc_design_ramp(cmc_stage, DesignExamples.EX2_DESIGN_DUTY)
    assert ma.value == pytest.approx(1.8333e6, rel=1e-3)
    assert closed_forms.cmc_slopes(cmc_stage, 0.6)[1] == pytest.approx(2.0 * ma.value)


@pytest.mark.parametrize("D, form, expected", [
    (0.6, "eq41", 223.0),
    (DesignExamples.EX2_SIMULATED_DUTY, "eq41", 237.0),
    (0.6, "eq69", 229.0),
])
def test_cmc_closed_critical_gain(cmc_stage, D, form, expected):
    ma = 1.8333e6
    assert closed_forms.cmc_closed_kp_star(cmc_stage, D, ma, form=form).value == pytest.approx(expected, rel=0.01)


def test_cmc_closed_gain_margin_note(cmc_stage):
    result = closed_forms.cmc_closed_kp_star(cmc_stage, 0.6, 1.8333e6, kp=100.0)
    assert result.validity_note.startswith("gain margin")
    assert result.validity_note.endswith("dB")


def test_psi_minimum():
    theta, value = closed_forms.psi_minimum()
    assert theta == pytest.approx(0.38, abs=0.01)
    assert value == pytest.approx(5.0, abs=0.05)


def test_psi_rejects_non_positive_ratio():
    with pytest.raises(ValueError):
        closed_forms.psi(0.0)


def test_acmc_type2_criteria():
    ps = PowerStageParams(**DesignExamples.EX3_POWER_STAGE)
    cp = CompensatorParams(scheme=Scheme.ACMC_TYPE2, Kc=75506.0, wz=5652.9, Rs=0.1, wp=0.38 * ps.omega_s)
    results = closed_forms.acmc_criteria(ps, cp, 0.3)
    assert results["eq71"].value == pytest.approx(results["eq73"].value, rel=0.01)
    assert results["eq46"].validity_note.startswith("outside regime")
    assert results["eq46"].value == pytest.approx(results["eq96"].value / _q(0.3))


def test_acmc_pi_slopes_match_model():
    ps = PowerStageParams(**DesignExamples.EX3_POWER_STAGE)
    cp = CompensatorParams(scheme=Scheme.ACMC_PI, Kc=75506.0, wz=5652.9, Rs=0.1)
    m = build_model(ps, cp)
    results = closed_forms.acmc_criteria(ps, cp, 0.3)
    assert results["eq48_CB11"].value == pytest.approx(float(m.Crow @ m.B11), rel=1e-12)
    assert results["eq48_CA1B11"].value == pytest.approx(float(m.Crow @ m.A1 @ m.B11), rel=1e-5)


def test_acmc_criteria_reject_other_schemes(pvmc_stage):
    cp = CompensatorParams(scheme=Scheme.VMC_TYPE3, Kc=1.0, wz=1.0, Rs=1.0)
    with pytest.raises(ModelError):
        closed_forms.acmc_criteria(pvmc_stage, cp, 0.3)


def test_phi_one_term_truncation():
    g = TransferFunction([1.0], [2.0, 1.0, 0.0])
    for D in np.linspace(0.05, 0.95, 19):
        one = (1.0 - np.exp(2j * math.pi * D)) * g(1j) - g(0.5j)
        assert closed_forms.phi_approx(D) == pytest.approx(1.0 / one.real, rel=1e-12)


def test_phi_range():
    phi_min, _, phi_max, _ = closed_forms.phi_range(np.linspace(0.0, 1.0, 101), K=500)
    assert phi_min == pytest.approx(0.694, abs=0.01)
    assert phi_max == pytest.approx(2.89, abs=0.01)


def test_type3_criteria_flag_large_pole(caplog, monkeypatch):
    monkeypatch.setattr(closed_forms, "_regime_warned", set())
    ps, cp = _type3()
    with caplog.at_level(logging.WARNING, logger="ClosedForms"):
        results = closed_forms.type3_criteria(ps, cp, 0.3, K=200)
    assert results["eq54"].validity_note.startswith("outside regime")
    assert "above ws/10" in caplog.text
    assert results["eq54"].value == pytest.approx(results["eq92"].value / _q(0.3))


def test_type3_phi_criterion():
    ps, cp = _type3()
    results = closed_forms.type3_criteria(ps, cp, 0.3, K=200)
    expected = ps.Vh * ps.omega_s * cp.kappa_z / (2.0 * cp.Kc) * results["eq77"].value
    assert results["eq76"].value == pytest.approx(expected)


def test_crossover_ceilings():
    ps, cp = _type3(p2_ratio=0.1)
    results = closed_forms.crossover_limits(ps, cp, K=200)
    assert results["eq93"].value / ps.omega_s == pytest.approx(0.272, abs=0.005)
    assert results["all_duty"].value / ps.omega_s == pytest.approx(0.347, abs=0.005)

    ps, cp = _type3(p2_ratio=1e-6)
    results = closed_forms.crossover_limits(ps, cp, K=200)
    assert results["eq93"].value / ps.omega_s == pytest.approx(1.0 / math.pi, abs=0.005)


def test_evaluate_by_tag(pvmc_stage, pvmc_comp):
    result = closed_forms.evaluate("EQ30", pvmc_stage, pvmc_comp, 0.4)
    assert result.equation_id == "eq30"
    assert result.value == pytest.approx(closed_forms.pvmc_vs_star(pvmc_stage, 80.0, 0.4, "eq30").value)


def test_evaluate_unknown_tag(pvmc_stage, pvmc_comp):
    with pytest.raises(ModelError, match="unknown closed form"):
        closed_forms.evaluate("eq999", pvmc_stage, pvmc_comp, 0.4)


def test_evaluate_missing_parameter(pvmc_stage):
    with pytest.raises(ModelError):
        closed_forms.evaluate("eq28", pvmc_stage, CompensatorParams(scheme=Scheme.PVMC), 0.4)


def test_pole_at_a_tenth_of_ws_is_inside_regime(caplog, monkeypatch):
    monkeypatch.setattr(closed_forms, "_regime_warned", set())
    ps = PowerStageParams(**DesignExamples.EX3_POWER_STAGE)
    cp = CompensatorParams(scheme=Scheme.ACMC_TYPE2, Kc=75506.0, wz=5652.9, Rs=0.1, wp=ps.omega_s / 10.0)
    with caplog.at_level(logging.WARNING, logger="ClosedForms"):
        results = closed_forms.acmc_criteria(ps, cp, 0.3)
    assert not results["eq46"].validity_note.startswith("outside regime")
    assert "above ws/10" not in caplog.text


def test_regime_warning_is_logged_once(caplog, monkeypatch):
    monkeypatch.setattr(closed_forms, "_regime_warned", set())
    ps = PowerStageParams(**DesignExamples.EX3_POWER_STAGE)
    cp = CompensatorParams(scheme=Scheme.ACMC_TYPE2, Kc=75506.0, wz=5652.9, Rs=0.1, wp=0.38 * ps.omega_s)
    with caplog.at_level(logging.WARNING, logger="ClosedForms"):
        for D in (0.2, 0.3, 0.4):
            assert closed_forms.acmc_criteria(ps, cp, D)["eq46"].validity_note.startswith("outside regime")
    assert caplog.text.count("above ws/10") == 1


def test_evaluate_takes_phi_harmonics_from_settings(monkeypatch):
    calls = []
    original = closed_forms.phi_exact

    def recording(D, K=None):
        calls.append(K)
        return original(D, K)

    monkeypatch.setattr(closed_forms, "phi_exact", recording)
    ps, cp = _type3()
    closed_forms.evaluate("eq76", ps, cp, 0.3, Settings(phi_harmonics=40))
    assert calls == [40]
    monkeypatch.setenv("SUBHARM_PHI_HARMONICS", "7")
    closed_forms.evaluate("eq77", ps, cp, 0.3)
    assert calls[-1] == 7
