import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from analysis.converter_models import (
    CompensatorParams,
    Scheme,
    build_model,
    compensator_transfer,
    inputs,
    type3_guideline,
)
from analysis.harmonic_balance import (
    HBSettings,
    TransferFunction,
    crossover_frequency,
    gc,
    gi,
    gv,
    harmonic_sum,
    hb_plot,
    hb_value,
    loop_g,
    loop_gain,
    m_plot,
    m_value,
    model_transfer,
    pvmc_loading_sum,
    series_identities,
    theorem1_check,
    vs_star_hb,
    vs_star_hb_ldom,
    vs_star_hb_one_term,
)
from analysis.sampled_data import boundary_slope, critical_vs_exact
from analysis.steady_state import orbit_at_duty, solve_duty
from presets.design_examples import DesignExamples
from utils.errors import ModelError, NoBracketError


def test_laurent_tail_relative_degree_one():
    # 1/(s + 1) = 1/s - 1/s^2 + ...
    assert TransferFunction([1.0], [1.0, 1.0]).laurent_tail() == pytest.approx((1.0, -1.0))


def test_laurent_tail_relative_degree_two():
    assert TransferFunction([3.0], [2.0, 1.0, 1.0]).laurent_tail() == pytest.approx((0.0, 1.5))


def test_improper_transfer_function_has_no_tail():
    with pytest.raises(ModelError):
        TransferFunction([1.0, 0.0], [1.0, 1.0]).laurent_tail()


def test_zero_denominator():
    with pytest.raises(ModelError):
        TransferFunction([1.0], [0.0])


def test_harmonic_count_must_be_positive():
    with pytest.raises(ValueError):
        HBSettings(K=0)


@settings(max_examples=30, deadline=None)
@given(st.floats(min_value=0.02, max_value=0.98))
def test_integrator_series_in_closed_form(D):
    total = harmonic_sum(TransferFunction([1.0], [1.0, 0.0]), D, 1.0, HBSettings(K=5))
    assert total.real == pytest.approx(-math.pi * (0.5 - D), abs=1e-12)


def test_series_identities():
    first, second, third = series_identities(0.3)
    assert first == pytest.approx(math.pi ** 2 * 0.3 * 0.7, abs=1e-3)
    assert second == pytest.approx(math.pi ** 2, abs=1e-3)
    assert third == pytest.approx(math.pi * 0.2, abs=1e-3)


def test_loading_sum_without_load():
    D = 0.35
    expected = math.pi ** 2 / 2.0 - math.pi ** 2 * D * (1.0 - D)
    assert pvmc_loading_sum(0.0, D, terms=20000) == pytest.approx(expected, rel=1e-3)


def test_harmonic_sum_converges_with_tail(stable_stage, stable_comp):
    g = loop_g(stable_stage, stable_comp)
    coarse = harmonic_sum(g, 0.3, stable_stage.omega_s, HBSettings(K=50))
    fine = harmonic_sum(g, 0.3, stable_stage.omega_s, HBSettings(K=5000))
    assert coarse.real == pytest.approx(fine.real, rel=1e-3)


def test_loop_gain_at_stable_point(stable_model, stable_stage, stable_comp):
    m, u = stable_model
    orbit = solve_duty(m, u)
    H = hb_value(loop_gain(stable_stage, stable_comp), orbit.D, stable_stage.omega_s, HBSettings(K=2000))
    assert H.real == pytest.approx(0.1390, abs=1e-3)
    assert H.imag == pytest.approx(0.8867, abs=1e-3)
    test = theorem1_check(loop_gain(stable_stage, stable_comp), orbit.D, stable_stage.omega_s)
    assert test.exact_pass
    assert test.exact_margin == pytest.approx(0.5 - test.H.real)


def test_model_transfer_matches_power_stage(stable_stage, stable_comp):
    m = build_model(stable_stage, stable_comp)
    s = 1j * 2.0e3
    assert model_transfer(m)(s) == pytest.approx(loop_g(stable_stage, stable_comp)(s), rel=1e-9)


def test_critical_voltage_forms(stable_stage, stable_comp):
    g = loop_g(stable_stage, stable_comp)
    ws, Vh = stable_stage.omega_s, stable_stage.Vh
    assert vs_star_hb(g, 0.4, Vh, ws).equation_id == "eq57"
    assert vs_star_hb_one_term(g, 0.4, Vh, ws).equation_id == "eq59"
    assert vs_star_hb_ldom(g, Vh, ws).equation_id == "eq70"


def _hb_pairs(scheme, pvmc_stage, cmc_stage, type3_stage):
    if scheme is Scheme.PVMC:
        return pvmc_stage.with_values(Rc=2e-3), CompensatorParams(scheme=scheme, kp=80.0)
    if scheme is Scheme.CMC_CLOSED:
        ma = cmc_stage.Vh / cmc_stage.T
        return cmc_stage, CompensatorParams(scheme=scheme, kp=237.0, ma=ma)
    return type3_stage, type3_guideline(type3_stage, DesignExamples.EX4_KC, DesignExamples.EX4_KAPPA_Z)


@pytest.mark.parametrize("scheme", [Scheme.PVMC, Scheme.CMC_CLOSED, Scheme.VMC_TYPE3], ids=lambda s: s.value)
def test_harmonic_series_matches_exact_boundary(scheme, pvmc_stage, cmc_stage, type3_stage):
    ps, cp = _hb_pairs(scheme, pvmc_stage, cmc_stage, type3_stage)
    m = build_model(ps, cp)
    g = loop_g(ps, cp)
    hb_settings = HBSettings(K=200)
    grid = np.linspace(0.05, 0.95, 50)
    # reciprocals stay finite where the kernel changes sign
    hb = np.array([1.0 / vs_star_hb(g, D, m.Vh, ps.omega_s, hb_settings).value for D in grid])
    exact = np.array([1.0 / critical_vs_exact(m, D * m.T, ps.vr).value for D in grid])
    assert np.max(np.abs(hb - exact)) <= 1e-3 * np.max(np.abs(exact))


def test_m_value_is_normalized_slope(pvmc_stage, pvmc_comp):
    m = build_model(pvmc_stage, pvmc_comp)
    orbit = orbit_at_duty(m, inputs(10.0, pvmc_stage.vr), 0.4 * m.T)
    assert m_value(m, 10.0, 0.4) == pytest.approx(boundary_slope(m, orbit) / m.ramp_slope, rel=1e-8)


def test_hb_and_m_plots_share_the_stable_range(pvmc_stage, pvmc_comp):
    ps = pvmc_stage.with_values(Rc=2e-3)
    m = build_model(ps, pvmc_comp)

    def steady(D):
        return ps.vr / D - ps.Vh / pvmc_comp.kp

    grid = np.linspace(0.25, 0.99, 75)
    hb = hb_plot(gv(ps).scale(pvmc_comp.kp), ps.Vh, steady, grid, ps.omega_s).threshold_crossings()
    mp = m_plot(m, steady, grid).threshold_crossings()
    assert hb == pytest.approx([0.34, 0.89], abs=0.01)
    assert mp == pytest.approx([0.34, 0.89], abs=0.01)


def test_crossover_of_integrator():
    assert crossover_frequency(TransferFunction([500.0], [1.0, 0.0]), 1.0, 1e5) == pytest.approx(500.0, rel=1e-6)


def test_crossover_missing():
    with pytest.raises(NoBracketError):
        crossover_frequency(TransferFunction([0.5], [1.0]), 1.0, 1e5)


def test_inductor_current_transfer(stable_stage):
    g = gi(stable_stage)
    assert g(0.0).real == pytest.approx(1.0 / stable_stage.R)
    w = 1e7
    assert (g(1j * w) * 1j * w * stable_stage.L).real == pytest.approx(1.0, rel=1e-3)


def test_compensator_transfer_function():
    cp = CompensatorParams(scheme=Scheme.ACMC_PI, Kc=75506.0, wz=5652.9, Rs=0.1, delta=1e-3)
    num, den = compensator_transfer(cp)
    s = 2j * math.pi * 1e3
    assert gc(cp)(s) == pytest.approx(np.polyval(num, s) / np.polyval(den, s))
