import numpy as np
import pytest

from analysis.converter_models import (
    CompensatorParams,
    PowerStageParams,
    Scheme,
    build_model,
    inputs,
    type3_guideline,
)
from analysis.sampled_data import jacobian_phi
from analysis.simulator import (
    OTHER,
    SwitchedSystemSimulator,
    Trajectory,
    bisect_critical,
    classify_by_simulation,
    detect_period,
    jacobian_step,
    numeric_poincare_jacobian,
    simulate,
    trajectory_frame,
)
from analysis.steady_state import critical_vs_at_duty, orbit_at_duty, solve_duty
from presets.design_examples import DesignExamples
from utils.errors import InsufficientCyclesError, ModelError, NoBracketError


def _pvmc(vs):
    ps = PowerStageParams(**DesignExamples.EX1_POWER_STAGE)
    m = build_model(ps, CompensatorParams(scheme=Scheme.PVMC, kp=80.0))
    return m, inputs(vs, ps.vr)


def _cmc(kp):
    ps = PowerStageParams(**DesignExamples.EX2_POWER_STAGE)
    ma = ps.vs * DesignExamples.EX2_DESIGN_DUTY / (2.0 * ps.L)
    ps = ps.with_values(Vh=ma * ps.T)
    m = build_model(ps, CompensatorParams(scheme=Scheme.CMC_CLOSED, kp=kp, ma=ma))
    return m, inputs(ps.vs, ps.vr)


def _near_orbit(m, u, scale=1e-3):
    x0 = solve_duty(m, u).x0_0
    return x0 * (1.0 + scale)


def test_cycle_step_reproduces_orbit(stable_model):
    m, u = stable_model
    orbit = solve_duty(m, u)
    step = SwitchedSystemSimulator(m, u).step(orbit.x0_0)
    assert step.saturation is None
    assert step.d == pytest.approx(orbit.d, rel=1e-9)
    assert step.x_next == pytest.approx(orbit.x0_0, rel=1e-9)


def test_stable_point_settles_to_period_one(stable_model):
    m, u = stable_model
    traj = simulate(m, u, _near_orbit(m, u, 1e-2), 200)
    assert traj.n_cycles == 200
    assert detect_period(traj, 1e-5).period == 1


def test_subharmonic_point_does_not_settle():
    m, u = _pvmc(11.0)
    traj = simulate(m, u, _near_orbit(m, u), 400)
    assert detect_period(traj, 1e-5).period != 1
    assert classify_by_simulation(m, u)


def test_stable_pvmc_point_passes_flip_test():
    m, u = _pvmc(8.0)
    assert not classify_by_simulation(m, u)


def test_cmc_gain_beyond_critical_oscillates():
    m, u = _cmc(260.0)
    assert detect_period(simulate(m, u, _near_orbit(m, u), 400)).period != 1
    m, u = _cmc(200.0)
    assert detect_period(simulate(m, u, _near_orbit(m, u), 400)).period == 1


def test_saturated_cycles_are_reported():
    m, u = _pvmc(1.0)
    traj = simulate(m, u, np.zeros(2), 5)
    assert traj.saturated_cycles == 5
    assert traj.duties == pytest.approx(np.ones(5))


def test_numeric_jacobian_matches_sampled_data(stable_model):
    m, u = stable_model
    orbit = solve_duty(m, u)
    numeric = numeric_poincare_jacobian(m, u, orbit)
    assert numeric == pytest.approx(jacobian_phi(m, orbit), rel=1e-4, abs=1e-6)


def _at_duty(scheme, D=0.4, **compensator):
    """Ex2 power stage with vs chosen so that D is the steady-state duty."""
    ps = PowerStageParams(**DesignExamples.EX2_POWER_STAGE)
    m = build_model(ps, CompensatorParams(scheme=scheme, **compensator))
    vs = critical_vs_at_duty(m, D * m.T, ps.vr)
    u = inputs(vs, ps.vr)
    return m, u, orbit_at_duty(m, u, D * m.T)


def _regulated(ps, cp):
    m = build_model(ps, cp)
    u = inputs(ps.vs, ps.vr)
    return m, u, solve_duty(m, u)


def _operating_point(scheme):
    if scheme is Scheme.PVMC:
        ps = PowerStageParams(**DesignExamples.EX6_POWER_STAGE).with_values(
            R=DesignExamples.EX11_LOAD, vs=DesignExamples.EX11_VS)
        return _regulated(ps, CompensatorParams(scheme=scheme, kp=8.4))
    if scheme is Scheme.CF_PVR:
        return _at_duty(scheme, kp=8.0)
    if scheme is Scheme.CMC_OPEN:
        return _at_duty(scheme)
    if scheme is Scheme.ENH_V2:
        return _at_duty(scheme, Ri=0.01)
    if scheme is Scheme.CMC_CLOSED:
        m, u = _cmc(200.0)
        return m, u, solve_duty(m, u)
    if scheme in (Scheme.ACMC_TYPE2, Scheme.ACMC_PI):
        ps = PowerStageParams(**DesignExamples.EX3_POWER_STAGE)
        values = dict(DesignExamples.EX3_COMPENSATOR, scheme=scheme)
        if scheme is Scheme.ACMC_TYPE2:
            values["wp"] = 0.1 * ps.omega_s
        return _regulated(ps, CompensatorParams(**values))
    ps = PowerStageParams(**DesignExamples.EX4_POWER_STAGE)
    return _regulated(ps, type3_guideline(ps, DesignExamples.EX4_KC, DesignExamples.EX4_KAPPA_Z))


BUCK_SCHEMES = [s for s in Scheme if s is not Scheme.BOOST_PVMC]


@pytest.mark.parametrize("scheme", BUCK_SCHEMES, ids=lambda s: s.value)
def test_numeric_jacobian_matches_sampled_data_for_every_scheme(scheme):
    m, u, orbit = _operating_point(scheme)
    numeric = numeric_poincare_jacobian(m, u, orbit)
    exact = jacobian_phi(m, orbit)
    assert np.linalg.norm(numeric - exact) <= 1e-4 * np.linalg.norm(exact)


def test_jacobian_step_bounded_by_output_weight():
    m, u, orbit = _operating_point(Scheme.ACMC_TYPE2)
    x0 = orbit.x0_0
    for j in range(m.N):
        h = jacobian_step(m, x0, j)
        assert h > 0.0
        assert h * abs(m.Crow[j]) <= 1e-4 * m.Vh * (1.0 + 1e-12)
    # the inductor current does not enter the comparator and keeps the relative step
    assert jacobian_step(m, x0, 0) == pytest.approx(1e-6 * max(abs(x0[0]), 1.0))


def test_initial_state_dimension(stable_model):
    m, u = stable_model
    with pytest.raises(ModelError):
        simulate(m, u, np.zeros(3), 4)


def test_detect_period_on_synthetic_samples():
    constant = Trajectory(T=1.0, cycle_samples=[np.array([1.0, 2.0])] * 81)
    assert detect_period(constant, 1e-9).period == 1

    flip = Trajectory(T=1.0, cycle_samples=[np.array([1.0, 2.0]) * (1.1 if k % 2 else 0.9) for k in range(81)])
    verdict = detect_period(flip, 1e-9)
    assert verdict.period == 2
    assert verdict.to_dict()["residual"] == pytest.approx(0.0)

    rng = np.random.default_rng(7)
    noisy = Trajectory(T=1.0, cycle_samples=list(1.0 + rng.random((81, 2))))
    assert detect_period(noisy, 1e-6).period == OTHER


def test_detect_period_needs_settled_cycles(stable_model):
    m, u = stable_model
    with pytest.raises(InsufficientCyclesError):
        detect_period(simulate(m, u, np.zeros(2), 20))


def test_dense_trajectory_frame(stable_model):
    m, u = stable_model
    traj = simulate(m, u, solve_duty(m, u).x0_0, 3, dense=True)
    frame = trajectory_frame(traj)
    assert list(frame.columns) == ["t", "x1", "x2", "y", "h", "stage"]
    assert frame["t"].is_monotonic_increasing
    assert set(frame["stage"]) == {1, 2}


def test_frame_needs_dense_samples(stable_model):
    m, u = stable_model
    with pytest.raises(ValueError):
        trajectory_frame(simulate(m, u, np.zeros(2), 2))


def test_bisection_by_eigenvalues_finds_critical_voltage():
    def builder(vs):
        return _pvmc(vs)

    vs_star = bisect_critical(builder, (8.0, 11.0), classify_by="eigenvalue")
    assert vs_star == pytest.approx(9.7, rel=0.02)


def test_bisection_without_bracket():
    with pytest.raises(NoBracketError):
        bisect_critical(_pvmc, (6.0, 8.0))


def test_unknown_classification_method():
    with pytest.raises(ValueError):
        bisect_critical(_pvmc, (8.0, 11.0), classify_by="guess")
