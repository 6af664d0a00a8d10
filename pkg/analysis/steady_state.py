"""
analysis/steady_state.py

T-periodic orbit of the switched model, the steady-state duty cycle, the
boundary slopes around the switching instant, and the steady-state
constraint curves used at boundary intersections.
"""

import logging
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from analysis.converter_models import (
    CompensatorParams,
    PowerStageParams,
    Scheme,
    SwitchedLinearModel,
    inputs,
)
from utils import numerics
from utils.errors import DutyResidualError, DutySaturationError, ModelError, SingularMatrixError
from utils.root_finding import first_root

logger = logging.getLogger('SteadyState')

DUTY_GRID_POINTS = 257
DUTY_RESIDUAL_TOL = 1e-10

STEADY_LINE_RULES = ("eq31", "large_gain", "eq5", "regulated")


@dataclass(frozen=True)
class PeriodicOrbit:
    """
    Fixed point of the sampled-data map with the slopes around t = d.

    slope_pre and slope_post are the state derivatives at d- and d+;
    the y_slope values are their projections through C.
    """

    d: float
    T: float
    u: np.ndarray
    x0_0: np.ndarray
    x0_d: np.ndarray
    slope_pre: np.ndarray
    slope_post: np.ndarray
    y_slope_pre: float
    y_slope_post: float
    ramp_slope: float
    y_d: float

    @property
    def D(self) -> float:
        return self.d / self.T

    @property
    def slope_jump(self) -> np.ndarray:
        """x'(d-) - x'(d+)."""
        return self.slope_pre - self.slope_post

    def to_dict(self) -> dict:
        return {
            "d": self.d,
            "D": self.D,
            "x0_0": self.x0_0,
            "x0_d": self.x0_d,
            "slope_pre": self.slope_pre,
            "slope_post": self.slope_post,
            "y_slope_pre": self.y_slope_pre,
            "y_slope_post": self.y_slope_post,
            "ramp_slope": self.ramp_slope,
        }


def _as_input(u) -> np.ndarray:
    u = np.asarray(u, dtype=float).reshape(-1)
    if u.shape != (2,):
        raise ModelError(f"input must be the pair (vs, vr), got shape {u.shape}", "model")
    return u


def _check_duty(m: SwitchedLinearModel, d: float) -> float:
    d = float(d)
    if not (0.0 <= d <= m.T * (1.0 + 1e-12)):
        raise ModelError(f"switching instant d = {d:g} outside [0, T = {m.T:g}]", "eq3")
    return min(d, m.T)


def switching_state_general(m: SwitchedLinearModel, u: np.ndarray, d: float) -> np.ndarray:
    """x0(d) from the fixed-point equation (I - e^{A1 d} e^{A2(T-d)}) x0(d) = ..."""
    Phi1, Gam1 = numerics.expm_with_integral(m.A1, d)
    Phi2, Gam2 = numerics.expm_with_integral(m.A2, m.T - d)
    lhs = np.eye(m.N) - Phi1 @ Phi2
    rhs = Phi1 @ Gam2 @ (m.B2 @ u) + Gam1 @ (m.B1 @ u)
    return numerics.solve(lhs, rhs, "eq3")


def switching_state_buck(m: SwitchedLinearModel, u: np.ndarray, d: float) -> np.ndarray:
    """x0(d) from the buck specialization (A1 == A2, B21 == 0, B12 == B22)."""
    A = m.A1
    eAT = numerics.expm(A, m.T)
    vs, vr = u
    # A^{-1}(e^{Ad} - I) is the exponential integral, defined even for singular A
    Gam = numerics.expm_integral(A, d)
    x_d = numerics.solve(np.eye(m.N) - eAT, Gam @ m.B11 * vs, "eq4")
    if vr != 0.0 and np.any(m.B12 != 0.0):
        x_d = x_d - numerics.solve(A, m.B12 * vr, "eq4")
    return x_d


def orbit_at_duty(m: SwitchedLinearModel, u: Sequence[float], d: float, method: str = "general") -> PeriodicOrbit:
    """
    Periodic orbit that switches at time d.

    Args:
        m: Switched model
        u: Input pair (vs, vr)
        d: Switching instant in [0, T]
        method: "general" for the two-stage fixed point, "buck" for the buck specialization

    Raises:
        SingularMatrixError: If the monodromy factor is singular
    """
    u = _as_input(u)
    d = _check_duty(m, d)
    if method == "general":
        x_d = switching_state_general(m, u, d)
    elif method == "buck":
        if not m.is_buck:
            raise ModelError("the buck orbit formula needs a buck model", "eq4")
        x_d = switching_state_buck(m, u, d)
    else:
        raise ValueError(f"Unknown orbit method {method!r}")

    Phi2, Gam2 = numerics.expm_with_integral(m.A2, m.T - d)
    x_0 = Phi2 @ x_d + Gam2 @ (m.B2 @ u)
    slope_pre = m.A1 @ x_d + m.B1 @ u
    slope_post = m.A2 @ x_d + m.B2 @ u
    return PeriodicOrbit(
        d=d,
        T=m.T,
        u=u,
        x0_0=x_0,
        x0_d=x_d,
        slope_pre=slope_pre,
        slope_post=slope_post,
        y_slope_pre=float(m.Crow @ slope_pre),
        y_slope_post=float(m.Crow @ slope_post),
        ramp_slope=m.ramp_slope,
        y_d=m.output(x_d, u),
    )


def duty_residual(m: SwitchedLinearModel, u: np.ndarray, d: float) -> float:
    """r(d) = y0(d) - h(d) along the orbit switching at d."""
    x_d = switching_state_general(m, u, d)
    return m.output(x_d, u) - m.Vh * d / m.T


def solve_duty(m: SwitchedLinearModel, u: Sequence[float], grid_points: int = DUTY_GRID_POINTS) -> PeriodicOrbit:
    """
    Steady-state orbit at the smallest switching instant with y0(d) = h(d).

    The scan starts one grid step after d = 0, so a trailing-edge orbit never
    switches at the clock edge itself.

    Raises:
        DutySaturationError: If r(d) keeps one sign over the whole period
        DutyResidualError: If the polished root leaves r(d) above DUTY_RESIDUAL_TOL
    """
    u = _as_input(u)
    grid = np.linspace(0.0, m.T, grid_points)[1:]

    def r(d: float) -> float:
        return duty_residual(m, u, d)

    values = np.array([r(d) for d in grid])
    d = first_root(r, grid, values, xtol=1e-15 * m.T)
    if d is None:
        saturation = 1 if np.all(values > 0) else 0
        raise DutySaturationError(
            f"no crossing of y0(d) and h(d) in (0, T); duty saturated at {saturation}",
            saturation,
            "duty",
        )

    orbit = orbit_at_duty(m, u, d)
    residual = r(d)
    # relative to the terms summed into y0(d)
    scale = m.Vh + float(np.abs(m.Crow) @ np.abs(orbit.x0_d)) + float(np.abs(m.Drow) @ np.abs(u))
    if abs(residual) > DUTY_RESIDUAL_TOL * scale:
        raise DutyResidualError(
            f"duty residual {residual:.3e} above {DUTY_RESIDUAL_TOL:g} of the output scale at D = {d / m.T:.6f}",
            "eq5",
        )
    logger.info(f"Steady-state duty D = {d / m.T:.6f}")
    return orbit


def critical_vs_at_duty(m: SwitchedLinearModel, d: float, vr: float) -> float:
    """
    Source voltage that makes d the steady-state switching instant.

    x0(d) is linear in (vs, vr), so y0(d) = h(d) is solved for vs directly.

    Raises:
        SingularMatrixError: If the vs coefficient vanishes
    """
    d = _check_duty(m, d)
    x_s = switching_state_general(m, inputs(1.0, 0.0), d)
    x_r = switching_state_general(m, inputs(0.0, 1.0), d)
    coef_s = float(m.Crow @ x_s + m.Drow[0])
    coef_r = float(m.Crow @ x_r + m.Drow[1])
    if coef_s == 0.0:
        raise SingularMatrixError("vs has no influence on y0(d) at this duty", "eq5")
    h_d = m.Vh * d / m.T
    return (h_d - coef_r * vr) / coef_s


def steady_line_pvmc(ps: PowerStageParams, kp: float, D: float) -> float:
    """Steady-state line of proportional VMC: vs = vr/D - Vh/kp."""
    if D == 0:
        raise ModelError("steady-state line undefined at D = 0", "eq31")
    if kp <= 0:
        raise ModelError(f"kp must be positive, got {kp}", "eq31")
    return ps.vr / D - ps.Vh / kp


def regulated_output(ps: PowerStageParams, cp: CompensatorParams) -> float:
    """DC output voltage enforced by an integrating loop."""
    if cp.scheme in (Scheme.ACMC_TYPE2, Scheme.ACMC_PI):
        # integrator nulls vr - Rs*iL, so iL = vr/Rs and vo = R*vr/Rs
        return ps.R * ps.vr / cp.require("Rs")
    if cp.scheme is Scheme.VMC_TYPE3:
        return ps.vr
    raise ModelError(f"{cp.scheme.value} has no integrating loop", "steady_line")


def steady_line(
    m: Optional[SwitchedLinearModel],
    ps: PowerStageParams,
    cp: CompensatorParams,
    D: float,
    rule: str = "eq31",
) -> float:
    """
    Steady-state source voltage as a function of duty ratio.

    Rules:
        eq31: vr/D - Vh/kp (proportional VMC)
        large_gain: vr/D
        eq5: exact, from the model through critical_vs_at_duty
        regulated: vo/D with vo fixed by an integrating loop
    """
    if rule == "eq31":
        return steady_line_pvmc(ps, cp.require("kp"), D)
    if D == 0:
        raise ModelError("steady-state line undefined at D = 0", rule)
    if rule == "large_gain":
        return ps.vr / D
    if rule == "regulated":
        return regulated_output(ps, cp) / D
    if rule == "eq5":
        if m is None:
            raise ModelError("the exact steady-state line needs a model", "eq5")
        return critical_vs_at_duty(m, D * m.T, ps.vr)
    raise ValueError(f"Unknown steady-state rule {rule!r}; expected one of {', '.join(STEADY_LINE_RULES)}")


def default_steady_rule(scheme: Scheme) -> str:
    """Steady-state line paired with a scheme's boundary curve in plots."""
    if scheme is Scheme.PVMC:
        return "eq31"
    if scheme in (Scheme.ACMC_TYPE2, Scheme.ACMC_PI, Scheme.VMC_TYPE3):
        return "regulated"
    return "eq5"
