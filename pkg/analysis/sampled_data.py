"""
analysis/sampled_data.py

Exact small-signal analysis of the sampled-data map: the Jacobian at the
periodic orbit, eigenvalue classification, the slope-based subharmonic
boundary conditions (exact and approximate), the S plot, and intersections
of the boundary with the steady-state constraint.
"""

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from analysis.converter_models import SwitchedLinearModel, inputs
from analysis.steady_state import PeriodicOrbit, orbit_at_duty, solve_duty
from utils import numerics
from utils.errors import ModelError, NonTransversalError, SubharmonicAnalysisError
from utils.results import NONE, BoundaryCurve, CriterionResult, safe_ratio, side_from_denominator
from utils.root_finding import all_roots

logger = logging.getLogger('SampledData')

EIG_TOL = 1e-6
DEADBEAT_TOL = 1e-6
GRAZING_TOL = 1e-12


class Classification(str, Enum):
    STABLE = "stable"
    SUBHARMONIC = "subharmonic"
    NEIMARK = "neimark"
    OTHER_UNSTABLE = "other_unstable"


@dataclass(frozen=True)
class StabilityReport:
    """Jacobian of the sampled-data map with its eigenvalues and verdict."""

    phi: np.ndarray
    eigenvalues: np.ndarray
    classification: Classification
    deadbeat: bool = False

    @property
    def spectral_radius(self) -> float:
        return float(np.max(np.abs(self.eigenvalues)))

    @property
    def is_stable(self) -> bool:
        return self.classification is Classification.STABLE

    def to_dict(self) -> dict:
        return {
            "phi": self.phi,
            "eigenvalues": self.eigenvalues,
            "classification": self.classification.value,
            "deadbeat": self.deadbeat,
            "spectral_radius": self.spectral_radius,
        }


def jacobian_phi(m: SwitchedLinearModel, orbit: PeriodicOrbit) -> np.ndarray:
    """
    Jacobian of the one-period sampled-data map at the orbit.

    Raises:
        NonTransversalError: If y0 grazes the ramp at d
    """
    den = orbit.y_slope_pre - orbit.ramp_slope
    if abs(den) < GRAZING_TOL * m.Vh / m.T:
        raise NonTransversalError(
            f"orbit grazes the ramp at D = {orbit.D:.6f} (y'(d-) - h' = {den:.3e})", "eq8"
        )
    Phi1 = numerics.expm(m.A1, orbit.d)
    Phi2 = numerics.expm(m.A2, m.T - orbit.d)
    saltation = np.eye(m.N) - np.outer(orbit.slope_jump, m.Crow) / den
    return Phi2 @ saltation @ Phi1


def classify(phi: np.ndarray, tol: float = EIG_TOL) -> StabilityReport:
    """
    Classify the sampled-data dynamics from the eigenvalues of phi.

    Eigenvalues within tol of the unit circle count as stable (the
    regularized integrator sits just inside it).
    """
    phi = numerics.as_square(phi, "phi")
    eigenvalues = numerics.eig(phi)
    moduli = np.abs(eigenvalues)
    real_mask = np.abs(eigenvalues.imag) <= tol

    if np.any(real_mask & (eigenvalues.real <= -1.0 + tol)):
        verdict = Classification.SUBHARMONIC
    elif np.any(~real_mask & (moduli >= 1.0 + tol)):
        verdict = Classification.NEIMARK
    elif np.any(moduli > 1.0 + tol):
        verdict = Classification.OTHER_UNSTABLE
    else:
        verdict = Classification.STABLE
    return StabilityReport(
        phi=phi,
        eigenvalues=eigenvalues,
        classification=verdict,
        deadbeat=bool(np.any(moduli <= DEADBEAT_TOL)),
    )


def analyze_stability(m: SwitchedLinearModel, u: Sequence[float]) -> Tuple[PeriodicOrbit, StabilityReport]:
    """Solve the duty, build the Jacobian and classify it."""
    orbit = solve_duty(m, u)
    report = classify(jacobian_phi(m, orbit))
    logger.info(f"D = {orbit.D:.6f}: {report.classification.value}, |lambda|max = {report.spectral_radius:.6f}")
    return orbit, report


def _monodromy(m: SwitchedLinearModel, d: float) -> np.ndarray:
    """W = e^{A1 d} e^{A2 (T-d)}."""
    return numerics.expm(m.A1, d) @ numerics.expm(m.A2, m.T - d)


def boundary_slope(m: SwitchedLinearModel, orbit: PeriodicOrbit, form: str = "eq9") -> float:
    """
    Left side S of the slope-based boundary condition.

    form "eq9" works from y'(d-), form "eq11" from y'(d+); both are identical.

    Raises:
        SingularMatrixError: If -1 is a multiplier of e^{A1 d} e^{A2(T-d)}
    """
    W = _monodromy(m, orbit.d)
    I_plus_W = np.eye(m.N) + W
    jump = orbit.slope_jump
    if form == "eq9":
        # (e^{-A2(T-d)} e^{-A1 d} + I)^{-1} == (I + W)^{-1} W
        return orbit.y_slope_pre - float(m.Crow @ numerics.solve(I_plus_W, W @ jump, "eq9"))
    if form == "eq11":
        return orbit.y_slope_post + float(m.Crow @ numerics.solve(I_plus_W, jump, "eq11"))
    raise ValueError(f"Unknown boundary form {form!r}")


def boundary_residual(m: SwitchedLinearModel, u: Sequence[float], d: float, form: str = "eq9") -> float:
    """S(D) - h'(d); positive values lie on the subharmonic side."""
    orbit = orbit_at_duty(m, u, d)
    return boundary_slope(m, orbit, form) - orbit.ramp_slope


def buck_kernel(m: SwitchedLinearModel, d: float) -> float:
    """C[(I - e^{AT})^{-1}(e^{Ad} - I) + (I + e^{AT})^{-1}]B11, so that S(D) = kernel*vs."""
    if not m.is_buck:
        raise ModelError("the buck boundary kernel needs a buck model", "eq12")
    A = m.A1
    I = np.eye(m.N)
    eAT = numerics.expm(A, m.T)
    eAd = numerics.expm(A, d)
    first = numerics.solve(I - eAT, (eAd - I) @ m.B11, "eq12")
    second = numerics.solve(I + eAT, m.B11, "eq12")
    return float(m.Crow @ (first + second))


def boost_lambda(m: SwitchedLinearModel, d: float) -> np.ndarray:
    """Lambda(d) = I + (A1 - (I + W^{-1})^{-1}(A1 - A2)) X(d), with x0(d) = X(d) B1 u."""
    I = np.eye(m.N)
    Phi1, Gam1 = numerics.expm_with_integral(m.A1, d)
    Phi2, Gam2 = numerics.expm_with_integral(m.A2, m.T - d)
    W = Phi1 @ Phi2
    X = numerics.solve(I - W, Phi1 @ Gam2 + Gam1, "eq6")
    # (I + W^{-1})^{-1} == (I + W)^{-1} W
    mix = numerics.solve(I + W, W, "eq18")
    return I + (m.A1 - mix @ (m.A1 - m.A2)) @ X


def s_value(m: SwitchedLinearModel, u: Sequence[float], d: float) -> float:
    """S(D) by the buck kernel or the boost Lambda(d), whichever applies."""
    u = np.asarray(u, dtype=float)
    if m.is_buck:
        return buck_kernel(m, d) * u[0]
    return float(m.Crow @ boost_lambda(m, d) @ (m.B1 @ u))


def s_plot(m: SwitchedLinearModel, u: Sequence[float], D_grid: Sequence[float],
           mapper: Optional[numerics.Mapper] = None) -> BoundaryCurve:
    """
    S(D) on a duty grid with threshold h'(d).

    Samples where a matrix is singular are kept as NaN and flagged.
    """
    def sample(D: float) -> float:
        try:
            return s_value(m, u, D * m.T)
        except SubharmonicAnalysisError as e:
            logger.warning(f"S plot sample at D = {D:.4f} is singular: {e}")
            return np.nan

    values = (mapper or numerics.serial_map)(sample, D_grid)
    return BoundaryCurve(
        criterion_id="eq20",
        axis="D",
        unit="V/s",
        parameters=np.asarray(D_grid, dtype=float),
        values=np.asarray(values),
        threshold=m.ramp_slope,
    )


def s_plot_parameter(
    builder: Callable[[float], Tuple[SwitchedLinearModel, Sequence[float]]],
    values: Sequence[float],
    axis: str,
    mapper: Optional[numerics.Mapper] = None,
) -> BoundaryCurve:
    """
    S at the operating duty as a swept parameter changes.

    ``builder`` maps a parameter value to (model, u). The threshold is the
    ramp slope of the model built for the first value.
    """
    def sample(value: float) -> Tuple[float, float]:
        m, u = builder(value)
        try:
            return m.ramp_slope, boundary_slope(m, solve_duty(m, u))
        except SubharmonicAnalysisError as e:
            logger.warning(f"S sample at {axis} = {value:.6g} failed: {e}")
            return m.ramp_slope, np.nan

    results = (mapper or numerics.serial_map)(sample, values)
    return BoundaryCurve(
        criterion_id="eq20",
        axis=axis,
        unit="V/s",
        parameters=np.asarray(values, dtype=float),
        values=np.asarray([s for _, s in results]),
        threshold=results[0][0] if results else None,
    )


def critical_vs_exact(m: SwitchedLinearModel, d: float, vr: float) -> CriterionResult:
    """
    Critical source voltage at duty d.

    Buck models use the kernel form; other topologies use Lambda(d). The
    stable side follows the sign of the denominator.
    """
    if m.is_buck:
        kernel = buck_kernel(m, d)
        if kernel == 0.0:
            return CriterionResult(float("inf"), "eq13", NONE, "boundary kernel vanishes at this D")
        return CriterionResult(m.ramp_slope / kernel, "eq13", side_from_denominator(kernel))
    Lam = boost_lambda(m, d)
    den = float(m.Crow @ Lam @ m.B11)
    num = m.ramp_slope - float(m.Crow @ Lam @ m.B12) * vr
    if den == 0.0:
        return CriterionResult(safe_ratio(num, den), "eq19", NONE, "C Lambda B11 vanishes at this D")
    return CriterionResult(num / den, "eq19", side_from_denominator(den))


def critical_vs_min(m: SwitchedLinearModel, vr: float) -> CriterionResult:
    """Critical voltage at d = T; below it no duty cycle oscillates."""
    result = critical_vs_exact(m, m.T, vr)
    return CriterionResult(result.value, "eq14", result.stable_side, result.validity_note)


def _approx_denominator(m: SwitchedLinearModel, D: float) -> float:
    q = 1.0 - 2.0 * D + 2.0 * D * D
    CB11 = float(m.Crow @ m.B11)
    CA1B11 = float(m.Crow @ m.A1 @ m.B11)
    return (0.5 - D) * CB11 - (q / 4.0) * CA1B11 * m.T


def critical_vs_approx(m: SwitchedLinearModel, d: float) -> CriterionResult:
    """Second-order expansion of the critical voltage; needs no matrix inverse."""
    if not m.is_buck:
        raise ModelError("the approximate boundary applies to buck models", "eq16")
    den = _approx_denominator(m, d / m.T)
    if den == 0.0:
        return CriterionResult(float("inf"), "eq16", NONE, "denominator vanishes at this D")
    return CriterionResult(m.ramp_slope / den, "eq16", side_from_denominator(den),
                           "poles below ws/10")


def approx_boundary_2nd(m: SwitchedLinearModel, orbit: PeriodicOrbit) -> float:
    """Second approximate boundary residual (large switching frequency)."""
    mean_slope = 0.5 * (orbit.y_slope_pre + orbit.y_slope_post)
    weight = m.A1 * orbit.d + m.A2 * (m.T - orbit.d)
    return mean_slope - 0.25 * float(m.Crow @ weight @ orbit.slope_jump) - orbit.ramp_slope


def approx_boundary_highfs(orbit: PeriodicOrbit) -> float:
    """Mean of the two output slopes minus the ramp slope."""
    return 0.5 * (orbit.y_slope_pre + orbit.y_slope_post) - orbit.ramp_slope


def deadbeat_condition(orbit: PeriodicOrbit) -> float:
    """y'(d+) - h'(d); zero when the Jacobian has an eigenvalue at 0."""
    return orbit.y_slope_post - orbit.ramp_slope


def highfs_ramp_requirement(y_slope_pre: float, y_slope_post: float) -> float:
    """Ramp slope on the high-frequency boundary, (m2 - m1)/2 with y'(d-) = -m1 and y'(d+) = m2."""
    return 0.5 * (y_slope_pre + y_slope_post)


def intersect_curves(
    f: Callable[[float], float],
    g: Callable[[float], float],
    lo: float,
    hi: float,
    points: int = 400,
) -> List[float]:
    """
    Abscissae where f and g meet on [lo, hi].

    Sign changes caused by a pole of either curve are discarded.
    """
    def diff(x: float) -> float:
        return f(x) - g(x)

    roots = []
    for x in all_roots(diff, lo, hi, points):
        fx, gx = f(x), g(x)
        scale = max(abs(fx), abs(gx), 1.0)
        if np.isfinite(fx) and np.isfinite(gx) and abs(fx - gx) <= 1e-6 * scale:
            roots.append(x)
        else:
            logger.debug(f"Discarded pole crossing at {x:.6g}")
    return roots


def boundary_intersection(
    m: SwitchedLinearModel,
    vr: float,
    steady_vs: Callable[[float], float],
    D_range: Tuple[float, float] = (0.01, 0.99),
    points: int = 400,
) -> List[Tuple[float, float]]:
    """
    Operating points (D, vs) where the steady-state line meets the boundary.

    ``steady_vs`` maps D to the steady-state source voltage. The pole-free
    form S(D; steady_vs(D))/h' - 1 is bracketed so poles of the critical
    voltage curve cannot produce false roots.
    """
    lo, hi = D_range
    if not (0.0 < lo < hi <= 1.0):
        raise ModelError(f"duty range must satisfy 0 < lo < hi <= 1, got {D_range}", "eq13")

    def excess(D: float) -> float:
        vs = steady_vs(D)
        return s_value(m, inputs(vs, vr), D * m.T) / m.ramp_slope - 1.0

    pairs = [(D, float(steady_vs(D))) for D in all_roots(excess, lo, hi, points, xtol=1e-10)]
    logger.info(f"Boundary intersections: {[(round(D, 4), round(v, 4)) for D, v in pairs]}")
    return pairs


def boundary_eigen_crossing(m: SwitchedLinearModel, u: Sequence[float]) -> Optional[float]:
    """Real eigenvalue of the Jacobian closest to -1 at the steady-state orbit, or None."""
    orbit = solve_duty(m, u)
    eigenvalues = numerics.eig(jacobian_phi(m, orbit))
    real = eigenvalues[np.abs(eigenvalues.imag) <= EIG_TOL].real
    if real.size == 0:
        return None
    return float(real[np.argmin(np.abs(real + 1.0))])
