"""
analysis/harmonic_balance.py

Frequency-domain view of the subharmonic boundary for buck converters:
power-stage and loop transfer functions, the harmonic series of the
boundary condition, the HB plot, the loop-gain test, the M plot and the
crossover frequency.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Tuple

import numpy as np
from scipy import signal, special
from scipy.optimize import brentq

from analysis.converter_models import (
    CompensatorParams,
    PowerStageParams,
    Scheme,
    SwitchedLinearModel,
    compensator_transfer,
)
from analysis.sampled_data import buck_kernel
from utils.errors import ModelError, NoBracketError, SubharmonicAnalysisError
from utils.numerics import Mapper, serial_map
from utils.results import NONE, BoundaryCurve, CriterionResult, side_from_denominator
from utils.settings import load_settings

logger = logging.getLogger('HarmonicBalance')

TAIL_WINDOW = 10


@dataclass(frozen=True)
class TransferFunction:
    """
    Rational transfer function num(s)/den(s), coefficients highest power first.
    """

    num: np.ndarray
    den: np.ndarray
    name: str = "G"

    def __post_init__(self):
        num = np.trim_zeros(np.atleast_1d(np.asarray(self.num, dtype=float)), "f")
        den = np.trim_zeros(np.atleast_1d(np.asarray(self.den, dtype=float)), "f")
        if den.size == 0:
            raise ModelError(f"{self.name} has a zero denominator", "tf")
        object.__setattr__(self, "num", num if num.size else np.array([0.0]))
        object.__setattr__(self, "den", den)

    def __call__(self, s):
        return np.polyval(self.num, s) / np.polyval(self.den, s)

    def __mul__(self, other: "TransferFunction") -> "TransferFunction":
        return TransferFunction(np.polymul(self.num, other.num), np.polymul(self.den, other.den),
                                f"{self.name}*{other.name}")

    def __add__(self, other: "TransferFunction") -> "TransferFunction":
        num = np.polyadd(np.polymul(self.num, other.den), np.polymul(other.num, self.den))
        return TransferFunction(num, np.polymul(self.den, other.den), f"{self.name}+{other.name}")

    def scale(self, k: float, name: Optional[str] = None) -> "TransferFunction":
        return TransferFunction(k * self.num, self.den, name or self.name)

    @property
    def is_zero(self) -> bool:
        return not np.any(self.num)

    @property
    def relative_degree(self) -> int:
        return len(self.den) - len(self.num)

    def laurent_tail(self) -> Tuple[float, float]:
        """
        Coefficients (c1, c2) of the expansion G(s) = c1/s + c2/s^2 + O(1/s^3).

        Raises:
            ModelError: If G is not strictly proper
        """
        if self.is_zero:
            return 0.0, 0.0
        r = self.relative_degree
        if r <= 0:
            raise ModelError(f"{self.name} is not strictly proper (relative degree {r})", "eq57")
        b, a = self.num, self.den
        # series in z = 1/s: G = z^r (c0 + c1 z + ...)
        c0 = b[0] / a[0]
        b1 = b[1] if len(b) > 1 else 0.0
        c1 = (b1 - a[1] * c0) / a[0]
        if r == 1:
            return float(c0), float(c1)
        if r == 2:
            return 0.0, float(c0)
        return 0.0, 0.0


@dataclass(frozen=True)
class HBSettings:
    """Truncation of the harmonic series."""

    K: int = field(default_factory=lambda: load_settings().hb_harmonics)
    tail_tolerance: float = field(default_factory=lambda: load_settings().hb_tail_tolerance)

    def __post_init__(self):
        if self.K < 1:
            raise ValueError(f"harmonic count K must be >= 1, got {self.K}")


def _power_stage_den(ps: PowerStageParams) -> np.ndarray:
    return np.array([ps.L * ps.C * (1.0 + ps.Rc / ps.R), ps.L / ps.R + ps.Rc * ps.C, 1.0])


def gv(ps: PowerStageParams) -> TransferFunction:
    """vd-to-vo transfer function of the buck power stage."""
    return TransferFunction(np.array([ps.Rc * ps.C, 1.0]), _power_stage_den(ps), "Gv")


def gi(ps: PowerStageParams) -> TransferFunction:
    """vd-to-iL transfer function of the buck power stage."""
    num = np.array([(1.0 + ps.Rc / ps.R) * ps.C, 1.0 / ps.R])
    return TransferFunction(num, _power_stage_den(ps), "Gi")


def gc(cp: CompensatorParams) -> TransferFunction:
    num, den = compensator_transfer(cp)
    return TransferFunction(num, den, "Gc")


def loop_g(ps: PowerStageParams, cp: CompensatorParams) -> TransferFunction:
    """
    G(s) from vd to -y for the scheme.

    Raises:
        ModelError: For schemes without a buck harmonic-balance form
    """
    scheme = cp.scheme
    if scheme in (Scheme.PVMC, Scheme.CF_PVR):
        return gv(ps).scale(cp.require("kp"), "G")
    if scheme is Scheme.CMC_OPEN:
        return gi(ps).scale(1.0, "G")
    if scheme is Scheme.CMC_CLOSED:
        g = gv(ps).scale(cp.require("kp")) + gi(ps)
        return g.scale(1.0, "G")
    if scheme is Scheme.ENH_V2:
        g = gv(ps) + gi(ps).scale(cp.require("Ri"))
        return g.scale(1.0, "G")
    if scheme in (Scheme.ACMC_TYPE2, Scheme.ACMC_PI):
        return (gc(cp) * gi(ps)).scale(cp.require("Rs"), "G")
    if scheme is Scheme.VMC_TYPE3:
        return (gc(cp) * gv(ps)).scale(1.0, "G")
    raise ModelError(f"harmonic balance covers buck schemes only, got {scheme.value}", "eq56")


def loop_gain(ps: PowerStageParams, cp: CompensatorParams, vs: Optional[float] = None) -> TransferFunction:
    """Loop gain T(s) = (vs/Vh) G(s); Vh follows the ramp slope ma when given."""
    Vh = cp.ma * ps.T if cp.ma is not None else ps.Vh
    vs = ps.vs if vs is None else vs
    return loop_g(ps, cp).scale(vs / Vh, "T_loop")


def model_transfer(m: SwitchedLinearModel) -> TransferFunction:
    """-C (sI - A1)^{-1} B11 of a buck model, the vd-to-(-y) map per volt of vs."""
    if not m.is_buck:
        raise ModelError("model transfer function needs a buck model", "eq56")
    num, den = signal.ss2tf(m.A1, m.B11.reshape(-1, 1), -m.Crow.reshape(1, -1), np.zeros((1, 1)))
    return TransferFunction(num[0], den, "G")


def _clausen2(theta: float) -> float:
    """Sum of sin(k theta)/k^2 through the dilogarithm."""
    return float(np.imag(special.spence(1.0 - np.exp(1j * theta))))


def _tail_closed_form(c1: float, c2: float, D: float, omega: float) -> complex:
    """Exact series of the c1/s + c2/s^2 part of G."""
    total = 0j
    if c1 != 0.0:
        if 0.0 < D < 1.0:
            re1 = -math.pi * (0.5 - D)
            im1 = 2.0 * math.log(2.0) - math.log(2.0 * math.sin(math.pi * D))
            total += (c1 / omega) * complex(re1, im1)
        else:
            # the half-harmonic series diverges when the weight vanishes
            total += complex(0.0, math.copysign(math.inf, c1))
    if c2 != 0.0:
        re2 = math.pi ** 2 / 2.0 - math.pi ** 2 * D * (1.0 - D)
        im2 = _clausen2(2.0 * math.pi * D)
        total += (c2 / omega ** 2) * complex(re2, im2)
    return total


def harmonic_sum(g: TransferFunction, D: float, omega_s: float, settings: Optional[HBSettings] = None) -> complex:
    """
    Sum over k of (1 - e^{j2k pi D}) G(jk ws) - G(j(k - 1/2) ws).

    The 1/s and 1/s^2 asymptote of G is summed in closed form; only the
    remainder is truncated at K harmonics.
    """
    settings = settings or HBSettings()
    if g.is_zero:
        return 0j
    c1, c2 = g.laurent_tail()
    k = np.arange(1, settings.K + 1, dtype=float)
    s_k = 1j * k * omega_s
    s_h = 1j * (k - 0.5) * omega_s

    def tail(s):
        return c1 / s + c2 / s ** 2

    weight = 1.0 - np.exp(1j * 2.0 * math.pi * k * D)
    terms = weight * (g(s_k) - tail(s_k)) - (g(s_h) - tail(s_h))
    remainder = complex(np.sum(terms))
    total = remainder + _tail_closed_form(c1, c2, D, omega_s)

    estimate = abs(complex(np.sum(terms[-TAIL_WINDOW:])))
    scale = max(abs(total.real), np.finfo(float).tiny)
    if np.isfinite(scale) and estimate > settings.tail_tolerance * scale:
        logger.warning(f"Harmonic series tail {estimate / scale:.2e} above tolerance at D = {D:.4f} (K = {settings.K})")
    return total


def _hb_result(Vh: float, re_sum: float, equation_id: str) -> CriterionResult:
    den = 2.0 * re_sum
    if den == 0.0:
        return CriterionResult(math.inf, equation_id, NONE, "series real part vanishes")
    note = "" if den > 0 else "no positive critical voltage at this D"
    return CriterionResult(Vh / den, equation_id, side_from_denominator(den), note)


def vs_star_hb(g: TransferFunction, D: float, Vh: float, omega_s: float,
               settings: Optional[HBSettings] = None) -> CriterionResult:
    """Critical source voltage from the full harmonic series."""
    return _hb_result(Vh, harmonic_sum(g, D, omega_s, settings).real, "eq57")


def vs_star_hb_one_term(g: TransferFunction, D: float, Vh: float, omega_s: float) -> CriterionResult:
    """Critical source voltage keeping only the lowest harmonic of each series."""
    term = (1.0 - np.exp(1j * 2.0 * math.pi * D)) * g(1j * omega_s) - g(0.5j * omega_s)
    return _hb_result(Vh, float(np.real(term)), "eq59")


def vs_star_hb_ldom(g: TransferFunction, Vh: float, omega_s: float) -> CriterionResult:
    """Duty-independent form Vh / (2 Re[G(j ws) - G(j ws/2)])."""
    term = g(1j * omega_s) - g(0.5j * omega_s)
    return _hb_result(Vh, float(np.real(term)), "eq70")


def hb_value(t_loop: TransferFunction, D: float, omega_s: float, settings: Optional[HBSettings] = None) -> complex:
    """H(D): the harmonic series of the loop gain."""
    return harmonic_sum(t_loop, D, omega_s, settings)


def hb_plot(
    g: TransferFunction,
    Vh: float,
    steady_vs: Callable[[float], float],
    D_grid: Sequence[float],
    omega_s: float,
    settings: Optional[HBSettings] = None,
    mapper: Optional[Mapper] = None,
) -> BoundaryCurve:
    """
    H(D) over a duty grid; the loop gain at each D uses vs = steady_vs(D).

    Stable duty cycles satisfy Re H(D) < 1/2.
    """
    def sample(D: float) -> complex:
        try:
            return steady_vs(D) / Vh * harmonic_sum(g, D, omega_s, settings)
        except SubharmonicAnalysisError as e:
            logger.warning(f"HB sample at D = {D:.4f} failed: {e}")
            return complex(np.nan, np.nan)

    values = (mapper or serial_map)(sample, D_grid)
    return BoundaryCurve(
        criterion_id="eq82",
        axis="D",
        unit="1",
        parameters=np.asarray(D_grid, dtype=float),
        values=np.asarray(values, dtype=complex),
        threshold=0.5,
    )


@dataclass(frozen=True)
class LoopGainTest:
    """Outcome of the exact, one-term and all-duty loop-gain tests with margins."""

    exact_pass: bool
    exact_margin: float
    one_term_pass: bool
    one_term_margin: float
    all_duty_pass: bool
    all_duty_margin: float
    H: complex

    def to_dict(self) -> dict:
        return {
            "exact": {"pass": self.exact_pass, "margin": self.exact_margin, "equation_id": "eq79"},
            "one_term": {"pass": self.one_term_pass, "margin": self.one_term_margin, "equation_id": "eq80"},
            "all_duty": {"pass": self.all_duty_pass, "margin": self.all_duty_margin, "equation_id": "eq81"},
            "H": self.H,
        }


def theorem1_check(t_loop: TransferFunction, D: float, omega_s: float,
                   settings: Optional[HBSettings] = None) -> LoopGainTest:
    """Loop-gain conditions: Re H(D) < 1/2, its one-term form, and Re T(j ws/2) > -1/2."""
    H = hb_value(t_loop, D, omega_s, settings)
    one = (1.0 - np.exp(1j * 2.0 * math.pi * D)) * t_loop(1j * omega_s) - t_loop(0.5j * omega_s)
    half = complex(t_loop(0.5j * omega_s))
    exact_margin = 0.5 - H.real
    one_margin = 0.5 - float(np.real(one))
    all_margin = half.real + 0.5
    return LoopGainTest(
        exact_pass=exact_margin > 0,
        exact_margin=exact_margin,
        one_term_pass=one_margin > 0,
        one_term_margin=one_margin,
        all_duty_pass=all_margin > 0,
        all_duty_margin=all_margin,
        H=H,
    )


def m_value(m: SwitchedLinearModel, vs: float, D: float, approximate: bool = False) -> float:
    """M(D) = (T vs/Vh) times the boundary kernel, or its second-order expansion."""
    if approximate:
        q = 1.0 - 2.0 * D + 2.0 * D * D
        CB11 = float(m.Crow @ m.B11)
        CA1B11 = float(m.Crow @ m.A1 @ m.B11)
        kernel = (0.5 - D) * CB11 - (q / 4.0) * CA1B11 * m.T
    else:
        kernel = buck_kernel(m, D * m.T)
    return m.T * vs / m.Vh * kernel


def m_plot(
    m: SwitchedLinearModel,
    steady_vs: Callable[[float], float],
    D_grid: Sequence[float],
    approximate: bool = False,
    mapper: Optional[Mapper] = None,
) -> BoundaryCurve:
    """M(D) over a duty grid with threshold 1; stable duty cycles have M(D) < 1."""
    def sample(D: float) -> float:
        try:
            return m_value(m, steady_vs(D), D, approximate)
        except SubharmonicAnalysisError as e:
            logger.warning(f"M sample at D = {D:.4f} failed: {e}")
            return np.nan

    values = (mapper or serial_map)(sample, D_grid)
    return BoundaryCurve(
        criterion_id="eq86" if approximate else "eq85",
        axis="D",
        unit="1",
        parameters=np.asarray(D_grid, dtype=float),
        values=np.asarray(values),
        threshold=1.0,
    )


def series_identities(D: float, K: int = 10_000) -> Tuple[float, float, float]:
    """
    Partial sums of sum (1 - cos 2pi kD)/k^2, sum 2/(k - 1/2)^2 and sum sin(2pi kD)/k.

    They tend to pi^2 D(1 - D), pi^2 and pi(1/2 - D).
    """
    if not (0.0 < D < 1.0):
        raise ValueError(f"series identities need 0 < D < 1, got {D}")
    k = np.arange(1, K + 1, dtype=float)
    theta = 2.0 * math.pi * k * D
    return (
        float(np.sum((1.0 - np.cos(theta)) / k ** 2)),
        float(np.sum(2.0 / (k - 0.5) ** 2)),
        float(np.sum(np.sin(theta) / k)),
    )


def pvmc_loading_sum(tau: float, D: float, terms: Optional[int] = None) -> float:
    """
    Series in the load frequency ratio tau used by the PVMC critical voltage.

    ``terms=None`` sums to the default harmonic count; ``terms=2`` is the
    two-harmonic approximation.
    """
    K = load_settings().hb_harmonics if terms is None else terms
    k = np.arange(1, K + 1, dtype=float)
    theta = 2.0 * math.pi * k * D
    first = 1.0 / ((k - 0.5) ** 2 + tau ** 2)
    second = (np.cos(theta) - 1.0 - (tau / k) * np.sin(theta)) / (k ** 2 + tau ** 2)
    return float(np.sum(first + second))


def crossover_frequency(t_loop: TransferFunction, lo: float, hi: float, points: int = 400) -> float:
    """
    Lowest frequency in [lo, hi] rad/s where |T(jw)| = 1.

    Raises:
        NoBracketError: If |T| does not cross one in the range
    """
    grid = np.geomspace(lo, hi, points)
    excess = np.log(np.abs(t_loop(1j * grid)))
    for i in range(points - 1):
        if excess[i] == 0.0:
            return float(grid[i])
        if (excess[i] > 0.0) != (excess[i + 1] > 0.0):
            w = brentq(lambda w: math.log(abs(t_loop(1j * w))), grid[i], grid[i + 1], xtol=1e-9 * grid[i])
            logger.info(f"Crossover frequency {w:.6g} rad/s")
            return float(w)
    raise NoBracketError(f"|T(jw)| does not cross 1 on [{lo:g}, {hi:g}] rad/s", "eq91")
