"""
analysis/closed_forms.py

Per-scheme closed-form subharmonic criteria: critical source voltages,
feedback gains, ramp slopes and duty cycles, the V^2 ESR conditions, the
ACMC and type III frequency-ratio functions, and crossover-frequency
ceilings.

Every function returns CriterionResult objects tagged with the equation
that produced them, keyed by that tag when several are returned.
"""

import logging
import math
from typing import Callable, Dict, Optional, Sequence, Set, Tuple

import numpy as np
from scipy.optimize import minimize_scalar

from analysis.converter_models import CompensatorParams, PowerStageParams, Scheme
from analysis.harmonic_balance import HBSettings, TransferFunction, harmonic_sum, pvmc_loading_sum
from utils.errors import ModelError
from utils.results import ABOVE, BELOW, NONE, CriterionResult, safe_ratio, side_from_denominator
from utils.settings import Settings, load_settings

logger = logging.getLogger('ClosedForms')

POLE_REGIME = 0.1  # poles below ws/10 keep the second-order expansion accurate
REGIME_RTOL = 1e-9
PSI_BOUNDS = (0.05, 1.0)

_regime_warned: Set[str] = set()


def _q(D: float) -> float:
    return 1.0 - 2.0 * D + 2.0 * D * D


def _check_duty(D: float, equation_id: str) -> None:
    if not (0.0 < D < 1.0):
        raise ModelError(f"duty ratio must lie in (0, 1), got {D}", equation_id)


def _outside_regime(pole: float, ws: float, equation_id: str, name: str) -> bool:
    """True when pole lies above ws/10; logs the first occurrence per equation."""
    if pole <= POLE_REGIME * ws * (1.0 + REGIME_RTOL):
        return False
    if equation_id not in _regime_warned:
        _regime_warned.add(equation_id)
        logger.warning(f"{equation_id} evaluated with {name} = {pole / ws:.3f} ws above ws/10")
    return True


def _voltage(num: float, den: float, equation_id: str, note: str = "", unit: str = "V") -> CriterionResult:
    if den == 0.0:
        return CriterionResult(safe_ratio(num, den), equation_id, NONE, note or "denominator vanishes", unit)
    return CriterionResult(num / den, equation_id, side_from_denominator(den), note, unit)


def _ramp(ps: PowerStageParams, cp: Optional[CompensatorParams] = None) -> float:
    """Ramp amplitude, taken from the slope ma when one is given."""
    if cp is not None and cp.ma is not None:
        return cp.ma * ps.T
    return ps.Vh


# PVMC and V^2 control

def pvmc_vs_star(ps: PowerStageParams, kp: float, D: float, form: str = "eq28") -> CriterionResult:
    """
    Critical source voltage of proportional VMC at duty D.

    Forms:
        eq28: with ESR and rho
        eq29: rho dropped inside the bracket
        eq30: Rc = 0
        eq63: harmonic-balance twin of eq29
        eq64: load-dependent series summed to the default harmonic count
        eq65: the same series kept to two harmonics
    """
    _check_duty(D, form)
    L, C, T, Rc, rho, Vh = ps.L, ps.C, ps.T, ps.Rc, ps.rho, ps.Vh
    q = _q(D)
    if form in ("eq28", "eq29", "eq63"):
        esr = 4.0 * Rc * C / T * (D - 0.5)
        shape = rho * (1.0 - Rc * Rc * C / L) * q if form == "eq28" else q
        return _voltage(4.0 * Vh * L * C / (rho * kp * T * T), esr + shape, form)
    if form == "eq30":
        return _voltage(4.0 * Vh * L * C / (kp * T * T), q, form, "Rc = 0")
    if form in ("eq64", "eq65"):
        total = pvmc_loading_sum(ps.tau, D, terms=2 if form == "eq65" else None)
        return _voltage(Vh * L * C * ps.omega_s ** 2 / (2.0 * kp), total, form, f"tau = {ps.tau:.4g}")
    raise ValueError(f"Unknown PVMC form {form!r}")


def v2_conditions(ps: PowerStageParams, kp: float, D: float) -> Dict[str, CriterionResult]:
    """
    V^2 (CF-PVR) ESR conditions.

    eq32 bounds vs; eq33 is the ramp amplitude needed at vo = D*vs; eq34 bounds
    T/(Rc C) without a ramp; eq35 is the equivalent lower bound on Rc C/T,
    which exists only for D < 1/2.
    """
    _check_duty(D, "eq32")
    T, L, C, Rc = ps.T, ps.L, ps.C, ps.Rc
    esr = 4.0 * Rc * C / T * (D - 0.5)
    results = {"eq32": _voltage(4.0 * ps.Vh * L * C / (kp * T * T), esr + _q(D), "eq32", "rho ~ 1")}

    vo = D * ps.vs
    bracket = Rc * (2.0 * D - 1.0) / (2.0 * D) + (T / C) * ((1.0 - 2.0 * D) / (4.0 * D) + D / 2.0)
    results["eq33"] = CriterionResult(kp * vo * T / L * bracket, "eq33", ABOVE, "required ramp amplitude")

    esr_bound = 0.5 + D * D / (1.0 - 2.0 * D) if D < 0.5 else math.inf
    results["eq34"] = CriterionResult(1.0 / esr_bound if D < 0.5 else 0.0, "eq34", BELOW,
                                      "bound on T/(Rc C) without ramp", "1")
    results["eq35"] = CriterionResult(esr_bound, "eq35", ABOVE,
                                      "bound on Rc C/T without ramp; none suffices for D >= 1/2", "1")
    return results


def cf_pvr_critical_duty(ps: PowerStageParams) -> CriterionResult:
    """
    Ramp-free critical duty of CF-PVR from Rc C/T = 1/2 + D^2/(1 - 2D).

    Stable below the returned duty. Rc C/T <= 1/2 leaves no stable duty.
    """
    a = ps.Rc * ps.C / ps.T - 0.5
    if a <= 0.0:
        return CriterionResult(0.0, "eq35", BELOW, "Rc C/T <= 1/2: unstable at every duty", "1")
    return CriterionResult(-a + math.sqrt(a * a + a), "eq35", BELOW, "", "1")


# current mode control

def cmc_slopes(ps: PowerStageParams, D: float) -> Tuple[float, float]:
    """Textbook inductor current slopes (m1, m2) = ((1 - D) vs/L, D vs/L)."""
    return (1.0 - D) * ps.vs / ps.L, D * ps.vs / ps.L


def cmc_design_ramp(ps: PowerStageParams, D: float) -> CriterionResult:
    """Compensating ramp ma = m2/2 = vs D/(2L)."""
    return CriterionResult(ps.vs * D / (2.0 * ps.L), "ma_design", ABOVE, "half the off-time slope", "V/s")


def cmc_critical_duty(ps: PowerStageParams) -> Dict[str, CriterionResult]:
    """
    Ramp-free critical duty with ESR: the exact quadratic root and its first-order form.

    Raises:
        ModelError: If rho Rc T > 2L (no real root)
    """
    b = ps.rho * ps.Rc * ps.T / ps.L
    a = b / 4.0
    if 4.0 * a * a > 1.0:
        raise ModelError(f"rho*Rc*T = {b * ps.L:.4g} exceeds 2L; no critical duty", "eq38")
    if a == 0.0:
        exact = 0.5
    else:
        exact = 0.5 + 1.0 / (4.0 * a) - math.sqrt(1.0 - 4.0 * a * a) / (4.0 * a)
    return {
        "eq38": CriterionResult(exact, "eq38", BELOW, "exact root", "1"),
        "eq38_first_order": CriterionResult(0.5 + b / 8.0, "eq38", BELOW, "Rc T << L", "1"),
    }


def cmc_criteria(ps: PowerStageParams, D: float, ma: Optional[float] = None) -> Dict[str, CriterionResult]:
    """
    Open-loop CMC criteria at duty D.

    eq36/eq37 give the minimum ramp slope, eq38 the ramp-free critical duty,
    eq39/eq40 the critical source voltage for the ramp ma (or Vh/T), and eq67
    the harmonic-balance twin of eq39.
    """
    _check_duty(D, "eq36")
    L, T, rho, Rc, vs = ps.L, ps.T, ps.rho, ps.Rc, ps.vs
    ma = ps.Vh / T if ma is None else ma
    Vh = ma * T
    esr = rho * Rc * T / L * _q(D) / 4.0

    results = {
        "eq36": CriterionResult(vs / L * (D - 0.5), "eq36", ABOVE, "Rc = 0", "V/s"),
        "eq37": CriterionResult(vs / L * (D - 0.5 - esr), "eq37", ABOVE, "", "V/s"),
    }
    results.update(cmc_critical_duty(ps))
    results["eq39"] = _voltage(Vh * L / T, D - 0.5, "eq39", "Rc = 0")
    results["eq40"] = _voltage(Vh * L / T, D - 0.5 - esr, "eq40")
    results["eq67"] = _voltage(Vh * L / (T * rho), D - 0.5, "eq67")
    return results


def cmc_closed_kp_star(ps: PowerStageParams, D: float, ma: float, kp: Optional[float] = None,
                       form: str = "eq41") -> CriterionResult:
    """
    Critical proportional gain of the voltage loop around a CMC inner loop.

    Forms eq41 (with ESR), eq42 (Rc = 0) and eq69 (harmonic balance).
    Gains below the result avoid subharmonic oscillation; with kp given the
    gain margin 20 log10(kp*/kp) is reported in the note.
    """
    _check_duty(D, form)
    L, C, R, T, Rc, rho, vs = ps.L, ps.C, ps.R, ps.T, ps.Rc, ps.rho, ps.vs
    q4 = _q(D) / 4.0
    if form == "eq41":
        num = ma * L / vs + rho * Rc * T / L * q4 - D + 0.5
        den = rho * rho * T / C * (1.0 - Rc * Rc * C / L) * q4 + (D - 0.5) * rho * Rc
    elif form == "eq42":
        num = ma * L / vs - D + 0.5
        den = T / C * q4
    elif form == "eq69":
        damping = 1.0 / (R * C) + Rc / L
        num = ma * L / vs + T / 4.0 * damping - D + 0.5
        den = T / C * q4 - T * Rc / 4.0 * damping + (D - 0.5) * Rc
    else:
        raise ValueError(f"Unknown kp* form {form!r}")

    if den == 0.0:
        return CriterionResult(safe_ratio(num, den), form, NONE, "denominator vanishes", "1")
    value = num / den
    note = ""
    if kp is not None and value > 0 and kp > 0:
        note = f"gain margin {20.0 * math.log10(value / kp):.2f} dB"
    return CriterionResult(value, form, side_from_denominator(den), note, "1")


# average current mode control

def psi(theta: float) -> float:
    """pi (1 + theta^2)(1 + 4 theta^2)/(3 theta), theta = wp/ws."""
    if theta <= 0:
        raise ValueError(f"frequency ratio must be positive, got {theta}")
    return math.pi * (1.0 + theta ** 2) * (1.0 + 4.0 * theta ** 2) / (3.0 * theta)


def psi_minimum() -> Tuple[float, float]:
    """Minimizer and minimum of psi on its bounded search interval."""
    res = minimize_scalar(psi, bounds=PSI_BOUNDS, method="bounded", options={"xatol": 1e-8})
    return float(res.x), float(res.fun)


def acmc_criteria(ps: PowerStageParams, cp: CompensatorParams, D: float) -> Dict[str, CriterionResult]:
    """
    ACMC criteria for the type II compensator (eq46, eq71, eq73, eq74, eq96)
    or the PI compensator (eq48 slopes, eq49/eq50 voltages, eq51 ramp).
    """
    _check_duty(D, "eq46")
    Vh, L, T, fs, ws = _ramp(ps, cp), ps.L, ps.T, ps.fs, ps.omega_s
    Kc, wz, Rs = cp.require("Kc"), cp.require("wz"), cp.require("Rs")
    base = Vh * L * wz * fs / (Rs * Kc)
    results: Dict[str, CriterionResult] = {}

    if cp.scheme is Scheme.ACMC_TYPE2:
        wp = cp.require("wp")
        note = "wp below ws/10"
        if _outside_regime(wp, ws, "eq46", "wp"):
            note = f"outside regime: wp = {wp / ws:.3f} ws"
        results["eq46"] = _voltage(4.0 * Vh * wz * L, T * T * Kc * Rs * wp * _q(D), "eq46", note)
        results["eq96"] = _voltage(4.0 * Vh * wz * L, T * T * Kc * Rs * wp, "eq96", note)
        results["eq71"] = CriterionResult(base * psi(wp / ws), "eq71", BELOW, f"theta = {wp / ws:.3f}")
        results["eq73"] = CriterionResult(5.0 * base, "eq73", BELOW, "minimum over wp")
        results["eq74"] = CriterionResult(min(2.0 / (1.0 - D), 1.0 / D) * base, "eq74", BELOW,
                                          "conservative guideline")
        return results

    if cp.scheme is Scheme.ACMC_PI:
        results["eq48_CB11"] = CriterionResult(-Rs * Kc / (wz * L), "eq48", NONE, "C B11", "1/s")
        results["eq48_CA1B11"] = CriterionResult(Rs * Kc / L * (ps.rho * ps.Rc / (wz * L) - 1.0), "eq48", NONE,
                                                 "C A1 B11", "1/s^2")
        slope = Vh / T
        gain = Rs * Kc / (L * wz)
        with_esr = D - 0.5 + _q(D) / 4.0 * T * (wz - ps.rho * ps.Rc / L)
        without_esr = D - 0.5 + _q(D) / 4.0 * T * wz
        results["eq49"] = _voltage(slope, gain * with_esr, "eq49")
        results["eq50"] = _voltage(slope, gain * without_esr, "eq50", "ESR ignored")
        results["eq49_ramp"] = CriterionResult(ps.vs * gain * with_esr, "eq49", ABOVE, "required ramp slope", "V/s")
        results["eq51"] = CriterionResult(ps.vs * gain * (D - 0.5), "eq51", ABOVE,
                                          "required ramp slope, T(wz - rho Rc/L) << 1", "V/s")
        return results

    raise ModelError(f"ACMC criteria need ACMC_TYPE2 or ACMC_PI, got {cp.scheme.value}", "eq46")


# type III voltage mode control

def _phi_kernel() -> TransferFunction:
    """Normalized loop shape 1/(s (1 + 2s)) with ws = 1."""
    return TransferFunction(np.array([1.0]), np.array([2.0, 1.0, 0.0]), "phi")


def phi_exact(D: float, K: Optional[int] = None) -> float:
    """phi(D) from the full harmonic series of the normalized loop shape."""
    K = load_settings().phi_harmonics if K is None else K
    total = harmonic_sum(_phi_kernel(), D, 1.0, HBSettings(K=K, tail_tolerance=1e-4))
    return 1.0 / total.real


def phi_approx(D: float) -> float:
    """One-harmonic truncation 5/(3 + 2 cos 2pi D - sin 2pi D)."""
    theta = 2.0 * math.pi * D
    return 5.0 / (3.0 + 2.0 * math.cos(theta) - math.sin(theta))


def phi_range(D_grid: Sequence[float], K: Optional[int] = None) -> Tuple[float, float, float, float]:
    """(min, argmin, max, argmax) of phi over a duty grid."""
    D_grid = np.asarray(D_grid, dtype=float)
    values = np.array([phi_exact(D, K) for D in D_grid])
    i, j = int(np.argmin(values)), int(np.argmax(values))
    return float(values[i]), float(D_grid[i]), float(values[j]), float(D_grid[j])


def _kappa_z(ps: PowerStageParams, cp: CompensatorParams) -> float:
    if cp.kappa_z is not None:
        return cp.kappa_z
    return cp.require("z1") * math.sqrt(ps.L * ps.C)


def type3_criteria(ps: PowerStageParams, cp: CompensatorParams, D: float,
                   K: Optional[int] = None) -> Dict[str, CriterionResult]:
    """
    Type III criteria: eq54 (small p1), eq92 (its all-duty minimum), eq76
    with phi from eq77, and the eq78 approximation of phi.
    """
    if cp.scheme is not Scheme.VMC_TYPE3:
        raise ModelError(f"type III criteria need VMC_TYPE3, got {cp.scheme.value}", "eq54")
    _check_duty(D, "eq54")
    Vh, T, rho, Rc = _ramp(ps, cp), ps.T, ps.rho, ps.Rc
    Kc, z1, z2, p1, p2 = (cp.require(n) for n in ("Kc", "z1", "z2", "p1", "p2"))
    kz = _kappa_z(ps, cp)

    note = "p1 below ws/10"
    if _outside_regime(p1, ps.omega_s, "eq54", "p1"):
        note = f"outside regime: p1 = {p1 / ps.omega_s:.3f} ws"
    num = 4.0 * Vh * z1 * z2 * ps.L
    den = T * T * p1 * p2 * rho * Rc * Kc
    results = {
        "eq54": _voltage(num, den * _q(D), "eq54", note),
        "eq92": _voltage(num, den, "eq92", note),
    }
    phi = phi_exact(D, K)
    results["eq77"] = CriterionResult(phi, "eq77", NONE, "", "1")
    results["eq78"] = CriterionResult(phi_approx(D), "eq78", NONE, "one-harmonic truncation", "1")
    results["eq76"] = CriterionResult(Vh * ps.omega_s * kz / (2.0 * Kc) * phi, "eq76", BELOW, f"kappa_z = {kz:.4g}")
    return results


# crossover frequency

def _pole_crossover(pole: float, gain: float) -> float:
    """Root of |gain/(jw (1 + jw/pole))| = 1."""
    return -pole / 2.0 + math.sqrt(pole * pole / 4.0 + pole * gain)


def _pole_ceiling(pole: float, ws: float) -> float:
    return -pole / 2.0 + math.sqrt(pole * pole / 4.0 + ws * ws / math.pi ** 2)


def crossover_limits(ps: PowerStageParams, cp: CompensatorParams, D: Optional[float] = None,
                     K: Optional[int] = None) -> Dict[str, CriterionResult]:
    """
    Estimated crossover frequency and the ceiling that precludes subharmonics.

    Type III: eq88/eq89 (Case p1 = ws/2), eq91/eq93 with the uncancelled pole
    p2, and the all-duty rule phi_min ws/2. ACMC type II: eq95, eq97, eq96.
    """
    ws, Vh, vs = ps.omega_s, _ramp(ps, cp), ps.vs
    results: Dict[str, CriterionResult] = {}

    if cp.scheme is Scheme.VMC_TYPE3:
        Kc, p2 = cp.require("Kc"), cp.require("p2")
        kz = _kappa_z(ps, cp)
        gain = Kc * vs / (kz * Vh)
        results["eq88"] = CriterionResult(gain, "eq88", NONE, "estimated crossover", "rad/s")
        if D is not None:
            _check_duty(D, "eq89")
            results["eq89"] = CriterionResult(ws * phi_exact(D, K) / 2.0, "eq89", BELOW, "", "rad/s")
        phi_min = phi_range(np.linspace(0.0, 1.0, 101), K)[0]
        results["all_duty"] = CriterionResult(ws * phi_min / 2.0, "eq89", BELOW,
                                              f"phi minimum {phi_min:.3f}", "rad/s")
        results["eq91"] = CriterionResult(_pole_crossover(p2, gain), "eq91", NONE, "estimated crossover", "rad/s")
        results["eq93"] = CriterionResult(_pole_ceiling(p2, ws), "eq93", BELOW, "all duty cycles", "rad/s")
        return results

    if cp.scheme is Scheme.ACMC_TYPE2:
        Kc, wz, wp, Rs = (cp.require(n) for n in ("Kc", "wz", "wp", "Rs"))
        gain = vs * Kc * Rs / (wz * Vh * ps.L)
        results["eq95"] = CriterionResult(_pole_crossover(wp, gain), "eq95", NONE, "estimated crossover", "rad/s")
        results["eq97"] = CriterionResult(_pole_ceiling(wp, ws), "eq97", BELOW, "all duty cycles", "rad/s")
        results["eq96"] = _voltage(4.0 * Vh * wz * ps.L, ps.T ** 2 * Kc * Rs * wp, "eq96")
        return results

    raise ModelError(f"crossover limits cover VMC_TYPE3 and ACMC_TYPE2, got {cp.scheme.value}", "eq89")


def _single(fn: Callable[..., Dict[str, CriterionResult]], key: str):
    return lambda ps, cp, D: fn(ps, cp, D)[key]


def _with_harmonics(fn: Callable[..., Dict[str, CriterionResult]], key: str):
    return lambda ps, cp, D, K=None: fn(ps, cp, D, K)[key]


# eq-id -> evaluator(ps, cp, D)
CLOSED_FORMS: Dict[str, Callable[..., CriterionResult]] = {
    "eq28": lambda ps, cp, D: pvmc_vs_star(ps, cp.require("kp"), D, "eq28"),
    "eq29": lambda ps, cp, D: pvmc_vs_star(ps, cp.require("kp"), D, "eq29"),
    "eq30": lambda ps, cp, D: pvmc_vs_star(ps, cp.require("kp"), D, "eq30"),
    "eq63": lambda ps, cp, D: pvmc_vs_star(ps, cp.require("kp"), D, "eq63"),
    "eq64": lambda ps, cp, D: pvmc_vs_star(ps, cp.require("kp"), D, "eq64"),
    "eq65": lambda ps, cp, D: pvmc_vs_star(ps, cp.require("kp"), D, "eq65"),
    "eq32": lambda ps, cp, D: v2_conditions(ps, cp.require("kp"), D)["eq32"],
    "eq33": lambda ps, cp, D: v2_conditions(ps, cp.require("kp"), D)["eq33"],
    "eq34": lambda ps, cp, D: v2_conditions(ps, cp.require("kp"), D)["eq34"],
    "eq35": lambda ps, cp, D: v2_conditions(ps, cp.require("kp"), D)["eq35"],
    "eq36": lambda ps, cp, D: cmc_criteria(ps, D, cp.ma)["eq36"],
    "eq37": lambda ps, cp, D: cmc_criteria(ps, D, cp.ma)["eq37"],
    "eq38": lambda ps, cp, D: cmc_critical_duty(ps)["eq38"],
    "eq39": lambda ps, cp, D: cmc_criteria(ps, D, cp.ma)["eq39"],
    "eq40": lambda ps, cp, D: cmc_criteria(ps, D, cp.ma)["eq40"],
    "eq67": lambda ps, cp, D: cmc_criteria(ps, D, cp.ma)["eq67"],
    "eq41": lambda ps, cp, D: cmc_closed_kp_star(ps, D, cp.ma or ps.Vh / ps.T, cp.kp, "eq41"),
    "eq42": lambda ps, cp, D: cmc_closed_kp_star(ps, D, cp.ma or ps.Vh / ps.T, cp.kp, "eq42"),
    "eq69": lambda ps, cp, D: cmc_closed_kp_star(ps, D, cp.ma or ps.Vh / ps.T, cp.kp, "eq69"),
    "eq46": _single(acmc_criteria, "eq46"),
    "eq49": _single(acmc_criteria, "eq49"),
    "eq50": _single(acmc_criteria, "eq50"),
    "eq51": _single(acmc_criteria, "eq51"),
    "eq71": _single(acmc_criteria, "eq71"),
    "eq73": _single(acmc_criteria, "eq73"),
    "eq74": _single(acmc_criteria, "eq74"),
    "eq96": _single(acmc_criteria, "eq96"),
    "eq54": _with_harmonics(type3_criteria, "eq54"),
    "eq76": _with_harmonics(type3_criteria, "eq76"),
    "eq77": _with_harmonics(type3_criteria, "eq77"),
    "eq78": _with_harmonics(type3_criteria, "eq78"),
    "eq92": _with_harmonics(type3_criteria, "eq92"),
    "eq88": _with_harmonics(crossover_limits, "eq88"),
    "eq89": _with_harmonics(crossover_limits, "eq89"),
    "eq91": _with_harmonics(crossover_limits, "eq91"),
    "eq93": _with_harmonics(crossover_limits, "eq93"),
    "eq95": _with_harmonics(crossover_limits, "eq95"),
    "eq97": _with_harmonics(crossover_limits, "eq97"),
}

# tags whose evaluator takes the phi harmonic count
HARMONIC_FORMS = frozenset(("eq54", "eq76", "eq77", "eq78", "eq92", "eq88", "eq89", "eq91", "eq93", "eq95", "eq97"))


def evaluate(equation_id: str, ps: PowerStageParams, cp: CompensatorParams, D: float,
             settings: Optional[Settings] = None) -> CriterionResult:
    """
    Evaluate one closed form by its equation tag.

    Forms built on phi take their harmonic count from settings, loaded from
    the environment when omitted.

    Raises:
        ModelError: Unknown tag or missing parameter
    """
    key = equation_id.lower()
    if key not in CLOSED_FORMS:
        raise ModelError(f"unknown closed form {equation_id!r}; known: {', '.join(sorted(CLOSED_FORMS))}",
                         equation_id)
    if key in HARMONIC_FORMS:
        settings = settings or load_settings()
        return CLOSED_FORMS[key](ps, cp, D, settings.phi_harmonics)
    return CLOSED_FORMS[key](ps, cp, D)
