"""
analysis/converter_models.py

Unified switched linear model of a PWM DC-DC converter and its builders.

Each control scheme maps physical power-stage parameters and compensator
parameters onto the matrices A1, A2, B1, B2, C, D, E1, E2 of the unified
VMC/CMC block diagram, together with the trailing-edge ramp and the clock.
"""

import logging
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import List, Optional, Tuple

import numpy as np

from utils.errors import ModelError
from utils.settings import load_settings

logger = logging.getLogger('ConverterModels')


class Scheme(str, Enum):
    """Supported control schemes."""

    PVMC = "PVMC"
    CF_PVR = "CF_PVR"
    CMC_OPEN = "CMC_OPEN"
    CMC_CLOSED = "CMC_CLOSED"
    ENH_V2 = "ENH_V2"
    ACMC_TYPE2 = "ACMC_TYPE2"
    ACMC_PI = "ACMC_PI"
    VMC_TYPE3 = "VMC_TYPE3"
    BOOST_PVMC = "BOOST_PVMC"

    @classmethod
    def parse(cls, name: str) -> "Scheme":
        try:
            return cls(str(name).upper().replace("-", "_"))
        except ValueError as e:
            valid = ", ".join(s.value for s in cls)
            raise ModelError(f"Unknown scheme {name!r}; expected one of {valid}", "model") from e


BUCK_SCHEMES = tuple(s for s in Scheme if s is not Scheme.BOOST_PVMC)

# Compensator fields each scheme consults
REQUIRED_FIELDS = {
    Scheme.PVMC: ("kp",),
    Scheme.CF_PVR: ("kp",),
    Scheme.CMC_OPEN: (),
    Scheme.CMC_CLOSED: ("kp",),
    Scheme.ENH_V2: ("Ri",),
    Scheme.ACMC_TYPE2: ("Kc", "wz", "wp", "Rs"),
    Scheme.ACMC_PI: ("Kc", "wz", "Rs"),
    Scheme.VMC_TYPE3: ("Kc", "z1", "z2", "p1", "p2"),
    Scheme.BOOST_PVMC: ("kp",),
}


@dataclass(frozen=True)
class PowerStageParams:
    """
    Physical parameters of the power stage (SI units).

    Attributes:
        L: inductance (H)
        C: capacitance (F)
        R: load resistance (ohm)
        Rc: capacitor ESR (ohm)
        vs: source voltage (V)
        vr: reference (V)
        Vh: ramp amplitude (V)
        fs: switching frequency (Hz)
    """

    L: float
    C: float
    R: float
    Rc: float = 0.0
    vs: float = 0.0
    vr: float = 0.0
    Vh: float = 1.0
    fs: float = 1.0

    @property
    def T(self) -> float:
        return 1.0 / self.fs

    @property
    def omega_s(self) -> float:
        return 2.0 * math.pi * self.fs

    @property
    def rho(self) -> float:
        return self.R / (self.R + self.Rc)

    @property
    def tau(self) -> float:
        """Frequency ratio 1/(R C omega_s)."""
        return 1.0 / (self.R * self.C * self.omega_s)

    def with_values(self, **changes) -> "PowerStageParams":
        return replace(self, **changes)

    def validate(self) -> None:
        for name in ("L", "C", "R", "fs", "Vh"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ModelError(f"Power stage parameter {name} must be positive, got {value}", "model")
        if not (math.isfinite(self.Rc) and self.Rc >= 0):
            raise ModelError(f"Power stage parameter Rc must be >= 0, got {self.Rc}", "model")


@dataclass(frozen=True)
class CompensatorParams:
    """
    Controller parameters; only the fields relevant to ``scheme`` are consulted.

    Poles and zeros are in rad/s. ``delta`` replaces every integrator pole.
    """

    scheme: Scheme
    kp: Optional[float] = None
    Kc: Optional[float] = None
    wz: Optional[float] = None
    wp: Optional[float] = None
    z1: Optional[float] = None
    z2: Optional[float] = None
    p1: Optional[float] = None
    p2: Optional[float] = None
    Rs: Optional[float] = None
    Ri: Optional[float] = None
    delta: float = field(default_factory=lambda: load_settings().delta)
    kappa_z: Optional[float] = None
    ma: Optional[float] = None

    def with_values(self, **changes) -> "CompensatorParams":
        return replace(self, **changes)

    def require(self, name: str) -> float:
        value = getattr(self, name)
        if value is None:
            raise ModelError(f"Scheme {self.scheme.value} requires parameter {name}", "model")
        if not (math.isfinite(value) and value > 0):
            raise ModelError(f"Parameter {name} must be positive, got {value}", "model")
        return float(value)


@dataclass(frozen=True)
class SwitchedLinearModel:
    """
    Matrices of the unified block diagram.

    B1 and B2 have two columns acting on u = (vs, vr). The ramp is the
    trailing-edge sawtooth h(t) = Vh (t mod T)/T.
    """

    scheme: Scheme
    A1: np.ndarray
    A2: np.ndarray
    B1: np.ndarray
    B2: np.ndarray
    Crow: np.ndarray
    Drow: np.ndarray
    E1: np.ndarray
    E2: np.ndarray
    Vh: float
    T: float
    topology: str = "buck"
    compensator_states: int = 0

    @property
    def N(self) -> int:
        return self.A1.shape[0]

    @property
    def ramp_slope(self) -> float:
        return self.Vh / self.T

    @property
    def omega_s(self) -> float:
        return 2.0 * math.pi / self.T

    @property
    def is_buck(self) -> bool:
        return self.topology == "buck"

    @property
    def B11(self) -> np.ndarray:
        return self.B1[:, 0]

    @property
    def B12(self) -> np.ndarray:
        return self.B1[:, 1]

    def ramp(self, t: float) -> float:
        return self.Vh * ((t % self.T) / self.T)

    def output(self, x: np.ndarray, u: np.ndarray) -> float:
        return float(self.Crow @ x + self.Drow @ u)


def inputs(vs: float, vr: float) -> np.ndarray:
    """Input vector u = (vs, vr)."""
    return np.array([float(vs), float(vr)])


def _power_stage_block(ps: PowerStageParams) -> Tuple[np.ndarray, np.ndarray]:
    """Buck power stage A (eq25) and output row E (eq27) for x = (iL, vC)."""
    rho = ps.rho
    A = rho * np.array([
        [-ps.Rc / ps.L, -1.0 / ps.L],
        [1.0 / ps.C, -1.0 / (ps.R * ps.C)],
    ])
    E = rho * np.array([ps.Rc, 1.0])
    return A, E


def _ramp_amplitude(ps: PowerStageParams, cp: CompensatorParams) -> float:
    if cp.ma is None:
        return ps.Vh
    Vh = cp.ma * ps.T
    if abs(Vh - ps.Vh) > 1e-9 * max(abs(Vh), 1.0):
        logger.info(f"Ramp amplitude set from ma: Vh = ma*T = {Vh:.6g} (power stage Vh {ps.Vh:.6g} ignored)")
    return Vh


def build_model(ps: PowerStageParams, cp: CompensatorParams) -> SwitchedLinearModel:
    """
    Build the unified model for a scheme.

    Raises:
        ModelError: Unknown scheme, missing or non-positive required parameter
    """
    ps.validate()
    scheme = Scheme.parse(cp.scheme.value if isinstance(cp.scheme, Scheme) else cp.scheme)
    if not (math.isfinite(cp.delta) and cp.delta > 0):
        raise ModelError(f"Integrator regularization delta must be positive, got {cp.delta}", "model")
    for name in REQUIRED_FIELDS[scheme]:
        cp.require(name)

    builder = {
        Scheme.PVMC: _build_pvmc,
        Scheme.CF_PVR: _build_cf_pvr,
        Scheme.CMC_OPEN: _build_cmc_open,
        Scheme.CMC_CLOSED: _build_cmc_closed,
        Scheme.ENH_V2: _build_enhanced_v2,
        Scheme.ACMC_TYPE2: _build_acmc_type2,
        Scheme.ACMC_PI: _build_acmc_pi,
        Scheme.VMC_TYPE3: _build_vmc_type3,
        Scheme.BOOST_PVMC: _build_boost_pvmc,
    }[scheme]
    model = builder(ps, cp)
    logger.debug(f"Built {scheme.value} model with N = {model.N}")
    return model


def _stage_model(scheme, ps, cp, A, Cext, Dext, E, B_first, B_vr=None, compensator_states=0):
    """Assemble a buck model with A1 == A2 and the source entering only during S1."""
    N = A.shape[0]
    B1 = np.zeros((N, 2))
    B2 = np.zeros((N, 2))
    B1[:, 0] = B_first
    if B_vr is not None:
        B1[:, 1] = B_vr
        B2[:, 1] = B_vr
    return SwitchedLinearModel(
        scheme=scheme,
        A1=A.copy(),
        A2=A.copy(),
        B1=B1,
        B2=B2,
        Crow=np.asarray(Cext, dtype=float),
        Drow=np.asarray(Dext, dtype=float),
        E1=np.asarray(E, dtype=float),
        E2=np.asarray(E, dtype=float).copy(),
        Vh=_ramp_amplitude(ps, cp),
        T=ps.T,
        topology="buck",
        compensator_states=compensator_states,
    )


def _source_column(ps: PowerStageParams, N: int) -> np.ndarray:
    b = np.zeros(N)
    b[0] = 1.0 / ps.L
    return b


def _build_pvmc(ps, cp):
    A, E = _power_stage_block(ps)
    C = -cp.kp * ps.rho * np.array([ps.Rc, 1.0])
    return _stage_model(Scheme.PVMC, ps, cp, A, C, [0.0, cp.kp], E, _source_column(ps, 2))


def _build_cf_pvr(ps, cp):
    A, E = _power_stage_block(ps)
    C = -cp.kp * ps.rho * np.array([ps.Rc, 1.0])
    return _stage_model(Scheme.CF_PVR, ps, cp, A, C, [0.0, 1.0], E, _source_column(ps, 2))


def _build_cmc_open(ps, cp):
    A, E = _power_stage_block(ps)
    return _stage_model(Scheme.CMC_OPEN, ps, cp, A, [-1.0, 0.0], [0.0, 1.0], E, _source_column(ps, 2))


def _build_cmc_closed(ps, cp):
    A, E = _power_stage_block(ps)
    rho = ps.rho
    C = -np.array([1.0 + cp.kp * rho * ps.Rc, cp.kp * rho])
    return _stage_model(Scheme.CMC_CLOSED, ps, cp, A, C, [0.0, cp.kp], E, _source_column(ps, 2))


def _build_enhanced_v2(ps, cp):
    A, E = _power_stage_block(ps)
    rho = ps.rho
    C = -np.array([rho * ps.Rc + cp.Ri, rho])
    return _stage_model(Scheme.ENH_V2, ps, cp, A, C, [0.0, 1.0], E, _source_column(ps, 2))


def _build_acmc_type2(ps, cp):
    Ap, Ep = _power_stage_block(ps)
    wp, wz, Kc, Rs, delta = cp.wp, cp.wz, cp.Kc, cp.Rs, cp.delta
    A = np.zeros((4, 4))
    A[:2, :2] = Ap
    A[2, 3] = 1.0
    A[3, :] = [-wp * Rs, 0.0, -delta * wp, -delta - wp]
    C = [0.0, 0.0, Kc, Kc / wz]
    E = np.concatenate([Ep, np.zeros(2)])
    B_vr = np.array([0.0, 0.0, 0.0, wp])
    return _stage_model(Scheme.ACMC_TYPE2, ps, cp, A, C, [0.0, 1.0], E, _source_column(ps, 4),
                        B_vr, compensator_states=2)


def _build_acmc_pi(ps, cp):
    Ap, Ep = _power_stage_block(ps)
    wz, Kc, Rs, delta = cp.wz, cp.Kc, cp.Rs, cp.delta
    A = np.zeros((3, 3))
    A[:2, :2] = Ap
    A[2, :] = [-Rs, 0.0, -delta]
    C = [-Rs * Kc / wz, 0.0, Kc * (1.0 - delta / wz)]
    E = np.concatenate([Ep, np.zeros(1)])
    B_vr = np.array([0.0, 0.0, 1.0])
    # feedthrough of vr carries the compensator's direct term Kc/wz
    return _stage_model(Scheme.ACMC_PI, ps, cp, A, C, [0.0, 1.0 + Kc / wz], E, _source_column(ps, 3),
                        B_vr, compensator_states=1)


def _build_vmc_type3(ps, cp):
    Ap, Ep = _power_stage_block(ps)
    rho = ps.rho
    Kc, z1, z2, p1, p2, delta = cp.Kc, cp.z1, cp.z2, cp.p1, cp.p2, cp.delta
    pp = p1 * p2
    A = np.zeros((5, 5))
    A[:2, :2] = Ap
    A[2, 3] = 1.0
    A[3, 4] = 1.0
    A[4, :] = [
        -pp * rho * ps.Rc,
        -pp * rho,
        -delta * pp,
        -delta * (p1 + p2) - pp,
        -delta - p1 - p2,
    ]
    C = Kc * np.array([0.0, 0.0, 1.0, 1.0 / z1 + 1.0 / z2, 1.0 / (z1 * z2)])
    E = np.concatenate([Ep, np.zeros(3)])
    B_vr = np.array([0.0, 0.0, 0.0, 0.0, pp])
    return _stage_model(Scheme.VMC_TYPE3, ps, cp, A, C, [0.0, 1.0], E, _source_column(ps, 5),
                        B_vr, compensator_states=3)


def _build_boost_pvmc(ps, cp):
    if ps.Rc != 0.0:
        raise ModelError("BOOST_PVMC is modelled with Rc = 0 only", "model")
    L, C, R = ps.L, ps.C, ps.R
    A1 = np.array([[0.0, 0.0], [0.0, -1.0 / (R * C)]])
    A2 = np.array([[0.0, -1.0 / L], [1.0 / C, -1.0 / (R * C)]])
    B = np.array([[1.0 / L, 0.0], [0.0, 0.0]])
    return SwitchedLinearModel(
        scheme=Scheme.BOOST_PVMC,
        A1=A1,
        A2=A2,
        B1=B,
        B2=B.copy(),
        Crow=-cp.kp * np.array([0.0, 1.0]),
        Drow=np.array([0.0, cp.kp]),
        E1=np.array([0.0, 1.0]),
        E2=np.array([0.0, 1.0]),
        Vh=_ramp_amplitude(ps, cp),
        T=ps.T,
        topology="boost",
    )


def type3_guideline(ps: PowerStageParams, Kc: float, kappa_z: float,
                    delta: Optional[float] = None) -> CompensatorParams:
    """
    Type III placement popular in industry: integrator, p1 = ws/2,
    p2 = 1/(Rc C), z1 = kappa_z/sqrt(LC), z2 = 1/sqrt(LC).
    """
    if ps.Rc <= 0:
        raise ModelError("Type III guideline needs Rc > 0 to place p2 = 1/(Rc C)", "eq53")
    w0 = 1.0 / math.sqrt(ps.L * ps.C)
    return CompensatorParams(
        scheme=Scheme.VMC_TYPE3,
        Kc=Kc,
        z1=kappa_z * w0,
        z2=w0,
        p1=ps.omega_s / 2.0,
        p2=1.0 / (ps.Rc * ps.C),
        kappa_z=kappa_z,
        delta=load_settings().delta if delta is None else delta,
    )


def compensator_transfer(cp: CompensatorParams) -> Tuple[np.ndarray, np.ndarray]:
    """
    Compensator Gc(s) as (numerator, denominator) coefficients, highest power first.

    Proportional schemes return kp (or 1); CMC_OPEN and ENH_V2 have unity Gc.
    """
    scheme = cp.scheme
    if scheme in (Scheme.PVMC, Scheme.CF_PVR, Scheme.CMC_CLOSED, Scheme.BOOST_PVMC):
        return np.array([cp.require("kp")]), np.array([1.0])
    if scheme in (Scheme.CMC_OPEN, Scheme.ENH_V2):
        return np.array([1.0]), np.array([1.0])
    if scheme is Scheme.ACMC_TYPE2:
        Kc, wz, wp = cp.require("Kc"), cp.require("wz"), cp.require("wp")
        num = Kc * np.array([1.0 / wz, 1.0])
        den = np.polymul([1.0, cp.delta], [1.0 / wp, 1.0])
        return num, den
    if scheme is Scheme.ACMC_PI:
        Kc, wz = cp.require("Kc"), cp.require("wz")
        return Kc * np.array([1.0 / wz, 1.0]), np.array([1.0, cp.delta])
    if scheme is Scheme.VMC_TYPE3:
        Kc = cp.require("Kc")
        num = Kc * np.polymul([1.0 / cp.require("z1"), 1.0], [1.0 / cp.require("z2"), 1.0])
        den = np.polymul(np.polymul([1.0, cp.delta], [1.0 / cp.require("p1"), 1.0]),
                         [1.0 / cp.require("p2"), 1.0])
        return num, den
    raise ModelError(f"No compensator transfer function for {scheme}", "model")


def compensator_block(m: SwitchedLinearModel):
    """
    State-space sub-block of the compensator: (Acomp, Bcomp, Ccomp, Dcomp).

    The input is the error the compensator integrates (vr minus the sensed
    signal); the output is y without the vr feedthrough that every scheme adds.
    """
    n = m.compensator_states
    if n == 0:
        raise ModelError(f"{m.scheme.value} has no dynamic compensator", "model")
    Acomp = m.A1[-n:, -n:]
    Bcomp = m.B1[-n:, 1]
    Ccomp = m.Crow[-n:]
    Dcomp = m.Drow[1] - 1.0
    return Acomp, Bcomp, Ccomp, Dcomp


def validate_model(m: SwitchedLinearModel) -> List[str]:
    """Report dimension mismatches, violated buck identities and non-finite entries."""
    findings = []
    N = m.A1.shape[0] if m.A1.ndim == 2 else 0
    shapes = {
        "A1": (N, N), "A2": (N, N), "B1": (N, 2), "B2": (N, 2),
        "Crow": (N,), "Drow": (2,), "E1": (N,), "E2": (N,),
    }
    for name, shape in shapes.items():
        value = np.asarray(getattr(m, name))
        if value.shape != shape:
            findings.append(f"{name} has shape {value.shape}, expected {shape}")
            continue
        bad = np.argwhere(~np.isfinite(value))
        for index in bad:
            findings.append(f"{name}{list(index)} is not finite")
    if findings:
        return findings

    if m.is_buck:
        if not np.array_equal(m.A1, m.A2):
            findings.append("buck identity A1 == A2 violated")
        if np.any(m.B2[:, 0] != 0.0):
            findings.append("buck identity B21 == 0 violated")
        if not np.array_equal(m.B1[:, 1], m.B2[:, 1]):
            findings.append("buck identity B12 == B22 violated")
    if not (math.isfinite(m.Vh) and m.Vh > 0):
        findings.append(f"ramp amplitude Vh must be positive, got {m.Vh}")
    if not (math.isfinite(m.T) and m.T > 0):
        findings.append(f"clock period T must be positive, got {m.T}")
    return findings


def ramp_consistency(ps: PowerStageParams, cp: CompensatorParams) -> List[str]:
    """Findings for a CMC ramp given both as slope ma and amplitude Vh."""
    if cp.ma is None:
        return []
    Vh = cp.ma * ps.T
    if abs(Vh - ps.Vh) > 1e-9 * ps.Vh:
        return [f"ramp slope ma*T = {Vh:.6g} disagrees with Vh = {ps.Vh:.6g}"]
    return []
