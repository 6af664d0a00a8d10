"""
analysis/simulator.py

Exact time-domain simulation of the switched converter. Each stage is
integrated with the affine matrix exponential, so a cycle carries no ODE
solver error; the switching instant is bracketed on a fixed sub-interval
grid and polished with Brent's method.

Also provides period detection on simulated cycles, a finite-difference
Poincare Jacobian and parameter bisection by simulation or by eigenvalues.
"""

import logging
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from scipy.optimize import brentq

from analysis.converter_models import SwitchedLinearModel
from analysis.sampled_data import Classification, analyze_stability
from analysis.steady_state import PeriodicOrbit, solve_duty
from utils import numerics
from utils.errors import DutySaturationError, InsufficientCyclesError, ModelError
from utils.root_finding import bisect_predicate
from utils.settings import load_settings

logger = logging.getLogger('Simulator')

SUBSTEPS = 64
SWITCH_XTOL = 1e-12
MIN_DISCARD = 32
MIN_SETTLED = 16
OTHER = "other"
CLASSIFY_METHODS = ("eigenvalue", "simulation")


@dataclass
class Trajectory:
    """
    Simulated cycles.

    cycle_samples holds x(nT) for n = 0..n_cycles; switch_times the switching
    instant within each cycle; saturation is None for a regular cycle and
    0 or 1 for a cycle whose duty saturated.
    """

    T: float
    cycle_samples: List[np.ndarray] = field(default_factory=list)
    switch_times: List[float] = field(default_factory=list)
    saturation: List[Optional[int]] = field(default_factory=list)
    extra_crossings: int = 0
    dense_segments: List[tuple] = field(default_factory=list)

    @property
    def n_cycles(self) -> int:
        return len(self.switch_times)

    @property
    def duties(self) -> np.ndarray:
        return np.asarray(self.switch_times) / self.T

    @property
    def saturated_cycles(self) -> int:
        return sum(1 for s in self.saturation if s is not None)


@dataclass(frozen=True)
class PeriodVerdict:
    period: Union[int, str]
    residual: float

    def to_dict(self) -> dict:
        return {"period": self.period, "residual": self.residual}


@dataclass(frozen=True)
class CycleStep:
    x_next: np.ndarray
    d: float
    saturation: Optional[int]
    extra_crossings: int


class SwitchedSystemSimulator:
    """
    One simulation run of a switched model under a constant input.

    Stage S1 runs from the clock edge until y(t) - h(t) first reaches zero,
    then S2 runs to the end of the cycle. Later crossings in the same cycle
    are counted but do not switch.
    """

    def __init__(self, m: SwitchedLinearModel, u: Sequence[float], substeps: int = SUBSTEPS):
        if substeps < 2:
            raise ValueError(f"substeps must be >= 2, got {substeps}")
        self.m = m
        self.u = np.asarray(u, dtype=float).reshape(-1)
        self.substeps = substeps
        self._b1 = m.B1 @ self.u
        self._b2 = m.B2 @ self.u
        self._offset = float(m.Drow @ self.u)
        self._dt = m.T / substeps
        self._F1 = numerics.affine_flow(m.A1, self._b1, self._dt)
        self._F2 = numerics.affine_flow(m.A2, self._b2, self._dt)

    def _flow(self, stage: int, xa: np.ndarray, t: float) -> np.ndarray:
        A, b = (self.m.A1, self._b1) if stage == 1 else (self.m.A2, self._b2)
        return numerics.affine_flow(A, b, t) @ xa

    def _y(self, xa: np.ndarray) -> float:
        return float(self.m.Crow @ xa[:-1]) + self._offset

    def _residual(self, xa: np.ndarray, t: float) -> float:
        return self._y(xa) - self.m.Vh * t / self.m.T

    def step(self, x: np.ndarray, t0: float = 0.0, dense: Optional[List[tuple]] = None) -> CycleStep:
        """Advance one clock period from x(t0) with t0 a clock edge."""
        T, n = self.m.T, self.substeps
        grid = np.arange(n + 1) * self._dt
        xa = np.append(np.asarray(x, dtype=float), 1.0)

        stage1 = [xa]
        for _ in range(n):
            stage1.append(self._F1 @ stage1[-1])
        r1 = np.array([self._residual(s, t) for s, t in zip(stage1, grid)])

        saturation: Optional[int] = None
        if r1[0] <= 0.0:
            d = 0.0
            saturation = 0
        else:
            below = np.nonzero(r1[1:] <= 0.0)[0]
            if below.size == 0:
                d = T
                saturation = 1
            else:
                i = int(below[0])
                if r1[i + 1] == 0.0:
                    d = float(grid[i + 1])
                else:
                    base, t_i = stage1[i], grid[i]
                    d = float(brentq(lambda t: self._residual(self._flow(1, base, t - t_i), t),
                                     t_i, grid[i + 1], xtol=SWITCH_XTOL * T))

        x_d = self._flow(1, xa, d) if d > 0.0 else xa
        x_T = self._flow(2, x_d, T - d) if d < T else x_d

        # remaining grid points in S2, sampled for the crossing diagnostic and dense output
        later = grid[grid > d]
        stage2: List[np.ndarray] = []
        if later.size:
            stage2.append(self._flow(2, x_d, later[0] - d))
            for _ in range(later.size - 1):
                stage2.append(self._F2 @ stage2[-1])
        r2 = np.array([self._residual(s, t) for s, t in zip(stage2, later)])
        extra = int(np.count_nonzero(np.diff(np.sign(r2)) != 0)) if r2.size > 1 else 0

        if dense is not None:
            for s, t in zip(stage1, grid):
                if t < d:
                    dense.append(self._dense_row(t0 + t, s, t, 1))
            if d < T:
                dense.append(self._dense_row(t0 + d, x_d, d, 2))
            for s, t in zip(stage2, later):
                if t < T:
                    dense.append(self._dense_row(t0 + t, s, t, 2))

        return CycleStep(x_next=x_T[:-1], d=d, saturation=saturation, extra_crossings=extra)

    def _dense_row(self, t_abs: float, xa: np.ndarray, t: float, stage: int) -> tuple:
        return t_abs, xa[:-1].copy(), self._y(xa), self.m.Vh * t / self.m.T, stage

    def run(self, x_init: Sequence[float], n_cycles: int, dense: bool = False) -> Trajectory:
        if n_cycles < 1:
            raise ValueError(f"n_cycles must be >= 1, got {n_cycles}")
        x = np.asarray(x_init, dtype=float).reshape(-1)
        if x.shape != (self.m.N,):
            raise ModelError(f"initial state must have {self.m.N} entries, got {x.shape}", "simulate")

        traj = Trajectory(T=self.m.T, cycle_samples=[x.copy()])
        for k in range(n_cycles):
            t0 = k * self.m.T
            result = self.step(x, t0, traj.dense_segments if dense else None)
            x = result.x_next
            traj.cycle_samples.append(x.copy())
            traj.switch_times.append(result.d)
            traj.saturation.append(result.saturation)
            traj.extra_crossings += result.extra_crossings

        if dense:
            xa = np.append(x, 1.0)
            traj.dense_segments.append((n_cycles * self.m.T, x.copy(), self._y(xa), 0.0, 1))
        if traj.saturated_cycles:
            logger.warning(f"Duty saturated in {traj.saturated_cycles} of {n_cycles} cycles")
        if traj.extra_crossings:
            logger.info(f"{traj.extra_crossings} ramp crossing(s) after switching were ignored")
        return traj


def simulate(m: SwitchedLinearModel, u: Sequence[float], x_init: Sequence[float], n_cycles: int,
             dense: bool = False) -> Trajectory:
    """Simulate n_cycles clock periods from x_init."""
    return SwitchedSystemSimulator(m, u).run(x_init, n_cycles, dense)


def _relative_gap(a: np.ndarray, b: np.ndarray) -> float:
    scale = max(float(np.linalg.norm(b)), np.finfo(float).tiny)
    return float(np.linalg.norm(a - b)) / scale


def detect_period(traj: Trajectory, tol: Optional[float] = None) -> PeriodVerdict:
    """
    Period of the settled trajectory: 1, 2 or "other".

    The first half of the cycles (at least MIN_DISCARD) is discarded as
    transient; the verdict uses the later half of what remains.

    Raises:
        InsufficientCyclesError: If fewer than MIN_SETTLED cycles remain
    """
    tol = load_settings().period_tol if tol is None else tol
    samples = traj.cycle_samples
    n = len(samples) - 1
    discard = max(n // 2, MIN_DISCARD)
    settled = samples[discard:]
    if len(settled) < MIN_SETTLED:
        raise InsufficientCyclesError(
            f"{len(settled)} settled cycle(s) after discarding {discard}; need {MIN_SETTLED}", "simulate"
        )
    window = settled[len(settled) // 2:]

    one = max(_relative_gap(window[k + 1], window[k]) for k in range(len(window) - 1))
    if one <= tol:
        return PeriodVerdict(1, one)
    two = max(_relative_gap(window[k + 2], window[k]) for k in range(len(window) - 2))
    if two <= tol:
        return PeriodVerdict(2, two)
    return PeriodVerdict(OTHER, min(one, two))


def numeric_poincare_jacobian(m: SwitchedLinearModel, u: Sequence[float], orbit: PeriodicOrbit,
                              h_rel: float = 1e-6, output_fraction: float = 1e-4) -> np.ndarray:
    """
    Central-difference Jacobian of the one-cycle map around x0(0).

    The step on x_j is h_rel * max(|x_j|, 1), capped so the perturbation moves
    the comparator output by at most output_fraction * Vh. States with a large
    output weight (integrator states scaled by Kc) otherwise push the crossing
    out of the switching period.

    Raises:
        DutySaturationError: If a perturbed cycle saturates its duty
    """
    sim = SwitchedSystemSimulator(m, u)
    x0 = orbit.x0_0
    J = np.zeros((m.N, m.N))
    for j in range(m.N):
        h = jacobian_step(m, x0, j, h_rel, output_fraction)
        e = np.zeros(m.N)
        e[j] = h
        plus, minus = sim.step(x0 + e), sim.step(x0 - e)
        for res in (plus, minus):
            if res.saturation is not None:
                raise DutySaturationError(
                    f"perturbation of x{j + 1} saturates the duty", res.saturation, "eq8"
                )
        J[:, j] = (plus.x_next - minus.x_next) / (2.0 * h)
    return J


def jacobian_step(m: SwitchedLinearModel, x0: np.ndarray, j: int,
                  h_rel: float = 1e-6, output_fraction: float = 1e-4) -> float:
    """Finite-difference step for state j."""
    h = h_rel * max(abs(float(x0[j])), 1.0)
    weight = abs(float(m.Crow[j]))
    if weight > 0.0:
        h = min(h, output_fraction * m.Vh / weight)
    return h


def classify_by_simulation(m: SwitchedLinearModel, u: Sequence[float], orbit: Optional[PeriodicOrbit] = None,
                           cycles: int = 400, eps: float = 1e-6) -> bool:
    """
    True when a small perturbation of the T-periodic orbit grows as a flip.

    Second differences of the cycle samples suppress the fixed point and slow
    real modes, leaving the alternating component.
    """
    if orbit is None:
        orbit = solve_duty(m, u)
    x0 = orbit.x0_0
    delta = eps * max(float(np.linalg.norm(x0)), 1.0) * np.ones(m.N) / np.sqrt(m.N)
    shift = float(np.abs(m.Crow) @ np.abs(delta))
    if shift > 1e-3 * m.Vh:
        delta *= 1e-3 * m.Vh / shift
    start = x0 + delta
    traj = simulate(m, u, start, cycles)

    X = np.array(traj.cycle_samples)
    w = X[2:] - 2.0 * X[1:-1] + X[:-2]
    norms = np.linalg.norm(w, axis=1)
    window = min(20, len(norms) // 4)
    if window < 2:
        raise InsufficientCyclesError(f"{cycles} cycles are too few for the flip test", "simulate")
    early = float(np.mean(norms[:window]))
    late = float(np.mean(norms[-window:]))
    dots = np.einsum("ij,ij->i", w[1:], w[:-1])[-5 * window:]
    alternating = float(np.mean(dots < 0.0)) > 0.5
    growing = late > early
    logger.debug(f"flip test: growth {late / max(early, np.finfo(float).tiny):.3e}, alternating {alternating}")
    return growing and alternating


def bisect_critical(
    builder: Callable[[float], Tuple[SwitchedLinearModel, Sequence[float]]],
    param_range: Tuple[float, float],
    classify_by: str = "eigenvalue",
    rtol: float = 1e-4,
    cycles: int = 400,
) -> float:
    """
    Parameter value where the classification changes.

    builder maps a parameter value to (model, input). With "eigenvalue" the
    predicate is a non-stable Jacobian; with "simulation" it is the flip test.

    Raises:
        NoBracketError: If both ends classify the same way
    """
    if classify_by not in CLASSIFY_METHODS:
        raise ValueError(f"Unknown classification method {classify_by!r}; expected one of {CLASSIFY_METHODS}")
    lo, hi = param_range

    def unstable(p: float) -> bool:
        m, u = builder(p)
        if classify_by == "simulation":
            return classify_by_simulation(m, u, cycles=cycles)
        _, report = analyze_stability(m, u)
        return report.classification is not Classification.STABLE

    value = bisect_predicate(unstable, lo, hi, rtol=rtol)
    logger.info(f"Critical parameter {value:.6g} ({classify_by})")
    return value


def trajectory_frame(traj: Trajectory) -> pd.DataFrame:
    """Dense samples as a table with columns t, x1..xN, y, h, stage."""
    if not traj.dense_segments:
        raise ValueError("trajectory has no dense samples; simulate with dense=True")
    n = len(traj.dense_segments[0][1])
    rows = []
    for t, x, y, h, stage in traj.dense_segments:
        row = {"t": t}
        row.update({f"x{i + 1}": float(v) for i, v in enumerate(x)})
        row.update({"y": y, "h": h, "stage": stage})
        rows.append(row)
    return pd.DataFrame(rows, columns=["t"] + [f"x{i + 1}" for i in range(n)] + ["y", "h", "stage"])
