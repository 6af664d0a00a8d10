"""
utils/results.py

Result containers shared by the analysis modules.
"""

from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np
import pandas as pd

# Stable-side markers for criteria whose inequality can flip with the sign
# of a denominator.
BELOW = "below"
ABOVE = "above"
NONE = "none"


@dataclass(frozen=True)
class CriterionResult:
    """
    A closed-form or exact boundary value.

    ``stable_side`` says on which side of ``value`` the operating quantity must
    lie to avoid subharmonic oscillation.
    """

    value: float
    equation_id: str
    stable_side: str = BELOW
    validity_note: str = ""
    unit: str = "V"

    def __float__(self) -> float:
        return float(self.value)

    def is_stable(self, operating_value: float) -> bool:
        if self.stable_side == BELOW:
            return operating_value < self.value
        if self.stable_side == ABOVE:
            return operating_value > self.value
        return True

    def to_dict(self) -> Dict[str, object]:
        return {
            "value": float(self.value),
            "equation_id": self.equation_id,
            "stable_side": self.stable_side,
            "validity_note": self.validity_note,
            "unit": self.unit,
        }


def side_from_denominator(denominator: float) -> str:
    """A positive denominator means the critical value is an upper bound."""
    return BELOW if denominator > 0 else ABOVE


def safe_ratio(numerator: float, denominator: float) -> float:
    if denominator == 0.0:
        return float("inf") if numerator >= 0 else float("-inf")
    return numerator / denominator


@dataclass
class BoundaryCurve:
    """Sampled criterion curve tagged with the equation that produced it."""

    criterion_id: str
    axis: str
    unit: str
    parameters: np.ndarray
    values: np.ndarray
    threshold: Optional[float] = None
    singular: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=bool))

    def __post_init__(self):
        order = np.argsort(self.parameters, kind="stable")
        self.parameters = np.asarray(self.parameters, dtype=float)[order]
        self.values = np.asarray(self.values)[order]
        if self.singular.size != self.parameters.size:
            self.singular = ~np.isfinite(self.values)
        else:
            self.singular = np.asarray(self.singular, dtype=bool)[order]

    @property
    def samples(self) -> List[tuple]:
        return list(zip(self.parameters.tolist(), self.values.tolist()))

    def threshold_crossings(self, real_part: bool = True) -> List[float]:
        """Linear-interpolated parameter values where the curve crosses its threshold."""
        if self.threshold is None:
            return []
        values = np.real(self.values) if real_part else np.asarray(self.values, dtype=float)
        excess = values - self.threshold
        crossings = []
        for i in range(len(excess) - 1):
            a, b = excess[i], excess[i + 1]
            if self.singular[i] or self.singular[i + 1]:
                continue
            if a == 0.0:
                crossings.append(float(self.parameters[i]))
            elif (a < 0.0) != (b < 0.0) and b != 0.0:
                p0, p1 = self.parameters[i], self.parameters[i + 1]
                crossings.append(float(p0 + (p1 - p0) * a / (a - b)))
        return crossings

    def to_frame(self, value_column: Optional[str] = None) -> pd.DataFrame:
        column = value_column or self.criterion_id
        if np.iscomplexobj(self.values):
            frame = pd.DataFrame({
                self.axis: self.parameters,
                f"re_{column}": np.real(self.values),
                f"im_{column}": np.imag(self.values),
            })
        else:
            frame = pd.DataFrame({self.axis: self.parameters, column: self.values})
        if self.threshold is not None:
            frame["threshold"] = self.threshold
        return frame
