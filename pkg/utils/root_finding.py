"""
utils/root_finding.py

Bracketing helpers shared by the duty solver, curve intersections, crossover
search and parameter bisection.
"""

import logging
from typing import Callable, List, Optional

import numpy as np
from scipy.optimize import brentq

from utils.errors import NoBracketError

logger = logging.getLogger('RootFinding')


def sign_change_brackets(values: np.ndarray) -> List[int]:
    """Indices i with values[i] and values[i+1] of opposite sign (or values[i+1] == 0)."""
    brackets = []
    for i in range(len(values) - 1):
        a, b = values[i], values[i + 1]
        if not (np.isfinite(a) and np.isfinite(b)):
            continue
        if a == 0.0:
            continue
        if b == 0.0 or (a < 0.0) != (b < 0.0):
            brackets.append(i)
    return brackets


def first_root(
    f: Callable[[float], float],
    grid: np.ndarray,
    values: Optional[np.ndarray] = None,
    xtol: float = 1e-14,
) -> Optional[float]:
    """
    Smallest root of f on a sampled grid, polished with Brent's method.

    Returns None when no sign change is found. An exact zero on the grid is
    returned as is.
    """
    if values is None:
        values = np.array([f(x) for x in grid])
    if values[0] == 0.0:
        return float(grid[0])
    for i in sign_change_brackets(values):
        if values[i + 1] == 0.0:
            return float(grid[i + 1])
        return float(brentq(f, grid[i], grid[i + 1], xtol=xtol))
    return None


def all_roots(
    f: Callable[[float], float],
    lo: float,
    hi: float,
    points: int = 400,
    xtol: float = 1e-12,
) -> List[float]:
    """Every sign change of f on a uniform grid over [lo, hi], each polished with brentq."""
    grid = np.linspace(lo, hi, points)
    values = np.array([f(x) for x in grid])
    roots = []
    for i in sign_change_brackets(values):
        if values[i + 1] == 0.0:
            roots.append(float(grid[i + 1]))
        else:
            roots.append(float(brentq(f, grid[i], grid[i + 1], xtol=xtol)))
    logger.info(f"Found {len(roots)} root(s) on [{lo:g}, {hi:g}]")
    return roots


def bisect_predicate(
    predicate: Callable[[float], bool],
    lo: float,
    hi: float,
    rtol: float = 1e-4,
    max_iter: int = 200,
) -> float:
    """
    Locate where a boolean predicate flips between lo and hi.

    Raises:
        NoBracketError: If the predicate agrees at both endpoints
    """
    p_lo, p_hi = predicate(lo), predicate(hi)
    if p_lo == p_hi:
        raise NoBracketError(
            f"classification is {p_lo} at both ends of [{lo:g}, {hi:g}]", "bisect"
        )
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if abs(hi - lo) <= rtol * max(abs(mid), np.finfo(float).tiny):
            break
        if predicate(mid) == p_lo:
            lo = mid
        else:
            hi = mid
        logger.debug(f"Bisection bracket narrowed to [{lo:.8g}, {hi:.8g}]")
    return 0.5 * (lo + hi)
