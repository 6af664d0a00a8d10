"""
utils/numerics.py

Small dense real-matrix kernel: matrix exponential, integral of the
exponential, linear solves and complex eigenvalues for the state dimensions
used by converter models (N <= 8).
"""

from typing import Callable, Sequence

import numpy as np
from scipy import linalg

from utils.errors import ModelError, SingularMatrixError

# Reciprocal condition number below which a solve is reported as singular
RCOND_LIMIT = 1e-14


def as_square(A, name: str = "A") -> np.ndarray:
    """Return ``A`` as a finite square float array or raise ModelError."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ModelError(f"{name} must be square, got shape {A.shape}", "numerics")
    if not np.all(np.isfinite(A)):
        raise ModelError(f"{name} has non-finite entries", "numerics")
    return A


def expm(A, t: float = 1.0) -> np.ndarray:
    """Matrix exponential e^{At} (scaling and squaring with Pade approximant)."""
    A = as_square(A)
    return linalg.expm(A * float(t))


def expm_with_integral(A, t: float):
    """
    Return ``(e^{At}, int_0^t e^{As} ds)`` from one augmented exponential.

    The augmented block matrix [[A, I], [0, 0]] avoids inverting A, so an
    integrator pole at the origin needs no special handling.
    """
    A = as_square(A)
    n = A.shape[0]
    aug = np.zeros((2 * n, 2 * n))
    aug[:n, :n] = A
    aug[:n, n:] = np.eye(n)
    E = linalg.expm(aug * float(t))
    return E[:n, :n], E[:n, n:]


def expm_integral(A, t: float) -> np.ndarray:
    """Integral of the matrix exponential over [0, t]."""
    return expm_with_integral(A, t)[1]


def affine_flow(A, b, t: float) -> np.ndarray:
    """
    Exact flow of x' = Ax + b over time t as an (N+1)x(N+1) matrix.

    Applied to the column (x, 1) it returns (x(t), 1).
    """
    A = as_square(A)
    n = A.shape[0]
    aug = np.zeros((n + 1, n + 1))
    aug[:n, :n] = A
    aug[:n, n] = np.asarray(b, dtype=float).reshape(n)
    return linalg.expm(aug * float(t))


def eig(A) -> np.ndarray:
    """All eigenvalues of A as a complex array."""
    A = as_square(A)
    return linalg.eigvals(A).astype(complex)


def solve(A, b, equation_id: str = "n/a") -> np.ndarray:
    """Solve ``A x = b`` and report ill-conditioned systems as singular."""
    A = as_square(A)
    try:
        lu, piv = linalg.lu_factor(A, check_finite=True)
    except (linalg.LinAlgError, ValueError) as e:
        raise SingularMatrixError(f"singular matrix: {e}", equation_id) from e
    diag = np.abs(np.diag(lu))
    if diag.min() == 0.0:
        raise SingularMatrixError("singular matrix (zero pivot)", equation_id)
    rcond = _rcond(A)
    if rcond < RCOND_LIMIT:
        raise SingularMatrixError(
            f"matrix is singular to working precision (rcond={rcond:.3e})", equation_id
        )
    return linalg.lu_solve((lu, piv), b)


def inv(A, equation_id: str = "n/a") -> np.ndarray:
    """Inverse of A with the same singularity reporting as :func:`solve`."""
    A = as_square(A)
    return solve(A, np.eye(A.shape[0]), equation_id)


def _rcond(A: np.ndarray) -> float:
    norm = np.linalg.norm(A, 1)
    if norm == 0.0:
        return 0.0
    try:
        return 1.0 / (norm * np.linalg.norm(np.linalg.inv(A), 1))
    except np.linalg.LinAlgError:
        return 0.0


Mapper = Callable[[Callable, Sequence], list]


def serial_map(fn: Callable, values: Sequence) -> list:
    """Evaluate fn over values in order; the default sweep mapper."""
    return [fn(v) for v in values]
