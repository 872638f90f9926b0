"""Zero-forcing and MMSE baselines, and analytic operation counts."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from snnmimo.mimo import RealSystem


def _cholesky_solve(gram: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    try:
        factor = cho_factor(gram, lower=True, check_finite=True)
    except LinAlgError as exc:
        raise LinAlgError(
            "Gram matrix is not positive definite; the channel is rank deficient"
        ) from exc
    return cho_solve(factor, rhs)


def _normal_equations(system: RealSystem, ridge: float) -> np.ndarray:
    H, y = system.H, system.y
    gram = H.T @ H
    if ridge:
        gram = gram + ridge * np.eye(gram.shape[0])
    # (n, 2M) observations become n right-hand sides
    rhs = (y @ H).T
    return _cholesky_solve(gram, rhs).T


def zf_detect(system: RealSystem) -> np.ndarray:
    """Solve ``H^T H x = H^T y`` by Cholesky factorization."""
    return _normal_equations(system, 0.0)


def mmse_detect(system: RealSystem, sigma_z_sq: float) -> np.ndarray:
    """Solve ``(H^T H + sigma_z^2/2 I) x = H^T y``.

    ``sigma_z_sq`` is the complex noise variance; each real dimension
    carries half of it.
    """
    if sigma_z_sq < 0:
        raise ValueError(f"noise variance must be non-negative, got {sigma_z_sq}")
    return _normal_equations(system, sigma_z_sq / 2.0)


@dataclass(frozen=True)
class OperationCounts:
    multiplications: float
    additions: float
    square_roots: float
    divisions: float

    @property
    def total(self) -> float:
        return self.multiplications + self.additions + self.square_roots + self.divisions


def _check_dims(m: int, k: int):
    if m < 1 or k < 1:
        raise ValueError(f"dimensions must be positive, got m={m}, k={k}")


def op_count_mmse(m: int, k: int) -> OperationCounts:
    """Cholesky-based MMSE cost; ``m = 2M`` real rows, ``k = 2K`` real columns."""
    _check_dims(m, k)
    return OperationCounts(
        multiplications=2 * m * k**2 + 5 / 3 * k**3,
        additions=4 / 3 * k**3 + (2 * m - 3) * k**2,
        square_roots=float(k),
        divisions=k * (k - 1) / 2,
    )


def op_count_qubo(m: int, k: int) -> OperationCounts:
    """Cost of forming the QUBO matrix; no roots or divisions."""
    _check_dims(m, k)
    return OperationCounts(
        multiplications=float(m * k**2 + m * k),
        additions=float((m - 1) * k**2 + 2 * m * k - m),
        square_roots=0.0,
        divisions=0.0,
    )


def reduction_ratio(m: int, k: int) -> float:
    return 1.0 - op_count_qubo(m, k).total / op_count_mmse(m, k).total
