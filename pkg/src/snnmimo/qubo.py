"""QUBO form of QPSK maximum-likelihood detection.

With ``x = (2b - 1) / alpha`` the residual expands to

    ||y - H x||^2 = b^T Q b + constant,
    Q = (4/alpha^2) H^T H - diag((4/alpha) (y + H 1 / alpha)^T H),
    constant = ||y + H 1 / alpha||^2,

using ``b_j^2 = b_j`` to fold the linear term onto the diagonal. Only the
diagonal and the constant depend on ``y``.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from snnmimo.mimo import RealSystem

MAX_ENUM_VARS = 24
_CHUNK = 1 << 14


@dataclass(frozen=True)
class QuboInstance:
    """Symmetric QUBO matrix plus the terms dropped or folded during its construction.

    ``quad_diag`` is the diagonal of the quadratic part ``(4/alpha^2) H^T H``
    before the linear term is folded in; it lets an observation update
    touch only the diagonal. Arrays may carry leading batch axes
    (``Q`` of shape ``(..., N, N)``).
    """

    Q: np.ndarray
    constant: np.ndarray | float
    alpha: float
    quad_diag: np.ndarray

    @property
    def n(self) -> int:
        return self.Q.shape[-1]


def _affine_observation(H: np.ndarray, y: np.ndarray, alpha: float) -> np.ndarray:
    return y + H.sum(axis=1) / alpha


def build_qubo(system: RealSystem, alpha: float = np.sqrt(2.0)) -> QuboInstance:
    if alpha <= 0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    H, y = system.H, system.y
    n = H.shape[1]
    quad = (4.0 / alpha**2) * (H.T @ H)
    quad = 0.5 * (quad + quad.T)
    quad_diag = np.diagonal(quad).copy()
    v = _affine_observation(H, y, alpha)
    linear = (4.0 / alpha) * (v @ H)
    Q = np.broadcast_to(quad, (*y.shape[:-1], n, n)).copy()
    idx = np.arange(n)
    Q[..., idx, idx] = quad_diag - linear
    constant = np.einsum("...i,...i->...", v, v)
    return QuboInstance(Q, constant, float(alpha), quad_diag)


def update_observation(inst: QuboInstance, system: RealSystem) -> QuboInstance:
    """Refresh diagonal and constant for a new observation over the same channel."""
    H, y = system.H, system.y
    n = inst.n
    if H.shape[1] != n:
        raise ValueError(f"instance has {n} variables, system has {H.shape[1]}")
    v = _affine_observation(H, y, inst.alpha)
    linear = (4.0 / inst.alpha) * (v @ H)
    # off-diagonals are shared by every observation over this channel
    base = inst.Q.reshape(-1, n, n)[0]
    Q = np.broadcast_to(base, (*y.shape[:-1], n, n)).copy()
    idx = np.arange(n)
    Q[..., idx, idx] = inst.quad_diag - linear
    constant = np.einsum("...i,...i->...", v, v)
    return QuboInstance(Q, constant, inst.alpha, inst.quad_diag)


def _check_bits(inst: QuboInstance, b) -> np.ndarray:
    b = np.asarray(b, dtype=float)
    if b.shape[-1] != inst.n:
        raise ValueError(f"expected {inst.n} bits, got {b.shape[-1]}")
    return b


def objective(inst: QuboInstance, b) -> np.ndarray | float:
    """``b^T Q b`` without the constant; broadcasts over leading axes of ``b``."""
    b = _check_bits(inst, b)
    return np.einsum("...i,...ij,...j->...", b, inst.Q, b)


def objective_with_constant(inst: QuboInstance, b) -> np.ndarray | float:
    return objective(inst, b) + inst.constant


def enumerate_bits(n: int, start: int = 0, stop: int | None = None) -> np.ndarray:
    """Rows are the binary expansions of ``start..stop-1``, first bit most significant."""
    stop = (1 << n) if stop is None else stop
    codes = np.arange(start, stop, dtype=np.int64)
    shifts = np.arange(n - 1, -1, -1, dtype=np.int64)
    return ((codes[:, None] >> shifts) & 1).astype(np.int8)


def _enum_guard(n: int):
    if n > MAX_ENUM_VARS:
        raise ValueError(f"exhaustive enumeration limited to {MAX_ENUM_VARS} variables, got {n}")


def ml_brute_force(system: RealSystem, alpha: float = np.sqrt(2.0)):
    """Exhaustive ``argmin ||y - H x||^2`` over the QPSK lattice.

    Works on the residual directly (no QUBO algebra). Returns
    ``(b_opt, x_opt, value)``; ties go to the smallest code.
    """
    H, y = system.H, system.y
    n = H.shape[1]
    _enum_guard(n)
    if y.ndim != 1:
        raise ValueError("ml_brute_force takes a single observation; see ml_detect_batch")
    best_val, best_code = np.inf, 0
    for start in range(0, 1 << n, _CHUNK):
        bits = enumerate_bits(n, start, min(start + _CHUNK, 1 << n))
        x = (2.0 * bits - 1.0) / alpha
        r = y - x @ H.T
        vals = np.einsum("ij,ij->i", r, r)
        i = int(np.argmin(vals))
        if vals[i] < best_val:
            best_val, best_code = float(vals[i]), start + i
    b = enumerate_bits(n, best_code, best_code + 1)[0]
    return b, (2.0 * b - 1.0) / alpha, best_val


def ml_detect_batch(H: np.ndarray, Y: np.ndarray, alpha: float = np.sqrt(2.0)) -> np.ndarray:
    """ML bits for each row of ``Y`` over a shared channel (same tie rule)."""
    n = H.shape[1]
    _enum_guard(n)
    Y = np.atleast_2d(Y)
    best_val = np.full(len(Y), np.inf)
    best_code = np.zeros(len(Y), dtype=np.int64)
    for start in range(0, 1 << n, _CHUNK):
        bits = enumerate_bits(n, start, min(start + _CHUNK, 1 << n))
        hx = ((2.0 * bits - 1.0) / alpha) @ H.T
        r = Y[:, None, :] - hx[None, :, :]
        vals = np.einsum("nij,nij->ni", r, r)
        i = np.argmin(vals, axis=1)
        v = vals[np.arange(len(Y)), i]
        better = v < best_val
        best_val[better] = v[better]
        best_code[better] = start + i[better]
    shifts = np.arange(n - 1, -1, -1, dtype=np.int64)
    return ((best_code[:, None] >> shifts) & 1).astype(np.int8)


def qubo_brute_force(inst: QuboInstance):
    """Exhaustive ``argmin b^T Q b`` for a single instance; ties to the smallest code."""
    n = inst.n
    _enum_guard(n)
    best_val, best_code = np.inf, 0
    for start in range(0, 1 << n, _CHUNK):
        bits = enumerate_bits(n, start, min(start + _CHUNK, 1 << n)).astype(float)
        vals = np.einsum("ki,ij,kj->k", bits, inst.Q, bits)
        i = int(np.argmin(vals))
        if vals[i] < best_val:
            best_val, best_code = float(vals[i]), start + i
    return enumerate_bits(n, best_code, best_code + 1)[0], best_val


def flip_gains(Q: np.ndarray, bits: np.ndarray) -> np.ndarray:
    """Energy change of each single-bit flip, for every row of ``bits``.

    Flipping bit ``i`` changes ``b^T Q b`` by
    ``(1 - 2 b_i) (Q_ii + 2 sum_{j != i} Q_ij b_j)``.
    """
    diag = np.diagonal(Q)
    field = 2.0 * bits @ Q - 2.0 * bits * diag
    return (1.0 - 2.0 * bits) * (diag + field)


def count_local_minima(inst: QuboInstance, strict: bool = False) -> int:
    """Number of bit vectors that no single flip improves.

    By default a flip that leaves the energy unchanged does not disqualify
    a state (plateaus count). With ``strict=True`` every flip must raise
    the energy.
    """
    n = inst.n
    _enum_guard(n)
    if inst.Q.ndim != 2:
        raise ValueError("count_local_minima takes a single instance")
    total = 0
    for start in range(0, 1 << n, _CHUNK):
        bits = enumerate_bits(n, start, min(start + _CHUNK, 1 << n)).astype(float)
        gains = flip_gains(inst.Q, bits)
        ok = gains > 0 if strict else gains >= 0
        total += int(ok.all(axis=1).sum())
    return total


def dump_qubo(inst: QuboInstance, path) -> None:
    """Plain-text dump: header ``N constant alpha`` then ``N`` rows of ``Q``."""
    if inst.Q.ndim != 2:
        raise ValueError("dump_qubo takes a single instance")
    lines = [f"{inst.n} {float(inst.constant)!r} {inst.alpha!r}"]
    lines += [" ".join(repr(float(v)) for v in row) for row in inst.Q]
    Path(path).write_text("\n".join(lines) + "\n")


def load_qubo(path) -> QuboInstance:
    """Read a :func:`dump_qubo` file; the quadratic diagonal is not stored and comes back as NaN."""
    rows = Path(path).read_text().split("\n")
    n_str, const_str, alpha_str = rows[0].split()
    n = int(n_str)
    Q = np.array([[float(v) for v in r.split()] for r in rows[1 : n + 1]])
    if Q.shape != (n, n):
        raise ValueError(f"expected a {n}x{n} matrix, got {Q.shape}")
    return QuboInstance(Q, float(const_str), float(alpha_str), np.full(n, np.nan))
