"""Flat-fading MU-MIMO uplink model with QPSK symbols.

Bit layout: bit ``j`` of a ``2K`` bit vector drives element ``j`` of the
real-stacked symbol vector ``[Re x; Im x]``, so bit indices line up with
QUBO variables and with rows of the real-valued channel.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

QPSK_SCALE = 1.0 / np.sqrt(2.0)


@dataclass(frozen=True)
class SnrSpec:
    """Per-user transmit SNR and the matching complex noise variance."""

    snr_db: float
    sigma_z_sq: float

    @classmethod
    def from_db(cls, snr_db: float) -> "SnrSpec":
        # unit-energy symbols and unit-variance channel taps
        return cls(float(snr_db), float(10.0 ** (-snr_db / 10.0)))

    @classmethod
    def noiseless(cls) -> "SnrSpec":
        return cls(float("inf"), 0.0)


@dataclass(frozen=True)
class RealSystem:
    """Real-valued equivalent ``y = H x + z`` of the complex uplink.

    ``H`` is ``2M x 2K``. ``y`` is a ``2M`` vector, or an ``(n, 2M)``
    stack of observations that share the same channel.
    """

    H: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        if self.H.ndim != 2:
            raise ValueError(f"H must be 2-D, got shape {self.H.shape}")
        if self.y.shape[-1] != self.H.shape[0]:
            raise ValueError(
                f"y has {self.y.shape[-1]} entries but H has {self.H.shape[0]} rows"
            )

    @property
    def n_vars(self) -> int:
        return self.H.shape[1]


def generate_rayleigh_channel(M: int, K: int, rng: np.random.Generator) -> np.ndarray:
    """Draw an ``M x K`` matrix of i.i.d. CN(0, 1) entries."""
    if K < 1 or M < K:
        raise ValueError(f"need M >= K >= 1, got M={M}, K={K}")
    return complex_noise((M, K), rng)


def complex_noise(shape, rng: np.random.Generator) -> np.ndarray:
    """Unit-variance circularly-symmetric complex Gaussian samples.

    Real and imaginary parts are drawn as two consecutive blocks so that
    the sample layout only depends on ``shape``.
    """
    parts = rng.standard_normal((2, *np.atleast_1d(shape)))
    return (parts[0] + 1j * parts[1]) * QPSK_SCALE


def bits_to_qpsk(bits) -> np.ndarray:
    """Map ``(..., 2K)`` bits to ``(..., K)`` unit-energy QPSK symbols."""
    bits = np.asarray(bits)
    n = bits.shape[-1]
    if n == 0 or n % 2:
        raise ValueError(f"bit vector length must be a positive even number, got {n}")
    if not np.isin(bits, (0, 1)).all():
        raise ValueError("bits must be 0 or 1")
    k = n // 2
    levels = (2.0 * bits - 1.0) * QPSK_SCALE
    return levels[..., :k] + 1j * levels[..., k:]


def real_stack(v) -> np.ndarray:
    """``[Re v; Im v]`` along the last axis."""
    v = np.asarray(v)
    return np.concatenate([v.real, v.imag], axis=-1)


def transmit(
    channel: np.ndarray,
    x: np.ndarray,
    snr: SnrSpec,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """Pass symbols through the channel and add CN(0, sigma_z^2) noise.

    ``x`` may carry leading batch axes; the noise is drawn with the same
    leading shape. No generator is needed when ``sigma_z_sq`` is zero.
    """
    channel = np.asarray(channel)
    x = np.asarray(x)
    if x.shape[-1] != channel.shape[1]:
        raise ValueError(
            f"x has {x.shape[-1]} symbols but the channel has {channel.shape[1]} users"
        )
    y = x @ channel.T
    if snr.sigma_z_sq < 0:
        raise ValueError("noise variance must be non-negative")
    if snr.sigma_z_sq > 0:
        if rng is None:
            raise ValueError("a generator is required for a noisy transmission")
        y = y + np.sqrt(snr.sigma_z_sq) * complex_noise(y.shape, rng)
    return y


def real_channel(channel: np.ndarray) -> np.ndarray:
    """Block form ``[[Re H, -Im H], [Im H, Re H]]``."""
    re, im = channel.real, channel.imag
    return np.block([[re, -im], [im, re]])


def complex_to_real(channel: np.ndarray, y_cplx: np.ndarray) -> RealSystem:
    channel = np.asarray(channel, dtype=complex)
    y_cplx = np.asarray(y_cplx)
    if y_cplx.shape[-1] != channel.shape[0]:
        raise ValueError(
            f"y has {y_cplx.shape[-1]} entries but the channel has {channel.shape[0]} antennas"
        )
    return RealSystem(real_channel(channel), real_stack(y_cplx))


def hard_demap(x_hat) -> np.ndarray:
    """Sign decision on real-stacked estimates; zero maps to bit 0."""
    return (np.asarray(x_hat) > 0).astype(np.int8)
