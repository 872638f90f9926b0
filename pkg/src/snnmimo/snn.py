"""Discrete-time leaky integrate-and-fire network that searches a QUBO landscape.

Each neuron stands for one bit. Synapses carry the negated QUBO matrix,
so spiking activity drifts toward low ``b^T Q b``. One simulation step:

1. every neuron adds the weights of the spikes emitted on the previous
   step to its synaptic current (the current never leaks unless
   ``current_decay < 1``), plus a constant drive and optional Gaussian
   jitter;
2. the membrane potential takes a forward-Euler step
   ``u += dt/tau * (R * i_syn - u)``;
3. neurons with ``u >= u_th`` spike and reset to ``u_rst``.

Bits are read out as "spiked on more than half of the final window".

Diagonal handling
-----------------
The QUBO diagonal mixes the quadratic self-term ``(4/alpha^2)||h_i||^2``
with the observation-dependent linear term. Because ``b_i^2 = b_i`` any
split of the diagonal into a self-synapse ``lambda_i`` and a per-step
drive ``-(Q_ii - lambda_i) / 2`` leaves every bit vector's energy
unchanged. ``diagonal="self"`` routes the whole diagonal through
self-synapses (``lambda = diag Q``). ``diagonal="split"`` uses the
quadratic part as the self-synapse, which makes the rate relaxation the
box-constrained least-squares problem and removes most spurious fixed
points.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, fields, replace

import numpy as np

from snnmimo.qubo import QuboInstance, objective

DIAGONAL_MODES = ("self", "split")
NOISE_MODES = ("synapse", "neuron")


@dataclass(frozen=True)
class LifParams:
    dt: float = 1.0
    tau: float = 10.0
    R: float = 1.0
    u_th: float = 1.0
    u_rst: float = 0.0
    T: int = 200
    # None -> 2 * u_th / R, enough to make every neuron fire at the start
    i0: float | None = None
    sigma_v_sq: float = 0.0
    decode_window: float = 1.0
    current_decay: float = 1.0
    noise_mode: str = "synapse"
    diagonal: str = "self"
    normalize: bool = True

    def __post_init__(self):
        if self.i0 is None:
            object.__setattr__(self, "i0", 2.0 * self.u_th / self.R)
        if not 0 < self.dt < self.tau:
            raise ValueError(f"need 0 < dt < tau, got dt={self.dt}, tau={self.tau}")
        if self.u_th <= self.u_rst:
            raise ValueError("firing threshold must exceed the reset potential")
        if int(self.T) != self.T or self.T < 1:
            raise ValueError(f"T must be a positive integer, got {self.T}")
        if not 0 < self.decode_window <= 1:
            raise ValueError(f"decode_window must lie in (0, 1], got {self.decode_window}")
        if self.sigma_v_sq < 0:
            raise ValueError("sigma_v_sq must be non-negative")
        if not 0 <= self.current_decay <= 1:
            raise ValueError("current_decay must lie in [0, 1]")
        if self.noise_mode not in NOISE_MODES:
            raise ValueError(f"noise_mode must be one of {NOISE_MODES}")
        if self.diagonal not in DIAGONAL_MODES:
            raise ValueError(f"diagonal must be one of {DIAGONAL_MODES}")
        object.__setattr__(self, "T", int(self.T))

    @property
    def window_steps(self) -> int:
        return math.ceil(self.decode_window * self.T)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "LifParams":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown LIF parameters: {sorted(unknown)}")
        return cls(**data)

    def with_(self, **changes) -> "LifParams":
        return replace(self, **changes)


@dataclass(frozen=True)
class SpikingNetwork:
    """Synapses of one network (or a stack of networks along leading axes).

    ``weights`` is the negated QUBO matrix. ``coupling`` and ``drive`` are
    what the dynamics actually use: ``weights`` with the diagonal replaced
    by the self-synapse strengths, and the constant per-step input, both
    divided by ``scale``. Scaling by a positive constant does not move the
    QUBO minimizer.
    """

    weights: np.ndarray
    coupling: np.ndarray
    drive: np.ndarray
    scale: np.ndarray

    @property
    def n(self) -> int:
        return self.weights.shape[-1]


@dataclass
class NetworkState:
    u: np.ndarray
    i_syn: np.ndarray
    last_spikes: np.ndarray


@dataclass(frozen=True)
class SpikeRaster:
    """``spikes[..., t, i]`` is 1 when neuron ``i`` fired on step ``t``.

    ``potentials`` and ``currents`` hold the pre-reset membrane potential
    and the synaptic current of every step when the run was traced.
    """

    spikes: np.ndarray
    potentials: np.ndarray | None = field(default=None, repr=False)
    currents: np.ndarray | None = field(default=None, repr=False)

    @property
    def T(self) -> int:
        return self.spikes.shape[-2]

    def to_text(self) -> str:
        """One line per step, one 0/1 character per neuron."""
        if self.spikes.ndim != 2:
            raise ValueError("only a single raster can be dumped")
        return "".join("".join("1" if s else "0" for s in row) + "\n" for row in self.spikes)

    @classmethod
    def from_text(cls, text: str) -> "SpikeRaster":
        rows = [r for r in text.splitlines() if r]
        return cls(np.array([[c == "1" for c in r] for r in rows], dtype=np.int8))


def init_network(
    inst: QuboInstance, diagonal: str = "self", normalize: bool = True
) -> SpikingNetwork:
    if diagonal not in DIAGONAL_MODES:
        raise ValueError(f"diagonal must be one of {DIAGONAL_MODES}")
    Q = np.asarray(inst.Q, dtype=float)
    n = Q.shape[-1]
    idx = np.arange(n)
    weights = -Q
    q_diag = Q[..., idx, idx]
    if diagonal == "self":
        self_w = -q_diag
        drive = np.zeros_like(q_diag)
    else:
        quad = np.broadcast_to(np.asarray(inst.quad_diag, dtype=float), q_diag.shape)
        if not np.isfinite(quad).all():
            raise ValueError("diagonal='split' needs the quadratic diagonal of the instance")
        self_w = -quad
        drive = (quad - q_diag) / 2.0
    if normalize:
        scale = np.abs(Q).max(axis=(-2, -1))
        scale = np.where(scale > 0, scale, 1.0)
    else:
        scale = np.ones(Q.shape[:-2])
    coupling = weights.copy()
    coupling[..., idx, idx] = self_w
    coupling /= scale[..., None, None]
    drive = drive / scale[..., None]
    return SpikingNetwork(weights, coupling, drive, np.asarray(scale))


def initial_state(net: SpikingNetwork, params: LifParams, batch_shape=()) -> NetworkState:
    shape = np.broadcast_shapes(net.drive.shape, (*batch_shape, net.n))
    return NetworkState(
        u=np.full(shape, float(params.u_rst)),
        i_syn=np.full(shape, float(params.i0)),
        last_spikes=np.zeros(shape, dtype=bool),
    )


def _advance(net, u, i_syn, spikes, params, z):
    s = spikes.astype(float)
    incoming = (net.coupling @ s[..., None])[..., 0]
    i_syn = params.current_decay * i_syn + incoming + net.drive
    if z is not None and params.sigma_v_sq > 0:
        if params.noise_mode == "synapse":
            # sum of one N(0, sigma_v^2) draw per delivered spike
            amp = np.sqrt(params.sigma_v_sq * s.sum(axis=-1, keepdims=True))
        else:
            amp = math.sqrt(params.sigma_v_sq)
        i_syn = i_syn + amp * z
    u = u + (params.dt / params.tau) * (params.R * i_syn - u)
    fired = u >= params.u_th
    return u, i_syn, fired


def step(
    net: SpikingNetwork,
    state: NetworkState,
    params: LifParams,
    rng: np.random.Generator | None = None,
) -> tuple[NetworkState, np.ndarray]:
    """Advance one time step; returns the new state and this step's spikes."""
    if state.u.shape[-1] != net.n:
        raise ValueError(f"state has {state.u.shape[-1]} neurons, network has {net.n}")
    z = None
    if rng is not None and params.sigma_v_sq > 0:
        z = rng.standard_normal(state.u.shape)
    u, i_syn, fired = _advance(net, state.u, state.i_syn, state.last_spikes, params, z)
    if not (np.isfinite(u).all() and np.isfinite(i_syn).all()):
        raise FloatingPointError("network state became non-finite")
    u = np.where(fired, params.u_rst, u)
    return NetworkState(u, i_syn, fired), fired.astype(np.int8)


def run(
    net: SpikingNetwork,
    params: LifParams,
    rng: np.random.Generator | None = None,
    *,
    noise: np.ndarray | None = None,
    trace: bool = False,
) -> SpikeRaster:
    """Simulate ``params.T`` steps from the standard start state.

    Jitter comes either from ``rng`` (one ``standard_normal`` draw of the
    state shape per step) or from a pre-drawn ``noise`` array of shape
    ``(..., T, N)``; the two agree when ``noise`` was drawn from the same
    generator in one call. Leading axes of ``noise`` broadcast against the
    network, which is how independent attempts share one network.
    """
    if rng is not None and noise is not None:
        raise ValueError("pass either rng or noise, not both")
    batch = () if noise is None else noise.shape[:-2]
    if noise is not None and noise.shape[-2:] != (params.T, net.n):
        raise ValueError(f"noise must end in ({params.T}, {net.n}), got {noise.shape}")
    state = initial_state(net, params, batch)
    u, i_syn, spikes = state.u, state.i_syn, state.last_spikes
    shape = u.shape
    raster = np.zeros((*shape[:-1], params.T, net.n), dtype=np.int8)
    pots = np.zeros(raster.shape) if trace else None
    curs = np.zeros(raster.shape) if trace else None
    draw = rng is not None and params.sigma_v_sq > 0
    for t in range(params.T):
        if draw:
            z = rng.standard_normal(shape)
        elif noise is not None:
            z = noise[..., t, :]
        else:
            z = None
        u, i_syn, spikes = _advance(net, u, i_syn, spikes, params, z)
        if trace:
            pots[..., t, :] = u
            curs[..., t, :] = i_syn
        u = np.where(spikes, params.u_rst, u)
        raster[..., t, :] = spikes
    if not (np.isfinite(u).all() and np.isfinite(i_syn).all()):
        raise FloatingPointError("network state became non-finite")
    return SpikeRaster(raster, pots, curs)


def decode(raster: SpikeRaster | np.ndarray, params: LifParams) -> np.ndarray:
    """Bit ``i`` is 1 iff neuron ``i`` fired on more than half of the final window."""
    spikes = raster.spikes if isinstance(raster, SpikeRaster) else np.asarray(raster)
    T = spikes.shape[-2]
    if T == 0:
        raise ValueError("cannot decode an empty raster")
    w = min(T, math.ceil(params.decode_window * T))
    counts = spikes[..., T - w :, :].sum(axis=-2, dtype=np.int64)
    return (2 * counts > w).astype(np.int8)


def attempt_rng(seed_key, attempt: int) -> np.random.Generator:
    """Independent generator for one attempt, keyed by ``(*seed_key, attempt)``."""
    key = (seed_key,) if np.isscalar(seed_key) else tuple(seed_key)
    return np.random.default_rng([*map(int, key), int(attempt)])


def attempt_noise(seed_key, attempts: int, params: LifParams, n: int) -> np.ndarray:
    """Jitter for ``attempts`` runs, shape ``(attempts, T, n)``.

    Attempt ``a`` always receives the same stream whatever the total
    number of attempts, so budgets nest.
    """
    return np.stack(
        [attempt_rng(seed_key, a).standard_normal((params.T, n)) for a in range(attempts)]
    )


def detect(inst: QuboInstance, params: LifParams, attempts: int = 1, seed: int = 0):
    """Best decoded bit vector over independent runs.

    Attempt ``a`` draws its jitter from :func:`attempt_rng` ``(seed, a)``.
    Returns ``(bits, objective)``; ties keep the earliest attempt.
    """
    if attempts < 1:
        raise ValueError("attempts must be at least 1")
    if inst.Q.ndim != 2:
        raise ValueError("detect takes a single instance")
    net = init_network(inst, params.diagonal, params.normalize)
    best_bits, best_val = None, np.inf
    for a in range(attempts):
        rng = attempt_rng(seed, a) if params.sigma_v_sq > 0 else None
        bits = decode(run(net, params, rng), params)
        val = float(objective(inst, bits))
        if val < best_val:
            best_bits, best_val = bits, val
    return best_bits, best_val


def best_of_attempts(Q: np.ndarray, bits: np.ndarray, budgets) -> dict[int, np.ndarray]:
    """Pick the lowest-objective candidate within each attempt budget.

    ``bits`` has shape ``(..., A, N)`` and ``Q`` shape ``(..., N, N)``
    with matching leading axes; budget ``k`` looks at attempts
    ``0..k-1`` only and ties keep the earliest attempt.
    """
    Q = np.asarray(Q)[..., None, :, :]
    vals = np.einsum("...ai,...aij,...aj->...a", bits.astype(float), Q, bits.astype(float))
    out = {}
    for k in budgets:
        if not 1 <= k <= bits.shape[-2]:
            raise ValueError(f"budget {k} outside 1..{bits.shape[-2]}")
        pick = np.argmin(vals[..., :k], axis=-1)
        out[k] = np.take_along_axis(bits, pick[..., None, None], axis=-2)[..., 0, :]
    return out
