"""Monte-Carlo BER sweeps, landscape statistics and operation-count reports.

Randomness is keyed, not streamed: frame ``f`` draws its channel from
``default_rng([seed, 0, f])`` and its bits and unit noise from
``default_rng([seed, 1, f])``; SNN attempt ``a`` of transmission ``t``
uses ``default_rng([seed, 2, f, t, a])``. Results therefore do not depend
on worker count or evaluation order. Every SNR point reuses the same
channels, bits and unit noise (scaled), and every detector sees the same
observations.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
import math
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from snnmimo.linear import mmse_detect, op_count_mmse, op_count_qubo, zf_detect
from snnmimo.mimo import (
    RealSystem,
    SnrSpec,
    bits_to_qpsk,
    complex_noise,
    complex_to_real,
    generate_rayleigh_channel,
    hard_demap,
    real_channel,
    transmit,
)
from snnmimo.qubo import MAX_ENUM_VARS, build_qubo, count_local_minima, ml_detect_batch
from snnmimo.snn import (
    LifParams,
    attempt_noise,
    best_of_attempts,
    decode,
    init_network,
    run,
)

log = logging.getLogger(__name__)

DETECTORS = ("zf", "mmse", "snn", "ml")
SNR_CONVENTION = "per-user transmit SNR: sigma_z^2 = 10^(-snr_db/10), E|x_k|^2 = 1, h ~ CN(0,1)"
STANDARD_CONFIGS = [(M, K) for M in (16, 32, 64) for K in (4, 8, 16)]
# SNN work per chunk, in transmissions x attempts
_SNN_CHUNK = 1000


def load_tuned_lif(multi_attempt: bool = False) -> LifParams:
    """LIF parameters shipped with the package for the BER experiments.

    The single-run profile is deterministic; ``multi_attempt=True`` adds
    the current jitter used when several runs compete.
    """
    text = resources.files("snnmimo.configs").joinpath("tuned.json").read_text()
    data = json.loads(text)
    params = LifParams.from_dict(data["lif"])
    if multi_attempt:
        params = params.with_(**data["multi_attempt"])
    return params


@dataclass
class ExperimentConfig:
    M: int
    K: int
    snr_db_list: list[float]
    frames: int = 80
    transmissions_per_frame: int = 100
    detectors: tuple[str, ...] = ("zf", "mmse", "snn")
    lif: LifParams = field(default_factory=LifParams)
    attempts: int = 1
    attempts_list: tuple[int, ...] = (1, 20, 40)
    seed: int = 0
    output_path: str | None = None
    alpha: float = math.sqrt(2.0)
    target_ber: float = 1e-4
    workers: int = 1

    def __post_init__(self):
        self.snr_db_list = [float(s) for s in self.snr_db_list]
        self.detectors = tuple(self.detectors)
        self.attempts_list = tuple(int(a) for a in self.attempts_list)
        if isinstance(self.lif, dict):
            self.lif = LifParams.from_dict(self.lif)
        self.validate()

    def validate(self):
        if self.K < 1 or self.M < self.K:
            raise ValueError(f"need M >= K >= 1, got M={self.M}, K={self.K}")
        if self.frames < 1 or self.transmissions_per_frame < 1:
            raise ValueError("frames and transmissions_per_frame must be positive")
        if not self.snr_db_list:
            raise ValueError("snr_db_list is empty")
        bad = set(self.detectors) - set(DETECTORS)
        if bad or not self.detectors:
            raise ValueError(f"unknown detectors {sorted(bad)}; choose from {DETECTORS}")
        if "ml" in self.detectors and 2 * self.K > MAX_ENUM_VARS:
            raise ValueError(f"ml detector needs 2K <= {MAX_ENUM_VARS}, got 2K={2 * self.K}")
        if self.attempts < 1 or min(self.attempts_list, default=1) < 1:
            raise ValueError("attempt counts must be at least 1")
        if self.seed < 0 or self.seed >= 2**64:
            raise ValueError("seed must fit in 64 unsigned bits")
        needed = 100.0 / self.target_ber
        if self.bits_per_point < needed:
            warnings.warn(
                f"{self.bits_per_point} bits per SNR point cannot resolve BER "
                f"{self.target_ber:g} with 100 errors ({needed:.0f} bits needed)",
                stacklevel=4,
            )

    @property
    def bits_per_point(self) -> int:
        return self.frames * self.transmissions_per_frame * 2 * self.K

    def to_dict(self) -> dict:
        d = asdict(self)
        d["detectors"] = list(self.detectors)
        d["attempts_list"] = list(self.attempts_list)
        return d

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        return cls(**data)

    def config_hash(self) -> str:
        d = self.to_dict()
        d.pop("output_path", None)
        d.pop("workers", None)
        blob = json.dumps(d, sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


@dataclass(frozen=True)
class BerRecord:
    snr_db: float
    detector: str
    attempts: int
    bit_errors: int
    bits_total: int
    wall_time: float
    config_hash: str

    @property
    def ber(self) -> float:
        return self.bit_errors / self.bits_total


def _snn_bits(H, Y, alpha, lif: LifParams, budgets, noise):
    """Decoded SNN bits per attempt budget for the observations ``Y`` of shape ``(n, 2M)``."""
    # (n, 1, 2M) so each network broadcasts against its (attempts, T, N) noise
    inst = build_qubo(RealSystem(H, Y[:, None, :]), alpha)
    net = init_network(inst, lif.diagonal, lif.normalize)
    bits = decode(run(net, lif, noise=noise), lif)
    if bits.shape[1] == 1:
        return {k: bits[:, 0] for k in budgets}
    return best_of_attempts(inst.Q[:, 0], bits, budgets)


def _frame_errors(config: ExperimentConfig, frame: int, budgets):
    """Bit errors and detector time for one frame, keyed by ``(snr_index, detector, attempts)``."""
    M, K, n_tx = config.M, config.K, config.transmissions_per_frame
    ch = generate_rayleigh_channel(M, K, np.random.default_rng([config.seed, 0, frame]))
    data_rng = np.random.default_rng([config.seed, 1, frame])
    bits = data_rng.integers(0, 2, size=(n_tx, 2 * K), dtype=np.int8)
    unit_noise = complex_noise((n_tx, M), data_rng)
    clean = transmit(ch, bits_to_qpsk(bits), SnrSpec.noiseless())
    H = real_channel(ch)

    observations = []
    for snr_db in config.snr_db_list:
        snr = SnrSpec.from_db(snr_db)
        y = clean + math.sqrt(snr.sigma_z_sq) * unit_noise
        observations.append((snr, complex_to_real(ch, y)))

    errors, times = {}, {}

    def tally(key, est, ref, t0):
        errors[key] = errors.get(key, 0) + int(np.count_nonzero(est != ref))
        times[key] = times.get(key, 0.0) + time.perf_counter() - t0

    for si, (snr, system) in enumerate(observations):
        for det in config.detectors:
            t0 = time.perf_counter()
            if det == "zf":
                tally((si, det, 1), hard_demap(zf_detect(system)), bits, t0)
            elif det == "mmse":
                tally((si, det, 1), hard_demap(mmse_detect(system, snr.sigma_z_sq)), bits, t0)
            elif det == "ml":
                tally((si, det, 1), ml_detect_batch(H, system.y, config.alpha), bits, t0)

    if "snn" in config.detectors:
        lif = config.lif
        # without jitter every attempt is the same run
        n_att = max(budgets) if lif.sigma_v_sq > 0 else 1
        chunk = max(1, _SNN_CHUNK // n_att)
        for lo in range(0, n_tx, chunk):
            hi = min(n_tx, lo + chunk)
            noise = None
            if lif.sigma_v_sq > 0:
                noise = np.stack(
                    [attempt_noise((config.seed, 2, frame, t), n_att, lif, 2 * K) for t in range(lo, hi)]
                )
            for si, (_, system) in enumerate(observations):
                t0 = time.perf_counter()
                picked = _snn_bits(H, system.y[lo:hi], config.alpha, lif, budgets, noise)
                for k, est in picked.items():
                    tally((si, "snn", k), est, bits[lo:hi], t0)
    return errors, times


def _frame_job(args):
    return _frame_errors(*args)


def _simulate(config: ExperimentConfig, budgets) -> list[BerRecord]:
    budgets = sorted(set(budgets))
    errors, times = {}, {}
    jobs = [(config, f, budgets) for f in range(config.frames)]
    if config.workers > 1:
        with ProcessPoolExecutor(config.workers) as pool:
            results = list(pool.map(_frame_job, jobs))
    else:
        results = map(_frame_job, jobs)
    for f, (err, tim) in enumerate(results):
        for k, v in err.items():
            errors[k] = errors.get(k, 0) + v
        for k, v in tim.items():
            times[k] = times.get(k, 0.0) + v
        log.debug("frame %d/%d done", f + 1, config.frames)
    h = config.config_hash()
    total = config.bits_per_point
    records = []
    for si, snr_db in enumerate(config.snr_db_list):
        for det in config.detectors:
            for k in budgets if det == "snn" else [1]:
                records.append(
                    BerRecord(snr_db, det, k, errors[(si, det, k)], total, times[(si, det, k)], h)
                )
    return records


def run_ber_sweep(config: ExperimentConfig) -> list[BerRecord]:
    """BER of every enabled detector at every SNR point."""
    records = _simulate(config, [config.attempts])
    if config.output_path:
        write_results(records, config, config.output_path)
    return records


def run_attempts_study(config: ExperimentConfig) -> list[BerRecord]:
    """SNN BER under each budget in ``attempts_list`` over one shared instance set.

    Attempt streams nest, so a budget of ``k`` is the best of the first
    ``k`` runs of the largest budget.
    """
    records = _simulate(config, config.attempts_list)
    if config.output_path:
        write_results(records, config, config.output_path)
    return records


def records_to_csv(records: list[BerRecord], config_hash: str) -> str:
    buf = io.StringIO()
    buf.write(f"# config_hash={config_hash}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["snr_db", "detector", "attempts", "bit_errors", "bits_total", "ber"])
    for r in records:
        w.writerow([repr(r.snr_db), r.detector, r.attempts, r.bit_errors, r.bits_total, repr(r.ber)])
    return buf.getvalue()


def read_results_csv(path) -> list[dict]:
    lines = [ln for ln in Path(path).read_text().splitlines() if not ln.startswith("#")]
    rows = list(csv.DictReader(lines))
    for r in rows:
        r["snr_db"] = float(r["snr_db"])
        r["attempts"] = int(r["attempts"])
        r["bit_errors"] = int(r["bit_errors"])
        r["bits_total"] = int(r["bits_total"])
        r["ber"] = float(r["ber"])
    return rows


def write_results(records: list[BerRecord], config: ExperimentConfig, path) -> Path:
    """CSV of counts plus a JSON sidecar with the full config and timings.

    Timings live only in the sidecar so the CSV is reproducible byte for byte.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    h = config.config_hash()
    path.write_text(records_to_csv(records, h))
    sidecar = {
        "config_hash": h,
        "config": config.to_dict(),
        "snr_convention": SNR_CONVENTION,
        "wall_time": [
            {"snr_db": r.snr_db, "detector": r.detector, "attempts": r.attempts, "seconds": r.wall_time}
            for r in records
        ],
    }
    path.with_suffix(".json").write_text(json.dumps(sidecar, indent=2, sort_keys=True) + "\n")
    return path


def random_instance(M: int, K: int, snr_db: float | None, rng: np.random.Generator, alpha=math.sqrt(2.0)):
    """One channel, random bits and observation; returns ``(bits, system, instance)``."""
    ch = generate_rayleigh_channel(M, K, rng)
    bits = rng.integers(0, 2, size=2 * K, dtype=np.int8)
    snr = SnrSpec.noiseless() if snr_db is None else SnrSpec.from_db(snr_db)
    y = transmit(ch, bits_to_qpsk(bits), snr, rng)
    system = complex_to_real(ch, y)
    return bits, system, build_qubo(system, alpha)


def run_local_minima_study(
    M_list, K: int, instances_per_point: int, snr_db: float | None = 10.0, seed: int = 0, strict: bool = False
) -> list[dict]:
    """Mean number of 1-flip local minima per antenna count."""
    if 2 * K > MAX_ENUM_VARS:
        raise ValueError(f"landscape enumeration needs 2K <= {MAX_ENUM_VARS}")
    table = []
    for M in M_list:
        rng = np.random.default_rng([seed, 3, M])
        counts = [
            count_local_minima(random_instance(M, K, snr_db, rng)[2], strict=strict)
            for _ in range(instances_per_point)
        ]
        table.append(
            {"M": M, "K": K, "spatial_ratio": M / K, "mean_local_minima": float(np.mean(counts))}
        )
    return table


def report_op_counts(configs) -> tuple[list[dict], float | None]:
    """Per-configuration operation totals and the mean reduction; ``configs`` holds ``(M, K)`` pairs."""
    rows = []
    for M, K in configs:
        m, k = 2 * M, 2 * K
        mmse, qubo = op_count_mmse(m, k), op_count_qubo(m, k)
        rows.append(
            {
                "M": M,
                "K": K,
                "mmse_total": mmse.total,
                "qubo_total": qubo.total,
                "reduction": 1.0 - qubo.total / mmse.total,
            }
        )
    avg = float(np.mean([r["reduction"] for r in rows])) if rows else None
    return rows, avg
