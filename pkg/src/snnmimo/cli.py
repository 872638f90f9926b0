"""Command-line entry point.

Every subcommand accepts ``--config FILE``: a JSON object whose keys are
the long flag names with dashes replaced by underscores (``tx_per_frame``,
``antennas``...) plus an optional ``lif`` object of neuron parameters.
Flags given on the command line win over the file.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from snnmimo.harness import (
    STANDARD_CONFIGS,
    ExperimentConfig,
    load_tuned_lif,
    random_instance,
    report_op_counts,
    run_attempts_study,
    run_ber_sweep,
    run_local_minima_study,
)
from snnmimo.snn import LifParams, attempt_rng, decode, init_network, run

DEFAULTS = {
    "antennas": 16,
    "streams": 4,
    "snr": "0:15:3",
    "frames": 80,
    "tx_per_frame": 100,
    "detectors": "zf,mmse,snn",
    "attempts": None,
    "seed": 0,
    "out": None,
    "workers": 1,
    "ratios": "1,2,4,8",
    "instances": 200,
    "strict": False,
    "configs": None,
    "trace": False,
}


def parse_snr(value) -> list[float]:
    """``"0:15:3"`` (inclusive stop), ``"5"``, ``"0,5,10"`` or a JSON list."""
    if isinstance(value, (list, tuple)):
        return [float(v) for v in value]
    if isinstance(value, (int, float)):
        return [float(value)]
    text = str(value)
    if ":" in text:
        parts = [float(p) for p in text.split(":")]
        if len(parts) == 2:
            parts.append(1.0)
        if len(parts) != 3 or parts[2] <= 0:
            raise ValueError(f"bad SNR range {text!r}; expected start:stop:step")
        start, stop, inc = parts
        n = int(math.floor((stop - start) / inc + 1e-9)) + 1
        return [start + i * inc for i in range(max(n, 0))]
    return [float(p) for p in text.split(",") if p]


def parse_int_list(value) -> list[int]:
    if isinstance(value, (list, tuple)):
        return [int(v) for v in value]
    if isinstance(value, int):
        return [value]
    return [int(p) for p in str(value).split(",") if p]


def parse_names(value) -> list[str]:
    if isinstance(value, (list, tuple)):
        return [str(v) for v in value]
    return [p.strip() for p in str(value).split(",") if p.strip()]


def parse_pairs(value) -> list[tuple[int, int]]:
    """``"16x4,32x8"`` or a list of ``[M, K]`` pairs."""
    if isinstance(value, (list, tuple)):
        return [(int(m), int(k)) for m, k in value]
    pairs = []
    for item in str(value).split(","):
        m, k = item.lower().split("x")
        pairs.append((int(m), int(k)))
    return pairs


def _merged(args) -> dict:
    opts = dict(DEFAULTS)
    if args.config:
        data = json.loads(Path(args.config).read_text())
        unknown = set(data) - set(DEFAULTS) - {"lif"}
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        opts.update(data)
    for key, value in vars(args).items():
        if key in DEFAULTS and value is not None:
            opts[key] = value
    return opts


def _lif(opts, multi_attempt: bool) -> LifParams:
    base = load_tuned_lif(multi_attempt)
    if "lif" in opts:
        return base.with_(**opts["lif"])
    return base


def _experiment(opts, multi_attempt: bool, attempts_list=(1,)) -> ExperimentConfig:
    attempts = parse_int_list(opts["attempts"]) if opts["attempts"] is not None else list(attempts_list)
    return ExperimentConfig(
        M=int(opts["antennas"]),
        K=int(opts["streams"]),
        snr_db_list=parse_snr(opts["snr"]),
        frames=int(opts["frames"]),
        transmissions_per_frame=int(opts["tx_per_frame"]),
        detectors=tuple(parse_names(opts["detectors"])),
        lif=_lif(opts, multi_attempt or max(attempts) > 1),
        attempts=max(attempts),
        attempts_list=tuple(attempts),
        seed=int(opts["seed"]),
        output_path=opts["out"],
        workers=int(opts["workers"]),
    )


def _print_records(records, out):
    out.write(f"{'snr_db':>7} {'detector':>8} {'attempts':>8} {'errors':>9} {'bits':>10} {'ber':>11}\n")
    for r in records:
        out.write(
            f"{r.snr_db:7.2f} {r.detector:>8} {r.attempts:8d} {r.bit_errors:9d} {r.bits_total:10d} {r.ber:11.3e}\n"
        )


def cmd_ber(args, out):
    opts = _merged(args)
    config = _experiment(opts, multi_attempt=False)
    _print_records(run_ber_sweep(config), out)


def cmd_attempts(args, out):
    opts = _merged(args)
    if opts["detectors"] == DEFAULTS["detectors"]:
        opts["detectors"] = "mmse,snn"
    config = _experiment(opts, multi_attempt=True, attempts_list=(1, 20, 40))
    _print_records(run_attempts_study(config), out)


def cmd_landscape(args, out):
    opts = _merged(args)
    K = int(opts["streams"])
    M_list = [int(round(r * K)) for r in parse_int_list(opts["ratios"])]
    snr = opts["snr"]
    snr_db = None if str(snr).lower() == "none" else parse_snr(snr)[0]
    if snr == DEFAULTS["snr"]:
        snr_db = 10.0
    table = run_local_minima_study(M_list, K, int(opts["instances"]), snr_db, int(opts["seed"]), bool(opts["strict"]))
    out.write(f"{'M':>4} {'K':>3} {'ratio':>6} {'mean_minima':>12}\n")
    for row in table:
        out.write(f"{row['M']:4d} {row['K']:3d} {row['spatial_ratio']:6.2f} {row['mean_local_minima']:12.4f}\n")
    if opts["out"]:
        Path(opts["out"]).write_text(json.dumps({"snr_db": snr_db, "rows": table}, indent=2) + "\n")


def cmd_opcount(args, out):
    opts = _merged(args)
    configs = STANDARD_CONFIGS if opts["configs"] is None else parse_pairs(opts["configs"])
    rows, avg = report_op_counts(configs)
    out.write(f"{'M':>4} {'K':>3} {'mmse_ops':>12} {'qubo_ops':>12} {'reduction':>10}\n")
    for r in rows:
        out.write(f"{r['M']:4d} {r['K']:3d} {r['mmse_total']:12.1f} {r['qubo_total']:12.1f} {r['reduction']:10.4f}\n")
    if avg is not None:
        out.write(f"average reduction {avg:.4f}\n")
    if opts["out"]:
        Path(opts["out"]).write_text(json.dumps({"rows": rows, "average": avg}, indent=2) + "\n")


def cmd_spike_dump(args, out):
    opts = _merged(args)
    M, K, seed = int(opts["antennas"]), int(opts["streams"]), int(opts["seed"])
    snr = parse_snr(opts["snr"])[0] if str(opts["snr"]).lower() != "none" else None
    lif = _lif(opts, multi_attempt=False)
    bits, _, inst = random_instance(M, K, snr, np.random.default_rng([seed, 4]))
    net = init_network(inst, lif.diagonal, lif.normalize)
    rng = attempt_rng((seed, 4), 0) if lif.sigma_v_sq > 0 else None
    raster = run(net, lif, rng, trace=bool(opts["trace"]))
    decoded = decode(raster, lif)
    if opts["out"]:
        path = Path(opts["out"])
        path.write_text(raster.to_text())
        if raster.potentials is not None:
            np.savez(path.with_suffix(".npz"), potentials=raster.potentials, currents=raster.currents)
    else:
        out.write(raster.to_text())
    out.write(f"# sent    {''.join(map(str, bits))}\n")
    out.write(f"# decoded {''.join(map(str, decoded))}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="snnmimo", description="Spiking QUBO MIMO detection experiments")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file mirroring the flags")
    common.add_argument("--seed", type=int)
    common.add_argument("--out", help="output file")

    sweep = argparse.ArgumentParser(add_help=False, parents=[common])
    sweep.add_argument("--antennas", type=int)
    sweep.add_argument("--streams", type=int)
    sweep.add_argument("--snr", help="start:stop:step in dB, stop inclusive")
    sweep.add_argument("--frames", type=int)
    sweep.add_argument("--tx-per-frame", dest="tx_per_frame", type=int)
    sweep.add_argument("--detectors", help="comma list from zf,mmse,snn,ml")
    sweep.add_argument("--attempts", help="attempt budget, or comma list for the attempts study")
    sweep.add_argument("--workers", type=int)

    p = sub.add_parser("ber", parents=[sweep], help="BER sweep over SNR")
    p.set_defaults(func=cmd_ber)
    p = sub.add_parser("attempts", parents=[sweep], help="SNN BER under several attempt budgets")
    p.set_defaults(func=cmd_attempts)

    p = sub.add_parser("landscape", parents=[common], help="mean 1-flip local minima vs spatial ratio")
    p.add_argument("--streams", type=int)
    p.add_argument("--ratios", help="comma list of M/K values")
    p.add_argument("--instances", type=int)
    p.add_argument("--snr", help="single SNR in dB, or 'none' for noiseless (default 10)")
    p.add_argument("--strict", action="store_true", default=None)
    p.set_defaults(func=cmd_landscape)

    p = sub.add_parser("opcount", parents=[common], help="operation-count comparison")
    p.add_argument("--configs", help="comma list like 16x4,32x8 (default: nine standard sizes)")
    p.set_defaults(func=cmd_opcount)

    p = sub.add_parser("spike-dump", parents=[common], help="spike raster of one random instance")
    p.add_argument("--antennas", type=int)
    p.add_argument("--streams", type=int)
    p.add_argument("--snr", help="SNR in dB, or 'none'")
    p.add_argument("--trace", action="store_true", default=None, help="also save potentials and currents (.npz)")
    p.set_defaults(func=cmd_spike_dump)
    return parser


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
    try:
        args.func(args, out)
    except (ValueError, OSError, np.linalg.LinAlgError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
