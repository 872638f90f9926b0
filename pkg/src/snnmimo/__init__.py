"""Spiking-network MU-MIMO detection via QUBO, with linear baselines and a BER harness."""

from snnmimo.linear import (
    OperationCounts,
    mmse_detect,
    op_count_mmse,
    op_count_qubo,
    reduction_ratio,
    zf_detect,
)
from snnmimo.mimo import (
    RealSystem,
    SnrSpec,
    bits_to_qpsk,
    complex_to_real,
    generate_rayleigh_channel,
    hard_demap,
    transmit,
)
from snnmimo.qubo import (
    QuboInstance,
    build_qubo,
    count_local_minima,
    ml_brute_force,
    objective,
    objective_with_constant,
    update_observation,
)
from snnmimo.snn import (
    LifParams,
    NetworkState,
    SpikeRaster,
    SpikingNetwork,
    decode,
    detect,
    init_network,
    run,
    step,
)

__version__ = "0.1.0"

__all__ = [
    "LifParams",
    "NetworkState",
    "OperationCounts",
    "QuboInstance",
    "RealSystem",
    "SnrSpec",
    "SpikeRaster",
    "SpikingNetwork",
    "bits_to_qpsk",
    "build_qubo",
    "complex_to_real",
    "count_local_minima",
    "decode",
    "detect",
    "generate_rayleigh_channel",
    "hard_demap",
    "init_network",
    "ml_brute_force",
    "mmse_detect",
    "objective",
    "objective_with_constant",
    "op_count_mmse",
    "op_count_qubo",
    "reduction_ratio",
    "run",
    "step",
    "transmit",
    "update_observation",
    "zf_detect",
]
