"""Logical error rate estimation with Wilson intervals."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.stats import binomtest

from ..lattice import LatticeSpec
from ..noise import DeviceProfile
from ..scheduler import Schedule
from .detectors import graph_from_experiment
from .frame import BLOCK_SHOTS, FrameSimulator
from .memory import build_memory_experiment
from .uf import UnionFindDecoder

MIN_SHOTS = 1000


def wilson_interval(failures: int, shots: int) -> tuple[float, float]:
    if shots <= 0:
        raise ValueError("shots must be positive")
    ci = binomtest(int(failures), int(shots)).proportion_ci(0.95, method="wilson")
    rate = failures / shots
    return (min(float(ci.low), rate), max(float(ci.high), rate))


@dataclass(frozen=True)
class ErrorEstimate:
    failures: int
    shots: int
    rate: float
    ci95: tuple[float, float]
    block_failures: tuple[int, ...] = field(default=(), compare=False)
    block_shots: tuple[int, ...] = field(default=(), compare=False)

    @classmethod
    def from_counts(cls, failures: int, shots: int, blocks=(), block_shots=()) -> "ErrorEstimate":
        return cls(
            int(failures), int(shots), failures / shots, wilson_interval(failures, shots),
            tuple(int(b) for b in blocks), tuple(int(b) for b in block_shots),
        )

    def overlaps(self, other: "ErrorEstimate") -> bool:
        return self.ci95[0] <= other.ci95[1] and other.ci95[0] <= self.ci95[1]

    def to_json(self) -> dict:
        return {
            "shots": self.shots,
            "failures": self.failures,
            "rate": self.rate,
            "ci95": list(self.ci95),
        }


def count_failures(exp, shots: int, seed: int, block: int = BLOCK_SHOTS):
    """Per-block failure counts of the union-find decoder on a memory experiment."""
    graph = graph_from_experiment(exp)
    dec = UnionFindDecoder(graph)
    sim = FrameSimulator(exp.circuit)
    fails, sizes = [], []
    for records in sim.blocks(shots, seed, block):
        syn, obs = graph.extract(records)
        pred = dec.decode_batch(syn.T)
        fails.append(int(np.count_nonzero(pred != obs)))
        sizes.append(records.shape[1])
    return fails, sizes


def logical_error_rate(
    lat: LatticeSpec,
    sched: Schedule,
    p: DeviceProfile,
    r: int,
    beta: float,
    shots: int,
    seed: int,
    *,
    min_shots: int = MIN_SHOTS,
) -> ErrorEstimate:
    if shots < min_shots:
        raise ValueError(f"need at least {min_shots} shots, got {shots}")
    exp = build_memory_experiment(lat, sched, p, r, beta)
    if exp.circuit.num_noise_ops == 0:
        return ErrorEstimate.from_counts(0, shots, [0], [shots])
    fails, sizes = count_failures(exp, shots, seed)
    return ErrorEstimate.from_counts(sum(fails), shots, fails, sizes)


def merge_estimates(parts) -> ErrorEstimate:
    """Combine estimates from independent shot partitions (order-independent)."""
    parts = list(parts)
    f = sum(e.failures for e in parts)
    n = sum(e.shots for e in parts)
    blocks = [b for e in parts for b in e.block_failures]
    sizes = [b for e in parts for b in e.block_shots]
    return ErrorEstimate.from_counts(f, n, blocks, sizes)
