"""Detectors, the logical observable and the matching graph of a memory experiment."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.sparse import csr_matrix

from ..lattice import LatticeSpec
from ..noise import DeviceProfile
from ..scheduler import Schedule
from .circuit import NOISE_OUTCOMES
from .frame import FrameSimulator
from .memory import MemoryExperiment, build_memory_experiment

FAULT_CHUNK = 16384


class DetectorError(ValueError):
    pass


def readout_parity_records(exp: MemoryExperiment, support) -> list[int]:
    """Records whose XOR equals the Z-parity of ``support`` after readout.

    A parity instance must have both or neither target inside ``support``;
    otherwise the parity is not recoverable and :class:`DetectorError` is
    raised.
    """
    support = set(support)
    recs = []
    for inst, rec in exp.readout_records.items():
        inside = support & set(inst.targets)
        if not inside:
            continue
        if len(inside) != len(inst.targets):
            raise DetectorError(
                f"parity of {sorted(support)} is not recoverable: {inst.label()} splits it"
            )
        recs.append(rec)
    return sorted(recs)


@dataclass(frozen=True)
class DetectorGraph:
    """Detectors as record sets plus weighted edges for matching.

    Node ``num_detectors`` is the virtual boundary.  ``edge_obs`` marks edges
    whose fault flips the logical observable.
    """

    detectors: tuple[tuple[int, ...], ...]
    labels: tuple[tuple[int, int], ...]
    observable: tuple[int, ...]
    num_records: int
    edge_u: np.ndarray
    edge_v: np.ndarray
    edge_prob: np.ndarray
    edge_weight: np.ndarray
    edge_obs: np.ndarray
    undetectable_logical_prob: float = 0.0

    @property
    def num_detectors(self) -> int:
        return len(self.detectors)

    @property
    def boundary(self) -> int:
        return len(self.detectors)

    @property
    def num_edges(self) -> int:
        return len(self.edge_u)

    @cached_property
    def detector_matrix(self) -> csr_matrix:
        """Sparse map from records to detectors, with the observable as last row."""
        rows, cols = [], []
        for i, recs in enumerate(self.detectors):
            rows += [i] * len(recs)
            cols += list(recs)
        rows += [self.num_detectors] * len(self.observable)
        cols += list(self.observable)
        data = np.ones(len(cols), dtype=np.int32)
        return csr_matrix((data, (rows, cols)), shape=(self.num_detectors + 1, self.num_records))

    def extract(self, records: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Syndromes ``(num_detectors, shots)`` and observable flips ``(shots,)``."""
        m = self.detector_matrix
        both = (m @ records.astype(np.int32)) & 1
        both = both.astype(bool)
        return both[:-1], both[-1]


def detector_layout(exp: MemoryExperiment):
    lat = exp.lattice
    if lat.readout_check_type != "Z":
        raise DetectorError("Z-basis readout can only reconstruct Z-type checks")
    dets, labels = [], []
    checks = [s for s in lat.supports if s.pauli == lat.readout_check_type]
    for k in range(1, exp.rounds + 1):
        for s in checks:
            m = s.measure
            dets.append(tuple(sorted((exp.syndrome_records[k - 1][m], exp.syndrome_records[k][m]))))
            labels.append((k, m))
    for s in checks:
        m = s.measure
        recs = readout_parity_records(exp, s.data_support)
        dets.append(tuple(sorted([exp.syndrome_records[exp.rounds][m], *recs])))
        labels.append((exp.rounds + 1, m))
    obs = tuple(readout_parity_records(exp, lat.logical_z))
    return dets, labels, obs


def _fault_list(sim: FrameSimulator):
    cc = sim.compiled
    faults = []
    for k in np.flatnonzero(cc.slot >= 0):
        c = int(cc.code[k])
        if c in NOISE_OUTCOMES:
            n = NOISE_OUTCOMES[c]
            p = float(cc.prob[k])
            each = p if n == 1 else p / n
            for v in range(1, n + 1):
                faults.append((int(cc.slot[k]), v, each))
    return faults


def build_detector_graph(
    lat: LatticeSpec,
    sched: Schedule,
    r: int,
    p: DeviceProfile,
    beta: float = 1.0,
    readout_check_type: str = "Z",
) -> DetectorGraph:
    if readout_check_type != lat.readout_check_type:
        raise DetectorError(
            f"lattice reconstructs {lat.readout_check_type}-type checks, not {readout_check_type}"
        )
    exp = build_memory_experiment(lat, sched, p, r, beta)
    return graph_from_experiment(exp)


def graph_from_experiment(exp: MemoryExperiment) -> DetectorGraph:
    """Enumerate every single fault, one per frame-simulator shot."""
    dets, labels, obs = detector_layout(exp)
    sim = FrameSimulator(exp.circuit)
    shell = DetectorGraph(
        tuple(dets), tuple(labels), obs, exp.num_records,
        *(np.empty(0) for _ in range(5)),
    )
    faults = _fault_list(sim)
    classes: dict[tuple[int, ...], list[float]] = {}
    hidden = 0.0
    for start in range(0, len(faults), FAULT_CHUNK):
        chunk = faults[start : start + FAULT_CHUNK]
        where: dict[int, tuple[list, list]] = {}
        for j, (slot, v, _) in enumerate(chunk):
            idx, vals = where.setdefault(slot, ([], []))
            idx.append(j)
            vals.append(v)
        where = {
            s: (np.array(i, dtype=np.int64), np.array(v, dtype=np.uint8)) for s, (i, v) in where.items()
        }
        syn, flips = shell.extract(sim.run_injected(where, len(chunk)))
        for j, (slot, v, prob) in enumerate(chunk):
            hit = tuple(np.flatnonzero(syn[:, j]))
            if len(hit) > 2:
                raise DetectorError(
                    f"fault {v} at noise op {slot} flips {len(hit)} detectors {hit}"
                )
            if not hit:
                if flips[j]:
                    hidden = hidden + prob - 2 * hidden * prob
                continue
            acc = classes.setdefault(hit, [0.0, 0.0])
            o = int(flips[j])
            acc[o] = acc[o] + prob - 2 * acc[o] * prob
    us, vs, ps, os_ = [], [], [], []
    for hit, (p0, p1) in sorted(classes.items()):
        u = hit[0]
        v = hit[1] if len(hit) == 2 else len(dets)
        us.append(u)
        vs.append(v)
        ps.append(p0 + p1 - 2 * p0 * p1)
        os_.append(p1 > p0)
    probs = np.array(ps, dtype=float)
    return DetectorGraph(
        tuple(dets),
        tuple(labels),
        obs,
        exp.num_records,
        np.array(us, dtype=np.int32),
        np.array(vs, dtype=np.int32),
        probs,
        -np.log(probs),
        np.array(os_, dtype=bool),
        hidden,
    )
