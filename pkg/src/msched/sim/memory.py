"""Z-basis memory experiment: preparation, noisy syndrome rounds, scheduled readout."""

from __future__ import annotations

from dataclasses import dataclass

from ..lattice import LatticeSpec
from ..modalities import ModalityInstance, build_fragment
from ..noise import DeviceProfile, idle_depolarize_prob
from ..scheduler import Schedule, ScheduleError, check_schedule
from .circuit import Circuit


@dataclass(frozen=True)
class MemoryExperiment:
    """A memory circuit plus the bookkeeping needed to build detectors.

    ``syndrome_records[k][m]`` is the record of check ``m`` in round ``k``
    (round 0 is the noiseless preparation round); ``readout_records`` maps
    each scheduled instance to the record holding its outcome.
    """

    lattice: LatticeSpec
    schedule: Schedule
    rounds: int
    circuit: Circuit
    syndrome_records: tuple[dict, ...]
    readout_records: dict

    @property
    def num_records(self) -> int:
        return self.circuit.num_records


def _syndrome_round(c: Circuit, lat: LatticeSpec, p: DeviceProfile, noisy: bool) -> dict:
    if noisy:
        for q in lat.data:
            c.append("DEPOLARIZE1", q, arg=p.round_depol)
    checks = lat.supports
    for s in checks:
        c.append("R", s.measure)
    for s in checks:
        if s.pauli == "X":
            c.append("H", s.measure)
    c.tick()
    for slot in range(4):
        for s in checks:
            d = s.slots[slot]
            if d is None:
                continue
            pair = (s.measure, d) if s.pauli == "X" else (d, s.measure)
            c.append("CX", *pair)
            if noisy:
                c.append("DEPOLARIZE2", *pair, arg=p.gate_error(d, s.measure))
        c.tick()
    for s in checks:
        if s.pauli == "X":
            c.append("H", s.measure)
    recs = {}
    for s in checks:
        if noisy:
            c.append("FLIP_MEASURE", s.measure, arg=p.mer[s.measure])
        recs[s.measure] = c.append("M", s.measure)
    c.tick()
    return recs


def _emit_fragment(c: Circuit, lat: LatticeSpec, inst: ModalityInstance, p: DeviceProfile) -> int:
    frag = build_fragment(inst, lat)
    rec = None
    for name, qs in frag.ops:
        if name == "R":
            c.append("R", *qs)
        elif name == "CX":
            c.append("CX", *qs)
            c.append("DEPOLARIZE2", *qs, arg=p.gate_error(*qs))
        else:
            c.append("FLIP_MEASURE", qs[0], arg=p.mer[qs[0]])
            rec = c.append(name, qs[0])
    return rec


def build_memory_experiment(
    lat: LatticeSpec, sched: Schedule, p: DeviceProfile, r: int, beta: float = 1.0
) -> MemoryExperiment:
    if r < 1:
        raise ValueError("need at least one syndrome round")
    if len(p.mer) != lat.num_qubits:
        raise ValueError("profile does not match the lattice")
    try:
        check_schedule(sched, lat)
    except ScheduleError as exc:
        raise ValueError(f"schedule does not fit the lattice: {exc}") from None

    c = Circuit(lat.num_qubits)
    for q in range(lat.num_qubits):
        c.append("R", q)
    c.tick()
    rounds = [_syndrome_round(c, lat, p, noisy=False)]
    for _ in range(r):
        rounds.append(_syndrome_round(c, lat, p, noisy=True))

    idle = idle_depolarize_prob(p, 1, beta)
    readout = {}
    for t, tick in enumerate(sched.ticks):
        busy = set()
        for inst in tick:
            busy |= inst.participants
            readout[inst] = _emit_fragment(c, lat, inst, p)
        for q in lat.data:
            if sched.wait[q] > t and q not in busy:
                c.append("DEPOLARIZE1", q, arg=idle)
        c.tick()
    return MemoryExperiment(lat, sched, r, c, tuple(rounds), readout)


def build_memory_circuit(
    lat: LatticeSpec, sched: Schedule, p: DeviceProfile, r: int, beta: float = 1.0
) -> Circuit:
    return build_memory_experiment(lat, sched, p, r, beta).circuit
