"""MS-local: greedy per-unit modality selection plus first-fit temporal deferral.

A *readout unit* is either a groupable pair or a single data qubit outside
every pair.  An *option* for a unit is a tuple of modality instances that
covers each of its data qubits exactly once: one instance for a single, a
joint parity instance or two single instances for a pair.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from .lattice import LatticeSpec
from .modalities import (
    ModalityInstance,
    ModalityKind,
    cost,
    enumerate_modalities,
    rank_key,
)
from .noise import DeviceProfile

Unit = tuple[int, ...]
Option = tuple[ModalityInstance, ...]


class ScheduleError(ValueError):
    pass


def readout_units(lat: LatticeSpec) -> list[Unit]:
    paired = {q for pair in lat.groupable for q in pair}
    units: list[Unit] = [tuple(p) for p in lat.groupable]
    units += [(q,) for q in lat.data if q not in paired]
    return sorted(units)


def option_cost(option: Option, p: DeviceProfile) -> float:
    total = 0.0
    for inst in option:
        total += cost(inst, p)
    return total


def option_gates(option: Option) -> int:
    return sum(inst.gate_count for inst in option)


def option_key(option: Option, p: DeviceProfile) -> tuple:
    return (option_cost(option, p), option_gates(option), tuple(i.measured for i in option))


def dm_option(unit: Unit) -> Option:
    return tuple(ModalityInstance(ModalityKind.DM, (q,), q) for q in unit)


@dataclass(frozen=True)
class Assignment:
    choice: Mapping[Unit, Option]
    covered: frozenset[int] = field(default=frozenset())

    def __post_init__(self):
        seen: set[int] = set()
        for unit, option in self.choice.items():
            got = []
            for inst in option:
                got.extend(inst.targets)
            if sorted(got) != sorted(unit):
                raise ScheduleError(f"option {option} does not cover unit {unit}")
            if seen & set(got):
                raise ScheduleError(f"data qubit covered twice in unit {unit}")
            seen |= set(got)
        object.__setattr__(self, "covered", frozenset(seen))

    def instances(self) -> list[ModalityInstance]:
        out = []
        for unit in sorted(self.choice):
            out.extend(self.choice[unit])
        return out

    def kinds(self) -> dict[str, int]:
        counts: dict[str, int] = {}
        for inst in self.instances():
            counts[inst.kind.value] = counts.get(inst.kind.value, 0) + 1
        return counts


def best_single(lat: LatticeSpec, q: int, p: DeviceProfile) -> ModalityInstance:
    return min(enumerate_modalities(lat, q), key=lambda i: rank_key(i, p))


def select_local(lat: LatticeSpec, p: DeviceProfile) -> Assignment:
    choice: dict[Unit, Option] = {}
    for unit in readout_units(lat):
        if len(unit) == 1:
            choice[unit] = (best_single(lat, unit[0], p),)
            continue
        joint = min(enumerate_modalities(lat, unit), key=lambda i: rank_key(i, p))
        ind = (best_single(lat, unit[0], p), best_single(lat, unit[1], p))
        choice[unit] = min([(joint,), ind], key=lambda o: option_key(o, p))
    return Assignment(choice)


def all_dm(lat: LatticeSpec) -> Assignment:
    """The Original readout: every data qubit measured directly."""
    choice = {}
    for unit in readout_units(lat):
        choice[unit] = dm_option(unit)
    return Assignment(choice)


def total_cost(a: Assignment, p: DeviceProfile, lat: Optional[LatticeSpec] = None) -> float:
    if not a.choice:
        raise ScheduleError("empty assignment")
    if lat is not None and a.covered != frozenset(lat.data):
        raise ScheduleError("assignment does not cover every data qubit")
    total = 0.0
    for unit in sorted(a.choice):
        total += option_cost(a.choice[unit], p)
    return total


@dataclass(frozen=True)
class Schedule:
    ticks: tuple[tuple[ModalityInstance, ...], ...]
    wait: Mapping[int, int]

    @property
    def tau(self) -> int:
        return len(self.ticks)

    def instances(self) -> list[ModalityInstance]:
        return [inst for tick in self.ticks for inst in tick]

    def tick_of(self, inst: ModalityInstance) -> int:
        for t, tick in enumerate(self.ticks):
            if inst in tick:
                return t
        raise KeyError(inst)

    def to_json(self) -> dict:
        return {
            "tau": self.tau,
            "ticks": [[inst.to_json() for inst in tick] for tick in self.ticks],
            "wait": {str(q): w for q, w in sorted(self.wait.items())},
        }

    @classmethod
    def from_json(cls, raw: dict) -> "Schedule":
        ticks = tuple(
            tuple(ModalityInstance.from_json(r) for r in tick) for tick in raw["ticks"]
        )
        wait = {int(k): int(v) for k, v in raw["wait"].items()}
        sched = cls(ticks, wait)
        if "tau" in raw and int(raw["tau"]) != sched.tau:
            raise ScheduleError("tau does not match tick count")
        return sched


def pack_instances(
    instances: Sequence[ModalityInstance], order_seed: int = 0
) -> Schedule:
    """First-fit packing of instances into conflict-free ticks.

    Instances are visited in row-major target order (``order_seed != 0``
    shuffles that order reproducibly).  An instance lands in the earliest tick
    where its participants are free and after the readout of every data
    qubit it resets as a helper.
    """
    order = sorted(instances, key=lambda i: i.targets)
    if order_seed:
        perm = np.random.default_rng(order_seed).permutation(len(order))
        order = [order[k] for k in perm]

    readout_tick: dict[int, int] = {}
    busy: list[set[int]] = []
    ticks: list[list[ModalityInstance]] = []
    pending = list(order)
    while pending:
        deferred = []
        for inst in pending:
            deps = inst.helper_data
            if any(h not in readout_tick for h in deps):
                deferred.append(inst)
                continue
            t = max((readout_tick[h] + 1 for h in deps), default=0)
            parts = inst.participants
            while t < len(busy) and busy[t] & parts:
                t += 1
            while t >= len(busy):
                busy.append(set())
                ticks.append([])
            busy[t] |= parts
            ticks[t].append(inst)
            for q in inst.targets:
                readout_tick[q] = t
        if len(deferred) == len(pending):
            raise ScheduleError("cyclic helper dependencies between DRM instances")
        pending = deferred
    return Schedule(tuple(tuple(t) for t in ticks), dict(sorted(readout_tick.items())))


def resolve_conflicts(a: Assignment, order_seed: int = 0) -> Schedule:
    return pack_instances(a.instances(), order_seed)


def check_schedule(sched: Schedule, lat: LatticeSpec) -> None:
    """Raise if ticks overlap, helpers are reused too early or coverage is off."""
    seen: dict[int, int] = {}
    for t, tick in enumerate(sched.ticks):
        used: set[int] = set()
        for inst in tick:
            if used & inst.participants:
                raise ScheduleError(f"tick {t}: participant conflict at {inst.label()}")
            used |= inst.participants
            for q in inst.targets:
                if q in seen:
                    raise ScheduleError(f"data qubit {q} read out twice")
                seen[q] = t
    for t, tick in enumerate(sched.ticks):
        for inst in tick:
            for h in inst.helper_data:
                if seen.get(h, t) >= t:
                    raise ScheduleError(f"{inst.label()} resets {h} before its readout")
    if set(seen) != set(lat.data):
        raise ScheduleError("schedule does not cover every data qubit exactly once")
    if dict(seen) != dict(sched.wait):
        raise ScheduleError("wait map disagrees with tick placement")


def oracle_min(lat: LatticeSpec, p: DeviceProfile) -> float:
    """Exact minimum of the relaxed program via a 0/1 ILP over all instances.

    Every data qubit must be covered by exactly one chosen instance; the
    objective is the summed instance cost.  Independent of the per-unit
    decomposition used by :func:`select_local`.
    """
    return total_cost(oracle_assignment(lat, p), p)


def oracle_assignment(lat: LatticeSpec, p: DeviceProfile) -> Assignment:
    from scipy.optimize import Bounds, LinearConstraint, milp

    if lat.distance > 5:
        raise ValueError("lattice too large for the exact oracle (d <= 5)")
    cands: list[ModalityInstance] = []
    for q in lat.data:
        cands.extend(enumerate_modalities(lat, q))
    for pair in lat.groupable:
        cands.extend(enumerate_modalities(lat, pair))
    data = list(lat.data)
    row = {q: k for k, q in enumerate(data)}
    A = np.zeros((len(data), len(cands)))
    for j, inst in enumerate(cands):
        for q in inst.targets:
            A[row[q], j] = 1.0
    c = np.array([cost(i, p) for i in cands])
    res = milp(
        c,
        constraints=LinearConstraint(A, 1.0, 1.0),
        integrality=np.ones(len(cands)),
        bounds=Bounds(0, 1),
        options={"mip_rel_gap": 0.0},
    )
    if not res.success:
        raise ScheduleError(f"oracle ILP failed: {res.message}")
    chosen = [cands[j] for j in np.flatnonzero(res.x > 0.5)]
    by_unit: dict[Unit, list[ModalityInstance]] = {u: [] for u in readout_units(lat)}
    owner = {q: u for u in by_unit for q in u}
    for inst in chosen:
        by_unit[owner[inst.targets[0]]].append(inst)
    choice = {u: tuple(sorted(v, key=lambda i: i.targets)) for u, v in by_unit.items()}
    return Assignment(choice)
