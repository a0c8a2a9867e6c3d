"""Measurement-transfer modalities: the schedulable readout units.

Each modality resolves the Z readout of one data qubit (DM, MRM, DRM) or the
Z-parity of a groupable pair (MRPM, DRPM) by measuring some, possibly
different, physical qubit after a short CNOT fragment.  Helper qubits are
reset at the start of a fragment, so the measure-reset step of the transfer
is never needed.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence, Union

from .lattice import LatticeSpec, neighbors, shared_measure, unit_key
from .noise import DeviceProfile


class ModalityKind(str, enum.Enum):
    DM = "DM"
    DRM = "DRM"
    MRM = "MRM"
    DRPM = "DRPM"
    MRPM = "MRPM"

    @property
    def is_parity(self) -> bool:
        return self in (ModalityKind.DRPM, ModalityKind.MRPM)


_GATES = {
    ModalityKind.DM: 0,
    ModalityKind.MRM: 1,
    ModalityKind.DRM: 4,
    ModalityKind.MRPM: 2,
    ModalityKind.DRPM: 3,
}


def gate_count(kind: Union[ModalityKind, str]) -> int:
    return _GATES[ModalityKind(kind)]


@dataclass(frozen=True, order=True)
class ModalityInstance:
    """One concrete modality.

    ``targets`` are the data qubits whose readout this resolves (sorted),
    ``measured`` is the qubit physically measured, and ``helpers`` the other
    participants in the order the fragment uses them (``(m,)`` or
    ``(m, d2)`` for DRM).
    """

    kind: ModalityKind
    targets: tuple[int, ...]
    measured: int
    helpers: tuple[int, ...] = ()

    def __post_init__(self):
        n = 2 if self.kind.is_parity else 1
        if len(self.targets) != n:
            raise ValueError(f"{self.kind.value} needs {n} target(s), got {self.targets}")

    @property
    def participants(self) -> frozenset[int]:
        return frozenset(self.targets) | frozenset(self.helpers) | {self.measured}

    @property
    def gate_count(self) -> int:
        return _GATES[self.kind]

    @property
    def unit(self) -> tuple[int, ...]:
        return self.targets

    @property
    def helper_data(self) -> tuple[int, ...]:
        """Non-target data qubits the fragment resets (must be read out earlier)."""
        if self.kind is ModalityKind.DRM:
            return (self.helpers[1],)
        return ()

    def cnot_pairs(self) -> tuple[tuple[int, int], ...]:
        return tuple((a, b) for name, qs in _fragment_ops(self) if name == "CX" for a, b in [qs])

    def label(self) -> str:
        t = "+".join(str(q) for q in self.targets)
        h = ",".join(str(q) for q in self.helpers)
        return f"{self.kind.value}[{t}->{self.measured}|{h}]"

    def to_json(self) -> dict:
        return {
            "kind": self.kind.value,
            "targets": list(self.targets),
            "measured": self.measured,
            "helpers": list(self.helpers),
        }

    @classmethod
    def from_json(cls, raw: dict) -> "ModalityInstance":
        return cls(
            ModalityKind(raw["kind"]),
            tuple(raw["targets"]),
            int(raw["measured"]),
            tuple(raw.get("helpers", ())),
        )


@dataclass(frozen=True)
class CircuitFragment:
    """Reset/CNOT/measure instructions for one modality.

    ``classical_map`` is ``"identity"`` (the measured bit is the target's Z
    value) or ``"pair_parity"`` (it is the XOR of the two targets).
    """

    ops: tuple[tuple[str, tuple[int, ...]], ...]
    measured: int
    classical_map: str = "identity"

    @property
    def cnot_count(self) -> int:
        return sum(1 for name, _ in self.ops if name == "CX")

    def to_text(self) -> str:
        return "\n".join(f"{name} {' '.join(str(q) for q in qs)}" for name, qs in self.ops) + "\n"


def parse_fragment(text: str, classical_map: str = "identity") -> CircuitFragment:
    ops = []
    measured = None
    for line in text.splitlines():
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        name, *args = line.split()
        if name not in ("R", "CX", "M", "MR"):
            raise ValueError(f"unknown fragment instruction {name!r}")
        qs = tuple(int(a) for a in args)
        if name == "CX" and len(qs) != 2:
            raise ValueError("CX takes exactly two qubits")
        if name != "CX" and len(qs) != 1:
            raise ValueError(f"{name} takes exactly one qubit")
        if name in ("M", "MR"):
            if measured is not None:
                raise ValueError("fragment has more than one measurement")
            measured = qs[0]
        ops.append((name, qs))
    if measured is None:
        raise ValueError("fragment has no measurement")
    return CircuitFragment(tuple(ops), measured, classical_map)


def parity_chain(
    qubits: Sequence[int], sink: int, lat: Optional[LatticeSpec] = None
) -> CircuitFragment:
    """CNOT chain folding the Z-parity of ``qubits`` into ``sink``, then measure it.

    ``qubits`` is a routing path; each CNOT joins consecutive entries, flowing
    from both ends toward ``sink``.  With ``lat`` given, every hop must be a
    lattice edge.
    """
    qubits = list(qubits)
    if len(qubits) < 2:
        raise ValueError("parity chain needs at least two qubits")
    if len(set(qubits)) != len(qubits):
        raise ValueError("parity chain qubits must be distinct")
    if sink not in qubits:
        raise ValueError("sink must be one of the chain qubits")
    if lat is not None:
        for a, b in zip(qubits, qubits[1:]):
            if not lat.has_edge(a, b):
                raise ValueError(f"disconnected routing: no edge {a}-{b}")
    k = qubits.index(sink)
    ops = []
    for i in range(len(qubits) - 1, k, -1):
        ops.append(("CX", (qubits[i], qubits[i - 1])))
    for i in range(0, k):
        ops.append(("CX", (qubits[i], qubits[i + 1])))
    ops.append(("M", (sink,)))
    return CircuitFragment(tuple(ops), sink, "pair_parity" if len(qubits) == 2 else "parity")


def _fragment_ops(inst: ModalityInstance) -> list[tuple[str, tuple[int, ...]]]:
    kind = inst.kind
    if kind is ModalityKind.DM:
        (d,) = inst.targets
        return [("M", (d,))]
    if kind is ModalityKind.MRM:
        (d,) = inst.targets
        (m,) = inst.helpers
        return [("R", (m,)), ("CX", (d, m)), ("M", (m,))]
    if kind is ModalityKind.DRM:
        (d,) = inst.targets
        m, d2 = inst.helpers
        # copy d onto d2 through m, uncompute m, then close the m->d2 leg
        return [
            ("R", (m,)),
            ("R", (d2,)),
            ("CX", (d, m)),
            ("CX", (m, d2)),
            ("CX", (d, m)),
            ("CX", (m, d2)),
            ("M", (d2,)),
        ]
    if kind is ModalityKind.MRPM:
        d1, d2 = inst.targets
        (m,) = inst.helpers
        return [("R", (m,)), ("CX", (d1, m)), ("CX", (d2, m)), ("M", (m,))]
    if kind is ModalityKind.DRPM:
        (m,) = inst.helpers
        sink = inst.measured
        (other,) = [q for q in inst.targets if q != sink]
        return [
            ("R", (m,)),
            ("CX", (other, m)),
            ("CX", (m, sink)),
            ("CX", (other, m)),
            ("M", (sink,)),
        ]
    raise ValueError(f"unknown modality {kind}")


def build_fragment(inst: ModalityInstance, lat: Optional[LatticeSpec] = None) -> CircuitFragment:
    ops = _fragment_ops(inst)
    if lat is not None:
        for name, qs in ops:
            if name == "CX" and not lat.has_edge(*qs):
                raise ValueError(f"{inst.label()}: CNOT {qs} is not a lattice edge")
    frag = CircuitFragment(
        tuple(ops), inst.measured, "pair_parity" if inst.kind.is_parity else "identity"
    )
    assert frag.cnot_count == inst.gate_count
    return frag


def enumerate_modalities(
    lat: LatticeSpec, target: Union[int, Iterable[int]]
) -> list[ModalityInstance]:
    """All legal instances for one data qubit, or the joint ones for a groupable pair."""
    if isinstance(target, int):
        q = target
        if not lat.is_data(q):
            raise ValueError(f"{q} is not a data qubit")
        out = [ModalityInstance(ModalityKind.DM, (q,), q)]
        for m in neighbors(lat, q):
            out.append(ModalityInstance(ModalityKind.MRM, (q,), m, (m,)))
        for m in neighbors(lat, q):
            for d2 in neighbors(lat, m):
                if d2 != q:
                    out.append(ModalityInstance(ModalityKind.DRM, (q,), d2, (m, d2)))
        return out

    pair = unit_key(target)
    if len(pair) != 2 or pair not in lat.groupable:
        raise ValueError(f"pair {pair} is not groupable")
    m = shared_measure(lat, *pair)
    d1, d2 = pair
    return [
        ModalityInstance(ModalityKind.MRPM, pair, m, (m,)),
        ModalityInstance(ModalityKind.DRPM, pair, d1, (m,)),
        ModalityInstance(ModalityKind.DRPM, pair, d2, (m,)),
    ]


def _gate_term(inst: ModalityInstance, p: DeviceProfile) -> float:
    if p.ger_overrides:
        return sum(p.gate_error(a, b) for a, b in inst.cnot_pairs())
    return inst.gate_count * p.ger


def cost_ind(inst: ModalityInstance, p: DeviceProfile) -> float:
    if inst.kind.is_parity:
        raise ValueError(f"{inst.kind.value} is a parity modality; use cost_joint")
    return p.mer[inst.measured] + _gate_term(inst, p)


def cost_joint(inst: ModalityInstance, p: DeviceProfile) -> float:
    """Joint cost of a parity instance.

    A DRPM instance is charged the MER of the member it actually measures;
    the pair-level DRPM cost, ``min`` over both members, is the cheaper of the
    two DRPM instances.
    """
    if not inst.kind.is_parity:
        raise ValueError(f"{inst.kind.value} is a single-qubit modality; use cost_ind")
    return p.mer[inst.measured] + _gate_term(inst, p)


def cost(inst: ModalityInstance, p: DeviceProfile) -> float:
    return cost_joint(inst, p) if inst.kind.is_parity else cost_ind(inst, p)


def rank_key(inst: ModalityInstance, p: DeviceProfile) -> tuple:
    """Sort key for argmin: cost, then fewer gates, then lower measured index."""
    return (cost(inst, p), inst.gate_count, inst.measured, inst.kind.value, inst.helpers)
