"""Noisy Clifford circuits and their plain-text form.

One instruction per line::

    R 3
    H 12
    CX 0 9
    DEPOLARIZE2(0.002) 0 9
    FLIP_MEASURE(0.01) 9
    M 9
    TICK

``FLIP_MEASURE`` arms a classical flip of the next measurement of its qubit.
Every ``M``/``MR`` appends one record, numbered densely from 0.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterable, Optional

import numpy as np

GATES = ("R", "H", "CX", "M", "MR")
NOISE = ("DEPOLARIZE1", "DEPOLARIZE2", "FLIP_MEASURE")
ARITY = {"R": 1, "H": 1, "CX": 2, "M": 1, "MR": 1, "DEPOLARIZE1": 1, "DEPOLARIZE2": 2, "FLIP_MEASURE": 1}
MAX_NOISE_PROB = 0.75


@dataclass(frozen=True)
class Instruction:
    name: str
    targets: tuple[int, ...] = ()
    arg: Optional[float] = None

    def __post_init__(self):
        if self.name == "TICK":
            return
        if self.name not in ARITY:
            raise ValueError(f"unknown instruction {self.name!r}")
        if len(self.targets) != ARITY[self.name]:
            raise ValueError(f"{self.name} takes {ARITY[self.name]} target(s)")
        if self.name in NOISE:
            if self.arg is None or not 0.0 <= self.arg <= MAX_NOISE_PROB:
                raise ValueError(f"{self.name} probability out of range: {self.arg}")
        if self.name == "CX" and self.targets[0] == self.targets[1]:
            raise ValueError("CX control equals target")

    def __str__(self) -> str:
        head = self.name if self.arg is None else f"{self.name}({self.arg!r})"
        return " ".join([head, *map(str, self.targets)])


@dataclass
class Circuit:
    num_qubits: int
    ops: list[Instruction] = field(default_factory=list)

    def append(self, name: str, *targets: int, arg: Optional[float] = None) -> Optional[int]:
        """Append one instruction; returns the record index for measurements."""
        if name in NOISE and not arg:
            return None
        for t in targets:
            if not 0 <= t < self.num_qubits:
                raise ValueError(f"qubit {t} outside circuit of {self.num_qubits}")
        self.ops.append(Instruction(name, tuple(targets), arg))
        if name in ("M", "MR"):
            return self.num_records - 1
        return None

    def tick(self) -> None:
        if self.ops and self.ops[-1].name != "TICK":
            self.ops.append(Instruction("TICK"))

    @property
    def num_records(self) -> int:
        return sum(1 for op in self.ops if op.name in ("M", "MR"))

    @property
    def num_noise_ops(self) -> int:
        return sum(1 for op in self.ops if op.name in NOISE)

    def count(self, name: str) -> int:
        return sum(1 for op in self.ops if op.name == name)

    def without_noise(self) -> "Circuit":
        return Circuit(self.num_qubits, [op for op in self.ops if op.name not in NOISE])

    def to_text(self) -> str:
        lines = [f"# qubits {self.num_qubits}"]
        lines += [str(op) for op in self.ops]
        return "\n".join(lines) + "\n"


_LINE = re.compile(r"^([A-Z_0-9]+)(?:\(([^)]*)\))?((?:\s+\d+)*)\s*$")


def parse_circuit(text: str, num_qubits: Optional[int] = None) -> Circuit:
    ops = []
    declared = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        if raw.strip().startswith("# qubits"):
            declared = int(raw.split()[-1])
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        m = _LINE.match(line)
        if not m:
            raise ValueError(f"line {lineno}: cannot parse {raw!r}")
        name, arg, rest = m.groups()
        targets = tuple(int(t) for t in rest.split())
        ops.append(Instruction(name, targets, float(arg) if arg is not None else None))
    n = num_qubits or declared
    if n is None:
        n = 1 + max((t for op in ops for t in op.targets), default=-1)
    return Circuit(n, ops)


def iter_noise(ops: Iterable[Instruction]):
    k = 0
    for op in ops:
        if op.name in NOISE:
            yield k, op
            k += 1


OP_R, OP_H, OP_CX, OP_M, OP_MR, OP_DEP1, OP_DEP2, OP_FLIP = range(8)
_OPCODE = {
    "R": OP_R,
    "H": OP_H,
    "CX": OP_CX,
    "M": OP_M,
    "MR": OP_MR,
    "DEPOLARIZE1": OP_DEP1,
    "DEPOLARIZE2": OP_DEP2,
    "FLIP_MEASURE": OP_FLIP,
}
# number of non-identity outcomes per noise channel
NOISE_OUTCOMES = {OP_DEP1: 3, OP_DEP2: 15, OP_FLIP: 1}


@dataclass(frozen=True)
class CompiledCircuit:
    """Array form of a circuit for the simulators.

    ``slot`` numbers noise ops (for noise instructions) and collapse ops
    (``R``/``M``/``MR``) densely and separately; ``record`` is the output
    record index of ``M``/``MR`` and -1 elsewhere.
    """

    num_qubits: int
    code: np.ndarray
    a: np.ndarray
    b: np.ndarray
    prob: np.ndarray
    slot: np.ndarray
    record: np.ndarray
    num_records: int
    num_noise: int
    num_collapse: int


def compile_circuit(circuit: Circuit) -> CompiledCircuit:
    ops = [op for op in circuit.ops if op.name != "TICK"]
    n = len(ops)
    code = np.empty(n, dtype=np.int8)
    a = np.full(n, -1, dtype=np.int32)
    b = np.full(n, -1, dtype=np.int32)
    prob = np.zeros(n)
    slot = np.full(n, -1, dtype=np.int32)
    record = np.full(n, -1, dtype=np.int32)
    n_noise = n_coll = n_rec = 0
    for k, op in enumerate(ops):
        c = _OPCODE[op.name]
        code[k] = c
        a[k] = op.targets[0]
        if len(op.targets) > 1:
            b[k] = op.targets[1]
        if op.name in NOISE:
            prob[k] = op.arg
            slot[k] = n_noise
            n_noise += 1
        elif c in (OP_R, OP_M, OP_MR):
            slot[k] = n_coll
            n_coll += 1
            if c != OP_R:
                record[k] = n_rec
                n_rec += 1
    return CompiledCircuit(circuit.num_qubits, code, a, b, prob, slot, record, n_rec, n_noise, n_coll)
