"""Rotated surface-code lattice ``L = (D, M, E)``.

Coordinates live on a doubled grid: data qubits sit at ``(2r+1, 2c+1)`` for
``r, c in 0..d-1`` and measure qubits at even/even points ``(2i, 2j)``.
Row 0 is the top of the patch.  Weight-2 X checks sit on the top and bottom
rows, weight-2 Z checks on the left and right columns, so a horizontal row of
data qubits carries a logical Z and the bottom row is used as ``logical_z``.

Qubit indices are dense: data qubits first (row-major), then measure qubits
(row-major).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Optional, Union

DATA = "data"
MEASURE_X = "measureX"
MEASURE_Z = "measureZ"

# CNOT slot order per check type.  The last two data qubits touched by an
# X check are a horizontal pair and those touched by a Z check are a vertical
# pair, so hook errors run perpendicular to the logical operator they could
# otherwise shorten.
_NW, _NE, _SW, _SE = (-1, -1), (-1, 1), (1, -1), (1, 1)
SLOT_ORDER = {"X": (_NW, _NE, _SW, _SE), "Z": (_NW, _SW, _NE, _SE)}


@dataclass(frozen=True)
class QubitId:
    index: int
    role: str
    coord: tuple[int, int]

    @property
    def is_data(self) -> bool:
        return self.role == DATA

    @property
    def pauli(self) -> Optional[str]:
        if self.role == MEASURE_X:
            return "X"
        if self.role == MEASURE_Z:
            return "Z"
        return None


@dataclass(frozen=True)
class StabilizerSupport:
    """One check: its measure qubit, data support and CNOT slot layout.

    ``slots`` has four entries in CNOT time order; ``None`` marks a slot a
    boundary check skips.
    """

    measure: int
    pauli: str
    slots: tuple[Optional[int], ...]

    @property
    def data_support(self) -> tuple[int, ...]:
        return tuple(q for q in self.slots if q is not None)

    @property
    def weight(self) -> int:
        return len(self.data_support)


@dataclass(frozen=True)
class LatticeSpec:
    distance: int
    qubits: tuple[QubitId, ...]
    edges: frozenset[tuple[int, int]]
    groupable: tuple[tuple[int, int], ...]
    logical_z: tuple[int, ...]
    supports: tuple[StabilizerSupport, ...]
    # Checks whose final parity is rebuilt from the Z-basis data readout.
    readout_check_type: str = "Z"
    # Type of the weight-2 boundary checks whose supports form groupable pairs.
    pair_check_type: str = "X"
    _adjacency: dict = field(default=None, compare=False, repr=False)
    _by_coord: dict = field(default=None, compare=False, repr=False)

    @property
    def num_qubits(self) -> int:
        return len(self.qubits)

    @property
    def data(self) -> tuple[int, ...]:
        return tuple(q.index for q in self.qubits if q.role == DATA)

    @property
    def measures(self) -> tuple[int, ...]:
        return tuple(q.index for q in self.qubits if q.role != DATA)

    def qubit(self, q: Union[int, QubitId]) -> QubitId:
        idx = q.index if isinstance(q, QubitId) else int(q)
        if not 0 <= idx < len(self.qubits):
            raise KeyError(f"unknown qubit {q!r}")
        return self.qubits[idx]

    def is_data(self, q: int) -> bool:
        return self.qubits[q].role == DATA

    def at(self, coord: tuple[int, int]) -> Optional[int]:
        return self._by_coord.get(tuple(coord))

    def data_at(self, row: int, col: int) -> int:
        """Data qubit in logical grid position (row, col)."""
        return self._by_coord[(2 * row + 1, 2 * col + 1)]

    def support_of(self, measure: int) -> StabilizerSupport:
        for s in self.supports:
            if s.measure == measure:
                return s
        raise KeyError(f"{measure} is not a measure qubit")

    def checks(self, pauli: str) -> tuple[StabilizerSupport, ...]:
        return tuple(s for s in self.supports if s.pauli == pauli)

    def has_edge(self, a: int, b: int) -> bool:
        return b in self._adjacency.get(a, ())

    def to_json(self) -> dict:
        return {
            "distance": self.distance,
            "readout_check_type": self.readout_check_type,
            "data": [
                {"index": q.index, "coord": list(q.coord)} for q in self.qubits if q.is_data
            ],
            "measures": [
                {"index": q.index, "coord": list(q.coord), "pauli": q.pauli}
                for q in self.qubits
                if not q.is_data
            ],
            "edges": [list(e) for e in sorted(self.edges)],
            "groupable": [list(p) for p in self.groupable],
            "logical_z": list(self.logical_z),
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2)


def _check_type(i: int, j: int) -> str:
    return "X" if (i + j) % 2 == 0 else "Z"


def build_lattice(d: int) -> LatticeSpec:
    if not isinstance(d, int) or isinstance(d, bool):
        raise TypeError("distance must be an integer")
    if d % 2 == 0 or not 3 <= d <= 15:
        raise ValueError(f"distance must be odd and in [3, 15], got {d}")

    qubits: list[QubitId] = []
    by_coord: dict[tuple[int, int], int] = {}
    for r in range(d):
        for c in range(d):
            coord = (2 * r + 1, 2 * c + 1)
            by_coord[coord] = len(qubits)
            qubits.append(QubitId(len(qubits), DATA, coord))

    # Bulk plaquettes plus the boundary checks of the matching type: X on the
    # top/bottom rows, Z on the left/right columns.
    placed: list[tuple[int, int, str]] = []
    for i in range(d + 1):
        for j in range(d + 1):
            kind = _check_type(i, j)
            on_tb = i in (0, d)
            on_lr = j in (0, d)
            if on_tb and on_lr:
                continue
            if on_tb and kind != "X":
                continue
            if on_lr and kind != "Z":
                continue
            placed.append((i, j, kind))
    for i, j, kind in placed:
        coord = (2 * i, 2 * j)
        by_coord[coord] = len(qubits)
        role = MEASURE_X if kind == "X" else MEASURE_Z
        qubits.append(QubitId(len(qubits), role, coord))

    supports = []
    edges = set()
    adjacency: dict[int, set[int]] = {q.index: set() for q in qubits}
    for q in qubits:
        if q.is_data:
            continue
        kind = q.pauli
        slots = []
        for dr, dc in SLOT_ORDER[kind]:
            nb = by_coord.get((q.coord[0] + dr, q.coord[1] + dc))
            slots.append(nb)
            if nb is not None:
                edges.add((nb, q.index))
                adjacency[nb].add(q.index)
                adjacency[q.index].add(nb)
        supports.append(StabilizerSupport(q.index, kind, tuple(slots)))

    adjacency_sorted = {
        k: tuple(sorted(v, key=lambda x: qubits[x].coord)) for k, v in adjacency.items()
    }

    bottom = d - 1
    logical_z = tuple(by_coord[(2 * bottom + 1, 2 * c + 1)] for c in range(d))

    groupable = []
    pair_type = "X"
    for s in supports:
        if s.pauli != pair_type or s.weight != 2:
            continue
        a, b = sorted(s.data_support)
        groupable.append((a, b))
    groupable.sort(key=lambda p: (qubits[p[0]].coord, qubits[p[1]].coord))

    return LatticeSpec(
        distance=d,
        qubits=tuple(qubits),
        edges=frozenset(edges),
        groupable=tuple(groupable),
        logical_z=logical_z,
        supports=tuple(supports),
        readout_check_type="Z",
        pair_check_type=pair_type,
        _adjacency=adjacency_sorted,
        _by_coord=by_coord,
    )


def stabilizer_supports(lat: LatticeSpec) -> list[StabilizerSupport]:
    return list(lat.supports)


def neighbors(lat: LatticeSpec, q: Union[int, QubitId]) -> list[int]:
    """Qubits sharing an edge with ``q``, in row-major coordinate order."""
    idx = lat.qubit(q).index
    return list(lat._adjacency[idx])


def shared_measure(lat: LatticeSpec, d1: Union[int, QubitId], d2: Union[int, QubitId]) -> Optional[int]:
    """Common measure neighbour of two data qubits.

    For a groupable pair this is the weight-2 boundary check holding exactly
    the pair; otherwise the lowest-index common neighbour, or ``None``.
    """
    a, b = lat.qubit(d1).index, lat.qubit(d2).index
    if not (lat.is_data(a) and lat.is_data(b)):
        raise ValueError("shared_measure expects two data qubits")
    common = set(lat._adjacency[a]) & set(lat._adjacency[b])
    if not common:
        return None
    if tuple(sorted((a, b))) in lat.groupable:
        for m in common:
            s = lat.support_of(m)
            if s.pauli == lat.pair_check_type and set(s.data_support) == {a, b}:
                return m
    return min(common)


def unit_key(qs: Iterable[int]) -> tuple[int, ...]:
    return tuple(sorted(qs))
