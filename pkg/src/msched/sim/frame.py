"""Pauli-frame sampling against a noiseless reference run.

The reference is one noiseless tableau run where every random collapse
resolves to 0.  A shot is then described by a Pauli frame (bool arrays of
shape ``(num_qubits, shots)``) that is pushed through the Clifford gates.
At a collapse that was random in the reference, the frame is multiplied by
the stabilizer that anticommuted with the measured ``Z`` wherever the shot's
coin disagrees with what the frame would give; that picks the coin's branch
without touching the physical state.  The same coins drive
:func:`run_tableau_shots`, so both simulators agree bit for bit.

Noise codes: ``DEPOLARIZE1`` uses 1..3 for X, Y, Z; ``DEPOLARIZE2`` uses
1..15 with ``code >> 2`` on the first qubit and ``code & 3`` on the second
(0=I, 1=X, 2=Y, 3=Z); ``FLIP_MEASURE`` uses 1.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Optional

import numpy as np
from numba import njit

from .circuit import (
    NOISE_OUTCOMES,
    OP_CX,
    OP_DEP1,
    OP_DEP2,
    OP_FLIP,
    OP_H,
    OP_M,
    OP_MR,
    OP_R,
    Circuit,
    CompiledCircuit,
    compile_circuit,
)
from .tableau import Tableau, _cx, _h, _measure, _pauli

BLOCK_SHOTS = 8192


@dataclass(frozen=True)
class Reference:
    record_bits: np.ndarray
    collapse_bits: np.ndarray
    random: np.ndarray
    gen_x: tuple
    gen_z: tuple


def reference_run(cc: CompiledCircuit) -> Reference:
    t = Tableau(cc.num_qubits)
    rec = np.zeros(cc.num_records, dtype=np.uint8)
    coll = np.zeros(cc.num_collapse, dtype=np.uint8)
    rnd = np.zeros(cc.num_collapse, dtype=bool)
    gx: list = [None] * cc.num_collapse
    gz: list = [None] * cc.num_collapse
    for k in range(len(cc.code)):
        c, q = cc.code[k], cc.a[k]
        if c == OP_H:
            t.h(q)
        elif c == OP_CX:
            t.cx(q, cc.b[k])
        elif c in (OP_R, OP_M, OP_MR):
            s = cc.slot[k]
            out, random = t.measure(q, 0)
            coll[s] = out
            rnd[s] = random
            if random:
                x, z = t.last_flip_generator()
                gx[s] = np.flatnonzero(x)
                gz[s] = np.flatnonzero(z)
            if c != OP_R:
                rec[cc.record[k]] = out
            if c != OP_M and out:
                t.x_gate(q)
    return Reference(rec, coll, rnd, tuple(gx), tuple(gz))


@dataclass
class FaultTable:
    """Dense per-shot fault codes and collapse coins shared by both simulators."""

    codes: np.ndarray  # (num_noise, shots) uint8
    coins: np.ndarray  # (num_collapse, shots) uint8

    @property
    def shots(self) -> int:
        return self.codes.shape[1] if self.codes.size else self.coins.shape[1]

    @classmethod
    def sample(cls, cc: CompiledCircuit, shots: int, seed: int) -> "FaultTable":
        rng = np.random.default_rng(seed)
        codes = np.zeros((cc.num_noise, shots), dtype=np.uint8)
        for k in np.flatnonzero(cc.slot >= 0):
            c = cc.code[k]
            if c in NOISE_OUTCOMES:
                hit = rng.random(shots) < cc.prob[k]
                vals = rng.integers(1, NOISE_OUTCOMES[c] + 1, size=shots)
                codes[cc.slot[k]] = np.where(hit, vals, 0)
        coins = rng.integers(0, 2, size=(cc.num_collapse, shots), dtype=np.uint8)
        return cls(codes, coins)


def bernoulli_positions(rng: np.random.Generator, n: int, p: float) -> np.ndarray:
    """Sorted indices in ``range(n)`` each included independently with prob ``p``."""
    if p <= 0 or n == 0:
        return np.empty(0, dtype=np.int64)
    if p >= 0.2:
        return np.flatnonzero(rng.random(n) < p)
    out = []
    pos = -1
    expect = n * p
    while True:
        size = int(expect + 4 * np.sqrt(expect) + 16)
        gaps = rng.geometric(p, size=size)
        steps = pos + np.cumsum(gaps)
        keep = steps[steps < n]
        out.append(keep)
        if len(keep) < size:
            break
        pos = int(steps[-1])
        expect = (n - pos) * p
    return np.concatenate(out)


class _SampledNoise:
    def __init__(self, rng: np.random.Generator):
        self.rng = rng

    def faults(self, slot: int, p: float, k: int, shots: int):
        idx = bernoulli_positions(self.rng, shots, p)
        if k == 1:
            return idx, np.ones(len(idx), dtype=np.uint8)
        return idx, self.rng.integers(1, k + 1, size=len(idx)).astype(np.uint8)

    def coins(self, slot: int, shots: int) -> np.ndarray:
        return self.rng.integers(0, 2, size=shots, dtype=np.uint8).astype(bool)


class _TableNoise:
    def __init__(self, table: FaultTable):
        self.table = table

    def faults(self, slot: int, p: float, k: int, shots: int):
        row = self.table.codes[slot]
        idx = np.flatnonzero(row)
        return idx, row[idx]

    def coins(self, slot: int, shots: int) -> np.ndarray:
        return self.table.coins[slot].astype(bool)


class _InjectedNoise:
    """Exactly one fault per shot; coins fixed to 0."""

    def __init__(self, where: dict):
        self.where = where

    def faults(self, slot: int, p: float, k: int, shots: int):
        got = self.where.get(slot)
        if got is None:
            return np.empty(0, dtype=np.int64), np.empty(0, dtype=np.uint8)
        return got

    def coins(self, slot: int, shots: int) -> np.ndarray:
        return np.zeros(shots, dtype=bool)


_PX = np.array([0, 1, 1, 0], dtype=bool)
_PZ = np.array([0, 0, 1, 1], dtype=bool)


def _frame_run(cc: CompiledCircuit, ref: Reference, shots: int, noise) -> np.ndarray:
    n = cc.num_qubits
    x = np.zeros((n, shots), dtype=bool)
    z = np.zeros((n, shots), dtype=bool)
    pending = np.zeros((n, shots), dtype=bool)
    out = np.zeros((cc.num_records, shots), dtype=bool)
    code, a, b, slot, record, prob = cc.code, cc.a, cc.b, cc.slot, cc.record, cc.prob
    for k in range(len(code)):
        c = code[k]
        q = a[k]
        if c == OP_CX:
            t = b[k]
            x[t] ^= x[q]
            z[q] ^= z[t]
        elif c == OP_H:
            tmp = x[q].copy()
            x[q] = z[q]
            z[q] = tmp
        elif c == OP_DEP1:
            idx, vals = noise.faults(slot[k], prob[k], 3, shots)
            if len(idx):
                x[q, idx] ^= _PX[vals]
                z[q, idx] ^= _PZ[vals]
        elif c == OP_DEP2:
            idx, vals = noise.faults(slot[k], prob[k], 15, shots)
            if len(idx):
                t = b[k]
                v1, v2 = vals >> 2, vals & 3
                x[q, idx] ^= _PX[v1]
                z[q, idx] ^= _PZ[v1]
                x[t, idx] ^= _PX[v2]
                z[t, idx] ^= _PZ[v2]
        elif c == OP_FLIP:
            idx, _ = noise.faults(slot[k], prob[k], 1, shots)
            if len(idx):
                pending[q, idx] ^= True
        else:
            s = slot[k]
            if ref.random[s]:
                coin = noise.coins(s, shots)
                flip = np.flatnonzero(coin ^ bool(ref.collapse_bits[s]) ^ x[q])
                if len(flip):
                    for g in ref.gen_x[s]:
                        x[g, flip] ^= True
                    for g in ref.gen_z[s]:
                        z[g, flip] ^= True
            if c != OP_R:
                out[record[k]] = x[q] ^ pending[q] ^ bool(ref.record_bits[record[k]])
                pending[q] = False
            if c != OP_M:
                x[q] = False
                z[q] = False
    return out


class FrameSimulator:
    """Reusable sampler for one circuit (the reference run is done once)."""

    def __init__(self, circuit: Circuit):
        self.circuit = circuit
        self.compiled = compile_circuit(circuit)
        self.reference = reference_run(self.compiled)

    def sample_block(self, shots: int, rng: np.random.Generator) -> np.ndarray:
        """Record bits of shape ``(num_records, shots)``."""
        return _frame_run(self.compiled, self.reference, shots, _SampledNoise(rng))

    def run_table(self, table: FaultTable) -> np.ndarray:
        return _frame_run(self.compiled, self.reference, table.shots, _TableNoise(table))

    def run_injected(self, where: dict, shots: int) -> np.ndarray:
        return _frame_run(self.compiled, self.reference, shots, _InjectedNoise(where))

    def blocks(self, shots: int, seed: int, block: int = BLOCK_SHOTS) -> Iterator[np.ndarray]:
        """Blocks of record bits; block ``i`` draws from its own seed ``(seed, i)``."""
        done, i = 0, 0
        while done < shots:
            n = min(block, shots - done)
            rng = np.random.default_rng(np.random.SeedSequence([seed, i]))
            yield self.sample_block(n, rng)
            done += n
            i += 1


@dataclass(frozen=True)
class ShotRecord:
    bits: np.ndarray
    shot: int


def simulate(circuit: Circuit, shots: int, seed: int) -> Iterator[ShotRecord]:
    """Stream i.i.d. shots of a noisy circuit; deterministic for a fixed seed."""
    if shots < 1:
        raise ValueError("shots must be at least 1")
    sim = FrameSimulator(circuit)
    k = 0
    for blk in sim.blocks(shots, seed):
        for col in blk.T:
            yield ShotRecord(col.astype(np.uint8), k)
            k += 1


def sample_records(circuit: Circuit, shots: int, seed: int) -> np.ndarray:
    """All record bits as a ``(shots, num_records)`` uint8 array."""
    sim = FrameSimulator(circuit)
    return np.concatenate([b.T for b in sim.blocks(shots, seed)]).astype(np.uint8)


def pack_records(bits: np.ndarray) -> np.ndarray:
    """Pack ``(shots, num_records)`` bits into little-endian byte rows."""
    return np.packbits(np.asarray(bits, dtype=np.uint8), axis=1, bitorder="little")


@njit(cache=True)
def _tableau_shots(n, code, a, b, slot, record, num_records, codes, coins, out):
    shots = codes.shape[1] if codes.shape[0] > 0 else coins.shape[1]
    gx = np.zeros(n, dtype=np.uint8)
    gz = np.zeros(n, dtype=np.uint8)
    for s in range(shots):
        x = np.zeros((2 * n + 1, n), dtype=np.uint8)
        z = np.zeros((2 * n + 1, n), dtype=np.uint8)
        r = np.zeros(2 * n + 1, dtype=np.uint8)
        for i in range(n):
            x[i, i] = 1
            z[n + i, i] = 1
        pending = np.zeros(n, dtype=np.uint8)
        for k in range(code.shape[0]):
            c = code[k]
            q = a[k]
            if c == 2:
                _cx(x, z, r, q, b[k])
            elif c == 1:
                _h(x, z, r, q)
            elif c == 5 or c == 6:
                v = codes[slot[k], s]
                if v:
                    if c == 5:
                        v1 = v
                    else:
                        v1 = v >> 2
                        v2 = v & 3
                        if v2:
                            _pauli(x, z, r, b[k], 1 if v2 <= 2 else 0, 1 if v2 >= 2 else 0)
                    if v1:
                        _pauli(x, z, r, q, 1 if v1 <= 2 else 0, 1 if v1 >= 2 else 0)
            elif c == 7:
                if codes[slot[k], s]:
                    pending[q] ^= 1
            else:
                o, _ = _measure(x, z, r, q, coins[slot[k], s], gx, gz)
                if c != 0:
                    out[record[k], s] = o ^ pending[q]
                    pending[q] = 0
                if c != 3 and o:
                    _pauli(x, z, r, q, 1, 0)


def run_tableau_shots(circuit: Circuit, table: FaultTable) -> np.ndarray:
    """Per-shot full tableau simulation driven by ``table``; ``(num_records, shots)``."""
    cc = compile_circuit(circuit)
    out = np.zeros((cc.num_records, table.shots), dtype=np.uint8)
    codes = np.ascontiguousarray(table.codes, dtype=np.uint8)
    coins = np.ascontiguousarray(table.coins, dtype=np.uint8)
    if codes.shape[0] == 0:
        codes = np.zeros((1, table.shots), dtype=np.uint8)
    _tableau_shots(
        cc.num_qubits, cc.code, cc.a, cc.b, cc.slot, cc.record, cc.num_records, codes, coins, out
    )
    return out.astype(bool)
