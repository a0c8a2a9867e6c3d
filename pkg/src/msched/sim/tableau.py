"""Aaronson-Gottesman stabilizer tableau.

Rows ``0..n-1`` are destabilizers, ``n..2n-1`` stabilizers and row ``2n`` is
scratch space.  The kernels are compiled with numba; :class:`Tableau` wraps
them with a small Python API.
"""

from __future__ import annotations

from fractions import Fraction

import numpy as np
from numba import njit


@njit(cache=True)
def _rowsum(x, z, r, h, i):
    n = x.shape[1]
    s = 2 * np.int64(r[h]) + 2 * np.int64(r[i])
    for j in range(n):
        x1 = np.int64(x[i, j])
        z1 = np.int64(z[i, j])
        x2 = np.int64(x[h, j])
        z2 = np.int64(z[h, j])
        if x1 == 1 and z1 == 1:
            s += z2 - x2
        elif x1 == 1:
            s += z2 * (2 * x2 - 1)
        elif z1 == 1:
            s += x2 * (1 - 2 * z2)
        x[h, j] = x1 ^ x2
        z[h, j] = z1 ^ z2
    r[h] = 0 if s % 4 == 0 else 1


@njit(cache=True)
def _h(x, z, r, q):
    for i in range(x.shape[0]):
        r[i] ^= x[i, q] & z[i, q]
        t = x[i, q]
        x[i, q] = z[i, q]
        z[i, q] = t


@njit(cache=True)
def _s(x, z, r, q):
    for i in range(x.shape[0]):
        r[i] ^= x[i, q] & z[i, q]
        z[i, q] ^= x[i, q]


@njit(cache=True)
def _cx(x, z, r, c, t):
    for i in range(x.shape[0]):
        r[i] ^= x[i, c] & z[i, t] & (x[i, t] ^ z[i, c] ^ 1)
        x[i, t] ^= x[i, c]
        z[i, c] ^= z[i, t]


@njit(cache=True)
def _pauli(x, z, r, q, px, pz):
    for i in range(x.shape[0]):
        r[i] ^= (px & z[i, q]) ^ (pz & x[i, q])


@njit(cache=True)
def _measure(x, z, r, q, outcome_if_random, gx, gz):
    """Measure Z_q.  Returns (outcome, was_random).

    For a random measurement the outcome is ``outcome_if_random`` and the
    stabilizer that anticommuted with Z_q is copied into ``gx, gz``.
    """
    n = x.shape[1]
    p = -1
    for i in range(n, 2 * n):
        if x[i, q]:
            p = i
            break
    if p >= 0:
        for j in range(n):
            gx[j] = x[p, j]
            gz[j] = z[p, j]
        for i in range(2 * n):
            if i != p and x[i, q]:
                _rowsum(x, z, r, i, p)
        d = p - n
        for j in range(n):
            x[d, j] = x[p, j]
            z[d, j] = z[p, j]
            x[p, j] = 0
            z[p, j] = 0
        r[d] = r[p]
        z[p, q] = 1
        r[p] = outcome_if_random
        return outcome_if_random, True
    s = 2 * n
    for j in range(n):
        x[s, j] = 0
        z[s, j] = 0
    r[s] = 0
    for i in range(n):
        if x[i, q]:
            _rowsum(x, z, r, s, i + n)
    return r[s], False


@njit(cache=True)
def _expectation(x, z, r, px, pz):
    """<P> for Pauli P given by bit vectors: +1, -1, or 0 if random."""
    n = x.shape[1]
    for i in range(n, 2 * n):
        c = 0
        for j in range(n):
            c ^= (x[i, j] & pz[j]) ^ (z[i, j] & px[j])
        if c:
            return 0
    s = 2 * n
    for j in range(n):
        x[s, j] = 0
        z[s, j] = 0
    r[s] = 0
    for i in range(n):
        c = 0
        for j in range(n):
            c ^= (x[i, j] & pz[j]) ^ (z[i, j] & px[j])
        if c:
            _rowsum(x, z, r, s, i + n)
    # scratch row now holds +-P with Y encoded as x=z=1
    return -1 if r[s] else 1


class Tableau:
    """Stabilizer state on ``n`` qubits, initialised to |0...0>."""

    def __init__(self, n: int):
        self.n = n
        self.x = np.zeros((2 * n + 1, n), dtype=np.uint8)
        self.z = np.zeros((2 * n + 1, n), dtype=np.uint8)
        self.r = np.zeros(2 * n + 1, dtype=np.uint8)
        for i in range(n):
            self.x[i, i] = 1
            self.z[n + i, i] = 1
        self._gx = np.zeros(n, dtype=np.uint8)
        self._gz = np.zeros(n, dtype=np.uint8)

    def copy(self) -> "Tableau":
        t = Tableau.__new__(Tableau)
        t.n = self.n
        t.x, t.z, t.r = self.x.copy(), self.z.copy(), self.r.copy()
        t._gx = np.zeros(self.n, dtype=np.uint8)
        t._gz = np.zeros(self.n, dtype=np.uint8)
        return t

    def h(self, q: int) -> None:
        _h(self.x, self.z, self.r, q)

    def s(self, q: int) -> None:
        _s(self.x, self.z, self.r, q)

    def cx(self, c: int, t: int) -> None:
        _cx(self.x, self.z, self.r, c, t)

    def apply_pauli(self, q: int, px: int, pz: int) -> None:
        if px or pz:
            _pauli(self.x, self.z, self.r, q, px, pz)

    def x_gate(self, q: int) -> None:
        _pauli(self.x, self.z, self.r, q, 1, 0)

    def measure(self, q: int, outcome_if_random: int = 0) -> tuple[int, bool]:
        out, rnd = _measure(self.x, self.z, self.r, q, outcome_if_random, self._gx, self._gz)
        return int(out), bool(rnd)

    def last_flip_generator(self) -> tuple[np.ndarray, np.ndarray]:
        """Stabilizer that anticommuted with the last random measurement."""
        return self._gx.copy(), self._gz.copy()

    def reset(self, q: int, outcome_if_random: int = 0) -> tuple[int, bool]:
        out, rnd = self.measure(q, outcome_if_random)
        if out:
            self.x_gate(q)
        return out, rnd

    def expectation(self, xs: dict[int, int] | None = None, zs: dict[int, int] | None = None) -> int:
        """Expectation of the Pauli with X on ``xs`` and Z on ``zs`` (Y where both)."""
        px = np.zeros(self.n, dtype=np.uint8)
        pz = np.zeros(self.n, dtype=np.uint8)
        for q in xs or ():
            px[q] = 1
        for q in zs or ():
            pz[q] = 1
        return int(_expectation(self.x, self.z, self.r, px, pz))

    def z_expectation(self, qubits) -> int:
        return self.expectation(zs={q: 1 for q in qubits})


def random_clifford_state(t: Tableau, rng: np.random.Generator, qubits=None, depth: int = 0) -> None:
    """Scramble ``qubits`` with a random H/S/CX circuit."""
    qs = list(range(t.n)) if qubits is None else list(qubits)
    depth = depth or 4 * len(qs) + 4
    for _ in range(depth):
        k = rng.integers(4)
        a = qs[rng.integers(len(qs))]
        if k == 0:
            t.h(a)
        elif k == 1:
            t.s(a)
        elif len(qs) > 1:
            b = qs[rng.integers(len(qs) - 1)]
            if b == a:
                b = qs[-1]
            if k == 2:
                t.cx(a, b)
            else:
                t.cx(b, a)


def z_parity_distribution(t: Tableau, qubits) -> dict[int, Fraction]:
    """Exact outcome distribution of measuring the product of Z on ``qubits``."""
    e = t.z_expectation(qubits)
    if e == 0:
        return {0: Fraction(1, 2), 1: Fraction(1, 2)}
    return {0 if e == 1 else 1: Fraction(1)}


def fragment_distribution(t: Tableau, ops, measured: int) -> dict[int, Fraction]:
    """Exact distribution of the bit measured on ``measured`` after running ``ops``.

    ``ops`` is a sequence of ``(name, qubits)`` with names R, CX, M or MR.
    Every random collapse before the final measurement is branched on both
    outcomes, so the result is exact rather than sampled.  ``t`` is not
    modified.
    """
    dist: dict[int, Fraction] = {}

    def walk(state: Tableau, k: int, weight: Fraction):
        for j in range(k, len(ops)):
            name, qs = ops[j]
            if name == "CX":
                state.cx(*qs)
                continue
            q = qs[0]
            if name in ("M", "MR") and q == measured:
                for bit, pr in z_parity_distribution(state, [q]).items():
                    dist[bit] = dist.get(bit, Fraction(0)) + weight * pr
                return
            probe = state.copy()
            _, rnd = probe.measure(q, 0)
            if rnd:
                for bit in (0, 1):
                    branch = state.copy()
                    if name in ("R", "MR"):
                        branch.reset(q, bit)
                    else:
                        branch.measure(q, bit)
                    walk(branch, j + 1, weight / 2)
                return
            if name in ("R", "MR"):
                state.reset(q)
            else:
                state.measure(q)
        raise ValueError("fragment never measures the requested qubit")

    walk(t.copy(), 0, Fraction(1))
    return dist
