"""Weighted union-find decoder with peeling.

Clusters start at the defects and grow along their boundary edges.  Growth
is event driven: each step advances every active cluster by the smallest
amount that completes some edge, where an edge touched by two active
clusters fills at twice the rate.  A cluster stops when its defect count is
even or when it reaches the virtual boundary node.  Peeling a BFS spanning
forest of the fully grown edges (rooted at the boundary when it is in the
cluster) gives the correction; the prediction is the XOR of the observable
flags on the correction edges.
"""

from __future__ import annotations

import numpy as np
from numba import njit

from .detectors import DetectorGraph

_EPS = 1e-9


@njit(cache=True)
def _find(parent, v):
    root = v
    while parent[root] != root:
        root = parent[root]
    while parent[v] != root:
        nxt = parent[v]
        parent[v] = root
        v = nxt
    return root


@njit(cache=True)
def _decode_one(
    defects, n_nodes, boundary, adj_ptr, adj_edge, eu, ev, ew, eobs,
    parent, size, parity, has_bnd, nxt, tail, growth, full, stamp, touched_e,
    active, queue, par_edge, seen, defect_cur, clock,
):
    k_def = 0
    for v in range(n_nodes):
        parent[v] = v
        size[v] = 1
        parity[v] = defects[v]
        has_bnd[v] = 1 if v == boundary else 0
        nxt[v] = -1
        tail[v] = v
        seen[v] = 0
        defect_cur[v] = defects[v]
        k_def += defects[v]
    if k_def == 0:
        return 0
    ne = 0
    it = clock[0]
    while True:
        it += 1
        # active roots
        n_active = 0
        for v in range(n_nodes):
            if parent[v] == v and parity[v] == 1 and has_bnd[v] == 0:
                active[n_active] = v
                n_active += 1
        if n_active == 0:
            break
        # smallest time to complete an edge on an active boundary
        best = np.inf
        for a in range(n_active):
            v = active[a]
            while v != -1:
                for p in range(adj_ptr[v], adj_ptr[v + 1]):
                    e = adj_edge[p]
                    if full[e] or stamp[e] == it:
                        continue
                    stamp[e] = it
                    ru = _find(parent, eu[e])
                    rv = _find(parent, ev[e])
                    if ru == rv:
                        continue
                    rate = 0
                    if parity[ru] == 1 and has_bnd[ru] == 0:
                        rate += 1
                    if parity[rv] == 1 and has_bnd[rv] == 0:
                        rate += 1
                    t = (ew[e] - growth[e]) / rate
                    if t < best:
                        best = t
                v = nxt[v]
        # grow, collecting newly completed edges
        it += 1
        n_new = 0
        for a in range(n_active):
            v = active[a]
            while v != -1:
                for p in range(adj_ptr[v], adj_ptr[v + 1]):
                    e = adj_edge[p]
                    if full[e] or stamp[e] == it:
                        continue
                    stamp[e] = it
                    ru = _find(parent, eu[e])
                    rv = _find(parent, ev[e])
                    if ru == rv:
                        continue
                    rate = 0
                    if parity[ru] == 1 and has_bnd[ru] == 0:
                        rate += 1
                    if parity[rv] == 1 and has_bnd[rv] == 0:
                        rate += 1
                    if growth[e] == 0.0:
                        touched_e[ne] = e
                        ne += 1
                    growth[e] += best * rate
                    if growth[e] >= ew[e] - _EPS:
                        full[e] = 1
                        queue[n_new] = e
                        n_new += 1
                v = nxt[v]
        for k in range(n_new):
            e = queue[k]
            ru = _find(parent, eu[e])
            rv = _find(parent, ev[e])
            if ru == rv:
                continue
            if size[ru] < size[rv]:
                ru, rv = rv, ru
            parent[rv] = ru
            size[ru] += size[rv]
            parity[ru] ^= parity[rv]
            has_bnd[ru] |= has_bnd[rv]
            nxt[tail[ru]] = rv
            tail[ru] = tail[rv]
    clock[0] = it
    # peel: BFS forest over fully grown edges, boundary first
    obs = 0
    n_order = 0
    order = active  # reuse scratch
    for start_i in range(n_nodes + 1):
        if start_i == 0:
            s = boundary
        else:
            s = start_i - 1
            if s == boundary:
                continue
        if seen[s]:
            continue
        seen[s] = 1
        par_edge[s] = -1
        head = n_order
        order[n_order] = s
        n_order += 1
        while head < n_order:
            v = order[head]
            head += 1
            for p in range(adj_ptr[v], adj_ptr[v + 1]):
                e = adj_edge[p]
                if not full[e]:
                    continue
                w = ev[e] if eu[e] == v else eu[e]
                if seen[w]:
                    continue
                seen[w] = 1
                par_edge[w] = e
                order[n_order] = w
                n_order += 1
    for k in range(n_order - 1, -1, -1):
        v = order[k]
        e = par_edge[v]
        if defect_cur[v] and e >= 0:
            defect_cur[v] = 0
            w = ev[e] if eu[e] == v else eu[e]
            defect_cur[w] ^= 1
            obs ^= eobs[e]
    for k in range(ne):
        e = touched_e[k]
        growth[e] = 0.0
        full[e] = 0
    return obs


@njit(cache=True)
def _decode_batch(syn, n_nodes, boundary, adj_ptr, adj_edge, eu, ev, ew, eobs, out):
    n_edges = eu.shape[0]
    parent = np.empty(n_nodes, dtype=np.int64)
    size = np.empty(n_nodes, dtype=np.int64)
    parity = np.empty(n_nodes, dtype=np.uint8)
    has_bnd = np.empty(n_nodes, dtype=np.uint8)
    nxt = np.empty(n_nodes, dtype=np.int64)
    tail = np.empty(n_nodes, dtype=np.int64)
    growth = np.zeros(n_edges)
    full = np.zeros(n_edges, dtype=np.uint8)
    stamp = np.zeros(n_edges, dtype=np.int64)
    touched_e = np.empty(n_edges, dtype=np.int64)
    active = np.empty(n_nodes + 1, dtype=np.int64)
    queue = np.empty(n_edges, dtype=np.int64)
    par_edge = np.empty(n_nodes, dtype=np.int64)
    seen = np.empty(n_nodes, dtype=np.uint8)
    defect_cur = np.empty(n_nodes, dtype=np.uint8)
    defects = np.zeros(n_nodes, dtype=np.uint8)
    clock = np.zeros(1, dtype=np.int64)
    for s in range(syn.shape[0]):
        any_def = False
        for v in range(syn.shape[1]):
            defects[v] = syn[s, v]
            if defects[v]:
                any_def = True
        if not any_def:
            out[s] = 0
            continue
        out[s] = _decode_one(
            defects, n_nodes, boundary, adj_ptr, adj_edge, eu, ev, ew, eobs,
            parent, size, parity, has_bnd, nxt, tail, growth, full, stamp, touched_e,
            active, queue, par_edge, seen, defect_cur, clock,
        )


class UnionFindDecoder:
    """Decoder bound to one detector graph; reusable across batches."""

    def __init__(self, graph: DetectorGraph):
        self.graph = graph
        self.n_nodes = graph.num_detectors + 1
        self.boundary = graph.boundary
        eu = graph.edge_u.astype(np.int64)
        ev = graph.edge_v.astype(np.int64)
        w = graph.edge_weight.astype(float)
        self.weights = w / w.min() if len(w) else w
        ends = np.concatenate([eu, ev])
        ids = np.concatenate([np.arange(len(eu)), np.arange(len(eu))])
        order = np.argsort(ends, kind="stable")
        self.adj_edge = ids[order].astype(np.int64)
        self.adj_ptr = np.zeros(self.n_nodes + 1, dtype=np.int64)
        np.add.at(self.adj_ptr, ends + 1, 1)
        self.adj_ptr = np.cumsum(self.adj_ptr)
        self.eu, self.ev = eu, ev
        self.eobs = graph.edge_obs.astype(np.uint8)

    def decode_batch(self, syndromes: np.ndarray) -> np.ndarray:
        """Predicted observable flips for ``(shots, num_detectors)`` syndromes."""
        syn = np.ascontiguousarray(syndromes, dtype=np.uint8)
        if syn.ndim != 2 or syn.shape[1] != self.graph.num_detectors:
            raise ValueError("syndrome width does not match the detector graph")
        full = np.zeros((syn.shape[0], self.n_nodes), dtype=np.uint8)
        full[:, : syn.shape[1]] = syn
        out = np.zeros(syn.shape[0], dtype=np.uint8)
        _decode_batch(
            full, self.n_nodes, self.boundary, self.adj_ptr, self.adj_edge,
            self.eu, self.ev, self.weights, self.eobs, out,
        )
        return out.astype(bool)

    def decode(self, syndrome) -> int:
        return int(self.decode_batch(np.asarray(syndrome, dtype=np.uint8)[None, :])[0])


def decode_union_find(g: DetectorGraph, syndrome) -> int:
    """Predicted observable flip (0 or 1) for one syndrome vector."""
    return UnionFindDecoder(g).decode(syndrome)
