from fractions import Fraction

import numpy as np
import pytest

from msched.lattice import build_lattice, neighbors, shared_measure
from msched.modalities import (
    ModalityInstance,
    ModalityKind,
    build_fragment,
    cost,
    cost_ind,
    cost_joint,
    enumerate_modalities,
    gate_count,
    parity_chain,
    parse_fragment,
)
from msched.noise import DeviceProfile
from msched.sim.tableau import (
    Tableau,
    fragment_distribution,
    random_clifford_state,
    z_parity_distribution,
)

EXPECTED_GATES = {"DM": 0, "MRM": 1, "MRPM": 2, "DRPM": 3, "DRM": 4}


def all_instances(lat):
    out = []
    for q in lat.data:
        out += enumerate_modalities(lat, q)
    for pair in lat.groupable:
        out += enumerate_modalities(lat, pair)
    return out


def local_check(inst, lat, rng, states, bystanders=1):
    """Compare the fragment against direct measurement on random local states.

    The register holds the participants plus ``bystanders`` qubits outside
    the fragment, all scrambled together so targets are entangled with both
    helpers and bystanders.  Returns the number of mismatches.
    """
    frag = build_fragment(inst, lat)
    parts = sorted(inst.participants)
    extra = [q for q in lat.data if q not in inst.participants][:bystanders]
    local = {q: i for i, q in enumerate(parts + extra)}
    ops = [(name, tuple(local[q] for q in qs)) for name, qs in frag.ops]
    targets = [local[q] for q in inst.targets]
    by = [local[q] for q in extra]
    bad = 0
    for _ in range(states):
        t = Tableau(len(local))
        random_clifford_state(t, rng)
        want = z_parity_distribution(t, targets)
        got = fragment_distribution(t, ops, local[frag.measured])
        if got != want:
            bad += 1
        for b in by:
            # bystander Z marginal, averaged over every collapse branch, is untouched
            after = fragment_distribution(t, ops + [("M", (b,))], b)
            if after != z_parity_distribution(t, [b]):
                bad += 1
    return bad


@pytest.mark.parametrize("kind, n", EXPECTED_GATES.items())
def test_gate_count_table(kind, n):
    assert gate_count(kind) == n
    assert gate_count(ModalityKind(kind)) == n


@pytest.mark.parametrize("d", [3, 5])
def test_fragment_structure(d):
    lat = build_lattice(d)
    for inst in all_instances(lat):
        frag = build_fragment(inst, lat)
        assert frag.cnot_count == EXPECTED_GATES[inst.kind.value]
        assert sum(1 for n, _ in frag.ops if n in ("M", "MR")) == 1
        assert set(inst.targets) <= inst.participants
        assert inst.measured in inst.participants
        resets = [qs[0] for n, qs in frag.ops if n == "R"]
        assert set(resets) == inst.participants - set(inst.targets) - (
            {inst.measured} if inst.kind is ModalityKind.DRPM else set()
        )
        # resets come first
        first_other = next(i for i, (n, _) in enumerate(frag.ops) if n != "R")
        assert all(n != "R" for n, _ in frag.ops[first_other:])
        assert frag.classical_map == ("pair_parity" if inst.kind.is_parity else "identity")


def test_fragment_examples():
    lat = build_lattice(3)
    d = lat.data_at(1, 1)
    m = neighbors(lat, d)[0]
    mrm = build_fragment(ModalityInstance(ModalityKind.MRM, (d,), m, (m,)), lat)
    assert mrm.ops == (("R", (m,)), ("CX", (d, m)), ("M", (m,)))
    d1, d2 = lat.groupable[0]
    s = shared_measure(lat, d1, d2)
    mrpm = build_fragment(ModalityInstance(ModalityKind.MRPM, (d1, d2), s, (s,)), lat)
    assert mrpm.ops == (("R", (s,)), ("CX", (d1, s)), ("CX", (d2, s)), ("M", (s,)))
    dm = build_fragment(ModalityInstance(ModalityKind.DM, (d,), d), lat)
    assert dm.ops == (("M", (d,)),)


def test_fragment_rejects_non_edge():
    lat = build_lattice(3)
    far = lat.measures[-1]
    inst = ModalityInstance(ModalityKind.MRM, (lat.data_at(0, 0),), far, (far,))
    with pytest.raises(ValueError, match="not a lattice edge"):
        build_fragment(inst, lat)


def test_fragment_text_round_trip():
    lat = build_lattice(3)
    for inst in all_instances(lat):
        frag = build_fragment(inst, lat)
        again = parse_fragment(frag.to_text(), frag.classical_map)
        assert again == frag


@pytest.mark.parametrize("text", ["FOO 1\nM 0", "CX 1\nM 0", "R 1\n", "M 1\nM 2"])
def test_parse_fragment_errors(text):
    with pytest.raises(ValueError):
        parse_fragment(text)


def test_enumeration_counts():
    lat = build_lattice(5)
    q = lat.data_at(2, 2)
    insts = enumerate_modalities(lat, q)
    kinds = [i.kind for i in insts]
    assert kinds.count(ModalityKind.DM) == 1
    assert kinds.count(ModalityKind.MRM) == 4
    assert kinds.count(ModalityKind.DRM) == sum(len(neighbors(lat, m)) - 1 for m in neighbors(lat, q))
    lat3 = build_lattice(3)
    corner = lat3.data_at(0, 0)
    kinds = [i.kind for i in enumerate_modalities(lat3, corner)]
    assert kinds.count(ModalityKind.MRM) == 2
    assert kinds.count(ModalityKind.DRM) == 1 + 3
    pair = lat3.groupable[0]
    kinds = [i.kind for i in enumerate_modalities(lat3, pair)]
    assert kinds.count(ModalityKind.MRPM) == 1 and kinds.count(ModalityKind.DRPM) == 2
    with pytest.raises(ValueError, match="not groupable"):
        enumerate_modalities(lat3, (lat3.data_at(1, 0), lat3.data_at(1, 1)))


def test_cost_examples():
    lat = build_lattice(3)
    mer = [0.0] * lat.num_qubits
    d, d2 = lat.groupable[0]
    m = shared_measure(lat, d, d2)
    mer[d], mer[d2], mer[m] = 0.02, 0.01, 0.007
    p = DeviceProfile("c", tuple(max(x, 1e-6) for x in mer), 0.002)
    assert cost_ind(ModalityInstance(ModalityKind.DM, (d,), d), p) == 0.02
    p2 = DeviceProfile("c2", tuple(0.008 if q == m else 0.02 for q in range(lat.num_qubits)), 0.002)
    assert cost_ind(ModalityInstance(ModalityKind.MRM, (d,), m, (m,)), p2) == pytest.approx(0.010)
    drm = [i for i in enumerate_modalities(lat, d) if i.kind is ModalityKind.DRM][0]
    p3 = DeviceProfile("c3", tuple(0.005 if q == drm.measured else 0.02 for q in range(lat.num_qubits)), 0.002)
    assert cost_ind(drm, p3) == pytest.approx(0.013)
    drpm = [i for i in enumerate_modalities(lat, (d, d2)) if i.kind is ModalityKind.DRPM]
    assert min(cost_joint(i, p) for i in drpm) == pytest.approx(0.016)
    mrpm = ModalityInstance(ModalityKind.MRPM, (d, d2), m, (m,))
    assert cost_joint(mrpm, p) == pytest.approx(0.011)
    p0 = DeviceProfile("c0", p.mer, 0.0)
    assert min(cost(i, p0) for i in drpm) == 0.01
    with pytest.raises(ValueError):
        cost_ind(mrpm, p)
    with pytest.raises(ValueError):
        cost_joint(drm, p)


@pytest.mark.parametrize(
    "prep, want",
    [
        ([], {0: Fraction(1)}),
        ([("x", 0)], {1: Fraction(1)}),
        ([("h", 0), ("cx", 0, 1)], {0: Fraction(1)}),
        ([("h", 0)], {0: Fraction(1, 2), 1: Fraction(1, 2)}),
    ],
)
def test_parity_chain_two_qubits(prep, want):
    t = Tableau(2)
    for op in prep:
        if op[0] == "x":
            t.x_gate(op[1])
        elif op[0] == "h":
            t.h(op[1])
        else:
            t.cx(op[1], op[2])
    frag = parity_chain([0, 1], 1)
    assert frag.cnot_count == 1
    assert fragment_distribution(t, frag.ops, frag.measured) == want
    assert want == z_parity_distribution(t, [0, 1])


def test_parity_chain_routing():
    lat = build_lattice(3)
    d1, d2 = lat.groupable[0]
    m = shared_measure(lat, d1, d2)
    frag = parity_chain([d1, m, d2], m, lat)
    assert frag.cnot_count == 2
    with pytest.raises(ValueError, match="disconnected"):
        parity_chain([d1, d2], d2, lat)
    with pytest.raises(ValueError):
        parity_chain([d1], d1)


@pytest.mark.parametrize("d", [3, 5])
def test_noiseless_equivalence_sampled(d):
    lat = build_lattice(d)
    rng = np.random.default_rng(d)
    insts = all_instances(lat)
    picks = rng.choice(len(insts), size=min(40, len(insts)), replace=False)
    assert sum(local_check(insts[i], lat, rng, states=20) for i in picks) == 0


def test_broken_fragment_is_detected():
    # dropping the uncompute CNOT from DRM must break equivalence
    lat = build_lattice(3)
    drm = [i for i in enumerate_modalities(lat, lat.data_at(1, 1)) if i.kind is ModalityKind.DRM][0]
    frag = build_fragment(drm, lat)
    cx = [k for k, (n, _) in enumerate(frag.ops) if n == "CX"]
    ops = tuple(op for k, op in enumerate(frag.ops) if k != cx[2])
    local = {q: i for i, q in enumerate(sorted(drm.participants))}
    lops = [(n, tuple(local[q] for q in qs)) for n, qs in ops]
    rng = np.random.default_rng(0)
    mismatches = 0
    for _ in range(50):
        t = Tableau(len(local))
        random_clifford_state(t, rng)
        if fragment_distribution(t, lops, local[frag.measured]) != z_parity_distribution(t, [local[drm.targets[0]]]):
            mismatches += 1
    assert mismatches > 0
