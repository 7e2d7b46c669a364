import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from netgen import bell, chain, random_network
from qcnet import linalg as la
from qcnet.errors import (DimensionCapError, DimensionError, InvalidOperationError, NetworkError,
                          ZeroProbabilityError)
from qcnet.qcn import (CheckPolicy, LocalDistribution, QuantumCausalNetwork, build_joint,
                       component_weights, marginal, parameter_count, respects, respects_child,
                       respects_root)
from qcnet.qop import QuantumOperation, apply
from qcnet.qstate import DensityOperator
from qcnet.sag import CnSet, Sag, cn_partition

ID = [np.eye(2)]


def cnot_target_network(edge):
    """V -> X, V -- W; the channel writes W's computational value onto X."""
    d = {("V", "X")} | ({("W", "X")} if edge else set())
    g = Sag([("V", 2), ("W", 2), ("X", 2)], d, {("V", "W")})
    cn = [c for c in cn_partition(g) if c.members == ("X",)][0]
    ks = []
    for v in range(2):
        for w in range(2):
            k = np.zeros((2, 4), dtype=complex)
            k[w, 2 * v + w] = 1
            ks.append(k)
    return LocalDistribution.child(cn, [QuantumOperation(tuple(ks), (2, 2), (2,))], (2,), (2, 2)), g


def test_root_validation():
    g = Sag([("A", 2)])
    (cn,) = cn_partition(g)
    with pytest.raises(InvalidOperationError):
        LocalDistribution.root(cn, [np.diag([0.5, 0.2])], (2,))
    with pytest.raises(InvalidOperationError):
        LocalDistribution.root(cn, [np.diag([1.2, -0.2])], (2,))
    with pytest.raises(DimensionError):
        LocalDistribution.root(cn, [np.eye(3) / 3], (2,))
    with pytest.raises(NetworkError):
        LocalDistribution.root(cn, [], (2,))
    ld = LocalDistribution.root(cn, [np.diag([0.5, 0]), np.diag([0, 0.5])], (2,))
    assert ld.weights() == [0.5, 0.5] and not ld.deterministic
    sub = LocalDistribution.root(cn, [np.diag([0.2, 0])], (2,), subnormalized=True)
    assert sub.weights() == [0.2]


def test_child_validation():
    g = Sag([("X", 2), ("Y", 2)], {("X", "Y")})
    cy = cn_partition(g)[1]
    half = QuantumOperation((np.diag([1, 0]),), (2,), (2,))
    with pytest.raises(InvalidOperationError):
        LocalDistribution.child(cy, [half], (2,), (2,))
    with pytest.raises(DimensionError):
        LocalDistribution.child(cy, [QuantumOperation((np.eye(3),), (3,), (3,))], (2,), (2,))
    with pytest.raises(InvalidOperationError):
        LocalDistribution.child(cy, [np.eye(2)], (2,), (2,))
    other = QuantumOperation((np.diag([0, 1]),), (2,), (2,))
    ld = LocalDistribution.child(cy, [half, other], (2,), (2,))
    assert ld.kind == "child" and len(ld.aggregate().kraus) == 2
    with pytest.raises(NetworkError):
        ld.weights()


def test_network_requires_every_cn_set():
    g = Sag([("X", 2), ("Y", 2)], {("X", "Y")})
    cx = cn_partition(g)[0]
    with pytest.raises(NetworkError):
        QuantumCausalNetwork(g, {("X",): LocalDistribution.root(cx, [np.eye(2) / 2], (2,))})


def test_respects_root_examples():
    edgeless = Sag([("A", 2), ("B", 2)])
    linked = Sag([("A", 2), ("B", 2)], set(), {("A", "B")})
    pair = CnSet(("A", "B"), "root")
    prod = la.tensor(np.diag([0.3, 0.7]), la.projector([1, 1j]))
    assert respects_root(LocalDistribution.root(pair, [prod], (2, 2)), edgeless)
    entangled = LocalDistribution.root(pair, [la.projector(bell())], (2, 2))
    assert respects_root(entangled, linked)
    rep = respects_root(entangled, edgeless)
    assert not rep.ok and rep.violations and rep.checked > 0


def test_respects_child_examples():
    ld, g = cnot_target_network(edge=False)
    assert not respects_child(ld, g)
    ld, g = cnot_target_network(edge=True)
    assert respects_child(ld, g)
    assert respects(ld, g)
    with pytest.raises(NetworkError):
        respects_root(ld, g)


def test_respects_child_ignoring_nonparent_input():
    # X's channel discards W, which enters only as a non-influencing parent
    g = Sag([("V", 2), ("W", 2), ("X", 2)], {("V", "X")}, {("V", "W")})
    cn = [c for c in cn_partition(g) if c.members == ("X",)][0]
    ks = [la.tensor(np.eye(2), la.ket(w, 2).reshape(1, -1)) for w in range(2)]
    ld = LocalDistribution.child(cn, [QuantumOperation(tuple(ks), (2, 2), (2,))], (2,), (2, 2))
    assert respects_child(ld, g)


def test_network_rejects_disrespecting_distribution():
    ld, g = cnot_target_network(edge=False)
    v = np.zeros(4)
    v[0] = 1
    root = LocalDistribution.root(cn_partition(g)[0], [la.projector(v)], (2, 2))
    with pytest.raises(NetworkError):
        QuantumCausalNetwork(g, {("V", "W"): root, ("X",): ld})
    assert QuantumCausalNetwork(g, {("V", "W"): root, ("X",): ld}, policy=None)


def test_respects_policy_seed_changes_rounds():
    ld, g = cnot_target_network(edge=True)
    a = respects_child(ld, g, CheckPolicy(samples=0))
    b = respects_child(ld, g, CheckPolicy(samples=2, seed=5))
    assert a.ok and b.ok and b.checked > a.checked


def test_parameter_counts():
    q = chain(np.diag([0.7, 0.3]), ID)
    cx, cy = q.cn_sets
    assert parameter_count(q, cx) == 3
    assert parameter_count(q, cy) == 12
    g = Sag([("A", 1)])
    (c,) = cn_partition(g)
    q1 = QuantumCausalNetwork(g, {("A",): LocalDistribution.root(c, [np.eye(1)], (1,))})
    assert parameter_count(q1, c) == 0


def test_chain_joint():
    js = build_joint(chain(np.diag([0.7, 0.3]), ID))
    want = np.diag([0.7, 0, 0, 0.3])
    assert np.abs(js.operator.matrix - want).max() < 1e-10
    assert np.abs(marginal(js, None, ["Y"]).matrix - np.diag([0.7, 0.3])).max() < 1e-10
    assert np.abs(marginal(js, None, ["X", "Y"]).matrix - want).max() < 1e-12


def test_bit_flip_chain_joint():
    js = build_joint(chain(np.diag([0.7, 0.3]), [la.SIGMA_X]))
    assert np.abs(js.operator.matrix - np.diag([0, 0.7, 0.3, 0])).max() < 1e-10


def test_single_root_joint_and_mixture():
    rho = np.array([[0.6, 0.2], [0.2, 0.4]])
    g = Sag([("A", 2)])
    (c,) = cn_partition(g)
    js = build_joint(QuantumCausalNetwork(g, {("A",): LocalDistribution.root(c, [rho], (2,))}))
    assert np.abs(js.operator.matrix - rho).max() < 1e-12
    w = np.linalg.eigvalsh(rho)[::-1]
    assert np.abs(np.array([m.weight for m in js.mixture]) - w).max() < 1e-12


def test_product_marginals():
    g = Sag([("A", 2), ("B", 2)])
    ca, cb = cn_partition(g)
    ra, rb = np.diag([0.9, 0.1]), la.projector([1, 1])
    q = QuantumCausalNetwork(g, {("A",): LocalDistribution.root(ca, [ra], (2,)),
                                 ("B",): LocalDistribution.root(cb, [rb], (2,))})
    js = build_joint(q)
    assert np.abs(marginal(js, q, ["A"]).matrix - ra).max() < 1e-12
    assert np.abs(marginal(js, q, ["B"]).matrix - rb).max() < 1e-12
    with pytest.raises(KeyError):
        marginal(js, q, ["Q"])
    with pytest.raises(ValueError):
        marginal(js, q, [])


def test_noncommuting_components_modes():
    # the summed state |+><+|/2 + |0><0|/2 decomposes differently from its components
    g = Sag([("X", 2), ("Y", 2)], {("X", "Y")})
    cx, cy = cn_partition(g)
    comps = [la.projector([1, 0]) / 2, la.projector([1, 1]) / 2]
    ks = [la.tensor(la.ket(k, 2).reshape(-1, 1), la.ket(k, 2).reshape(1, -1)) for k in range(2)]
    q = QuantumCausalNetwork(g, {
        ("X",): LocalDistribution.root(cx, comps, (2,)),
        ("Y",): LocalDistribution.child(cy, [QuantumOperation(tuple(ks), (2,), (2,))], (2,), (2,)),
    }, policy=None)
    agg = build_joint(q)
    per = build_joint(q, aggregate=False)
    for js in (agg, per):
        assert np.abs(marginal(js, q, ["X"]).matrix - sum(comps)).max() < 1e-12
        assert np.abs(js.reconstruct() - js.operator.matrix).max() < 1e-12
    assert np.abs(agg.operator.matrix - per.operator.matrix).max() > 1e-3
    assert component_weights(per, ["X"]) == pytest.approx({0: 0.5, 1: 0.5})


def test_dim_cap():
    with pytest.raises(DimensionCapError):
        build_joint(chain(np.diag([0.7, 0.3]), ID), dim_cap=2)


def test_zero_total_weight():
    g = Sag([("X", 2), ("Y", 2)], {("X", "Y")})
    cx, cy = cn_partition(g)
    proj = QuantumOperation((np.diag([0, 1]),), (2,), (2,))
    q = QuantumCausalNetwork(g, {
        ("X",): LocalDistribution.root(cx, [np.diag([1, 0])], (2,)),
        ("Y",): LocalDistribution.child(cy, [proj], (2,), (2,), subnormalized=True),
    }, policy=None)
    with pytest.raises(ZeroProbabilityError):
        build_joint(q)


def test_local_lookup():
    q = chain(np.diag([0.7, 0.3]), ID)
    assert q.local("Y").kind == "child"
    assert q.local(["X"]).is_root
    with pytest.raises(KeyError):
        q.local("Q")
    assert q.total_dim() == 4 and q.spaces == {"X": 2, "Y": 2}


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 4), st.booleans(), st.integers(0, 2**31 - 1))
def test_joint_invariants(n, aggregate, seed):
    rng = np.random.default_rng(seed)
    q = random_network(rng, n)
    js = build_joint(q, aggregate=aggregate)
    m = js.operator.matrix
    assert abs(np.trace(m) - 1) < 1e-9
    assert np.linalg.eigvalsh(m)[0] > -1e-9
    assert abs(sum(c.weight for c in js.mixture) - 1) < 1e-9
    assert np.abs(js.reconstruct() - m).max() < 1e-9
    # each CN-set marginal is its summed channel applied to its parents' marginal
    for ld in q.locals.values():
        got = marginal(js, q, ld.target.members).matrix
        if ld.is_root:
            want = ld.aggregate()
        else:
            want = ld.aggregate().apply_matrix(marginal(js, q, ld.target.parents).matrix)
        assert np.abs(got - want).max() < 1e-8


@settings(max_examples=15, deadline=None)
@given(st.integers(1, 4), st.booleans(), st.integers(0, 2**31 - 1))
def test_classical_model_tables(n, aggregate, seed):
    q = random_network(np.random.default_rng(seed), n)
    js = build_joint(q, aggregate=aggregate)
    cm = js.classical_model
    for c in js.mixture:
        vals = [v for _, v in c.path]
        assert abs(cm.path_weight(vals) - c.weight) < 1e-12
    # tables are keyed by parent values only, and every parent key has a full row
    for k, tab in enumerate(cm.tables):
        for key in tab:
            assert len(key) == len(cm.parents[k])
    total = 0.0
    rows = [sorted({v for t in tab.values() for v in t}) for tab in cm.tables]
    for vals in itertools.product(*rows):
        total += cm.path_weight(vals)
    assert abs(total - 1) < 1e-9


def test_build_joint_is_deterministic():
    q = random_network(np.random.default_rng(7), 4)
    a, b = build_joint(q), build_joint(q)
    assert np.array_equal(a.operator.matrix, b.operator.matrix)


def test_apply_matches_joint_for_chain():
    s = DensityOperator(np.array([[0.5, 0.3], [0.3, 0.5]]))
    op = QuantumOperation(tuple(ID), (2,), (2,))
    js = build_joint(chain(s.matrix, ID))
    assert np.abs(marginal(js, None, ["Y"]).matrix - apply(op, s).matrix).max() < 1e-12
