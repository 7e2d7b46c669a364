import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from netgen import chain, random_network
from qcnet.errors import DimensionCapError, NetworkError
from qcnet.intervene import do_set
from qcnet.oracle import (ClassicalBn, brute_force_joint, diagonal_to_cbn, do_classical,
                          enumerate_joint, marginal_table)
from qcnet.qcn import build_joint
from qcnet.sag import cn_of


def sprinkler():
    cpts = {"R": np.array([0.8, 0.2]),
            "S": np.array([[0.6, 0.4], [0.99, 0.01]]),
            "W": np.array([[[1.0, 0.0], [0.1, 0.9]], [[0.2, 0.8], [0.01, 0.99]]])}
    return ClassicalBn(("R", "S", "W"), {"R": 2, "S": 2, "W": 2},
                       {"R": (), "S": ("R",), "W": ("R", "S")}, cpts)


def test_classical_bn_validation():
    bn = sprinkler()
    with pytest.raises(ValueError):
        ClassicalBn(bn.variables, bn.cards, bn.parents, {**bn.cpts, "R": np.array([0.5, 0.6])})
    with pytest.raises(ValueError):
        ClassicalBn(bn.variables, bn.cards, bn.parents, {**bn.cpts, "R": np.ones((2, 2)) / 2})
    with pytest.raises(ValueError):
        ClassicalBn(("A", "B"), {"A": 2, "B": 2}, {"A": ("B",), "B": ("A",)},
                    {"A": np.eye(2), "B": np.eye(2)})


def test_enumerate_and_do():
    bn = sprinkler()
    t = enumerate_joint(bn)
    assert abs(t.sum() - 1) < 1e-12
    # P(R=1, S=0, W=1) = 0.2 * 0.99 * 0.8
    assert abs(t[1, 0, 1] - 0.2 * 0.99 * 0.8) < 1e-12
    d = enumerate_joint(do_classical(bn, "S", 1))
    assert np.abs(marginal_table(bn, d, ["R"]) - [0.8, 0.2]).max() < 1e-12
    assert abs(marginal_table(bn, d, ["S"])[1] - 1) < 1e-12
    with pytest.raises(KeyError):
        do_classical(bn, "Q", 0)
    with pytest.raises(ValueError):
        do_classical(bn, "S", 2)
    with pytest.raises(DimensionCapError):
        enumerate_joint(bn, cap=4)


def test_chain_through_cbn():
    bn = diagonal_to_cbn(chain(np.diag([0.7, 0.3]), [np.eye(2)]))
    assert np.abs(enumerate_joint(bn) - [[0.7, 0], [0, 0.3]]).max() < 1e-12


def test_non_diagonal_rejected():
    with pytest.raises(NetworkError):
        diagonal_to_cbn(chain(np.full((2, 2), 0.5), [np.eye(2)]))


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 4), st.integers(0, 2**31 - 1))
def test_diagonal_networks_match_cbn(n, seed):
    rng = np.random.default_rng(seed)
    q = random_network(rng, n, diagonal=True)
    js = build_joint(q)
    table = enumerate_joint(diagonal_to_cbn(q))
    assert np.abs(np.real(np.diag(js.operator.matrix)) - table.ravel()).max() < 1e-9
    singles = [x for x in q.graph.ids if len(cn_of(q.graph, x).members) == 1]
    if singles:
        x = singles[int(rng.integers(len(singles)))]
        val = int(rng.integers(2))
        q2 = do_set(q, x, np.diag([1.0 - val, float(val)]))
        ref = enumerate_joint(do_classical(diagonal_to_cbn(q), x, val))
        assert np.abs(np.real(np.diag(build_joint(q2).operator.matrix)) - ref.ravel()).max() < 1e-9


@pytest.mark.parametrize("aggregate", [True, False])
@settings(max_examples=20, deadline=None)
@given(n=st.integers(1, 4), seed=st.integers(0, 2**31 - 1))
def test_brute_force_matches_joint(aggregate, n, seed):
    rng = np.random.default_rng(seed)
    q = random_network(rng, n)
    a = build_joint(q, aggregate=aggregate).operator.matrix
    b = brute_force_joint(q, aggregate=aggregate).operator.matrix
    assert np.abs(a - b).max() < 1e-9


def test_brute_force_cap():
    q = random_network(np.random.default_rng(0), 5)
    with pytest.raises(DimensionCapError):
        brute_force_joint(q)
