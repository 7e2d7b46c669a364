import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qcnet import linalg as la
from qcnet.errors import (DimensionError, InvalidOperationError, InvalidStateError,
                          NotHermitianError, ZeroProbabilityError)
from qcnet.qstate import (DensityOperator, Hamiltonian, ProjectionSet, born_probabilities, evolve,
                          max_outcomes, outcomes, random_projection_set, random_state, reduce)

PLUS = np.array([1, 1]) / np.sqrt(2)
MINUS = np.array([1, -1]) / np.sqrt(2)


def test_density_operator_checks():
    with pytest.raises(InvalidStateError):
        DensityOperator(np.diag([1.2, -0.2]))
    with pytest.raises(InvalidStateError):
        DensityOperator(np.array([[0.5, 0.5], [0, 0.5]]))
    with pytest.raises(InvalidStateError):
        DensityOperator(np.diag([0.8, 0.8]))
    with pytest.raises(DimensionError):
        DensityOperator(np.eye(4) / 4, dims=(2, 3))
    s = DensityOperator(np.diag([0.3, 0.2]))
    assert not s.is_normalized()
    assert np.abs(s.normalized().matrix - np.diag([0.6, 0.4])).max() < 1e-12


def test_pure_and_mixed_constructors():
    s = DensityOperator.pure([1, 1j])
    assert np.abs(s.matrix - np.array([[0.5, -0.5j], [0.5j, 0.5]])).max() < 1e-12
    m = DensityOperator.maximally_mixed((2, 2))
    assert m.dims == (2, 2) and np.abs(m.matrix - np.eye(4) / 4).max() < 1e-12


def test_projection_set_checks():
    with pytest.raises(InvalidOperationError):
        ProjectionSet((np.diag([1, 0]),))
    with pytest.raises(InvalidOperationError):
        ProjectionSet((np.diag([1, 0]), la.projector(PLUS)))
    with pytest.raises(InvalidOperationError):
        ProjectionSet((np.diag([1, 0]), np.diag([0, 1])), labels=("a", "a"))
    with pytest.raises(InvalidOperationError):
        ProjectionSet(())
    ps = ProjectionSet((np.diag([1, 0, 0]), np.diag([0, 1, 1])), labels=("x", "y"))
    assert ps.ranks() == [1, 2]
    assert ps.index("y") == 1 and ps.index(0) == 0
    with pytest.raises(KeyError):
        ps.index("z")
    with pytest.raises(IndexError):
        ps.index(5)


def test_born_plus_state():
    s = DensityOperator.pure(PLUS)
    z = ProjectionSet.computational(2)
    assert np.abs(np.array(born_probabilities(s, z)) - [0.5, 0.5]).max() < 1e-12
    x = ProjectionSet.from_basis([PLUS, MINUS], labels=("plus", "minus"))
    assert np.abs(np.array(born_probabilities(s, x)) - [1, 0]).max() < 1e-12


def test_born_uses_trace_normalization():
    s = DensityOperator(np.diag([0.3, 0.1]))
    p = born_probabilities(s, ProjectionSet.computational(2))
    assert np.abs(np.array(p) - [0.75, 0.25]).max() < 1e-12


def test_reduce_and_outcomes():
    s = DensityOperator.pure(PLUS)
    r = reduce(s, ProjectionSet.computational(2, labels=("0", "1")), "1")
    assert np.abs(r.matrix - np.diag([0, 1])).max() < 1e-12
    with pytest.raises(ZeroProbabilityError):
        reduce(DensityOperator(np.diag([1, 0])), ProjectionSet.computational(2), 1)
    outs = outcomes(DensityOperator(np.diag([1, 0])), ProjectionSet.computational(2))
    assert [o[0] for o in outs] == ["o0"]
    assert max_outcomes(s) == 2


def test_reduce_dimension_mismatch():
    with pytest.raises(DimensionError):
        born_probabilities(DensityOperator.pure(PLUS), ProjectionSet.computational(3))


def test_hamiltonian_and_evolve():
    with pytest.raises(NotHermitianError):
        Hamiltonian(np.array([[0, 1], [0, 0]]))
    # X rotation by pi/2 sends |0> to -i|1>
    s = evolve(DensityOperator.pure([1, 0]), Hamiltonian(la.SIGMA_X), np.pi / 2)
    assert np.abs(s.matrix - np.diag([0, 1])).max() < 1e-12
    with pytest.raises(DimensionError):
        evolve(s, Hamiltonian(np.eye(3)), 1.0)


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 8), st.integers(0, 2**31 - 1))
def test_born_sums_to_one(n, seed):
    rng = np.random.default_rng(seed)
    s = random_state(n, rng, rank=int(rng.integers(1, n + 1)))
    sizes = []
    while sum(sizes) < n:
        sizes.append(int(rng.integers(1, n - sum(sizes) + 1)))
    p = born_probabilities(s, random_projection_set(n, rng, sizes))
    assert abs(sum(p) - 1) < 1e-9
    assert min(p) > -1e-12


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 5), st.floats(-5, 5), st.integers(0, 2**31 - 1))
def test_evolve_preserves_spectrum(n, t, seed):
    rng = np.random.default_rng(seed)
    s = random_state(n, rng)
    a = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    out = evolve(s, Hamiltonian(a + a.conj().T), t)
    assert np.abs(np.linalg.eigvalsh(out.matrix) - np.linalg.eigvalsh(s.matrix)).max() < 1e-9


def test_random_state_rank():
    rng = np.random.default_rng(0)
    s = random_state(4, rng, rank=1)
    assert np.linalg.matrix_rank(s.matrix, tol=1e-9) == 1
    assert s.is_normalized()
