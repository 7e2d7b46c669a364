"""Density operators, projection sets, Born probabilities and unitary evolution."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.stats import unitary_group

from . import linalg as la
from .errors import (DimensionError, InvalidOperationError, InvalidStateError,
                     NotHermitianError, ZeroProbabilityError)


@dataclass(frozen=True, eq=False)
class DensityOperator:
    """Positive Hermitian operator with trace at most one.

    ``dims`` lists the factor dimensions of the composite space; a state with
    ``|trace - 1| <= tol`` is *normalized*, smaller traces are allowed for the
    un-normalized outcomes of trace-reducing maps.
    """

    matrix: np.ndarray
    dims: tuple = None
    tol: float = field(default=la.DEFAULT_TOL, repr=False, compare=False)

    def __post_init__(self):
        m = la.as_matrix(self.matrix)
        if m.shape[0] != m.shape[1]:
            raise DimensionError(f"density operator must be square, got {m.shape}")
        dims = (m.shape[0],) if self.dims is None else tuple(int(d) for d in self.dims)
        if la.dim_product(dims) != m.shape[0]:
            raise DimensionError(f"dims {dims} do not match matrix dimension {m.shape[0]}")
        if not la.is_hermitian(m, self.tol):
            raise InvalidStateError("density operator is not Hermitian")
        if not la.is_psd(m, self.tol):
            raise InvalidStateError("density operator is not positive semidefinite")
        tr = float(np.real(np.trace(m)))
        if tr > 1 + self.tol or tr < -self.tol:
            raise InvalidStateError(f"trace {tr} outside [0, 1]")
        object.__setattr__(self, "matrix", la.frozen(la.hermitian_part(m)))
        object.__setattr__(self, "dims", dims)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def trace_value(self) -> float:
        return float(np.real(np.trace(self.matrix)))

    def is_normalized(self, tol: float | None = None) -> bool:
        tol = self.tol if tol is None else tol
        return abs(self.trace_value - 1.0) <= tol

    def normalized(self) -> "DensityOperator":
        tr = self.trace_value
        if tr <= self.tol:
            raise ZeroProbabilityError("cannot normalize a zero-trace operator")
        return DensityOperator(self.matrix / tr, self.dims, self.tol)

    @classmethod
    def pure(cls, vec, dims=None) -> "DensityOperator":
        return cls(la.projector(vec), dims)

    @classmethod
    def maximally_mixed(cls, dims) -> "DensityOperator":
        dims = tuple(dims) if not isinstance(dims, int) else (dims,)
        n = la.dim_product(dims)
        return cls(np.eye(n) / n, dims)


@dataclass(frozen=True, eq=False)
class ProjectionSet:
    """Mutually orthogonal projectors summing to the identity."""

    projectors: tuple
    labels: tuple = None
    tol: float = field(default=la.DEFAULT_TOL, repr=False, compare=False)

    def __post_init__(self):
        ps = tuple(la.frozen(p) for p in self.projectors)
        if not ps:
            raise InvalidOperationError("projection set is empty")
        n = ps[0].shape[0]
        for p in ps:
            if p.shape != (n, n):
                raise DimensionError("projectors must share one square shape")
        for i, p in enumerate(ps):
            if la.max_abs_diff(p @ p, p) > self.tol or not la.is_hermitian(p, self.tol):
                raise InvalidOperationError(f"element {i} is not an orthogonal projector")
        for i in range(len(ps)):
            for j in range(i + 1, len(ps)):
                if np.max(np.abs(ps[i] @ ps[j])) > self.tol:
                    raise InvalidOperationError(f"projectors {i} and {j} are not orthogonal")
        if la.max_abs_diff(sum(ps), np.eye(n)) > self.tol:
            raise InvalidOperationError("projectors do not sum to the identity")
        labels = self.labels
        if labels is None:
            labels = tuple(f"o{i}" for i in range(len(ps)))
        labels = tuple(str(x) for x in labels)
        if len(labels) != len(ps) or len(set(labels)) != len(labels):
            raise InvalidOperationError("labels must be unique, one per projector")
        object.__setattr__(self, "projectors", ps)
        object.__setattr__(self, "labels", labels)

    def __len__(self):
        return len(self.projectors)

    @property
    def dim(self) -> int:
        return self.projectors[0].shape[0]

    def ranks(self) -> list[int]:
        return [int(round(float(np.real(np.trace(p))))) for p in self.projectors]

    def index(self, outcome) -> int:
        """Resolve an outcome given as an integer index or a label."""
        if isinstance(outcome, (int, np.integer)):
            if not 0 <= outcome < len(self):
                raise IndexError(f"outcome index {outcome} out of range")
            return int(outcome)
        try:
            return self.labels.index(str(outcome))
        except ValueError:
            raise KeyError(f"unknown outcome label {outcome!r}") from None

    @classmethod
    def from_basis(cls, vectors, labels=None) -> "ProjectionSet":
        return cls(tuple(la.projector(v) for v in vectors), labels)

    @classmethod
    def computational(cls, dim: int, labels=None) -> "ProjectionSet":
        return cls.from_basis([la.ket(i, dim) for i in range(dim)], labels)


@dataclass(frozen=True, eq=False)
class Hamiltonian:
    matrix: np.ndarray

    def __post_init__(self):
        m = la.as_matrix(self.matrix)
        if m.shape[0] != m.shape[1]:
            raise DimensionError("Hamiltonian must be square")
        if not la.is_hermitian(m):
            raise NotHermitianError("Hamiltonian must be Hermitian")
        object.__setattr__(self, "matrix", la.frozen(la.hermitian_part(m)))


def evolve(s: DensityOperator, h: Hamiltonian, t: float) -> DensityOperator:
    """Unitary evolution ``U s U^dagger`` with ``U = exp(-i H t)``."""
    if h.matrix.shape[0] != s.dim:
        raise DimensionError(f"Hamiltonian dimension {h.matrix.shape[0]} != state dimension {s.dim}")
    u = la.herm_expm(h.matrix, t)
    return DensityOperator(u @ s.matrix @ u.conj().T, s.dims, s.tol)


def _check_space(s: DensityOperator, ps: ProjectionSet):
    if ps.dim != s.dim:
        raise DimensionError(f"projection set dimension {ps.dim} != state dimension {s.dim}")


def born_probabilities(s: DensityOperator, ps: ProjectionSet) -> list[float]:
    """Outcome probabilities ``Tr(P s P) / Tr(s)``."""
    _check_space(s, ps)
    tr = s.trace_value
    if tr <= s.tol:
        raise ZeroProbabilityError("Born rule undefined for a zero-trace state")
    return [float(np.real(np.trace(p @ s.matrix @ p))) / tr for p in ps.projectors]


def reduce(s: DensityOperator, ps: ProjectionSet, outcome) -> DensityOperator:
    """Normalized post-reduction state ``P s P / Tr(P s P)`` for one outcome."""
    _check_space(s, ps)
    i = ps.index(outcome)
    p = ps.projectors[i]
    out = p @ s.matrix @ p
    tr = float(np.real(np.trace(out)))
    if s.trace_value <= s.tol or tr / s.trace_value <= s.tol:
        raise ZeroProbabilityError(
            f"outcome {ps.labels[i]!r} has zero Born probability")
    return DensityOperator(out / tr, s.dims, s.tol)


def outcomes(s: DensityOperator, ps: ProjectionSet) -> list[tuple[str, float, DensityOperator]]:
    """All outcomes with nonzero probability as ``(label, probability, state)``."""
    probs = born_probabilities(s, ps)
    return [(ps.labels[i], p, reduce(s, ps, i))
            for i, p in enumerate(probs) if p > s.tol]


def max_outcomes(s: DensityOperator) -> int:
    """Upper bound on the number of outcomes of any reduction: the dimension."""
    return s.dim


def random_state(dim: int, rng: np.random.Generator, rank: int | None = None) -> DensityOperator:
    """Random density operator from a Ginibre matrix of the given rank."""
    rank = dim if rank is None else rank
    g = rng.normal(size=(dim, rank)) + 1j * rng.normal(size=(dim, rank))
    m = g @ g.conj().T
    return DensityOperator(m / np.trace(m).real)


def random_projection_set(dim: int, rng: np.random.Generator, sizes: Sequence[int] | None = None) -> ProjectionSet:
    """Projectors onto blocks of columns of a Haar-random unitary."""
    u = random_unitary(dim, rng)
    if sizes is None:
        sizes = [1] * dim
    if sum(sizes) != dim:
        raise DimensionError("block sizes must add up to the dimension")
    ps, start = [], 0
    for k in sizes:
        block = u[:, start:start + k]
        ps.append(block @ block.conj().T)
        start += k
    return ProjectionSet(tuple(ps))


def random_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    if dim == 1:
        return np.ones((1, 1), dtype=np.complex128)
    return unitary_group.rvs(dim, random_state=rng)
