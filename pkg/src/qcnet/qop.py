"""Quantum operations in Kraus form and fiducial characterization of states and maps."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import linalg as la
from .errors import DimensionError, InvalidOperationError, NumericError
from .qstate import DensityOperator, random_unitary


@dataclass(frozen=True, eq=False)
class QuantumOperation:
    """Completely positive, trace-nonincreasing map ``s -> sum_k K s K^dagger``.

    Every Kraus matrix has shape ``(prod(out_dims), prod(in_dims))``. An empty
    ``in_dims`` denotes the trivial one-dimensional input space, which is how
    fixed state preparations are expressed.
    """

    kraus: tuple
    in_dims: tuple
    out_dims: tuple
    tol: float = field(default=la.DEFAULT_TOL, repr=False, compare=False)

    def __post_init__(self):
        ks = tuple(la.frozen(k) for k in self.kraus)
        if not ks:
            raise InvalidOperationError("Kraus list is empty")
        in_dims = tuple(int(d) for d in self.in_dims)
        out_dims = tuple(int(d) for d in self.out_dims)
        shape = (la.dim_product(out_dims), la.dim_product(in_dims))
        for k in ks:
            if k.shape != shape:
                raise DimensionError(f"Kraus shape {k.shape} != expected {shape}")
        object.__setattr__(self, "kraus", ks)
        object.__setattr__(self, "in_dims", in_dims)
        object.__setattr__(self, "out_dims", out_dims)
        if not is_trace_nonincreasing(self, self.tol):
            raise InvalidOperationError("operation increases trace (sum K^dagger K > I)")

    @property
    def in_dim(self) -> int:
        return la.dim_product(self.in_dims)

    @property
    def out_dim(self) -> int:
        return la.dim_product(self.out_dims)

    def gram(self) -> np.ndarray:
        """``sum_k K^dagger K``."""
        return sum(k.conj().T @ k for k in self.kraus)

    def apply_matrix(self, m) -> np.ndarray:
        m = la.as_matrix(m)
        if m.shape != (self.in_dim, self.in_dim):
            raise DimensionError(f"input dimension {m.shape[0]} != operation input {self.in_dim}")
        return sum(k @ m @ k.conj().T for k in self.kraus)

    def is_zero(self, tol: float | None = None) -> bool:
        tol = self.tol if tol is None else tol
        return all(np.max(np.abs(k)) <= tol for k in self.kraus)


def apply(op: QuantumOperation, s: DensityOperator) -> DensityOperator:
    if s.dim != op.in_dim or (len(s.dims) > 1 and len(op.in_dims) > 1 and tuple(s.dims) != op.in_dims):
        raise DimensionError(f"state dims {s.dims} do not match operation input {op.in_dims}")
    return DensityOperator(op.apply_matrix(s.matrix), op.out_dims or (1,), s.tol)


def is_trace_preserving(op: QuantumOperation, tol: float = la.DEFAULT_TOL) -> bool:
    return la.max_abs_diff(op.gram(), np.eye(op.in_dim)) <= tol


def is_trace_nonincreasing(op: QuantumOperation, tol: float = la.DEFAULT_TOL) -> bool:
    g = la.hermitian_part(op.gram())
    return float(np.linalg.eigvalsh(g)[-1]) <= 1 + tol


def choi_matrix(op: QuantumOperation) -> np.ndarray:
    """``sum_ij |i><j| (x) A(|i><j|)`` on input (x) output, unnormalized."""
    n_in, n_out = op.in_dim, op.out_dim
    c = np.zeros((n_in * n_out, n_in * n_out), dtype=np.complex128)
    for k in op.kraus:
        # |K>> = sum_i |i> (x) K|i>
        v = k.T.reshape(-1)
        c += np.outer(v, v.conj())
    return c


def choi_of_map(linear_map, in_dim: int, out_dim: int) -> np.ndarray:
    """Choi matrix of an arbitrary linear map given as a Python callable."""
    c = np.zeros((in_dim * out_dim, in_dim * out_dim), dtype=np.complex128)
    for i in range(in_dim):
        for j in range(in_dim):
            e = np.zeros((in_dim, in_dim), dtype=np.complex128)
            e[i, j] = 1.0
            c += np.kron(e, la.as_matrix(linear_map(e)))
    return c


def is_completely_positive(m, in_dim: int, out_dim: int, tol: float = la.DEFAULT_TOL) -> bool:
    m = la.as_matrix(m)
    if m.shape != (in_dim * out_dim, in_dim * out_dim):
        raise DimensionError(f"Choi matrix shape {m.shape} != {(in_dim * out_dim,) * 2}")
    return la.is_psd(m, tol)


def choi_to_kraus(m, in_dims, out_dims, tol: float = la.DEFAULT_TOL) -> QuantumOperation:
    """Import a map given entrywise through its Choi matrix."""
    in_dims = (in_dims,) if isinstance(in_dims, int) else tuple(in_dims)
    out_dims = (out_dims,) if isinstance(out_dims, int) else tuple(out_dims)
    n_in, n_out = la.dim_product(in_dims), la.dim_product(out_dims)
    if not is_completely_positive(m, n_in, n_out, tol):
        raise InvalidOperationError("map is not completely positive (Choi matrix not PSD)")
    dec = la.spectral_decompose(m, tol)
    kraus = [np.sqrt(w) * v.reshape(n_in, n_out).T for w, v in zip(dec.weights, dec.vectors)]
    if not kraus:
        kraus = [np.zeros((n_out, n_in))]
    return QuantumOperation(tuple(kraus), in_dims, out_dims, tol)


def compose(outer: QuantumOperation, inner: QuantumOperation) -> QuantumOperation:
    """``outer`` after ``inner``; Kraus list is every product ``K_outer K_inner``."""
    if inner.out_dim != outer.in_dim or (inner.out_dims and outer.in_dims
                                         and inner.out_dims != outer.in_dims):
        raise DimensionError(f"cannot compose: {inner.out_dims} -> {outer.in_dims}")
    ks = tuple(a @ b for a in outer.kraus for b in inner.kraus)
    return QuantumOperation(ks, inner.in_dims, outer.out_dims, max(outer.tol, inner.tol))


def sum_operations(ops: Sequence[QuantumOperation]) -> QuantumOperation:
    """The map ``sum_i A_i`` (Kraus lists concatenated)."""
    ops = list(ops)
    ks = tuple(k for op in ops for k in op.kraus)
    return QuantumOperation(ks, ops[0].in_dims, ops[0].out_dims, ops[0].tol)


def identity_channel(dims) -> QuantumOperation:
    dims = (dims,) if isinstance(dims, int) else tuple(dims)
    return QuantumOperation((np.eye(la.dim_product(dims)),), dims, dims)


def unitary_channel(u, dims=None) -> QuantumOperation:
    u = la.as_matrix(u)
    dims = (u.shape[0],) if dims is None else tuple(dims)
    return QuantumOperation((u,), dims, dims)


def projector_channel(p, dims=None) -> QuantumOperation:
    p = la.as_matrix(p)
    dims = (p.shape[0],) if dims is None else tuple(dims)
    return QuantumOperation((p,), dims, dims)


def preparation(state, out_dims=None) -> QuantumOperation:
    """Operation from the trivial space whose single output is ``state``."""
    m = state.matrix if isinstance(state, DensityOperator) else la.as_matrix(state)
    out_dims = (state.dims if isinstance(state, DensityOperator) else (m.shape[0],)) \
        if out_dims is None else tuple(out_dims)
    dec = la.spectral_decompose(m, 1e-14)
    ks = [np.sqrt(w) * v.reshape(-1, 1) for w, v in zip(dec.weights, dec.vectors)]
    if not ks:
        ks = [np.zeros((m.shape[0], 1))]
    return QuantumOperation(tuple(ks), (), out_dims)


def depolarizing_kraus(p: float) -> list[np.ndarray]:
    return [np.sqrt(1 - p) * la.I2, np.sqrt(p / 3) * la.SIGMA_X,
            np.sqrt(p / 3) * la.SIGMA_Y, np.sqrt(p / 3) * la.SIGMA_Z]


def random_kraus_rotation(op: QuantumOperation, rng: np.random.Generator, extra: int = 0) -> QuantumOperation:
    """An equivalent Kraus list ``K'_a = sum_b U_ab K_b`` for Haar-random ``U``."""
    ks = list(op.kraus) + [np.zeros_like(op.kraus[0])] * extra
    u = random_unitary(len(ks), rng)
    new = [sum(u[a, b] * ks[b] for b in range(len(ks))) for a in range(len(ks))]
    return QuantumOperation(tuple(new), op.in_dims, op.out_dims, op.tol)


@dataclass(frozen=True, eq=False)
class FiducialSet:
    """``n**2`` rank-1 projectors whose Born probabilities fix any state."""

    vectors: tuple
    tol: float = field(default=la.DEFAULT_TOL, repr=False, compare=False)
    projectors: tuple = field(init=False, repr=False)

    def __post_init__(self):
        vs = []
        for v in self.vectors:
            v = np.array(v, dtype=np.complex128).ravel()
            nv = np.linalg.norm(v)
            if abs(nv - 1) > 1e-6:
                raise InvalidOperationError("fiducial vectors must be unit vectors")
            v = v / nv
            v.setflags(write=False)
            vs.append(v)
        n = vs[0].shape[0]
        if len(vs) != n * n or any(v.shape[0] != n for v in vs):
            raise InvalidOperationError(f"a fiducial set on dimension {n} needs {n * n} vectors")
        ps = []
        for v in vs:
            p = np.outer(v, v.conj())
            p.setflags(write=False)
            ps.append(p)
        object.__setattr__(self, "vectors", tuple(vs))
        object.__setattr__(self, "projectors", tuple(ps))
        if np.linalg.matrix_rank(self.gram(), tol=1e-8) != n * n:
            raise InvalidOperationError("fiducial set is not informationally complete")

    @property
    def dim(self) -> int:
        return self.vectors[0].shape[0]

    def __len__(self):
        return len(self.vectors)

    def gram(self) -> np.ndarray:
        """``G_ij = Tr(F_i F_j)``."""
        return np.array([[np.real(np.trace(a @ b)) for b in self.projectors]
                         for a in self.projectors])

    def condition_number(self) -> float:
        return float(np.linalg.cond(self.gram()))

    def conjugated(self, u) -> "FiducialSet":
        u = la.as_matrix(u)
        return FiducialSet(tuple(u @ v for v in self.vectors), self.tol)

    def probabilities(self, s: DensityOperator) -> np.ndarray:
        """Forward Born map ``Tr(F_i s F_i)``."""
        return np.array([np.real(np.trace(p @ s.matrix @ p)) for p in self.projectors])


def canonical_fiducial_set(n: int) -> FiducialSet:
    """``|j>``, then ``(|j>+|k>)/sqrt2`` and ``(|j>+i|k>)/sqrt2`` for each ``j<k``."""
    if n < 1:
        raise ValueError("dimension must be positive")
    vs = [la.ket(j, n) for j in range(n)]
    s = 1 / np.sqrt(2)
    for j in range(n):
        for k in range(j + 1, n):
            vs.append(s * (la.ket(j, n) + la.ket(k, n)))
            vs.append(s * (la.ket(j, n) + 1j * la.ket(k, n)))
    return FiducialSet(tuple(vs))


def random_fiducial_set(n: int, rng: np.random.Generator) -> FiducialSet:
    """The canonical set conjugated by a Haar-random unitary."""
    return canonical_fiducial_set(n).conjugated(random_unitary(n, rng))


def state_from_fiducial(probs, fs: FiducialSet, tol: float = la.DEFAULT_TOL) -> DensityOperator:
    """Invert the fiducial Born map: the unique state with the given probabilities."""
    probs = np.asarray(probs, dtype=float).ravel()
    n = fs.dim
    if probs.shape[0] != n * n:
        raise DimensionError(f"expected {n * n} probabilities, got {probs.shape[0]}")
    # Tr(F s) = sum_ab F_ba s_ab = <vec(F^T), vec(s)>
    a = np.array([p.T.reshape(-1) for p in fs.projectors])
    x = np.linalg.solve(a, probs.astype(np.complex128))
    s = la.hermitian_part(x.reshape(n, n))
    w, v = np.linalg.eigh(s)
    if w[0] < -1e-7:
        raise NumericError(f"probabilities are inconsistent: eigenvalue {w[0]:.3g} < 0")
    w = np.clip(w, 0.0, None)
    tr = w.sum()
    if abs(tr - 1) > max(tol, 1e-7):
        raise NumericError(f"probabilities are inconsistent: trace {tr:.12g} != 1")
    s = (v * (w / tr)) @ v.conj().T
    return DensityOperator(s)


def fiducial_fingerprint(op: QuantumOperation, fin: FiducialSet, fout: FiducialSet) -> np.ndarray:
    """``M_ij = Tr(G_j A(F_i) G_j)`` over every input/output fiducial pair."""
    if fin.dim != op.in_dim or fout.dim != op.out_dim:
        raise DimensionError("fiducial sets do not match the operation's dimensions")
    m = np.empty((len(fin), len(fout)))
    for i, f in enumerate(fin.projectors):
        out = op.apply_matrix(f)
        for j, g in enumerate(fout.projectors):
            m[i, j] = np.real(np.trace(g @ out @ g))
    return m


def ops_equal(a: QuantumOperation, b: QuantumOperation, fin: FiducialSet | None = None,
              fout: FiducialSet | None = None, tol: float = la.DEFAULT_TOL) -> bool:
    if (a.in_dim, a.out_dim) != (b.in_dim, b.out_dim):
        return False
    fin = fin or canonical_fiducial_set(a.in_dim)
    fout = fout or canonical_fiducial_set(a.out_dim)
    diff = fiducial_fingerprint(a, fin, fout) - fiducial_fingerprint(b, fin, fout)
    return bool(np.max(np.abs(diff)) <= tol)
