"""Dense complex linear algebra kernel.

Matrices are plain ``numpy`` arrays of dtype ``complex128``. Functions never
modify their inputs; arrays stored inside library value objects are marked
read-only.

Composite spaces are described by a list of factor dimensions. The first
factor is the most significant index, so ``tensor(a, b)`` acts on
``dims=[a_dim, b_dim]``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import reduce
from typing import Sequence

import numpy as np

from .errors import DimensionError, NotHermitianError

DEFAULT_TOL = 1e-9
DEFAULT_DIM_CAP = 4096
# eigenvalues closer than this are treated as one degenerate eigenspace
DEGENERACY_GAP = 1e-8
# first component with modulus above this fixes the global phase of a vector
PHASE_THRESHOLD = 1e-10


def as_matrix(a, *, copy: bool = False) -> np.ndarray:
    """Coerce ``a`` into a finite 2-d complex array."""
    m = np.array(a, dtype=np.complex128) if copy else np.asarray(a, dtype=np.complex128)
    if m.ndim == 0:
        m = m.reshape(1, 1)
    if m.ndim != 2 or m.shape[0] < 1 or m.shape[1] < 1:
        raise DimensionError(f"expected a nonempty 2-d matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix has non-finite entries")
    return m


def frozen(a) -> np.ndarray:
    """Return a read-only complex copy of ``a``."""
    m = as_matrix(a, copy=True)
    m.setflags(write=False)
    return m


def _require_square(a: np.ndarray) -> None:
    if a.shape[0] != a.shape[1]:
        raise DimensionError(f"matrix is not square: {a.shape}")


def dim_product(dims: Sequence[int]) -> int:
    return int(math.prod(int(d) for d in dims))


def tensor(*mats) -> np.ndarray:
    """Kronecker product of one or more matrices, left factor most significant."""
    if not mats:
        return np.ones((1, 1), dtype=np.complex128)
    return reduce(np.kron, (as_matrix(m) for m in mats))


def trace(a) -> complex:
    a = as_matrix(a)
    _require_square(a)
    return complex(np.trace(a))


def partial_trace(a, dims: Sequence[int], keep) -> np.ndarray:
    """Reduced operator on the factors listed in ``keep``.

    Kept factors appear in increasing index order regardless of the order
    given in ``keep``.
    """
    a = as_matrix(a)
    _require_square(a)
    dims = [int(d) for d in dims]
    if any(d < 1 for d in dims):
        raise DimensionError(f"factor dimensions must be positive: {dims}")
    if dim_product(dims) != a.shape[0]:
        raise DimensionError(f"matrix dimension {a.shape[0]} != product of dims {dims}")
    keep = sorted(set(int(k) for k in keep))
    if not keep:
        raise DimensionError("keep set must be nonempty")
    if keep[0] < 0 or keep[-1] >= len(dims):
        raise DimensionError(f"factor index out of range in {keep}")
    if len(keep) == len(dims):
        return a.copy()
    n = len(dims)
    t = a.reshape(dims + dims)
    row = list(range(n))
    col = [n + i if i in keep else i for i in range(n)]
    out = [i for i in keep] + [n + i for i in keep]
    r = np.einsum(t, row + col, out)
    kd = dim_product([dims[i] for i in keep])
    return r.reshape(kd, kd)


def permute_factors(a, dims: Sequence[int], perm: Sequence[int],
                    col_dims: Sequence[int] | None = None,
                    col_perm: Sequence[int] | None = None) -> np.ndarray:
    """Reorder tensor factors: new factor ``k`` is old factor ``perm[k]``.

    Rows and columns are permuted independently when ``col_dims`` is given,
    which lets rectangular Kraus operators be rearranged on either side.
    """
    a = as_matrix(a)
    dims = [int(d) for d in dims]
    if col_dims is None:
        col_dims, col_perm = dims, perm
    col_dims = [int(d) for d in col_dims]
    if col_perm is None:
        col_perm = list(range(len(col_dims)))
    if dim_product(dims) != a.shape[0] or dim_product(col_dims) != a.shape[1]:
        raise DimensionError(f"shape {a.shape} does not match dims {dims} x {col_dims}")
    nr = len(dims)
    t = a.reshape(dims + col_dims)
    axes = list(perm) + [nr + p for p in col_perm]
    return t.transpose(axes).reshape(a.shape)


def is_hermitian(a, tol: float = DEFAULT_TOL) -> bool:
    a = as_matrix(a)
    _require_square(a)
    return bool(np.max(np.abs(a - a.conj().T)) <= tol)


def is_psd(a, tol: float = DEFAULT_TOL) -> bool:
    a = as_matrix(a)
    if not is_hermitian(a, tol):
        return False
    h = (a + a.conj().T) / 2
    return bool(np.linalg.eigvalsh(h)[0] >= -tol)


def hermitian_part(a) -> np.ndarray:
    a = as_matrix(a)
    return (a + a.conj().T) / 2


def fix_phase(v: np.ndarray) -> np.ndarray:
    """Rotate ``v`` so that its first non-negligible component is real positive."""
    for c in v:
        if abs(c) > PHASE_THRESHOLD:
            return v * (abs(c) / c)
    return v


def _projector_key(p: np.ndarray):
    flat = np.round(p.ravel(), 9)
    # descending lexicographic order on (re, im) pairs
    return tuple(x for c in flat for x in (-c.real, -c.imag))


@dataclass(frozen=True)
class SpectralDecomposition:
    """``a = sum(weights[i] * projectors[i])`` with rank-1 orthogonal projectors."""

    weights: tuple
    vectors: tuple
    projectors: tuple

    def __len__(self):
        return len(self.weights)

    def reconstruct(self, dim: int | None = None) -> np.ndarray:
        if not self.weights:
            if dim is None:
                raise ValueError("empty decomposition needs an explicit dimension")
            return np.zeros((dim, dim), dtype=np.complex128)
        return sum(w * p for w, p in zip(self.weights, self.projectors))


def _canonical_cluster(h: np.ndarray, vecs: np.ndarray) -> list:
    """Deterministic orthonormal basis for the span of ``vecs``.

    Gram-Schmidt over the projections of the computational basis vectors onto
    the eigenspace, taken in index order. The basis therefore depends only on
    the eigenspace, not on the eigensolver's arbitrary internal rotation.
    """
    k = vecs.shape[1]
    n = vecs.shape[0]
    proj = vecs @ vecs.conj().T
    basis: list[np.ndarray] = []
    candidates = [proj[:, j] for j in range(n)] + [vecs[:, j] for j in range(k)]
    for c in candidates:
        if len(basis) == k:
            break
        v = c.copy()
        for b in basis:
            v = v - (b.conj() @ v) * b
        nv = np.linalg.norm(v)
        if nv > 1e-6:
            basis.append(v / nv)
    return basis


def spectral_decompose(a, tol: float = DEFAULT_TOL) -> SpectralDecomposition:
    """Eigen-decomposition of a Hermitian PSD operator into rank-1 projectors.

    Eigenvalues below ``tol`` are dropped. Components are ordered by
    decreasing weight; inside a degenerate eigenspace the basis is fixed by
    :func:`_canonical_cluster` and ties are ordered by descending
    lexicographic order of the projector entries.
    """
    a = as_matrix(a)
    _require_square(a)
    if not is_hermitian(a, tol):
        raise NotHermitianError("spectral_decompose requires a Hermitian matrix")
    h = hermitian_part(a)
    w, v = np.linalg.eigh(h)
    order = np.argsort(-w, kind="stable")
    w = w[order]
    v = v[:, order]

    clusters: list[list[int]] = []
    for k in range(len(w)):
        if clusters and w[clusters[-1][-1]] - w[k] < DEGENERACY_GAP:
            clusters[-1].append(k)
        else:
            clusters.append([k])

    weights, vectors, projectors = [], [], []
    for cl in clusters:
        if float(np.mean(w[cl])) < tol:
            continue
        if len(cl) == 1:
            basis = [v[:, cl[0]]]
        else:
            basis = _canonical_cluster(h, v[:, cl])
        items = []
        for b in basis:
            b = fix_phase(b)
            p = np.outer(b, b.conj())
            theta = float(np.real(b.conj() @ h @ b))
            items.append((_projector_key(p), theta, b, p))
        items.sort(key=lambda it: it[0])
        for _, theta, b, p in items:
            if theta < tol:
                continue
            b.setflags(write=False)
            p.setflags(write=False)
            weights.append(theta)
            vectors.append(b)
            projectors.append(p)
    return SpectralDecomposition(tuple(weights), tuple(vectors), tuple(projectors))


def herm_expm(h, t: float = 1.0) -> np.ndarray:
    """``exp(-i h t)`` for Hermitian ``h`` (natural units, hbar = 1)."""
    h = as_matrix(h)
    _require_square(h)
    if not is_hermitian(h, DEFAULT_TOL):
        raise NotHermitianError("herm_expm requires a Hermitian generator")
    w, v = np.linalg.eigh(hermitian_part(h))
    return (v * np.exp(-1j * w * t)) @ v.conj().T


def ket(index: int, dim: int) -> np.ndarray:
    v = np.zeros(dim, dtype=np.complex128)
    v[index] = 1.0
    return v


def projector(vec) -> np.ndarray:
    """Rank-1 projector onto the normalized ``vec``."""
    v = np.asarray(vec, dtype=np.complex128).ravel()
    v = v / np.linalg.norm(v)
    return np.outer(v, v.conj())


def max_abs_diff(a, b) -> float:
    return float(np.max(np.abs(as_matrix(a) - as_matrix(b))))


# Common single-qubit matrices, handy in tests and model files.
I2 = np.eye(2, dtype=np.complex128)
SIGMA_X = np.array([[0, 1], [1, 0]], dtype=np.complex128)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=np.complex128)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=np.complex128)
for _m in (I2, SIGMA_X, SIGMA_Y, SIGMA_Z):
    _m.setflags(write=False)
