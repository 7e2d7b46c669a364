"""Brute-force reference implementations.

Nothing here shares code paths with the joint construction in :mod:`qcn`
beyond the value types: the classical network is enumerated outcome by
outcome, and :func:`brute_force_joint` recurses over every mixture path with
its own eigen-decomposition and explicit index loops for tensor ordering.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .errors import DimensionCapError, NetworkError, ZeroProbabilityError
from .qcn import JointState, MixtureComponent, QuantumCausalNetwork
from .qstate import DensityOperator

CLASSICAL_CAP = 64   # six binary variables
QUANTUM_CAP = 16     # four qubits


@dataclass(frozen=True, eq=False)
class ClassicalBn:
    """Discrete Bayesian network.

    ``cpts[v]`` has one axis per parent (in ``parents[v]`` order) followed by
    the axis of ``v`` itself.
    """

    variables: tuple
    cards: dict
    parents: dict
    cpts: dict

    def __post_init__(self):
        for v in self.variables:
            shape = tuple(self.cards[p] for p in self.parents[v]) + (self.cards[v],)
            t = np.asarray(self.cpts[v], dtype=float)
            if t.shape != shape:
                raise ValueError(f"CPT of {v!r} has shape {t.shape}, expected {shape}")
            if np.any(t < -1e-12) or np.max(np.abs(t.sum(axis=-1) - 1)) > 1e-9:
                raise ValueError(f"CPT rows of {v!r} must be distributions")
        # Kahn's algorithm, kept local so the oracle has no graph-library dependency
        indeg = {v: len(self.parents[v]) for v in self.variables}
        ready = [v for v in self.variables if indeg[v] == 0]
        seen = 0
        while ready:
            v = ready.pop()
            seen += 1
            for w in self.variables:
                if v in self.parents[w]:
                    indeg[w] -= 1
                    if indeg[w] == 0:
                        ready.append(w)
        if seen != len(self.variables):
            raise ValueError("parent structure has a directed cycle")


def enumerate_joint(bn: ClassicalBn, cap: int = CLASSICAL_CAP) -> np.ndarray:
    """Full joint table, axes in ``bn.variables`` order."""
    cards = [bn.cards[v] for v in bn.variables]
    total = int(np.prod(cards)) if cards else 1
    if total > cap:
        raise DimensionCapError(f"outcome space {total} exceeds the cap {cap}")
    pos = {v: k for k, v in enumerate(bn.variables)}
    out = np.zeros(cards)
    for x in itertools.product(*[range(c) for c in cards]):
        p = 1.0
        for v in bn.variables:
            idx = tuple(x[pos[u]] for u in bn.parents[v]) + (x[pos[v]],)
            p *= bn.cpts[v][idx]
        out[x] = p
    return out


def do_classical(bn: ClassicalBn, variable: str, value: int) -> ClassicalBn:
    """Cut the variable from its parents and fix it to ``value``."""
    if variable not in bn.cards:
        raise KeyError(f"unknown variable {variable!r}")
    if not 0 <= value < bn.cards[variable]:
        raise ValueError(f"value {value} out of range for {variable!r}")
    parents = dict(bn.parents)
    cpts = dict(bn.cpts)
    parents[variable] = ()
    point = np.zeros(bn.cards[variable])
    point[value] = 1.0
    cpts[variable] = point
    return ClassicalBn(bn.variables, dict(bn.cards), parents, cpts)


def marginal_table(bn: ClassicalBn, table: np.ndarray, keep) -> np.ndarray:
    axes = tuple(k for k, v in enumerate(bn.variables) if v not in keep)
    return table.sum(axis=axes)


# ---------------------------------------------------------------------------
# diagonal networks


def _is_diag(m: np.ndarray, tol: float) -> bool:
    return bool(np.max(np.abs(m - np.diag(np.diag(m)))) <= tol)


def _chain_cpts(probs: np.ndarray, members, cards, given, gcards, cpts, parents):
    """Chain-rule factorization of ``probs[given..., members...]``."""
    k0 = len(given)
    for j, m in enumerate(members):
        # marginal over members after j
        t = probs.sum(axis=tuple(range(k0 + j + 1, k0 + len(members))))
        denom = t.sum(axis=-1, keepdims=True)
        with np.errstate(invalid="ignore", divide="ignore"):
            cond = np.where(denom > 1e-15, t / np.where(denom > 1e-15, denom, 1.0), 1.0 / cards[j])
        parents[m] = tuple(given) + tuple(members[:j])
        cpts[m] = cond


def diagonal_to_cbn(q: QuantumCausalNetwork, tol: float = 1e-9) -> ClassicalBn:
    """Classical network over computational-basis outcomes of a diagonal network.

    Multi-member CN-sets are factored by the chain rule in sorted member
    order; child CPTs come from probing the channels on computational basis
    inputs.
    """
    g = q.graph
    cards = dict(g.dims)
    parents, cpts = {}, {}
    for members, ld in q.locals.items():
        mcards = [cards[m] for m in members]
        if ld.is_root:
            for k, c in enumerate(ld.components):
                if not _is_diag(c, tol):
                    raise NetworkError(f"root component {k} of {ld.target.label} is not diagonal")
            p = np.real(np.diag(sum(ld.components))).reshape(mcards)
            _chain_cpts(p, list(members), mcards, [], [], cpts, parents)
        else:
            w = list(ld.target.parents)
            wcards = [cards[x] for x in w]
            nin = int(np.prod(wcards))
            table = np.zeros(wcards + mcards)
            for idx in range(nin):
                e = np.zeros((nin, nin), dtype=complex)
                e[idx, idx] = 1.0
                acc = 0
                for k, op in enumerate(ld.components):
                    out = op.apply_matrix(e)
                    if not _is_diag(out, tol):
                        raise NetworkError(f"channel component {k} of {ld.target.label} "
                                           "maps a diagonal input to a non-diagonal output")
                    acc = acc + out
                table[np.unravel_index(idx, wcards)] = np.real(np.diag(acc)).reshape(mcards)
            _chain_cpts(table, list(members), mcards, w, wcards, cpts, parents)
    return ClassicalBn(tuple(g.ids), cards, parents, cpts)


# ---------------------------------------------------------------------------
# path-enumeration joint


def _eigen_pieces(m: np.ndarray, tol: float = 1e-12) -> list:
    """``(weight, vector)`` pairs; degenerate eigenspaces are spanned by the
    normalized projections of the computational basis vectors, taken in order."""
    m = (m + m.conj().T) / 2
    w, v = np.linalg.eigh(m)
    out = []
    used = [False] * len(w)
    for a in range(len(w)):
        if used[a]:
            continue
        group = [b for b in range(len(w)) if not used[b] and abs(w[b] - w[a]) < 1e-8]
        for b in group:
            used[b] = True
        lam = float(np.mean(w[group]))
        if lam < tol:
            continue
        vs = v[:, group]
        proj = vs @ vs.conj().T
        basis = []
        for j in range(m.shape[0]):
            u = proj[:, j].copy()
            for b in basis:
                u = u - np.vdot(b, u) * b
            if np.linalg.norm(u) > 1e-6:
                basis.append(u / np.linalg.norm(u))
            if len(basis) == len(group):
                break
        for u in basis:
            out.append((float(np.real(np.vdot(u, m @ u))), u))
    return [(w, u) for w, u in out if w >= tol]


def _amplitude_product(blocks, names, order, dims):
    """Vector over ``order`` whose amplitudes multiply the per-block amplitudes.

    ``blocks`` is a list of (member names, vector); explicit loops over all
    index tuples replace any reshape/transpose bookkeeping.
    """
    total = int(np.prod([dims[n] for n in order])) if order else 1
    out = np.zeros(total, dtype=complex)
    for flat, idx in enumerate(itertools.product(*[range(dims[n]) for n in order])):
        val = dict(zip(order, idx))
        amp = 1.0 + 0j
        for members, vec in blocks:
            sub = 0
            for mname in members:
                sub = sub * dims[mname] + val[mname]
            amp *= vec[sub]
        out[flat] = amp
    return out


def brute_force_joint(q: QuantumCausalNetwork, aggregate: bool = True,
                      cap: int = QUANTUM_CAP, tol: float = 1e-9) -> JointState:
    """Joint state by naive recursion over every mixture path."""
    dims = dict(q.graph.dims)
    nodes = tuple(sorted(dims))
    total_dim = int(np.prod([dims[n] for n in nodes]))
    if total_dim > cap:
        raise DimensionCapError(f"joint dimension {total_dim} exceeds the cap {cap}")
    # any order in which parents come first
    remaining = list(q.locals)
    order = []
    while remaining:
        for key in sorted(remaining):
            ld = q.locals[key]
            if all(any(p in done for done in order) for p in ld.target.parents):
                order.append(key)
                remaining.remove(key)
                break
        else:
            raise NetworkError("CN-sets are cyclically ordered")

    def components(ld):
        if not aggregate:
            return list(ld.components)
        if ld.is_root:
            return [sum(ld.components)]
        return [None]  # marker: apply every component and add

    def apply_child(ld, comp, rho):
        if comp is None:
            return sum(op.apply_matrix(rho) for op in ld.components)
        return comp.apply_matrix(rho)

    paths = []

    def rec(k, chosen, weight):
        if k == len(order):
            paths.append((weight, dict(chosen)))
            return
        key = order[k]
        ld = q.locals[key]
        for c in components(ld):
            if ld.is_root:
                t = float(np.real(np.trace(c)))
                if t <= 1e-12:
                    continue
                for th, v in _eigen_pieces(c / t):
                    chosen[key] = v
                    rec(k + 1, chosen, weight * t * th)
            else:
                w = list(ld.target.parents)
                blocks = [(mk, chosen[mk]) for mk in order[:k] if any(p in mk for p in w)]
                omega = _amplitude_product(blocks, w, w, dims)
                out = apply_child(ld, c, np.outer(omega, omega.conj()))
                p = float(np.real(np.trace(out)))
                if p <= 1e-12:
                    continue
                for th, v in _eigen_pieces(out / p):
                    chosen[key] = v
                    rec(k + 1, chosen, weight * p * th)
            chosen.pop(key, None)

    rec(0, {}, 1.0)
    z = sum(w for w, _ in paths)
    if z <= tol:
        raise ZeroProbabilityError("zero total path weight")
    op = np.zeros((total_dim, total_dim), dtype=complex)
    mixture = []
    for w, chosen in paths:
        vec = _amplitude_product([(k, chosen[k]) for k in order], nodes, nodes, dims)
        op += (w / z) * np.outer(vec, vec.conj())
        mixture.append(MixtureComponent(w / z, vec, ()))
    return JointState(DensityOperator(op, tuple(dims[n] for n in nodes)), nodes,
                      tuple(dims[n] for n in nodes), tuple(mixture), None)
