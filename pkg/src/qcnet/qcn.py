"""Quantum causal networks: local distributions, respects-the-graph checks,
joint-state construction and marginals.

Conventions
-----------
* The joint operator acts on the tensor product of every node space with
  factors in sorted node-id order.
* CN-set members are sorted; a child's input space is the tensor product of
  all its parents (influencing and non-influencing) in sorted node-id order.
* Root local distributions hold PSD operators, child local distributions hold
  :class:`~qcnet.qop.QuantumOperation` objects.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from . import linalg as la
from .errors import (DimensionCapError, DimensionError, InvalidOperationError,
                     NetworkError, ZeroProbabilityError)
from .qop import (QuantumOperation, canonical_fiducial_set, is_trace_preserving,
                  preparation, sum_operations)
from .qstate import DensityOperator, random_unitary
from .sag import CnSet, Sag, cn_topological_order

# eigenvalues below this are dropped when splitting a state into mixture components
SPLIT_TOL = 1e-12


# ---------------------------------------------------------------------------
# local distributions


@dataclass(frozen=True, eq=False)
class LocalDistribution:
    """Finite list of components attached to one CN-set.

    Root components are PSD operators on the members' space whose sum is a
    normalized state. Child components are operations from the parent space
    to the members' space whose sum is trace preserving. ``subnormalized``
    relaxes both sums to "at most one"; such distributions arise when an
    observation conditions a CN-set and the joint is renormalized afterwards.
    """

    target: CnSet
    components: tuple
    member_dims: tuple
    parent_dims: tuple = ()
    subnormalized: bool = False
    tol: float = field(default=la.DEFAULT_TOL, repr=False)

    def __post_init__(self):
        mdims = tuple(int(d) for d in self.member_dims)
        pdims = tuple(int(d) for d in self.parent_dims)
        if len(mdims) != len(self.target.members):
            raise DimensionError("member_dims must list one dimension per member")
        if len(pdims) != len(self.target.parents):
            raise DimensionError("parent_dims must list one dimension per parent")
        comps = tuple(self.components)
        if not comps:
            raise NetworkError(f"local distribution for {self.target.label} has no components")
        n = la.dim_product(mdims)
        if self.target.is_root:
            frozen = []
            for k, c in enumerate(comps):
                m = c.matrix if isinstance(c, DensityOperator) else la.as_matrix(c)
                if m.shape != (n, n):
                    raise DimensionError(f"root component {k} has shape {m.shape}, expected {(n, n)}")
                if not la.is_psd(m, self.tol):
                    raise InvalidOperationError(f"root component {k} is not positive semidefinite")
                frozen.append(la.frozen(la.hermitian_part(m)))
            comps = tuple(frozen)
            total = sum(float(np.real(np.trace(m))) for m in comps)
            if self.subnormalized:
                if total > 1 + self.tol or total <= 0:
                    raise InvalidOperationError(f"root components have total trace {total}")
            elif abs(total - 1) > self.tol:
                raise InvalidOperationError(
                    f"root components of {self.target.label} sum to trace {total:.12g}, not 1")
        else:
            for k, op in enumerate(comps):
                if not isinstance(op, QuantumOperation):
                    raise InvalidOperationError(f"child component {k} is not a QuantumOperation")
                if op.in_dims != pdims or op.out_dims != mdims:
                    raise DimensionError(
                        f"child component {k} maps {op.in_dims} -> {op.out_dims}, "
                        f"expected {pdims} -> {mdims}")
            total = sum_operations(comps)  # raises if the sum increases trace
            if not self.subnormalized and not is_trace_preserving(total, max(self.tol, 1e-9)):
                raise InvalidOperationError(
                    f"channel components of {self.target.label} do not sum to a trace-preserving map")
        object.__setattr__(self, "components", comps)
        object.__setattr__(self, "member_dims", mdims)
        object.__setattr__(self, "parent_dims", pdims)

    @classmethod
    def root(cls, target: CnSet, components, member_dims, **kw) -> "LocalDistribution":
        return cls(target, tuple(components), tuple(member_dims), (), **kw)

    @classmethod
    def child(cls, target: CnSet, components, member_dims, parent_dims, **kw) -> "LocalDistribution":
        return cls(target, tuple(components), tuple(member_dims), tuple(parent_dims), **kw)

    @property
    def kind(self) -> str:
        return self.target.kind

    @property
    def is_root(self) -> bool:
        return self.target.is_root

    @property
    def deterministic(self) -> bool:
        return len(self.components) == 1

    @property
    def dim(self) -> int:
        return la.dim_product(self.member_dims)

    def weights(self) -> list[float]:
        """Traces of root components."""
        if not self.is_root:
            raise NetworkError("weights are defined for root distributions only")
        return [float(np.real(np.trace(m))) for m in self.components]

    def aggregate(self):
        """Summed state (root) or summed operation (child)."""
        if self.is_root:
            return sum(self.components)
        return sum_operations(self.components)

    def operations(self) -> tuple:
        """Components as operations; roots become preparations from the trivial space."""
        if self.is_root:
            return tuple(preparation(m, self.member_dims) for m in self.components)
        return self.components

    def collapsed(self) -> "LocalDistribution":
        """Single-component version holding the aggregate."""
        return LocalDistribution(self.target, (self.aggregate(),), self.member_dims,
                                 self.parent_dims, self.subnormalized, self.tol)


# ---------------------------------------------------------------------------
# respects-the-graph checks


@dataclass(frozen=True)
class CheckPolicy:
    """Canonical fiducial set plus ``samples`` Haar-conjugated sets drawn from ``seed``."""

    samples: int = 8
    seed: int = 0
    tol: float = 1e-7


DEFAULT_POLICY = CheckPolicy()


@dataclass(frozen=True)
class RespectsReport:
    ok: bool
    target: str
    checked: int
    violations: tuple = ()

    def __bool__(self):
        return self.ok


def _fiducial_rounds(nodes: Sequence[str], dims: dict, policy: CheckPolicy) -> list[dict]:
    """Per-round fiducial sets for each node; round 0 is canonical."""
    rng = np.random.default_rng(policy.seed)
    rounds = [{n: canonical_fiducial_set(dims[n]) for n in nodes}]
    for _ in range(policy.samples):
        rounds.append({n: canonical_fiducial_set(dims[n]).conjugated(random_unitary(dims[n], rng))
                       for n in nodes})
    return rounds


def fiducial_bases(fs) -> list[np.ndarray]:
    """Orthonormal bases (as unitary columns) covering every fiducial vector.

    The first ``n`` vectors of a canonical or conjugated set already form a
    basis; every later vector is completed to a basis by Gram-Schmidt against
    that first basis.
    """
    n = fs.dim
    first = np.array(fs.vectors[:n]).T
    bases = [first]
    for v in fs.vectors[n:]:
        cols = [v]
        for j in range(n):
            w = first[:, j].copy()
            for c in cols:
                w = w - (c.conj() @ w) * c
            nw = np.linalg.norm(w)
            if nw > 1e-8:
                cols.append(w / nw)
            if len(cols) == n:
                break
        bases.append(np.array(cols).T)
    return bases


def _basis_combos(nodes, fsets) -> tuple[list, np.ndarray]:
    per = [fiducial_bases(fsets[n]) for n in nodes]
    idx = list(itertools.product(*[range(len(b)) for b in per]))
    us = np.array([la.tensor(*[per[k][c[k]] for k in range(len(nodes))]) for c in idx])
    return idx, us


def _conditional_violations(probs: np.ndarray, dims, neighbors: list, own_ids: list,
                            tol: float) -> list:
    """Nodes whose conditionals disagree inside a group; returns ``(node, combo)`` pairs.

    ``probs`` has shape (inputs, combos, outcomes). For node ``i`` the
    conditional of its outcome given every other outcome is grouped by
    (``own_ids[i][input]``, combo, neighbor outcomes); all conditionals in a
    group must agree within ``tol``. Conditioning events with probability at
    most ``tol`` are skipped.
    """
    n_in, n_c = probs.shape[:2]
    k = len(dims)
    t = probs.reshape((n_in, n_c) + tuple(dims))
    out = []
    for i in range(k):
        others = [j for j in range(k) if j != i]
        moved = np.moveaxis(t, 2 + i, -1).reshape(n_in, n_c, -1, dims[i])
        marg = moved.sum(axis=-1)
        valid = marg > tol
        if not valid.any():
            continue
        cond = moved[valid] / marg[valid][:, None]
        # neighbor outcome id of every conditioning event
        grid = np.indices([dims[j] for j in others]).reshape(len(others), -1) if others \
            else np.zeros((0, 1), dtype=int)
        nb_dims = [dims[j] for j in neighbors[i]]
        rows = [grid[others.index(j)] for j in neighbors[i]]
        nb_id = np.ravel_multi_index(rows, nb_dims) if rows else np.zeros(grid.shape[1], dtype=int)
        n_nb = int(np.prod(nb_dims)) if nb_dims else 1
        group = (np.asarray(own_ids[i])[:, None, None] * n_c
                 + np.arange(n_c)[None, :, None]) * n_nb + nb_id[None, None, :]
        g = group[valid]
        order = np.argsort(g, kind="stable")
        g, cond = g[order], cond[order]
        starts = np.flatnonzero(np.r_[True, g[1:] != g[:-1]])
        spread = (np.maximum.reduceat(cond, starts) - np.minimum.reduceat(cond, starts)).max(axis=1)
        for s in starts[spread > tol]:
            out.append((i, int(g[s] // n_nb) % n_c))
    return out


def _neighbor_index(members, g: Sag) -> list[list[int]]:
    pos = {m: k for k, m in enumerate(members)}
    return [sorted(pos[x] for x in g.neighbors(m) if x in pos) for m in members]


def respects_root(ld: LocalDistribution, g: Sag, policy: CheckPolicy = DEFAULT_POLICY) -> RespectsReport:
    """Each member's fiducial outcome, given all the others, depends only on its neighbors."""
    if not ld.is_root:
        raise NetworkError("respects_root needs a root local distribution")
    members = ld.target.members
    dims = {m: d for m, d in zip(members, ld.member_dims)}
    for m in members:
        if g.dims.get(m) != dims[m]:
            raise DimensionError(f"node {m!r} dimension disagrees with the graph")
    sigma = ld.aggregate()
    tr = float(np.real(np.trace(sigma)))
    if tr <= ld.tol:
        raise ZeroProbabilityError("root distribution has zero total weight")
    sigma = sigma / tr
    nbrs = _neighbor_index(members, g)
    own = [np.zeros(1, dtype=int)] * len(members)
    violations, checked = [], 0
    for r, fsets in enumerate(_fiducial_rounds(members, dims, policy)):
        idx, us = _basis_combos(members, fsets)
        probs = np.real(np.einsum("cjx,jk,ckx->cx", us.conj(), sigma, us))
        checked += len(idx)
        bad = _conditional_violations(probs[None], ld.member_dims, nbrs, own, policy.tol)
        violations.extend(f"round {r}: {members[i]} depends on a non-neighbor (bases {idx[c]})"
                          for i, c in bad)
    return RespectsReport(not violations, ld.target.label, checked, tuple(dict.fromkeys(violations)))


def respects_child(ld: LocalDistribution, g: Sag, policy: CheckPolicy = DEFAULT_POLICY) -> RespectsReport:
    """Each member's fiducial outcome depends only on its neighbors and its own parents' inputs."""
    if ld.is_root:
        raise NetworkError("respects_child needs a child local distribution")
    members, parents = ld.target.members, ld.target.parents
    mdims = {m: d for m, d in zip(members, ld.member_dims)}
    pdims = {p: d for p, d in zip(parents, ld.parent_dims)}
    for n, d in list(mdims.items()) + list(pdims.items()):
        if g.dims.get(n) != d:
            raise DimensionError(f"node {n!r} dimension disagrees with the graph")
    own_parents = []
    for m in members:
        ps = set(g.parents(m))
        own_parents.append([k for k, p in enumerate(parents) if p in ps])
    nbrs = _neighbor_index(members, g)
    op = ld.aggregate()
    violations, checked = [], 0
    for r, fsets in enumerate(_fiducial_rounds(tuple(members) + tuple(parents), {**mdims, **pdims}, policy)):
        idx, us = _basis_combos(members, fsets)
        inputs, states = [], []
        for inp in itertools.product(*[range(len(fsets[p])) for p in parents]):
            rho = op.apply_matrix(la.tensor(*[fsets[p].projectors[k] for p, k in zip(parents, inp)]))
            tr = float(np.real(np.trace(rho)))
            if tr > ld.tol:
                inputs.append(inp)
                states.append(rho / tr)
        if not inputs:
            continue
        probs = np.real(np.einsum("cjx,ijk,ckx->icx", us.conj(), np.array(states), us))
        checked += len(inputs) * len(idx)
        own = []
        for ks in own_parents:
            sub = [tuple(inp[k] for k in ks) for inp in inputs]
            ids = {s: n for n, s in enumerate(dict.fromkeys(sub))}
            own.append(np.array([ids[s] for s in sub], dtype=int))
        bad = _conditional_violations(probs, ld.member_dims, nbrs, own, policy.tol)
        violations.extend(f"round {r}: {members[i]} depends on a non-parent input or non-neighbor"
                          for i, _ in bad)
    return RespectsReport(not violations, ld.target.label, checked, tuple(dict.fromkeys(violations)))


def respects(ld: LocalDistribution, g: Sag, policy: CheckPolicy = DEFAULT_POLICY) -> RespectsReport:
    return respects_root(ld, g, policy) if ld.is_root else respects_child(ld, g, policy)


# ---------------------------------------------------------------------------
# networks


@dataclass(frozen=True, eq=False)
class QuantumCausalNetwork:
    """A valid SAG with one local distribution per CN-set.

    ``locals`` maps a CN-set's sorted member tuple to its distribution. When
    ``policy`` is given every distribution is checked against the graph; pass
    ``policy=None`` to skip the (randomized) respects checks.
    """

    graph: Sag
    locals: dict
    policy: CheckPolicy | None = field(default=DEFAULT_POLICY, repr=False)

    def __post_init__(self):
        sets = {c.members: c for c in cn_topological_order(self.graph).order}
        locs = {tuple(k): v for k, v in dict(self.locals).items()}
        if set(locs) != set(sets):
            missing = sorted(set(sets) - set(locs))
            extra = sorted(set(locs) - set(sets))
            raise NetworkError(f"local distributions do not match CN-sets (missing {missing}, extra {extra})")
        for key, ld in locs.items():
            cn = sets[key]
            if ld.target != cn:
                raise NetworkError(f"local distribution target {ld.target} != CN-set {cn}")
            if ld.member_dims != tuple(self.graph.dims[m] for m in cn.members):
                raise DimensionError(f"member dimensions of {cn.label} disagree with the graph")
            if ld.parent_dims != tuple(self.graph.dims[p] for p in cn.parents):
                raise DimensionError(f"parent dimensions of {cn.label} disagree with the graph")
        object.__setattr__(self, "locals", {k: locs[k] for k in sorted(locs)})
        if self.policy is not None:
            for ld in self.locals.values():
                rep = respects(ld, self.graph, self.policy)
                if not rep.ok:
                    raise NetworkError(f"local distribution for {ld.target.label} does not respect "
                                       f"the graph: {rep.violations[0]}")

    @property
    def spaces(self) -> dict:
        return dict(self.graph.dims)

    @property
    def cn_sets(self) -> list[CnSet]:
        return [ld.target for ld in self.locals.values()]

    def local(self, node_or_members) -> LocalDistribution:
        """Local distribution of a CN-set given by its members or by any member."""
        if isinstance(node_or_members, str):
            for k, ld in self.locals.items():
                if node_or_members in k:
                    return ld
            raise KeyError(f"unknown node {node_or_members!r}")
        return self.locals[tuple(sorted(node_or_members))]

    @property
    def deterministic(self) -> bool:
        return all(ld.deterministic for ld in self.locals.values())

    def total_dim(self) -> int:
        return la.dim_product(self.graph.dims[n] for n in self.graph.ids)


def parameter_count(q: QuantumCausalNetwork, cn: CnSet) -> int:
    """Real parameters of a generic local distribution for ``cn``."""
    n = la.dim_product(q.graph.dims[m] for m in cn.members)
    if cn.is_root:
        return n * n - 1
    m = la.dim_product(q.graph.dims[p] for p in cn.parents)
    return n * n * (m * m - 1)


# ---------------------------------------------------------------------------
# factor bookkeeping


def permute_vector(v: np.ndarray, dims: Sequence[int], perm: Sequence[int]) -> np.ndarray:
    """Reorder the tensor factors of a vector; new factor ``k`` is old ``perm[k]``."""
    dims = [int(d) for d in dims]
    if not dims:
        return np.asarray(v).reshape(-1)
    return np.asarray(v).reshape(dims).transpose(list(perm)).reshape(-1)


def order_perm(current: Sequence[str], target: Sequence[str]) -> list[int]:
    """Permutation taking factors labelled ``current`` into the order ``target``."""
    pos = {n: k for k, n in enumerate(current)}
    return [pos[n] for n in target]


def restrict_input(op: QuantumOperation, names: Sequence[str], fixed: dict) -> tuple[QuantumOperation, tuple]:
    """Plug constant states into some input factors of ``op``.

    ``names`` labels the input factors. ``fixed`` maps a factor name, or a
    tuple of names, to a density matrix on those factors (tuple order).
    Returns the restricted operation and the labels of its remaining inputs,
    original relative order kept.
    """
    names = list(names)
    dims = list(op.in_dims)
    if len(names) != len(dims):
        raise DimensionError("one name per input factor is required")
    groups = [((k,) if isinstance(k, str) else tuple(k), v) for k, v in fixed.items()]
    groups = [(k, v) for k, v in groups if k]
    fixed_names = [n for k, _ in groups for n in k]
    if not fixed_names:
        return op, tuple(names)
    if len(set(fixed_names)) != len(fixed_names) or not set(fixed_names) <= set(names):
        raise DimensionError(f"fixed factors {fixed_names} are not distinct inputs of {names}")
    rest = [n for n in names if n not in fixed_names]
    fdims = [dims[names.index(n)] for n in fixed_names]
    rdims = [dims[names.index(n)] for n in rest]
    state = la.tensor(*[v for _, v in groups])
    if state.shape[0] != la.dim_product(fdims):
        raise DimensionError("fixed state dimension does not match its input factors")
    dec = la.spectral_decompose(la.hermitian_part(state), SPLIT_TOL)
    perm = order_perm(fixed_names + rest, names)
    nr = la.dim_product(rdims)
    embeds = []
    for w, v in zip(dec.weights, dec.vectors):
        e = la.tensor(np.sqrt(w) * v.reshape(-1, 1), np.eye(nr))
        embeds.append(la.permute_factors(e, fdims + rdims, perm, col_dims=[nr], col_perm=[0]))
    if not embeds:
        embeds = [np.zeros((op.in_dim, nr))]
    ks = tuple(k @ e for k in op.kraus for e in embeds)
    return QuantumOperation(ks, tuple(rdims), op.out_dims, op.tol), tuple(rest)


def reorder_operation(op: QuantumOperation, in_names: Sequence[str], in_order: Sequence[str],
                      out_names: Sequence[str] | None = None,
                      out_order: Sequence[str] | None = None) -> QuantumOperation:
    """Relabel input (and optionally output) factor order of ``op``."""
    in_perm = order_perm(in_names, in_order)
    in_dims = [op.in_dims[k] for k in in_perm]
    if out_names is None:
        out_perm, out_dims = list(range(len(op.out_dims))), list(op.out_dims)
    else:
        out_perm = order_perm(out_names, out_order)
        out_dims = [op.out_dims[k] for k in out_perm]
    ks = [la.permute_factors(k, list(op.out_dims) or [1], out_perm or [0],
                             col_dims=list(op.in_dims) or [1], col_perm=in_perm or [0])
          for k in op.kraus]
    return QuantumOperation(tuple(ks), tuple(in_dims), tuple(out_dims), op.tol)


# ---------------------------------------------------------------------------
# joint state


@dataclass(frozen=True, eq=False)
class MixtureComponent:
    """One path through the network: a product of rank-1 CN-set projectors."""

    weight: float
    vector: np.ndarray
    path: tuple  # ((cn label, (component, spectral index, vector id)), ...) in topological order

    @property
    def projector(self) -> np.ndarray:
        return np.outer(self.vector, self.vector.conj())


@dataclass(frozen=True, eq=False)
class ClassicalModel:
    """Graphical model over mixture-component indices.

    Variable ``k`` is the CN-set ``variables[k]``; its values are triples
    ``(component index, spectral index, vector id)``, where the vector id
    tells apart the distinct rank-1 states a component can produce. ``tables[k]`` maps the tuple of its
    parent CN-sets' values to ``{value: weight}``. Weights of a path are the
    product of table entries divided by ``normalizer``.
    """

    variables: tuple
    parents: tuple
    tables: tuple
    normalizer: float

    def path_weight(self, values: Sequence) -> float:
        w = 1.0
        for k, v in enumerate(values):
            key = tuple(values[p] for p in self.parents[k])
            w *= self.tables[k].get(key, {}).get(v, 0.0)
        return w / self.normalizer


@dataclass(frozen=True, eq=False)
class JointState:
    operator: DensityOperator
    nodes: tuple
    dims: tuple
    mixture: tuple
    classical_model: ClassicalModel

    def reconstruct(self) -> np.ndarray:
        return sum(c.weight * c.projector for c in self.mixture)


def _check_cap(q: QuantumCausalNetwork, dim_cap: int) -> None:
    total = q.total_dim()
    if total > dim_cap:
        raise DimensionCapError(f"joint dimension {total} exceeds the cap {dim_cap}")


def _split(m: np.ndarray, tol: float) -> list[tuple[float, np.ndarray]]:
    """Spectral pieces ``(weight, unit vector)`` of a PSD matrix."""
    dec = la.spectral_decompose(la.hermitian_part(m), tol)
    return list(zip(dec.weights, dec.vectors))


def build_joint(q: QuantumCausalNetwork, *, aggregate: bool = True,
                dim_cap: int = la.DEFAULT_DIM_CAP, tol: float = la.DEFAULT_TOL) -> JointState:
    """Joint state of the undisturbed network by forward propagation.

    CN-sets are processed in topological order. By default each root
    contributes the spectral pieces ``(theta, Q)`` of its summed state and
    each child, given the rank-1 pieces chosen for its parents, the spectral
    pieces ``(rho, R)`` of its summed channel applied to their product. Path
    weights multiply along the way and the joint is their weighted sum of
    product projectors.

    With ``aggregate=False`` components are kept apart: a root contributes
    the pieces of each ``Delta_i / Tr(Delta_i)`` with weight ``Tr(Delta_i)``
    and a child those of ``Delta_i(omega) / Tr(Delta_i(omega))``. This is the
    per-component mixture whose weights follow the graph; its operator equals
    the default one only when root components commute. For single-component
    distributions both modes coincide. Path weights are renormalized at the
    end, which conditions on observations recorded by subnormalized
    distributions.
    """
    _check_cap(q, dim_cap)
    order = cn_topological_order(q.graph).order
    locs = {cn.members: (q.locals[cn.members].collapsed() if aggregate else q.locals[cn.members])
            for cn in order}
    pos = {cn.members: k for k, cn in enumerate(order)}
    labels = tuple(cn.label for cn in order)
    parent_sets = []
    for cn in order:
        ps = sorted({c.members for c in order for p in cn.parents if p in c.members}, key=lambda m: pos[m])
        parent_sets.append(tuple(pos[m] for m in ps))

    cache: dict = {}
    # distinct value vectors per CN-set; a value is (component, spectral index, vector id)
    registry: list[list] = [[] for _ in order]

    def vector_id(k: int, v: np.ndarray) -> int:
        for r, u in enumerate(registry[k]):
            if abs(abs(np.vdot(u, v)) - 1) < 1e-12 and np.max(np.abs(u - v)) < 1e-9:
                return r
        registry[k].append(v)
        return len(registry[k]) - 1

    def pieces(k: int, parent_vals: tuple) -> list:
        key = (k, parent_vals)
        if key in cache:
            return cache[key]
        cn = order[k]
        ld = locs[cn.members]
        out = []
        if cn.is_root:
            for i, m in enumerate(ld.components):
                t = float(np.real(np.trace(m)))
                if t <= SPLIT_TOL:
                    continue
                for a, (th, v) in enumerate(_split(m / t, SPLIT_TOL)):
                    out.append(((i, a, vector_id(k, v)), t * th, v))
        else:
            names = [n for p in parent_sets[k] for n in order[p].members]
            dims = [q.graph.dims[n] for n in names]
            parent_vecs = [registry[p][val[2]] for p, val in zip(parent_sets[k], parent_vals)]
            omega = permute_vector(la.tensor(*[v.reshape(-1, 1) for v in parent_vecs]).ravel(),
                                   dims, order_perm(names, cn.parents))
            rho = np.outer(omega, omega.conj())
            for i, op in enumerate(ld.components):
                m = op.apply_matrix(rho)
                p = float(np.real(np.trace(m)))
                if p <= SPLIT_TOL:
                    continue
                for a, (th, v) in enumerate(_split(m / p, SPLIT_TOL)):
                    out.append(((i, a, vector_id(k, v)), p * th, v))
        cache[key] = out
        return out

    paths = [((), 1.0, ())]  # (values, weight, vectors)
    for k in range(len(order)):
        nxt = []
        for vals, w, vecs in paths:
            pv = tuple(vals[p] for p in parent_sets[k])
            for val, pw, v in pieces(k, pv):
                nxt.append((vals + (val,), w * pw, vecs + (v,)))
        paths = nxt

    z = sum(w for _, w, _ in paths)
    if z <= tol:
        raise ZeroProbabilityError("the network assigns zero total probability to its observations")

    names = [n for cn in order for n in cn.members]
    nodes = q.graph.ids
    dims = tuple(q.graph.dims[n] for n in nodes)
    perm = order_perm(names, nodes)
    ndims = [q.graph.dims[n] for n in names]
    mixture = []
    total = np.zeros((la.dim_product(dims),) * 2, dtype=np.complex128)
    for vals, w, vecs in paths:
        vec = permute_vector(la.tensor(*[v.reshape(-1, 1) for v in vecs]).ravel(), ndims, perm)
        vec.setflags(write=False)
        wn = w / z
        total += wn * np.outer(vec, vec.conj())
        mixture.append(MixtureComponent(wn, vec, tuple(zip(labels, vals))))

    tables = []
    for k in range(len(order)):
        tab: dict = {}
        for (kk, pv), items in cache.items():
            if kk == k:
                tab[pv] = {val: w for val, w, _ in items}
        tables.append(tab)
    model = ClassicalModel(labels, tuple(parent_sets), tuple(tables), z)
    op = DensityOperator(total, dims, tol=max(tol, 1e-9))
    return JointState(op, nodes, dims, tuple(mixture), model)


def component_weights(js: JointState, members: Sequence[str]) -> dict:
    """Probability of each local-distribution component index of one CN-set."""
    label = "{" + ",".join(sorted(members)) + "}"
    out: dict = {}
    for c in js.mixture:
        for lab, (i, *_) in c.path:
            if lab == label:
                out[i] = out.get(i, 0.0) + c.weight
    if not out:
        raise KeyError(f"no CN-set {label}")
    return dict(sorted(out.items()))


def marginal(js: JointState, q: QuantumCausalNetwork | None, nodes: Iterable[str]) -> DensityOperator:
    """Reduced state of ``nodes`` (factors in sorted node-id order)."""
    nodes = sorted(set(nodes))
    if not nodes:
        raise ValueError("node set must be nonempty")
    for n in nodes:
        if n not in js.nodes:
            raise KeyError(f"unknown node {n!r}")
    keep = [js.nodes.index(n) for n in nodes]
    m = la.partial_trace(js.operator.matrix, js.dims, keep)
    return DensityOperator(m, tuple(js.dims[k] for k in keep), js.operator.tol)
