"""Interventions on quantum causal networks.

Two operators rewrite a network: a projective reduction at a target node
(``rd``) and local surgery setting a node to a chosen state (``do``). Both
return new networks; the input network is never modified.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import linalg as la
from .errors import DimensionError, InterventionError, QcnError, ZeroProbabilityError
from .qcn import (LocalDistribution, QuantumCausalNetwork, build_joint, marginal,
                  order_perm, restrict_input)
from .qop import QuantumOperation, compose, projector_channel
from .qstate import DensityOperator, ProjectionSet
from .sag import Sag, cn_partition, cn_topological_order

# outcome-tree branches below this path probability are not expanded
PRUNE_THRESHOLD = 1e-12
# tolerance for "this state factors across the given subsystems"
FACTOR_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class Intervention:
    """A reduction with rank-1 projectors on the target node, or a surgery
    setting the target to ``value``."""

    kind: str
    target: str
    projectors: ProjectionSet | None = None
    value: DensityOperator | None = None

    def __post_init__(self):
        if self.kind == "reduction":
            if not isinstance(self.projectors, ProjectionSet):
                raise InterventionError("a reduction needs a ProjectionSet")
            if any(r != 1 for r in self.projectors.ranks()):
                raise InterventionError("reduction projectors must be rank 1 on the target node")
        elif self.kind == "surgery":
            v = self.value
            if not isinstance(v, DensityOperator):
                v = DensityOperator(la.as_matrix(v))
                object.__setattr__(self, "value", v)
            if not v.is_normalized():
                raise InterventionError("surgery value must be a normalized state")
        else:
            raise InterventionError(f"unknown intervention kind {self.kind!r}")

    @classmethod
    def reduction(cls, target: str, projectors: ProjectionSet) -> "Intervention":
        return cls("reduction", target, projectors=projectors)

    @classmethod
    def surgery(cls, target: str, value) -> "Intervention":
        return cls("surgery", target, value=value)

    def describe(self) -> str:
        return f"{'rd' if self.kind == 'reduction' else 'do'}({self.target})"


@dataclass(frozen=True, eq=False)
class InterventionOutcome:
    probability: float
    network: QuantumCausalNetwork
    outcome_label: str


# ---------------------------------------------------------------------------
# helpers


def _cn_key(q: QuantumCausalNetwork, node: str) -> tuple:
    for k in q.locals:
        if node in k:
            return k
    raise KeyError(f"unknown node {node!r}")


def _embed(p: np.ndarray, members: Sequence[str], dims: Sequence[int], target: str) -> np.ndarray:
    """``I (x) p (x) I`` with ``p`` on the target's factor."""
    return la.tensor(*[p if m == target else np.eye(d) for m, d in zip(members, dims)])


def _reorder_matrix(m: np.ndarray, names: Sequence[str], dims: Sequence[int], order: Sequence[str]) -> np.ndarray:
    return la.permute_factors(m, list(dims), order_perm(names, order))


def _reduced(m: np.ndarray, names: Sequence[str], dims: Sequence[int], keep: Sequence[str]) -> np.ndarray:
    """Partial trace onto ``keep``, factors in the order of ``names``."""
    idx = [names.index(n) for n in keep]
    if len(idx) == len(names):
        return np.array(m)
    return la.partial_trace(m, dims, idx)


def _make_plug(q: QuantumCausalNetwork, js, fixed: dict):
    """Constant-state supplier for inputs that lose their connection.

    ``fixed`` maps node groups to states replacing the undisturbed ones;
    any other node takes its marginal from the undisturbed joint ``js``.
    """
    def plug(names: Sequence[str]) -> np.ndarray:
        names = list(names)
        parts, order = [], []
        for grp, st in fixed.items():
            hit = [n for n in grp if n in names]
            if hit:
                gd = [q.graph.dims[n] for n in grp]
                parts.append(_reduced(st, list(grp), gd, hit))
                order.extend(hit)
        other = [n for n in names if n not in order]
        if other:
            parts.append(marginal(js, q, other).matrix)
            order.extend(sorted(other))
        m = la.tensor(*parts)
        return _reorder_matrix(m, order, [q.graph.dims[n] for n in order], names)
    return plug


def _assemble(q: QuantumCausalNetwork, g_new: Sag, overrides: dict, plug) -> QuantumCausalNetwork:
    """Network on ``g_new``: overridden CN-sets take the given distributions,
    the rest keep their mechanisms with lost inputs plugged by constants."""
    locs = {}
    for cn in cn_partition(g_new):
        if cn.members in overrides:
            locs[cn.members] = overrides[cn.members]
            continue
        old = q.locals.get(cn.members)
        if old is None:
            raise InterventionError(f"CN-set {cn.label} has no mechanism to inherit")
        if old.target == cn:
            locs[cn.members] = old
            continue
        old_par, new_par = old.target.parents, cn.parents
        if not set(new_par) <= set(old_par):
            raise InterventionError(f"CN-set {cn.label} gained parents")
        removed = tuple(p for p in old_par if p not in new_par)
        fixed = {removed: plug(removed)} if removed else {}
        comps = [restrict_input(op, old_par, fixed)[0] for op in old.operations()]
        mdims = old.member_dims
        if cn.is_root:
            mats = [c.apply_matrix(np.ones((1, 1))) for c in comps]
            locs[cn.members] = LocalDistribution.root(cn, mats, mdims, subnormalized=old.subnormalized)
        else:
            locs[cn.members] = LocalDistribution.child(
                cn, comps, mdims, tuple(q.graph.dims[p] for p in new_par), subnormalized=old.subnormalized)
    return QuantumCausalNetwork(g_new, locs, policy=None)


def _split_root(members: Sequence[str], dims: Sequence[int], comps: list, pieces: list) -> dict:
    """Distribute root components over the new CN-sets inside ``members``.

    Every component must factor across the pieces. Pieces whose state is the
    same in every component get that single state; at most one piece may
    vary, and it inherits the component weights.
    """
    members = list(members)
    total = sum(float(np.real(np.trace(m))) for m in comps)
    comps = [m / total for m in comps]
    if len(pieces) == 1:
        return {pieces[0].members: comps}
    margs = []
    for m in comps:
        t = float(np.real(np.trace(m)))
        ms = [_reduced(m / t, members, dims, pc.members) for pc in pieces]
        order = [n for pc in pieces for n in pc.members]
        prod = _reorder_matrix(la.tensor(*ms), order, [dims[members.index(n)] for n in order], members)
        if la.max_abs_diff(prod, m / t) > FACTOR_TOL:
            raise InterventionError("the post-intervention state is correlated across systems that "
                                    "are no longer contemporaneous")
        margs.append((t, ms))
    out, varying = {}, []
    for k, pc in enumerate(pieces):
        ref = margs[0][1][k]
        if all(la.max_abs_diff(ms[k], ref) <= FACTOR_TOL for _, ms in margs):
            out[pc.members] = [ref]
        else:
            varying.append(k)
            out[pc.members] = [t * ms[k] for t, ms in margs]
    if len(varying) > 1:
        raise InterventionError("the post-intervention mixture correlates systems that are no longer "
                                "contemporaneous")
    return out


def _join_pieces(g_new: Sag, members, apart: str | None) -> Sag:
    """Chain the new CN-sets inside ``members`` (except ``apart``'s) with undirected edges."""
    heads = [c.members[0] for c in cn_partition(g_new)
             if set(c.members) <= set(members) and apart not in c.members]
    return g_new.with_undirected(zip(heads, heads[1:]))


def _root_overrides(g_new: Sag, members, dims, comps: list, apart: str | None = None) -> tuple[dict, dict, Sag]:
    """Root distributions (and their summed states) for the pieces of ``members`` in ``g_new``.

    When the components do not fit the split (correlated pieces), the pieces
    other than ``apart``'s are kept contemporaneous by chaining them with
    undirected edges; the possibly extended graph is returned.
    """
    for attempt in range(2):
        pieces = [c for c in cn_partition(g_new) if set(c.members) <= set(members)]
        try:
            split = _split_root(members, dims, comps, pieces)
            break
        except InterventionError:
            if attempt:
                raise
            g_new = _join_pieces(g_new, members, apart)
    overrides, states = {}, {}
    for pc in pieces:
        pd = tuple(g_new.dims[n] for n in pc.members)
        overrides[pc.members] = LocalDistribution.root(pc, split[pc.members], pd)
        states[pc.members] = sum(split[pc.members])
    return overrides, states, g_new


def _check_reduction(q: QuantumCausalNetwork, iv: Intervention) -> None:
    if iv.kind != "reduction":
        raise InterventionError("expected a reduction")
    if iv.target not in q.graph.dims:
        raise KeyError(f"unknown node {iv.target!r}")
    if iv.projectors.dim != q.graph.dims[iv.target]:
        raise DimensionError(f"projectors act on dimension {iv.projectors.dim}, "
                             f"node {iv.target!r} has dimension {q.graph.dims[iv.target]}")


# ---------------------------------------------------------------------------
# reductions


def rd_deterministic(q: QuantumCausalNetwork, iv: Intervention,
                     tol: float = la.DEFAULT_TOL) -> list[InterventionOutcome]:
    """Reduction at ``iv.target`` in a network whose distributions each have one component.

    Arcs entering the target's CN-set and undirected arcs at the target are
    removed. For each outcome with nonzero Born probability the CN-set takes
    the projected state of its undisturbed reduced operator; everything
    downstream follows by forward propagation.
    """
    if not q.deterministic:
        raise InterventionError("rd_deterministic needs every local distribution to have one component")
    _check_reduction(q, iv)
    key = _cn_key(q, iv.target)
    cn = q.locals[key].target
    dims = [q.graph.dims[m] for m in cn.members]
    js = build_joint(q, tol=tol)
    sigma = marginal(js, q, cn.members).matrix
    g_new = q.graph.without_edges(
        directed=[(p, m) for m in cn.members for p in q.graph.parents(m)],
        undirected=[(iv.target, n) for n in q.graph.neighbors(iv.target)])
    out = []
    for label, p in zip(iv.projectors.labels, iv.projectors.projectors):
        pe = _embed(p, cn.members, dims, iv.target)
        m = pe @ sigma @ pe
        prob = float(np.real(np.trace(m)))
        if prob <= tol:
            continue
        overrides, states, g_out = _root_overrides(g_new, cn.members, dims, [m / prob], iv.target)
        net = _assemble(q, g_out, overrides, _make_plug(q, js, states))
        out.append(InterventionOutcome(prob, net, label))
    return out


def single_valued(q: QuantumCausalNetwork) -> dict:
    """CN-sets whose distribution, and every ancestor's, has exactly one component."""
    sv = {}
    for cn in cn_topological_order(q.graph).order:
        ok = len(q.locals[cn.members].components) == 1
        for p in cn.parents:
            ok = ok and sv[_cn_key(q, p)]
        sv[cn.members] = ok
    return sv


def rd_general(q: QuantumCausalNetwork, iv: Intervention,
               tol: float = la.DEFAULT_TOL) -> list[InterventionOutcome]:
    """Reduction at ``iv.target`` in a general network.

    Only arcs from single-valued parents are removed, and undirected arcs at
    the target only when its own CN-set is single-valued. The CN-set's new
    components are the projected old components, each fed the undisturbed
    state of the disconnected parents. When arcs from multi-valued parents
    remain, the distribution is kept subnormalized so that building the joint
    conditions upstream components on the outcome (Bayes over Born
    likelihoods).
    """
    _check_reduction(q, iv)
    key = _cn_key(q, iv.target)
    ld = q.locals[key]
    cn = ld.target
    dims = [q.graph.dims[m] for m in cn.members]
    sv = single_valued(q)
    js = build_joint(q, tol=tol)
    sigma = marginal(js, q, cn.members).matrix
    g_new = q.graph.without_edges(
        directed=[(p, m) for m in cn.members for p in q.graph.parents(m) if sv[_cn_key(q, p)]],
        undirected=[(iv.target, n) for n in q.graph.neighbors(iv.target)] if sv[key] else [])
    new_sets = {c.members: c for c in cn_partition(g_new)}
    if sv[key]:
        new_par = ()
    else:
        new_par = new_sets[cn.members].parents
    removed = tuple(p for p in cn.parents if p not in new_par)
    fixed = {removed: marginal(js, q, removed).matrix} if removed else {}
    ops = [restrict_input(op, cn.parents, fixed)[0] for op in ld.operations()]
    out = []
    for label, p in zip(iv.projectors.labels, iv.projectors.projectors):
        pe = _embed(p, cn.members, dims, iv.target)
        prob = float(np.real(np.trace(pe @ sigma)))
        if prob <= tol:
            continue
        comps = [compose(projector_channel(pe, tuple(dims)), op) for op in ops]
        comps = [c for c in comps if not c.is_zero(1e-12)]
        if not new_par:
            mats = [c.apply_matrix(np.ones((1, 1))) for c in comps]
            mats = [m for m in mats if float(np.real(np.trace(m))) > 1e-14]
            if not mats:
                continue
            overrides, states, g_out = _root_overrides(g_new, cn.members, dims, mats, iv.target)
        else:
            g_out = g_new
            newcn = new_sets[cn.members]
            overrides = {cn.members: LocalDistribution.child(
                newcn, comps, tuple(dims), tuple(q.graph.dims[x] for x in new_par), subnormalized=True)}
            states = {}
        net = _assemble(q, g_out, overrides, _make_plug(q, js, states))
        out.append(InterventionOutcome(prob, net, label))
    return out


def reduce_network(q: QuantumCausalNetwork, iv: Intervention, tol: float = la.DEFAULT_TOL):
    """rd_deterministic for deterministic networks, rd_general otherwise."""
    return rd_deterministic(q, iv, tol) if q.deterministic else rd_general(q, iv, tol)


def condition(q: QuantumCausalNetwork, iv: Intervention, outcome,
              tol: float = la.DEFAULT_TOL) -> InterventionOutcome:
    """The branch of a reduction with the given outcome label or index.

    Raises ZeroProbabilityError when that outcome cannot occur.
    """
    label = iv.projectors.labels[iv.projectors.index(outcome)]
    for o in reduce_network(q, iv, tol):
        if o.outcome_label == label:
            return o
    raise ZeroProbabilityError(f"outcome {label!r} of {iv.describe()} has zero Born probability")


# ---------------------------------------------------------------------------
# surgery


def _complete_basis(vectors: list, n: int) -> list:
    basis = [np.asarray(v) for v in vectors]
    for j in range(n):
        if len(basis) == n:
            break
        w = la.ket(j, n)
        for b in basis:
            w = w - (b.conj() @ w) * b
        nw = np.linalg.norm(w)
        if nw > 1e-8:
            basis.append(la.fix_phase(w / nw))
    return basis


def do_set(q: QuantumCausalNetwork, target: str, value, tol: float = la.DEFAULT_TOL) -> QuantumCausalNetwork:
    """Set ``target`` to ``value`` by local surgery.

    The target is first decohered in the eigenbasis of its undisturbed
    reduced state, which turns its CN-set partners into a proper mixture
    with unchanged reduced state. Arcs entering the target and undirected
    arcs at the target are then removed, and the target becomes a root with
    the single value ``value``. Outgoing arcs are kept.
    """
    if target not in q.graph.dims:
        raise KeyError(f"unknown node {target!r}")
    xi = value if isinstance(value, DensityOperator) else DensityOperator(la.as_matrix(value))
    d = q.graph.dims[target]
    if xi.dim != d:
        raise DimensionError(f"value has dimension {xi.dim}, node {target!r} has dimension {d}")
    if not xi.is_normalized():
        raise InterventionError("surgery value must be a normalized state")
    key = _cn_key(q, target)
    ld = q.locals[key]
    cn = ld.target
    js = build_joint(q, tol=tol)
    g_new = q.graph.without_edges(
        directed=[(p, target) for p in q.graph.parents(target)],
        undirected=[(target, n) for n in q.graph.neighbors(target)])
    new_sets = {c.members: c for c in cn_partition(g_new)}
    overrides = {(target,): LocalDistribution.root(new_sets[(target,)], [xi.matrix], (d,))}
    rest = [m for m in cn.members if m != target]
    if rest:
        rho_x = marginal(js, q, [target]).matrix
        basis = _complete_basis(list(la.spectral_decompose(rho_x, tol).vectors), d)
        rdims = [q.graph.dims[m] for m in rest]
        nr = la.dim_product(rdims)
        cperm = order_perm([target] + rest, list(cn.members))
        bras = [la.permute_factors(la.tensor(e.conj().reshape(1, -1), np.eye(nr)), [nr], [0],
                                   col_dims=[d] + rdims, col_perm=cperm) for e in basis]
        comps = []
        for op in ld.operations():
            for b in bras:
                c = QuantumOperation(tuple(b @ k for k in op.kraus), op.in_dims, tuple(rdims), op.tol)
                if not c.is_zero(1e-12):
                    comps.append(c)
        pieces = [c for c in new_sets.values() if set(c.members) <= set(rest)]
        if all(pc.is_root for pc in pieces):
            fixed_par = {cn.parents: marginal(js, q, cn.parents).matrix} if cn.parents else {}
            mats = [restrict_input(c, cn.parents, fixed_par)[0].apply_matrix(np.ones((1, 1))) for c in comps]
            mats = [m for m in mats if float(np.real(np.trace(m))) > 1e-14]
            ov, _, g_new = _root_overrides(g_new, rest, rdims, mats)
            overrides.update(ov)
        else:
            if len(pieces) > 1:
                # partners with separate parents stay contemporaneous to keep their correlation
                g_new = _join_pieces(g_new, rest, None)
                new_sets = {c.members: c for c in cn_partition(g_new)}
                pc = new_sets[tuple(rest)]
            else:
                pc = pieces[0]
            removed = tuple(p for p in cn.parents if p not in pc.parents)
            fixed = {removed: marginal(js, q, removed).matrix} if removed else {}
            comps = [restrict_input(c, cn.parents, fixed)[0] for c in comps]
            overrides[pc.members] = LocalDistribution.child(
                pc, comps, tuple(rdims), tuple(q.graph.dims[p] for p in pc.parents),
                subnormalized=ld.subnormalized)
    return _assemble(q, g_new, overrides, _make_plug(q, js, {(target,): xi.matrix}))


# ---------------------------------------------------------------------------
# sequences


@dataclass(eq=False)
class OutcomeNode:
    """Node of an outcome tree; the root carries the starting network."""

    label: str
    probability: float
    path_probability: float
    network: QuantumCausalNetwork
    step: int = -1
    children: list = field(default_factory=list)

    def leaves(self, prefix: tuple = ()) -> list:
        """``(labels, path probability, network)`` for each leaf."""
        here = prefix + ((self.label,) if self.step >= 0 else ())
        if not self.children:
            return [(here, self.path_probability, self.network)]
        return [leaf for c in self.children for leaf in c.leaves(here)]


@dataclass(eq=False)
class OutcomeTree:
    root: OutcomeNode
    pruned: int = 0

    def leaves(self) -> list:
        return self.root.leaves()


@dataclass(eq=False)
class Trajectory:
    steps: list  # (intervention description, outcome label, probability)
    probability: float
    network: QuantumCausalNetwork


def _annotate(err: Exception, k: int) -> Exception:
    msg = f"step {k}: {err}"
    try:
        new = type(err)(msg)
    except Exception:
        new = QcnError(msg)
    new.step = k
    return new


def _step(q: QuantumCausalNetwork, iv: Intervention, k: int, tol: float) -> list[InterventionOutcome]:
    try:
        if iv.kind == "reduction":
            return reduce_network(q, iv, tol)
        return [InterventionOutcome(1.0, do_set(q, iv.target, iv.value, tol), "set")]
    except (QcnError, KeyError, ValueError) as e:
        raise _annotate(e, k) from e


def apply_sequence(q: QuantumCausalNetwork, ivs: Sequence[Intervention], mode: str = "enumerate",
                   seed: int = 0, tol: float = la.DEFAULT_TOL):
    """Apply interventions in order.

    ``mode="enumerate"`` returns an :class:`OutcomeTree` with every outcome
    branch; ``mode="sample"`` follows one branch drawn with
    ``numpy.random.default_rng(seed)`` and returns a :class:`Trajectory`.
    """
    ivs = list(ivs)
    if mode == "enumerate":
        root = OutcomeNode("start", 1.0, 1.0, q)
        pruned = 0
        frontier = [root]
        for k, iv in enumerate(ivs):
            nxt = []
            for node in frontier:
                for o in _step(node.network, iv, k, tol):
                    pp = node.path_probability * o.probability
                    if pp < PRUNE_THRESHOLD:
                        pruned += 1
                        continue
                    child = OutcomeNode(o.outcome_label, o.probability, pp, o.network, k)
                    node.children.append(child)
                    nxt.append(child)
            frontier = nxt
        return OutcomeTree(root, pruned)
    if mode == "sample":
        rng = np.random.default_rng(seed)
        steps, prob, net = [], 1.0, q
        for k, iv in enumerate(ivs):
            outs = _step(net, iv, k, tol)
            ps = np.array([o.probability for o in outs])
            pick = outs[int(rng.choice(len(outs), p=ps / ps.sum()))]
            steps.append((iv.describe(), pick.outcome_label, pick.probability))
            prob *= pick.probability
            net = pick.network
        return Trajectory(steps, prob, net)
    raise ValueError(f"unknown mode {mode!r}")
