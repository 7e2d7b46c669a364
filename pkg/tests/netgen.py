"""Random networks and graphs shared by the test modules."""

import itertools

import numpy as np
from scipy.linalg import sqrtm

from qcnet import linalg as la
from qcnet.qcn import LocalDistribution, QuantumCausalNetwork
from qcnet.qop import QuantumOperation
from qcnet.qstate import random_state
from qcnet.errors import InvalidSagError
from qcnet.sag import Sag, cn_partition, cn_topological_order, validate_sag

NAMES = "ABCDEFGH"


def random_sag(rng, n, p_dir=0.4, p_und=0.3):
    """Random valid SAG: directed edges follow a node permutation, undirected
    edges only join nodes with no directed path between their components."""
    for _ in range(100):
        ids = list(NAMES[:n])
        perm = list(rng.permutation(n))
        d, u = set(), set()
        for a, b in itertools.combinations(range(n), 2):
            x, y = ids[perm[a]], ids[perm[b]]
            r = rng.random()
            if r < p_dir:
                d.add((x, y))
            elif r < p_dir + p_und:
                u.add((x, y))
        g = Sag([(x, 2) for x in ids], d, u)
        if validate_sag(g) is None:
            try:
                cn_topological_order(g)
            except InvalidSagError:
                continue
            return g
    return Sag([(x, 2) for x in NAMES[:n]])


def random_channel(rng, din, dout, rank=2):
    rank = max(rank, -(-din // dout))
    g = rng.normal(size=(dout * rank, din)) + 1j * rng.normal(size=(dout * rank, din))
    v = g @ np.linalg.inv(sqrtm(g.conj().T @ g))
    return [v[k * dout:(k + 1) * dout, :] for k in range(rank)]


def split_state(rng, m, parts):
    """PSD pieces summing to ``m``."""
    if parts == 1:
        return [m]
    w, v = np.linalg.eigh(m)
    w = np.clip(w, 0, None)
    cut = rng.random(len(w))
    return [(v * (w * cut)) @ v.conj().T, (v * (w * (1 - cut))) @ v.conj().T]


def random_network(rng, n=3, multi=True, diagonal=False, g=None):
    """Random qubit network; with ``diagonal`` every mechanism is classical."""
    g = g or random_sag(rng, n)
    locs = {}
    for cn in cn_partition(g):
        md = tuple(g.dims[m] for m in cn.members)
        pd = tuple(g.dims[p] for p in cn.parents)
        nm, npar = la.dim_product(md), la.dim_product(pd)
        parts = 2 if multi and rng.random() < 0.5 else 1
        if cn.is_root:
            if diagonal:
                p = rng.dirichlet(np.ones(nm))
                comps = [np.diag(np.real(np.diag(c))) for c in split_state(rng, np.diag(p), parts)]
            else:
                comps = split_state(rng, random_state(nm, rng).matrix, parts)
            comps = [c for c in comps if np.trace(c).real > 1e-9]
            locs[cn.members] = LocalDistribution.root(cn, comps, md)
        else:
            if diagonal:
                # classical stochastic map: Kraus |y><x| sqrt(T[y, x])
                t = rng.dirichlet(np.ones(nm), size=npar).T
                ks = []
                for x in range(npar):
                    for y in range(nm):
                        k = np.zeros((nm, npar), dtype=complex)
                        k[y, x] = np.sqrt(t[y, x])
                        ks.append(k)
            else:
                ks = random_channel(rng, npar, nm)
            if parts == 2 and len(ks) > 1:
                h = len(ks) // 2
                ops = [QuantumOperation(tuple(ks[:h]), pd, md), QuantumOperation(tuple(ks[h:]), pd, md)]
            else:
                ops = [QuantumOperation(tuple(ks), pd, md)]
            locs[cn.members] = LocalDistribution.child(cn, ops, md, pd)
    return QuantumCausalNetwork(g, locs, policy=None)


def chain(sigma, kraus, policy=None):
    """Two-node network X -> Y with root state ``sigma`` and channel ``kraus``."""
    g = Sag([("X", 2), ("Y", 2)], {("X", "Y")})
    cx, cy = cn_partition(g)
    locs = {("X",): LocalDistribution.root(cx, [sigma], (2,)),
            ("Y",): LocalDistribution.child(cy, [QuantumOperation(tuple(kraus), (2,), (2,))], (2,), (2,))}
    return QuantumCausalNetwork(g, locs, policy=policy)


def entangled_root(vec, names, edges=None, policy=None):
    """Single root CN-set holding the pure state ``vec``; edges default to a path."""
    edges = list(zip(names, names[1:])) if edges is None else edges
    g = Sag([(n, 2) for n in names], set(), set(edges))
    (cn,) = cn_partition(g)
    locs = {cn.members: LocalDistribution.root(cn, [la.projector(vec)], (2,) * len(names))}
    return QuantumCausalNetwork(g, locs, policy=policy)


def bell():
    v = np.zeros(4, dtype=complex)
    v[0] = v[3] = 1 / np.sqrt(2)
    return v


def ghz(n=3):
    v = np.zeros(2 ** n, dtype=complex)
    v[0] = v[-1] = 1 / np.sqrt(2)
    return v
