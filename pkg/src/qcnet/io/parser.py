"""Line-oriented text format for networks, projection sets, states and scripts.

Model statements, one per line (``#`` starts a comment)::

    node X dim=2
    edge X -> Y                      # directed
    edge Y -- Z                      # undirected
    root {X} component w=0.6 matrix=[1,0;0,0]
    channel {Y} from {X} component kraus=[1,0;0,0],[0,0;0,1]
    projset Z on Y proj=[1,0;0,0] proj=[0,0;0,1] labels=up,down
    state zero on X matrix=[1,0;0,0]

A CN-set with several components repeats its ``root``/``channel`` line once
per component. ``w=`` rescales the matrix to trace ``w``; without it the
matrix is taken as written. Member lists and channel input lists are written
in sorted node-id order; the input list of a channel must be exactly the
parents of its CN-set. Matrix rows are separated by ``;`` and entries by
``,``. Entries are complex literals: ``a``, ``bi``, ``a+bi``, ``a-bi``, ``i``.

Scripts hold one intervention per line::

    reduce Y Z       # projective reduction at node Y with projection set Z
    do X zero        # set node X to state "zero"
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field

import numpy as np

from .. import linalg as la
from ..errors import ParseError, QcnError, SemanticError
from ..intervene import Intervention
from ..qcn import DEFAULT_POLICY, CheckPolicy, LocalDistribution, QuantumCausalNetwork, respects
from ..qop import QuantumOperation
from ..qstate import DensityOperator, ProjectionSet
from ..sag import Sag, cn_partition, cn_topological_order, validate_sag

_ID = re.compile(r"[A-Za-z_][A-Za-z0-9_.]*$")


@dataclass
class NodeDecl:
    id: str
    dim: int
    line: int
    column: int


@dataclass
class EdgeDecl:
    a: str
    b: str
    directed: bool
    line: int
    column: int


@dataclass
class RootDecl:
    members: tuple
    matrix: np.ndarray
    line: int
    column: int


@dataclass
class ChannelDecl:
    members: tuple
    parents: tuple
    kraus: list
    line: int
    column: int


@dataclass
class ProjsetDecl:
    name: str
    target: str
    projectors: list
    labels: tuple | None
    line: int
    column: int


@dataclass
class StateDecl:
    name: str
    target: str
    matrix: np.ndarray
    line: int
    column: int


@dataclass
class ModelDocument:
    nodes: list = field(default_factory=list)
    edges: list = field(default_factory=list)
    roots: list = field(default_factory=list)
    channels: list = field(default_factory=list)
    projsets: dict = field(default_factory=dict)
    states: dict = field(default_factory=dict)

    @property
    def dims(self) -> dict:
        return {n.id: n.dim for n in self.nodes}

    @property
    def graph_only(self) -> bool:
        return not self.roots and not self.channels


# ---------------------------------------------------------------------------
# lexical level


@dataclass
class _Tok:
    kind: str      # word | set | arrow | kv
    text: str
    col: int
    value: object = None
    vcol: int = 0


def parse_complex(s: str) -> complex:
    """Parse ``a``, ``bi``, ``a+bi``, ``a-bi`` or ``i`` (no spaces)."""
    t = s.strip()
    if not t:
        raise ValueError("empty number")
    if not t.endswith("i"):
        x = float(t)
        if not math.isfinite(x):
            raise ValueError(f"non-finite number {s!r}")
        return complex(x, 0.0)
    body = t[:-1]
    split = -1
    for k in range(len(body) - 1, 0, -1):
        if body[k] in "+-" and body[k - 1] not in "eE":
            split = k
            break
    re_part, im_part = (body[:split], body[split:]) if split > 0 else ("", body)
    if im_part in ("", "+"):
        im = 1.0
    elif im_part == "-":
        im = -1.0
    else:
        im = float(im_part)
    re_val = float(re_part) if re_part else 0.0
    if not (math.isfinite(re_val) and math.isfinite(im)):
        raise ValueError(f"non-finite number {s!r}")
    return complex(re_val, im)


def _parse_matrix(text: str, line: int, col: int) -> np.ndarray:
    """``text`` is the content between brackets; ``col`` is the column of ``[``."""
    rows = []
    offset = 1
    for row in text.split(";"):
        entries = []
        roff = offset
        for ent in row.split(","):
            stripped = ent.strip()
            ecol = col + roff + (len(ent) - len(ent.lstrip()))
            try:
                entries.append(parse_complex(stripped))
            except ValueError:
                raise ParseError(f"bad number {stripped!r}", line, ecol) from None
            roff += len(ent) + 1
        rows.append(entries)
        offset += len(row) + 1
    if any(len(r) != len(rows[0]) for r in rows):
        raise ParseError("matrix rows have different lengths", line, col)
    return np.array(rows, dtype=np.complex128)


def _read_bracket(s: str, k: int, line: int) -> tuple[str, int]:
    end = s.find("]", k)
    if end < 0:
        raise ParseError("unterminated '['", line, k + 1)
    if "[" in s[k + 1:end]:
        raise ParseError("nested '['", line, s.index("[", k + 1) + 1)
    return s[k + 1:end], end + 1


def _tokenize(s: str, line: int) -> list[_Tok]:
    toks = []
    k, n = 0, len(s)
    while k < n:
        c = s[k]
        if c.isspace():
            k += 1
            continue
        col = k + 1
        if c == "{":
            end = s.find("}", k)
            if end < 0:
                raise ParseError("unterminated '{'", line, col)
            ids = [x for x in re.split(r"[,\s]+", s[k + 1:end]) if x]
            toks.append(_Tok("set", s[k:end + 1], col, ids))
            k = end + 1
            continue
        if s.startswith("->", k) or s.startswith("--", k):
            toks.append(_Tok("arrow", s[k:k + 2], col))
            k += 2
            continue
        if c in "[]}":
            raise ParseError(f"unexpected {c!r}", line, col)
        j = k
        while j < n and not s[j].isspace() and s[j] not in "[{}":
            j += 1
        word = s[k:j]
        if word.endswith("="):
            if j >= n or s[j] != "[":
                raise ParseError(f"expected '[' after {word!r}", line, j + 1)
            groups = []
            while True:
                gcol = j + 1
                text, j = _read_bracket(s, j, line)
                groups.append((text, gcol))
                if j < n and s[j] == "," and j + 1 < n and s[j + 1] == "[":
                    j += 1
                    continue
                break
            toks.append(_Tok("kv", word[:-1], col, groups, groups[0][1]))
            k = j
            continue
        if "=" in word:
            key, val = word.split("=", 1)
            toks.append(_Tok("kv", key, col, val, col + len(key) + 1))
        elif j < n and s[j] == "[":
            raise ParseError(f"expected '=' before '[' after {word!r}", line, j + 1)
        else:
            toks.append(_Tok("word", word, col))
        k = j
    return toks


class _Line:
    def __init__(self, toks, line, end_col):
        self.toks, self.line, self.pos, self.end_col = toks, line, 0, end_col

    def _err(self, msg, col=None):
        if col is None:
            col = self.toks[self.pos].col if self.pos < len(self.toks) else self.end_col
        return ParseError(msg, self.line, col)

    def more(self):
        return self.pos < len(self.toks)

    def peek(self):
        return self.toks[self.pos] if self.more() else None

    def take(self, kind, what):
        t = self.peek()
        if t is None or t.kind != kind:
            raise self._err(f"expected {what}")
        self.pos += 1
        return t

    def ident(self, what="identifier"):
        t = self.take("word", what)
        if not _ID.match(t.text):
            raise self._err(f"invalid {what} {t.text!r}", t.col)
        return t

    def keyword(self, word):
        t = self.peek()
        if t is None or t.kind != "word" or t.text != word:
            raise self._err(f"expected '{word}'")
        self.pos += 1
        return t

    def set_(self, what):
        t = self.take("set", what)
        if not t.value:
            raise self._err("empty node set", t.col)
        for x in t.value:
            if not _ID.match(x):
                raise self._err(f"invalid node id {x!r}", t.col)
        if len(set(t.value)) != len(t.value):
            raise self._err("repeated node id in set", t.col)
        return t

    def kv(self, key, bracket=None):
        t = self.peek()
        if t is None or t.kind != "kv" or t.text != key:
            raise self._err(f"expected '{key}='")
        self.pos += 1
        if bracket is True and not isinstance(t.value, list):
            raise self._err(f"'{key}=' needs a bracketed matrix", t.vcol)
        if bracket is False and isinstance(t.value, list):
            raise self._err(f"'{key}=' needs a plain value", t.vcol)
        return t

    def done(self):
        if self.more():
            raise self._err(f"unexpected {self.peek().text!r}")


def _matrices(t: _Tok, line: int, single: bool = False) -> list:
    if single and len(t.value) != 1:
        raise ParseError("expected a single matrix", line, t.value[1][1])
    return [_parse_matrix(text, line, col) for text, col in t.value]


# ---------------------------------------------------------------------------
# statements


def parse_model(text: str) -> ModelDocument:
    """Parse model text; raises :class:`ParseError` at the first problem."""
    doc = ModelDocument()
    refs = []  # (node id, line, column) to resolve once every node is known
    node_ids = set()
    for ln, raw in enumerate(text.splitlines(), start=1):
        s = raw.split("#", 1)[0].rstrip()
        if not s.strip():
            continue
        toks = _tokenize(s, ln)
        p = _Line(toks, ln, len(s) + 1)
        head = p.take("word", "a statement keyword")
        kw = head.text
        if kw == "node":
            t = p.ident("node id")
            d = p.kv("dim", bracket=False)
            try:
                dim = int(d.value)
            except ValueError:
                raise ParseError(f"dimension must be a positive integer, got {d.value!r}", ln, d.vcol) from None
            if dim < 1:
                raise ParseError(f"dimension must be a positive integer, got {d.value!r}", ln, d.vcol)
            p.done()
            if t.text in node_ids:
                raise ParseError(f"duplicate node {t.text!r}", ln, t.col)
            node_ids.add(t.text)
            doc.nodes.append(NodeDecl(t.text, dim, ln, head.col))
        elif kw == "edge":
            a = p.ident("node id")
            arrow = p.take("arrow", "'->' or '--'")
            b = p.ident("node id")
            p.done()
            if a.text == b.text:
                raise ParseError(f"self-loop at line {ln}", ln, b.col)
            doc.edges.append(EdgeDecl(a.text, b.text, arrow.text == "->", ln, head.col))
            refs += [(a.text, ln, a.col), (b.text, ln, b.col)]
        elif kw == "root":
            members = p.set_("member set")
            p.keyword("component")
            w = None
            t = p.peek()
            if t is not None and t.kind == "kv" and t.text == "w":
                wt = p.kv("w", bracket=False)
                try:
                    w = float(wt.value)
                except ValueError:
                    raise ParseError(f"bad weight {wt.value!r}", ln, wt.vcol) from None
                if not math.isfinite(w) or w < 0:
                    raise ParseError(f"bad weight {wt.value!r}", ln, wt.vcol)
            mt = p.kv("matrix", bracket=True)
            m = _matrices(mt, ln, single=True)[0]
            p.done()
            if w is not None:
                tr = np.real(np.trace(m)) if m.shape[0] == m.shape[1] else 0.0
                if tr <= 0:
                    raise ParseError("w= needs a matrix with positive trace", ln, mt.vcol)
                m = m * (w / tr)
            doc.roots.append(RootDecl(tuple(members.value), m, ln, head.col))
            refs += [(x, ln, members.col) for x in members.value]
        elif kw == "channel":
            members = p.set_("member set")
            p.keyword("from")
            parents = p.set_("parent set")
            p.keyword("component")
            kt = p.kv("kraus", bracket=True)
            ks = _matrices(kt, ln)
            p.done()
            doc.channels.append(ChannelDecl(tuple(members.value), tuple(parents.value), ks, ln, head.col))
            refs += [(x, ln, members.col) for x in members.value]
            refs += [(x, ln, parents.col) for x in parents.value]
        elif kw == "projset":
            name = p.ident("name")
            p.keyword("on")
            tgt = p.ident("node id")
            projs = []
            while p.more() and p.peek().kind == "kv" and p.peek().text == "proj":
                projs.append(_matrices(p.kv("proj", bracket=True), ln, single=True)[0])
            if not projs:
                raise p._err("expected 'proj='")
            labels = None
            if p.more():
                lt = p.kv("labels", bracket=False)
                labels = tuple(x for x in lt.value.split(","))
                if any(not x for x in labels):
                    raise ParseError("empty label", ln, lt.vcol)
            p.done()
            if name.text in doc.projsets:
                raise ParseError(f"duplicate projection set {name.text!r}", ln, name.col)
            doc.projsets[name.text] = ProjsetDecl(name.text, tgt.text, projs, labels, ln, head.col)
            refs.append((tgt.text, ln, tgt.col))
        elif kw == "state":
            name = p.ident("name")
            p.keyword("on")
            tgt = p.ident("node id")
            m = _matrices(p.kv("matrix", bracket=True), ln, single=True)[0]
            p.done()
            if name.text in doc.states:
                raise ParseError(f"duplicate state {name.text!r}", ln, name.col)
            doc.states[name.text] = StateDecl(name.text, tgt.text, m, ln, head.col)
            refs.append((tgt.text, ln, tgt.col))
        else:
            raise ParseError(f"unknown statement {kw!r}", ln, head.col)

    for x, ln, col in refs:
        if x not in node_ids:
            raise ParseError(f"undeclared node {x!r}", ln, col)
    _check_shapes(doc)
    return doc


def _check_shapes(doc: ModelDocument) -> None:
    dims = doc.dims
    for r in doc.roots:
        n = la.dim_product(dims[m] for m in r.members)
        if r.matrix.shape != (n, n):
            raise ParseError(f"matrix shape {r.matrix.shape} does not match {n}x{n} for {set(r.members)}",
                             r.line, r.column)
    for c in doc.channels:
        shape = (la.dim_product(dims[m] for m in c.members), la.dim_product(dims[m] for m in c.parents))
        for k in c.kraus:
            if k.shape != shape:
                raise ParseError(f"Kraus shape {k.shape} does not match {shape}", c.line, c.column)
    for ps in doc.projsets.values():
        n = dims[ps.target]
        for m in ps.projectors:
            if m.shape != (n, n):
                raise ParseError(f"projector shape {m.shape} does not match node dimension {n}",
                                 ps.line, ps.column)
        if ps.labels is not None and len(ps.labels) != len(ps.projectors):
            raise ParseError("one label per projector is required", ps.line, ps.column)
    for st in doc.states.values():
        n = dims[st.target]
        if st.matrix.shape != (n, n):
            raise ParseError(f"state shape {st.matrix.shape} does not match node dimension {n}",
                             st.line, st.column)


# ---------------------------------------------------------------------------
# semantic level


def _graph(doc: ModelDocument, issues: list) -> Sag | None:
    nodes = [(n.id, n.dim) for n in doc.nodes]
    pos = {n.id: (n.line, n.column) for n in doc.nodes}
    directed, undirected = set(), set()
    first = {}
    for e in doc.edges:
        key = frozenset((e.a, e.b))
        if key in first and first[key][0] != e.directed:
            issues.append((e.line, e.column, f"nodes {e.a} and {e.b} carry both a directed and an undirected edge"))
            continue
        first.setdefault(key, (e.directed, e))
        (directed.add((e.a, e.b)) if e.directed else undirected.add((e.a, e.b)))
    if issues:
        return None
    g = Sag(nodes, directed, undirected)
    v = validate_sag(g)
    if v is not None:
        line, col = pos[v.a]
        issues.append((line, col, f"not a sequenced association graph: {v.message()}"))
        return None
    try:
        cn_topological_order(g)
    except QcnError as e:
        line, col = (doc.nodes[0].line, doc.nodes[0].column) if doc.nodes else (0, 0)
        issues.append((line, col, str(e)))
        return None
    return g


def load_graph(doc: ModelDocument) -> Sag:
    """Graph part of a document, checked for SAG validity."""
    issues: list = []
    g = _graph(doc, issues)
    if issues:
        raise SemanticError(issues)
    return g


def load_qcn(doc: ModelDocument, policy: CheckPolicy | None = DEFAULT_POLICY,
             tol: float = la.DEFAULT_TOL) -> QuantumCausalNetwork:
    """Build and fully validate the network; every problem is reported with its position."""
    issues: list = []
    g = _graph(doc, issues)
    if g is None:
        raise SemanticError(issues)
    sets = {c.members: c for c in cn_partition(g)}
    npos = {n.id: (n.line, n.column) for n in doc.nodes}
    decls: dict = {}
    for d in doc.roots + doc.channels:
        key = tuple(sorted(d.members))
        if key not in sets:
            issues.append((d.line, d.column, f"{{{','.join(d.members)}}} is not a CN-set of the graph"))
            continue
        if tuple(d.members) != key:
            issues.append((d.line, d.column, f"members must be listed in node-id order: {{{','.join(key)}}}"))
            continue
        decls.setdefault(key, []).append(d)
    locs = {}
    for key, cn in sets.items():
        ds = decls.get(key)
        if not ds:
            line, col = npos[key[0]]
            issues.append((line, col, f"no local distribution for CN-set {cn.label}"))
            continue
        line, col = ds[0].line, ds[0].column
        kinds = {isinstance(d, RootDecl) for d in ds}
        if len(kinds) > 1:
            issues.append((line, col, f"CN-set {cn.label} mixes root and channel components"))
            continue
        is_root_decl = kinds.pop()
        md = tuple(g.dims[m] for m in cn.members)
        pd = tuple(g.dims[p] for p in cn.parents)
        if cn.is_root and not is_root_decl:
            issues.append((line, col, f"CN-set {cn.label} has no parents; declare it with 'root'"))
            continue
        if not cn.is_root and is_root_decl:
            issues.append((line, col, f"CN-set {cn.label} has parents; declare it with 'channel'"))
            continue
        try:
            if cn.is_root:
                ld = LocalDistribution.root(cn, [d.matrix for d in ds], md, tol=tol)
            else:
                bad = [d for d in ds if tuple(d.parents) != cn.parents]
                if bad:
                    issues.append((bad[0].line, bad[0].column,
                                   f"channel inputs must be the parents of {cn.label} in node-id order: "
                                   f"{{{','.join(cn.parents)}}}"))
                    continue
                ops = [QuantumOperation(tuple(d.kraus), pd, md, tol) for d in ds]
                ld = LocalDistribution.child(cn, ops, md, pd, tol=tol)
        except QcnError as e:
            issues.append((line, col, str(e)))
            continue
        if policy is not None:
            rep = respects(ld, g, policy)
            if not rep.ok:
                issues.append((line, col, f"local distribution for {cn.label} does not respect the graph: "
                                          f"{rep.violations[0]}"))
                continue
        locs[key] = ld
    if issues:
        raise SemanticError(sorted(issues))
    return QuantumCausalNetwork(g, locs, policy=None)


def load_projset(doc: ModelDocument, name: str) -> tuple[str, ProjectionSet]:
    ps = doc.projsets[name]
    try:
        return ps.target, ProjectionSet(tuple(ps.projectors), ps.labels)
    except QcnError as e:
        raise SemanticError([(ps.line, ps.column, str(e))]) from None


def load_state(doc: ModelDocument, name: str) -> tuple[str, DensityOperator]:
    st = doc.states[name]
    try:
        return st.target, DensityOperator(st.matrix)
    except QcnError as e:
        raise SemanticError([(st.line, st.column, str(e))]) from None


def parse_script(text: str, doc: ModelDocument) -> list[Intervention]:
    """Interventions named in a script, resolved against ``doc``."""
    out = []
    for ln, raw in enumerate(text.splitlines(), start=1):
        s = raw.split("#", 1)[0].rstrip()
        if not s.strip():
            continue
        p = _Line(_tokenize(s, ln), ln, len(s) + 1)
        head = p.take("word", "'reduce' or 'do'")
        tgt = p.ident("node id")
        name = p.ident("name")
        p.done()
        if tgt.text not in doc.dims:
            raise ParseError(f"undeclared node {tgt.text!r}", ln, tgt.col)
        if head.text == "reduce":
            if name.text not in doc.projsets:
                raise ParseError(f"unknown projection set {name.text!r}", ln, name.col)
            node, ps = load_projset(doc, name.text)
            if node != tgt.text:
                raise ParseError(f"projection set {name.text!r} acts on {node}, not {tgt.text}", ln, name.col)
            try:
                out.append(Intervention.reduction(tgt.text, ps))
            except QcnError as e:
                raise ParseError(str(e), ln, name.col) from None
        elif head.text == "do":
            if name.text not in doc.states:
                raise ParseError(f"unknown state {name.text!r}", ln, name.col)
            node, st = load_state(doc, name.text)
            if node != tgt.text:
                raise ParseError(f"state {name.text!r} is declared on {node}, not {tgt.text}", ln, name.col)
            try:
                out.append(Intervention.surgery(tgt.text, st))
            except QcnError as e:
                raise ParseError(str(e), ln, name.col) from None
        else:
            raise ParseError(f"unknown script statement {head.text!r}", ln, head.col)
    return out


# ---------------------------------------------------------------------------
# writing


def format_number(z: complex) -> str:
    """Exact (round-trip) text for a complex entry."""
    z = complex(z)
    re_s = repr(float(z.real))
    if z.imag == 0:
        return re_s
    sign = "-" if z.imag < 0 or math.copysign(1.0, z.imag) < 0 else "+"
    return f"{re_s}{sign}{repr(abs(float(z.imag)))}i"


def format_matrix(m) -> str:
    m = np.asarray(m)
    return "[" + ";".join(",".join(format_number(x) for x in row) for row in m) + "]"


def dump_model(q: QuantumCausalNetwork, projsets: dict | None = None, states: dict | None = None) -> str:
    """Model text that parses back to ``q``.

    ``projsets`` maps names to ``(node, ProjectionSet)``, ``states`` maps
    names to ``(node, DensityOperator)``.
    """
    lines = [f"node {n} dim={d}" for n, d in q.graph.nodes]
    directed, undirected = q.graph.edge_lists()
    lines += [f"edge {a} -> {b}" for a, b in directed]
    lines += [f"edge {a} -- {b}" for a, b in undirected]
    for members, ld in q.locals.items():
        ms = "{" + ",".join(members) + "}"
        if ld.is_root:
            for m in ld.components:
                lines.append(f"root {ms} component matrix={format_matrix(m)}")
        else:
            ps = "{" + ",".join(ld.target.parents) + "}"
            for op in ld.components:
                ks = ",".join(format_matrix(k) for k in op.kraus)
                lines.append(f"channel {ms} from {ps} component kraus={ks}")
    for name, (node, ps) in (projsets or {}).items():
        projs = " ".join(f"proj={format_matrix(p)}" for p in ps.projectors)
        lines.append(f"projset {name} on {node} {projs} labels={','.join(ps.labels)}")
    for name, (node, st) in (states or {}).items():
        m = st.matrix if isinstance(st, DensityOperator) else st
        lines.append(f"state {name} on {node} matrix={format_matrix(m)}")
    return "\n".join(lines) + "\n"
