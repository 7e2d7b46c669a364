"""Structured JSON reports with stable key order and fixed number formatting."""

from __future__ import annotations

import json
import math
import re

import numpy as np

from ..qcn import JointState, QuantumCausalNetwork, build_joint, marginal, parameter_count
from ..sag import Sag, cn_topological_order

# magnitudes below this print as zero so reports do not depend on roundoff noise
ZERO_CUTOFF = 1e-13


def _num(x: float) -> str:
    if abs(x) < ZERO_CUTOFF:
        return "0"
    s = "%.12g" % x
    return "0" if s in ("-0", "0") else s


def fmt_complex(z) -> str:
    """``a+bi`` with 12 significant digits, e.g. ``0.5+0i``."""
    z = complex(z)
    re_s, im_s = _num(z.real), _num(z.imag)
    if im_s.startswith("-"):
        return f"{re_s}{im_s}i"
    return f"{re_s}+{im_s}i"


def fmt_real(x: float) -> str:
    return _num(float(x))


def matrix_block(m) -> list:
    return [[fmt_complex(x) for x in row] for row in np.asarray(m)]


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        if obj.ndim == 2:
            return matrix_block(obj)
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (complex, np.complexfloating)):
        return fmt_complex(obj)
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        if not math.isfinite(float(obj)):
            return str(float(obj))
        return fmt_real(obj)
    return obj


_FLAT_LIST = re.compile(r'\[\s+("[^"\n]*"(?:,\s+"[^"\n]*")*)\s+\]')


def serialize_report(result) -> str:
    """Deterministic JSON text; floats become fixed-precision strings.

    Lists of plain strings (matrix rows, node lists) are kept on one line.
    """
    text = json.dumps(_jsonable(result), indent=2, ensure_ascii=True)
    text = _FLAT_LIST.sub(lambda m: "[" + re.sub(r",\s+", ", ", m.group(1)) + "]", text)
    return text + "\n"


# ---------------------------------------------------------------------------
# report builders


def graph_report(g: Sag) -> dict:
    order = cn_topological_order(g)
    d, u = g.edge_lists()
    return {
        "nodes": [{"id": n, "dim": g.dims[n]} for n in g.ids],
        "directed_edges": [f"{a} -> {b}" for a, b in d],
        "undirected_edges": [f"{a} -- {b}" for a, b in u],
        "cn_sets": [{
            "members": list(c.members),
            "kind": c.kind,
            "influencing_parents": list(c.influencing_parents),
            "noninfluencing_parents": list(c.noninfluencing_parents),
        } for c in order.order],
        "layers": [[c.label for c in layer] for layer in order.layers],
    }


def validation_report(q: QuantumCausalNetwork) -> dict:
    rep = {"valid": True}
    rep.update(graph_report(q.graph))
    rep["local_distributions"] = [{
        "cn_set": ld.target.label,
        "kind": ld.kind,
        "components": len(ld.components),
        "parameters": parameter_count(q, ld.target),
    } for ld in q.locals.values()]
    return rep


def joint_report(js: JointState) -> dict:
    return {
        "nodes": list(js.nodes),
        "dims": list(js.dims),
        "trace": js.operator.trace_value,
        "operator": js.operator.matrix,
        "mixture": [{
            "weight": c.weight,
            "path": [{"cn_set": lab, "component": int(v[0]), "index": int(v[1])} for lab, v in c.path],
        } for c in js.mixture],
    }


def marginal_report(nodes, state) -> dict:
    return {"nodes": list(nodes), "dims": list(state.dims), "operator": state.matrix}


def network_summary(q: QuantumCausalNetwork) -> dict:
    """Graph plus every single-node marginal of the undisturbed joint."""
    js = build_joint(q)
    d, u = q.graph.edge_lists()
    return {
        "directed_edges": [f"{a} -> {b}" for a, b in d],
        "undirected_edges": [f"{a} -- {b}" for a, b in u],
        "cn_sets": [ld.target.label for ld in q.locals.values()],
        "marginals": {n: marginal(js, q, [n]).matrix for n in q.graph.ids},
    }


def outcome_records(outcomes) -> list:
    return [{
        "label": o.outcome_label,
        "probability": o.probability,
        "network": network_summary(o.network),
    } for o in outcomes]


def tree_report(tree) -> dict:
    def node(n):
        rec = {"label": n.label, "probability": n.probability, "path_probability": n.path_probability}
        if n.children:
            rec["children"] = [node(c) for c in n.children]
        else:
            rec["network"] = network_summary(n.network)
        return rec
    leaves = tree.leaves()
    return {
        "tree": node(tree.root),
        "leaves": [{"labels": list(labels), "path_probability": p} for labels, p, _ in leaves],
        "total_probability": sum(p for _, p, _ in leaves),
        "pruned": tree.pruned,
    }


def trajectory_report(traj) -> dict:
    return {
        "steps": [{"intervention": d, "label": lab, "probability": p} for d, lab, p in traj.steps],
        "probability": traj.probability,
        "network": network_summary(traj.network),
    }
