"""Command-line driver: ``qcn <command> <model file> [options]``.

Exit codes: 0 success, 1 validation or semantic failure, 2 usage or parse
error, 3 numeric failure such as conditioning on a zero-probability outcome.
"""

from __future__ import annotations

import argparse
import sys

from .. import linalg as la
from ..errors import (DimensionCapError, InterventionError, NetworkError, NumericError, ParseError,
                      QcnError, SemanticError)
from ..intervene import Intervention, apply_sequence, condition, do_set, reduce_network
from ..qcn import CheckPolicy, build_joint, marginal
from .parser import load_graph, load_projset, load_qcn, load_state, parse_model, parse_script
from .report import (graph_report, joint_report, marginal_report, network_summary, outcome_records,
                     serialize_report, trajectory_report, tree_report, validation_report)


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _global_options(p: argparse.ArgumentParser, suppress: bool) -> None:
    d = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    p.add_argument("--tolerance", type=float, default=d(la.DEFAULT_TOL),
                   help="numeric tolerance for state and channel checks")
    p.add_argument("--fiducial-samples", type=int, default=d(8),
                   help="random fiducial sets used by the respects-the-graph checks")
    p.add_argument("--dim-cap", type=int, default=d(la.DEFAULT_DIM_CAP),
                   help="largest joint dimension that will be built")
    p.add_argument("--seed", type=int, default=d(0), help="seed for every random choice")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="qcn", description="Quantum causal network toolkit")
    _global_options(p, suppress=False)
    sub = p.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    def cmd(name, help_):
        c = sub.add_parser(name, help=help_)
        c.add_argument("model", help="model file")
        _global_options(c, suppress=True)
        return c

    cmd("validate", "check the graph and every local distribution")
    cmd("joint", "print the joint state of the undisturbed network")
    c = cmd("marginal", "print the reduced state of some nodes")
    c.add_argument("--nodes", required=True, help="comma-separated node ids")
    c = cmd("reduce", "projective reduction at one node")
    c.add_argument("--target", required=True)
    c.add_argument("--projset", required=True)
    g = c.add_mutually_exclusive_group()
    g.add_argument("--outcome", help="outcome label or index to condition on")
    g.add_argument("--enumerate", action="store_true", help="report every outcome (default)")
    c = cmd("do", "set a node to a declared state")
    c.add_argument("--target", required=True)
    c.add_argument("--state", required=True)
    c = cmd("sequence", "apply an intervention script")
    c.add_argument("--script", required=True)
    g = c.add_mutually_exclusive_group()
    g.add_argument("--sample", action="store_true", help="draw one trajectory using --seed")
    g.add_argument("--enumerate", action="store_true", help="report the full outcome tree (default)")
    return p


def _read(path: str) -> str:
    try:
        with open(path, encoding="utf-8") as f:
            return f.read()
    except OSError as e:
        raise _UsageError(f"cannot read {path}: {e.strerror}") from None


def _run(args) -> dict:
    doc = parse_model(_read(args.model))
    policy = CheckPolicy(samples=args.fiducial_samples, seed=args.seed)
    tol = args.tolerance
    if args.command == "validate" and doc.graph_only:
        rep = {"valid": True, "graph_only": True}
        rep.update(graph_report(load_graph(doc)))
        return rep
    q = load_qcn(doc, policy, tol)
    if q.total_dim() > args.dim_cap:
        raise DimensionCapError(f"joint dimension {q.total_dim()} exceeds the cap {args.dim_cap}")
    if args.command == "validate":
        return validation_report(q)
    if args.command == "joint":
        return joint_report(build_joint(q, dim_cap=args.dim_cap, tol=tol))
    if args.command == "marginal":
        nodes = [n for n in args.nodes.split(",") if n]
        for n in nodes:
            if n not in q.graph.dims:
                raise _UsageError(f"unknown node {n!r}")
        js = build_joint(q, dim_cap=args.dim_cap, tol=tol)
        return marginal_report(sorted(set(nodes)), marginal(js, q, nodes))
    if args.command == "reduce":
        if args.projset not in doc.projsets:
            raise _UsageError(f"unknown projection set {args.projset!r}")
        node, ps = load_projset(doc, args.projset)
        if node != args.target:
            raise _UsageError(f"projection set {args.projset!r} acts on {node}, not {args.target}")
        iv = Intervention.reduction(args.target, ps)
        rep = {"target": args.target, "projset": args.projset}
        if args.outcome is not None:
            # labels win over indices when a label looks like a number
            key = args.outcome if args.outcome in ps.labels or not args.outcome.isdigit() else int(args.outcome)
            outs = [condition(q, iv, key, tol)]
        else:
            outs = reduce_network(q, iv, tol)
        rep["outcomes"] = outcome_records(outs)
        return rep
    if args.command == "do":
        if args.state not in doc.states:
            raise _UsageError(f"unknown state {args.state!r}")
        node, st = load_state(doc, args.state)
        if node != args.target:
            raise _UsageError(f"state {args.state!r} is declared on {node}, not {args.target}")
        q2 = do_set(q, args.target, st, tol)
        return {"target": args.target, "state": args.state, "network": network_summary(q2)}
    if args.command == "sequence":
        ivs = parse_script(_read(args.script), doc)
        if args.sample:
            return trajectory_report(apply_sequence(q, ivs, "sample", seed=args.seed, tol=tol))
        return tree_report(apply_sequence(q, ivs, "enumerate", tol=tol))
    raise _UsageError(f"unknown command {args.command!r}")  # unreachable


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        out = serialize_report(_run(args))
    except _UsageError as e:
        print(f"qcn: error: {e}", file=sys.stderr)
        return 2
    except ParseError as e:
        print(f"qcn: parse error: {e}", file=sys.stderr)
        return 2
    except SemanticError as e:
        print(f"qcn: invalid model:\n{e}", file=sys.stderr)
        return 1
    except NumericError as e:
        print(f"qcn: numeric error: {e}", file=sys.stderr)
        return 3
    except (NetworkError, InterventionError, DimensionCapError, QcnError) as e:
        print(f"qcn: error: {e}", file=sys.stderr)
        return 1
    except (KeyError, IndexError) as e:
        print(f"qcn: error: {e}", file=sys.stderr)
        return 2
    sys.stdout.write(out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
