import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from netgen import random_network
from qcnet import model_path
from qcnet.errors import ParseError, SemanticError
from qcnet.io.cli import main
from qcnet.io.parser import (dump_model, format_number, load_graph, load_qcn, load_projset,
                             parse_complex, parse_model, parse_script)
from qcnet.qcn import CheckPolicy, build_joint, parameter_count
from qcnet.qstate import ProjectionSet

ONE = """node X dim=2
root {X} component matrix=[1,0;0,0]
projset Z on X proj=[1,0;0,0] proj=[0,0;0,1] labels=up,down
"""


def text(name):
    with open(model_path(name), encoding="utf-8") as f:
        return f.read()


def run(capsys, *argv):
    rc = main([str(a) for a in argv])
    out = capsys.readouterr()
    return rc, out.out, out.err


@pytest.mark.parametrize("s,z", [("1", 1), ("-2.5", -2.5), ("i", 1j), ("-i", -1j), ("3i", 3j),
                                 ("1+2i", 1 + 2j), ("0.5-0.25i", 0.5 - 0.25j), ("1e-3", 1e-3)])
def test_parse_complex(s, z):
    assert parse_complex(s) == z
    assert parse_complex(format_number(z)) == z


@pytest.mark.parametrize("bad", ["", "1+", "ii", "1+2", "nan", "2j"])
def test_parse_complex_rejects(bad):
    with pytest.raises(ValueError):
        parse_complex(bad)


def test_self_loop_message():
    with pytest.raises(ParseError) as err:
        parse_model("node X dim=2\nedge X -> X\n")
    assert err.value.line == 2
    assert "self-loop" in str(err.value)


def test_unknown_reference_positions():
    with pytest.raises(ParseError) as err:
        parse_model("node X dim=2\nedge X -> Y\n")
    assert err.value.line == 2
    with pytest.raises(ParseError):
        parse_model("node X dim=2\nfrobnicate X\n")


def test_semantic_errors_collect_all_issues():
    doc = parse_model("node X dim=2\nnode Y dim=2\nroot {X} component matrix=[0.5,0;0,0]\n")
    with pytest.raises(SemanticError) as err:
        load_qcn(doc)
    lines = [i[0] for i in err.value.issues]
    # the bad trace on line 3 and the missing distribution for Y on line 2
    assert lines == [2, 3]


def test_undeclared_parent_channel_rejected():
    src = ("node V dim=2\nnode W dim=2\nnode X dim=2\nedge V -> X\nedge V -- W\n"
           "root {V,W} component matrix=[0.5,0,0,0.5;0,0,0,0;0,0,0,0;0.5,0,0,0.5]\n")
    # channel that copies W, which is only a non-influencing parent
    kraus = "kraus=[1,0,0,0;0,0,0,0],[0,0,0,0;0,1,0,0],[0,0,1,0;0,0,0,0],[0,0,0,0;0,0,0,1]"
    bad = src + f"channel {{X}} from {{V,W}} component {kraus}\n"
    with pytest.raises(SemanticError, match="does not respect"):
        load_qcn(parse_model(bad))
    good = bad.replace("edge V -> X\n", "edge V -> X\nedge W -> X\n")
    load_qcn(parse_model(good))


@pytest.mark.parametrize("name", ["chain.qcn", "bell.qcn", "nine_node.qcn"])
def test_bundled_models_round_trip(name):
    doc = parse_model(text(name))
    q = load_qcn(doc)
    projsets = {k: load_projset(doc, k) for k in doc.projsets}
    again = parse_model(dump_model(q, projsets))
    q2 = load_qcn(again)
    assert q2.graph.edge_lists() == q.graph.edge_lists()
    assert np.abs(build_joint(q).operator.matrix - build_joint(q2).operator.matrix).max() < 1e-12
    assert sorted(again.projsets) == sorted(doc.projsets)


def test_graph_only_model():
    doc = parse_model(text("nine_node_graph.qcn"))
    assert doc.graph_only
    assert len(load_graph(doc).ids) == 9


@settings(max_examples=15, deadline=None)
@given(st.integers(1, 4), st.integers(0, 2**31 - 1))
def test_random_network_round_trip(n, seed):
    q = random_network(np.random.default_rng(seed), n)
    q2 = load_qcn(parse_model(dump_model(q)), policy=None)
    for members, ld in q.locals.items():
        ld2 = q2.locals[members]
        if ld.is_root:
            assert all(np.abs(a - b).max() == 0 for a, b in zip(ld.components, ld2.components))
        else:
            assert all(np.abs(a - b).max() == 0 for x, y in zip(ld.components, ld2.components)
                       for a, b in zip(x.kraus, y.kraus))


@settings(max_examples=200, deadline=None)
@given(st.data())
def test_mutated_models_fail_cleanly(data):
    src = text(data.draw(st.sampled_from(["chain.qcn", "bell.qcn", "nine_node.qcn"])))
    k = data.draw(st.integers(0, len(src)))
    junk = data.draw(st.text(alphabet="{}[],;=-> \n#XYAB01.ie+", max_size=6))
    cut = data.draw(st.integers(0, 6))
    mutated = src[:k] + junk + src[k + cut:]
    try:
        # canonical fiducials only, to keep the fuzz loop fast
        load_qcn(parse_model(mutated), CheckPolicy(samples=0))
    except (ParseError, SemanticError):
        pass


def test_script_resolution():
    doc = parse_model(text("chain.qcn"))
    ivs = parse_script(text("chain.seq"), doc)
    assert [iv.describe() for iv in ivs] == ["rd(Y)", "rd(Y)"]
    with pytest.raises(ParseError):
        parse_script("reduce X Z\n", doc)
    with pytest.raises(ParseError):
        parse_script("do Y zero\n", doc)
    with pytest.raises(ParseError):
        parse_script("measure Y Z\n", doc)


def test_bundled_parameter_counts():
    q = load_qcn(parse_model(text("chain.qcn")))
    assert [parameter_count(q, c) for c in q.cn_sets] == [3, 12]


def test_cli_success_outputs(capsys):
    rc, out, _ = run(capsys, "reduce", model_path("chain.qcn"), "--target", "Y", "--projset", "Z")
    assert rc == 0
    rep = json.loads(out)
    assert [(o["label"], o["probability"]) for o in rep["outcomes"]] == [("0", "0.7"), ("1", "0.3")]
    rc, out, _ = run(capsys, "marginal", model_path("bell.qcn"), "--nodes", "B")
    assert rc == 0 and json.loads(out)["operator"] == [["0.5+0i", "0+0i"], ["0+0i", "0.5+0i"]]
    rc, out, _ = run(capsys, "do", model_path("bell.qcn"), "--target", "A", "--state", "zero")
    assert rc == 0 and json.loads(out)["network"]["undirected_edges"] == []
    rc, out, _ = run(capsys, "validate", model_path("nine_node_graph.qcn"))
    assert rc == 0 and json.loads(out)["graph_only"]


def test_cli_exit_codes(capsys, tmp_path):
    one = tmp_path / "one.qcn"
    one.write_text(ONE)
    assert run(capsys, "reduce", one, "--target", "X", "--projset", "Z", "--outcome", "down")[0] == 3
    assert run(capsys, "reduce", one, "--target", "X", "--projset", "Z", "--outcome", "up")[0] == 0
    assert run(capsys, "reduce", one, "--target", "X", "--projset", "Q")[0] == 2
    assert run(capsys, "frobnicate", one)[0] == 2
    assert run(capsys, "joint", tmp_path / "missing.qcn")[0] == 2
    assert run(capsys, "marginal", one, "--nodes", "Y")[0] == 2
    bad = tmp_path / "bad.qcn"
    bad.write_text("node X dim=2\nnode Y dim=2\nroot {X} component matrix=[1,0;0,0]\n")
    rc, _, err = run(capsys, "validate", bad)
    assert rc == 1 and "line 2" in err
    loop = tmp_path / "loop.qcn"
    loop.write_text("node X dim=2\nedge X -> X\n")
    rc, _, err = run(capsys, "validate", loop)
    assert rc == 2 and "self-loop" in err
    assert run(capsys, "joint", model_path("nine_node.qcn"), "--dim-cap", "8")[0] == 1


@pytest.mark.parametrize("argv", [
    ["joint", "bell.qcn"],
    ["sequence", "chain.qcn", "--script", "chain.seq"],
    ["sequence", "bell.qcn", "--script", "bell.seq", "--sample", "--seed", "5"],
])
def test_cli_deterministic(capsys, argv):
    argv = [model_path(a) if a.endswith((".qcn", ".seq")) else a for a in argv]
    first = run(capsys, *argv)
    second = run(capsys, *argv)
    assert first[0] == 0 and first == second


def test_projset_labels_and_index():
    ps = ProjectionSet.computational(2, labels=("up", "down"))
    assert ps.index("down") == 1 and ps.index(0) == 0
