import io
import json
import subprocess
import sys

from freetori import formats
from freetori.cli import run
from freetori.graph_pair import initial_pair, tighten
from freetori.mapping_torus import MappingTorus, relation_holds, subgroup_presentation
from freetori.stallings import StallingsGraph, is_isomorphic, subgroup_graph
from freetori.words import Word, parse_endomorphism


def call(*argv):
    out, err = io.StringIO(), io.StringIO()
    code = run(list(argv), out, err)
    return code, out.getvalue(), err.getvalue()


def call_json(*argv):
    code, out, err = call(*argv)
    assert code == 0, err
    return json.loads(out)


def test_graph_round_trip():
    g = subgroup_graph([Word.parse("abA"), Word.parse("bb")])
    assert is_isomorphic(formats.parse_graph(formats.format_graph(g)), g)
    h = formats.parse_graph("vertices 2 basepoint 0 rank 2\n0 -A-> 1\n1 -b-> 1\n")
    assert list(h.edges) == [(1, 1, 0), (1, 2, 1)]


def test_pair_round_trip():
    psi = parse_endomorphism("a->baB, b->a")
    p = tighten(initial_pair([Word.parse("a")], psi), psi)
    q = formats.parse_pair(formats.format_pair(p))
    assert q == p


def test_presentation_round_trip():
    M = MappingTorus(parse_endomorphism("a->ab, b->a"))
    pres = subgroup_presentation(["a", "tb"], M)
    back = formats.presentation_from_json(json.loads(formats.dumps(formats.presentation_to_json(pres))))
    assert back.z_basis == pres.z_basis and back.stable == pres.stable
    assert [(r.x, r.rhs) for r in back.relations] == [(r.x, r.rhs) for r in pres.relations]
    assert all(relation_holds(back, r, M) for r in back.relations)


def test_dot():
    loop = StallingsGraph(1, [(0, 1, 0)], 0)
    dot = formats.to_dot(loop)
    assert dot.count("->") == 1 and 'label="a"' in dot
    empty = formats.to_dot(StallingsGraph(0, [], None))
    assert empty == "digraph G {\n}\n"
    psi = parse_endomorphism("a->aa, b->b")
    pair = initial_pair([Word.parse("a")], psi)
    assert "style=bold" in formats.to_dot(pair)


def test_cli_examples():
    assert call_json("member", "--subgroup", "a2:aa", "--word", "aaaa") == {"member": True}
    out = call_json("present", "--psi", "a->aa", "--gens", "a,t")
    assert out["generators"] == [{"name": "z1", "word": "a"}]
    assert out["relations"] == [{"lhs": "t^-1 z1 t", "rhs": "z1 z1"}]
    assert out["chi"] == 0
    out = call_json("pirank", "abAB", "--rank", "2")
    assert out["pi"] == 2 and out["verdict"] == "not_lqc"
    assert call_json("pirank", "a", "--rank", "2")["pi"] == "inf"


def test_cli_other_verbs(tmp_path):
    assert call_json("basis", "--subgroup", "aa,b")["basis"] == ["aa", "b"]
    assert call_json("intersect", "--subgroup", "aa,b", "--subgroup", "aaa,b")["intersection"] == ["aaaaaa", "b"]
    assert call_json("conj-into", "--subgroup", "bAB", "--subgroup", "a")["conjugator"] is not None
    assert call_json("ffs", "--subgroup", "aa,b", "--factor", "a")["entries"][0]["basis"] == ["aa"]
    assert call_json("fold", "--subgroup", "aa,aaa")["edges"] == [[0, "a", 0]]
    assert call_json("core", "--subgroup", "abA")["edges"] == [[0, "b", 0]]
    assert call_json("euler", "--psi", "a->a, b->b", "--gens", "a,b,t")["chi"] == 0
    assert call_json("normalize", "--psi", "a->aa", "--word", "Tat")["normal_form"] == "aa"
    assert call_json("submt", "--psi", "a->b,b->a", "--subgroup", "a")["k"] == 2
    assert call_json("hnn", "--a-rank", "1", "--c-rank", "1", "--images", "ac[1,1]")["m"] == 1
    assert call_json("peripherals", "--psi", "a->b,b->a", "--factor", "a", "--factor", "b")["peripherals"][0]["h"] == "tt"
    assert call_json("irr-scan", "--psi", "a->a,b->b")["found"]
    assert call_json("classify", "aabb")["verdict"] == "not_lqc"
    trace = tmp_path / "trace.json"
    out = call_json("minimize", "--psi", "a->baB, b->a", "--gens", "a", "--trace", str(trace))
    assert out["rr"] == 0 and out["rounds"][0]["failed_level"] == 1
    assert any(r.get("kind") == "descent" for r in json.loads(trace.read_text()))
    pair_file = tmp_path / "pair.txt"
    pair_file.write_text("vertices 1 basepoint 0 rank 1\n0 -a-> 0\n0 -a-> 0\nX: e0\n")
    out = call_json("tighten", "--psi", "a->a", "--pair", "@" + str(pair_file))
    assert out["rr"] == 0 and out["pair"]["edges"] == [[0, "a", 0]]


def test_cli_exit_codes():
    assert call("member", "--subgroup", "a!", "--word", "a")[0] == 1
    assert call("nonsense")[0] == 1
    assert call("present", "--psi", "a->ab, b->ab", "--gens", "a,t")[0] == 2
    assert call("hnn", "--a-rank", "1", "--c-rank", "1", "--images", "ac[2,1]", "--m-cap", "1")[0] == 3
    assert call("pirank", "abababababababababab", "--rank", "2")[0] == 3
    assert call("tighten", "--psi", "a->aa, b->b", "--pair", "vertices 1 basepoint 0 rank 2\n0 -a-> 0\n0 -b-> 0\nX: e0")[0] == 2


def test_cli_determinism():
    argv = ["present", "--psi", "a->ab, b->a", "--gens", "a,tb"]
    assert call(*argv) == call(*argv)


def test_pretty_output():
    code, out, _ = call("present", "--psi", "a->aa", "--gens", "a,t", "--pretty")
    assert code == 0 and out.startswith("< z1, t | t^-1 z1 t = z1 z1 >")


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "freetori", "member", "--subgroup", "aa", "--word", "a"],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and json.loads(proc.stdout) == {"member": False}
