"""Text, JSON and DOT serialisation for graphs, pairs and presentations.

Graph text::

    vertices 2 basepoint 0 rank 2
    0 -a-> 0
    0 -b-> 1

A pair adds one line ``X: e0 e2`` naming its X-edges by index.
"""
from __future__ import annotations

import json
import re

from .errors import ParseError
from .graph_pair import GraphPair
from .mapping_torus import FreeSubgroup, MappingTorusPresentation, MTElement, Relation
from .stallings import StallingsGraph
from .words import Word, format_letter, parse_endomorphism, parse_letters

_HEADER = re.compile(r"vertices\s+(\d+)(?:\s+basepoint\s+(\S+))?(?:\s+rank\s+(\d+))?$")
_EDGE = re.compile(r"(\d+)\s+-(\S+?)->\s+(\d+)$")


def format_graph(g: StallingsGraph) -> str:
    bp = "none" if g.basepoint is None else g.basepoint
    lines = [f"vertices {g.num_vertices} basepoint {bp} rank {g.rank}"]
    lines += [f"{u} -{format_letter(x)}-> {v}" for u, x, v in g.edges]
    return "\n".join(lines) + "\n"


def _parse_graph_lines(lines: list[str]) -> StallingsGraph:
    if not lines:
        raise ParseError("empty graph text")
    m = _HEADER.match(lines[0])
    if not m:
        raise ParseError(f"bad graph header {lines[0]!r}")
    n = int(m.group(1))
    bp = None if m.group(2) in (None, "none") else int(m.group(2))
    edges = []
    for line in lines[1:]:
        e = _EDGE.match(line)
        if not e:
            raise ParseError(f"bad edge line {line!r}")
        letters = parse_letters(e.group(2))
        if len(letters) != 1:
            raise ParseError(f"edge label must be one letter: {line!r}")
        u, v, x = int(e.group(1)), int(e.group(3)), letters[0]
        edges.append((u, x, v) if x > 0 else (v, -x, u))
    rank = int(m.group(3)) if m.group(3) else None
    try:
        return StallingsGraph(n, edges, bp, rank)
    except ValueError as exc:
        raise ParseError(str(exc)) from exc


def _content_lines(text: str) -> list[str]:
    out = []
    for line in text.splitlines():
        line = line.split("#", 1)[0].strip()
        if line:
            out.append(line)
    return out


def parse_graph(text: str) -> StallingsGraph:
    return _parse_graph_lines(_content_lines(text))


def format_pair(p: GraphPair) -> str:
    return format_graph(p.Z) + "X: " + " ".join(f"e{e}" for e in sorted(p.X)) + "\n"


def parse_pair(text: str) -> GraphPair:
    lines = _content_lines(text)
    x_lines = [line for line in lines if line.startswith("X:")]
    if len(x_lines) != 1:
        raise ParseError("a pair needs exactly one 'X:' line")
    z = _parse_graph_lines([line for line in lines if not line.startswith("X:")])
    xs = []
    for tok in x_lines[0][2:].split():
        if not re.fullmatch(r"e?\d+", tok):
            raise ParseError(f"bad X-edge token {tok!r}")
        xs.append(int(tok.lstrip("e")))
    return GraphPair(z, frozenset(xs))


def to_dot(obj, name: str = "G") -> str:
    """DOT for a graph or pair; X-edges are drawn bold and blue."""
    if isinstance(obj, GraphPair):
        g, xs = obj.Z, obj.X
    else:
        g, xs = obj, frozenset()
    lines = [f"digraph {name} {{"]
    for v in range(g.num_vertices):
        shape = "doublecircle" if v == g.basepoint else "circle"
        lines.append(f'  v{v} [shape={shape}, label="{v}"];')
    for i, (u, x, v) in enumerate(g.edges):
        style = ', style=bold, color=blue' if i in xs else ""
        lines.append(f'  v{u} -> v{v} [label="{format_letter(x)}"{style}];')
    lines.append("}")
    return "\n".join(lines) + "\n"


def graph_to_json(g: StallingsGraph) -> dict:
    return {
        "vertices": g.num_vertices,
        "basepoint": g.basepoint,
        "rank": g.rank,
        "edges": [[u, format_letter(x), v] for u, x, v in g.edges],
    }


def pair_to_json(p: GraphPair) -> dict:
    d = graph_to_json(p.Z)
    d["X"] = sorted(p.X)
    return d


def _z_token(x: int) -> str:
    return f"z{x}" if x > 0 else f"z{-x}^-1"


def z_expression(w: Word) -> str:
    return " ".join(_z_token(x) for x in w.letters) or "1"


def parse_z_expression(text: str) -> Word:
    text = text.strip()
    if text == "1":
        return Word()
    out = []
    for tok in text.split():
        m = re.fullmatch(r"z(\d+)(\^-1)?", tok)
        if not m:
            raise ParseError(f"bad basis token {tok!r}")
        i = int(m.group(1))
        out.append(-i if m.group(2) else i)
    return Word(out)


def presentation_to_json(pres) -> dict:
    if isinstance(pres, FreeSubgroup):
        return {
            "free": True,
            "rank": pres.rank,
            "basis": [str(w) for w in pres.basis],
            "conjugated_by": f"t^{pres.shift}",
            "shift": pres.shift,
            "chi": pres.chi,
        }
    return {
        "free": False,
        "generators": [{"name": f"z{i + 1}", "word": str(w)} for i, w in enumerate(pres.z_basis)],
        "x_basis": [f"z{i + 1}" for i in range(len(pres.x_basis))],
        "stable": "t",
        "stable_element": str(pres.stable),
        "relations": [{"lhs": f"t^-1 z{r.x} t", "rhs": z_expression(r.rhs)} for r in pres.relations],
        "chi": pres.chi,
        "rr": pres.rr,
        "certificate_level": pres.certificate_level,
        "m": pres.m,
        "shift": pres.shift,
        "h": str(pres.h),
        "psi_prime": str(pres.psi_prime),
    }


def presentation_from_json(d: dict):
    if d.get("free"):
        return FreeSubgroup([Word.parse(w) for w in d["basis"]], d["shift"])
    z = [Word.parse(g["word"]) for g in d["generators"]]
    rels = []
    for r in d["relations"]:
        m = re.fullmatch(r"t\^-1 z(\d+) t", r["lhs"])
        if not m:
            raise ParseError(f"bad relation lhs {r['lhs']!r}")
        rels.append(Relation(int(m.group(1)), parse_z_expression(r["rhs"])))
    tokens = parse_letters(d["stable_element"], allow_stable=True)
    a = 0
    while a < len(tokens) and tokens[a] == "t":
        a += 1
    b = 0
    while b < len(tokens) - a and tokens[len(tokens) - 1 - b] == "T":
        b += 1
    core = tokens[a: len(tokens) - b]
    if any(isinstance(x, str) for x in core):
        raise ParseError("stable element must be written t^a w t^-b")
    psi_prime = parse_endomorphism(d["psi_prime"])
    return MappingTorusPresentation(
        z_basis=z,
        x_basis=z[: len(d["x_basis"])],
        relations=rels,
        psi_prime=psi_prime,
        m=d["m"],
        shift=d["shift"],
        h=Word.parse(d["h"]),
        stable=MTElement(a, Word(core), b),
        certificate_level=d["certificate_level"],
        rr=d["rr"],
    )


def presentation_text(pres) -> str:
    if isinstance(pres, FreeSubgroup):
        lines = [f"free of rank {pres.rank} (conjugated into F by t^{pres.shift})"]
        lines += [f"  {w}" for w in pres.basis]
        lines.append(f"chi = {pres.chi}")
        return "\n".join(lines) + "\n"
    names = [f"z{i + 1}" for i in range(len(pres.z_basis))]
    head = ", ".join(names + ["t"])
    rels = ", ".join(f"t^-1 z{r.x} t = {z_expression(r.rhs)}" for r in pres.relations)
    lines = [f"< {head} | {rels} >"]
    lines += [f"  z{i + 1} = {w}" for i, w in enumerate(pres.z_basis)]
    lines.append(f"  t = {pres.stable}")
    lines.append(f"chi = {pres.chi}  (rr {pres.rr}, theta checked up to n = {pres.certificate_level})")
    return "\n".join(lines) + "\n"


def dumps(obj, pretty: bool = False) -> str:
    return json.dumps(obj, indent=2 if pretty else None, sort_keys=True, ensure_ascii=False)
