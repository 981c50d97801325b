"""Command-line front end.

Every verb prints JSON by default and a short human-readable form with
``--pretty``.  Exit codes: 0 success, 1 parse error, 2 precondition
violation, 3 cap exceeded.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import formats
from .errors import CapExceeded, ParseError, PreconditionError
from .graph_pair import initial_pair, is_invariant, minimize, relative_rank, tighten
from .mapping_torus import (
    FreeFactor,
    MappingTorus,
    detect_sub_mapping_torus,
    hnn_decomposition,
    invariant_free_factor_scan,
    normalize,
    parse_element,
    peripheral_candidates,
    subgroup_presentation,
)
from .one_relator import classify_one_relator
from .stallings import (
    basis,
    conjugate_into,
    core,
    fold,
    graph_from_words,
    induced_free_factor_system,
    membership,
    pullback,
    subgroup_graph,
)
from .words import Word, parse_endomorphism, parse_letters

DEFAULT_CAPS = {"n_cap": 10, "k_max": 8, "m_max": 6, "word_len_cap": 6, "m_cap": 16}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ParseError(message)


def _text_or_file(value: str) -> str:
    if value.startswith("@"):
        try:
            return Path(value[1:]).read_text()
        except OSError as exc:
            raise ParseError(f"cannot read {value[1:]}: {exc}") from exc
    return value


def _subgroup(value: str) -> tuple[str, list[Word]]:
    """``name:w,w`` or ``w,w``; ``@path`` reads the literal from a file."""
    value = _text_or_file(value).strip()
    name = ""
    if ":" in value:
        name, value = value.split(":", 1)
    words = [Word.parse(s) for s in value.replace("\n", ",").split(",") if s.strip()]
    return name.strip(), words


def _words(value: str) -> list[Word]:
    return _subgroup(value)[1]


def _psi(args):
    if not args.psi:
        raise ParseError("--psi is required")
    return parse_endomorphism(_text_or_file(args.psi), getattr(args, "rank", None))


def _graph_input(args):
    if args.graph:
        return formats.parse_graph(_text_or_file(args.graph))
    if args.subgroup:
        return graph_from_words(_words(args.subgroup), args.rank)
    raise ParseError("give --graph or --subgroup")


def _graph_result(g, args):
    if args.dot:
        return formats.to_dot(g)
    if args.pretty:
        return formats.format_graph(g)
    return formats.graph_to_json(g)


def cmd_fold(args):
    return _graph_result(fold(_graph_input(args))[0], args)


def cmd_core(args):
    return _graph_result(core(fold(_graph_input(args))[0]), args)


def cmd_basis(args):
    g = subgroup_graph(_words(args.subgroup), args.rank)
    b = basis(g)
    if args.pretty:
        return "\n".join(map(str, b)) or "(trivial)"
    return {"basis": [str(w) for w in b], "rank": len(b)}


def cmd_member(args):
    g = subgroup_graph(_words(args.subgroup), args.rank)
    ok = membership(g, Word.parse(args.word))
    return ("true" if ok else "false") if args.pretty else {"member": ok}


def _two_subgroups(args):
    if not args.subgroup or len(args.subgroup) != 2:
        raise ParseError("give --subgroup twice")
    return _words(args.subgroup[0]), _words(args.subgroup[1])


def cmd_intersect(args):
    h, k = _two_subgroups(args)
    pb = pullback(subgroup_graph(h, args.rank), subgroup_graph(k, args.rank))
    based = pb.based_component
    comps = [
        {"representative": str(c.representative), "basis": [str(w) for w in c.intersection_basis], "based": c.based}
        for c in pb.components
    ]
    out = {"intersection": [str(w) for w in (based.intersection_basis if based else [])], "components": comps}
    if args.pretty:
        lines = ["H ∩ K = <" + ", ".join(out["intersection"]) + ">"]
        lines += [f"  g = {c['representative']}: <{', '.join(c['basis'])}>" for c in comps]
        return "\n".join(lines)
    return out


def cmd_conj_into(args):
    h, k = _two_subgroups(args)
    f = conjugate_into(h, k, args.rank)
    if args.pretty:
        return "not conjugate into" if f is None else f"f = {f}"
    return {"conjugator": None if f is None else str(f)}


def cmd_ffs(args):
    if not args.factor:
        raise ParseError("give at least one --factor")
    factors = []
    for text in args.factor:
        letters = parse_letters(text)
        if any(x < 0 for x in letters):
            raise ParseError(f"factor letters must be positive generators: {text!r}")
        factors.append(letters)
    entries = induced_free_factor_system(_words(args.subgroup), factors, args.rank)
    out = [{"factor": e.factor + 1 if isinstance(e.factor, int) else e.factor,
            "basis": [str(w) for w in e.basis], "conjugator": str(e.conjugator)} for e in entries]
    if args.pretty:
        return "\n".join(f"A{o['factor']}^{o['conjugator']} ∩ H = <{', '.join(o['basis'])}>" for o in out) or "(empty)"
    return {"entries": out}


def _write_trace(args, trace):
    if args.trace:
        Path(args.trace).write_text(json.dumps(trace, indent=1, default=str) + "\n")


def _pair_input(args, psi):
    if args.pair:
        return formats.parse_pair(_text_or_file(args.pair))
    if args.gens:
        return initial_pair(_words(args.gens), psi)
    raise ParseError("give --pair or --gens")


def cmd_tighten(args):
    psi = _psi(args)
    p = _pair_input(args, psi)
    if not is_invariant(p, psi):
        raise PreconditionError("input pair is not psi-invariant")
    trace: list = []
    q = tighten(p, psi, trace)
    _write_trace(args, trace)
    if args.dot:
        return formats.to_dot(q)
    if args.pretty:
        return formats.format_pair(q) + f"rr = {relative_rank(q)}"
    return {"pair": formats.pair_to_json(q), "rr": relative_rank(q), "steps": len(trace)}


def cmd_minimize(args):
    psi = _psi(args)
    p = _pair_input(args, psi)
    if not is_invariant(p, psi):
        raise PreconditionError("input pair is not psi-invariant")
    res = minimize(p, psi, args.n_cap)
    _write_trace(args, res.trace)
    if args.dot:
        return formats.to_dot(res.pair)
    c = [str(w) for w in res.complement.basis_words]
    if args.pretty:
        return (formats.format_pair(res.pair) + f"C = <{', '.join(c)}>\nrr = {res.relative_rank}, "
                f"theta checked up to n = {res.certificate_level}")
    return {"pair": formats.pair_to_json(res.pair), "complement": c, "rr": res.relative_rank,
            "certificate_level": res.certificate_level, "rounds": res.rounds}


def _torus(args):
    return MappingTorus(_psi(args))


def _elements(value: str):
    return [parse_element(s) for s in _text_or_file(value).replace("\n", ",").split(",") if s.strip()]


def cmd_present(args):
    M = _torus(args)
    if not args.gens:
        raise ParseError("--gens is required")
    pres = subgroup_presentation(_elements(args.gens), M, args.n_cap)
    if args.trace and not pres.free:
        _write_trace(args, pres.rounds)
    return formats.presentation_text(pres).rstrip("\n") if args.pretty else formats.presentation_to_json(pres)


def cmd_euler(args):
    M = _torus(args)
    if not args.gens:
        raise ParseError("--gens is required")
    pres = subgroup_presentation(_elements(args.gens), M, args.n_cap)
    level = None if pres.free else pres.certificate_level
    return f"chi = {pres.chi}" if args.pretty else {"chi": pres.chi, "certificate_level": level}


def cmd_normalize(args):
    M = _torus(args)
    e = normalize(parse_element(args.word), M)
    return str(e) if args.pretty else {"a": e.a, "w": str(e.w), "b": e.b, "normal_form": str(e)}


def cmd_submt(args):
    M = _torus(args)
    cert = detect_sub_mapping_torus(_words(args.subgroup), M, args.k_max)
    if cert is None:
        return f"not found for k <= {args.k_max}" if args.pretty else {"found": False, "k_max": args.k_max}
    stable = cert.stable_element(M)
    if args.pretty:
        return f"k = {cert.k}, f = {cert.f}; <H, {stable}> is a mapping torus of H"
    return {"found": True, "k": cert.k, "f": str(cert.f), "h_basis": [str(w) for w in cert.h_basis],
            "stable_element": str(stable), "chi": 0}


def cmd_hnn(args):
    images = [s for s in _text_or_file(args.images).replace("\n", ";").split(";") if s.strip()]
    d = hnn_decomposition(args.a_rank, args.c_rank, images, args.m_cap)
    out = d.as_dict()
    if args.pretty:
        return "\n".join(f"{k}: {v}" for k, v in out.items())
    return out


def cmd_peripherals(args):
    M = _torus(args)
    if not args.factor:
        raise ParseError("give at least one --factor")
    factors = [FreeFactor(tuple(parse_letters(s))) for s in args.factor]
    f_list = None
    if args.conjugators:
        f_list = [Word.parse(s) for s in args.conjugators.split(",")]
    result = peripheral_candidates(M, factors, f_list)
    out = [{"index": p.index, "orbit": p.orbit, "h": str(p.h), "generators": [str(g) for g in p.generators],
            "k": p.certificate.k, "f": str(p.certificate.f)} for p in result]
    if args.pretty:
        return "\n".join(f"A{o['index']}: orbit {o['orbit']}, h = {o['h']}, H = <{', '.join(o['generators'])}>"
                         for o in out) or "(no periodic factors)"
    return {"peripherals": out}


def cmd_irr_scan(args):
    M = _torus(args)
    r = invariant_free_factor_scan(M, args.word_len_cap, args.m_max)
    if args.pretty:
        return r.verdict
    return {"found": r.found, "factor": [str(w) for w in r.factor], "m": r.m,
            "conjugator": None if r.conjugator is None else str(r.conjugator),
            "verdict": r.verdict, "candidates_checked": r.candidates_checked}


def _pirank_payload(w, args):
    v = classify_one_relator(w, args.rank, args.max_len, args.budget)
    return v, {
        "pi": v.pi.as_json_value(),
        "witnesses": [{"basis": [str(b) for b in x.basis], "w": str(x.expression)} for x in v.pi.witnesses],
        "verdict": v.verdict,
    }


def cmd_pirank(args):
    v, out = _pirank_payload(Word.parse(args.word), args)
    return f"pi = {out['pi']}" if args.pretty else out


def cmd_classify(args):
    v, out = _pirank_payload(Word.parse(args.word), args)
    return f"{v.verdict} (pi = {out['pi']})" if args.pretty else out


COMMANDS = {
    "fold": cmd_fold,
    "core": cmd_core,
    "basis": cmd_basis,
    "member": cmd_member,
    "intersect": cmd_intersect,
    "conj-into": cmd_conj_into,
    "ffs": cmd_ffs,
    "tighten": cmd_tighten,
    "minimize": cmd_minimize,
    "present": cmd_present,
    "euler": cmd_euler,
    "normalize": cmd_normalize,
    "submt": cmd_submt,
    "hnn": cmd_hnn,
    "peripherals": cmd_peripherals,
    "irr-scan": cmd_irr_scan,
    "pirank": cmd_pirank,
    "classify": cmd_classify,
}


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="freetori", description="Stallings graphs, graph pairs and mapping tori of free group endomorphisms.")
    sub = p.add_subparsers(dest="verb", required=True, parser_class=_Parser)

    def common(sp):
        sp.add_argument("--pretty", action="store_true", help="human-readable text instead of JSON")
        sp.add_argument("--rank", type=int, default=None, help="ambient free group rank")
        return sp

    for verb in ("fold", "core"):
        sp = common(sub.add_parser(verb))
        sp.add_argument("--graph", help="graph text or @file")
        sp.add_argument("--subgroup", help="name:w,w,...")
        sp.add_argument("--dot", action="store_true")
    for verb in ("basis", "member", "ffs"):
        sp = common(sub.add_parser(verb))
        sp.add_argument("--subgroup", required=True)
    sub.choices["member"].add_argument("--word", required=True)
    sub.choices["ffs"].add_argument("--factor", action="append", help="letters of one free factor, e.g. 'ab'")
    for verb in ("intersect", "conj-into"):
        sp = common(sub.add_parser(verb))
        sp.add_argument("--subgroup", action="append", help="give twice: H then K")
    for verb in ("tighten", "minimize"):
        sp = common(sub.add_parser(verb))
        sp.add_argument("--psi", required=True)
        sp.add_argument("--pair", help="pair text or @file")
        sp.add_argument("--gens", help="X generators; builds the initial pair")
        sp.add_argument("--trace", help="write the fold/descent trace JSON here")
        sp.add_argument("--dot", action="store_true")
        sp.add_argument("--n-cap", type=int, default=DEFAULT_CAPS["n_cap"])
    for verb in ("present", "euler"):
        sp = common(sub.add_parser(verb))
        sp.add_argument("--psi", required=True)
        sp.add_argument("--gens", required=True, help="comma-separated words over the basis and t/T")
        sp.add_argument("--n-cap", type=int, default=DEFAULT_CAPS["n_cap"])
        sp.add_argument("--trace")
    sp = common(sub.add_parser("normalize"))
    sp.add_argument("--psi", required=True)
    sp.add_argument("--word", required=True)
    sp = common(sub.add_parser("submt"))
    sp.add_argument("--psi", required=True)
    sp.add_argument("--subgroup", required=True)
    sp.add_argument("--k-max", type=int, default=DEFAULT_CAPS["k_max"])
    sp = common(sub.add_parser("hnn"))
    sp.add_argument("--a-rank", type=int, required=True)
    sp.add_argument("--c-rank", type=int, required=True)
    sp.add_argument("--images", required=True, help="';'-separated images of A's letters, c[i,j] for graded letters")
    sp.add_argument("--m-cap", type=int, default=DEFAULT_CAPS["m_cap"])
    sp = common(sub.add_parser("peripherals"))
    sp.add_argument("--psi", required=True)
    sp.add_argument("--factor", action="append")
    sp.add_argument("--conjugators", help="comma-separated f_i, one per factor")
    sp = common(sub.add_parser("irr-scan"))
    sp.add_argument("--psi", required=True)
    sp.add_argument("--word-len-cap", type=int, default=DEFAULT_CAPS["word_len_cap"])
    sp.add_argument("--m-max", type=int, default=DEFAULT_CAPS["m_max"])
    for verb in ("pirank", "classify"):
        sp = common(sub.add_parser(verb))
        sp.add_argument("word")
        sp.add_argument("--max-len", type=int, default=16)
        sp.add_argument("--budget", type=int, default=None)
    return p


def run(argv, out=None, err=None) -> int:
    out = out or sys.stdout
    err = err or sys.stderr
    try:
        args = build_parser().parse_args(argv)
        if getattr(args, "rank", None) is None and args.verb in ("pirank", "classify"):
            args.rank = max(Word.parse(args.word).max_index(), 1)
        result = COMMANDS[args.verb](args)
    except ParseError as exc:
        print(f"parse error: {exc}", file=err)
        return 1
    except CapExceeded as exc:
        print(f"cap exceeded: {exc}", file=err)
        return 3
    except PreconditionError as exc:
        print(f"precondition failed: {exc}", file=err)
        return 2
    if isinstance(result, str):
        print(result.rstrip("\n"), file=out)
    else:
        print(formats.dumps(result), file=out)
    return 0


def main() -> None:
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
