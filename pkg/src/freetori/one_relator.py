"""Primitivity, primitivity rank and the local quasi-convexity test for one-relator groups."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import lru_cache
from .errors import AlphabetMismatch, CapExceeded, PreconditionError
from .stallings import SpanningBasis, StallingsGraph, canonical_form
from .words import Word

INF = math.inf


@lru_cache(maxsize=16)
def whitehead_moves(rank: int) -> tuple[tuple[tuple[int, ...], ...], ...]:
    """All non-trivial type II Whitehead automorphisms of F_rank, as image tuples.

    For a multiplier letter ``a`` every other generator x goes to one of
    x, xa, a^-1 x, a^-1 x a.
    """
    moves = []
    for a in [s * i for i in range(1, rank + 1) for s in (1, -1)]:
        others = [i for i in range(1, rank + 1) if i != abs(a)]
        for choice in itertools.product(range(4), repeat=len(others)):
            if not any(choice):
                continue
            images: list[tuple[int, ...]] = [()] * rank
            images[abs(a) - 1] = (abs(a),)
            for x, c in zip(others, choice):
                images[x - 1] = [(x,), (x, a), (-a, x), (-a, x, a)][c]
            moves.append(tuple(images))
    return tuple(moves)


def _apply_move(images, letters) -> Word:
    out: list[int] = []
    for x in letters:
        img = images[abs(x) - 1]
        out.extend(img if x > 0 else [-y for y in reversed(img)])
    return Word(out).cyclic_reduction()[0]


def _cyclic_key(w: Word) -> tuple:
    return min(r.letters for r in w.rotations())


def whitehead_minimize(w: Word, rank: int) -> Word:
    """Greedy cyclic-length reduction by Whitehead automorphisms."""
    w = w.cyclic_reduction()[0]
    moves = whitehead_moves(rank)
    improved = True
    while improved and len(w) > 1:
        improved = False
        for mv in moves:
            v = _apply_move(mv, w.letters)
            if len(v) < len(w):
                w, improved = v, True
                break
    return w


def _plateau_search(w: Word, rank: int, depth: int = 3) -> Word | None:
    """A shorter word reached after up to ``depth`` length-preserving moves, if any."""
    moves = whitehead_moves(rank)
    frontier = [w]
    seen = {_cyclic_key(w)}
    for _ in range(depth):
        nxt = []
        for u in frontier:
            for mv in moves:
                v = _apply_move(mv, u.letters)
                if len(v) < len(u):
                    return v
                if len(v) == len(u) and _cyclic_key(v) not in seen:
                    seen.add(_cyclic_key(v))
                    nxt.append(v)
        frontier = nxt
    return None


def is_primitive(w: Word, rank: int) -> bool:
    """Is ``w`` part of a free basis of F_rank?

    A primitive word of cyclic length > 1 always admits a length-reducing
    Whitehead move, so greedy reduction decides; at rank <= 3 a bounded
    search over length-preserving moves double-checks a stuck word.
    """
    if w.max_index() > rank:
        raise AlphabetMismatch(f"{w} uses letters beyond rank {rank}")
    if not w:
        return False
    while True:
        w = whitehead_minimize(w, rank)
        if len(w) == 1:
            return True
        shorter = _plateau_search(w, rank) if rank <= 3 else None
        if shorter is None:
            return False
        w = shorter


@dataclass
class Witness:
    basis: list[Word]
    expression: Word


@dataclass
class PrimRankResult:
    value: float
    witnesses: list[Witness] = field(default_factory=list)
    candidates: int = 0

    def as_json_value(self):
        return "inf" if self.value == INF else int(self.value)


def cycle_quotients(w: Word, rank: int | None = None, budget: int | None = None) -> list[StallingsGraph]:
    """Folded quotients of the cycle labelled by a cyclically reduced ``w``, up to based isomorphism.

    A depth-first walk reads ``w`` from the basepoint; at each undefined
    step it either joins an existing vertex missing that edge end or makes
    a fresh vertex, and the walk must close up at the basepoint.
    """
    letters = w.letters
    rank = rank or w.max_index()
    found: dict[tuple, StallingsGraph] = {}
    counter = [0]

    def walk(i, v, nv, out_edges, edges):
        counter[0] += 1
        if budget is not None and counter[0] > budget:
            raise CapExceeded(f"primitivity-rank enumeration exceeded budget {budget}")
        if i == len(letters):
            if v == 0:
                g = StallingsGraph(nv, list(edges), 0, rank)
                found.setdefault(canonical_form(g), g)
            return
        x = letters[i]
        if (v, x) in out_edges:
            walk(i + 1, out_edges[(v, x)], nv, out_edges, edges)
            return
        last = i == len(letters) - 1
        targets = [u for u in range(nv) if (u, -x) not in out_edges]
        if last:
            targets = [u for u in targets if u == 0]
        else:
            targets.append(nv)
        for u in targets:
            out_edges[(v, x)] = u
            out_edges[(u, -x)] = v
            edges.append((v, x, u) if x > 0 else (u, -x, v))
            walk(i + 1, u, max(nv, u + 1), out_edges, edges)
            edges.pop()
            del out_edges[(v, x)]
            if (u, -x) in out_edges:
                del out_edges[(u, -x)]

    walk(0, 0, 1, {}, [])
    return [found[k] for k in sorted(found)]


def primitivity_rank(w: Word, rank: int, max_len: int = 16, budget: int | None = None) -> PrimRankResult:
    """Least rank of a subgroup containing ``w`` as a non-primitive element (inf if none)."""
    if not w:
        raise PreconditionError("primitivity rank is undefined for the identity")
    if w.max_index() > rank:
        raise AlphabetMismatch(f"{w} uses letters beyond rank {rank}")
    c, u = w.cyclic_reduction()
    if len(c) > max_len:
        raise CapExceeded(f"cyclic length {len(c)} exceeds max_len {max_len}")
    best = INF
    witnesses: list[Witness] = []
    quotients = cycle_quotients(c, rank, budget)
    for g in quotients:
        r = g.betti()
        if r > best:
            continue
        sb = SpanningBasis(g)
        expr = sb.express(c)
        assert expr is not None, "the cycle word must read a loop in its quotient"
        if is_primitive(expr, r):
            continue
        conj = [u * b * u.inverse() for b in sb.words]
        if r < best:
            best, witnesses = r, []
        witnesses.append(Witness(conj, expr))
    return PrimRankResult(best, witnesses, len(quotients))


@dataclass
class OneRelatorVerdict:
    verdict: str
    pi: PrimRankResult

    @property
    def lqc_hyperbolic(self) -> bool:
        return self.verdict == "lqc_hyperbolic"


def classify_one_relator(w: Word, rank: int, max_len: int = 16, budget: int | None = None) -> OneRelatorVerdict:
    """<F_rank | w> is locally quasi-convex hyperbolic exactly when pi(w) != 2."""
    pi = primitivity_rank(w, rank, max_len, budget)
    return OneRelatorVerdict("not_lqc" if pi.value == 2 else "lqc_hyperbolic", pi)
