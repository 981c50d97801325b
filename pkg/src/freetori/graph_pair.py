"""Graph pairs (Z, X) over the rose and the Feighn-Handel tightening procedure.

A pair is a pointed connected labelled graph ``Z`` together with a set of
edges spanning a connected subgraph ``X`` through the basepoint.  ``Z#``
and ``X#`` are the images of the fundamental groups in the free group.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Sequence

from .errors import CapExceeded, PreconditionError
from .stallings import (
    SpanningBasis,
    StallingsGraph,
    _letter_key,
    fold,
    graph_from_words,
    image_subgroup_basis,
    induced_subgraph,
    membership,
    pointed_core,
    subgroup_graph,
    subgroup_rank,
    wedge,
)
from .words import Endomorphism, Word, apply, iterate

SUBGRAPH_FOLD = "subgraph_fold"
EXCEPTIONAL_FOLD = "exceptional_fold"
PLAIN_FOLD = "plain"

MAX_STEPS = 10_000


@dataclass(frozen=True)
class GraphPair:
    Z: StallingsGraph
    X: frozenset

    def __post_init__(self):
        object.__setattr__(self, "X", frozenset(self.X))
        if self.Z.basepoint is None:
            raise PreconditionError("Z must be pointed")
        if any(not 0 <= e < len(self.Z.edges) for e in self.X):
            raise PreconditionError("X lists an edge that is not in Z")
        if not self.Z.is_connected():
            raise PreconditionError("Z must be connected")
        if not self.x_graph().is_connected():
            raise PreconditionError("X must be connected and contain the basepoint")

    @property
    def x_vertices(self) -> frozenset:
        vs = {self.Z.basepoint}
        for e in self.X:
            u, _, v = self.Z.edges[e]
            vs.update((u, v))
        return frozenset(vs)

    def x_graph(self) -> StallingsGraph:
        sub, _, _ = induced_subgraph(self.Z, self.x_vertices, self.Z.basepoint, lambda e: e in self.X)
        return sub

    def is_tight(self) -> bool:
        return self.Z.is_folded()

    def z_words(self) -> list[Word]:
        """Generators of Z# (a free basis when Z is tight)."""
        return image_subgroup_basis(self.Z)

    def x_words(self) -> list[Word]:
        return image_subgroup_basis(self.x_graph())

    def relative_rank(self) -> int:
        return relative_rank(self)


def relative_rank(p: GraphPair) -> int:
    """rk pi_1(Z) - rk pi_1(X), i.e. -chi(Z, X)."""
    return (len(p.Z.edges) - len(p.X)) - (p.Z.num_vertices - len(p.x_vertices))


def initial_pair(x_gens: Sequence[Word], psi: Endomorphism) -> GraphPair:
    """X = wedge of loops spelling ``x_gens``; Z = X wedged with loops for their psi-images."""
    x_gens = [w for w in x_gens if w]
    images = [apply(psi, w) for w in x_gens]
    z = graph_from_words(list(x_gens) + [w for w in images if w], psi.rank)
    nx = sum(len(w) for w in x_gens)
    return GraphPair(z, frozenset(range(nx)))


def is_invariant(p: GraphPair, psi: Endomorphism) -> bool:
    """Z# = <X#, psi(X#)>, checked as two inclusions by membership."""
    xb = p.x_words()
    images = [apply(psi, w) for w in xb]
    zb = p.z_words()
    lhs = subgroup_graph(xb + images, psi.rank)
    if not all(membership(lhs, w) for w in zb):
        return False
    zg = subgroup_graph(zb, psi.rank)
    return all(membership(zg, w) for w in xb + images)


class _State:
    """Mutable working copy of a pair; vertex and edge ids are never reused."""

    def __init__(self, p: GraphPair):
        self.rank = p.Z.rank
        self.basepoint = p.Z.basepoint
        self.vertices = set(range(p.Z.num_vertices))
        self.edges = {i: e for i, e in enumerate(p.Z.edges)}
        self.X = set(p.X)
        self.next_vertex = p.Z.num_vertices
        self.next_edge = len(p.Z.edges)

    def x_vertices(self):
        vs = {self.basepoint}
        for e in self.X:
            u, _, v = self.edges[e]
            vs.update((u, v))
        return vs

    def relative_rank(self):
        return (len(self.edges) - len(self.X)) - (len(self.vertices) - len(self.x_vertices()))

    def ends(self):
        """vertex -> signed letter -> sorted edge ids leaving along that letter."""
        out: dict[int, dict[int, list[int]]] = {}
        for i in sorted(self.edges):
            u, x, v = self.edges[i]
            out.setdefault(u, {}).setdefault(x, []).append(i)
            out.setdefault(v, {}).setdefault(-x, []).append(i)
        return out

    def far_end(self, e, letter):
        u, _, v = self.edges[e]
        return v if letter > 0 else u

    def foldable_pairs(self):
        pairs = []
        for v, by_letter in self.ends().items():
            for letter, es in by_letter.items():
                es = sorted(set(es))
                for i in range(len(es)):
                    for j in range(i + 1, len(es)):
                        pairs.append((es[i], es[j], v, letter))
        return pairs

    def next_fold(self):
        pairs = self.foldable_pairs()
        if not pairs:
            return None
        x_pairs = [p for p in pairs if p[0] in self.X and p[1] in self.X]
        return min(x_pairs or pairs)

    def locate(self, e1, e2):
        for v, by_letter in self.ends().items():
            for letter in sorted(by_letter, key=_letter_key):
                es = by_letter[letter]
                if e1 in es and e2 in es:
                    return v, letter
        raise PreconditionError(f"edges {e1} and {e2} are not foldable")

    def classify(self, e1, e2, v, letter):
        if e1 in self.X and e2 in self.X:
            return SUBGRAPH_FOLD
        w1, w2 = self.far_end(e1, letter), self.far_end(e2, letter)
        xv = self.x_vertices()
        if w1 != w2 and w1 in xv and w2 in xv:
            return EXCEPTIONAL_FOLD
        return PLAIN_FOLD

    def x_path(self, target):
        """Label of a breadth-first path inside X from the basepoint to ``target``."""
        adj: dict[int, list[tuple[int, int, int]]] = {}
        for e in sorted(self.X):
            u, x, v = self.edges[e]
            adj.setdefault(u, []).append((x, v, e))
            adj.setdefault(v, []).append((-x, u, e))
        path = {self.basepoint: Word()}
        queue = deque([self.basepoint])
        while queue:
            u = queue.popleft()
            for x, w, _ in sorted(adj.get(u, []), key=lambda t: (_letter_key(t[0]), t[2])):
                if w not in path:
                    path[w] = path[u] * Word([x])
                    queue.append(w)
        return path[target]

    def do_fold(self, e1, e2, v, letter):
        """Identify e2 with e1 and their far endpoints."""
        w1, w2 = self.far_end(e1, letter), self.far_end(e2, letter)
        if e2 in self.X:
            self.X.add(e1)
        self.X.discard(e2)
        del self.edges[e2]
        if w1 != w2:
            keep, drop = (w2, w1) if w2 == self.basepoint else (w1, w2)
            for i, (a, x, b) in list(self.edges.items()):
                self.edges[i] = (keep if a == drop else a, x, keep if b == drop else b)
            self.vertices.discard(drop)

    def graph(self):
        order = sorted(self.vertices)
        vmap = {v: i for i, v in enumerate(order)}
        eids = sorted(self.edges)
        emap = {e: i for i, e in enumerate(eids)}
        z = StallingsGraph(len(order), [(vmap[u], x, vmap[v]) for u, x, v in (self.edges[e] for e in eids)],
                           vmap[self.basepoint], self.rank)
        return z, emap

    def to_pair(self):
        z, emap = self.graph()
        return GraphPair(z, frozenset(emap[e] for e in self.X))

    def wedge_in(self, g: StallingsGraph):
        vmap = {g.basepoint: self.basepoint}
        for v in range(g.num_vertices):
            if v not in vmap:
                vmap[v] = self.next_vertex
                self.vertices.add(self.next_vertex)
                self.next_vertex += 1
        for u, x, v in g.edges:
            self.edges[self.next_edge] = (vmap[u], x, vmap[v])
            self.next_edge += 1

    def prune(self):
        """Drop hanging trees away from the basepoint; ranks are unchanged."""
        while True:
            deg = {v: 0 for v in self.vertices}
            for u, _, v in self.edges.values():
                deg[u] += 1
                deg[v] += 1
            leaves = [v for v, d in deg.items() if d <= 1 and v != self.basepoint]
            if not leaves:
                return
            for leaf in leaves:
                for i, (u, _, v) in list(self.edges.items()):
                    if leaf in (u, v):
                        del self.edges[i]
                        self.X.discard(i)
                self.vertices.discard(leaf)


def _step(state: _State, psi: Endomorphism, fold_choice=None) -> dict:
    e1, e2, v, letter = fold_choice or state.next_fold()
    kind = state.classify(e1, e2, v, letter)
    delta = None
    if kind == EXCEPTIONAL_FOLD:
        w1, w2 = state.far_end(e1, letter), state.far_end(e2, letter)
        delta = state.x_path(w1) * state.x_path(w2).inverse()
    state.do_fold(e1, e2, v, letter)
    added = False
    if delta is not None:
        image = apply(psi, delta)
        z, _ = state.graph()
        z_sub = pointed_core(fold(z)[0])
        if not membership(z_sub, image):
            # invariance needs psi(delta), not delta (delta is already a loop of X_1)
            state.wedge_in(subgroup_graph([image], psi.rank))
            added = True
    return {
        "kind": kind,
        "edges": [e1, e2],
        "delta": None if delta is None else str(delta),
        "loop_added": added,
        "rr": state.relative_rank(),
    }


def classify_fold(p: GraphPair, e1: int, e2: int) -> str:
    state = _State(p)
    if e1 == e2 or e1 not in state.edges or e2 not in state.edges:
        raise PreconditionError("classify_fold needs two distinct edges of Z")
    v, letter = state.locate(e1, e2)
    return state.classify(e1, e2, v, letter)


def fold_add_loop(p: GraphPair, psi: Endomorphism, edges: tuple[int, int] | None = None,
                  trace: list | None = None) -> GraphPair:
    """One Z-fold, adding Gamma(psi(delta)) after an exceptional fold when needed.

    The caller must fold X first: if X itself is not folded this raises.
    """
    state = _State(p)
    if p.x_graph().is_folded() is False:
        raise PreconditionError("X is not tight; perform a subgraph fold first")
    if edges is None:
        choice = state.next_fold()
        if choice is None:
            raise PreconditionError("pair is already tight")
    else:
        choice = (*edges, *state.locate(*edges))
    record = _step(state, psi, choice)
    if trace is not None:
        trace.append(record)
    return state.to_pair()


def subgraph_fold(p: GraphPair, e1: int, e2: int) -> GraphPair:
    state = _State(p)
    v, letter = state.locate(e1, e2)
    if state.classify(e1, e2, v, letter) != SUBGRAPH_FOLD:
        raise PreconditionError("both edges must lie in X")
    state.do_fold(e1, e2, v, letter)
    return state.to_pair()


def tighten(p: GraphPair, psi: Endomorphism, trace: list | None = None,
            max_steps: int = MAX_STEPS) -> GraphPair:
    """Fold until Z immerses, X-folds first, adding loops to keep invariance.

    Each step appends a record ``{kind, edges, delta, loop_added, rr}`` to
    ``trace`` when given.  Hanging trees off the basepoint are dropped at the
    end, so the output's Z is the pointed core Gamma(Z#).
    """
    state = _State(p)
    steps = 0
    while True:
        choice = state.next_fold()
        if choice is None:
            break
        steps += 1
        if steps > max_steps:
            raise CapExceeded(f"tightening did not finish within {max_steps} steps")
        record = _step(state, psi, choice)
        if trace is not None:
            trace.append(record)
    state.prune()
    return state.to_pair()


@dataclass
class ComplementFactor:
    basis_words: list[Word]

    def __len__(self):
        return len(self.basis_words)


def pair_basis(p: GraphPair) -> SpanningBasis:
    """Spanning tree of X extended to Z; X's non-tree edges come first."""
    return SpanningBasis(p.Z, prefer=p.X)


def complement_factor(p: GraphPair) -> ComplementFactor:
    if not p.is_tight():
        raise PreconditionError("complement_factor needs a tight pair")
    sb = pair_basis(p)
    return ComplementFactor(sb.words[sb.prefer_count:])


def x_basis(p: GraphPair) -> list[Word]:
    sb = pair_basis(p)
    return sb.words[: sb.prefer_count]


def theta_results(p: GraphPair, c: ComplementFactor, psi: Endomorphism, n_cap: int):
    """Yield ``(n, injective)`` for n = 0..n_cap, folding one new layer at a time.

    theta_n is injective on X v Gamma(C) v ... v Gamma(psi^n(C)) exactly when
    folding that wedge loses no rank.
    """
    xb = x_basis(p)
    folded = fold(graph_from_words(xb, psi.rank))[0]
    expected = len(xb)
    for n in range(n_cap + 1):
        layer = [apply(iterate(psi, n), w) for w in c.basis_words]
        if layer:
            expected += subgroup_rank(layer, psi.rank)
            folded = fold(wedge(folded, graph_from_words(layer, psi.rank)))[0]
        yield n, folded.betti() == expected


def check_theta(p: GraphPair, c: ComplementFactor, psi: Endomorphism, n: int) -> bool:
    """Is theta_n injective?"""
    return all(ok for _, ok in theta_results(p, c, psi, n))


def first_theta_failure(p: GraphPair, c: ComplementFactor, psi: Endomorphism, n_cap: int) -> int | None:
    if not c.basis_words:
        return None
    for n, ok in theta_results(p, c, psi, n_cap):
        if not ok:
            return n
    return None


@dataclass
class MinimizeResult:
    pair: GraphPair
    complement: ComplementFactor
    certificate_level: int
    rounds: list[dict] = field(default_factory=list)
    trace: list[dict] = field(default_factory=list)

    def __iter__(self):
        return iter((self.pair, self.complement, self.certificate_level))

    @property
    def relative_rank(self) -> int:
        return relative_rank(self.pair)


def descent_pair(p: GraphPair, c: ComplementFactor, psi: Endomorphism, n: int) -> GraphPair:
    """(X v Gamma(C) v ... v Gamma(psi^n C), X v ... v Gamma(psi^(n-1) C)).

    psi-invariant for the same subgroup; its X part injects when theta_(n-1)
    does and its Z part is theta_n's domain.
    """
    w = p.x_graph()
    for i in range(n):
        w = wedge(w, subgroup_graph([apply(iterate(psi, i), x) for x in c.basis_words], psi.rank))
    x_edges = frozenset(range(len(w.edges)))
    w = wedge(w, subgroup_graph([apply(iterate(psi, n), x) for x in c.basis_words], psi.rank))
    return GraphPair(w, x_edges)


def minimize(p: GraphPair, psi: Endomorphism, n_cap: int = 10) -> MinimizeResult:
    """Tighten, then descend while some theta_n (n <= n_cap) fails.

    Every descent round strictly lowers the relative rank, so the loop
    ends; the result is certified only up to ``n_cap``.
    """
    trace: list[dict] = []
    rounds: list[dict] = []
    while True:
        p = tighten(p, psi, trace)
        c = complement_factor(p)
        rr = relative_rank(p)
        if rounds:
            rounds[-1]["rr_after"] = rr
            if rr >= rounds[-1]["rr_before"]:
                raise RuntimeError("descent round did not lower the relative rank")
        failed = first_theta_failure(p, c, psi, n_cap)
        if failed is None:
            return MinimizeResult(p, c, n_cap, rounds, trace)
        rounds.append({"failed_level": failed, "rr_before": rr})
        trace.append({"kind": "descent", "failed_level": failed, "rr": rr})
        p = descent_pair(p, c, psi, failed)
