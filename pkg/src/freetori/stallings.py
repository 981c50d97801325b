"""Stallings graphs: folding, cores, membership, bases and pullbacks.

A graph has vertices ``0..n-1`` and directed edges ``(source, label, target)``
with ``label`` a positive generator index; crossing an edge backwards reads
the inverse letter.  Graphs are immutable; ``fold`` keeps its union-find
state private.
"""
from __future__ import annotations

import random
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .errors import AlphabetMismatch, PreconditionError
from .words import Word


def _letter_key(x: int) -> tuple[int, int]:
    return (abs(x), 0 if x > 0 else 1)


class StallingsGraph:
    __slots__ = ("num_vertices", "edges", "basepoint", "rank", "_adj")

    def __init__(
        self,
        num_vertices: int,
        edges: Iterable[tuple[int, int, int]] = (),
        basepoint: int | None = None,
        rank: int | None = None,
    ):
        edges = tuple((int(u), int(x), int(v)) for u, x, v in edges)
        if rank is None:
            rank = max((x for _, x, _ in edges), default=1)
        for u, x, v in edges:
            if not (0 <= u < num_vertices and 0 <= v < num_vertices):
                raise PreconditionError(f"edge {(u, x, v)} has an endpoint outside 0..{num_vertices - 1}")
            if not 1 <= x <= rank:
                raise AlphabetMismatch(f"edge label {x} outside ambient rank {rank}")
        if basepoint is not None and not 0 <= basepoint < num_vertices:
            raise PreconditionError("basepoint is not a vertex")
        object.__setattr__(self, "num_vertices", num_vertices)
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "basepoint", basepoint)
        object.__setattr__(self, "rank", rank)
        object.__setattr__(self, "_adj", None)

    def __setattr__(self, name, value):
        raise AttributeError("StallingsGraph is immutable")

    def __eq__(self, other):
        if not isinstance(other, StallingsGraph):
            return NotImplemented
        return (self.num_vertices, self.edges, self.basepoint, self.rank) == (
            other.num_vertices, other.edges, other.basepoint, other.rank)

    def __hash__(self):
        return hash((self.num_vertices, self.edges, self.basepoint, self.rank))

    def __repr__(self):
        return (f"StallingsGraph(num_vertices={self.num_vertices}, edges={list(self.edges)}, "
                f"basepoint={self.basepoint}, rank={self.rank})")

    @property
    def adjacency(self) -> list[dict[int, list[tuple[int, int]]]]:
        """Per vertex: signed letter -> list of (edge index, far endpoint)."""
        if self._adj is None:
            adj: list[dict[int, list[tuple[int, int]]]] = [dict() for _ in range(self.num_vertices)]
            for i, (u, x, v) in enumerate(self.edges):
                adj[u].setdefault(x, []).append((i, v))
                adj[v].setdefault(-x, []).append((i, u))
            object.__setattr__(self, "_adj", adj)
        return self._adj

    def with_basepoint(self, v: int | None) -> "StallingsGraph":
        return StallingsGraph(self.num_vertices, self.edges, v, self.rank)

    def degree(self, v: int) -> int:
        return sum(len(es) for es in self.adjacency[v].values())

    def is_folded(self) -> bool:
        return all(len(es) <= 1 for d in self.adjacency for es in d.values())

    def step(self, v: int, letter: int) -> int | None:
        es = self.adjacency[v].get(letter)
        return es[0][1] if es else None

    def read(self, w: Word | Sequence[int], start: int | None = None) -> int | None:
        """End vertex of the path reading ``w`` from ``start``; ``None`` if it falls off."""
        v = self.basepoint if start is None else start
        adj = self.adjacency
        for x in w:
            es = adj[v].get(x)
            if not es:
                return None
            v = es[0][1]
        return v

    def components(self) -> list[list[int]]:
        seen = [False] * self.num_vertices
        comps = []
        for s in range(self.num_vertices):
            if seen[s]:
                continue
            seen[s] = True
            comp, queue = [], [s]
            while queue:
                v = queue.pop()
                comp.append(v)
                for es in self.adjacency[v].values():
                    for _, w in es:
                        if not seen[w]:
                            seen[w] = True
                            queue.append(w)
            comps.append(sorted(comp))
        return comps

    def is_connected(self) -> bool:
        return len(self.components()) <= 1

    def betti(self) -> int:
        """First Betti number E - V + #components."""
        return len(self.edges) - self.num_vertices + len(self.components())

    def euler_characteristic(self) -> int:
        return self.num_vertices - len(self.edges)


@dataclass(frozen=True)
class GraphMorphism:
    domain: StallingsGraph
    codomain: StallingsGraph
    vertex_map: tuple[int, ...]
    edge_map: tuple[int, ...]

    def is_immersion(self) -> bool:
        """Locally injective: distinct edge-ends at a vertex stay distinct."""
        for v in range(self.domain.num_vertices):
            seen = set()
            for letter, es in self.domain.adjacency[v].items():
                for e, _ in es:
                    key = (self.edge_map[e], letter)
                    if key in seen:
                        return False
                    seen.add(key)
        return True

    def is_valid(self) -> bool:
        for i, (u, x, v) in enumerate(self.domain.edges):
            cu, cx, cv = self.codomain.edges[self.edge_map[i]]
            if (cx, cu, cv) != (x, self.vertex_map[u], self.vertex_map[v]):
                return False
        b, c = self.domain.basepoint, self.codomain.basepoint
        return b is None or c is None or self.vertex_map[b] == c


def rose(rank: int, letters: Iterable[int] | None = None) -> StallingsGraph:
    letters = range(1, rank + 1) if letters is None else sorted(set(letters))
    return StallingsGraph(1, [(0, x, 0) for x in letters], 0, rank)


def _word_rank(words: Iterable[Word], rank: int | None) -> int:
    r = max((w.max_index() for w in words), default=1)
    if rank is not None:
        if r > rank:
            raise AlphabetMismatch(f"word uses generator {r} beyond rank {rank}")
        return rank
    return max(r, 1)


def graph_from_words(words: Sequence[Word], rank: int | None = None, pointed: bool = True) -> StallingsGraph:
    """Unfolded wedge of loops at vertex 0, one loop per word."""
    words = [w if isinstance(w, Word) else Word(w) for w in words]
    rank = _word_rank(words, rank)
    n = 1
    edges = []
    for w in words:
        k = len(w)
        if k == 0:
            continue
        path = [0] + list(range(n, n + k - 1)) + [0]
        n += k - 1
        for i, x in enumerate(w):
            a, b = path[i], path[i + 1]
            edges.append((a, x, b) if x > 0 else (b, -x, a))
    return StallingsGraph(n, edges, 0 if pointed else None, rank)


def fold(g: StallingsGraph, rng: random.Random | None = None) -> tuple[StallingsGraph, GraphMorphism]:
    """Fold ``g`` completely; returns the immersed quotient and the quotient map.

    Union-find over vertices and edges with a worklist of pending vertex
    identifications.  ``rng`` randomises both the edge insertion order and
    the worklist order; the result is the same up to based isomorphism.
    """
    n, edges = g.num_vertices, g.edges
    parent = list(range(n))
    eparent = list(range(len(edges)))
    adj: list[dict[int, int]] = [dict() for _ in range(n)]
    pending: list[tuple[int, int]] = []

    def find(v):
        while parent[v] != v:
            parent[v] = parent[parent[v]]
            v = parent[v]
        return v

    def efind(e):
        while eparent[e] != e:
            eparent[e] = eparent[eparent[e]]
            e = eparent[e]
        return e

    def far_end(e, letter):
        u, _, v = edges[e]
        return v if letter > 0 else u

    def register(r, letter, e):
        e2 = adj[r].get(letter)
        if e2 is None:
            adj[r][letter] = e
            return
        c1, c2 = efind(e), efind(e2)
        if c1 == c2:
            return
        eparent[c1] = c2
        pending.append((far_end(e, letter), far_end(e2, letter)))

    def drain():
        while pending:
            if rng is not None and len(pending) > 1:
                i = rng.randrange(len(pending))
                pending[i], pending[-1] = pending[-1], pending[i]
            a, b = pending.pop()
            ra, rb = find(a), find(b)
            if ra == rb:
                continue
            if len(adj[ra]) < len(adj[rb]):
                ra, rb = rb, ra
            parent[rb] = ra
            moved, adj[rb] = adj[rb], {}
            for letter, e in moved.items():
                register(ra, letter, e)

    order = list(range(len(edges)))
    if rng is not None:
        rng.shuffle(order)
    for e in order:
        u, x, v = edges[e]
        register(find(u), x, e)
        register(find(v), -x, e)
        drain()

    vmap_root: dict[int, int] = {}
    vertex_map = []
    for v in range(n):
        r = find(v)
        if r not in vmap_root:
            vmap_root[r] = len(vmap_root)
        vertex_map.append(vmap_root[r])
    emap_root: dict[int, int] = {}
    new_edges = []
    edge_map = []
    for e, (u, x, v) in enumerate(edges):
        c = efind(e)
        if c not in emap_root:
            emap_root[c] = len(new_edges)
            new_edges.append((vertex_map[u], x, vertex_map[v]))
        edge_map.append(emap_root[c])
    bp = None if g.basepoint is None else vertex_map[g.basepoint]
    folded = StallingsGraph(len(vmap_root), new_edges, bp, g.rank)
    return folded, GraphMorphism(g, folded, tuple(vertex_map), tuple(edge_map))


def induced_subgraph(g: StallingsGraph, vertices: Iterable[int], basepoint: int | None = None,
                     edge_filter=None) -> tuple[StallingsGraph, dict[int, int], dict[int, int]]:
    """Subgraph on ``vertices`` (renumbered in increasing order).

    Returns the graph plus old->new vertex and edge maps.
    """
    keep = sorted(set(vertices))
    vmap = {v: i for i, v in enumerate(keep)}
    emap = {}
    new_edges = []
    for i, (u, x, v) in enumerate(g.edges):
        if u in vmap and v in vmap and (edge_filter is None or edge_filter(i)):
            emap[i] = len(new_edges)
            new_edges.append((vmap[u], x, vmap[v]))
    bp = vmap.get(basepoint) if basepoint is not None else None
    return StallingsGraph(len(keep), new_edges, bp, g.rank), vmap, emap


def _prune(g: StallingsGraph, protect: int | None) -> set[int]:
    deg = [g.degree(v) for v in range(g.num_vertices)]
    alive = set(range(g.num_vertices))
    stack = [v for v in alive if deg[v] <= 1 and v != protect]
    while stack:
        v = stack.pop()
        if v not in alive:
            continue
        alive.discard(v)
        for es in g.adjacency[v].values():
            for _, w in es:
                if w in alive and w != v:
                    deg[w] -= 1
                    if deg[w] <= 1 and w != protect:
                        stack.append(w)
    return alive


def core_with_map(g: StallingsGraph) -> tuple[StallingsGraph, dict[int, int]]:
    alive = _prune(g, None)
    sub, vmap, _ = induced_subgraph(g, alive, g.basepoint if g.basepoint in alive else None)
    return sub, vmap


def core(g: StallingsGraph) -> StallingsGraph:
    """Union of immersed cycles; keeps the basepoint only if it survives."""
    return core_with_map(g)[0]


def pointed_core_with_map(g: StallingsGraph) -> tuple[StallingsGraph, dict[int, int]]:
    if g.basepoint is None:
        raise PreconditionError("pointed_core needs a basepoint")
    alive = _prune(g, g.basepoint)
    # restrict to the basepoint's component
    seen = {g.basepoint}
    queue = [g.basepoint]
    while queue:
        v = queue.pop()
        for es in g.adjacency[v].values():
            for _, w in es:
                if w in alive and w not in seen:
                    seen.add(w)
                    queue.append(w)
    sub, vmap, _ = induced_subgraph(g, seen, g.basepoint)
    return sub, vmap


def pointed_core(g: StallingsGraph) -> StallingsGraph:
    return pointed_core_with_map(g)[0]


def subgroup_graph(generators: Sequence[Word], rank: int | None = None) -> StallingsGraph:
    """Gamma(H): the folded pointed core graph of ``<generators>``."""
    folded, _ = fold(graph_from_words(generators, rank))
    return pointed_core(folded)


def wedge(g1: StallingsGraph, g2: StallingsGraph) -> StallingsGraph:
    """Identify the basepoints; ``g2``'s vertices are shifted after ``g1``'s."""
    if g1.basepoint is None or g2.basepoint is None:
        raise PreconditionError("wedge needs pointed graphs")
    rank = max(g1.rank, g2.rank)
    n1 = g1.num_vertices
    b2 = g2.basepoint

    def shift(v):
        if v == b2:
            return g1.basepoint
        return n1 + v - (1 if v > b2 else 0)

    edges = list(g1.edges) + [(shift(u), x, shift(v)) for u, x, v in g2.edges]
    return StallingsGraph(n1 + g2.num_vertices - 1, edges, g1.basepoint, rank)


def membership(h_graph: StallingsGraph, w: Word) -> bool:
    """True iff ``w`` labels a closed path at the basepoint."""
    if h_graph.basepoint is None:
        raise PreconditionError("membership needs a pointed graph")
    return h_graph.read(w) == h_graph.basepoint


class SpanningBasis:
    """Spanning-tree free basis of a connected graph's fundamental group.

    The tree is grown breadth-first from ``root``, first through the edges
    in ``prefer`` and only then through the rest.  With ``prefer`` a
    connected subgraph containing the root, the basis elements coming from
    ``prefer`` form a basis of that subgraph.
    """

    def __init__(self, g: StallingsGraph, root: int | None = None, prefer: Iterable[int] | None = None):
        root = g.basepoint if root is None else root
        if root is None:
            raise PreconditionError("spanning basis needs a root vertex")
        self.graph = g
        self.root = root
        prefer = set(prefer) if prefer is not None else set(range(len(g.edges)))
        self.path: dict[int, Word] = {root: Word()}
        tree: set[int] = set()
        for allowed in (prefer, None):
            queue = deque(sorted(self.path, key=lambda v: (len(self.path[v]), v)))
            while queue:
                v = queue.popleft()
                for letter in sorted(g.adjacency[v], key=_letter_key):
                    for e, w in g.adjacency[v][letter]:
                        if allowed is not None and e not in allowed:
                            continue
                        if w not in self.path:
                            self.path[w] = self.path[v] * Word([letter])
                            tree.add(e)
                            queue.append(w)
        self.tree = frozenset(tree)
        reachable = set(self.path)
        nontree = [i for i, (u, _, _) in enumerate(g.edges) if i not in tree and u in reachable]
        self.generators = [e for e in nontree if e in prefer] + [e for e in nontree if e not in prefer]
        self.index = {e: k + 1 for k, e in enumerate(self.generators)}
        self.words = [self.edge_word(e) for e in self.generators]
        self.prefer_count = sum(1 for e in nontree if e in prefer)

    def edge_word(self, e: int) -> Word:
        u, x, v = self.graph.edges[e]
        return self.path[u] * Word([x]) * self.path[v].inverse()

    def express(self, w: Word, start: int | None = None) -> Word | None:
        """Read ``w`` from the root; returns it as a word in the basis, or ``None``."""
        v = self.root if start is None else start
        out = []
        adj = self.graph.adjacency
        for x in w:
            es = adj[v].get(x)
            if not es:
                return None
            e, nxt = es[0]
            if e in self.index:
                out.append(self.index[e] if x > 0 else -self.index[e])
            v = nxt
        if v != self.root:
            return None
        return Word(out)


def basis(h_graph: StallingsGraph) -> list[Word]:
    if h_graph.basepoint is None:
        raise PreconditionError("basis needs a pointed graph")
    if not h_graph.is_connected():
        raise PreconditionError("basis needs a connected graph")
    return SpanningBasis(h_graph).words


def image_subgroup_basis(g: StallingsGraph) -> list[Word]:
    """Generators of the image of pi_1(g, basepoint) in the free group (g need not be folded)."""
    sub, _ = pointed_component(g)
    return [w for w in SpanningBasis(sub).words]


def pointed_component(g: StallingsGraph) -> tuple[StallingsGraph, dict[int, int]]:
    comp = next(c for c in g.components() if g.basepoint in c)
    sub, vmap, _ = induced_subgraph(g, comp, g.basepoint)
    return sub, vmap


def subgroup_rank(generators: Sequence[Word], rank: int | None = None) -> int:
    return subgroup_graph(generators, rank).betti()


def canonical_form(g: StallingsGraph, root: int | None = None) -> tuple:
    """Label-preserving based-isomorphism invariant of a folded graph.

    Vertices are renumbered in breadth-first order from the root, exploring
    letters in the order a, A, b, B, ...; only the root's component counts.
    """
    root = g.basepoint if root is None else root
    if root is None:
        raise PreconditionError("canonical_form needs a root")
    order = {root: 0}
    queue = deque([root])
    while queue:
        v = queue.popleft()
        for letter in sorted(g.adjacency[v], key=_letter_key):
            for _, w in g.adjacency[v][letter]:
                if w not in order:
                    order[w] = len(order)
                    queue.append(w)
    edges = sorted((order[u], x, order[v]) for u, x, v in g.edges if u in order)
    return (len(order), tuple(edges))


def is_isomorphic(g1: StallingsGraph, g2: StallingsGraph) -> bool:
    """Based label-isomorphism test for folded connected graphs."""
    return canonical_form(g1) == canonical_form(g2)


def unbased_canonical_form(g: StallingsGraph) -> tuple:
    if g.num_vertices == 0:
        return (0, ())
    return min(canonical_form(g, v) for v in range(g.num_vertices))


def factorise(gamma: StallingsGraph, lam: StallingsGraph) -> GraphMorphism | None:
    """The based label-preserving map ``gamma -> lam``, or ``None`` if there is none.

    ``lam`` must be folded, so the map is unique when it exists.
    """
    if gamma.basepoint is None or lam.basepoint is None:
        raise PreconditionError("factorise needs pointed graphs")
    vmap = {gamma.basepoint: lam.basepoint}
    emap: dict[int, int] = {}
    queue = deque([gamma.basepoint])
    while queue:
        v = queue.popleft()
        iv = vmap[v]
        for letter, es in gamma.adjacency[v].items():
            targets = lam.adjacency[iv].get(letter)
            if not targets:
                return None
            le, lw = targets[0]
            for e, w in es:
                emap[e] = le
                if w in vmap:
                    if vmap[w] != lw:
                        return None
                else:
                    vmap[w] = lw
                    queue.append(w)
    if len(vmap) != gamma.num_vertices:
        raise PreconditionError("factorise needs a connected domain")
    return GraphMorphism(gamma, lam, tuple(vmap[v] for v in range(gamma.num_vertices)),
                         tuple(emap[e] for e in range(len(gamma.edges))))


def conjugate_into(h_gens: Sequence[Word], k_gens: Sequence[Word], rank: int | None = None) -> Word | None:
    """Some ``f`` with ``f^-1 H f <= K``, or ``None``.

    The core of Gamma(H), based where the tail from the basepoint lands,
    is matched against every vertex of Gamma(K); the conjugator is read off
    the tail and the tree path to the matching vertex.
    """
    rank = _word_rank(list(h_gens) + list(k_gens), rank)
    gh = subgroup_graph(h_gens, rank)
    if not gh.edges:
        return Word()
    gk = subgroup_graph(k_gens, rank)
    hb = SpanningBasis(gh)
    core_h, vmap = core_with_map(gh)
    c = min(vmap, key=lambda v: (len(hb.path[v]), v))
    u = hb.path[c]
    core_h = core_h.with_basepoint(vmap[c])
    kb = SpanningBasis(gk)
    for y in sorted(range(gk.num_vertices), key=lambda v: (len(kb.path[v]), v)):
        if factorise(core_h, gk.with_basepoint(y)) is not None:
            return u * kb.path[y].inverse()
    return None


@dataclass
class PullbackComponent:
    """A core component of a pullback, with its double-coset data.

    ``representative`` is g = [alpha * bar(beta)]; the component's
    fundamental group conjugated back to the second graph's basepoint is
    ``H^g ∩ K`` (with ``X^g = g^-1 X g``), spanned by ``intersection_basis``.
    """

    graph: StallingsGraph
    vertices: list[int]
    anchor: int
    representative: Word
    alpha: Word
    beta: Word
    intersection_basis: list[Word]
    based: bool = False


@dataclass
class Pullback:
    graph: StallingsGraph
    pairs: list[tuple[int, int]]
    components: list[PullbackComponent] = field(default_factory=list)

    def projection(self, side: int) -> list[int]:
        return [p[side] for p in self.pairs]

    @property
    def based_component(self) -> PullbackComponent | None:
        return next((c for c in self.components if c.based), None)


def pullback(g1: StallingsGraph, g2: StallingsGraph) -> Pullback:
    """Fibre product of two folded graphs over the rose, with core components.

    Both inputs must be pointed and connected for the double-coset data; the
    graph itself is returned whole (possibly disconnected).
    """
    if g1.rank != g2.rank:
        raise AlphabetMismatch("pullback of graphs over different ranks")
    by_label: dict[int, list[tuple[int, int]]] = {}
    for u, x, v in g2.edges:
        by_label.setdefault(x, []).append((u, v))
    index: dict[tuple[int, int], int] = {}
    pairs: list[tuple[int, int]] = []

    def vid(p):
        if p not in index:
            index[p] = len(pairs)
            pairs.append(p)
        return index[p]

    base = None
    if g1.basepoint is not None and g2.basepoint is not None:
        base = vid((g1.basepoint, g2.basepoint))
    edges = []
    for u1, x, v1 in g1.edges:
        for u2, v2 in by_label.get(x, ()):
            edges.append((vid((u1, u2)), x, vid((v1, v2))))
    prod = StallingsGraph(len(pairs), edges, base, g1.rank)
    result = Pullback(prod, pairs)
    if g1.basepoint is None or g2.basepoint is None:
        return result

    t1, t2 = SpanningBasis(g1), SpanningBasis(g2)
    alive = _prune(prod, None)
    cg, vmap, _ = induced_subgraph(prod, alive)
    inv = {new: old for old, new in vmap.items()}
    base_comp = next(c for c in prod.components() if base in c)
    for comp in cg.components():
        old = [inv[v] for v in comp]

        def cost(v):
            a, b = pairs[v]
            return (len(t1.path[a]) + len(t2.path[b]), v)

        x = min(old, key=cost)
        sub, svmap, _ = induced_subgraph(prod, old, x)
        a, b = pairs[x]
        alpha, beta = t1.path[a], t2.path[b]
        loops = SpanningBasis(sub).words
        result.components.append(PullbackComponent(
            graph=sub,
            vertices=old,
            anchor=x,
            representative=alpha * beta.inverse(),
            alpha=alpha,
            beta=beta,
            intersection_basis=[beta * w * beta.inverse() for w in loops],
            based=x in base_comp,
        ))
    return result


def intersection_graph(g1: StallingsGraph, g2: StallingsGraph) -> StallingsGraph:
    """Gamma(H ∩ K) as the pointed core of the pullback."""
    return pointed_core(pullback(g1, g2).graph)


def intersection(h_gens: Sequence[Word], k_gens: Sequence[Word], rank: int | None = None) -> list[Word]:
    rank = _word_rank(list(h_gens) + list(k_gens), rank)
    return basis(intersection_graph(subgroup_graph(h_gens, rank), subgroup_graph(k_gens, rank)))


@dataclass
class FactorSystemEntry:
    """One member ``A^f ∩ H`` of an induced free factor system (``A^f = f^-1 A f``)."""

    factor: int
    basis: list[Word]
    conjugator: Word


def induced_free_factor_system(h_gens: Sequence[Word], factors: Sequence[Iterable[int]],
                               rank: int | None = None) -> list[FactorSystemEntry]:
    """Free factor system of H induced by letter-subset free factors of the ambient group."""
    factors = [frozenset(f) for f in factors]
    seen: set[int] = set()
    for f in factors:
        if seen & f:
            raise PreconditionError("free factors must use disjoint letter sets")
        seen |= f
    rank = max(_word_rank(list(h_gens), None), rank or 1, *(max(f, default=1) for f in factors))
    gh = subgroup_graph(h_gens, rank)
    out = []
    for k, letters in enumerate(factors):
        pb = pullback(gh, rose(rank, letters))
        for comp in pb.components:
            # the rose has one vertex, so beta is trivial and g = alpha
            out.append(FactorSystemEntry(
                factor=k,
                basis=[comp.alpha * w * comp.alpha.inverse() for w in SpanningBasis(comp.graph).words],
                conjugator=comp.alpha.inverse(),
            ))
    return out


def reduced_rank(h_gens: Sequence[Word], rank: int | None = None) -> int:
    return max(subgroup_rank(h_gens, rank) - 1, 0)
