"""The mapping torus M(psi) = <F, t | t^-1 f t = psi(f)> of an injective endomorphism.

Elements are kept as triples ``t^a * w * t^-b``.  Pushing rules follow from
the defining relation: ``f t = t psi(f)`` and ``t^-1 f = psi(f) t^-1``.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import lru_cache
from math import gcd
from typing import Iterable, Sequence

from .errors import CapExceeded, NotInjective, ParseError, PreconditionError
from .graph_pair import ComplementFactor, GraphPair, initial_pair, minimize, pair_basis, relative_rank
from .stallings import conjugate_into, membership, subgroup_graph
from .words import (
    Endomorphism,
    Word,
    apply,
    compose,
    conjugation,
    format_letter,
    is_injective,
    iterate,
    parse_letters,
)


@dataclass(frozen=True)
class MTElement:
    """``t^a * w * t^-b`` with ``a, b >= 0``."""

    a: int
    w: Word
    b: int

    def __post_init__(self):
        if self.a < 0 or self.b < 0:
            raise ValueError("t-exponents of a triple are non-negative")

    @property
    def exponent(self) -> int:
        """Image under the t-exponent map M(psi) -> Z."""
        return self.a - self.b

    def is_identity(self) -> bool:
        return self.a == 0 and self.b == 0 and not self.w

    def tokens(self) -> list:
        return ["t"] * self.a + list(self.w.letters) + ["T"] * self.b

    def __str__(self) -> str:
        if self.is_identity():
            return "1"
        return "t" * self.a + (str(self.w) if self.w else "") + "T" * self.b


class _ImageGraph:
    """Folded graph of psi(F) whose edges carry domain words.

    Reading a closed path at the basepoint and multiplying the edge tags
    gives the unique u with psi(u) equal to the path label.
    """

    def __init__(self, psi: Endomorphism):
        self.psi = psi
        edges: dict[int, list] = {}  # id -> [u, letter>0, v, tag]
        nv = 1
        for i, img in enumerate(psi.images):
            if not img:
                raise NotInjective(f"{format_letter(i + 1)} maps to the identity")
            prev = 0
            for k, x in enumerate(img.letters):
                nxt = 0 if k == len(img) - 1 else nv
                if nxt:
                    nv += 1
                tag = Word([i + 1]) if k == 0 else Word()
                if x > 0:
                    edges[len(edges)] = [prev, x, nxt, tag]
                else:
                    edges[len(edges)] = [nxt, -x, prev, tag.inverse()]
                prev = nxt
        self.edges = edges
        self._fold()
        self.adj: dict[int, dict[int, tuple[int, Word]]] = {}
        for u, x, v, tag in edges.values():
            self.adj.setdefault(u, {})[x] = (v, tag)
            self.adj.setdefault(v, {})[-x] = (u, tag.inverse())

    def _gauge(self, vertex, g):
        for e in self.edges.values():
            if e[2] == vertex:
                e[3] = e[3] * g
            if e[0] == vertex:
                e[3] = g.inverse() * e[3]

    def _find_pair(self):
        seen: dict[tuple[int, int], int] = {}
        for i, (u, x, v, _) in self.edges.items():
            for key in ((u, x), (v, -x)):
                if key in seen and seen[key] != i:
                    return seen[key], i, key[0], key[1]
                seen[key] = i
        return None

    def _fold(self):
        while True:
            found = self._find_pair()
            if found is None:
                return
            e1, e2, v, letter = found
            E1, E2 = self.edges[e1], self.edges[e2]

            def travel(e):
                return (e[2], e[3]) if letter > 0 else (e[0], e[3].inverse())

            w1, t1 = travel(E1)
            w2, t2 = travel(E2)
            if t1 != t2:
                if w1 != w2 and w2 not in (0, v):
                    self._gauge(w2, t2.inverse() * t1)
                elif w1 != w2 and w1 not in (0, v):
                    self._gauge(w1, t1.inverse() * t2)
                elif w1 != w2 and v != 0 and w2 == v:
                    self._gauge(v, t2.inverse() * t1)
                elif w1 != w2 and v != 0 and w1 == v:
                    self._gauge(v, t1.inverse() * t2)
                else:
                    raise NotInjective("folding the image loops loses rank")
                w1, t1 = travel(E1)
                w2, t2 = travel(E2)
                assert t1 == t2
            del self.edges[e2]
            if w1 != w2:
                keep, drop = (w2, w1) if w2 == 0 else (w1, w2)
                for e in self.edges.values():
                    if e[0] == drop:
                        e[0] = keep
                    if e[2] == drop:
                        e[2] = keep

    def preimage(self, w: Word) -> Word | None:
        v = 0
        out = Word()
        for x in w.letters:
            step = self.adj.get(v, {}).get(x)
            if step is None:
                return None
            v, tag = step
            out = out * tag
        if v != 0:
            return None
        return out


@lru_cache(maxsize=256)
def _image_graph(psi: Endomorphism, k: int) -> _ImageGraph:
    return _ImageGraph(iterate(psi, k))


def preimage(psi: Endomorphism, w: Word, k: int = 1) -> Word | None:
    """The u with psi^k(u) = w, or None if w is not in the image."""
    if k == 0:
        return w
    return _image_graph(psi, k).preimage(w)


class MappingTorus:
    def __init__(self, psi: Endomorphism):
        if not is_injective(psi):
            raise NotInjective(f"{psi} is not injective")
        self.psi = psi

    @property
    def rank(self) -> int:
        return self.psi.rank

    def __repr__(self):
        return f"MappingTorus({self.psi})"

    identity = MTElement(0, Word(), 0)
    stable = MTElement(1, Word(), 0)

    def generator(self, x: int | str) -> MTElement:
        if x == "t":
            return MTElement(1, Word(), 0)
        if x == "T":
            return MTElement(0, Word(), 1)
        if abs(x) > self.rank:
            raise PreconditionError(f"letter {format_letter(x)} outside rank {self.rank}")
        return MTElement(0, Word([x]), 0)

    def canonical(self, e: MTElement) -> MTElement:
        a, w, b = e.a, e.w, e.b
        while a > 0 and b > 0:
            u = preimage(self.psi, w)
            if u is None:
                break
            a, w, b = a - 1, u, b - 1
        return MTElement(a, w, b)

    def multiply(self, x: MTElement, y: MTElement) -> MTElement:
        if x.b >= y.a:
            d = x.b - y.a
            out = MTElement(x.a, x.w * apply(iterate(self.psi, d), y.w), d + y.b)
        else:
            d = y.a - x.b
            out = MTElement(x.a + d, apply(iterate(self.psi, d), x.w) * y.w, y.b)
        return self.canonical(out)

    def inverse(self, x: MTElement) -> MTElement:
        return MTElement(x.b, x.w.inverse(), x.a)

    def power(self, x: MTElement, n: int) -> MTElement:
        if n < 0:
            return self.power(self.inverse(x), -n)
        out = self.identity
        for _ in range(n):
            out = self.multiply(out, x)
        return out

    def product(self, elements: Iterable[MTElement]) -> MTElement:
        out = self.identity
        for e in elements:
            out = self.multiply(out, e)
        return out

    def element(self, raw) -> MTElement:
        return normalize(raw, self)

    def f_element(self, w: Word) -> MTElement:
        return MTElement(0, w, 0)


def parse_element(text: str) -> list:
    """Tokens of a word over the free basis plus ``t``/``T``."""
    return parse_letters(text, allow_stable=True)


def normalize(raw, M: MappingTorus) -> MTElement:
    """Canonical triple of a word given as tokens (ints and ``t``/``T``), a string or an MTElement."""
    if isinstance(raw, MTElement):
        return M.canonical(raw)
    if isinstance(raw, str):
        raw = parse_element(raw)
    if isinstance(raw, Word):
        raw = list(raw.letters)
    return M.product(M.generator(x) for x in raw)


def equal(e1: MTElement, e2: MTElement, M: MappingTorus | None = None) -> bool:
    if M is not None:
        e1, e2 = M.canonical(e1), M.canonical(e2)
    return e1 == e2


# ---------------------------------------------------------------- presentations


@dataclass
class Relation:
    """``s^-1 z_x s = rhs`` where ``x`` indexes the z-basis (1-based) and rhs is a word in it."""

    x: int
    rhs: Word


@dataclass
class MappingTorusPresentation:
    z_basis: list[Word]
    x_basis: list[Word]
    relations: list[Relation]
    psi_prime: Endomorphism
    m: int
    shift: int
    h: Word
    stable: MTElement
    certificate_level: int
    rr: int
    pair: GraphPair | None = None
    complement: ComplementFactor | None = None
    rounds: list = field(default_factory=list)

    free = False

    @property
    def chi(self) -> int:
        return -self.rr

    def z_in_torus(self, M: MappingTorus) -> list[MTElement]:
        """The z-basis conjugated back into the input's coordinates."""
        tn = M.power(M.stable, self.shift)
        return [M.product([tn, M.f_element(z), M.inverse(tn)]) for z in self.z_basis]

    def generator_names(self) -> list[str]:
        return [f"z{i + 1}" for i in range(len(self.z_basis))]


@dataclass
class FreeSubgroup:
    """A subgroup with trivial t-exponent image, conjugated into F by t^shift."""

    basis: list[Word]
    shift: int

    free = True

    @property
    def rank(self) -> int:
        return len(self.basis)

    @property
    def chi(self) -> int:
        return 1 - self.rank

    def in_torus(self, M: MappingTorus) -> list[MTElement]:
        tn = M.power(M.stable, self.shift)
        return [M.product([tn, M.f_element(z), M.inverse(tn)]) for z in self.basis]


def _coerce(gens, M: MappingTorus) -> list[MTElement]:
    return [g if isinstance(g, MTElement) else normalize(g, M) for g in gens]


def _single_pivot(gens: list[MTElement], M: MappingTorus) -> tuple[MTElement, list[MTElement]]:
    """Nielsen moves until exactly one generator has nonzero t-exponent, made positive."""
    gens = list(gens)
    while True:
        live = sorted((i for i, g in enumerate(gens) if g.exponent), key=lambda i: (abs(gens[i].exponent), i))
        if len(live) == 1:
            break
        i, j = live[0], live[1]
        q = gens[j].exponent // gens[i].exponent
        gens[j] = M.multiply(gens[j], M.power(gens[i], -q))
    p = live[0]
    pivot = gens[p] if gens[p].exponent > 0 else M.inverse(gens[p])
    return pivot, [g for k, g in enumerate(gens) if k != p]


def subgroup_presentation(gens, M: MappingTorus, n_cap: int = 10):
    """Presentation of the subgroup generated by ``gens``.

    Returns a FreeSubgroup when the t-exponent vanishes on it, otherwise a
    MappingTorusPresentation from a minimized graph pair.
    """
    gens = [g for g in _coerce(gens, M) if not g.is_identity()]
    m = 0
    for g in gens:
        m = gcd(m, abs(g.exponent))
    if m == 0:
        n = max((g.a for g in gens), default=0)
        words = [apply(iterate(M.psi, n - g.a), g.w) for g in gens]
        sub = subgroup_graph(words, M.rank)
        from .stallings import basis
        return FreeSubgroup(basis(sub), n)
    pivot, rest = _single_pivot(gens, M)
    assert pivot.exponent == m and all(g.exponent == 0 for g in rest)
    n = max([pivot.b] + [g.a for g in rest])
    h = apply(iterate(M.psi, n - pivot.b), pivot.w)
    s_words = [w for w in (apply(iterate(M.psi, n - g.a), g.w) for g in rest) if w]
    psi_prime = compose(conjugation(h, M.rank), iterate(M.psi, m))
    if not is_injective(psi_prime):
        raise AssertionError("replacement endomorphism lost injectivity")
    result = minimize(initial_pair(s_words, psi_prime), psi_prime, n_cap)
    pair = result.pair
    sb = pair_basis(pair)
    z_basis = list(sb.words)
    x_count = sb.prefer_count
    relations = []
    for i in range(x_count):
        rhs = sb.express(apply(psi_prime, z_basis[i]))
        if rhs is None:
            raise AssertionError("tight pair is not invariant")
        relations.append(Relation(i + 1, rhs))
    tn = M.power(M.stable, n)
    s_local = M.multiply(M.power(M.stable, m), M.f_element(h))
    stable = M.product([tn, s_local, M.inverse(tn)])
    return MappingTorusPresentation(
        z_basis=z_basis,
        x_basis=z_basis[:x_count],
        relations=relations,
        psi_prime=psi_prime,
        m=m,
        shift=n,
        h=h,
        stable=stable,
        certificate_level=result.certificate_level,
        rr=relative_rank(pair),
        pair=pair,
        complement=result.complement,
        rounds=result.rounds,
    )


def euler_characteristic(gens, M: MappingTorus, n_cap: int = 10) -> int:
    return subgroup_presentation(gens, M, n_cap).chi


def relation_holds(pres: MappingTorusPresentation, rel: Relation, M: MappingTorus) -> bool:
    """Check ``s^-1 x s = rhs`` in M(psi) using the input's coordinates."""
    zs = pres.z_in_torus(M)
    lhs = M.product([M.inverse(pres.stable), zs[rel.x - 1], pres.stable])
    rhs = M.product(zs[x - 1] if x > 0 else M.inverse(zs[-x - 1]) for x in rel.rhs.letters)
    return lhs == rhs


# ---------------------------------------------------------------- sub-mapping tori


@dataclass
class SubMTCertificate:
    """f^-1 psi^k(H) f <= H, so <H, t^k f> is the mapping torus of g -> f^-1 psi^k(g) f on H."""

    h_basis: list[Word]
    k: int
    f: Word

    def stable_element(self, M: MappingTorus) -> MTElement:
        return M.multiply(M.power(M.stable, self.k), M.f_element(self.f))

    def verify(self, M: MappingTorus) -> bool:
        h_graph = subgroup_graph(self.h_basis, M.rank)
        return all(membership(h_graph, apply(iterate(M.psi, self.k), h).conjugate(self.f)) for h in self.h_basis)

    def restricted(self, M: MappingTorus) -> Endomorphism:
        return compose(conjugation(self.f, M.rank), iterate(M.psi, self.k))


def detect_sub_mapping_torus(h_gens: Sequence[Word], M: MappingTorus, k_max: int = 8) -> SubMTCertificate | None:
    from .stallings import basis
    h_graph = subgroup_graph(list(h_gens), M.rank)
    if h_graph.betti() == 0:
        raise PreconditionError("H must be nontrivial")
    hb = basis(h_graph)
    for k in range(1, k_max + 1):
        images = [apply(iterate(M.psi, k), h) for h in hb]
        f = conjugate_into(images, hb, M.rank)
        if f is not None:
            return SubMTCertificate(hb, k, f)
    return None


# ---------------------------------------------------------------- HNN decomposition


class GradedAlphabet:
    """Letters of A (1..a_rank) followed by c[i,j] for grade i >= 0 and 1 <= j <= c_rank."""

    def __init__(self, a_rank: int, c_rank: int, max_grade: int):
        self.a_rank = a_rank
        self.c_rank = c_rank
        self.max_grade = max_grade

    @property
    def size(self) -> int:
        return self.a_rank + (self.max_grade + 1) * self.c_rank

    def c(self, i: int, j: int) -> int:
        if not (0 <= i <= self.max_grade and 1 <= j <= self.c_rank):
            raise PreconditionError(f"c[{i},{j}] outside the graded alphabet")
        return self.a_rank + i * self.c_rank + j

    def grade(self, x: int) -> int | None:
        n = abs(x)
        if n <= self.a_rank:
            return None
        return (n - self.a_rank - 1) // self.c_rank

    def shift(self, x: int) -> int:
        """psi(c[i,j]) = c[i+1,j]."""
        n = abs(x)
        out = n + self.c_rank
        return out if x > 0 else -out

    def format_letter(self, x: int) -> str:
        n = abs(x)
        if n <= self.a_rank:
            return format_letter(x)
        i = (n - self.a_rank - 1) // self.c_rank
        j = (n - self.a_rank - 1) % self.c_rank + 1
        return f"c[{i},{j}]" if x > 0 else f"C[{i},{j}]"

    def format_word(self, w: Word) -> str:
        return "".join(self.format_letter(x) for x in w.letters) or "1"

    def parse(self, text: str) -> Word:
        import re

        out = []
        text = text.strip()
        if text in ("", "1"):
            return Word()
        for m in re.finditer(r"([cC])\[(\d+),(\d+)\]|([A-Za-z])|(\S)", text):
            if m.group(1):
                i, j = int(m.group(2)), int(m.group(3))
                if i > self.max_grade:
                    raise CapExceeded(f"grade {i} exceeds the cap {self.max_grade}")
                if not 1 <= j <= self.c_rank:
                    raise ParseError(f"c index {j} outside 1..{self.c_rank}")
                x = self.c(i, j)
                out.append(x if m.group(1) == "c" else -x)
            elif m.group(4):
                x = parse_letters(m.group(4))[0]
                if abs(x) > self.a_rank:
                    raise ParseError(f"letter {m.group(4)} outside A (rank {self.a_rank})")
                out.append(x)
            elif m.group(5) not in ".*":
                raise ParseError(f"unexpected character {m.group(5)!r}")
        return Word(out)


@dataclass
class HNNDecomposition:
    alphabet: GradedAlphabet
    m: int
    F: list[Word]
    L: list[Word]
    U: list[Word]
    phi: list[tuple[Word, Word]]

    def as_dict(self) -> dict:
        fw = self.alphabet.format_word
        return {
            "m": self.m,
            "F": [fw(w) for w in self.F],
            "L": [fw(w) for w in self.L],
            "U": [fw(w) for w in self.U],
            "phi": {fw(x): fw(y) for x, y in self.phi},
        }


def hnn_decomposition(a_rank: int, c_rank: int, psi_images: Sequence[Word | str], m_cap: int = 16) -> HNNDecomposition:
    """Split M(psi) as an HNN extension of F = A*C_0*...*C_m along L -> U.

    psi fixes the grading on the C letters (c[i,j] -> c[i+1,j]); only the
    images of A's letters are given.  The factor A*C_0*...*C_m is generated
    by letters, so psi(A) lies in it iff the images use grades <= m.
    """
    if len(psi_images) != a_rank:
        raise PreconditionError(f"expected {a_rank} images for A, got {len(psi_images)}")
    alpha = GradedAlphabet(a_rank, c_rank, m_cap)
    images = [alpha.parse(w) if isinstance(w, str) else w for w in psi_images]
    if any(w.max_index() > alpha.size for w in images):
        raise CapExceeded(f"an image uses a grade beyond {m_cap}")
    grades = [alpha.grade(x) for w in images for x in w.letters]
    m = max((g for g in grades if g is not None), default=0)
    a_letters = [Word([i]) for i in range(1, a_rank + 1)]
    c_up_to = lambda lo, hi: [Word([alpha.c(i, j)]) for i in range(lo, hi + 1) for j in range(1, c_rank + 1)]
    F = a_letters + c_up_to(0, m)
    L = a_letters + c_up_to(0, m - 1)
    U = list(images) + c_up_to(1, m)
    if images and subgroup_graph(U, alpha.size).betti() != len(U):
        raise NotInjective("psi restricted to A is not injective or psi(A) meets the new C letters")
    phi = [(w, images[w.letters[0] - 1]) for w in a_letters]
    phi += [(w, Word([alpha.shift(w.letters[0])])) for w in c_up_to(0, m - 1)]
    return HNNDecomposition(alpha, m, F, L, U, phi)


# ---------------------------------------------------------------- peripherals


@dataclass
class FreeFactor:
    """g^-1 <letters> g."""

    letters: tuple[int, ...]
    conjugator: Word = field(default_factory=Word)

    def basis(self) -> list[Word]:
        return [Word([x]).conjugate(self.conjugator) for x in self.letters]


@dataclass
class Peripheral:
    index: int
    orbit: list[int]
    h: MTElement
    generators: list[MTElement]
    certificate: SubMTCertificate


def peripheral_candidates(M: MappingTorus, factors: Sequence[FreeFactor | Iterable[int]],
                          f_list: Sequence[Word] | None = None) -> list[Peripheral]:
    """For each sigma-periodic factor A_i build h_i = t f_i t f_sigma(i) ... and H_i = <A_i, h_i>.

    sigma(i) is the first j with f_i^-1 psi(A_i) f_i <= A_j.
    """
    factors = [f if isinstance(f, FreeFactor) else FreeFactor(tuple(f)) for f in factors]
    if f_list is None:
        f_list = [Word()] * len(factors)
    if len(f_list) != len(factors):
        raise PreconditionError("need one conjugator per factor")
    graphs = [subgroup_graph(fac.basis(), M.rank) for fac in factors]
    sigma = []
    for i, fac in enumerate(factors):
        images = [apply(M.psi, a).conjugate(f_list[i]) for a in fac.basis()]
        target = next((j for j, g in enumerate(graphs) if all(membership(g, w) for w in images)), None)
        if target is None:
            raise PreconditionError(f"psi(A_{i + 1}) conjugated by {f_list[i]} lies in no listed factor")
        sigma.append(target)
    out = []
    for i in range(len(factors)):
        orbit = [i]
        j = sigma[i]
        while j != i and len(orbit) <= len(factors):
            orbit.append(j)
            j = sigma[j]
        if j != i:
            continue
        h = M.product(M.product([M.stable, M.f_element(f_list[k])]) for k in orbit)
        # h = t^l f with f read off the normal form
        assert h.b == 0 and h.a == len(orbit)
        cert = SubMTCertificate(factors[i].basis(), len(orbit), h.w)
        if not cert.verify(M):
            raise AssertionError("peripheral certificate failed")
        gens = [M.f_element(w) for w in factors[i].basis()] + [h]
        out.append(Peripheral(i + 1, [k + 1 for k in orbit], h, gens, cert))
    return out


# ---------------------------------------------------------------- invariant free factors


@dataclass
class ScanResult:
    found: bool
    factor: list[Word]
    m: int | None
    conjugator: Word | None
    verdict: str
    candidates_checked: int


def _cyclic_candidates(rank: int, word_len_cap: int):
    from .one_relator import is_primitive
    from .words import words_up_to

    seen = set()
    for w in words_up_to(rank, word_len_cap):
        if len(w) < 1 or not w.is_cyclically_reduced():
            continue
        key = min(min(r.letters for r in w.rotations()), min(r.letters for r in w.inverse().rotations()))
        if key in seen:
            continue
        seen.add(key)
        if is_primitive(w, rank):
            yield [w]


def invariant_free_factor_scan(M: MappingTorus, word_len_cap: int = 6, m_max: int = 6) -> ScanResult:
    """Bounded search for a proper free factor F with psi^m(F) conjugate into F."""
    n = M.rank
    family = "proper basis subsets and cyclic factors <u> with u primitive"
    subsets = ([Word([x]) for x in sub] for size in range(1, n) for sub in itertools.combinations(range(1, n + 1), size))
    cyclic = _cyclic_candidates(n, word_len_cap) if n > 1 else iter(())
    checked = 0
    for cand in itertools.chain(subsets, cyclic):
        checked += 1
        for m in range(1, m_max + 1):
            images = [apply(iterate(M.psi, m), w) for w in cand]
            f = conjugate_into(images, cand, n)
            if f is not None:
                verdict = (f"found: psi^{m} maps <{', '.join(map(str, cand))}> into a conjugate of itself "
                           f"(conjugator {f})")
                return ScanResult(True, cand, m, f, verdict, checked)
    verdict = (f"none found within caps (word_len_cap={word_len_cap}, m_max={m_max}) over candidate family: "
               f"{family}; this is not a proof of full irreducibility")
    return ScanResult(False, [], None, None, verdict, checked)
