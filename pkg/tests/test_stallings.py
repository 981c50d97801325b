import random

import pytest

from oracles import based_isomorphic, double_coset_member, naive_fold, oracle_member, wedge_of_loops
from freetori.errors import PreconditionError
from freetori.stallings import (
    SpanningBasis,
    StallingsGraph,
    basis,
    conjugate_into,
    core,
    fold,
    graph_from_words,
    induced_free_factor_system,
    intersection,
    is_isomorphic,
    membership,
    pullback,
    reduced_rank,
    subgroup_graph,
    subgroup_rank,
)
from freetori.words import Word, words_up_to


def W(s):
    return Word.parse(s)


def Ws(*ss):
    return [W(s) for s in ss]


def random_word(rng, rank, max_len, min_len=1):
    letters = [x for i in range(1, rank + 1) for x in (i, -i)]
    while True:
        w = Word(rng.choice(letters) for _ in range(rng.randint(min_len, max_len)))
        if len(w) >= min_len:
            return w


def test_fold_examples():
    g = subgroup_graph(Ws("aa", "aaa"))
    assert g.num_vertices == 1 and len(g.edges) == 1
    g = subgroup_graph(Ws("aa"))
    assert g.num_vertices == 2 and g.is_folded()
    assert membership(g, W("aaaa")) and not membership(g, W("a"))


def test_fold_matches_naive_fold(rng):
    for _ in range(40):
        gens = [random_word(rng, 3, 8) for _ in range(rng.randint(1, 3))]
        g, morph = fold(graph_from_words(gens, 3), random.Random(rng.random()))
        assert g.is_folded() and morph.is_valid()
        ref = naive_fold(*wedge_of_loops(gens), random.Random(rng.random()))
        assert based_isomorphic((g.num_vertices, list(g.edges), g.basepoint), ref)


def test_core_and_basis():
    g = subgroup_graph(Ws("abA"))
    assert basis(g) == Ws("abA")
    assert core(g).num_vertices == 1
    assert basis(subgroup_graph(Ws("aa", "b"))) == Ws("aa", "b")
    assert subgroup_rank(Ws("a", "b", "ab")) == 2
    assert reduced_rank(Ws("a", "b", "aBa")) == 1
    assert basis(subgroup_graph([])) == []


def test_spanning_basis_express(rng):
    for _ in range(30):
        gens = [random_word(rng, 2, 6) for _ in range(3)]
        g = subgroup_graph(gens, 2)
        sb = SpanningBasis(g)
        for w in gens:
            e = sb.express(w)
            assert e is not None
            out = Word()
            for x in e:
                out = out * (sb.words[x - 1] if x > 0 else sb.words[-x - 1].inverse())
            assert out == w


def test_membership_against_oracle(rng):
    for _ in range(20):
        gens = [random_word(rng, 2, 5) for _ in range(2)]
        g = subgroup_graph(gens, 2)
        for w in words_up_to(2, 5):
            assert membership(g, w) == oracle_member(gens, w)


def test_conjugate_into():
    assert conjugate_into(Ws("bAB"), Ws("a")) is not None
    # orientation: the result f satisfies f^-1 H f <= K
    assert conjugate_into(Ws("baB"), Ws("a")) == W("b")
    f = conjugate_into(Ws("bab"), Ws("a"))
    assert f is None
    for h, k in [("bAB", "a"), ("ab", "ba"), ("aa", "a"), ("Baab", "a")]:
        f = conjugate_into(Ws(h), Ws(k))
        assert membership(subgroup_graph(Ws(k)), W(h).conjugate(f))
    assert conjugate_into([], Ws("a")) == Word()


def test_intersection_examples():
    assert intersection(Ws("aa", "b"), Ws("aaa", "b")) == Ws("aaaaaa", "b")
    assert intersection(Ws("a"), Ws("b")) == []
    pb = pullback(subgroup_graph(Ws("a"), 2), subgroup_graph(Ws("b"), 2))
    assert pb.components == []


def test_pullback_components_are_double_cosets():
    h, k = Ws("ab", "aab"), Ws("ba", "bbb")
    pb = pullback(subgroup_graph(h), subgroup_graph(k))
    reps = [c.representative for c in pb.components]
    for i, g in enumerate(reps):
        # H^g ∩ K is spanned by the listed basis, and lies in both
        for w in pb.components[i].intersection_basis:
            assert membership(subgroup_graph(k), w)
            assert membership(subgroup_graph([x.conjugate(g) for x in h]), w)
        for j in range(i):
            assert not double_coset_member(h, reps[j], k, g)


def test_free_factor_system():
    entries = induced_free_factor_system(Ws("aa", "b"), [[1]])
    assert [(e.factor, e.basis, e.conjugator) for e in entries] == [(0, Ws("aa"), Word())]
    entries = induced_free_factor_system(Ws("bab", "b"), [[1], [2]])
    assert len(entries) == 2
    with pytest.raises(PreconditionError):
        induced_free_factor_system(Ws("a"), [[1, 2], [2]])


def test_isomorphism_and_errors():
    assert is_isomorphic(subgroup_graph(Ws("ab", "ba")), subgroup_graph(Ws("ba", "ab")))
    with pytest.raises(ValueError):
        StallingsGraph(1, [(0, 1, 3)], 0)
