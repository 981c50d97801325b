import pytest
from hypothesis import given, strategies as st

from freetori.errors import AlphabetMismatch, ParseError
from freetori.words import (
    Endomorphism,
    Word,
    apply,
    compose,
    conjugation,
    format_endomorphism,
    is_injective,
    iterate,
    parse_endomorphism,
    reduce,
    words_up_to,
)

letters2 = st.lists(st.sampled_from([1, -1, 2, -2]), max_size=12)


def W(s):
    return Word.parse(s)


def test_reduce():
    assert reduce([1, -1]) == ()
    assert reduce([1, 2, -2, 1]) == (1, 1)
    assert W("abBa") == W("aa")
    assert str(W("aA")) == "1"
    assert str(W("1")) == "1"


def test_parse_and_format():
    assert W("aB").letters == (1, -2)
    assert W("x[27]X[27]") == Word()
    assert str(Word([26, -27])) == "x[26]X[27]"
    assert str(Word([25])) == "z"
    with pytest.raises(ParseError):
        W("at")
    with pytest.raises(ParseError):
        W("a$")


def test_shortlex_order():
    assert W("a") < W("A") < W("b") < W("aa")


@given(letters2, letters2)
def test_group_laws(x, y):
    u, v = Word(x), Word(y)
    assert (u * v).inverse() == v.inverse() * u.inverse()
    assert u * u.inverse() == Word()
    assert Word(x + y) == u * v


@given(letters2)
def test_cyclic_reduction(x):
    w = Word(x)
    c, u = w.cyclic_reduction()
    assert u * c * u.inverse() == w
    assert c.is_cyclically_reduced()


def test_conjugate_convention():
    assert W("a").conjugate(W("b")) == W("Bab")


def test_endomorphisms():
    fib = parse_endomorphism("a -> ab\nb -> a")
    assert str(fib) == "a->ab, b->a"
    assert str(iterate(fib, 2)) == "a->aba, b->ab"
    assert compose(fib, fib) == iterate(fib, 2)
    assert apply(fib, W("B")) == W("A")
    assert parse_endomorphism(format_endomorphism(fib)) == fib
    assert is_injective(fib)
    assert not is_injective(parse_endomorphism("a->ab, b->ab"))
    assert not is_injective(parse_endomorphism("a->aa, b->aaa"))
    assert is_injective(parse_endomorphism("a->aa"))
    assert not is_injective(parse_endomorphism("a->1, b->b"))
    assert apply(conjugation(W("b"), 2), W("a")) == W("Bab")


def test_endomorphism_errors():
    with pytest.raises(ParseError):
        parse_endomorphism("a -> ab")  # b is used but has no image
    with pytest.raises(ParseError):
        parse_endomorphism("a ab")
    with pytest.raises(AlphabetMismatch):
        Endomorphism(1, (W("ab"),))
    with pytest.raises(AlphabetMismatch):
        apply(parse_endomorphism("a->aa"), W("b"))


def test_words_up_to():
    ws = list(words_up_to(2, 2))
    assert len(ws) == 1 + 4 + 12
    assert ws == sorted(ws)
