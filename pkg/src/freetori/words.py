"""Freely reduced words and endomorphisms of finitely generated free groups.

Letters are nonzero integers: ``i`` is the i-th basis generator and ``-i``
its formal inverse.  Words are always stored freely reduced.

ASCII rendering uses ``a..z`` without ``t`` (reserved for the stable
letter of a mapping torus), uppercase for inverses.  Generators past the
25th render as ``x[26]`` / ``X[26]``.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Sequence

from .errors import AlphabetMismatch, ParseError, PreconditionError

ALPHABET = "abcdefghijklmnopqrsuvwxyz"
_INDEX = {ch: i + 1 for i, ch in enumerate(ALPHABET)}


def letter_index(letter: int) -> int:
    return abs(letter)


def letter_sign(letter: int) -> int:
    return 1 if letter > 0 else -1


def reduce(letters: Iterable[int]) -> tuple[int, ...]:
    """Free reduction by a single left-to-right stack pass."""
    out: list[int] = []
    for x in letters:
        if x == 0:
            raise ValueError("0 is not a letter")
        if out and out[-1] == -x:
            out.pop()
        else:
            out.append(x)
    return tuple(out)


class Word:
    """An element of a free group, stored as a freely reduced letter tuple."""

    __slots__ = ("letters",)

    def __init__(self, letters: Iterable[int] = ()):
        object.__setattr__(self, "letters", reduce(letters))

    def __setattr__(self, name, value):
        raise AttributeError("Word is immutable")

    @classmethod
    def _raw(cls, letters: tuple[int, ...]) -> "Word":
        # caller guarantees the tuple is already reduced
        w = object.__new__(cls)
        object.__setattr__(w, "letters", letters)
        return w

    @classmethod
    def parse(cls, text: str) -> "Word":
        return cls(parse_letters(text))

    @classmethod
    def identity(cls) -> "Word":
        return _EMPTY

    def __len__(self) -> int:
        return len(self.letters)

    def __iter__(self):
        return iter(self.letters)

    def __getitem__(self, item):
        if isinstance(item, slice):
            return Word(self.letters[item])
        return self.letters[item]

    def __bool__(self) -> bool:
        return bool(self.letters)

    def __eq__(self, other) -> bool:
        if isinstance(other, Word):
            return self.letters == other.letters
        return NotImplemented

    def __lt__(self, other: "Word") -> bool:
        return (len(self), _sort_key(self.letters)) < (len(other), _sort_key(other.letters))

    def __hash__(self) -> int:
        return hash(self.letters)

    def __mul__(self, other: "Word") -> "Word":
        if not isinstance(other, Word):
            return NotImplemented
        a, b = self.letters, other.letters
        i = 0
        while i < len(a) and i < len(b) and a[-1 - i] == -b[i]:
            i += 1
        return Word._raw(a[: len(a) - i] + b[i:])

    def inverse(self) -> "Word":
        return Word._raw(tuple(-x for x in reversed(self.letters)))

    __invert__ = inverse

    def __pow__(self, n: int) -> "Word":
        if n < 0:
            return self.inverse() ** (-n)
        out = _EMPTY
        for _ in range(n):
            out = out * self
        return out

    def conjugate(self, f: "Word") -> "Word":
        """``f^-1 * self * f``."""
        return f.inverse() * self * f

    def max_index(self) -> int:
        return max((abs(x) for x in self.letters), default=0)

    def cyclic_reduction(self) -> tuple["Word", "Word"]:
        """Return ``(c, u)`` with ``self == u * c * u^-1`` and ``c`` cyclically reduced."""
        letters = self.letters
        i, j = 0, len(letters) - 1
        while i < j and letters[i] == -letters[j]:
            i += 1
            j -= 1
        return Word._raw(letters[i : j + 1]), Word._raw(letters[:i])

    def is_cyclically_reduced(self) -> bool:
        return len(self.letters) < 2 or self.letters[0] != -self.letters[-1]

    def rotations(self) -> list["Word"]:
        c, _ = self.cyclic_reduction()
        ls = c.letters
        return [Word._raw(ls[k:] + ls[:k]) for k in range(max(len(ls), 1))]

    def __str__(self) -> str:
        return format_word(self)

    def __repr__(self) -> str:
        return f"Word({format_word(self)!r})"


_EMPTY = Word._raw(())


def _sort_key(letters: tuple[int, ...]) -> tuple[tuple[int, int], ...]:
    # a < A < b < B < ...
    return tuple((abs(x), 0 if x > 0 else 1) for x in letters)


def format_letter(x: int) -> str:
    i = abs(x)
    if i <= len(ALPHABET):
        ch = ALPHABET[i - 1]
        return ch if x > 0 else ch.upper()
    return f"x[{i}]" if x > 0 else f"X[{i}]"


def format_word(w: Word | Sequence[int]) -> str:
    letters = w.letters if isinstance(w, Word) else tuple(w)
    if not letters:
        return "1"
    return "".join(format_letter(x) for x in letters)


_TOKEN = re.compile(r"([xX])\[(\d+)\]|([A-Za-z])|(\S)")


def parse_letters(text: str, allow_stable: bool = False) -> list:
    """Tokenise a word literal.  ``1`` or empty means the identity.

    With ``allow_stable`` the letters ``t``/``T`` come back as the strings
    ``"t"``/``"T"`` instead of raising.
    """
    text = text.strip()
    if text in ("", "1"):
        return []
    out: list = []
    for m in _TOKEN.finditer(text):
        if m.group(1):
            i = int(m.group(2))
            if i < 1:
                raise ParseError(f"bad generator index in {text!r}")
            out.append(i if m.group(1) == "x" else -i)
        elif m.group(3):
            ch = m.group(3)
            if ch in "tT":
                if not allow_stable:
                    raise ParseError(f"stable letter {ch!r} not allowed in a free-group word: {text!r}")
                out.append(ch)
                continue
            i = _INDEX.get(ch.lower())
            out.append(i if ch.islower() else -i)
        elif m.group(4) in ".*·":
            continue
        else:
            raise ParseError(f"unexpected character {m.group(4)!r} in {text!r}")
    return out


@dataclass(frozen=True)
class Endomorphism:
    """An endomorphism of F_rank given by the images of the basis letters."""

    rank: int
    images: tuple[Word, ...]

    def __post_init__(self):
        if self.rank < 1:
            raise PreconditionError("rank must be positive")
        images = tuple(w if isinstance(w, Word) else Word(w) for w in self.images)
        object.__setattr__(self, "images", images)
        if len(images) != self.rank:
            raise AlphabetMismatch(f"expected {self.rank} images, got {len(images)}")
        for w in images:
            if w.max_index() > self.rank:
                raise AlphabetMismatch(f"image {w} uses a letter outside rank {self.rank}")

    @classmethod
    def identity(cls, rank: int) -> "Endomorphism":
        return cls(rank, tuple(Word([i]) for i in range(1, rank + 1)))

    @classmethod
    def from_strings(cls, images: Sequence[str], rank: int | None = None) -> "Endomorphism":
        words = [Word.parse(s) for s in images]
        return cls(rank or len(words), tuple(words))

    def __call__(self, w: Word) -> Word:
        return apply(self, w)

    def __str__(self) -> str:
        return ", ".join(f"{format_letter(i + 1)}->{img}" for i, img in enumerate(self.images))


def apply(psi: Endomorphism, w: Word) -> Word:
    out: list[int] = []
    for x in w.letters:
        i = abs(x)
        if i > psi.rank:
            raise AlphabetMismatch(f"letter {format_letter(x)} outside rank {psi.rank}")
        img = psi.images[i - 1].letters
        out.extend(img if x > 0 else [-y for y in reversed(img)])
    return Word(out)


def compose(psi: Endomorphism, phi: Endomorphism) -> Endomorphism:
    """``psi o phi``: first phi, then psi."""
    if psi.rank != phi.rank:
        raise AlphabetMismatch("rank mismatch in compose")
    return Endomorphism(psi.rank, tuple(apply(psi, img) for img in phi.images))


@lru_cache(maxsize=1024)
def iterate(psi: Endomorphism, k: int) -> Endomorphism:
    if k < 0:
        raise PreconditionError("iterate needs k >= 0")
    if k == 0:
        return Endomorphism.identity(psi.rank)
    return compose(psi, iterate(psi, k - 1))


def conjugation(h: Word, rank: int) -> Endomorphism:
    """``g -> h^-1 g h``."""
    return Endomorphism(rank, tuple(Word([i]).conjugate(h) for i in range(1, rank + 1)))


def is_injective(psi: Endomorphism) -> bool:
    """Fold the wedge of image loops and compare first Betti numbers."""
    from .stallings import subgroup_graph

    if any(not img for img in psi.images):
        return False
    return subgroup_graph(psi.images, psi.rank).betti() == psi.rank


def parse_endomorphism(text: str, rank: int | None = None) -> Endomorphism:
    """Parse ``a -> ab`` lines (newline, comma or semicolon separated)."""
    images: dict[int, Word] = {}
    for chunk in re.split(r"[\n;,]", text):
        chunk = chunk.strip()
        if not chunk or chunk.startswith("#"):
            continue
        if "->" not in chunk:
            raise ParseError(f"expected 'x -> word', got {chunk!r}")
        lhs, rhs = (s.strip() for s in chunk.split("->", 1))
        letters = parse_letters(lhs)
        if len(letters) != 1 or letters[0] < 0:
            raise ParseError(f"left side must be a single generator: {lhs!r}")
        if letters[0] in images:
            raise ParseError(f"generator {lhs} given twice")
        images[letters[0]] = Word(parse_letters(rhs))
    if not images:
        raise ParseError("empty endomorphism")
    n = rank or max(images)
    n = max(n, max(images), max(w.max_index() for w in images.values()))
    missing = [i for i in range(1, n + 1) if i not in images]
    if missing:
        raise ParseError(f"no image given for {', '.join(format_letter(i) for i in missing)}")
    return Endomorphism(n, tuple(images[i] for i in range(1, n + 1)))


def format_endomorphism(psi: Endomorphism) -> str:
    return "\n".join(f"{format_letter(i + 1)} -> {img}" for i, img in enumerate(psi.images))


def words_up_to(rank: int, max_len: int):
    """All reduced words of length <= max_len, shortlex order."""
    letters = [x for i in range(1, rank + 1) for x in (i, -i)]
    level = [()]
    yield _EMPTY
    for _ in range(max_len):
        nxt = []
        for w in level:
            for x in letters:
                if w and w[-1] == -x:
                    continue
                nxt.append(w + (x,))
        for w in nxt:
            yield Word._raw(w)
        level = nxt
