"""Words over a k-letter alphabet and the local predicates used everywhere else.

Letters are the integers ``0..k-1``.  A word is any sequence of such integers;
internally tuples are used so words can be hashed and sorted.  Text rendering
maps ``0..9`` to ``'a'..'j'``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

Word = tuple  # tuple[int, ...]
Permutation = tuple  # perm[a] is the image of letter a

LETTERS = "abcdefghij"


class WordDomainError(ValueError):
    """Raised when an operation is applied outside its domain."""


@dataclass(frozen=True)
class AlphabetParams:
    k: int
    threshold: Fraction = field(init=False)

    def __post_init__(self):
        if self.k < 2:
            raise WordDomainError(f"alphabet size must be >= 2, got {self.k}")
        object.__setattr__(self, "threshold", Fraction(self.k, self.k - 1))

    def window(self, p: int) -> int:
        """Shortest length at which a factor of period ``p`` is prohibited."""
        return (self.k * p) // (self.k - 1) + 1


def parse_word(text: str, k: int) -> Word:
    out = []
    for ch in text:
        idx = LETTERS.find(ch)
        if idx < 0 or idx >= k:
            raise WordDomainError(f"letter {ch!r} is not in the {k}-letter alphabet")
        out.append(idx)
    return tuple(out)


def format_word(w: Sequence[int]) -> str:
    return "".join(LETTERS[a] for a in w)


def minimal_period(w: Sequence[int]) -> int:
    n = len(w)
    if n == 0:
        raise WordDomainError("the empty word has no period")
    # border array; smallest period = n - longest proper border
    border = [0] * n
    b = 0
    for i in range(1, n):
        while b and w[i] != w[b]:
            b = border[b - 1]
        if w[i] == w[b]:
            b += 1
        border[i] = b
    return n - border[-1]


def exponent(w: Sequence[int]) -> Fraction:
    return Fraction(len(w), minimal_period(w))


def is_prohibited(w: Sequence[int], params: AlphabetParams) -> bool:
    """Exponent strictly above k/(k-1), decided by cross-multiplication."""
    p = minimal_period(w)
    return len(w) * (params.k - 1) > p * params.k


def _has_period(w: Sequence[int], start: int, length: int, p: int) -> bool:
    for i in range(start + length - 1, start + p - 1, -1):
        if w[i] != w[i - p]:
            return False
    return True


def is_dejean(w: Sequence[int], params: AlphabetParams) -> bool:
    """True iff no factor of ``w`` is prohibited.

    Only the minimal window ``floor(kp/(k-1)) + 1`` is tested for each period
    ``p``: every longer prohibited factor contains a prohibited one of that
    length with the same period.
    """
    n = len(w)
    p = 1
    while True:
        L = params.window(p)
        if L > n:
            return True
        for start in range(n - L + 1):
            if _has_period(w, start, L, p):
                return False
        p += 1


def extension_safe(w: Sequence[int], a: int, params: AlphabetParams) -> bool:
    """``is_dejean(w + a)`` assuming ``is_dejean(w)``.

    Only suffixes of ``w + a`` can be new prohibited factors, so each period is
    tested on the single window ending at ``a``.
    """
    n = len(w) + 1
    k = params.k
    last = n - 1
    p = 1
    while True:
        L = (k * p) // (k - 1) + 1
        if L > n:
            return True
        if w[last - p] == a:
            ok = True
            for i in range(last - 1, n - L + p - 1, -1):
                if w[i] != w[i - p]:
                    ok = False
                    break
            if ok:
                return False
        p += 1


def is_rarefied(w: Sequence[int], params: AlphabetParams) -> bool:
    last_seen: dict[int, int] = {}
    gap = params.k - 1
    for i, a in enumerate(w):
        j = last_seen.get(a)
        if j is not None and i - j < gap:
            return False
        last_seen[a] = i
    return True


def apply_perm(sigma: Permutation, w: Sequence[int]) -> Word:
    return tuple(sigma[a] for a in w)


def compose(sigma: Permutation, tau: Permutation) -> Permutation:
    """The permutation ``a -> sigma[tau[a]]``."""
    return tuple(sigma[t] for t in tau)


def invert(sigma: Permutation) -> Permutation:
    inv = [0] * len(sigma)
    for a, b in enumerate(sigma):
        inv[b] = a
    return tuple(inv)


def identity(k: int) -> Permutation:
    return tuple(range(k))


def trim_canonicalize(w: Sequence[int], params: AlphabetParams) -> tuple[Word, Permutation]:
    """Relabel ``w`` so its last k-1 letters read ``0, 1, ..., k-2``.

    Returns the trimmed word and the relabeling ``sigma`` with
    ``trimmed == apply_perm(sigma, w)``.  The letter not among the last k-1
    positions is sent to ``k-1``.
    """
    k = params.k
    n = len(w)
    if n < k - 1:
        raise WordDomainError(f"word of length {n} is too short to trim (need {k - 1})")
    if not is_rarefied(w, params):
        raise WordDomainError("only rarefied words can be trimmed")
    tail = w[n - (k - 1):]
    sigma = [k - 1] * k
    for j, a in enumerate(tail):
        sigma[a] = j
    sigma = tuple(sigma)
    return apply_perm(sigma, w), sigma


def is_trimmed(w: Sequence[int], params: AlphabetParams) -> bool:
    k = params.k
    n = len(w)
    return n >= k - 1 and tuple(w[n - (k - 1):]) == tuple(range(k - 1))


def normalize_first_occurrence(w: Sequence[int]) -> Word:
    """Relabel letters in order of first appearance (orbit representative)."""
    seen: dict[int, int] = {}
    out = []
    for a in w:
        if a not in seen:
            seen[a] = len(seen)
        out.append(seen[a])
    return tuple(out)
