"""Exact enumeration: Dejean word counts, class-resolved F_m counts, oracles.

Every enumeration here works on isomorphism orbits: a Dejean word of length
at least k-1 is rarefied, so its orbit has exactly k! members and contains
exactly one word with a given trimmed window.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator, Sequence

import numpy as np

from .language_graph import GuardExceeded, QuotientIndex
from .words import (
    AlphabetParams,
    compose,
    extension_safe,
    identity,
    is_dejean,
    is_prohibited,
    minimal_period,
)


@dataclass
class Guard:
    """Caps on enumeration work; ``None`` disables a cap."""

    max_nodes: int | None = None
    max_seconds: float | None = None

    def __post_init__(self):
        self._start = time.monotonic()
        self._nodes = 0

    def tick(self, n: int = 1) -> None:
        self._nodes += n
        if self.max_nodes is not None and self._nodes > self.max_nodes:
            raise GuardExceeded(f"enumeration exceeded {self.max_nodes} nodes")
        if self.max_seconds is not None and (self._nodes & 0x3FF) == 0:
            if time.monotonic() - self._start > self.max_seconds:
                raise GuardExceeded(f"enumeration exceeded {self.max_seconds} s")


@dataclass
class ClassCounts:
    n: int
    counts: list
    weighted: Fraction | None = None

    def weigh(self, x_hat: Sequence[Fraction]) -> Fraction:
        self.weighted = sum((c * x for c, x in zip(self.counts, x_hat)), Fraction(0))
        return self.weighted


def _falling(k: int, d: int) -> int:
    return math.perm(k, d)


def count_dejean_exact(params: AlphabetParams, n_max: int, guard: Guard | None = None) -> list:
    """``[S(1), ..., S(n_max)]`` by DFS over first-occurrence-normalized words.

    Each normalized word with d distinct letters stands for k!/(k-d)! words.
    """
    guard = guard or Guard()
    k = params.k
    totals = [0] * (n_max + 1)
    if n_max < 1:
        return []
    w = [0]
    totals[1] = k
    # stack of candidate lists; distinct-letter count rides along each choice
    stack = [_options(params, w, 1)]
    while stack:
        opts = stack[-1]
        if not opts:
            stack.pop()
            if stack:
                w.pop()
            continue
        a, used = opts.pop()
        w.append(a)
        guard.tick()
        totals[len(w)] += _falling(k, used)
        if len(w) < n_max:
            stack.append(_options(params, w, used))
        else:
            w.pop()
    return totals[1:]


def _options(params: AlphabetParams, w: list, used: int) -> list:
    k = params.k
    recent = set(w[-(k - 2):])
    out = []
    for a in range(min(used + 1, k)):
        if a not in recent and extension_safe(w, a, params):
            out.append((a, used + (a == used)))
    return out


def naive_count_dejean(params: AlphabetParams, n_max: int, chunk: int = 200_000) -> list:
    """Oracle: level-by-level filter of every word with a full factor scan.

    All k words extend every surviving word; candidates are rejected when any
    factor has period p and length floor(kp/(k-1))+1, checked by vectorized
    comparison over the whole word (no incremental reasoning).
    """
    k = params.k
    level = np.arange(k, dtype=np.int8).reshape(k, 1)
    counts = [len(level)]
    letters = np.arange(k, dtype=np.int8)
    for n in range(2, n_max + 1):
        survivors = []
        for lo in range(0, len(level), chunk):
            block = level[lo:lo + chunk]
            cand = np.concatenate([np.repeat(block, k, axis=0),
                                   np.tile(letters, len(block)).reshape(-1, 1)], axis=1)
            survivors.append(cand[_all_factors_ok(cand, params)])
        level = np.concatenate(survivors) if survivors else level[:0]
        counts.append(len(level))
    return counts[:n_max]


def _all_factors_ok(words: np.ndarray, params: AlphabetParams) -> np.ndarray:
    n = words.shape[1]
    ok = np.ones(len(words), dtype=bool)
    p = 1
    while True:
        L = params.window(p)
        if L > n:
            return ok
        for start in range(n - L + 1):
            seg = words[:, start:start + L]
            ok &= ~np.all(seg[:, p:] == seg[:, :L - p], axis=1)
        p += 1


# ---------------------------------------------------------------------------
# class-resolved counts of F_m

def _fm_subtree(args) -> list:
    """Per-length class counts for words of F_m starting with ``reps[start]``."""
    q, start, n_max, max_nodes, max_seconds = args
    guard = Guard(max_nodes, max_seconds)
    params, m, s = q.params, q.m, q.s
    out_edges = q.out_edges()
    table = [[0] * s for _ in range(n_max + 1)]
    word = list(q.reps[start])
    table[m][start] += 1
    if n_max == m:
        return table
    ident = identity(params.k)

    def children(d, sigma):
        res = []
        for e, tau in out_edges[d]:
            rho = compose(sigma, tau)
            a = rho[q.reps[e][-1]]
            if extension_safe(word, a, params):
                res.append((e, rho, a))
        return res

    stack = [children(start, ident)]
    while stack:
        opts = stack[-1]
        if not opts:
            stack.pop()
            if stack:
                word.pop()
            continue
        e, rho, a = opts.pop()
        word.append(a)
        guard.tick()
        table[len(word)][e] += 1
        if len(word) < n_max:
            stack.append(children(e, rho))
        else:
            word.pop()
    return table


def count_Fm_by_class(q: QuotientIndex, n_max: int, guard: Guard | None = None,
                      workers: int = 1) -> list:
    """``ClassCounts`` for n = m..n_max with ``counts[i] = |F_m^(w_i)(n)|``."""
    if n_max < q.m:
        raise ValueError("n_max must be >= m")
    guard = guard or Guard()
    jobs = [(q, c, n_max, guard.max_nodes, guard.max_seconds) for c in range(q.s)]
    total = [[0] * q.s for _ in range(n_max + 1)]

    def merge(table):
        for n in range(q.m, n_max + 1):
            row = total[n]
            for i, v in enumerate(table[n]):
                row[i] += v

    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for table in pool.map(_fm_subtree, jobs):
                merge(table)
    else:
        for job in jobs:
            merge(_fm_subtree(job))
    return [ClassCounts(n, total[n]) for n in range(q.m, n_max + 1)]


def weighted_counts(counts: Sequence[ClassCounts], x_hat: Sequence[Fraction]) -> dict:
    return {c.n: c.weigh(x_hat) for c in counts}


# ---------------------------------------------------------------------------
# brute-force oracles (word level, no voltage arithmetic)

def _window_ok(q: QuotientIndex, w: Sequence[int]) -> bool:
    """Last m-window in F^(m) and last (m+1)-window Dejean."""
    m = q.m
    if len(w) >= m and not q.contains(w[-m:]):
        return False
    if len(w) >= m + 1 and not is_dejean(w[-(m + 1):], q.params):
        return False
    return True


def iter_Lm_words(q: QuotientIndex, start: Sequence[int], length: int,
                  dejean: bool = False) -> Iterator[tuple]:
    """Words of L_m of the given length beginning with ``start``.

    L_m is read as walks of the descendant graph on F^(m): consecutive
    m-windows are joined through a Dejean (m+1)-window.  With ``dejean=True``
    the whole word must also be Dejean (full rescan, not incremental).
    """
    params = q.params
    stack = [list(start)]
    while stack:
        w = stack.pop()
        if len(w) == length:
            yield tuple(w)
            continue
        for a in range(params.k):
            v = w + [a]
            if not _window_ok(q, v):
                continue
            if dejean and not is_dejean(v, params):
                continue
            stack.append(v)


def oracle_Lm_paths(q: QuotientIndex, u: Sequence[int], w: Sequence[int], length: int) -> int:
    if length < q.m:
        return 0
    if not q.contains(u) or not q.contains(w):
        return 0
    w = tuple(w)
    m = q.m
    return sum(1 for v in iter_Lm_words(q, u, length) if v[-m:] == w)


def iter_Fm_orbits(q: QuotientIndex, n: int) -> Iterator[tuple]:
    """One word per orbit of F_m(n): those whose first window is a trimmed rep."""
    for rep in q.reps:
        yield from iter_Lm_words(q, rep, n, dejean=True)


def minimal_prohibited_suffix(v: Sequence[int], params: AlphabetParams):
    for L in range(2, len(v) + 1):
        if is_prohibited(v[-L:], params):
            return L
    return None


def oracle_Hj(q: QuotientIndex, n: int) -> dict:
    """``{j: [|H_j^(w_i)(n+1)| for i]}`` by enumerating G(n+1) from definitions.

    G^(w)(n+1) holds the L_m words v of length n+1 with suffix w whose prefix
    v[1:n] is Dejean; those with a prohibited suffix are split by the minimal
    period of the shortest such suffix.
    """
    params, m = q.params, q.m
    out: dict = {}
    for u in iter_Fm_orbits(q, n):
        for a in range(params.k):
            v = u + (a,)
            if not _window_ok(q, v):
                continue
            L = minimal_prohibited_suffix(v, params)
            if L is None:
                continue
            j = minimal_period(v[-L:])
            cls = q.locate(v[-m:])[0]
            out.setdefault(j, [0] * q.s)[cls] += 1
    return out


def oracle_G_counts(q: QuotientIndex, n: int) -> list:
    """``[|G^(w_i)(n+1)| for i]``."""
    out = [0] * q.s
    for u in iter_Fm_orbits(q, n):
        for a in range(q.params.k):
            v = u + (a,)
            if _window_ok(q, v):
                out[q.locate(v[-q.m:])[0]] += 1
    return out


def oracle_Fm_counts(q: QuotientIndex, n: int) -> list:
    out = [0] * q.s
    for v in iter_Fm_orbits(q, n):
        out[q.locate(v[-q.m:])[0]] += 1
    return out
