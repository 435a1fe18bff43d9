"""Level sets F(m), the descendant graph, closed-word pruning and the quotient.

The full level set has k! words per isomorphism class, so beyond toy sizes
everything is done on trimmed class representatives.  A quotient edge
``(c, d, tau)`` says that a descendant of ``reps[c]`` equals
``apply_perm(tau, reps[d])``; together with the class list this is a
permutation-voltage graph whose k!-fold lift is the descendant graph on
F^(m) itself.
"""

from __future__ import annotations

import itertools
import logging
from collections import deque
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np

from .words import (
    AlphabetParams,
    Word,
    apply_perm,
    extension_safe,
    format_word,
    invert,
    is_rarefied,
    parse_word,
    trim_canonicalize,
)

log = logging.getLogger(__name__)

CACHE_MAGIC = "DEJG1"


class GuardExceeded(RuntimeError):
    """A configured resource cap was hit; results would be incomplete."""


class LanguageDies(RuntimeError):
    """Every word of F(m) is closed, so no quotient exists at this m."""


class ConsistencyFault(RuntimeError):
    pass


@dataclass
class LevelSet:
    params: AlphabetParams
    m: int
    words: list


def _children(params: AlphabetParams, w: list, used: int) -> Iterator[tuple[int, int]]:
    """Letters that keep a first-occurrence-normalized word Dejean."""
    k = params.k
    recent = set(w[-(k - 2):]) if k > 2 else set()
    top = min(used + 1, k)
    for a in range(top):
        if a in recent:
            continue
        if extension_safe(w, a, params):
            yield a, used + (a == used)


def iter_orbit_representatives(params: AlphabetParams, n: int,
                               prefix: Sequence[int] = ()) -> Iterator[Word]:
    """Normalized Dejean words of length ``n`` (one per isomorphism orbit).

    A word is normalized when its letters appear for the first time in the
    order 0, 1, 2, ...  ``prefix`` restricts the search to one subtree.
    """
    if n == 0:
        yield ()
        return
    w = list(prefix) or [0]
    if len(w) >= n:
        if len(w) == n:
            yield tuple(w)
        return
    stack = [list(_children(params, w, max(w) + 1))]
    while stack:
        opts = stack[-1]
        if opts:
            a, used = opts.pop()
            w.append(a)
            if len(w) == n:
                yield tuple(w)
                w.pop()
            else:
                stack.append(list(_children(params, w, used)))
        else:
            stack.pop()
            if stack:
                w.pop()


def _orbit_size(k: int, distinct: int) -> int:
    out = 1
    for i in range(distinct):
        out *= k - i
    return out


def enumerate_dejean_length(params: AlphabetParams, m: int, max_count: int = 2_000_000) -> LevelSet:
    """All Dejean words of length ``m``, sorted.  Only sensible for small m."""
    if m < 1:
        raise ValueError("m must be >= 1")
    k = params.k
    total = 0
    reps = list(iter_orbit_representatives(params, m))
    for r in reps:
        total += _orbit_size(k, len(set(r)))
        if total > max_count:
            raise GuardExceeded(f"more than {max_count} Dejean words of length {m} for k={k}")
    words = set()
    for r in reps:
        d = len(set(r))
        for images in itertools.permutations(range(k), d):
            words.add(tuple(images[a] for a in r))
    return LevelSet(params, m, sorted(words))


def _trimmed_reps_for_prefix(args):
    k, m, prefix = args
    params = AlphabetParams(k)
    return [trim_canonicalize(w, params)[0] for w in iter_orbit_representatives(params, m, prefix)]


def enumerate_dejean_classes(params: AlphabetParams, m: int, workers: int = 1,
                             max_count: int = 5_000_000) -> list:
    """Trimmed representatives of all isomorphism classes of F(m), sorted."""
    k = params.k
    if m < k - 1:
        raise ValueError(f"classes need m >= k-1 = {k - 1}")
    split = min(m, k + 3)
    prefixes = list(iter_orbit_representatives(params, split))
    jobs = [(k, m, p) for p in prefixes]
    out: list = []
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for part in pool.map(_trimmed_reps_for_prefix, jobs):
                out.extend(part)
                if len(out) > max_count:
                    raise GuardExceeded(f"more than {max_count} classes in F({m})")
    else:
        for job in jobs:
            out.extend(_trimmed_reps_for_prefix(job))
            if len(out) > max_count:
                raise GuardExceeded(f"more than {max_count} classes in F({m})")
    out.sort()
    return out


@dataclass
class DescendantGraph:
    """Explicit descendant graph on a full level set (toy sizes only)."""

    level: LevelSet
    succ: list
    pred: list


def build_descendant_graph(level: LevelSet) -> DescendantGraph:
    params, m = level.params, level.m
    if m <= params.k:
        raise ValueError("descendant graphs need m > k")
    by_prefix: dict = {}
    for idx, w in enumerate(level.words):
        by_prefix.setdefault(w[:-1], []).append(idx)
    succ: list = [[] for _ in level.words]
    pred: list = [[] for _ in level.words]
    for i, w in enumerate(level.words):
        for j in by_prefix.get(w[1:], ()):
            if extension_safe(w, level.words[j][-1], params):
                succ[i].append(j)
                pred[j].append(i)
    return DescendantGraph(level, succ, pred)


@dataclass
class ClassGraph:
    """Voltage graph on all classes of F(m) (closed words included)."""

    params: AlphabetParams
    m: int
    reps: list
    edges: list  # (c, d, tau)

    @property
    def size(self) -> int:
        return len(self.reps)

    def successors(self) -> list:
        succ: list = [[] for _ in self.reps]
        for c, d, _ in self.edges:
            succ[c].append(d)
        return succ


def build_class_graph(params: AlphabetParams, m: int, reps: list | None = None,
                      workers: int = 1) -> ClassGraph:
    if m <= params.k:
        raise ValueError(f"need m > k (got m={m}, k={params.k})")
    if reps is None:
        reps = enumerate_dejean_classes(params, m, workers=workers)
    index = {w: i for i, w in enumerate(reps)}
    edges = []
    for c, w in enumerate(reps):
        for a in range(params.k):
            if not extension_safe(w, a, params):
                continue
            t, sigma = trim_canonicalize(w[1:] + (a,), params)
            edges.append((c, index[t], invert(sigma)))
    return ClassGraph(params, m, reps, edges)


def prune_closed(succ: Sequence[Sequence[int]]) -> list:
    """Indices of vertices that are neither right closed nor left closed.

    Right-closed vertices are found by repeatedly deleting sinks and
    left-closed ones by repeatedly deleting sources, both on the original
    graph; the survivors are the complement of the union.
    """
    n = len(succ)
    pred: list = [[] for _ in range(n)]
    for u, vs in enumerate(succ):
        for v in vs:
            pred[v].append(u)

    def peel(out_adj, in_adj):
        deg = [len(out_adj[u]) for u in range(n)]
        gone = [False] * n
        queue = deque(u for u in range(n) if deg[u] == 0)
        while queue:
            u = queue.popleft()
            if gone[u]:
                continue
            gone[u] = True
            for v in in_adj[u]:
                deg[v] -= 1
                if deg[v] == 0:
                    queue.append(v)
        return gone

    right_closed = peel(succ, pred)
    left_closed = peel(pred, succ)
    survivors = [u for u in range(n) if not right_closed[u] and not left_closed[u]]
    return survivors


@dataclass
class QuotientIndex:
    params: AlphabetParams
    m: int
    reps: list
    edges: list  # (i, j, tau): descendant of reps[i] == apply_perm(tau, reps[j])
    index: dict = field(repr=False, default_factory=dict)

    def __post_init__(self):
        if not self.index:
            self.index = {w: i for i, w in enumerate(self.reps)}

    @property
    def s(self) -> int:
        return len(self.reps)

    @property
    def s_hat(self) -> int:
        return self.s * _orbit_size(self.params.k, self.params.k)

    @property
    def delta(self) -> np.ndarray:
        mat = np.zeros((self.s, self.s), dtype=np.int64)
        for i, j, _ in self.edges:
            mat[i, j] += 1
        return mat

    def out_edges(self) -> list:
        out: list = [[] for _ in range(self.s)]
        for i, j, tau in self.edges:
            out[i].append((j, tau))
        return out

    def in_edges(self) -> list:
        inn: list = [[] for _ in range(self.s)]
        for i, j, tau in self.edges:
            inn[j].append((i, tau))
        return inn

    def locate(self, w: Sequence[int]):
        """``(class, sigma)`` with ``w == apply_perm(sigma, reps[class])``, or None."""
        try:
            t, sigma = trim_canonicalize(w, self.params)
        except ValueError:
            return None
        c = self.index.get(t)
        if c is None:
            return None
        return c, invert(sigma)

    def contains(self, w: Sequence[int]) -> bool:
        return self.locate(w) is not None

    def window_states(self, w: Sequence[int]) -> list:
        """Lift states of every length-m window of ``w``."""
        m = self.m
        return [self.locate(w[i:i + m]) for i in range(len(w) - m + 1)]


def build_quotient(survivors: Sequence[int], graph: ClassGraph) -> QuotientIndex:
    if not survivors:
        raise LanguageDies(f"every word of F({graph.m}) is closed for k={graph.params.k}")
    params = graph.params
    renum = {old: new for new, old in enumerate(survivors)}
    reps = [graph.reps[i] for i in survivors]
    for w in reps:
        if not is_rarefied(w, params):
            raise ConsistencyFault(f"survivor {format_word(w)} is not rarefied")
    edges = [(renum[c], renum[d], tau) for c, d, tau in graph.edges if c in renum and d in renum]
    edges.sort()
    q = QuotientIndex(params, graph.m, reps, edges)
    delta = q.delta
    if delta.max(initial=0) > 1:
        raise ConsistencyFault("two descendants of one word fell in the same class")
    if (delta.sum(axis=1) == 0).any() or (delta.sum(axis=0) == 0).any():
        raise ConsistencyFault("a surviving class lost all quasi-descendants or quasi-ancestors")
    return q


def quotient_for(params: AlphabetParams, m: int, workers: int = 1) -> QuotientIndex:
    graph = build_class_graph(params, m, workers=workers)
    return build_quotient(prune_closed(graph.successors()), graph)


def write_graph_cache(q: QuotientIndex, path: Path | str) -> None:
    lines = [f"{CACHE_MAGIC} {q.params.k} {q.m} {q.s} {q.s_hat}"]
    lines.extend(format_word(w) for w in q.reps)
    lines.extend(f"{i} {j} {format_word(tau)}" for i, j, tau in q.edges)
    Path(path).write_text("\n".join(lines) + "\n")


def read_graph_cache(path: Path | str) -> QuotientIndex:
    text = Path(path).read_text().splitlines()
    head = text[0].split()
    if head[0] != CACHE_MAGIC or len(head) != 5:
        raise ValueError(f"{path}: not a {CACHE_MAGIC} graph cache")
    k, m, s, s_hat = map(int, head[1:])
    params = AlphabetParams(k)
    reps = [parse_word(line, k) for line in text[1:1 + s]]
    edges = []
    for line in text[1 + s:]:
        if not line.strip():
            continue
        i, j, tau = line.split()
        edges.append((int(i), int(j), parse_word(tau, k)))
    q = QuotientIndex(params, m, reps, edges)
    if q.s_hat != s_hat:
        raise ValueError(f"{path}: header s_hat {s_hat} disagrees with k!*s = {q.s_hat}")
    return q


def full_survivor_words(q: QuotientIndex) -> list:
    """Every word of F^(m) (toy sizes only: k! per class)."""
    out = []
    for rep in q.reps:
        for sigma in itertools.permutations(range(q.params.k)):
            out.append(apply_perm(sigma, rep))
    out.sort()
    return out
