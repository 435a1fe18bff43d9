"""Perron data of the quotient matrix and path counts on its permutation lift.

Orientation: the weights ``x`` are indexed by the class of a word's suffix,
so extending words by one letter maps weights through ``Delta @ x``.  The
certificate therefore asserts ``Delta @ x_hat >= r_hat * x_hat``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from .language_graph import ClassGraph, QuotientIndex, build_class_graph
from .words import AlphabetParams, Permutation, invert

DEFAULT_DENOMINATOR_CAP = 2 ** 48


class ConvergenceError(RuntimeError):
    def __init__(self, message, r=None, x=None):
        super().__init__(message)
        self.r = r
        self.x = x


class ReducibleMatrixError(ValueError):
    def __init__(self, labels):
        n = int(max(labels)) + 1
        sizes = np.bincount(labels, minlength=n).tolist()
        super().__init__(f"quotient matrix is reducible: {n} strong components of sizes {sizes}")
        self.labels = labels


class NoExponentialCertificate(ValueError):
    pass


class MemoryGuardError(MemoryError):
    pass


@dataclass
class PerronCertificate:
    r_hat: Fraction
    x_hat: list
    mu_hat: Fraction


def _check_irreducible(delta) -> None:
    n, labels = connected_components(sp.csr_matrix(delta), directed=True, connection="strong")
    if n > 1:
        raise ReducibleMatrixError(labels)


def approx_perron(delta, tol: float = 1e-12, max_iter: int = 200_000):
    """Perron root and positive weight vector with ``Delta x ~= r x``.

    Shifted power iteration on ``Delta + I`` (the shift removes periodicity);
    the Collatz-Wielandt bounds min/max of ``(Delta x)_i / x_i`` bracket r and
    iteration stops once they agree to ``tol``.  ``x`` is scaled to max 1.
    """
    mat = sp.csr_matrix(np.asarray(delta, dtype=float))
    n = mat.shape[0]
    if (mat.sum(axis=1) == 0).any() or (mat.sum(axis=0) == 0).any():
        raise ValueError("every row and column of the matrix must be nonzero")
    x = np.ones(n)
    lo = hi = float("nan")
    for _ in range(max_iter):
        y = mat @ x
        ratios = y / x
        lo, hi = ratios.min(), ratios.max()
        if hi - lo < tol:
            x = y / y.max()
            return 0.5 * (lo + hi), x
        x = y + x
        x /= x.max()
    raise ConvergenceError(f"no convergence after {max_iter} iterations (bracket [{lo}, {hi}])",
                           r=0.5 * (lo + hi), x=x)


def certify_subeigenvector(delta, x_float: Sequence[float], r_float: float | None = None,
                           denominator_cap: int = DEFAULT_DENOMINATOR_CAP) -> PerronCertificate:
    """Rationalize ``x`` and take the largest ``r_hat`` with ``Delta x_hat >= r_hat x_hat``.

    Every component is rounded down onto the common grid ``1/denominator_cap``
    so later fixed-point arithmetic has a single denominator.  The best
    ``r_hat`` is then the exact minimum of ``(Delta x_hat)_i / x_hat_i``.
    ``r_float`` only feeds the error message.
    """
    delta = np.asarray(delta)
    x = np.asarray(x_float, dtype=float)
    x = x / x.max()
    nums = [int(math.floor(float(v) * denominator_cap)) for v in x]
    if any(v <= 0 for v in nums):
        raise NoExponentialCertificate("weight vector has a non-positive component")
    x_hat = [Fraction(v, denominator_cap) for v in nums]
    s = len(x_hat)
    r_hat = min(Fraction(sum(int(delta[i, j]) * nums[j] for j in range(s) if delta[i, j]), nums[i])
                for i in range(s))
    if r_hat <= 1:
        raise NoExponentialCertificate(f"certified root {float(r_hat)} is not above 1"
                                       + (f" (float estimate {r_float})" if r_float else ""))
    return PerronCertificate(r_hat, x_hat, compute_mu(x_hat))


def compute_mu(x_hat: Sequence[Fraction]) -> Fraction:
    if min(x_hat) <= 0:
        raise ValueError("all weights must be positive")
    return Fraction(max(x_hat)) / Fraction(min(x_hat))


def perron_certificate(q: QuotientIndex, denominator_cap: int = DEFAULT_DENOMINATOR_CAP,
                       tol: float = 1e-13) -> PerronCertificate:
    delta = q.delta
    _check_irreducible(delta)
    r, x = approx_perron(delta, tol=tol)
    return certify_subeigenvector(delta, x, r, denominator_cap)


# ---------------------------------------------------------------------------
# permutation lift

def _perm_rank(perms: np.ndarray) -> np.ndarray:
    """Lexicographic rank of each row (Lehmer code)."""
    n_rows, k = perms.shape
    rank = np.zeros(n_rows, dtype=np.int64)
    for i in range(k):
        smaller_after = (perms[:, i + 1:] < perms[:, i:i + 1]).sum(axis=1)
        rank += smaller_after * math.factorial(k - 1 - i)
    return rank


_EXACT_LIMIT = 2.0 ** 53


def _add_up(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Elementwise ``a + b`` rounded upward (inputs are nonnegative integers).

    Sums below 2^53 are exact, so only larger ones are nudged up one ulp.
    """
    acc = a + b
    if acc.size and acc.max() >= _EXACT_LIMIT:
        acc = np.where(acc >= _EXACT_LIMIT, np.nextafter(acc, np.inf), acc)
    return acc


def upper_dot(a: np.ndarray, b: np.ndarray, axis: int = -1) -> list:
    """Exact rational upper bounds on ``sum(a * b)`` along ``axis``.

    Float inputs are nonnegative and exactly representable; twice the
    recursive-summation bound ``(n+1) u / (1 - (n+1) u)`` covers any
    evaluation order.  Object arrays are summed exactly.
    """
    if a.dtype == object:
        return [Fraction(int(v)) for v in np.atleast_1d((a * b).sum(axis=axis))]
    n = a.shape[axis]
    sums = np.atleast_1d(np.einsum("...i,...i->...", a, b) if axis == -1 else (a * b).sum(axis=axis))
    gamma = Fraction(2 * (n + 1), 2 ** 53 - 2 * (n + 1))
    return [Fraction(float(v)) * (1 + gamma) for v in sums]


DOT_MARGIN_BITS = 28


def scaled_upper(total, n_terms: int, scale: Fraction) -> int:
    """Smallest integer >= ``total * scale`` for an exact ``total``, or an upper
    bound on it when ``total`` is a float dot product of ``n_terms`` terms.

    The float case multiplies by ``1 + 2^-28``, which dominates the
    accumulated rounding error for up to ~10^7 terms.
    """
    scale = Fraction(scale)
    if isinstance(total, (int, np.integer)):
        num, den = int(total) * scale.numerator, scale.denominator
    else:
        if 2 * (n_terms + 1) > 2 ** (53 - DOT_MARGIN_BITS - 1):
            raise ValueError("too many terms for the fixed rounding margin")
        fn, fd = float(total).as_integer_ratio()
        num = fn * ((1 << DOT_MARGIN_BITS) + 1) * scale.numerator
        den = fd * (1 << DOT_MARGIN_BITS) * scale.denominator
    return -((-num) // den)


class VoltageLift:
    """Index arithmetic for states ``(class, sigma)`` standing for ``sigma(reps[class])``.

    A state vector is an array of shape ``(s, k!)``; the second axis is the
    lexicographic rank of sigma, so the identity sits at column 0.
    """

    def __init__(self, q: QuotientIndex, max_cells: int = 50_000_000):
        self.q = q
        k = q.params.k
        self.k = k
        self.s = q.s
        self.nperm = math.factorial(k)
        if self.s * self.nperm > max_cells:
            raise MemoryGuardError(f"lift has {self.s * self.nperm} cells, above the cap {max_cells}")
        self.perms = np.array(list(itertools.permutations(range(k))), dtype=np.int8)
        self._maps: dict = {}
        self.edges = [(i, j, tuple(tau)) for i, j, tau in q.edges]

    def rank(self, sigma: Permutation) -> int:
        return int(_perm_rank(np.array([sigma], dtype=np.int8))[0])

    def perm(self, idx: int) -> Permutation:
        return tuple(int(a) for a in self.perms[idx])

    def right_compose_map(self, tau: Permutation) -> np.ndarray:
        """``rank(sigma o tau)`` for every sigma, indexed by ``rank(sigma)``."""
        tau = tuple(tau)
        got = self._maps.get(tau)
        if got is None:
            got = _perm_rank(self.perms[:, list(tau)])
            self._maps[tau] = got
        return got

    def zeros(self, exact: bool) -> np.ndarray:
        if exact:
            out = np.empty((self.s, self.nperm), dtype=object)
            out.fill(0)
            return out
        return np.zeros((self.s, self.nperm), dtype=np.float64)

    def unit(self, c: int, exact: bool, sigma: Permutation | None = None) -> np.ndarray:
        v = self.zeros(exact)
        v[c, 0 if sigma is None else self.rank(sigma)] = 1
        return v

    def _in_maps(self, reverse: bool) -> list:
        """Per target class, the (source, gather index) pairs of one lift step."""
        key = ("in", reverse)
        got = self._maps.get(key)
        if got is None:
            got = [[] for _ in range(self.s)]
            for c, d, tau in self.edges:
                if reverse:
                    # (d, rho) -> (c, rho o tau^-1): new[c][rho] += state[d][rank(rho o tau^-1 o tau)]
                    got[c].append((d, self.right_compose_map(tau)))
                else:
                    got[d].append((c, self.right_compose_map(invert(tau))))
            self._maps[key] = got
        return got

    def _step(self, state: np.ndarray, reverse: bool) -> np.ndarray:
        exact = state.dtype == object
        new = self.zeros(exact)
        for target, sources in enumerate(self._in_maps(reverse)):
            acc = None
            for src, idx in sources:
                part = state[src][idx]
                if acc is None:
                    acc = part.copy() if exact else part
                elif exact:
                    acc = acc + part
                else:
                    acc = _add_up(acc, part)
            if acc is not None:
                new[target] = acc
        return new

    def forward(self, state: np.ndarray) -> np.ndarray:
        """One step along descendant edges: ``(c, sigma) -> (d, sigma o tau)``."""
        return self._step(state, reverse=False)

    def backward(self, state: np.ndarray) -> np.ndarray:
        """One step along ancestor edges: ``(d, rho) -> (c, rho o tau^-1)``."""
        return self._step(state, reverse=True)


@dataclass
class DeltaPowerRow:
    base: int
    direction: str
    t: int
    entries: np.ndarray  # shape (s, k!)
    lift: VoltageLift

    def entry(self, cls: int, sigma: Permutation) -> int | float:
        return self.entries[cls, self.lift.rank(sigma)]

    def items(self):
        for c, idx in zip(*np.nonzero(self.entries)):
            yield (int(c), self.lift.perm(int(idx))), self.entries[c, idx]


def delta_power_rows(lift: VoltageLift, base: int, direction: str, t_max: int,
                     mode: str = "rounded") -> Iterator[DeltaPowerRow]:
    """Rows of powers of the lifted matrix at the identity copy of ``reps[base]``.

    ``forward``: entry ``(d, sigma)`` at power t counts L_m words of length m+t
    with prefix ``reps[base]`` and suffix ``sigma(reps[d])``.  ``backward``:
    entry ``(c, sigma)`` counts those with prefix ``sigma(reps[c])`` and suffix
    ``reps[base]``.  ``rounded`` mode stores upward-rounded float upper bounds.
    """
    if t_max < 1:
        raise ValueError("t_max must be >= 1")
    if direction not in ("forward", "backward"):
        raise ValueError(f"unknown direction {direction!r}")
    exact = mode == "exact"
    step = lift.forward if direction == "forward" else lift.backward
    state = lift.unit(base, exact)
    for t in range(1, t_max + 1):
        state = step(state)
        yield DeltaPowerRow(base, direction, t, state, lift)


# ---------------------------------------------------------------------------
# transfer-matrix upper bound

def spectral_radius(adj_edges: Sequence[tuple[int, int]], n: int) -> float:
    """Largest eigenvalue of a 0/1 adjacency given by edge pairs."""
    if not adj_edges:
        return 0.0
    rows, cols = zip(*adj_edges)
    mat = sp.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n))
    ncomp, labels = connected_components(mat, directed=True, connection="strong")
    best = 0.0
    for c in range(ncomp):
        members = np.flatnonzero(labels == c)
        sub = mat[members][:, members]
        if sub.nnz == 0:
            continue
        if len(members) <= 400:
            vals = np.linalg.eigvals(sub.toarray())
            best = max(best, float(np.abs(vals).max()))
        else:
            r, _ = approx_perron(sub.toarray(), tol=1e-13)
            best = max(best, r)
    return best


def upper_bound_growth(params: AlphabetParams, m: int, graph: ClassGraph | None = None,
                       margin: float = 1e-9) -> float:
    """Perron value of the isomorphism quotient of the full F(m) descendant graph.

    Every Dejean word of length n >= m is a walk in that graph, so the value
    bounds the growth rate from above.
    """
    if graph is None:
        graph = build_class_graph(params, m)
    return spectral_radius([(c, d) for c, d, _ in graph.edges], graph.size) + margin
