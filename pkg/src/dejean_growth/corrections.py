"""Upper bounds on the words lost to a prohibited suffix of period j.

Three estimators, each giving a vector ``c`` and a shift ``d`` with

    sum_i x_i |H_j^(w_i)(n+1)|  <=  sum_l c_l |F_m^(w_l)(n - d)|

for every n at which the estimator is valid:

* ``zeta``   exact enumeration of the short window sets X_{j,t}
* ``weak``   path counts on the permutation lift (two cases split at chi(j) = m)
* ``period`` path counts on the lift for the whole prohibited suffix; used
  only below the induction threshold, where the other two may not apply.

All vectors are kept in fixed point: integers in units of ``2^-OMEGA_BITS``,
rounded upward, which is sound since each is an upper bound.
"""

from __future__ import annotations

import hashlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from .counting import Guard
from .language_graph import QuotientIndex
from .spectral import VoltageLift, scaled_upper
from .words import AlphabetParams, compose, extension_safe, identity, invert

# x_hat lives on the grid 2^-X_BITS, rho on 2^-RHO_BITS, omega on 2^-OMEGA_BITS
X_BITS = 48
RHO_BITS = 64
OMEGA_BITS = X_BITS + RHO_BITS


class ParameterError(ValueError):
    pass


@dataclass(frozen=True)
class PeriodGeometry:
    k: int
    m: int
    j: int
    chi: int
    h_len: int
    t: int
    d_exact: int
    d_weak: int
    d_period: int
    n_prime_offset: int
    n_dblprime_offset: int

    @classmethod
    def of(cls, k: int, m: int, j: int) -> "PeriodGeometry":
        kj = (k * j) // (k - 1)
        chi = j // (k - 1) + 1
        h_len = kj + 1
        d_weak = j - 1 if chi <= m else kj - m
        return cls(k, m, j, chi, h_len, j + chi + 1, kj + 1 - m, d_weak, kj - m,
                   j // (k - 1), kj)

    @property
    def small(self) -> bool:
        return self.chi <= self.m

    def exact_valid(self, n: int) -> bool:
        return self.t <= n + 1

    def weak_valid(self, n: int) -> bool:
        if self.small:
            return self.j + self.m - 1 <= n
        return self.h_len <= n + 1

    def occurs(self, n: int) -> bool:
        """Whether a word of length n+1 can end in a prohibited factor of period j."""
        return self.h_len <= n + 1


def p0(params: AlphabetParams, m: int) -> int:
    return (m + 1) - (m + 1) // params.k


# ---------------------------------------------------------------------------
# exact path: X sets and zeta counts

def enumerate_X_and_zeta(q: QuotientIndex, j: int, w_class: int,
                         guard: Guard | None = None, collect: bool = False):
    """``(zeta, words)``: prefix-class counts over X_{j,t}^(w), t = j + chi + 1.

    Leftward DFS from the suffix ``reps[w_class]`` along ancestor edges of
    the lift.  Positions are 1-based as in the definition; ``rev`` holds
    v[t], v[t-1], ... so the Dejean tests reuse the right-extension check.
    ``words`` is filled only with ``collect=True`` (tests).
    """
    guard = guard or Guard()
    params, m, s = q.params, q.m, q.s
    g = PeriodGeometry.of(params.k, m, j)
    t, chi = g.t, g.chi
    if t < m:
        raise ParameterError(f"window length t={t} is shorter than m={m}")
    in_edges = q.in_edges()
    zeta = [0] * s
    words = [] if collect else None
    rep = q.reps[w_class]
    pos0 = t - m + 1
    if pos0 < 3:
        raise ParameterError("X windows must be at least m + 2 long")
    letter = {}  # position -> letter
    for idx, a in enumerate(rep):
        letter[pos0 + idx] = a
    for p in range(max(2, pos0), chi + 2):
        if letter[p] != letter[p + j]:
            return zeta, words
    rev = list(reversed(rep))
    inv_cache = {}

    def inv(tau):
        got = inv_cache.get(tau)
        if got is None:
            got = inv_cache[tau] = invert(tau)
        return got

    def options(c, rho, pos):
        newpos = pos - 1
        out = []
        for c2, tau in in_edges[c]:
            rho2 = compose(rho, inv(tau))
            a = rho2[q.reps[c2][0]]
            if 2 <= newpos <= chi + 1 and a != letter[newpos + j]:
                continue
            if newpos >= 3:
                ok = extension_safe(rev, a, params)
            else:
                ok = extension_safe(rev[1:], a, params)
            if ok:
                out.append((c2, rho2, a))
        return out

    pos = pos0
    stack = [options(w_class, identity(params.k), pos)]
    while stack:
        opts = stack[-1]
        if not opts:
            stack.pop()
            if stack:
                rev.pop()
                pos += 1
            continue
        c2, rho2, a = opts.pop()
        guard.tick()
        if pos - 1 == 1:
            if a == rev[t - j - 1]:  # v[1] == v[j+1] would make v[1:t-1] prohibited
                raise AssertionError("X word with v[1] = v[j+1]")
            zeta[c2] += 1
            if collect:
                words.append(tuple([a] + rev[::-1]))
            continue
        rev.append(a)
        pos -= 1
        letter[pos] = a
        stack.append(options(c2, rho2, pos))
    return zeta, words


def _zeta_job(args):
    q, j, i, max_nodes, max_seconds = args
    return j, i, enumerate_X_and_zeta(q, j, i, Guard(max_nodes, max_seconds))[0]


def zeta_tables(q: QuotientIndex, js: Iterable[int], guard: Guard | None = None,
                workers: int = 1) -> dict:
    """``{j: [zeta row for w_1, ..., zeta row for w_s]}``."""
    guard = guard or Guard()
    js = list(js)
    jobs = [(q, j, i, guard.max_nodes, guard.max_seconds) for j in js for i in range(q.s)]
    out = {j: [None] * q.s for j in js}
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_zeta_job, jobs, chunksize=max(1, len(jobs) // (4 * workers))))
    else:
        results = [_zeta_job(job) for job in jobs]
    for j, i, row in results:
        out[j][i] = row
    return out


def eta_prime_table(q: QuotientIndex, zeta: dict, x_num: Sequence[int]) -> dict:
    """``{j: (d_exact, vector)}`` with vector_l = sum_i x_i zeta^(l)(w_i), fixed point."""
    k, m = q.params.k, q.m
    scale = 1 << RHO_BITS  # x_num already carries 2^X_BITS
    out = {}
    seen = {}
    for j, rows in sorted(zeta.items()):
        g = PeriodGeometry.of(k, m, j)
        if g.d_exact in seen:
            raise AssertionError(f"periods {seen[g.d_exact]} and {j} share shift {g.d_exact}")
        seen[g.d_exact] = j
        vec = [0] * q.s
        for i, row in enumerate(rows):
            for l, cnt in enumerate(row):
                if cnt:
                    vec[l] += cnt * x_num[i] * scale
        out[j] = (g.d_exact, vec)
    return out


# ---------------------------------------------------------------------------
# matrix-power paths

def _suffix_classes(q: QuotientIndex, chi: int) -> list:
    """``W[l]``: classes whose representative shares its last ``chi`` letters with w_l."""
    tails = [rep[len(rep) - chi:] for rep in q.reps]
    return [[i for i, ti in enumerate(tails) if ti == tl] for tl in tails]


def _prefix_masks(lift: VoltageLift, q: QuotientIndex, chi: int, target: int) -> np.ndarray:
    """``mask[l, sigma]``: sigma(w_l) starts with the last ``chi`` letters of w_target."""
    want = np.array(q.reps[target][q.m - chi:], dtype=np.int8)
    masks = np.zeros((q.s, lift.nperm), dtype=bool)
    for l, rep in enumerate(q.reps):
        head = np.array(rep[:chi], dtype=np.int64)
        masks[l] = np.all(lift.perms[:, head] == want, axis=1)
    return masks


@dataclass
class _BasePlan:
    small: dict = field(default_factory=dict)   # forward power -> [j]
    large_pairs: list = field(default_factory=list)  # (j, fwd power, bwd power)
    period: dict = field(default_factory=dict)  # bwd power -> [j]


def _plan(q: QuotientIndex, weak_js: Sequence[int], period_js: Sequence[int]) -> _BasePlan:
    k, m = q.params.k, q.m
    plan = _BasePlan()
    for j in weak_js:
        g = PeriodGeometry.of(k, m, j)
        if g.small:
            plan.small.setdefault(j, []).append(j)
        else:
            plan.large_pairs.append((j, j + m - g.chi, g.chi - m))
    for j in period_js:
        g = PeriodGeometry.of(k, m, j)
        if not g.small:
            raise ParameterError(f"period bound needs chi(j) <= m (j={j})")
        plan.period.setdefault(g.h_len - m, []).append(j)
    plan.large_pairs.sort()
    return plan


def _xi_for_base(args):
    """Contributions of one base class to every requested weak/period vector."""
    q, base, weak_js, period_js, x_num, mode, max_cells = args
    k, m, s = q.params.k, q.m, q.s
    lift = VoltageLift(q, max_cells=max_cells)
    exact = mode == "exact"
    plan = _plan(q, weak_js, period_js)
    one = Fraction(1 << RHO_BITS)
    out = {}  # (kind, j) -> vector of ints

    # small weak case: forward rows from w_base, cells (i, identity) for i in W_j(base)
    # large weak case: forward from w_base at j+m-chi paired with backward at chi-m
    fwd_needs = sorted(set(plan.small) | {f for _, f, _ in plan.large_pairs})
    state = lift.unit(base, exact)
    power = 0
    large_by_fwd: dict = {}
    for j, f, b in plan.large_pairs:
        large_by_fwd.setdefault(f, []).append((j, b))
    bstate = lift.unit(base, exact)
    bpower = 0
    w_cache = {}
    for f in fwd_needs:
        while power < f:
            state = lift.forward(state)
            power += 1
        for j in plan.small.get(f, ()):
            chi = PeriodGeometry.of(k, m, j).chi
            if chi not in w_cache:
                w_cache[chi] = _suffix_classes(q, chi)
            # xi_base(j) = sum_{i in W_j(base)} x_i * paths(w_base -> w_i)
            vec = [0] * s
            for i in w_cache[chi][base]:
                cell = state[i, 0]
                vec[base] += scaled_upper(cell, 1, one * x_num[i])
            out[("weak", j)] = vec
        for j, b in large_by_fwd.get(f, ()):
            while bpower < b:
                bstate = lift.backward(bstate)
                bpower += 1
            # theta: sum over copies sigma(w_l) of bwd[l, sigma] * fwd[l, sigma]
            if exact:
                sums = (bstate * state).sum(axis=1)
            else:
                sums = np.einsum("ij,ij->i", bstate, state)
            vec = [scaled_upper(sums[l], lift.nperm, one * x_num[base]) for l in range(s)]
            out[("weak", j)] = vec

    # period bound: backward rows from w_base at h_len - m, masked to the period copy
    bstate = lift.unit(base, exact)
    bpower = 0
    for b in sorted(plan.period):
        while bpower < b:
            bstate = lift.backward(bstate)
            bpower += 1
        for j in plan.period[b]:
            chi = PeriodGeometry.of(k, m, j).chi
            mask = _prefix_masks(lift, q, chi, base)
            vec = []
            for l in range(s):
                cells = bstate[l][mask[l]]
                tot = cells.sum() if exact else float(np.sum(cells))
                if exact:
                    tot = int(tot)
                vec.append(scaled_upper(tot, max(1, len(cells)), one * x_num[base]))
            out[("period", j)] = vec
    return out


def matrix_bounds(q: QuotientIndex, weak_js: Sequence[int], period_js: Sequence[int],
                  x_num: Sequence[int], mode: str = "rounded", workers: int = 1,
                  max_cells: int = 50_000_000) -> dict:
    """``{(kind, j): vector}`` for the weak bounds and the period bounds.

    Each base class streams one forward and two backward power sequences;
    its contributions are added with exact integer sums, so the result does
    not depend on ``workers``.
    """
    if mode not in ("exact", "rounded"):
        raise ValueError(f"unknown delta mode {mode!r}")
    k = q.params.k
    for j in weak_js:
        if PeriodGeometry.of(k, q.m, j).chi < k - 1:
            raise ParameterError(f"weak bound needs chi(j) >= k-1 (j={j})")
    jobs = [(q, b, tuple(weak_js), tuple(period_js), tuple(x_num), mode, max_cells)
            for b in range(q.s)]
    if workers > 1 and q.s > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_xi_for_base, jobs))
    else:
        parts = [_xi_for_base(job) for job in jobs]
    total: dict = {}
    for part in parts:
        for key, vec in part.items():
            acc = total.setdefault(key, [0] * q.s)
            for l, v in enumerate(vec):
                acc[l] += v
    return total


def xi_weak_small(q: QuotientIndex, j: int, x_num: Sequence[int], mode: str = "exact") -> list:
    return matrix_bounds(q, [j], [], x_num, mode)[("weak", j)]


def xi_weak_large(q: QuotientIndex, j: int, x_num: Sequence[int], mode: str = "exact") -> list:
    return matrix_bounds(q, [j], [], x_num, mode)[("weak", j)]


# ---------------------------------------------------------------------------
# assembly

@dataclass(frozen=True)
class OmegaTerm:
    j: int
    kind: str  # zeta | weak | period
    d: int
    vec: tuple


@dataclass
class OmegaTable:
    """Correction terms per period; ``omega`` merges the main ones by shift."""

    k: int
    m: int
    p0: int
    p1: int
    p2: int
    terms: list

    @property
    def main_terms(self) -> list:
        return [t for t in self.terms if t.kind != "period"]

    @property
    def a(self) -> int:
        return min(t.d for t in self.main_terms)

    @property
    def b(self) -> int:
        return max(t.d for t in self.main_terms)

    def omega(self, n: int | None = None) -> tuple[int, int, dict]:
        """``(a, b, {d: vector})`` of the terms in force at length n+1.

        ``n=None`` gives the table of the induction step.  For a finite n,
        only periods whose prohibited suffix fits are kept and those whose
        main estimator is not yet valid fall back to the period bound.
        """
        s = len(self.terms[0].vec) if self.terms else 0
        chosen = []
        if n is None:
            chosen = self.main_terms
        else:
            by_j: dict = {}
            for t in self.terms:
                by_j.setdefault(t.j, {})[t.kind] = t
            for j, kinds in sorted(by_j.items()):
                g = PeriodGeometry.of(self.k, self.m, j)
                if not g.occurs(n):
                    continue
                main = kinds.get("zeta") or kinds.get("weak")
                valid = main is not None and (
                    g.exact_valid(n) if main.kind == "zeta" else g.weak_valid(n))
                if valid:
                    chosen.append(main)
                elif "period" in kinds:
                    chosen.append(kinds["period"])
                else:
                    raise ParameterError(f"no valid estimator for period {j} at n={n}")
        table: dict = {}
        for t in chosen:
            acc = table.setdefault(t.d, [0] * s)
            for l, v in enumerate(t.vec):
                acc[l] += v
        if not table:
            return 0, -1, {}
        return min(table), max(table), table

    def dump(self) -> str:
        lines = [f"OMEGA {self.k} {self.m} {self.p0} {self.p1} {self.p2} {OMEGA_BITS}"]
        for t in sorted(self.terms, key=lambda t: (t.j, t.kind)):
            for l, v in enumerate(t.vec):
                if v:
                    lines.append(f"{t.j} {t.kind} {t.d} {l} {v}/{1 << OMEGA_BITS}")
        return "\n".join(lines) + "\n"

    def digest(self) -> str:
        return hashlib.sha256(self.dump().encode()).hexdigest()


def parse_omega_dump(text: str) -> OmegaTable:
    lines = text.strip().splitlines()
    head = lines[0].split()
    if head[0] != "OMEGA":
        raise ValueError("not an omega dump")
    k, m, p0_, p1, p2, bits = map(int, head[1:])
    vecs: dict = {}
    for line in lines[1:]:
        j, kind, d, l, val = line.split()
        num, den = val.split("/")
        if int(den) != 1 << bits:
            raise ValueError("unexpected omega denominator")
        vecs.setdefault((int(j), kind, int(d)), {})[int(l)] = int(num)
    return OmegaTable(k, m, p0_, p1, p2, [
        OmegaTerm(j, kind, d, vals) for (j, kind, d), vals in sorted(vecs.items())])


def _densify(table: OmegaTable, s: int) -> OmegaTable:
    terms = []
    for t in table.terms:
        if isinstance(t.vec, dict):
            terms.append(OmegaTerm(t.j, t.kind, t.d, tuple(t.vec.get(l, 0) for l in range(s))))
        else:
            terms.append(t)
    return OmegaTable(table.k, table.m, table.p0, table.p1, table.p2, terms)


def validate_periods(params: AlphabetParams, m: int, p1: int, p2: int) -> int:
    """Check the period parameters; returns p0."""
    k = params.k
    lo = p0(params, m)
    if m <= k:
        raise ParameterError(f"need m > k (m={m}, k={k})")
    if not lo - 1 <= p1 < p2:
        raise ParameterError(f"need p0-1 <= p1 < p2 (p0={lo}, p1={p1}, p2={p2})")
    if p2 < 2 * k - 3:
        raise ParameterError(f"need p2 >= 2k-3 = {2 * k - 3} (got {p2})")
    if PeriodGeometry.of(k, m, p1 + 1).chi < k - 1:
        raise ParameterError(
            f"weak bounds need chi(p1+1) >= k-1, i.e. p1 >= {(k - 1) * (k - 2) - 1} (got {p1})")
    return lo


def assemble_omega(q: QuotientIndex, p1: int, p2: int, x_num: Sequence[int],
                   zeta: dict | None = None, period_js: Iterable[int] = (),
                   mode: str = "rounded", workers: int = 1,
                   guard: Guard | None = None) -> OmegaTable:
    """Build every correction term for periods p0..p2 (plus requested period bounds)."""
    params, m = q.params, q.m
    lo = validate_periods(params, m, p1, p2)
    exact_js = list(range(lo, p1 + 1))
    if zeta is None:
        zeta = zeta_tables(q, exact_js, guard=guard, workers=workers)
    terms = []
    for j, (d, vec) in eta_prime_table(q, {j: zeta[j] for j in exact_js}, x_num).items():
        terms.append(OmegaTerm(j, "zeta", d, tuple(vec)))
    weak_js = list(range(p1 + 1, p2 + 1))
    period_js = sorted(set(period_js))
    bounds = matrix_bounds(q, weak_js, period_js, x_num, mode=mode, workers=workers)
    for j in weak_js:
        g = PeriodGeometry.of(params.k, m, j)
        terms.append(OmegaTerm(j, "weak", g.d_weak, tuple(bounds[("weak", j)])))
    for j in period_js:
        g = PeriodGeometry.of(params.k, m, j)
        terms.append(OmegaTerm(j, "period", g.d_period, tuple(bounds[("period", j)])))
    return OmegaTable(params.k, m, lo, p1, p2, terms)


def induction_start(k: int, m: int, p1: int, p2: int) -> int:
    """Smallest n from which the full inequality chain is valid."""
    n = (k * p2) // (k - 1) + 1
    lo = (m + 1) - (m + 1) // k
    while True:
        ok = True
        for j in range(lo, p2 + 1):
            g = PeriodGeometry.of(k, m, j)
            if not (g.exact_valid(n) if j <= p1 else g.weak_valid(n)):
                ok = False
                break
        if ok:
            return n
        n += 1


def period_fallbacks_needed(k: int, m: int, p1: int, p2: int, n0: int) -> list:
    """Periods that need the period bound for some n in [n0, induction start)."""
    lo = (m + 1) - (m + 1) // k
    top = induction_start(k, m, p1, p2)
    need = set()
    for n in range(n0, top):
        for j in range(lo, p2 + 1):
            g = PeriodGeometry.of(k, m, j)
            if not g.occurs(n):
                break
            ok = g.exact_valid(n) if j <= p1 else g.weak_valid(n)
            if not ok:
                need.add(j)
    return sorted(need)
