"""The rho cascade, the alpha inequality and the bound certificate.

Fixed-point conventions (shared with ``corrections``): x_hat_i = X_i / 2^48,
rho_d = R_d / 2^64 and omega entries are integers over 2^112, so that
rho_d * x_hat_i is exactly R_d * X_i in omega units.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Sequence

from .corrections import (
    RHO_BITS,
    X_BITS,
    OmegaTable,
    induction_start,
)

ALPHA_BITS = 24
CERT_MAGIC = "DEJC1"


class CascadeFault(RuntimeError):
    pass


@dataclass
class RhoPolynomial:
    a: int
    b: int
    coeffs: dict  # d -> R_d (integer, units 2^-RHO_BITS)

    def rho(self, d: int) -> Fraction:
        return Fraction(self.coeffs.get(d, 0), 1 << RHO_BITS)

    def value_float(self, z: float) -> float:
        return sum(r * z ** d for d, r in self.coeffs.items() if r) / 2.0 ** RHO_BITS

    def value_at_inverse(self, alpha: Fraction) -> Fraction:
        """P(1/alpha) exactly, by an integer Horner scheme."""
        if self.b < self.a:
            return Fraction(0)
        A, B = alpha.numerator, alpha.denominator
        acc = 0
        bpow = B ** self.a
        for d in range(self.a, self.b + 1):
            acc = acc * A + self.coeffs.get(d, 0) * bpow
            bpow *= B
        return Fraction(acc, (A ** self.b) << RHO_BITS)


def _successor_lists(edges, s: int) -> list:
    succ = [[] for _ in range(s)]
    for c, d, *_ in edges:
        succ[c].append(d)
    return succ


def rho_cascade(a: int, b: int, omega: dict, x_num: Sequence[int], edges) -> RhoPolynomial:
    """Run the majorization from d=a to d=b on fixed-point omega vectors.

    rho_d = min_l omega'_l(d) / x_l (rounded down onto the rho grid) for d < b,
    the residual is pushed one step with ``nu' = Delta nu`` and rho_b takes the
    max rule (rounded up).
    """
    s = len(x_num)
    succ = _successor_lists(edges, s)
    coeffs = {}
    if b < a:
        return RhoPolynomial(a, b, coeffs)
    carry = [0] * s
    zero = [0] * s
    for d in range(a, b + 1):
        cur = [u + v for u, v in zip(omega.get(d, zero), carry)]
        if d == b:
            coeffs[d] = max(-((-cur[l]) // x_num[l]) for l in range(s))
            break
        R = min(cur[l] // x_num[l] for l in range(s))
        nu = [cur[l] - R * x_num[l] for l in range(s)]
        if min(nu) < 0:
            raise CascadeFault(f"negative residual at d={d}")
        carry = [sum(nu[e] for e in succ[c]) for c in range(s)]
        coeffs[d] = R
    return RhoPolynomial(a, b, coeffs)


def tail_term(mu: Fraction, q: int, alpha: Fraction) -> Fraction:
    if alpha <= 1:
        raise ValueError("alpha must exceed 1")
    if q < 1:
        raise ValueError("q must be >= 1")
    alpha = Fraction(alpha)
    return Fraction(mu) / (alpha ** q * (alpha - 1))


def tail_q(k: int, p2: int) -> int:
    return (p2 + 1) // (k - 1) - 1


# ---------------------------------------------------------------------------
# base counts

def base_sequence(counts: dict, x_num: Sequence[int]) -> dict:
    """``{n: S_m(n)}`` as Fractions from ``{n: class counts}``."""
    return {n: Fraction(sum(c * x for c, x in zip(row, x_num)), 1 << X_BITS)
            for n, row in counts.items()}


def verify_base(S: dict, alpha: Fraction, n0: int, m: int) -> list:
    """Witnesses (n0, d) where S(n0) < alpha^d S(n0-d); empty when the base holds."""
    bad = []
    alpha = Fraction(alpha)
    power = Fraction(1)
    for d in range(1, n0 - m + 1):
        power *= alpha
        if S[n0] < power * S[n0 - d]:
            bad.append((n0, d))
    return bad


def base_alpha_limit(S: dict, n0: int, m: int) -> float:
    """Largest alpha the base inequalities allow (float locator)."""
    best = math.inf
    for d in range(1, n0 - m + 1):
        ratio = math.exp((math.log(S[n0]) - math.log(S[n0 - d])) / d) if S[n0 - d] else math.inf
        best = min(best, ratio)
    return best


# ---------------------------------------------------------------------------
# the inequality system

@dataclass
class Problem:
    """Everything needed to decide whether an alpha is certified."""

    k: int
    m: int
    p1: int
    p2: int
    n0: int
    mode: str  # default | truncated
    r_hat: Fraction
    x_num: list
    edges: list
    omega: OmegaTable
    S: dict
    main: RhoPolynomial = None
    steps: dict = field(default_factory=dict)  # n -> (RhoPolynomial, with_tail)

    @property
    def q(self) -> int:
        return tail_q(self.k, self.p2)

    @property
    def mu(self) -> Fraction:
        return Fraction(max(self.x_num), min(self.x_num))

    @property
    def start(self) -> int:
        return induction_start(self.k, self.m, self.p1, self.p2)

    def build(self) -> "Problem":
        a, b, table = self.omega.omega(None)
        self.main = rho_cascade(a, b, table, self.x_num, self.edges)
        if self.mode == "truncated":
            last_free = (self.k * (self.p2 + 1)) // (self.k - 1)
            for n in range(self.n0, self.start):
                a, b, table = self.omega.omega(n)
                self.steps[n] = (rho_cascade(a, b, table, self.x_num, self.edges), n >= last_free)
        return self

    def check_float(self, alpha: float) -> float:
        """Smallest slack over all inequalities at alpha (float locator)."""
        r = float(self.r_hat)
        mu = float(self.mu)
        z = 1.0 / alpha
        tail = mu * math.exp(-self.q * math.log(alpha)) / (alpha - 1.0)
        slack = r - self.main.value_float(z) - tail - alpha
        for poly, with_tail in self.steps.values():
            slack = min(slack, r - poly.value_float(z) - (tail if with_tail else 0.0) - alpha)
        return slack

    def check_exact(self, alpha: Fraction) -> list:
        """Failed items at alpha (empty list means certified)."""
        failures = []
        tail = tail_term(self.mu, self.q, alpha)
        if self.r_hat - self.main.value_at_inverse(alpha) - tail < alpha:
            failures.append("induction step")
        for n, (poly, with_tail) in sorted(self.steps.items()):
            lhs = self.r_hat - poly.value_at_inverse(alpha) - (tail if with_tail else 0)
            if lhs < alpha:
                failures.append(f"step n={n}")
        for n0, d in verify_base(self.S, alpha, self.n0, self.m):
            failures.append(f"base n={n0} d={d}")
        return failures


@dataclass
class Infeasible:
    reason: str
    r_hat: float
    poly: float
    tail: float
    at_alpha: float

    def __str__(self):
        return (f"infeasible: {self.reason} (at alpha={self.at_alpha:.6f}: r={self.r_hat:.6f}, "
                f"P(1/alpha)={self.poly:.6f}, tail={self.tail:.6f})")


def _round_down(alpha: float) -> Fraction:
    return Fraction(int(math.floor(alpha * (1 << ALPHA_BITS))), 1 << ALPHA_BITS)


def solve_alpha(problem: Problem, grid: int = 4000) -> Fraction | Infeasible:
    """Largest certified alpha on the 2^-24 grid, or a diagnostic.

    The left side is not monotone near 1 (the tail blows up), so a grid scan
    from above locates the top of the feasible region before bisection.
    """
    hi = float(problem.r_hat)
    if problem.S:
        hi = min(hi, base_alpha_limit(problem.S, problem.n0, problem.m))
    lo = 1.0
    if hi <= lo:
        return _diagnose(problem, "base counts do not grow", 1.0 + 1e-6)
    points = [lo + (hi - lo) * i / grid for i in range(grid, 0, -1)]
    best = None
    above = hi
    for p in points:
        if problem.check_float(p) >= 0 and p > 1:
            best = p
            break
        above = p
    if best is None:
        return _diagnose(problem, "no alpha in (1, r) satisfies the inequalities",
                         1.0 + (hi - 1.0) / 2)
    for _ in range(80):
        mid = 0.5 * (best + above)
        if problem.check_float(mid) >= 0:
            best = mid
        else:
            above = mid
    alpha = _round_down(best)
    step = Fraction(1, 1 << ALPHA_BITS)
    for _ in range(64):
        if alpha <= 1:
            break
        if not problem.check_exact(alpha):
            return alpha
        alpha -= step
        step *= 2
    return _diagnose(problem, "exact re-verification failed near the float optimum", best)


def _diagnose(problem: Problem, reason: str, alpha: float) -> Infeasible:
    alpha = max(alpha, 1.0 + 1e-9)
    return Infeasible(reason, float(problem.r_hat), problem.main.value_float(1 / alpha),
                      float(problem.mu) * math.exp(-problem.q * math.log(alpha)) / (alpha - 1), alpha)


# ---------------------------------------------------------------------------
# certificate file

@dataclass
class BoundCertificate:
    k: int
    m: int
    p1: int
    p2: int
    n0: int
    mode: str
    config_hash: str
    r_hat: Fraction
    x_num: list
    rho: RhoPolynomial
    q: int
    alpha: Fraction
    base: dict  # n -> S_m(n)
    omega_hash: str
    induction_start: int

    def render(self) -> str:
        lines = [
            f"{CERT_MAGIC}",
            f"PARAM {self.k} {self.m} {self.p1} {self.p2} {self.n0}",
            f"MODE {self.mode}",
            f"CONFIG {self.config_hash}",
            f"START {self.induction_start}",
            f"R {self.r_hat.numerator}/{self.r_hat.denominator}",
        ]
        lines += [f"X {i} {v}/{1 << X_BITS}" for i, v in enumerate(self.x_num)]
        lines += [f"RHO {d} {self.rho.coeffs.get(d, 0)}/{1 << RHO_BITS}"
                  for d in range(self.rho.a, self.rho.b + 1)]
        lines.append(f"Q {self.q}")
        lines.append(f"ALPHA {self.alpha.numerator}/{self.alpha.denominator}")
        for n in sorted(self.base):
            v = self.base[n]
            lines.append(f"BASE {n} {v.numerator}/{v.denominator}")
        lines.append(f"HASH omega {self.omega_hash}")
        return "\n".join(lines) + "\n"

    def write(self, path: Path | str) -> None:
        Path(path).write_text(self.render())


def read_certificate(path: Path | str) -> BoundCertificate:
    text = Path(path).read_text().splitlines()
    if not text or text[0] != CERT_MAGIC:
        raise ValueError(f"{path}: not a bound certificate")
    fields: dict = {"X": {}, "RHO": {}, "BASE": {}}
    for line in text[1:]:
        parts = line.split()
        tag = parts[0]
        if tag in ("X", "RHO", "BASE"):
            fields[tag][int(parts[1])] = Fraction(parts[2])
        elif tag == "HASH":
            fields["HASH"] = parts[2]
        else:
            fields[tag] = parts[1:]
    k, m, p1, p2, n0 = map(int, fields["PARAM"])
    xs = [fields["X"][i] for i in range(len(fields["X"]))]
    x_num = [int(v * (1 << X_BITS)) for v in xs]
    rho_coeffs = {d: int(v * (1 << RHO_BITS)) for d, v in fields["RHO"].items()}
    a, b = (min(rho_coeffs), max(rho_coeffs)) if rho_coeffs else (0, -1)
    return BoundCertificate(
        k, m, p1, p2, n0, fields["MODE"][0], fields["CONFIG"][0],
        Fraction(fields["R"][0]), x_num, RhoPolynomial(a, b, rho_coeffs),
        int(fields["Q"][0]), Fraction(fields["ALPHA"][0]), fields["BASE"],
        fields["HASH"], int(fields["START"][0]))


def dump_counts(counts: dict) -> str:
    lines = []
    for n in sorted(counts):
        for i, c in enumerate(counts[n]):
            lines.append(f"{n} {i} {c}")
    return "\n".join(lines) + "\n"


def parse_counts(text: str) -> dict:
    out: dict = {}
    for line in text.strip().splitlines():
        n, i, c = map(int, line.split())
        row = out.setdefault(n, [])
        while len(row) <= i:
            row.append(0)
        row[i] = c
    return out


def content_hash(text: str) -> str:
    return hashlib.sha256(text.encode()).hexdigest()
