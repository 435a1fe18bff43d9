"""Independent re-check of a bound certificate.

Nothing here imports the producer's arithmetic: geometry, the cascade, the
polynomial evaluation and the base inequalities are re-derived from the
certificate text, the omega dump and the graph cache.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path


class _Stop(Exception):
    pass


@dataclass
class VerificationReport:
    ok: bool = True
    items: list = field(default_factory=list)  # (name, passed)
    fail_fast: bool = False

    def record(self, name: str, passed: bool) -> bool:
        self.items.append((name, bool(passed)))
        if not passed:
            self.ok = False
            if self.fail_fast:
                raise _Stop
        return passed

    @property
    def first_failure(self) -> str | None:
        for name, passed in self.items:
            if not passed:
                return name
        return None

    def transcript(self) -> str:
        return "\n".join(f"{'PASS' if p else 'FAIL'} {name}" for name, p in self.items) + "\n"


def _parse_cert(text: str) -> dict:
    lines = text.splitlines()
    if not lines or lines[0] != "DEJC1":
        raise ValueError("not a bound certificate")
    out = {"X": {}, "RHO": {}, "BASE": {}}
    for line in lines[1:]:
        tag, *rest = line.split()
        if tag in ("X", "RHO", "BASE"):
            out[tag][int(rest[0])] = Fraction(rest[1])
        elif tag == "HASH":
            out["HASH"] = rest[1]
        else:
            out[tag] = rest
    return out


def _parse_graph(text: str):
    lines = text.splitlines()
    head = lines[0].split()
    if head[0] != "DEJG1":
        raise ValueError("not a graph cache")
    k, m, s = int(head[1]), int(head[2]), int(head[3])
    edges = []
    for line in lines[1 + s:]:
        if line.strip():
            i, j, _ = line.split()
            edges.append((int(i), int(j)))
    return k, m, s, edges


def _parse_omega(text: str):
    lines = text.strip().splitlines()
    head = lines[0].split()
    bits = int(head[6])
    terms: dict = {}
    for line in lines[1:]:
        j, kind, d, l, val = line.split()
        num, den = val.split("/")
        if int(den) != 2 ** bits:
            raise ValueError("bad omega denominator")
        terms.setdefault((int(j), kind), [int(d), {}])[1][int(l)] = int(num)
    return tuple(map(int, head[1:6])), bits, terms


def _geom(k, m, j):
    full = (k * j) // (k - 1)
    chi = j // (k - 1) + 1
    return {
        "chi": chi,
        "h": full + 1,
        "t": full + 2,
        "zeta": full + 1 - m,
        "weak": j - 1 if chi <= m else full - m,
        "period": full - m,
    }


def _usable(k, m, j, kind, n):
    g = _geom(k, m, j)
    if kind == "zeta":
        return g["t"] <= n + 1
    if kind == "weak":
        return (j + m - 1 <= n) if g["chi"] <= m else g["h"] <= n + 1
    return g["h"] <= n + 1


def _start(k, m, p0, p1, p2):
    n = (k * p2) // (k - 1) + 1
    while not all(_usable(k, m, j, "zeta" if j <= p1 else "weak", n) for j in range(p0, p2 + 1)):
        n += 1
    return n


def _select(k, m, p0, p1, p2, terms, s, n):
    """``{d: vector}`` for length n+1 (``n=None`` for the induction step)."""
    table: dict = {}
    for j in range(p0, p2 + 1):
        main = "zeta" if j <= p1 else "weak"
        if n is None:
            pick = main
        else:
            if _geom(k, m, j)["h"] > n + 1:
                continue
            pick = main if _usable(k, m, j, main, n) else "period"
        if (j, pick) not in terms:
            continue  # all-zero terms are omitted from the dump
        d, vals = terms[(j, pick)]
        if d != _geom(k, m, j)[pick]:
            raise ValueError(f"shift of ({j}, {pick}) disagrees with its geometry")
        row = table.setdefault(d, [0] * s)
        for l, v in vals.items():
            row[l] += v
    return table


def _cascade(table, X, succ, rho_bits):
    if not table:
        return {}
    a, b = min(table), max(table)
    s = len(X)
    carry = [0] * s
    rho = {}
    for d in range(a, b + 1):
        row = table.get(d, [0] * s)
        cur = [row[l] + carry[l] for l in range(s)]
        if d == b:
            # smallest grid value with rho * X_l >= cur_l for every l
            rho[d] = max((cur[l] + X[l] - 1) // X[l] for l in range(s))
            break
        r = min(cur[l] // X[l] for l in range(s))
        nu = [cur[l] - r * X[l] for l in range(s)]
        if any(v < 0 for v in nu):
            raise ValueError("negative residual")
        carry = [0] * s
        for c in range(s):
            carry[c] = sum(nu[e] for e in succ[c])
        rho[d] = r
    return rho


def _poly_inverse(rho: dict, rho_bits: int, alpha: Fraction) -> Fraction:
    if not rho:
        return Fraction(0)
    A, B = alpha.numerator, alpha.denominator
    top = max(rho)
    total = 0
    for d, r in rho.items():
        total += r * B ** d * A ** (top - d)
    return Fraction(total, A ** top * 2 ** rho_bits)


def verify_certificate(cert_path, graph_path, omega_path, counts_path=None,
                       fail_fast: bool = False) -> VerificationReport:
    """Re-check every inequality; ``fail_fast`` stops at the first failed item."""
    rep = VerificationReport(fail_fast=fail_fast)
    try:
        _check(rep, cert_path, graph_path, omega_path, counts_path)
    except _Stop:
        pass
    except (KeyError, ValueError, IndexError) as exc:
        rep.fail_fast = False
        rep.record(f"well-formed inputs ({exc})", False)
    return rep


def _check(rep, cert_path, graph_path, omega_path, counts_path) -> None:
    cert_text = Path(cert_path).read_text()
    c = _parse_cert(cert_text)
    k, m, p1, p2, n0 = map(int, c["PARAM"])
    mode = c["MODE"][0]
    gk, gm, s, edges = _parse_graph(Path(graph_path).read_text())
    rep.record("graph matches parameters", (gk, gm) == (k, m))
    omega_text = Path(omega_path).read_text()
    rep.record("omega hash", hashlib.sha256(omega_text.encode()).hexdigest() == c["HASH"])
    (ok_, om_, p0, op1, op2), omega_bits, terms = _parse_omega(omega_text)
    rep.record("omega parameters", (ok_, om_, op1, op2) == (k, m, p1, p2)
               and p0 == (m + 1) - (m + 1) // k)

    xs = [c["X"][i] for i in range(len(c["X"]))]
    x_den = {v.denominator for v in xs}
    grid = max(x_den) if xs else 1
    X = [int(v * grid) for v in xs]
    rep.record("weights positive on one dyadic grid",
               len(X) == s and all(v > 0 for v in X) and grid & (grid - 1) == 0)
    rho_bits = omega_bits - (grid.bit_length() - 1)
    succ = [[] for _ in range(s)]
    for i, j in edges:
        succ[i].append(j)
    r = Fraction(c["R"][0])
    rep.record("sub-eigenvector inequality",
               all(Fraction(sum(X[e] for e in succ[i])) >= r * X[i] for i in range(s)))
    rep.record("r above 1", r > 1)

    main = _cascade(_select(k, m, p0, p1, p2, terms, s, None), X, succ, rho_bits)
    claimed = {d: int(v * 2 ** rho_bits) for d, v in c["RHO"].items()}
    pad = {d: claimed.get(d, 0) for d in set(main) | set(claimed)}
    rep.record("cascade recurrence", pad == {d: main.get(d, 0) for d in pad}
               and all(v * 2 ** rho_bits == int(v * 2 ** rho_bits) for v in c["RHO"].values()))

    q = (p2 + 1) // (k - 1) - 1
    rep.record("tail exponent", int(c["Q"][0]) == q)
    alpha = Fraction(c["ALPHA"][0])
    rep.record("alpha above 1", alpha > 1)
    mu = Fraction(max(X), min(X))
    tail = mu / (alpha ** q * (alpha - 1)) if alpha > 1 else None
    if tail is not None:
        rep.record("induction inequality",
                   r - _poly_inverse(main, rho_bits, alpha) - tail >= alpha)

    start = _start(k, m, p0, p1, p2)
    rep.record("induction start", int(c["START"][0]) == start)
    base = c["BASE"]
    if mode == "default":
        rep.record("default mode threshold", n0 >= start)
    elif mode == "truncated":
        rep.record("truncated mode threshold", n0 < start)
        first_tail = (k * (p2 + 1)) // (k - 1)
        step_ok = tail is not None
        for n in range(n0, start):
            if not step_ok:
                break
            poly = _cascade(_select(k, m, p0, p1, p2, terms, s, n), X, succ, rho_bits)
            lhs = r - _poly_inverse(poly, rho_bits, alpha) - (tail if n >= first_tail else 0)
            step_ok = lhs >= alpha
        rep.record("bounded-length steps", step_ok)
    else:
        rep.record(f"known mode {mode}", False)

    if counts_path is not None:
        counts: dict = {}
        for line in Path(counts_path).read_text().split("\n"):
            if line.strip():
                n, i, cnt = map(int, line.split())
                counts[(n, i)] = cnt
        ok = True
        for n, value in base.items():
            ok &= value == Fraction(sum(counts.get((n, i), 0) * X[i] for i in range(s)), grid)
        rep.record("base values match counts", ok)
    needed = all(n in base for n in range(m, n0 + 1))
    rep.record("base values present", needed)
    if needed and alpha > 1:
        ok = True
        for d in range(1, n0 - m + 1):
            if base[n0] < alpha ** d * base[n0 - d]:
                ok = False
                break
        rep.record("base inequalities", ok)
