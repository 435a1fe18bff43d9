"""Command-line entry point: ``dejean-growth <subcommand> ...``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .cascade import read_certificate
from .corrections import ParameterError, _densify, parse_omega_dump
from .counting import Guard, count_dejean_exact
from .language_graph import GuardExceeded, write_graph_cache
from .pipeline import (
    EXIT_CONFIG,
    EXIT_GUARD,
    EXIT_OK,
    EXIT_VERIFY,
    ConfigError,
    PipelineConfig,
    StageCache,
    companion_paths,
    run_pipeline,
    stage_corrections,
    stage_graph,
    stage_spectral,
)
from .verify import verify_certificate
from .words import AlphabetParams

# k, m, s, n0, p1, p2, lower, upper
REFERENCE_TABLE = [
    (5, 50, 5287, 150, 183, 600, "1.153811", "1.157895"),
    (6, 33, 1926, 100, 125, 500, "1.223437", "1.224695"),
    (7, 28, 318, 100, 126, 600, "1.236409", "1.236899"),
    (8, 18, 31, 100, 119, 600, "1.234725", "1.234843"),
    (9, 20, 42, 100, 123, 600, "1.246659", "1.246678"),
    (10, 22, 55, 100, 122, 600, "1.239287", "1.239308"),
]


def _add_params(p: argparse.ArgumentParser, need: tuple = ("k", "m")) -> None:
    p.add_argument("--k", type=int, required="k" in need)
    p.add_argument("--m", type=int, required="m" in need)
    p.add_argument("--p1", type=int, required="p1" in need)
    p.add_argument("--p2", type=int, required="p2" in need)
    p.add_argument("--n0", type=int, required="n0" in need)
    p.add_argument("--mode", choices=("default", "truncated"), default="default")
    p.add_argument("--zeta", dest="zeta", action="store_true", default=True)
    p.add_argument("--no-zeta", dest="zeta", action="store_false")
    p.add_argument("--delta-mode", choices=("exact", "rounded"), default="rounded")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--cache", default=None)
    p.add_argument("--out", default=None)
    p.add_argument("--guard-count", type=int, default=None)
    p.add_argument("--guard-seconds", type=float, default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dejean-growth",
                                     description="Certified growth-rate bounds for Dejean words.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    _add_params(sub.add_parser("graph", help="build, prune and quotient the language graph"))
    _add_params(sub.add_parser("spectral", help="Perron certificate and transfer-matrix upper bound"))
    _add_params(sub.add_parser("corrections", help="correction table (omega dump)"),
                ("k", "m", "p1", "p2", "n0"))
    _add_params(sub.add_parser("bound", help="full pipeline, emits a certificate"),
                ("k", "m", "p1", "p2", "n0"))
    v = sub.add_parser("verify", help="independently re-check a certificate")
    v.add_argument("certificate")
    v.add_argument("--graph")
    v.add_argument("--omega")
    v.add_argument("--counts")
    c = sub.add_parser("count", help="exact Dejean word counts S(1..n)")
    c.add_argument("--k", type=int, required=True)
    c.add_argument("--n", type=int, required=True)
    c.add_argument("--guard-count", type=int, default=None)
    c.add_argument("--guard-seconds", type=float, default=None)
    t = sub.add_parser("table", help="bounds table with the published reference values")
    t.add_argument("certificates", nargs="*")
    t.add_argument("--reference", action="store_true")
    return parser


def _config(args) -> PipelineConfig:
    return PipelineConfig(
        k=args.k, m=args.m, p1=args.p1, p2=args.p2, n0=args.n0, mode=args.mode,
        zeta_enabled=args.zeta, delta_mode=args.delta_mode, threads=args.threads,
        guard_count=args.guard_count, guard_seconds=args.guard_seconds,
        cache_dir=args.cache, out=args.out)


def _cmd_graph(args) -> int:
    if args.m <= args.k:
        print(f"config error: need m > k (m={args.m}, k={args.k})", file=sys.stderr)
        return EXIT_CONFIG
    q, upper = stage_graph(args.k, args.m, StageCache(args.cache), args.threads)
    print(f"k={args.k} m={args.m} s={q.s} s_hat={q.s_hat} edges={len(q.edges)}")
    if args.out:
        write_graph_cache(q, args.out)
    return EXIT_OK


def _cmd_spectral(args) -> int:
    if args.m <= args.k:
        print(f"config error: need m > k (m={args.m}, k={args.k})", file=sys.stderr)
        return EXIT_CONFIG
    cache = StageCache(args.cache)
    q, upper = stage_graph(args.k, args.m, cache, args.threads)
    data = stage_spectral(q, upper, cache)
    print(f"s={q.s} r_hat={float(data.r_hat):.9f} mu={float(data.mu):.6f} upper={upper:.9f}")
    if args.out:
        Path(args.out).write_text(data.render())
    return EXIT_OK


def _cmd_corrections(args) -> int:
    cfg = _config(args)
    try:
        cfg.validate()
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    cache = StageCache(cfg.cache_dir)
    q, upper = stage_graph(cfg.k, cfg.m, cache, cfg.threads)
    spec = stage_spectral(q, upper, cache)
    text = stage_corrections(cfg, q, spec, cache, Guard(cfg.guard_count, cfg.guard_seconds))
    table = _densify(parse_omega_dump(text), q.s)
    a, b, _ = table.omega(None)
    print(f"terms={len(table.terms)} shifts={a}..{b}")
    if cfg.out:
        Path(cfg.out).write_text(text)
    return EXIT_OK


def _cmd_bound(args) -> int:
    result = run_pipeline(_config(args))
    if result.certificate is not None:
        c = result.certificate
        print(f"k={c.k} m={c.m} s={result.s} alpha={float(c.alpha):.6f} "
              f"({c.alpha.numerator}/{c.alpha.denominator}) upper={result.upper:.6f}")
        if result.files:
            print(f"certificate written to {result.files['certificate']}")
        elif result.exit_code == EXIT_OK:
            print(c.render(), end="")
    if result.message:
        print(result.message, file=sys.stderr)
    return result.exit_code


def _cmd_verify(args) -> int:
    files = companion_paths(args.certificate)
    try:
        report = verify_certificate(
            args.certificate, args.graph or files["graph"], args.omega or files["omega"],
            args.counts or (files["counts"] if files["counts"].exists() else None))
    except (OSError, ValueError, KeyError) as exc:
        print(f"REJECTED: unreadable input: {exc}")
        return EXIT_VERIFY
    print(report.transcript(), end="")
    if not report.ok:
        print(f"REJECTED: {report.first_failure}")
        return EXIT_VERIFY
    print("ACCEPTED")
    return EXIT_OK


def _cmd_count(args) -> int:
    totals = count_dejean_exact(AlphabetParams(args.k), args.n,
                                Guard(args.guard_count, args.guard_seconds))
    for n, v in enumerate(totals, 1):
        print(n, v)
    return EXIT_OK


def emit_table(cert_paths=(), reference: bool = True) -> str:
    head = f"{'k':>3} {'m':>3} {'s':>6} {'n0':>4} {'p1':>4} {'p2':>4} {'lower':>10} {'upper':>10}  source"
    rows = [head]
    if reference:
        for k, m, s, n0, p1, p2, lo, up in REFERENCE_TABLE:
            rows.append(f"{k:>3} {m:>3} {s:>6} {n0:>4} {p1:>4} {p2:>4} {lo:>10} {up:>10}  published")
    for path in cert_paths:
        try:
            c = read_certificate(path)
        except (OSError, ValueError, KeyError):
            rows.append(f"{'':>3} {'':>3} {'':>6} {'':>4} {'':>4} {'':>4} {'absent':>10} {'':>10}  {path}")
            continue
        g = companion_paths(path)["graph"]
        s = g.read_text().split()[3] if g.exists() else "?"
        rows.append(f"{c.k:>3} {c.m:>3} {s:>6} {c.n0:>4} {c.p1:>4} {c.p2:>4} "
                    f"{float(c.alpha):>10.6f} {'':>10}  {path}")
    return "\n".join(rows) + "\n"


def _cmd_table(args) -> int:
    print(emit_table(args.certificates, reference=args.reference or not args.certificates), end="")
    return EXIT_OK


COMMANDS = {
    "graph": _cmd_graph, "spectral": _cmd_spectral, "corrections": _cmd_corrections,
    "bound": _cmd_bound, "verify": _cmd_verify, "count": _cmd_count, "table": _cmd_table,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, ParameterError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except GuardExceeded as exc:
        print(f"guard exceeded: {exc}", file=sys.stderr)
        return EXIT_GUARD


if __name__ == "__main__":
    sys.exit(main())
