"""Stage-by-stage orchestration with a content-keyed artifact cache."""

from __future__ import annotations

import hashlib
import json
import logging
import time
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from pathlib import Path

from .cascade import (
    BoundCertificate,
    Infeasible,
    Problem,
    base_sequence,
    dump_counts,
    parse_counts,
    solve_alpha,
    tail_q,
)
from .corrections import (
    X_BITS,
    ParameterError,
    _densify,
    assemble_omega,
    induction_start,
    p0,
    parse_omega_dump,
    period_fallbacks_needed,
    validate_periods,
)
from .counting import Guard, count_Fm_by_class
from .language_graph import (
    QuotientIndex,
    build_class_graph,
    build_quotient,
    prune_closed,
    read_graph_cache,
    write_graph_cache,
)
from .spectral import perron_certificate, spectral_radius
from .verify import VerificationReport, verify_certificate
from .words import AlphabetParams

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INFEASIBLE = 2
EXIT_CONFIG = 3
EXIT_GUARD = 4
EXIT_VERIFY = 5


class ConfigError(ValueError):
    pass


@dataclass
class PipelineConfig:
    k: int
    m: int
    p1: int
    p2: int
    n0: int
    mode: str = "default"  # default | truncated
    zeta_enabled: bool = True
    delta_mode: str = "rounded"
    threads: int = 1
    guard_count: int | None = None
    guard_seconds: float | None = None
    cache_dir: str | None = None
    out: str | None = None

    @property
    def params(self) -> AlphabetParams:
        return AlphabetParams(self.k)

    @property
    def effective_p1(self) -> int:
        """With the exact path off every period uses the weak estimator."""
        return self.p1 if self.zeta_enabled else p0(self.params, self.m) - 1

    def validate(self) -> None:
        if not 5 <= self.k <= 10:
            raise ConfigError(f"the certified pipeline needs 5 <= k <= 10 (got k={self.k})")
        if self.mode not in ("default", "truncated"):
            raise ConfigError(f"unknown mode {self.mode!r}")
        if self.delta_mode not in ("exact", "rounded"):
            raise ConfigError(f"unknown delta mode {self.delta_mode!r}")
        if self.threads < 1:
            raise ConfigError("threads must be positive")
        try:
            validate_periods(self.params, self.m, self.effective_p1, self.p2)
        except ParameterError as exc:
            raise ConfigError(str(exc)) from None
        if self.n0 < self.m:
            raise ConfigError(f"need n0 >= m (n0={self.n0}, m={self.m})")
        top = (self.k * self.p2) // (self.k - 1)
        start = induction_start(self.k, self.m, self.effective_p1, self.p2)
        if self.mode == "default":
            if top > self.n0:
                raise ConfigError(f"default mode needs floor(k*p2/(k-1)) = {top} <= n0 = {self.n0}")
            if start > self.n0:
                raise ConfigError(
                    f"default mode needs every main estimator valid at n0; that starts at "
                    f"n = {start} > n0 = {self.n0} (use --mode truncated or raise n0)")
        elif start <= self.n0:
            raise ConfigError(f"truncated mode needs n0 below the induction start {start}")

    def certificate_fields(self) -> dict:
        """Fields that determine certificate bytes (threads, paths and guards excluded)."""
        return {"k": self.k, "m": self.m, "p1": self.effective_p1, "p2": self.p2,
                "n0": self.n0, "mode": self.mode, "zeta": self.zeta_enabled,
                "delta_mode": self.delta_mode}

    def config_hash(self) -> str:
        return _key(self.certificate_fields())


def _key(fields: dict) -> str:
    return hashlib.sha256(json.dumps(fields, sort_keys=True).encode()).hexdigest()


class StageCache:
    """Artifacts stored as text under ``<dir>/<stage>-<hash>.txt``; no-op without a dir."""

    def __init__(self, directory: str | None):
        self.dir = Path(directory) if directory else None
        if self.dir:
            self.dir.mkdir(parents=True, exist_ok=True)

    def path(self, stage: str, fields: dict) -> Path | None:
        if self.dir is None:
            return None
        return self.dir / f"{stage}-{_key({'stage': stage, **fields})[:24]}.txt"

    def load(self, stage: str, fields: dict) -> str | None:
        p = self.path(stage, fields)
        if p is not None and p.exists():
            log.info("cache hit: %s", p.name)
            return p.read_text()
        return None

    def store(self, stage: str, fields: dict, text: str) -> None:
        p = self.path(stage, fields)
        if p is not None:
            tmp = p.with_suffix(".part")
            tmp.write_text(text)
            tmp.replace(p)


@dataclass
class SpectralData:
    r_hat: Fraction
    x_num: list
    upper: float

    def render(self) -> str:
        lines = [f"R {self.r_hat.numerator}/{self.r_hat.denominator}", f"UPPER {self.upper!r}"]
        lines += [f"X {i} {v}" for i, v in enumerate(self.x_num)]
        return "\n".join(lines) + "\n"

    @classmethod
    def parse(cls, text: str) -> "SpectralData":
        r, upper, xs = None, None, {}
        for line in text.splitlines():
            tag, *rest = line.split()
            if tag == "R":
                r = Fraction(rest[0])
            elif tag == "UPPER":
                upper = float(rest[0])
            else:
                xs[int(rest[0])] = int(rest[1])
        return cls(r, [xs[i] for i in range(len(xs))], upper)

    @property
    def mu(self) -> Fraction:
        return Fraction(max(self.x_num), min(self.x_num))


@dataclass
class PipelineResult:
    config: PipelineConfig
    exit_code: int
    certificate: BoundCertificate | None = None
    infeasible: Infeasible | None = None
    report: VerificationReport | None = None
    files: dict = field(default_factory=dict)
    timings: dict = field(default_factory=dict)
    s: int | None = None
    upper: float | None = None
    message: str = ""


def stage_graph(k: int, m: int, cache: StageCache, threads: int = 1) -> tuple[QuotientIndex, float]:
    """Quotient graph on non-closed classes and the upper bound from the unpruned graph."""
    fields = {"k": k, "m": m}
    text = cache.load("graph", fields)
    upper_text = cache.load("upper", fields)
    if text is not None and upper_text is not None:
        p = cache.path("graph", fields)
        return read_graph_cache(p), float(upper_text)
    params = AlphabetParams(k)
    graph = build_class_graph(params, m, workers=threads)
    q = build_quotient(prune_closed(graph.successors()), graph)
    upper = spectral_radius([(c, d) for c, d, _ in graph.edges], graph.size) + 1e-9
    if cache.dir is not None:
        write_graph_cache(q, cache.path("graph", fields))
        cache.store("upper", fields, repr(upper))
    return q, upper


def stage_spectral(q: QuotientIndex, upper: float, cache: StageCache) -> SpectralData:
    fields = {"k": q.params.k, "m": q.m, "x_bits": X_BITS}
    text = cache.load("spectral", fields)
    if text is not None:
        return SpectralData.parse(text)
    cert = perron_certificate(q, denominator_cap=1 << X_BITS)
    data = SpectralData(cert.r_hat, [int(x * (1 << X_BITS)) for x in cert.x_hat], upper)
    cache.store("spectral", fields, data.render())
    return data


def stage_corrections(cfg: PipelineConfig, q: QuotientIndex, spec: SpectralData,
                      cache: StageCache, guard: Guard) -> str:
    p1 = cfg.effective_p1
    fallbacks = (period_fallbacks_needed(cfg.k, cfg.m, p1, cfg.p2, cfg.n0)
                 if cfg.mode == "truncated" else [])
    fields = {"k": cfg.k, "m": cfg.m, "p1": p1, "p2": cfg.p2, "fallbacks": fallbacks,
              "delta_mode": cfg.delta_mode, "x": _key({"x": spec.x_num})}
    text = cache.load("omega", fields)
    if text is not None:
        return text
    table = assemble_omega(q, p1, cfg.p2, spec.x_num, period_js=fallbacks,
                           mode=cfg.delta_mode, workers=cfg.threads, guard=guard)
    text = table.dump()
    cache.store("omega", fields, text)
    return text


def stage_counts(cfg: PipelineConfig, q: QuotientIndex, cache: StageCache, guard: Guard) -> dict:
    fields = {"k": cfg.k, "m": cfg.m, "n0": cfg.n0}
    text = cache.load("counts", fields)
    if text is not None:
        return parse_counts(text)
    counts = {c.n: c.counts for c in count_Fm_by_class(q, cfg.n0, guard=guard, workers=cfg.threads)}
    cache.store("counts", fields, dump_counts(counts))
    return counts


def companion_paths(cert_path: str | Path) -> dict:
    base = Path(cert_path)
    return {"certificate": base,
            "graph": base.with_name(base.name + ".graph"),
            "omega": base.with_name(base.name + ".omega"),
            "counts": base.with_name(base.name + ".counts"),
            "transcript": base.with_name(base.name + ".transcript")}


def run_pipeline(cfg: PipelineConfig) -> PipelineResult:
    """Run every stage; exit code follows the CLI contract."""
    from .language_graph import GuardExceeded

    try:
        cfg.validate()
    except ConfigError as exc:
        return PipelineResult(cfg, EXIT_CONFIG, message=f"config error: {exc}")
    result = PipelineResult(cfg, EXIT_OK)
    cache = StageCache(cfg.cache_dir)
    guard = Guard(cfg.guard_count, cfg.guard_seconds)
    clock = time.monotonic()

    def lap(name):
        nonlocal clock
        now = time.monotonic()
        result.timings[name] = now - clock
        clock = now
        log.info("stage %s done in %.1f s", name, result.timings[name])

    stage = "graph"
    try:
        q, upper = stage_graph(cfg.k, cfg.m, cache, cfg.threads)
        result.s, result.upper = q.s, upper
        lap(stage)
        stage = "spectral"
        spec = stage_spectral(q, upper, cache)
        lap(stage)
        stage = "corrections"
        omega_text = stage_corrections(cfg, q, spec, cache, guard)
        lap(stage)
        stage = "count"
        counts = stage_counts(cfg, q, cache, guard)
        lap(stage)
    except GuardExceeded as exc:
        result.exit_code = EXIT_GUARD
        result.message = f"stage {stage}: guard exceeded: {exc}"
        return result

    stage = "cascade"
    omega = _densify(parse_omega_dump(omega_text), q.s)
    S = base_sequence(counts, spec.x_num)
    problem = Problem(cfg.k, cfg.m, cfg.effective_p1, cfg.p2, cfg.n0, cfg.mode, spec.r_hat,
                      spec.x_num, q.edges, omega, S).build()
    alpha = solve_alpha(problem)
    lap("solve")
    if isinstance(alpha, Infeasible):
        result.exit_code = EXIT_INFEASIBLE
        result.infeasible = alpha
        result.message = (f"{alpha}; try larger p1/p2 (tail exponent q={problem.q}) "
                          f"or a larger m")
        return result

    cert = BoundCertificate(
        cfg.k, cfg.m, cfg.effective_p1, cfg.p2, cfg.n0, cfg.mode, cfg.config_hash(),
        spec.r_hat, spec.x_num, problem.main, tail_q(cfg.k, cfg.p2), alpha, S,
        hashlib.sha256(omega_text.encode()).hexdigest(), problem.start)
    result.certificate = cert
    if cfg.out:
        files = companion_paths(cfg.out)
        cert.write(files["certificate"])
        write_graph_cache(q, files["graph"])
        files["omega"].write_text(omega_text)
        files["counts"].write_text(dump_counts(counts))
        report = verify_certificate(files["certificate"], files["graph"], files["omega"],
                                    files["counts"])
        files["transcript"].write_text(report.transcript())
        result.report = report
        result.files = {k: str(v) for k, v in files.items()}
        lap("verify")
        if not report.ok:
            result.exit_code = EXIT_VERIFY
            result.message = f"verification failed: {report.first_failure}"
    return result


def config_summary(cfg: PipelineConfig) -> str:
    return json.dumps(asdict(cfg), sort_keys=True)
