"""Experiment orchestration: seeded trials, aggregation, and reports.

Every trial owns an rng derived from (master seed, mode, k, trial index), so
reports are byte-identical across runs and worker counts.
"""

from __future__ import annotations

import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import belief, codes, type_engine, zero_error
from .channel import Dmc
from .codes import CodeConfig, MODE_BUFFER, MODE_INST_PHASE_BLOCK, MODE_INST_SED
from .errors import InsufficientErrorEvents, IoFailure
from .source import SourceSpec, arrival_time

SCHEMA_VERSION = 1
CSV_HEADER = "mode,k,eps,trials,mean_eta,rate,err_rate,rate_ci95,approx_rate,seed"

ENGINE_EXACT = "exact"
ENGINE_TYPE = "type"
ENGINE_BOTH = "both"


def trial_rng(master_seed: int, *key: int) -> np.random.Generator:
    """Stable per-trial generator from the master seed and an index tuple."""
    return np.random.default_rng(np.random.SeedSequence([master_seed, *key]))


@dataclass
class ExperimentConfig:
    dmc: Dmc
    source: SourceSpec
    modes: list[str]
    ks: list[int]
    eps: float
    trials: int
    master_seed: int
    engine: str = ENGINE_TYPE
    workers: int = 1
    horizon_cap: int | None = None

    def __post_init__(self):
        if self.trials < 1 or not self.ks or not 0 < self.eps < 1:
            raise ValueError("trials >= 1, nonempty ks, eps in (0,1) required")


@dataclass
class ReportRow:
    mode: str
    k: int
    eps: float
    trials: int
    mean_eta: float
    rate: float
    err_rate: float
    rate_ci95: float
    approx_rate: float
    seed: int
    err_ci95: tuple[float, float] = (0.0, 0.0)
    failures: int = 0


@dataclass
class ExperimentReport:
    rows: list[ReportRow] = field(default_factory=list)
    wall_time: float = 0.0


MODE_INDEX = {MODE_INST_SED: 0, MODE_INST_PHASE_BLOCK: 1, MODE_BUFFER: 2}


def _run_one(dmc, spec, mode, engine, k, eps, horizon_cap, master_seed, trial):
    rng = trial_rng(master_seed, MODE_INDEX[mode], k, trial)
    if mode == MODE_INST_SED:
        if engine == ENGINE_TYPE:
            return type_engine.run_type_instantaneous_sed(dmc, spec, k, eps, rng, horizon_cap)
        return codes.run_instantaneous_sed(dmc, spec, k, eps, rng, horizon_cap)
    if mode == MODE_BUFFER:
        return codes.run_buffer_then_transmit(dmc, spec, k, eps, rng, horizon_cap)
    if mode == MODE_INST_PHASE_BLOCK:
        cfg = CodeConfig(eps=eps, mode=mode, horizon_cap=horizon_cap)
        return codes.run_instantaneous_phase_then_block(dmc, spec, k, cfg, rng)
    raise ValueError(f"unknown mode {mode}")


def _run_chunk(args):
    dmc, spec, mode, engine, k, eps, horizon_cap, master_seed, lo, hi = args
    etas = np.empty(hi - lo)
    errs = np.empty(hi - lo, dtype=bool)
    caps = 0
    for i, trial in enumerate(range(lo, hi)):
        tr = _run_one(dmc, spec, mode, engine, k, eps, horizon_cap, master_seed, trial)
        etas[i] = tr.eta
        errs[i] = not tr.correct
        caps += tr.hit_cap
    return etas, errs, caps


def wilson_interval(successes: int, n: int, z: float = 1.959963984540054) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion."""
    if n == 0:
        return 0.0, 1.0
    p = successes / n
    denom = 1 + z * z / n
    center = (p + z * z / (2 * n)) / denom
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / denom
    return max(0.0, center - half), min(1.0, center + half)


def rate_ci95_halfwidth(k: int, etas: np.ndarray) -> float:
    """Delta-method 95% half-width of R = k / mean(eta)."""
    n = len(etas)
    if n < 2:
        return float("inf")
    m = etas.mean()
    se = etas.std(ddof=1) / math.sqrt(n)
    return 1.959963984540054 * k * se / (m * m)


def run_experiment(config: ExperimentConfig) -> ExperimentReport:
    start = time.perf_counter()
    report = ExperimentReport()
    for mode in config.modes:
        for k in config.ks:
            tasks = []
            chunk = max(1, config.trials // max(1, config.workers * 4))
            lo = 0
            while lo < config.trials:
                hi = min(config.trials, lo + chunk)
                tasks.append((config.dmc, config.source, mode, config.engine, k,
                              config.eps, config.horizon_cap, config.master_seed, lo, hi))
                lo = hi
            if config.workers > 1:
                with ProcessPoolExecutor(max_workers=config.workers) as pool:
                    parts = list(pool.map(_run_chunk, tasks))
            else:
                parts = [_run_chunk(t) for t in tasks]
            etas = np.concatenate([p[0] for p in parts])
            errs = np.concatenate([p[1] for p in parts])
            caps = sum(p[2] for p in parts)
            mean_eta = float(etas.mean())
            n_err = int(errs.sum())
            report.rows.append(ReportRow(
                mode=mode, k=k, eps=config.eps, trials=config.trials,
                mean_eta=mean_eta, rate=k / mean_eta,
                err_rate=n_err / config.trials,
                rate_ci95=rate_ci95_halfwidth(k, etas),
                approx_rate=codes.approx_rate(config.dmc, config.source, k, config.eps),
                seed=config.master_seed,
                err_ci95=wilson_interval(n_err, config.trials),
                failures=caps,
            ))
    report.wall_time = time.perf_counter() - start
    return report


# ---------------------------------------------------------------- anytime

@dataclass
class AnytimeRow:
    k: int
    t: int
    t_k: int
    err_count: int
    trials: int

    @property
    def err_rate(self) -> float:
        return self.err_count / self.trials


def run_anytime_experiment(dmc: Dmc, spec: SourceSpec, ks: list[int], horizon: int,
                           trials: int, master_seed: int,
                           workers: int = 1) -> list[AnytimeRow]:
    """Monte Carlo error-vs-time table for the anytime code (type engine)."""
    requests = [(k, t) for k in ks for t in range(arrival_time(spec, k), horizon + 1)]
    counts = {req: 0 for req in requests}
    tasks = []
    chunk = max(1, trials // max(1, workers * 4))
    lo = 0
    while lo < trials:
        hi = min(trials, lo + chunk)
        tasks.append((dmc, spec, horizon, requests, master_seed, lo, hi))
        lo = hi
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_anytime_chunk, tasks))
    else:
        parts = [_anytime_chunk(t) for t in tasks]
    for part in parts:
        for req, c in part.items():
            counts[req] += c
    return [AnytimeRow(k=k, t=t, t_k=arrival_time(spec, k),
                       err_count=counts[(k, t)], trials=trials)
            for (k, t) in requests]


def _anytime_chunk(args):
    dmc, spec, horizon, requests, master_seed, lo, hi = args
    counts = {req: 0 for req in requests}
    for trial in range(lo, hi):
        rng = trial_rng(master_seed, 3, trial)
        res = type_engine.run_type_anytime_sed(dmc, spec, horizon, requests, rng)
        for req, ok in res.items():
            counts[req] += not ok
    return counts


@dataclass
class AnytimeFit:
    alpha: float
    intercepts: dict[int, float]
    r_squared: float
    points_used: int


def fit_anytime_slope(rows: list[AnytimeRow], min_errors: int = 30) -> AnytimeFit:
    """Pooled least squares of ln(err) on (t - t_k) with one intercept per k.

    Only points with at least min_errors observed errors enter the fit."""
    usable = [r for r in rows if r.err_count >= min_errors]
    ks = sorted({r.k for r in usable})
    per_k = {k: sum(1 for r in usable if r.k == k) for k in ks}
    if not ks or any(c < 3 for c in per_k.values()):
        raise InsufficientErrorEvents(
            "need >= 3 time points with enough error events for every k")
    y = np.array([math.log(r.err_rate) for r in usable])
    x = np.array([r.t - r.t_k for r in usable], dtype=float)
    A = np.zeros((len(usable), len(ks) + 1))
    A[:, 0] = -x
    for i, r in enumerate(usable):
        A[i, 1 + ks.index(r.k)] = 1.0
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - A @ coef
    ss_res = float(resid @ resid)
    ss_tot = float(((y - y.mean()) ** 2).sum())
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return AnytimeFit(alpha=float(coef[0]),
                      intercepts={k: float(coef[1 + i]) for i, k in enumerate(ks)},
                      r_squared=r2, points_used=len(usable))


# ------------------------------------------------------------- zero error

def run_zero_error_experiment(dmc: Dmc, spec: SourceSpec, k: int, r1: float,
                              r2: float, delta: float, trials: int,
                              master_seed: int):
    """(config, transcripts, stats) for the degenerate-channel protocol."""
    cfg = zero_error.configure(dmc, k, r1, r2, delta)
    transcripts = []
    # the per-trial seed ignores n_k so sweeps over the confirmation length
    # are coupled (same source, same codebooks, shared confirmation draws)
    for trial in range(trials):
        rng = trial_rng(master_seed, 4, trial)
        transcripts.append(zero_error.run_zero_error(cfg, dmc, spec, rng))
    stats = zero_error.retransmission_distribution(transcripts, dmc, cfg)
    return cfg, transcripts, stats


# ------------------------------------------------------------ emission

def _fmt(x) -> str:
    if isinstance(x, float):
        return f"{x:.6g}"
    return str(x)


def report_csv_lines(report: ExperimentReport) -> list[str]:
    lines = [f"# schema_version={SCHEMA_VERSION}", CSV_HEADER]
    for r in report.rows:
        lines.append(",".join(_fmt(v) for v in (
            r.mode, r.k, r.eps, r.trials, r.mean_eta, r.rate,
            r.err_rate, r.rate_ci95, r.approx_rate, r.seed)))
    return lines


def emit_report(report: ExperimentReport, fmt: str, path: str) -> None:
    try:
        if fmt == "csv":
            text = "\n".join(report_csv_lines(report)) + "\n"
        elif fmt == "json":
            doc = {
                "schema_version": SCHEMA_VERSION,
                "rows": [
                    {
                        "mode": r.mode, "k": r.k, "eps": float(_fmt(r.eps)),
                        "trials": r.trials, "mean_eta": float(_fmt(r.mean_eta)),
                        "rate": float(_fmt(r.rate)), "err_rate": float(_fmt(r.err_rate)),
                        "rate_ci95": float(_fmt(r.rate_ci95)),
                        "approx_rate": float(_fmt(r.approx_rate)), "seed": r.seed,
                    }
                    for r in report.rows
                ],
            }
            text = json.dumps(doc, indent=2) + "\n"
        else:
            raise ValueError(f"unknown format {fmt}")
        with open(path, "w") as fh:
            fh.write(text)
    except OSError as exc:
        raise IoFailure(str(exc)) from exc


def load_report(path: str) -> ExperimentReport:
    with open(path) as fh:
        doc = json.load(fh)
    rows = [ReportRow(mode=r["mode"], k=r["k"], eps=r["eps"], trials=r["trials"],
                      mean_eta=r["mean_eta"], rate=r["rate"], err_rate=r["err_rate"],
                      rate_ci95=r["rate_ci95"], approx_rate=r["approx_rate"],
                      seed=r["seed"])
            for r in doc["rows"]]
    return ExperimentReport(rows=rows)


# -------------------------------------------------------- co-simulation

@dataclass
class CosimResult:
    max_posterior_gap: float
    max_group_prior_gap: float
    stop_disagreements: int
    transcript: object


def cosimulate_trial(dmc: Dmc, spec: SourceSpec, k: int, eps: float,
                     rng: np.random.Generator,
                     horizon_cap: int | None = None) -> CosimResult:
    """Run the type engine while replaying every step through the exact
    engine with the same partition and channel output; report the largest
    per-sequence posterior and group-prior divergences."""
    state = {"exact": belief.initial_state(spec.q),
             "max_post": 0.0, "max_pi": 0.0, "stop_mismatch": 0}

    def hook(t, part, types, y):
        ex = belief.evolve_prior(state["exact"], spec, t, max_len=k)
        assignment = type_engine.expand_assignment(types, part, spec.q)
        pi = belief.group_prior(ex, assignment, dmc.input_size)
        state["max_pi"] = max(state["max_pi"],
                              float(np.abs(pi - part.group_priors).max()))
        ex = belief.bayes_update(ex, assignment, dmc, y)
        dense = np.empty_like(ex.probs)
        for tp in types:
            dense[tp.lo:tp.hi + 1] = tp.per_seq_prob
        state["max_post"] = max(state["max_post"],
                                float(np.abs(dense - ex.probs).max()))
        if ex.seq_len >= k:
            exact_stop = belief.stop_check(ex, k, eps)
            type_stop = type_engine.type_stop_decode(types, k, eps) is not None
            state["stop_mismatch"] += exact_stop != type_stop
        state["exact"] = ex

    tr = type_engine.run_type_instantaneous_sed(dmc, spec, k, eps, rng,
                                                horizon_cap, step_hook=hook)
    return CosimResult(max_posterior_gap=state["max_post"],
                       max_group_prior_gap=state["max_pi"],
                       stop_disagreements=state["stop_mismatch"],
                       transcript=tr)
