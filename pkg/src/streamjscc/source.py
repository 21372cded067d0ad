"""Streaming sources: arrival schedules, symbol laws, and derived rates.

A source is a pair (alphabet size q, deterministic arrival schedule) plus a
conditional symbol law.  Arrival schedules are all-at-once, periodic with
period lam (t_n = lam*(n-1)+1), or an explicit nondecreasing list starting
at 1.  Laws are i.i.d. or first-order Markov.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .channel import Dmc, NON_DEGENERATE
from .errors import DegenerateChannel, NonStochastic, NonStationaryMarkov

ALL_AT_ONCE = "all_at_once"
PERIODIC = "periodic"
EXPLICIT = "explicit"


@dataclass(frozen=True)
class Schedule:
    kind: str
    lam: int | None = None
    times: tuple[int, ...] | None = None


@dataclass(frozen=True)
class IidLaw:
    probs: np.ndarray

    @property
    def q(self) -> int:
        return len(self.probs)

    def cond(self, n: int, last: int | None) -> np.ndarray:
        return self.probs

    def max_cond_prob(self) -> float:
        return float(self.probs.max())

    def entropy_rate(self) -> float:
        return _entropy(self.probs)


@dataclass(frozen=True)
class MarkovLaw:
    transition: np.ndarray
    initial: np.ndarray

    @property
    def q(self) -> int:
        return len(self.initial)

    def cond(self, n: int, last: int | None) -> np.ndarray:
        if n == 0 or last is None:
            return self.initial
        return self.transition[last]

    def max_cond_prob(self) -> float:
        return float(max(self.transition.max(), self.initial.max()))

    def entropy_rate(self) -> float:
        mu = stationary_dist(self.transition)
        rows = np.array([_entropy(r) for r in self.transition])
        return float(mu @ rows)


@dataclass(frozen=True)
class SourceSpec:
    q: int
    schedule: Schedule
    law: IidLaw | MarkovLaw
    entropy_rate_nats: float
    arrival_rate: float  # inf for all-at-once
    p_s_max: float
    h_lower: float  # equals the entropy rate for the supported laws


def _entropy(p: np.ndarray) -> float:
    p = p[p > 0]
    return float(-(p * np.log(p)).sum())


def stationary_dist(P: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    """Stationary distribution of a row-stochastic matrix via a direct
    linear solve of mu(P - I) = 0 with sum(mu) = 1."""
    q = P.shape[0]
    A = np.vstack([P.T - np.eye(q), np.ones(q)])
    b = np.zeros(q + 1)
    b[-1] = 1.0
    mu, *_ = np.linalg.lstsq(A, b, rcond=None)
    if np.any(mu < -1e-9) or np.linalg.norm(A @ mu - b) > 1e-8:
        raise NonStationaryMarkov("no stationary distribution within tolerance")
    mu = np.clip(mu, 0.0, None)
    return mu / mu.sum()


def make_source(q: int, schedule: Schedule, law: IidLaw | MarkovLaw) -> SourceSpec:
    if law.q != q:
        raise NonStochastic("law alphabet size disagrees with q")
    for vec in ([law.probs] if isinstance(law, IidLaw) else [law.initial, *law.transition]):
        if abs(float(np.sum(vec)) - 1.0) > 1e-9 or np.any(np.asarray(vec) < 0):
            raise NonStochastic("law probabilities must be distributions")
    if schedule.kind == EXPLICIT:
        ts = schedule.times
        if not ts or ts[0] != 1 or any(b < a for a, b in zip(ts, ts[1:])):
            raise NonStochastic("explicit schedule must be nondecreasing with t_1 = 1")
    H = law.entropy_rate()
    if schedule.kind == ALL_AT_ONCE:
        f = math.inf
    elif schedule.kind == PERIODIC:
        f = 1.0 / schedule.lam
    else:
        # average arrival rate over the listed horizon
        f = len(schedule.times) / schedule.times[-1]
    return SourceSpec(
        q=q,
        schedule=schedule,
        law=law,
        entropy_rate_nats=H,
        arrival_rate=f,
        p_s_max=law.max_cond_prob(),
        h_lower=H,
    )


def iid_uniform(q: int = 2, lam: int = 1) -> SourceSpec:
    return make_source(q, Schedule(PERIODIC, lam=lam), IidLaw(np.full(q, 1.0 / q)))


def all_at_once(q: int = 2, probs=None) -> SourceSpec:
    law = IidLaw(np.full(q, 1.0 / q) if probs is None else np.asarray(probs, float))
    return make_source(q, Schedule(ALL_AT_ONCE), law)


def arrival_time(spec: SourceSpec, n: int) -> int:
    """t_n: the time the n-th symbol arrives (n >= 1)."""
    sch = spec.schedule
    if sch.kind == ALL_AT_ONCE:
        return 1
    if sch.kind == PERIODIC:
        return sch.lam * (n - 1) + 1
    return sch.times[n - 1]


def n_of_t(spec: SourceSpec, t: int, horizon: int | None = None) -> int:
    """N(t) = max{n : t_n <= t}; all-at-once is capped at the horizon."""
    if t < 1:
        raise ValueError("time starts at 1")
    sch = spec.schedule
    if sch.kind == ALL_AT_ONCE:
        if horizon is None:
            raise ValueError("all-at-once schedule needs an explicit horizon")
        return horizon
    if sch.kind == PERIODIC:
        n = (t - 1) // sch.lam + 1
    else:
        n = int(np.searchsorted(np.asarray(sch.times), t, side="right"))
    return n if horizon is None else min(n, horizon)


def describe(spec: SourceSpec) -> tuple[float, float, float, float]:
    """(entropy rate H, arrival rate f, p_S,max, lower entropy rate)."""
    return (spec.entropy_rate_nats, spec.arrival_rate, spec.p_s_max, spec.h_lower)


def assumption_thresholds(spec: SourceSpec, dmc: Dmc):
    """Arrival-rate thresholds for the two sufficient conditions.

    Returns (thr_b, thr_b_prime, f_ok_b, f_ok_b_prime) where
    thr_b = (H(P*_Y) - ln(1/p_max)) / H_lower and
    thr_b' = (ln(1/p_min) - ln(1/p_max)) / ln(1/p_S,max).
    """
    if dmc.channel_class != NON_DEGENERATE:
        raise DegenerateChannel("thresholds require a fully positive transition matrix")
    h_out = _entropy(dmc.cap_output_dist)
    thr_b = (h_out - math.log(1.0 / dmc.p_max)) / spec.h_lower
    thr_bp = (math.log(1.0 / dmc.p_min) - math.log(1.0 / dmc.p_max)) / math.log(1.0 / spec.p_s_max)
    f = spec.arrival_rate
    return thr_b, thr_bp, f > thr_b, f > thr_bp


def sample_prefix(spec: SourceSpec, k: int, rng: np.random.Generator) -> np.ndarray:
    """Draw S^k from the source law."""
    if k < 1:
        raise ValueError("k must be >= 1")
    law = spec.law
    if isinstance(law, IidLaw):
        return rng.choice(spec.q, size=k, p=law.probs)
    out = np.empty(k, dtype=np.int64)
    out[0] = rng.choice(spec.q, p=law.initial)
    for n in range(1, k):
        out[n] = rng.choice(spec.q, p=law.transition[out[n - 1]])
    return out


def from_json_dict(doc: dict) -> SourceSpec:
    """Build a source from {"q": 2, "schedule": {...}, "law": {...}}."""
    q = int(doc["q"])
    sch_doc = doc["schedule"]
    if "periodic" in sch_doc:
        sch = Schedule(PERIODIC, lam=int(sch_doc["periodic"]))
    elif sch_doc.get("all_at_once"):
        sch = Schedule(ALL_AT_ONCE)
    else:
        sch = Schedule(EXPLICIT, times=tuple(int(t) for t in sch_doc["times"]))
    law_doc = doc["law"]
    if "iid" in law_doc:
        law = IidLaw(np.asarray(law_doc["iid"], float))
    else:
        m = law_doc["markov"]
        law = MarkovLaw(np.asarray(m["transition"], float), np.asarray(m["initial"], float))
    return make_source(q, sch, law)


def from_json(path: str) -> SourceSpec:
    with open(path) as fh:
        return from_json_dict(json.load(fh))
