"""Encoder/decoder state machines over the exact belief engine.

Modes:
  * instantaneous SED code (k-restricted, single phase),
  * instantaneous encoding phase followed by a block SED code,
  * buffer-then-transmit baseline,
  * anytime SED operation (never stops, serves MAP prefix requests).

Also: EJS divergence, an exhaustive tiny-scale MaxEJS step, and the
reliability-curve calculators.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import product

import numpy as np

from . import belief
from .belief import BeliefState
from .channel import Dmc, NON_DEGENERATE
from .errors import DegenerateChannel, NotBinary, RequestBeforeArrival, SearchSpaceTooLarge
from .partition import (
    Partition,
    greedy_partition,
    marginal_input_dist,
    randomization_plan,
    sed_partition_binary,
)
from .source import IidLaw, SourceSpec, arrival_time, n_of_t, sample_prefix

MODE_INST_PHASE_BLOCK = "inst-phase"
MODE_INST_SED = "inst-sed"
MODE_BUFFER = "buffer"
MODE_ANYTIME = "anytime"


@dataclass
class CodeConfig:
    eps: float
    mode: str = MODE_INST_SED
    randomize: bool = True
    horizon_cap: int | None = None

    def __post_init__(self):
        if not 0.0 < self.eps < 1.0:
            raise ValueError("eps must be in (0, 1)")


@dataclass
class Transcript:
    inputs: list[int] = field(default_factory=list)
    outputs: list[int] = field(default_factory=list)
    groups: list[int] = field(default_factory=list)
    eta: int | None = None
    estimate: int | None = None
    correct: bool = False
    t_k: int = 0
    hit_cap: bool = False


def default_horizon(dmc: Dmc, k: int) -> int:
    return int(math.ceil(64 * k / dmc.capacity_nats))


def _require_binary_symmetric(dmc: Dmc):
    if dmc.input_size != 2:
        raise NotBinary("this code needs a binary-input channel")
    if dmc.channel_class != NON_DEGENERATE:
        raise DegenerateChannel("this code needs a fully positive transition matrix")


def _max_continuation_by_last(spec: SourceSpec, length: int) -> np.ndarray:
    """For each possible last arrived symbol, the largest probability of any
    length-`length` continuation."""
    law = spec.law
    if isinstance(law, IidLaw):
        return np.full(spec.q, float(law.probs.max()) ** length)
    v = np.ones(spec.q)
    for _ in range(length):
        v = (law.transition * v[None, :]).max(axis=1)
    return v


def _full_stop_check(state: BeliefState, spec: SourceSpec, k: int, eps: float) -> bool:
    """Stopping rule on the full length-k sequence posterior; before all
    symbols arrive the unarrived tail contributes its best continuation."""
    n = state.seq_len
    if n >= k:
        return belief.stop_check(state, k, eps)
    if n == 0:
        return False
    cont = _max_continuation_by_last(spec, k - n)
    last = np.arange(state.probs.size) % spec.q
    return float((state.probs * cont[last]).max()) >= 1.0 - eps


def run_instantaneous_sed(dmc: Dmc, spec: SourceSpec, k: int, eps: float,
                          rng: np.random.Generator,
                          horizon_cap: int | None = None) -> Transcript:
    """Single-phase k-restricted code with the binary smallest-difference
    rule at every step and deterministic group transmission."""
    _require_binary_symmetric(dmc)
    cap = horizon_cap or default_horizon(dmc, k)
    true_seq = sample_prefix(spec, k, rng)
    tr = Transcript(t_k=arrival_time(spec, k))
    state = belief.initial_state(spec.q)
    true_idx = 0
    for t in range(1, cap + 1):
        prev_len = state.seq_len
        state = belief.evolve_prior(state, spec, t, max_len=k)
        for n in range(prev_len, state.seq_len):
            true_idx = true_idx * spec.q + int(true_seq[n])
        part = sed_partition_binary(state.probs)
        z = int(part.assignment[true_idx])
        y = dmc.sample_output(z, rng)
        tr.groups.append(z)
        tr.inputs.append(z)
        tr.outputs.append(y)
        state = belief.bayes_update(state, part.assignment, dmc, y)
        if _full_stop_check(state, spec, k, eps):
            if state.seq_len >= k:
                est, _ = belief.map_prefix_estimate(state, k)
            else:
                # certain prefix, most likely continuation (tie: all-zero)
                pref = int(np.argmax(state.probs))
                est = _extend_map(pref, state.seq_len, k, spec)
            tr.eta = t
            tr.estimate = est
            tr.correct = est == _seq_index(true_seq, spec.q)
            return tr
    tr.eta = cap
    tr.hit_cap = True
    tr.correct = False
    return tr


def _seq_index(seq, q: int) -> int:
    idx = 0
    for s in seq:
        idx = idx * q + int(s)
    return idx


def _extend_map(prefix_idx: int, n: int, k: int, spec: SourceSpec) -> int:
    """Most likely length-k completion of a length-n prefix (ties toward the
    smaller symbol index)."""
    law = spec.law
    idx = prefix_idx
    last = prefix_idx % spec.q if n > 0 else None
    for m in range(n, k):
        s = int(np.argmax(law.cond(m, last)))
        idx = idx * spec.q + s
        last = s
    return idx


def run_buffer_then_transmit(dmc: Dmc, spec: SourceSpec, k: int, eps: float,
                             rng: np.random.Generator,
                             horizon_cap: int | None = None) -> Transcript:
    """Idle until the k-th symbol arrives, then run the block SED code on the
    unconditioned length-k prior.  The channel carries the most likely
    capacity-achieving input while idling; the decoder ignores it."""
    _require_binary_symmetric(dmc)
    cap = horizon_cap or default_horizon(dmc, k)
    true_seq = sample_prefix(spec, k, rng)
    true_idx = _seq_index(true_seq, spec.q)
    t_k = arrival_time(spec, k)
    tr = Transcript(t_k=t_k)
    idle_x = int(np.argmax(dmc.cap_input_dist))
    for t in range(1, t_k):
        y = dmc.sample_output(idle_x, rng)
        tr.inputs.append(idle_x)
        tr.outputs.append(y)
        tr.groups.append(-1)
    state = belief.extend(belief.initial_state(spec.q), spec, k)
    for t in range(t_k, cap + 1):
        part = sed_partition_binary(state.probs)
        z = int(part.assignment[true_idx])
        y = dmc.sample_output(z, rng)
        tr.groups.append(z)
        tr.inputs.append(z)
        tr.outputs.append(y)
        state = belief.bayes_update(state, part.assignment, dmc, y)
        if belief.stop_check(state, k, eps):
            est, _ = belief.map_prefix_estimate(state, k)
            tr.eta = t
            tr.estimate = est
            tr.correct = est == true_idx
            return tr
    tr.eta = cap
    tr.hit_cap = True
    return tr


def run_instantaneous_phase_then_block(dmc: Dmc, spec: SourceSpec, k: int,
                                       config: CodeConfig, rng: np.random.Generator,
                                       marginal_residuals: list | None = None) -> Transcript:
    """Greedy partition + randomized transmission while symbols arrive, then
    the block SED code on the accumulated posterior."""
    if dmc.channel_class != NON_DEGENERATE:
        raise DegenerateChannel("needs a fully positive transition matrix")
    cap = config.horizon_cap or default_horizon(dmc, k)
    true_seq = sample_prefix(spec, k, rng)
    t_k = arrival_time(spec, k)
    tr = Transcript(t_k=t_k)
    state = belief.initial_state(spec.q)
    true_idx = 0
    pstar = dmc.cap_input_dist
    for t in range(1, cap + 1):
        prev_len = state.seq_len
        state = belief.evolve_prior(state, spec, t, max_len=k)
        for n in range(prev_len, state.seq_len):
            true_idx = true_idx * spec.q + int(true_seq[n])
        if t <= t_k:
            part = greedy_partition(state.probs, pstar)
            z = int(part.assignment[true_idx])
            if config.randomize:
                plan = randomization_plan(part, pstar)
                if marginal_residuals is not None:
                    resid = np.abs(marginal_input_dist(part, plan) - pstar).max()
                    marginal_residuals.append(float(resid))
                x = int(rng.choice(dmc.input_size, p=plan.kernel[z]))
                kernel = plan.kernel
            else:
                x = z
                kernel = None
        else:
            _require_binary_symmetric(dmc)
            part = sed_partition_binary(state.probs)
            z = int(part.assignment[true_idx])
            x = z
            kernel = None
        y = dmc.sample_output(x, rng)
        tr.groups.append(z)
        tr.inputs.append(x)
        tr.outputs.append(y)
        state = belief.bayes_update(state, part.assignment, dmc, y, kernel=kernel)
        if _full_stop_check(state, spec, k, config.eps):
            if state.seq_len >= k:
                est, _ = belief.map_prefix_estimate(state, k)
            else:
                est = _extend_map(int(np.argmax(state.probs)), state.seq_len, k, spec)
            tr.eta = t
            tr.estimate = est
            tr.correct = est == _seq_index(true_seq, spec.q)
            return tr
    tr.eta = cap
    tr.hit_cap = True
    return tr


def run_anytime_sed(dmc: Dmc, spec: SourceSpec, horizon: int,
                    decode_requests: list[tuple[int, int]],
                    rng: np.random.Generator) -> dict[tuple[int, int], bool]:
    """Anytime operation of the SED code on the exact engine: the alphabet
    keeps growing and each requested (k, t) is answered with the MAP
    length-k prefix at time t.  Returns request -> correctness."""
    _require_binary_symmetric(dmc)
    for k, t in decode_requests:
        if t < arrival_time(spec, k):
            raise RequestBeforeArrival(f"prefix {k} not fully arrived at t={t}")
    n_max = n_of_t(spec, horizon, horizon=horizon)
    true_seq = sample_prefix(spec, n_max, rng)
    by_time: dict[int, list[int]] = {}
    for k, t in decode_requests:
        by_time.setdefault(t, []).append(k)
    results: dict[tuple[int, int], bool] = {}
    state = belief.initial_state(spec.q)
    true_idx = 0
    for t in range(1, horizon + 1):
        prev_len = state.seq_len
        state = belief.evolve_prior(state, spec, t)
        for n in range(prev_len, state.seq_len):
            true_idx = true_idx * spec.q + int(true_seq[n])
        part = sed_partition_binary(state.probs)
        z = int(part.assignment[true_idx])
        y = dmc.sample_output(z, rng)
        state = belief.bayes_update(state, part.assignment, dmc, y)
        for k in by_time.get(t, ()):
            est, _ = belief.map_prefix_estimate(state, k)
            results[(k, t)] = est == _prefix_of(true_idx, state.seq_len, k, spec.q)
    return results


def _prefix_of(idx: int, n: int, k: int, q: int) -> int:
    return idx // q ** (n - k)


def ejs_divergence(posteriors, encoding_map, dmc: Dmc) -> float:
    """Extrinsic Jensen-Shannon divergence of a deterministic encoding map
    under the current posteriors."""
    rho = np.asarray(posteriors, dtype=float)
    gamma = np.asarray(encoding_map, dtype=np.int64)
    rows = dmc.transition[gamma]  # item -> P(.|gamma(i))
    mix = rho @ rows
    total = 0.0
    for i in range(len(rho)):
        if rho[i] <= 0.0 or rho[i] >= 1.0 - 1e-15:
            continue
        alt = (mix - rho[i] * rows[i]) / (1.0 - rho[i])
        sup = rows[i] > 0
        if np.any(sup & (alt <= 0)):
            raise DegenerateChannel("infinite extrinsic divergence")
        total += rho[i] * float(np.sum(rows[i][sup] * np.log(rows[i][sup] / alt[sup])))
    return total


def maxejs_encoder_step(posteriors, dmc: Dmc, cap: int = 1 << 16) -> np.ndarray:
    """Exhaustive argmax of the EJS divergence over deterministic maps."""
    if dmc.channel_class != NON_DEGENERATE:
        raise DegenerateChannel("MaxEJS needs a fully positive matrix")
    rho = np.asarray(posteriors, dtype=float)
    n_items = len(rho)
    space = dmc.input_size ** n_items
    if space > cap:
        raise SearchSpaceTooLarge(f"{space} candidate maps exceed the cap {cap}")
    best_map = None
    best_val = -1.0
    for combo in product(range(dmc.input_size), repeat=n_items):
        val = ejs_divergence(rho, combo, dmc)
        if val > best_val + 1e-15:
            best_val = val
            best_map = combo
    return np.asarray(best_map, dtype=np.int64)


def reliability_curve(dmc: Dmc, spec: SourceSpec):
    """E(R) = C1 (1 - H R / C) on 0 < R < C/H, as a callable."""
    C, C1, H = dmc.capacity_nats, dmc.c1_nats, spec.entropy_rate_nats

    def E(R: float) -> float:
        return C1 * (1.0 - H * R / C)

    return E


def approx_rate(dmc: Dmc, spec: SourceSpec, k: int, eps: float) -> float:
    """Rate where the reliability curve crosses (R/k) ln(1/eps):
    R = C1 / (ln(1/eps)/k + C1 H / C)."""
    C, C1, H = dmc.capacity_nats, dmc.c1_nats, spec.entropy_rate_nats
    return C1 / (math.log(1.0 / eps) / k + C1 * H / C)


def buffer_bound_rate(dmc: Dmc, spec: SourceSpec, k: int, eps: float) -> float:
    """Same crossing against the buffering bound C1 (1 - (H/C + 1/f) R)."""
    C, C1, H = dmc.capacity_nats, dmc.c1_nats, spec.entropy_rate_nats
    f = spec.arrival_rate
    slope = H / C + (0.0 if math.isinf(f) else 1.0 / f)
    return C1 / (math.log(1.0 / eps) / k + C1 * slope)


def reliability_curves(dmc: Dmc, spec: SourceSpec, k: int, eps: float):
    """(curve callable, approximate rate, buffering-bound rate)."""
    return reliability_curve(dmc, spec), approx_rate(dmc, spec, k, eps), buffer_bound_rate(dmc, spec, k, eps)
