"""Exact prior/posterior bookkeeping over the evolving sequence alphabet.

This is the reference engine: it holds one probability per candidate source
sequence of the current length, indexed lexicographically in base q.  Cost
is exponential in the sequence length, so it is meant for small instances
and as ground truth for the log-linear type engine.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .channel import Dmc
from .errors import IncompletePartition, LengthOverflow, ZeroEvidence
from .source import IidLaw, SourceSpec, n_of_t

PRIOR = "prior"
POSTERIOR = "posterior"

# Hard caps: lexicographic indices stay below 2^127 and the dense array
# stays addressable in memory.
MAX_INDEX_BITS = 127
MAX_STATES = 1 << 22


@dataclass
class BeliefState:
    q: int
    seq_len: int
    probs: np.ndarray
    phase_tag: str
    last_renorm: float = 1.0

    def copy(self) -> "BeliefState":
        return replace(self, probs=self.probs.copy())


def initial_state(q: int) -> BeliefState:
    """Length-0 state: unit mass on the empty sequence."""
    return BeliefState(q=q, seq_len=0, probs=np.ones(1), phase_tag=POSTERIOR)


def _check_capacity(q: int, new_len: int):
    if new_len * np.log2(q) > MAX_INDEX_BITS:
        raise LengthOverflow(f"q^{new_len} exceeds the 128-bit index space")
    if q ** new_len > MAX_STATES:
        raise LengthOverflow(f"q^{new_len} exceeds the dense-state cap {MAX_STATES}")


def extend(state: BeliefState, spec: SourceSpec, new_len: int) -> BeliefState:
    """Append symbols up to new_len, multiplying in the source law."""
    q = state.q
    _check_capacity(q, new_len)
    probs = state.probs
    n = state.seq_len
    law = spec.law
    while n < new_len:
        if isinstance(law, IidLaw):
            probs = np.kron(probs, law.probs)
        elif n == 0:
            probs = np.kron(probs, law.initial)
        else:
            last = np.arange(probs.size) % q
            probs = (probs[:, None] * law.transition[last]).ravel()
        n += 1
    return BeliefState(q=q, seq_len=n, probs=probs, phase_tag=PRIOR,
                       last_renorm=state.last_renorm)


def evolve_prior(state: BeliefState, spec: SourceSpec, t: int,
                 max_len: int | None = None) -> BeliefState:
    """Prior at time t: extend by any symbols arriving at t, else identity.

    max_len caps the alphabet (the k-restricted codes stop incorporating
    arrivals at length k).
    """
    n_t = n_of_t(spec, t, horizon=max_len)
    if max_len is not None:
        n_t = min(n_t, max_len)
    if n_t < state.seq_len:
        raise ValueError("alphabet cannot shrink")
    if n_t == state.seq_len:
        return BeliefState(q=state.q, seq_len=state.seq_len, probs=state.probs,
                           phase_tag=PRIOR, last_renorm=state.last_renorm)
    return extend(state, spec, n_t)


def group_prior(state: BeliefState, assignment: np.ndarray, n_inputs: int) -> np.ndarray:
    """Per-input prior mass pi_x = sum of member priors."""
    if assignment.shape != state.probs.shape:
        raise IncompletePartition("assignment must cover the full domain exactly once")
    pi = np.bincount(assignment, weights=state.probs, minlength=n_inputs)
    return pi


def bayes_update(state: BeliefState, assignment: np.ndarray, dmc: Dmc, y: int,
                 kernel: np.ndarray | None = None) -> BeliefState:
    """Posterior given output y.

    Without a kernel the update is the deterministic form: each sequence is
    scaled by P(y | z(i)) and the evidence is sum_x P(y|x) pi_x.  With a
    randomization kernel K(x|z) the likelihood mixes over the kernel row and
    the evidence is the capacity-achieving output probability P*_Y(y).
    """
    if assignment.shape != state.probs.shape:
        raise IncompletePartition("assignment must cover the full domain exactly once")
    lik_col = dmc.transition[:, y]
    if kernel is None:
        pi = np.bincount(assignment, weights=state.probs, minlength=dmc.input_size)
        evidence = float(pi @ lik_col)
        factors = lik_col
    else:
        evidence = float(dmc.cap_output_dist[y])
        factors = kernel @ lik_col  # per group z: sum_x K(x|z) P(y|x)
    if evidence <= 0.0:
        raise ZeroEvidence(f"output {y} has zero probability under the model")
    probs = state.probs * (factors[assignment] / evidence)
    total = probs.sum()
    if total <= 0.0:
        raise ZeroEvidence(f"posterior vanished for output {y}")
    probs /= total
    return BeliefState(q=state.q, seq_len=state.seq_len, probs=probs,
                       phase_tag=POSTERIOR, last_renorm=float(total))


def prefix_marginal(state: BeliefState, k: int) -> np.ndarray:
    if k > state.seq_len:
        raise ValueError("prefix longer than current sequences")
    return state.probs.reshape(state.q ** k, -1).sum(axis=1)


def map_prefix_estimate(state: BeliefState, k: int) -> tuple[int, float]:
    """MAP length-k prefix: (lexicographic index, marginal probability).
    Ties break toward the smaller index."""
    marg = prefix_marginal(state, k)
    idx = int(np.argmax(marg))
    return idx, float(marg[idx])


def stop_check(state: BeliefState, k: int, eps: float) -> bool:
    """True when the best length-k prefix marginal reaches 1 - eps."""
    if not 0.0 < eps < 1.0:
        raise ValueError("eps must be in (0, 1)")
    _, p = map_prefix_estimate(state, k)
    return p >= 1.0 - eps


def index_to_symbols(idx: int, length: int, q: int) -> tuple[int, ...]:
    out = []
    for _ in range(length):
        out.append(idx % q)
        idx //= q
    return tuple(reversed(out))


def symbols_to_index(symbols, q: int) -> int:
    idx = 0
    for s in symbols:
        idx = idx * q + int(s)
    return idx


def dump(state: BeliefState) -> dict[str, float]:
    """Sequence-string -> probability mapping for debugging."""
    return {
        "".join(map(str, index_to_symbols(i, state.seq_len, state.q))): float(p)
        for i, p in enumerate(state.probs)
    }
