"""Log-linear engine for equiprobable sources.

Sequences sharing a probability stay lexicographically contiguous under all
of the updates used here, so the belief is stored as a set of disjoint
intervals ("types"), each carrying one per-sequence probability.  The
partitioning rules split at most a bounded number of types per step, so the
live count grows linearly in time instead of exponentially.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .channel import Dmc
from .codes import Transcript, _require_binary_symmetric, default_horizon
from .errors import LengthOverflow, RequestBeforeArrival, ZeroEvidence
from .source import IidLaw, SourceSpec, arrival_time, n_of_t, sample_prefix

MAX_INDEX_BITS = 127


@dataclass
class TypeInterval:
    seq_len: int
    lo: int
    hi: int
    per_seq_prob: float
    id: int

    @property
    def count(self) -> int:
        return self.hi - self.lo + 1

    @property
    def mass(self) -> float:
        return self.count * self.per_seq_prob


def initial_types(q: int) -> list[TypeInterval]:
    return [TypeInterval(seq_len=0, lo=0, hi=0, per_seq_prob=1.0, id=0)]


def require_equiprobable(spec: SourceSpec):
    law = spec.law
    if not isinstance(law, IidLaw) or not np.allclose(law.probs, 1.0 / spec.q, atol=0, rtol=0):
        raise ValueError("the type engine supports only uniform i.i.d. sources")


def type_update_and_priors(types: list[TypeInterval], spec: SourceSpec, t: int,
                           max_len: int | None = None) -> list[TypeInterval]:
    """Append any symbols arriving at time t to every interval; the type
    count never changes here."""
    cur = types[0].seq_len
    n_t = n_of_t(spec, t, horizon=max_len)
    if max_len is not None:
        n_t = min(n_t, max_len)
    delta = n_t - cur
    if delta <= 0:
        return types
    q = spec.q
    if n_t * math.log2(q) > MAX_INDEX_BITS:
        raise LengthOverflow(f"q^{n_t} exceeds the 128-bit index space")
    scale = q ** delta
    p = (1.0 / q) ** delta
    return [
        replace(tp, seq_len=n_t, lo=tp.lo * scale, hi=tp.hi * scale + (scale - 1),
                per_seq_prob=tp.per_seq_prob * p)
        for tp in types
    ]


def _sorted_desc(types: list[TypeInterval]) -> list[TypeInterval]:
    return sorted(types, key=lambda tp: (-tp.per_seq_prob, tp.lo))


@dataclass
class TypePartition:
    assignment: dict[int, int]  # type id -> input index
    group_priors: np.ndarray
    min_member_prior: np.ndarray
    splits: int = 0
    boundary_theta: float | None = None  # per-seq prob of the split type


def type_greedy_partition(types: list[TypeInterval], pstar) -> tuple[TypePartition, list[TypeInterval]]:
    """Greedy rule at type granularity: repeatedly send the head of the
    probability-sorted queue to the input with the largest remaining gap,
    splitting the head when it overshoots.  Moved pieces keep the smallest
    consecutive indices; the remainder returns to the queue head."""
    pstar = np.asarray(pstar, dtype=float)
    nx = len(pstar)
    queue = _sorted_desc(types)
    next_id = max(tp.id for tp in types) + 1
    pi = np.zeros(nx)
    mins = np.full(nx, np.inf)
    assignment: dict[int, int] = {}
    out: list[TypeInterval] = []
    splits = 0
    i = 0
    queue = list(queue)
    while i < len(queue):
        tp = queue[i]
        gaps = pstar - pi
        x = int(np.argmax(gaps))
        gap = gaps[x]
        theta = tp.per_seq_prob
        if gap <= 0.0:
            n = tp.count  # float residue: dump the remainder
        else:
            n = math.ceil(gap / theta)
        if n >= tp.count:
            assignment[tp.id] = x
            pi[x] += tp.mass
            mins[x] = min(mins[x], theta)
            out.append(tp)
            i += 1
            continue
        moved = replace(tp, hi=tp.lo + n - 1)
        rest = replace(tp, lo=tp.lo + n, id=next_id)
        next_id += 1
        splits += 1
        assignment[moved.id] = x
        pi[x] += moved.mass
        mins[x] = min(mins[x], theta)
        out.append(moved)
        queue[i] = rest  # remainder goes back to the queue head
    part = TypePartition(assignment=assignment, group_priors=pi,
                         min_member_prior=mins, splits=splits)
    return part, out


def type_sed_partition(types: list[TypeInterval]) -> tuple[TypePartition, list[TypeInterval]]:
    """Binary smallest-difference rule at type granularity: fill group 0 in
    descending probability order until it reaches 1/2, then shave n
    sequences off the boundary type, n chosen to minimize the resulting
    |pi_0 - pi_1|.  The shaved piece is the last n indices of the boundary
    type.  The final gap never exceeds the boundary per-sequence
    probability."""
    ordered = _sorted_desc(types)
    next_id = max(tp.id for tp in types) + 1
    assignment: dict[int, int] = {}
    out: list[TypeInterval] = []
    pi0 = 0.0
    boundary = None
    rest_start = len(ordered)
    for j, tp in enumerate(ordered):
        assignment[tp.id] = 0
        out.append(tp)
        pi0 += tp.mass
        if pi0 >= 0.5:
            boundary = tp
            rest_start = j + 1
            break
    for tp in ordered[rest_start:]:
        assignment[tp.id] = 1
        out.append(tp)
    splits = 0
    theta = boundary.per_seq_prob if boundary is not None else None
    if boundary is not None and theta > 0.0:
        n_lo = math.floor((pi0 - 0.5) / theta)
        n_hi = math.ceil((pi0 - 0.5) / theta)
        # remaining gap c_n = 2 pi0 - 1 - 2 n theta; pick the smaller |c_n|
        best_n = min((n_lo, n_hi), key=lambda n: (abs(2 * pi0 - 1 - 2 * n * theta), n))
        best_n = max(0, min(best_n, boundary.count))
        if best_n == boundary.count:
            assignment[boundary.id] = 1
        elif best_n > 0:
            moved = TypeInterval(seq_len=boundary.seq_len,
                                 lo=boundary.hi - best_n + 1, hi=boundary.hi,
                                 per_seq_prob=theta, id=next_id)
            out[out.index(boundary)] = replace(boundary, hi=boundary.hi - best_n)
            out.append(moved)
            assignment[moved.id] = 1
            splits = 1
    pi = np.zeros(2)
    mins = np.full(2, np.inf)
    for tp in out:
        x = assignment[tp.id]
        pi[x] += tp.mass
        mins[x] = min(mins[x], tp.per_seq_prob)
    part = TypePartition(assignment=assignment, group_priors=pi,
                         min_member_prior=mins, splits=splits,
                         boundary_theta=theta)
    return part, out


def type_posterior_update(types: list[TypeInterval], partition: TypePartition,
                          dmc: Dmc, y: int, kernel: np.ndarray | None = None) -> list[TypeInterval]:
    """Scale each type by its group's likelihood factor and renormalize."""
    lik_col = dmc.transition[:, y]
    if kernel is None:
        evidence = float(partition.group_priors @ lik_col[:len(partition.group_priors)])
        factors = lik_col
    else:
        evidence = float(dmc.cap_output_dist[y])
        factors = kernel @ lik_col
    if evidence <= 0.0:
        raise ZeroEvidence(f"output {y} has zero probability under the model")
    out = [replace(tp, per_seq_prob=tp.per_seq_prob * factors[partition.assignment[tp.id]] / evidence)
           for tp in types]
    total = sum(tp.mass for tp in out)
    if total <= 0.0:
        raise ZeroEvidence(f"posterior vanished for output {y}")
    return [replace(tp, per_seq_prob=tp.per_seq_prob / total) for tp in out]


def type_prefix_decode(types: list[TypeInterval], k: int, q: int) -> int:
    """Length-k prefix estimate read off the highest-probability type.

    If the type's endpoints share a prefix that is it; if their prefixes are
    non-adjacent any strictly interior prefix is fully covered (smallest
    chosen); if adjacent, the majority side wins by suffix count."""
    best = min(types, key=lambda tp: (-tp.per_seq_prob, tp.lo))
    n = best.seq_len
    if k > n:
        raise RequestBeforeArrival(f"prefix {k} longer than current sequences")
    span = q ** (n - k)
    p_lo = best.lo // span
    p_hi = best.hi // span
    if p_lo == p_hi:
        return p_lo
    if p_hi - p_lo >= 2:
        return p_lo + 1
    count_lo = span - best.lo % span
    count_hi = best.hi % span + 1
    return p_lo if count_lo >= count_hi else p_hi


def type_stop_decode(types: list[TypeInterval], k: int, eps: float) -> int | None:
    """Stop when some type's per-sequence posterior reaches 1 - eps; returns
    a member sequence (the lowest index of the best such type)."""
    hits = [tp for tp in types if tp.per_seq_prob >= 1.0 - eps]
    if not hits:
        return None
    best = min(hits, key=lambda tp: (-tp.per_seq_prob, tp.lo))
    return best.lo


def validate_types(types: list[TypeInterval], q: int) -> None:
    """Assert disjoint intervals exactly covering [0, q^seq_len) with unit
    total mass."""
    n = types[0].seq_len
    assert all(tp.seq_len == n for tp in types)
    ordered = sorted(types, key=lambda tp: tp.lo)
    pos = 0
    for tp in ordered:
        assert tp.lo == pos and tp.hi >= tp.lo
        pos = tp.hi + 1
    assert pos == q ** n
    total = sum(tp.mass for tp in types)
    assert abs(total - 1.0) < 1e-9


def locate(types: list[TypeInterval], idx: int) -> TypeInterval:
    for tp in types:
        if tp.lo <= idx <= tp.hi:
            return tp
    raise KeyError(f"index {idx} not covered by the live types")


def expand_assignment(types: list[TypeInterval], partition: TypePartition,
                      q: int) -> np.ndarray:
    """Dense per-sequence group assignment (for oracle co-simulation; only
    valid while q^seq_len fits in memory)."""
    n = types[0].seq_len
    out = np.empty(q ** n, dtype=np.int64)
    for tp in types:
        out[tp.lo:tp.hi + 1] = partition.assignment[tp.id]
    return out


def run_type_instantaneous_sed(dmc: Dmc, spec: SourceSpec, k: int, eps: float,
                               rng: np.random.Generator,
                               horizon_cap: int | None = None,
                               step_hook=None) -> Transcript:
    """Type-based single-phase code restricted to the first k symbols."""
    _require_binary_symmetric(dmc)
    require_equiprobable(spec)
    cap = horizon_cap or default_horizon(dmc, k)
    true_seq = sample_prefix(spec, k, rng)
    tr = Transcript(t_k=arrival_time(spec, k))
    types = initial_types(spec.q)
    true_idx = 0
    cur_len = 0
    for t in range(1, cap + 1):
        types = type_update_and_priors(types, spec, t, max_len=k)
        new_len = types[0].seq_len
        for n in range(cur_len, new_len):
            true_idx = true_idx * spec.q + int(true_seq[n])
        cur_len = new_len
        part, types = type_sed_partition(types)
        z = part.assignment[locate(types, true_idx).id]
        y = dmc.sample_output(z, rng)
        tr.groups.append(z)
        tr.inputs.append(z)
        tr.outputs.append(y)
        types = type_posterior_update(types, part, dmc, y)
        if step_hook is not None:
            step_hook(t, part, types, y)
        if cur_len >= k:
            est = type_stop_decode(types, k, eps)
            if est is not None:
                tr.eta = t
                tr.estimate = est
                tr.correct = est == true_idx
                return tr
    tr.eta = cap
    tr.hit_cap = True
    return tr


def run_type_anytime_sed(dmc: Dmc, spec: SourceSpec, horizon: int,
                         decode_requests: list[tuple[int, int]],
                         rng: np.random.Generator) -> dict[tuple[int, int], bool]:
    """Type-based anytime operation: never stops, answers (k, t) prefix
    requests from the current type set."""
    _require_binary_symmetric(dmc)
    require_equiprobable(spec)
    for k, t in decode_requests:
        if t < arrival_time(spec, k):
            raise RequestBeforeArrival(f"prefix {k} not fully arrived at t={t}")
    by_time: dict[int, list[int]] = {}
    for k, t in decode_requests:
        by_time.setdefault(t, []).append(k)
    n_max = n_of_t(spec, horizon, horizon=horizon)
    true_seq = sample_prefix(spec, n_max, rng)
    results: dict[tuple[int, int], bool] = {}
    types = initial_types(spec.q)
    true_idx = 0
    cur_len = 0
    for t in range(1, horizon + 1):
        types = type_update_and_priors(types, spec, t)
        new_len = types[0].seq_len
        for n in range(cur_len, new_len):
            true_idx = true_idx * spec.q + int(true_seq[n])
        cur_len = new_len
        part, types = type_sed_partition(types)
        z = part.assignment[locate(types, true_idx).id]
        y = dmc.sample_output(z, rng)
        types = type_posterior_update(types, part, dmc, y)
        for k in by_time.get(t, ()):
            est = type_prefix_decode(types, k, spec.q)
            results[(k, t)] = est == true_idx // spec.q ** (cur_len - k)
    return results
