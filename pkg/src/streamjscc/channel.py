"""Discrete memoryless channels: validation, capacity, and derived constants.

A channel is a row-stochastic matrix P(y|x).  Construction computes the
capacity C (nats/use) with its achieving input distribution, the induced
output distribution, the maximum pairwise KL divergence C1, the entry
extremes, a degeneracy classification, and a Gallager-symmetry flag.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DimensionMismatch,
    EmptyMatrix,
    IndexOutOfRange,
    NoConvergence,
    NonStochastic,
)

ROW_SUM_TOL = 1e-9
BA_DEFAULT_TOL = 1e-10
BA_MAX_ITER = 10_000

NON_DEGENERATE = "NonDegenerate"
DEGENERATE = "Degenerate"
NEITHER = "Neither"


@dataclass(frozen=True)
class Dmc:
    """Validated channel with precomputed constants."""

    transition: np.ndarray
    input_size: int
    output_size: int
    capacity_nats: float
    cap_input_dist: np.ndarray
    cap_output_dist: np.ndarray
    c1_nats: float
    p_max: float
    p_min: float
    channel_class: str
    symmetric: bool
    # (y, x, x') with P(y|x) > 0 and P(y|x') = 0, present iff Degenerate.
    degenerate_witness: tuple[int, int, int] | None = field(default=None)

    def sample_output(self, x: int, rng: np.random.Generator) -> int:
        """Draw one channel output for input x."""
        if not 0 <= x < self.input_size:
            raise IndexOutOfRange(f"input {x} outside [0, {self.input_size})")
        return int(rng.choice(self.output_size, p=self.transition[x]))

    def sample_outputs(self, xs: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        """Vectorized sampling, one output per entry of xs (inverse-CDF)."""
        xs = np.asarray(xs)
        if xs.size and (xs.min() < 0 or xs.max() >= self.input_size):
            raise IndexOutOfRange("input index outside alphabet")
        cdf = np.cumsum(self.transition, axis=1)
        u = rng.random(xs.shape)
        return (u[..., None] > cdf[xs]).sum(axis=-1)


def validate_and_classify(matrix) -> Dmc:
    """Build a Dmc from a transition matrix, computing all derived constants."""
    P = np.array(matrix, dtype=float)
    if P.ndim != 2 or P.size == 0:
        raise EmptyMatrix("transition matrix must be a nonempty 2-D array")
    if np.any(P < 0) or np.any(P > 1):
        raise NonStochastic("entries must lie in [0, 1]")
    row_sums = P.sum(axis=1)
    if np.any(np.abs(row_sums - 1.0) > ROW_SUM_TOL):
        raise NonStochastic(f"row sums deviate from 1 by {np.abs(row_sums - 1).max():.2e}")
    # Renormalize the tiny residual so downstream sums are exact to ~1e-16.
    P = P / row_sums[:, None]
    P.setflags(write=False)

    cls, witness = _classify(P)
    C, px = _blahut_arimoto(P, BA_DEFAULT_TOL, BA_MAX_ITER)
    py = px @ P
    py.setflags(write=False)
    px.setflags(write=False)

    return Dmc(
        transition=P,
        input_size=P.shape[0],
        output_size=P.shape[1],
        capacity_nats=C,
        cap_input_dist=px,
        cap_output_dist=py,
        c1_nats=_max_kl(P) if cls == NON_DEGENERATE else math.inf,
        p_max=float(P.max()),
        p_min=float(P.min()),
        channel_class=cls,
        symmetric=_is_gallager_symmetric(P),
        degenerate_witness=witness,
    )


def _classify(P: np.ndarray) -> tuple[str, tuple[int, int, int] | None]:
    if np.all(P > 0):
        return NON_DEGENERATE, None
    # Degenerate needs some output reachable from one input but impossible
    # from another.  Pick the witness with the largest P(y|x); ties toward
    # the smaller output index, then smaller x, x'.
    best = None
    for y in range(P.shape[1]):
        col = P[:, y]
        if not (np.any(col > 0) and np.any(col == 0)):
            continue
        x = int(np.argmax(col))
        xp = int(np.argmin(col != 0))  # first zero entry
        if best is None or col[x] > best[0] + 1e-15:
            best = (col[x], y, x, xp)
    if best is None:
        return NEITHER, None
    _, y, x, xp = best
    return DEGENERATE, (y, x, xp)


def capacity(dmc_or_matrix, tol: float = BA_DEFAULT_TOL) -> tuple[float, np.ndarray]:
    """Channel capacity in nats/use with the achieving input distribution."""
    P = dmc_or_matrix.transition if isinstance(dmc_or_matrix, Dmc) else np.asarray(dmc_or_matrix, float)
    return _blahut_arimoto(P, tol, BA_MAX_ITER)


def _blahut_arimoto(P: np.ndarray, tol: float, max_iter: int) -> tuple[float, np.ndarray]:
    """Alternating maximization; terminates when the capacity bracket closes."""
    nx = P.shape[0]
    r = np.full(nx, 1.0 / nx)
    support = P > 0
    logP = np.where(support, np.log(np.where(support, P, 1.0)), 0.0)
    for _ in range(max_iter):
        q = r @ P
        # D(P(.|x) || q) for each row, in nats
        with np.errstate(divide="ignore"):
            logq = np.where(q > 0, np.log(q), 0.0)
        d = (P * (logP - logq[None, :]) * support).sum(axis=1)
        i_lower = float(r @ d)
        i_upper = float(d.max())
        if i_upper - i_lower < tol:
            c = max(i_lower, 0.0)
            r = r / r.sum()
            return c, r
        w = r * np.exp(d - d.max())
        r = w / w.sum()
    raise NoConvergence(f"Blahut-Arimoto did not close the bracket in {max_iter} iterations")


def max_kl_divergence(dmc: Dmc) -> float:
    return dmc.c1_nats


def _max_kl(P: np.ndarray) -> float:
    """max over ordered row pairs of D(row_x || row_x'); inf when a needed
    denominator vanishes (degenerate and unreachable-output channels)."""
    best = 0.0
    n = P.shape[0]
    for x in range(n):
        px = P[x]
        sup = px > 0
        for xp in range(n):
            if xp == x:
                continue
            pxp = P[xp]
            if np.any(sup & (pxp == 0)):
                return math.inf
            d = float(np.sum(px[sup] * np.log(px[sup] / pxp[sup])))
            best = max(best, d)
    return best


def induced_output_dist(dmc: Dmc, p_x) -> np.ndarray:
    """Output distribution y -> sum_x P(y|x) P_X(x)."""
    p_x = np.asarray(p_x, dtype=float)
    if p_x.shape != (dmc.input_size,):
        raise DimensionMismatch(f"expected input dist of length {dmc.input_size}")
    if abs(p_x.sum() - 1.0) > ROW_SUM_TOL:
        raise NonStochastic("input distribution must sum to 1")
    return p_x @ dmc.transition


def _is_gallager_symmetric(P: np.ndarray) -> bool:
    """Columns partitionable so that within each part the rows are
    permutations of each other and the columns are permutations of each
    other.  Exhaustive over set partitions for small output alphabets;
    falls back to the canonical column-multiset grouping beyond that."""
    ny = P.shape[1]
    if ny <= 8:
        return any(_partition_ok(P, part) for part in _set_partitions(list(range(ny))))
    groups: dict[tuple, list[int]] = {}
    for y in range(ny):
        groups.setdefault(tuple(np.sort(P[:, y])), []).append(y)
    return _partition_ok(P, list(groups.values()))


def _partition_ok(P: np.ndarray, parts) -> bool:
    for cols in parts:
        sub = P[:, cols]
        rows = np.sort(sub, axis=1)
        if not np.allclose(rows, rows[0], rtol=0, atol=1e-12):
            return False
        csorted = np.sort(sub, axis=0)
        if not np.allclose(csorted.T, csorted.T[0], rtol=0, atol=1e-12):
            return False
    return True


def _set_partitions(items):
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for part in _set_partitions(rest):
        for i in range(len(part)):
            yield part[:i] + [[first] + part[i]] + part[i + 1:]
        yield [[first]] + part


def bsc(p: float) -> Dmc:
    """Binary symmetric channel with crossover probability p."""
    return validate_and_classify([[1 - p, p], [p, 1 - p]])


def bec(e: float) -> Dmc:
    """Binary erasure channel; outputs ordered (0, erasure, 1)."""
    return validate_and_classify([[1 - e, e, 0.0], [0.0, e, 1 - e]])


def from_json(path: str) -> Dmc:
    """Load {"matrix": [[...]], "name": "..."} from a JSON document."""
    with open(path) as fh:
        doc = json.load(fh)
    return validate_and_classify(doc["matrix"])
