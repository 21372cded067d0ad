"""Group partitioning rules and the channel-input randomization plan.

Two partitioning rules are provided: the greedy heuristic that tracks the
capacity-achieving distribution (multi-input), and the binary
smallest-difference rule used by the single-phase code.  The randomization
plan transfers the surplus group mass so that the marginal transmitted
input distribution equals P*_X exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import MassImbalance, NotBinary

try:
    from numba import njit
except ImportError:  # pragma: no cover
    njit = None


def _greedy_scan_py(sorted_priors, pstar):
    nx = pstar.shape[0]
    pi = np.zeros(nx)
    out = np.empty(sorted_priors.shape[0], dtype=np.int64)
    for i in range(sorted_priors.shape[0]):
        best = 0
        best_gap = pstar[0] - pi[0]
        for x in range(1, nx):
            gap = pstar[x] - pi[x]
            if gap > best_gap:
                best_gap = gap
                best = x
        out[i] = best
        pi[best] += sorted_priors[i]
    return out


def _lighter_scan_py(sorted_priors):
    """Assign each item (descending priors) to the currently lighter group;
    ties go to group 0."""
    out = np.empty(sorted_priors.shape[0], dtype=np.int64)
    balance = 0.0  # pi_0 - pi_1
    for i in range(sorted_priors.shape[0]):
        if balance <= 0.0:
            out[i] = 0
            balance += sorted_priors[i]
        else:
            out[i] = 1
            balance -= sorted_priors[i]
    return out


if njit is not None:
    _greedy_scan = njit(cache=True)(_greedy_scan_py)
    _lighter_scan = njit(cache=True)(_lighter_scan_py)
else:  # pragma: no cover
    _greedy_scan = _greedy_scan_py
    _lighter_scan = _lighter_scan_py


@dataclass
class Partition:
    assignment: np.ndarray  # item id (position) -> input index
    group_priors: np.ndarray
    min_member_prior: np.ndarray  # +inf for empty groups

    @property
    def n_inputs(self) -> int:
        return len(self.group_priors)


def _finish(priors: np.ndarray, assignment: np.ndarray, nx: int) -> Partition:
    pi = np.bincount(assignment, weights=priors, minlength=nx)
    mins = np.full(nx, np.inf)
    np.minimum.at(mins, assignment, priors)
    return Partition(assignment=assignment, group_priors=pi, min_member_prior=mins)


def greedy_partition(priors, pstar) -> Partition:
    """Sort priors descending (stable), then assign each item to the input
    with the largest remaining gap to its target mass."""
    priors = np.asarray(priors, dtype=float)
    pstar = np.asarray(pstar, dtype=float)
    order = np.argsort(-priors, kind="stable")
    groups = _greedy_scan(priors[order], pstar)
    assignment = np.empty_like(groups)
    assignment[order] = groups
    return _finish(priors, assignment, len(pstar))


def sed_partition_binary(priors) -> Partition:
    """Binary partition with pi_x - pi_x' bounded by the smallest member
    prior of the heavier group.

    Items are sorted descending and each goes to the currently lighter
    group: the last item placed in the final heavier group bounds the gap,
    and being placed last it is that group's smallest member.
    """
    priors = np.asarray(priors, dtype=float)
    order = np.argsort(-priors, kind="stable")
    groups = _lighter_scan(priors[order])
    assignment = np.empty_like(groups)
    assignment[order] = groups
    return _finish(priors, assignment, 2)


def check_partition_rule(partition: Partition, pstar) -> float:
    """Worst-case slack of the partitioning rule: max over x of
    pi_x - P*_X(x) - (min member prior of group x).  <= 0 when the rule holds
    (empty groups require pi_x <= P*_X(x))."""
    pstar = np.asarray(pstar, dtype=float)
    excess = partition.group_priors - pstar
    slack = np.where(np.isinf(partition.min_member_prior),
                     excess, excess - partition.min_member_prior)
    return float(slack.max())


@dataclass
class RandomizationPlan:
    over_set: np.ndarray
    under_set: np.ndarray
    transfer: dict = field(default_factory=dict)  # (x_over, x_under) -> mass
    kernel: np.ndarray | None = None  # K[z, x] = P(X=x | Z=z)


def randomization_plan(partition: Partition, pstar) -> RandomizationPlan:
    """Transfer surplus group mass to deficient groups (smallest indices
    first) and assemble the conditional kernel P(X|Z)."""
    pstar = np.asarray(pstar, dtype=float)
    pi = partition.group_priors
    nx = len(pstar)
    diff = pi - pstar
    over = np.where(diff > 0)[0]
    under = np.where(diff <= 0)[0]
    if abs(diff[over].sum() + diff[under].sum()) > 1e-12:
        raise MassImbalance("group priors and targets disagree on total mass")
    transfer: dict[tuple[int, int], float] = {}
    excess = diff[over].copy()
    deficit = -diff[under].copy()
    i = 0
    for j, xu in enumerate(under):
        need = deficit[j]
        while need > 1e-15 and i < len(over):
            give = min(excess[i], need)
            if give > 0:
                transfer[(int(over[i]), int(xu))] = transfer.get((int(over[i]), int(xu)), 0.0) + give
            excess[i] -= give
            need -= give
            if excess[i] <= 1e-15:
                i += 1
    kernel = np.zeros((nx, nx))
    for z in under:
        kernel[z, z] = 1.0
    for z in over:
        if pi[z] <= 0:
            kernel[z, z] = 1.0
            continue
        kernel[z, z] = pstar[z] / pi[z]
        for (zo, xu), mass in transfer.items():
            if zo == z:
                kernel[z, xu] = mass / pi[z]
    # absorb float residue so rows are exact distributions
    rows = kernel.sum(axis=1)
    kernel[rows > 0] /= rows[rows > 0, None]
    return RandomizationPlan(over_set=over, under_set=under, transfer=transfer, kernel=kernel)


def plan_residuals(partition: Partition, plan: RandomizationPlan, pstar) -> tuple[float, float]:
    """(max over-group residual, max under-group residual) of the mass
    transfer identities."""
    pstar = np.asarray(pstar, dtype=float)
    pi = partition.group_priors
    r_over = 0.0
    for z in plan.over_set:
        sent = sum(m for (zo, _), m in plan.transfer.items() if zo == z)
        r_over = max(r_over, abs(pi[z] - sent - pstar[z]))
    r_under = 0.0
    for x in plan.under_set:
        recv = sum(m for (_, xu), m in plan.transfer.items() if xu == x)
        r_under = max(r_under, abs(pi[x] + recv - pstar[x]))
    return r_over, r_under


def marginal_input_dist(partition: Partition, plan: RandomizationPlan) -> np.ndarray:
    """sum_z K(x|z) pi_z; equals P*_X for a consistent plan."""
    return partition.group_priors @ plan.kernel
