import numpy as np
import pytest

from streamjscc.partition import (
    check_partition_rule,
    greedy_partition,
    marginal_input_dist,
    plan_residuals,
    randomization_plan,
    sed_partition_binary,
)


def test_greedy_example():
    part = greedy_partition([0.4, 0.3, 0.2, 0.1], [0.5, 0.5])
    assert np.allclose(part.group_priors, [0.5, 0.5])
    assert list(part.assignment) == [0, 1, 1, 0]
    assert check_partition_rule(part, [0.5, 0.5]) <= 1e-12


def test_greedy_single_item():
    part = greedy_partition([1.0], [0.2, 0.5, 0.3])
    assert part.assignment[0] == 1


def test_greedy_exact_singletons():
    pstar = np.array([0.6, 0.4])
    part = greedy_partition([0.6, 0.4], pstar)
    assert np.allclose(part.group_priors, pstar)


def test_greedy_rule_sweep():
    rng = np.random.default_rng(10)
    for nx in (2, 3, 4, 8):
        pstar = rng.dirichlet(np.ones(nx) * 5)
        for _ in range(500):
            m = rng.integers(1, 50)
            priors = rng.dirichlet(np.ones(m) * rng.choice([0.3, 1.0, 3.0]))
            part = greedy_partition(priors, pstar)
            assert check_partition_rule(part, pstar) <= 1e-12
            # only groups that just crossed their target may exceed it
            over = part.group_priors > pstar + 1e-12
            assert over.sum() <= nx


def test_sed_examples():
    part = sed_partition_binary([0.35, 0.25, 0.25, 0.15])
    assert abs(part.group_priors[0] - part.group_priors[1]) < 1e-12

    part = sed_partition_binary([0.9, 0.1])
    heavy = int(np.argmax(part.group_priors))
    gap = abs(part.group_priors[0] - part.group_priors[1])
    assert gap == pytest.approx(0.8)
    assert gap <= part.min_member_prior[heavy]

    part = sed_partition_binary(np.full(16, 1 / 16))
    assert abs(part.group_priors[0] - part.group_priors[1]) < 1e-12


def test_sed_rule_literal_sweep():
    rng = np.random.default_rng(11)
    for _ in range(2000):
        m = rng.integers(1, 60)
        priors = rng.dirichlet(np.ones(m) * rng.choice([0.2, 1.0, 5.0]))
        part = sed_partition_binary(priors)
        heavy = int(np.argmax(part.group_priors))
        gap = part.group_priors[heavy] - part.group_priors[1 - heavy]
        assert gap <= part.min_member_prior[heavy] + 1e-12


def test_plan_binary_example():
    part = greedy_partition([0.6, 0.4], [0.5, 0.5])
    # force the pi=(0.6, 0.4) grouping regardless of item order
    part.group_priors = np.array([0.6, 0.4])
    plan = randomization_plan(part, [0.5, 0.5])
    assert plan.transfer == {(0, 1): pytest.approx(0.1)}
    assert np.allclose(plan.kernel[0], [5 / 6, 1 / 6])
    assert np.allclose(plan.kernel[1], [0.0, 1.0])


def test_plan_identity_when_matched():
    part = greedy_partition([0.5, 0.5], [0.5, 0.5])
    plan = randomization_plan(part, [0.5, 0.5])
    assert plan.transfer == {}
    assert np.allclose(plan.kernel, np.eye(2))


def test_plan_ternary_example():
    part = greedy_partition([0.7, 0.2, 0.1], np.full(3, 1 / 3))
    plan = randomization_plan(part, np.full(3, 1 / 3))
    assert plan.transfer[(0, 1)] == pytest.approx(1 / 3 - 0.2, abs=1e-12)
    assert plan.transfer[(0, 2)] == pytest.approx(1 / 3 - 0.1, abs=1e-12)
    r_over, r_under = plan_residuals(part, plan, np.full(3, 1 / 3))
    assert r_over < 1e-12 and r_under < 1e-12


def test_marginal_matches_target_sweep():
    rng = np.random.default_rng(12)
    for nx in (2, 3, 4):
        pstar = rng.dirichlet(np.ones(nx) * 4)
        worst = 0.0
        for _ in range(1000):
            m = rng.integers(1, 40)
            priors = rng.dirichlet(np.ones(m))
            part = greedy_partition(priors, pstar)
            plan = randomization_plan(part, pstar)
            r_over, r_under = plan_residuals(part, plan, pstar)
            assert max(r_over, r_under) < 1e-12
            worst = max(worst, np.abs(marginal_input_dist(part, plan) - pstar).max())
        assert worst < 1e-12
