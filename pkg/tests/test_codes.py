import math

import numpy as np
import pytest

from streamjscc import belief, channel, codes, source
from streamjscc.errors import (
    DegenerateChannel,
    NotBinary,
    RequestBeforeArrival,
    SearchSpaceTooLarge,
)
from streamjscc.partition import greedy_partition, randomization_plan


@pytest.fixture(scope="module")
def bsc05():
    return channel.bsc(0.05)


@pytest.fixture(scope="module")
def bern():
    return source.iid_uniform(2, 1)


def test_near_noiseless_phase_then_block(bern):
    d = channel.bsc(1e-9)
    cfg = codes.CodeConfig(eps=0.1)
    for i in range(100):
        tr = codes.run_instantaneous_phase_then_block(d, bern, 8, cfg,
                                                      np.random.default_rng(i))
        assert tr.correct
        assert tr.eta <= 10  # essentially k channel uses


def test_k1_stops_on_first_confident_posterior(bsc05, bern):
    tr = codes.run_instantaneous_sed(bsc05, bern, 1, 0.5, np.random.default_rng(0))
    assert tr.eta == 1  # one use pushes a posterior past 0.5 on a BSC


def test_first_transmission_is_the_bit(bsc05, bern):
    tr = codes.run_instantaneous_sed(bsc05, bern, 4, 1e-3, np.random.default_rng(1))
    # at t=1 the alphabet is {0, 1} with priors (0.5, 0.5): group = bit value
    first_bit_groups = [codes.run_instantaneous_sed(
        bsc05, bern, 2, 1e-2, np.random.default_rng(i)).groups[0] for i in range(50)]
    bits = [int(source.sample_prefix(bern, 2, np.random.default_rng(i))[0])
            for i in range(50)]
    assert first_bit_groups == bits
    assert tr.t_k == 4


def test_requires_binary_nondegenerate(bern):
    with pytest.raises(NotBinary):
        codes.run_instantaneous_sed(
            channel.validate_and_classify(np.full((3, 3), 1 / 3)), bern, 2, 0.1,
            np.random.default_rng(0))
    with pytest.raises(DegenerateChannel):
        codes.run_instantaneous_sed(channel.bec(0.3), bern, 2, 0.1,
                                    np.random.default_rng(0))


def test_all_at_once_buffer_equals_inst_sed(bsc05):
    # with every symbol present at t=1 both codes are the plain block code
    sp = source.all_at_once(2)
    for i in range(25):
        a = codes.run_instantaneous_sed(bsc05, sp, 6, 1e-4, np.random.default_rng(i))
        b = codes.run_buffer_then_transmit(bsc05, sp, 6, 1e-4, np.random.default_rng(i))
        assert a.eta == b.eta
        assert a.outputs == b.outputs
        assert a.estimate == b.estimate


def test_buffer_rate_below_inst_sed(bsc05, bern):
    n = 150
    eta_buf = np.mean([codes.run_buffer_then_transmit(
        bsc05, bern, 8, 1e-4, np.random.default_rng(i)).eta for i in range(n)])
    eta_sed = np.mean([codes.run_instantaneous_sed(
        bsc05, bern, 8, 1e-4, np.random.default_rng(i)).eta for i in range(n)])
    assert 8 / eta_buf < 8 / eta_sed


def test_horizon_cap_reported(bern):
    d = channel.bsc(0.4)  # too noisy to finish in a handful of uses
    tr = codes.run_instantaneous_sed(d, bern, 8, 1e-9, np.random.default_rng(0),
                                     horizon_cap=10)
    assert tr.hit_cap and not tr.correct and tr.eta == 10


def test_phase_marginal_matches_target(bsc05, bern):
    res = []
    cfg = codes.CodeConfig(eps=1e-4)
    for i in range(20):
        codes.run_instantaneous_phase_then_block(bsc05, bern, 6, cfg,
                                                 np.random.default_rng(i),
                                                 marginal_residuals=res)
    assert res and max(res) < 1e-12


def test_decoder_replica_matches_encoder(bsc05, bern):
    # both sides see only y^t and the public kernel, so their beliefs agree
    # bitwise at every step
    rng = np.random.default_rng(5)
    true = source.sample_prefix(bern, 6, rng)
    enc = belief.initial_state(2)
    dec = belief.initial_state(2)
    true_idx = 0
    pstar = bsc05.cap_input_dist
    for t in range(1, 7):
        enc = belief.evolve_prior(enc, bern, t, max_len=6)
        dec = belief.evolve_prior(dec, bern, t, max_len=6)
        part_e = greedy_partition(enc.probs, pstar)
        part_d = greedy_partition(dec.probs, pstar)
        assert np.array_equal(part_e.assignment, part_d.assignment)
        plan = randomization_plan(part_e, pstar)
        true_idx = true_idx * 2 + int(true[t - 1])
        z = int(part_e.assignment[true_idx])
        x = int(rng.choice(2, p=plan.kernel[z]))
        y = bsc05.sample_output(x, rng)
        enc = belief.bayes_update(enc, part_e.assignment, bsc05, y, kernel=plan.kernel)
        dec = belief.bayes_update(dec, part_d.assignment, bsc05, y, kernel=plan.kernel)
        assert np.array_equal(enc.probs, dec.probs)


def test_anytime_exact_monotone_and_validation(bsc05, bern):
    reqs = [(4, 6), (4, 12)]
    errs = {req: 0 for req in reqs}
    for i in range(400):
        res = codes.run_anytime_sed(bsc05, bern, 12, reqs, np.random.default_rng(i))
        for req, ok in res.items():
            errs[req] += not ok
    assert errs[(4, 12)] <= errs[(4, 6)]
    with pytest.raises(RequestBeforeArrival):
        codes.run_anytime_sed(bsc05, bern, 12, [(8, 4)], np.random.default_rng(0))


def test_ejs_examples(bsc05):
    val = codes.ejs_divergence([0.5, 0.5], [0, 1], bsc05)
    assert val == pytest.approx(bsc05.c1_nats, abs=1e-12)
    assert codes.ejs_divergence([0.3, 0.3, 0.4], [1, 1, 1], bsc05) == pytest.approx(0.0, abs=1e-15)
    with pytest.raises(DegenerateChannel):
        codes.ejs_divergence([0.5, 0.5], [0, 1], channel.bec(0.3))


def test_maxejs(bsc05):
    m = codes.maxejs_encoder_step([0.5, 0.5], bsc05)
    assert set(m) == {0, 1}
    assert list(codes.maxejs_encoder_step([1.0], bsc05)) == [0]
    m4 = codes.maxejs_encoder_step(np.full(4, 0.25), bsc05)
    assert codes.ejs_divergence(np.full(4, 0.25), m4, bsc05) >= bsc05.capacity_nats
    with pytest.raises(SearchSpaceTooLarge):
        codes.maxejs_encoder_step(np.full(20, 0.05), bsc05)


def test_reliability_curves(bsc05, bern):
    E, approx, buf = codes.reliability_curves(bsc05, bern, 16, 1e-6)
    assert approx == pytest.approx(0.579, abs=5e-4)
    C, C1, H = bsc05.capacity_nats, bsc05.c1_nats, bern.entropy_rate_nats
    assert E(C / H) == pytest.approx(0.0, abs=1e-12)
    assert E(1e-12) == pytest.approx(C1, abs=1e-9)
    assert buf < approx
    # with instant arrivals the buffering penalty vanishes
    sp_inf = source.all_at_once(2)
    assert codes.buffer_bound_rate(bsc05, sp_inf, 16, 1e-6) == pytest.approx(
        codes.approx_rate(bsc05, sp_inf, 16, 1e-6), abs=1e-15)
