"""Zero-error block protocol for degenerate channels.

Each block is a communication phase (random codebook, maximum-likelihood
decoding) followed by a confirmation phase: the encoder repeats ACK when the
fed-back estimate is right and NACK otherwise, where ACK can produce an
output that NACK never can.  The decoder commits only after seeing that
output, so a committed estimate is exact; wrong estimates trigger a fresh
block.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .channel import Dmc, DEGENERATE
from .errors import HorizonExceeded, InsufficientSamples, NotDegenerate
from .source import SourceSpec, arrival_time, sample_prefix


@dataclass(frozen=True)
class ZeroErrorConfig:
    k: int
    r1: float  # first-block communication rate, source symbols per use
    r2: float  # retransmission-block rate
    delta: float
    n_k: int
    ack: int
    nack: int
    y_star: int


@dataclass
class ZeroErrorTranscript:
    eta: int
    t_k: int
    retransmissions: int  # T_k
    correct: bool
    estimate: int
    # per-block communication-phase correctness, block 1 first
    block_comm_correct: list[bool] = field(default_factory=list)


def configure(dmc: Dmc, k: int, r1: float, r2: float, delta: float) -> ZeroErrorConfig:
    """Pick the confirmation triple (y*, ack, nack) with the largest
    P(y*|ack) among outputs some input can never produce."""
    if dmc.channel_class != DEGENERATE:
        raise NotDegenerate("the protocol needs an output forbidden for some input")
    y_star, ack, nack = dmc.degenerate_witness
    n_k = max(1, math.ceil(delta * k))
    return ZeroErrorConfig(k=k, r1=r1, r2=r2, delta=delta, n_k=n_k,
                           ack=ack, nack=nack, y_star=y_star)


def _random_codebook(dmc: Dmc, n_words: int, length: int,
                     rng: np.random.Generator) -> np.ndarray:
    return rng.choice(dmc.input_size, size=(n_words, length), p=dmc.cap_input_dist)


def _ml_decode(dmc: Dmc, codebook: np.ndarray, received: np.ndarray) -> int:
    with np.errstate(divide="ignore"):
        logp = np.log(dmc.transition)
    scores = logp[codebook, received[None, :]].sum(axis=1)
    return int(np.argmax(scores))


def run_zero_error(config: ZeroErrorConfig, dmc: Dmc, spec: SourceSpec,
                   rng: np.random.Generator, max_blocks: int = 1000,
                   estimate_override=None) -> ZeroErrorTranscript:
    """One trial of the block loop.  The codebooks are drawn from the shared
    rng, standing in for common randomness available to both ends.
    estimate_override (testing hook) replaces the decoder's communication
    phase output."""
    k, q = config.k, spec.q
    true_seq = sample_prefix(spec, k, rng)
    true_idx = 0
    for s in true_seq:
        true_idx = true_idx * q + int(s)
    t_k = arrival_time(spec, k)
    eta = t_k - 1  # buffering before the first block
    n_words = q ** k
    comm_correct: list[bool] = []
    for block in range(1, max_blocks + 1):
        rate = config.r1 if block == 1 else config.r2
        length = math.ceil(k / rate)
        codebook = _random_codebook(dmc, n_words, length, rng)
        received = dmc.sample_outputs(codebook[true_idx], rng)
        est = _ml_decode(dmc, codebook, received)
        if estimate_override is not None:
            est = estimate_override(block, est)
        comm_correct.append(est == true_idx)
        eta += length
        confirm_x = config.ack if est == true_idx else config.nack
        ys = dmc.sample_outputs(np.full(config.n_k, confirm_x), rng)
        eta += config.n_k
        if np.any(ys == config.y_star):
            # P(y*|nack) = 0, so reaching here certifies the estimate
            return ZeroErrorTranscript(eta=eta, t_k=t_k, retransmissions=block - 1,
                                       correct=est == true_idx, estimate=est,
                                       block_comm_correct=comm_correct)
    raise HorizonExceeded(f"no confirmation within {max_blocks} blocks")


@dataclass
class RetransmissionStats:
    p_positive: float           # P[T_k > 0]
    geom_p: float               # fitted success prob of T_k | T_k > 0
    mean_t: float
    chi2_stat: float | None
    chi2_pvalue: float | None
    mean_t_bound: float          # empirical ratio bound on E[T_k]
    bound_holds: bool
    mean_eta: float


def retransmission_distribution(transcripts: list[ZeroErrorTranscript],
                                dmc: Dmc, config: ZeroErrorConfig) -> RetransmissionStats:
    """Empirical law of the retransmission count: geometric fit of the
    positive part plus the ratio bound assembled from per-block statistics."""
    if len(transcripts) < 1000:
        raise InsufficientSamples("need at least 10^3 transcripts")
    t_k = np.array([tr.retransmissions for tr in transcripts])
    mean_t = float(t_k.mean())
    positive = t_k[t_k > 0]
    p_pos = len(positive) / len(t_k)

    chi2_stat = chi2_p = None
    geom_p = math.nan
    if len(positive) >= 30:
        geom_p = 1.0 / positive.mean()  # MLE on support {1, 2, ...}
        m = int(positive.max())
        counts = np.bincount(positive, minlength=m + 1)[1:]
        probs = geom_p * (1 - geom_p) ** np.arange(m)
        probs[-1] = (1 - geom_p) ** (m - 1)  # fold the tail into the last bin
        expected = probs * len(positive)
        # merge low-expectation bins upward for a valid chi-square
        obs_b, exp_b = [], []
        o_acc = e_acc = 0.0
        for o, e in zip(counts, expected):
            o_acc += o
            e_acc += e
            if e_acc >= 5:
                obs_b.append(o_acc)
                exp_b.append(e_acc)
                o_acc = e_acc = 0.0
        if o_acc or e_acc:
            if obs_b:
                obs_b[-1] += o_acc
                exp_b[-1] += e_acc
            else:
                obs_b, exp_b = [o_acc], [e_acc]
        # one parameter estimated, so a meaningful test needs >= 3 bins
        if len(obs_b) >= 3:
            exp_arr = np.array(exp_b) * (sum(obs_b) / sum(exp_b))
            chi2_stat, chi2_p = stats.chisquare(obs_b, exp_arr, ddof=1)
            chi2_stat, chi2_p = float(chi2_stat), float(chi2_p)

    err1 = np.mean([not tr.block_comm_correct[0] for tr in transcripts])
    later = [c for tr in transcripts for c in tr.block_comm_correct[1:]]
    errl = float(np.mean([not c for c in later])) if later else 0.0
    miss = (1.0 - dmc.transition[config.ack, config.y_star]) ** config.n_k
    denom = 1.0 - errl - miss
    bound = (err1 + miss) / denom if denom > 0 else math.inf
    mean_eta = float(np.mean([tr.eta for tr in transcripts]))
    return RetransmissionStats(
        p_positive=p_pos, geom_p=float(geom_p), mean_t=mean_t,
        chi2_stat=chi2_stat, chi2_pvalue=chi2_p,
        mean_t_bound=float(bound), bound_holds=mean_t <= bound,
        mean_eta=mean_eta,
    )
