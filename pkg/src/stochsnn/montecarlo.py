"""Seeded sampling of executions and empirical event probabilities.

Trials are simulated in fixed-size blocks, vectorized over the block.
Block ``b`` draws from its own stream ``SeedSequence(seed, spawn_key=(b,))``,
so a run is reproducible from the seed alone and any block can be
recomputed independently of the others.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from statistics import NormalDist

import numpy as np
from scipy.special import expit

from .engine import BehaviorFingerprint
from .model import EngineParams, Execution, InputExecution, ModelError, Network

BLOCK = 4096
FOUR_SIGMA = math.erf(4 / math.sqrt(2))  # two-sided coverage of +-4 sigma


@dataclass(frozen=True)
class TrialConfig:
    trials: int = 10_000
    horizon: int = 10
    seed: int = 0
    confidence: float = 0.95

    def __post_init__(self):
        if self.trials < 1:
            raise ModelError("need at least one trial")
        if self.horizon < 0:
            raise ModelError("horizon must be non-negative")
        if not 0.0 < self.confidence < 1.0:
            raise ModelError("confidence must be in (0, 1)")


@dataclass(frozen=True)
class Samples:
    """Sampled executions: ``data[trial, time, neuron]`` over ``names``."""

    names: tuple[str, ...]
    data: np.ndarray

    def __len__(self):
        return self.data.shape[0]

    def columns(self, names) -> np.ndarray:
        idx = [self.names.index(n) for n in names]
        return self.data[:, :, idx]

    def execution(self, i: int) -> Execution:
        return Execution.from_rows(self.names, self.data[i].tolist())


def _matrices(net: Network):
    names = net.names
    pos = {n: i for i, n in enumerate(names)}
    local = net.local
    W = np.zeros((len(names), len(local)))
    lpos = {n: j for j, n in enumerate(local)}
    for e in net.edges:
        W[pos[e.source], lpos[e.target]] = e.weight
    bias = np.array([net.bias(u) for u in local])
    return names, [pos[u] for u in local], [pos[x] for x in net.inputs], W, bias


def _stream(seed: int, block: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(block,))))


def sample_executions(net: Network, params: EngineParams, beta_in: InputExecution,
                      horizon: int, trials: int, seed: int = 0) -> Samples:
    if tuple(beta_in.names) != net.inputs:
        raise ModelError("input execution does not match the network's input neurons")
    if horizon < 0 or trials < 1:
        raise ModelError("need horizon >= 0 and trials >= 1")
    names, lc_idx, in_idx, W, bias = _matrices(net)
    rows = np.array(beta_in.rows(horizon), dtype=np.int8).reshape(horizon + 1, len(in_idx))
    f0 = net.f0
    init = np.array([f0[names[i]] for i in lc_idx], dtype=np.int8)
    out = np.zeros((trials, horizon + 1, len(names)), dtype=np.int8)
    out[:, :, in_idx] = rows[None, :, :]
    out[:, 0, lc_idx] = init
    for b, start in enumerate(range(0, trials, BLOCK)):
        stop = min(start + BLOCK, trials)
        rng = _stream(seed, b)
        blk = out[start:stop]
        for t in range(1, horizon + 1):
            p = expit((blk[:, t - 1, :] @ W - bias) / params.lam)
            blk[:, t, lc_idx] = rng.random(p.shape) < p
    return Samples(names, out)


def sample_execution(net: Network, params: EngineParams, beta_in: InputExecution,
                     horizon: int, seed: int = 0) -> Execution:
    return sample_executions(net, params, beta_in, horizon, 1, seed).execution(0)


@dataclass(frozen=True)
class EventEstimate:
    estimate: float
    ci_low: float
    ci_high: float
    successes: int
    trials: int
    confidence: float

    def contains(self, value: float) -> bool:
        return self.ci_low <= value <= self.ci_high

    def to_json(self) -> dict:
        return {"estimate": self.estimate, "ci_low": self.ci_low, "ci_high": self.ci_high,
                "successes": self.successes, "trials": self.trials,
                "confidence": self.confidence}


def proportion_interval(successes: int, trials: int, confidence: float) -> tuple[float, float]:
    """Normal-approximation interval widened by a continuity correction.

    All-success or all-failure samples give the degenerate interval at
    that point.
    """
    if trials < 1:
        raise ModelError("need at least one trial")
    p = successes / trials
    if successes in (0, trials):
        return p, p
    z = NormalDist().inv_cdf(0.5 + confidence / 2)
    half = z * math.sqrt(p * (1 - p) / trials) + 0.5 / trials
    return max(0.0, p - half), min(1.0, p + half)


def _unique_traces(samples: Samples, names):
    ext = samples.columns(names)
    n, steps, k = ext.shape
    flat = ext.reshape(n, steps * k)
    uniq, counts = np.unique(flat, axis=0, return_counts=True)
    return uniq.reshape(-1, steps, k), counts


def estimate_event(net: Network, params: EngineParams, beta_in: InputExecution,
                   predicate, cfg: TrialConfig) -> EventEstimate:
    """Fraction of sampled length-``cfg.horizon`` traces satisfying ``predicate``."""
    samples = sample_executions(net, params, beta_in, cfg.horizon, cfg.trials, cfg.seed)
    names = net.external
    uniq, counts = _unique_traces(samples, names)
    hits = 0
    for rows, c in zip(uniq, counts):
        if predicate(Execution.from_rows(names, rows.tolist())):
            hits += int(c)
    lo, hi = proportion_interval(hits, cfg.trials, cfg.confidence)
    return EventEstimate(hits / cfg.trials, lo, hi, hits, cfg.trials, cfg.confidence)


def empirical_fingerprint(net: Network, params: EngineParams, beta_in: InputExecution,
                          horizon: int, cfg: TrialConfig) -> BehaviorFingerprint:
    """Observed frequencies of every trace prefix up to ``horizon``."""
    samples = sample_executions(net, params, beta_in, horizon, cfg.trials, cfg.seed)
    names = net.external
    uniq, counts = _unique_traces(samples, names)
    entries: dict = {}
    for rows, c in zip(uniq, counts):
        key = tuple(tuple(int(v) for v in r) for r in rows)
        for t in range(1, horizon + 2):
            entries[key[:t]] = entries.get(key[:t], 0) + int(c)
    entries = {k: c / cfg.trials for k, c in entries.items()}
    return BehaviorFingerprint(names, horizon, entries, beta_in, params.lam, cfg.trials)


def total_variation(fp_a: BehaviorFingerprint, fp_b: BehaviorFingerprint, length: int) -> float:
    """Total variation distance between the length-``length`` trace distributions."""
    a, b = fp_a.at_length(length), fp_b.at_length(length)
    return 0.5 * sum(abs(a.get(k, 0.0) - b.get(k, 0.0)) for k in set(a) | set(b))
