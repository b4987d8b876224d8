"""Exhaustive enumeration of executions.

Independent check on the forward filter: every execution consistent with
the input execution, F0 and the observations is visited one at a time, and
its probability is the product of :func:`engine.transition_probability`
along it. Exponential in the number of unobserved neuron-steps; keep
networks tiny.
"""
from __future__ import annotations

import itertools

from .engine import execution_probability, transition_probability
from .model import EngineParams, Execution, FiringPattern, InputExecution, Network


def executions(net: Network, beta_in: InputExecution, length: int):
    """All executions of ``length`` steps consistent with ``beta_in`` and F0."""
    local = net.local
    first = dict(zip(beta_in.names, beta_in.row(0)))
    first.update(net.f0)
    inputs = [dict(zip(beta_in.names, beta_in.row(t))) for t in range(length + 1)]
    for combo in itertools.product(itertools.product((0, 1), repeat=len(local)), repeat=length):
        configs = [FiringPattern(first)]
        for t, bits in enumerate(combo, start=1):
            c = dict(inputs[t])
            c.update(zip(local, bits))
            configs.append(FiringPattern(c))
        yield Execution(configs)


def brute_cone_probability(net: Network, params: EngineParams, beta_in: InputExecution,
                           observations) -> float:
    """Sum of execution probabilities over every execution matching ``observations``."""
    obs = [dict(o) for o in observations]
    if not obs:
        return 1.0
    local = net.local
    horizon = len(obs) - 1
    for t, o in enumerate(obs):
        row = dict(zip(beta_in.names, beta_in.row(t)))
        if any(o[n] != v for n, v in row.items() if n in o):
            return 0.0
    first = dict(zip(beta_in.names, beta_in.row(0)))
    first.update(net.f0)
    if any(first[n] != v for n, v in obs[0].items()):
        return 0.0

    def choices(t):
        free = [u for u in local if u not in obs[t]]
        for bits in itertools.product((0, 1), repeat=len(free)):
            nxt = {u: obs[t][u] for u in local if u in obs[t]}
            nxt.update(zip(free, bits))
            yield nxt

    def walk(t, prev, prob):
        if t > horizon:
            return prob
        total = 0.0
        inputs = dict(zip(beta_in.names, beta_in.row(t)))
        for nxt in choices(t):
            q = transition_probability(net, params, prev, nxt)
            total += walk(t + 1, {**inputs, **nxt}, prob * q)
        return total

    return walk(1, first, 1.0)


def brute_trace_probability(net: Network, params: EngineParams, beta_in: InputExecution,
                            beta: Execution) -> float:
    return brute_cone_probability(net, params, beta_in, beta)


def brute_execution_sum(net: Network, params: EngineParams, beta_in: InputExecution,
                        beta: Execution) -> float:
    """The literal sum over ``executions`` whose trace is ``beta`` (slowest, simplest)."""
    ext = set(net.external)
    total = 0.0
    for alpha in executions(net, beta_in, beta.length):
        if all(alpha[t][n] == beta[t][n] for t in range(len(beta)) for n in ext):
            total += execution_probability(net, params, beta_in, alpha)
    return total
