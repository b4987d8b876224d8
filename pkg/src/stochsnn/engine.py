"""Exact cone probabilities of finite executions and traces.

Two routes are provided and kept deliberately separate:

* :func:`execution_probability` multiplies per-neuron sigmoid
  probabilities along a fully specified execution, exactly as the model
  defines the cone measure.
* Everything else runs a forward filter over configurations of the
  locally controlled neurons. Observations may fix any subset of neurons
  at any time; unobserved neurons are summed out. The state space is
  ``2**len(net.local)`` per step rather than exponential in the horizon.

Traces are enumerated in binary-counting order over the canonically
ordered output neurons, so fingerprints serialize deterministically.
"""
from __future__ import annotations

import json
from collections.abc import Callable, Iterator, Mapping, Sequence
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.special import expit

from .model import (
    EngineParams,
    Execution,
    FiringPattern,
    InconsistentExecutionError,
    InputExecution,
    ModelError,
    Network,
    firing_probability,
    potential,
)

Key = tuple  # tuple of rows, each a tuple of 0/1 in canonical neuron order

# upper bound on floats held by one expansion batch before splitting
_BATCH_FLOATS = 1 << 22


# ---------------------------------------------------------------------------
# direct route


def transition_probability(net: Network, params: EngineParams, prev: Mapping[str, int],
                           next_lc: Mapping[str, int]) -> float:
    """Probability of moving to ``next_lc`` (over the lc neurons) from ``prev``."""
    if set(prev) != set(net.names):
        raise ModelError("previous configuration must cover every neuron")
    if set(next_lc) != set(net.local):
        raise ModelError("next pattern must cover exactly the non-input neurons")
    q = 1.0
    for u in net.local:
        p = firing_probability(potential(net, prev, u), params)
        q *= p if next_lc[u] else 1.0 - p
    return q


def _check_against_input(net: Network, beta_in: InputExecution, rows_by_time, what: str):
    if tuple(beta_in.names) != net.inputs:
        raise ModelError("input execution does not match the network's input neurons")
    for t, pattern in enumerate(rows_by_time):
        row = beta_in.row(t)
        for name, bit in zip(beta_in.names, row):
            if name in pattern and pattern[name] != bit:
                raise InconsistentExecutionError(
                    f"{what} disagrees with the input execution at time {t} on {name!r}")


def execution_probability(net: Network, params: EngineParams, beta_in: InputExecution,
                          alpha: Execution) -> float:
    """P(A(alpha)) for an execution over all neurons, by the recursive product."""
    if set(alpha.domain) != set(net.names):
        raise ModelError("an execution must cover every neuron of the network")
    _check_against_input(net, beta_in, alpha, "execution")
    f0 = net.f0
    for name in f0:
        if alpha[0][name] != f0[name]:
            raise InconsistentExecutionError(f"execution starts with {name!r} off F0")
    prob = 1.0
    for t in range(1, len(alpha)):
        nxt = {u: alpha[t][u] for u in net.local}
        prob *= transition_probability(net, params, alpha[t - 1], nxt)
    return prob


def conditional_probability(p_num: float, p_den: float) -> float:
    """Ratio of nested cone probabilities."""
    if p_den <= 0:
        raise ZeroDivisionError("conditioning on a zero-probability cone")
    return p_num / p_den


# ---------------------------------------------------------------------------
# compiled filter route


class _Compiled:
    """Matrix form of a network at a fixed temperature."""

    def __init__(self, net: Network, lam: float):
        self.net = net
        self.lam = lam
        self.inputs = net.inputs
        self.local = net.local
        self.outputs = net.outputs
        self.internals = net.internals
        self.external = net.external
        k = len(self.local)
        self.k = k
        self.n_states = 1 << k
        lidx = {n: j for j, n in enumerate(self.local)}
        iidx = {n: j for j, n in enumerate(self.inputs)}
        self.w_in = np.zeros((len(self.inputs), k))
        self.w_lc = np.zeros((k, k))
        for e in net.edges:
            j = lidx[e.target]
            if e.source in iidx:
                self.w_in[iidx[e.source], j] += e.weight
            else:
                self.w_lc[lidx[e.source], j] += e.weight
        self.bias = np.array([net.bias(u) for u in self.local], dtype=float)
        # state s has bit j set iff local neuron j fires; neuron 0 is most significant
        shifts = np.arange(k - 1, -1, -1)
        self.bits = ((np.arange(self.n_states)[:, None] >> shifts) & 1).astype(np.int8)
        self.s0 = self.state_index(net.f0)
        out_pos = [lidx[n] for n in self.outputs]
        self.out_pos = out_pos
        self.int_pos = [lidx[n] for n in self.internals]
        # output code of each state, binary counting over canonically ordered outputs
        oshift = np.arange(len(out_pos) - 1, -1, -1)
        self.out_code = (self.bits[:, out_pos].astype(np.int64) << oshift).sum(axis=1) \
            if out_pos else np.zeros(self.n_states, dtype=np.int64)
        self.n_out_codes = 1 << len(out_pos)
        self._trans: dict = {}

    def state_index(self, pattern: Mapping[str, int]) -> int:
        s = 0
        for u in self.local:
            s = (s << 1) | int(pattern[u])
        return s

    def transition(self, in_row: tuple) -> np.ndarray:
        """Row-stochastic matrix over lc states given the previous input row."""
        t = self._trans.get(in_row)
        if t is None:
            drive = np.asarray(in_row, dtype=float) @ self.w_in if self.inputs else 0.0
            pot = self.bits @ self.w_lc + drive - self.bias
            p = expit(pot / self.lam)  # (S, k)
            b = self.bits[None, :, :].astype(bool)
            t = np.where(b, p[:, None, :], 1.0 - p[:, None, :]).prod(axis=2)
            self._trans[in_row] = t
        return t

    def mask(self, constraint: Mapping[str, int]) -> np.ndarray | None:
        """States agreeing with ``constraint`` on the lc neurons it mentions."""
        ok = None
        for j, u in enumerate(self.local):
            if u in constraint:
                m = self.bits[:, j] == constraint[u]
                ok = m if ok is None else ok & m
        return ok


@lru_cache(maxsize=512)
def _compile(net: Network, lam: float) -> _Compiled:
    return _Compiled(net, lam)


def compiled(net: Network, params: EngineParams) -> _Compiled:
    return _compile(net, params.lam)


def _normalize_observations(net, observations) -> list[dict]:
    obs = [dict(o) for o in observations]
    for o in obs:
        for name in o:
            if name not in net:
                raise ModelError(f"observation names unknown neuron {name!r}")
    return obs


def _filter(comp: _Compiled, beta_in: InputExecution, obs: Sequence[Mapping[str, int]]):
    """Yield the unnormalised mass vector after each observed step; stop early if impossible."""
    inputs = comp.inputs
    for t, o in enumerate(obs):
        row = beta_in.row(t)
        for name, bit in zip(inputs, row):
            if name in o and o[name] != bit:
                return
        if t == 0:
            m = comp.mask(o)
            if m is not None and not m[comp.s0]:
                return
            mass = np.zeros(comp.n_states)
            mass[comp.s0] = 1.0
        else:
            mass = mass @ comp.transition(beta_in.row(t - 1))
            m = comp.mask(o)
            if m is not None:
                mass = mass * m
        yield mass


def cone_probability(net: Network, params: EngineParams, beta_in: InputExecution,
                     observations) -> float:
    """P(A(gamma)) where ``gamma`` fixes any neurons at any times.

    ``observations`` is an :class:`Execution` over some subset of the
    neurons, or a sequence of (possibly empty, possibly differing) partial
    patterns, one per time step starting at 0. Observations that contradict
    the input execution or F0 have probability 0.
    """
    obs = _normalize_observations(net, observations)
    if tuple(beta_in.names) != net.inputs:
        raise ModelError("input execution does not match the network's input neurons")
    if not obs:
        return 1.0
    comp = compiled(net, params)
    mass = None
    n = 0
    for n, mass in enumerate(_filter(comp, beta_in, obs), start=1):
        pass
    if mass is None or n < len(obs):
        return 0.0
    return float(mass.sum())


def merge_observations(*gammas) -> list[dict] | None:
    """Observation sequence of the intersection of cones, or None if disjoint."""
    length = max(len(g) for g in gammas)
    merged = [dict() for _ in range(length)]
    for g in gammas:
        for t, pattern in enumerate(g):
            slot = merged[t]
            for name, bit in dict(pattern).items():
                if slot.setdefault(name, bit) != bit:
                    return None
    return merged


def conditional(net: Network, params: EngineParams, beta_in: InputExecution, event,
                given) -> float:
    """P(A(event) | A(given)) for arbitrary partial observations."""
    both = merge_observations(event, given)
    den = cone_probability(net, params, beta_in, given)
    if both is None:
        return 0.0
    return conditional_probability(cone_probability(net, params, beta_in, both), den)


@dataclass(frozen=True)
class TraceDistribution:
    """Filter state after observing a trace prefix.

    ``mass`` maps each internal firing pattern to the summed probability of
    the executions with that final internal state; ``total`` is the cone
    probability of the prefix observed so far.
    """

    step: int
    mass: dict
    total: float


def _check_trace(net: Network, beta_in: InputExecution, beta: Execution):
    if set(beta.domain) != set(net.external):
        raise ModelError("a trace must cover exactly the external neurons")
    _check_against_input(net, beta_in, beta, "trace")
    f0 = net.f0
    for name in net.outputs:
        if beta[0][name] != f0[name]:
            raise InconsistentExecutionError(f"trace starts with {name!r} off F0")


def forward_filter(net: Network, params: EngineParams, beta_in: InputExecution,
                   beta: Execution) -> list[TraceDistribution]:
    """Filter states for every prefix of the trace ``beta``."""
    _check_trace(net, beta_in, beta)
    comp = compiled(net, params)
    out = []
    for t, mass in enumerate(_filter(comp, beta_in, list(beta))):
        grouped: dict = {}
        for s in np.flatnonzero(mass):
            key = FiringPattern.from_bits(comp.internals, tuple(int(b) for b in comp.bits[s, comp.int_pos]))
            grouped[key] = grouped.get(key, 0.0) + float(mass[s])
        out.append(TraceDistribution(t, grouped, float(mass.sum())))
    return out


def trace_probability(net: Network, params: EngineParams, beta_in: InputExecution,
                      beta: Execution) -> float:
    """P(A(beta)) for a trace, summing over all executions with that trace."""
    _check_trace(net, beta_in, beta)
    return cone_probability(net, params, beta_in, beta)


# ---------------------------------------------------------------------------
# trace enumeration


def _expand(comp: _Compiled, beta_in: InputExecution, horizon: int,
            keep_levels: bool) -> Iterator[tuple[int, int, np.ndarray]]:
    """Yield ``(level, first_index, probs)`` blocks of trace probabilities.

    Traces of length ``level`` are indexed in mixed radix: the digit for
    time ``t`` (1..level) is the output code at ``t``. Blocks cover
    contiguous index ranges; with ``keep_levels`` every level is reported,
    otherwise only the final one.
    """
    n_codes = comp.n_out_codes
    code_mask = (comp.out_code[None, :] == np.arange(n_codes)[:, None]).astype(float)

    def visit(mass, level, base):
        if keep_levels or level == horizon:
            yield level, base, mass.sum(axis=1)
        if level == horizon:
            return
        step = mass @ comp.transition(beta_in.row(level))
        n = mass.shape[0]
        chunk = max(1, _BATCH_FLOATS // (n_codes * comp.n_states))
        for a in range(0, n, chunk):
            part = step[a:a + chunk]
            children = (part[:, None, :] * code_mask[None, :, :]).reshape(-1, comp.n_states)
            yield from visit(children, level + 1, (base + a) * n_codes)

    start = np.zeros((1, comp.n_states))
    start[0, comp.s0] = 1.0
    yield from visit(start, 0, 0)


class _TraceDecoder:
    """Turns mixed-radix trace indices into rows / executions."""

    def __init__(self, comp: _Compiled, beta_in: InputExecution, horizon: int):
        self.comp = comp
        self.names = comp.external
        n_out = len(comp.outputs)
        pos_in = [self.names.index(n) for n in comp.inputs]
        pos_out = [self.names.index(n) for n in comp.outputs]
        self.n_codes = comp.n_out_codes
        f0 = comp.net.f0
        code0 = 0
        for n in comp.outputs:
            code0 = (code0 << 1) | f0[n]
        self.code0 = code0
        self.rows = []
        self.patterns = []
        for t in range(horizon + 1):
            in_row = beta_in.row(t)
            rows_t, pats_t = [], []
            for code in range(self.n_codes):
                row = [0] * len(self.names)
                for i, p in enumerate(pos_in):
                    row[p] = in_row[i]
                for i, p in enumerate(pos_out):
                    row[p] = (code >> (n_out - 1 - i)) & 1
                row = tuple(row)
                rows_t.append(row)
                pats_t.append(FiringPattern.from_bits(self.names, row))
            self.rows.append(rows_t)
            self.patterns.append(pats_t)

    def codes(self, index: int, level: int) -> list[int]:
        digits = []
        for _ in range(level):
            index, d = divmod(index, self.n_codes)
            digits.append(d)
        digits.append(self.code0)
        return digits[::-1]

    def key(self, index: int, level: int) -> Key:
        return tuple(self.rows[t][c] for t, c in enumerate(self.codes(index, level)))

    def execution(self, index: int, level: int) -> Execution:
        return Execution._trusted(
            tuple(self.patterns[t][c] for t, c in enumerate(self.codes(index, level))))


def traces(net: Network, params: EngineParams, beta_in: InputExecution,
           horizon: int) -> Iterator[tuple[Execution, float]]:
    """All length-``horizon`` traces consistent with ``beta_in`` and their probabilities."""
    if horizon < 0:
        raise ModelError("horizon must be non-negative")
    comp = compiled(net, params)
    dec = _TraceDecoder(comp, beta_in, horizon)
    for level, base, probs in _expand(comp, beta_in, horizon, keep_levels=False):
        for i, p in enumerate(probs):
            yield dec.execution(base + i, level), float(p)


def event_probability(net: Network, params: EngineParams, beta_in: InputExecution,
                      horizon: int, predicate: Callable[[Execution], bool]) -> float:
    """Total probability of the length-``horizon`` traces satisfying ``predicate``."""
    if horizon < 0:
        raise ModelError("horizon must be non-negative")
    if tuple(beta_in.names) != net.inputs:
        raise ModelError("input execution does not match the network's input neurons")
    comp = compiled(net, params)
    dec = _TraceDecoder(comp, beta_in, horizon)
    hits = []
    for level, base, probs in _expand(comp, beta_in, horizon, keep_levels=False):
        sel = [p for i, p in enumerate(probs) if predicate(dec.execution(base + i, level))]
        hits.append(np.sum(sel) if sel else 0.0)
    return float(np.sum(hits))


# ---------------------------------------------------------------------------
# behaviour fingerprints


def key_of(trace: Execution, names: Sequence[str]) -> Key:
    if tuple(trace.domain) != tuple(names):
        raise ModelError("trace domain does not match the fingerprint's neurons")
    return trace.rows()


def key_to_str(key: Key) -> str:
    return "|".join("".join(map(str, row)) for row in key)


def key_from_str(text: str) -> Key:
    return tuple(tuple(int(c) for c in part) for part in text.split("|"))


def project_key(key: Key, names: Sequence[str], keep: Sequence[str]) -> Key:
    idx = [names.index(n) for n in keep]
    return tuple(tuple(row[i] for i in idx) for row in key)


@dataclass
class BehaviorFingerprint:
    """Cone probabilities of every finite trace up to ``horizon``.

    ``entries`` maps trace keys (tuples of rows over ``names``) to
    probabilities. Exact fingerprints list every consistent trace;
    empirical ones list observed traces only.
    """

    names: tuple[str, ...]
    horizon: int
    entries: dict
    input: InputExecution | None = None
    lam: float | None = None
    trials: int | None = None
    _children: dict | None = field(default=None, repr=False, compare=False)

    @property
    def empirical(self) -> bool:
        return self.trials is not None

    def prob(self, trace) -> float:
        key = key_of(trace, self.names) if isinstance(trace, Execution) else trace
        return self.entries.get(key, 0.0)

    __getitem__ = prob

    def at_length(self, t: int) -> dict:
        return {k: p for k, p in self.entries.items() if len(k) == t + 1}

    def children(self, key: Key) -> list:
        if self._children is None:
            ch: dict = {}
            for k in self.entries:
                if len(k) > 1:
                    ch.setdefault(k[:-1], []).append(k)
            self._children = ch
        return self._children.get(key, [])

    def conditional(self, key: Key) -> float:
        """P(A(beta) | A(beta')) for a key of length >= 1."""
        return conditional_probability(self.entries.get(key, 0.0), self.entries[key[:-1]])

    def marginal(self, keep: Sequence[str]) -> "BehaviorFingerprint":
        """Fingerprint of the projection onto ``keep``."""
        keep = tuple(sorted(keep))
        out: dict = {}
        for k, p in self.entries.items():
            pk = project_key(k, self.names, keep)
            out[pk] = out.get(pk, 0.0) + p
        inp = self.input.restrict([n for n in self.input.names if n in keep]) if self.input else None
        return BehaviorFingerprint(keep, self.horizon, out, inp, self.lam, self.trials)

    def max_additivity_error(self) -> float:
        """Largest |P(beta) - sum of its one-step extensions| over the support."""
        worst = 0.0
        for k, p in self.entries.items():
            if len(k) - 1 < self.horizon:
                s = sum(self.entries[c] for c in self.children(k))
                worst = max(worst, abs(p - s))
        return worst

    def to_json(self) -> dict:
        return {
            "horizon": self.horizon,
            "lambda": self.lam,
            "neurons": list(self.names),
            "input": None if self.input is None else {
                "inputs": list(self.input.names),
                "prefix": [list(r) for r in self.input.prefix],
                "extension": self.input.extension,
            },
            "trials": self.trials,
            "entries": {key_to_str(k): p for k, p in sorted(self.entries.items(),
                                                             key=lambda kv: (len(kv[0]), kv[0]))},
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True)


@dataclass
class Beh2Fingerprint:
    """One-step conditional probabilities P(A(beta) | A(beta')) up to ``horizon``."""

    names: tuple[str, ...]
    horizon: int
    entries: dict
    input: InputExecution | None = None
    lam: float | None = None

    def __getitem__(self, key: Key) -> float:
        return self.entries[key]


def behavior(net: Network, params: EngineParams, beta_in: InputExecution,
             horizon: int) -> BehaviorFingerprint:
    """Exact cone probabilities of all consistent traces of length <= horizon."""
    if horizon < 0:
        raise ModelError("horizon must be non-negative")
    if tuple(beta_in.names) != net.inputs:
        raise ModelError("input execution does not match the network's input neurons")
    comp = compiled(net, params)
    dec = _TraceDecoder(comp, beta_in, horizon)
    entries = {}
    for level, base, probs in _expand(comp, beta_in, horizon, keep_levels=True):
        for i, p in enumerate(probs):
            entries[dec.key(base + i, level)] = float(p)
    return BehaviorFingerprint(comp.external, horizon, entries, beta_in, params.lam)


def beh2_from_behavior(fp: BehaviorFingerprint) -> Beh2Fingerprint:
    entries = {k: fp.conditional(k) for k in fp.entries if len(k) > 1}
    return Beh2Fingerprint(fp.names, fp.horizon, entries, fp.input, fp.lam)


def behavior_from_beh2(fp2: Beh2Fingerprint, root: Key) -> BehaviorFingerprint:
    """Rebuild cone probabilities by multiplying conditionals along each trace."""
    entries = {root: 1.0}
    for k in sorted(fp2.entries, key=len):
        entries[k] = entries[k[:-1]] * fp2.entries[k]
    return BehaviorFingerprint(fp2.names, fp2.horizon, entries, fp2.input, fp2.lam)


def behavior2(net: Network, params: EngineParams, beta_in: InputExecution,
              horizon: int) -> Beh2Fingerprint:
    """One-step conditional trace probabilities for lengths 1..horizon."""
    if horizon < 1:
        raise ModelError("Beh2 needs a horizon of at least 1")
    return beh2_from_behavior(behavior(net, params, beta_in, horizon))


def initial_trace(net: Network, beta_in: InputExecution) -> Execution:
    """The single length-0 trace with nonzero probability."""
    f0 = net.f0
    pattern = dict(zip(beta_in.names, beta_in.row(0)))
    pattern.update({n: f0[n] for n in net.outputs})
    return Execution([pattern])
