"""Problems as acceptance conditions on finite-horizon trace distributions.

A :class:`Problem` names its input and output neurons and carries an
``accept`` function mapping a :class:`Result` to a list of :class:`Check`
records (an empty list means the input is unconstrained). Singleton
problems also carry a ``generator`` that produces the one allowed
fingerprint for a given input execution; composition and hiding of such
problems are then computed exactly.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable

from .compose import derive_component_input
from .engine import BehaviorFingerprint, behavior
from .model import EngineParams, Execution, InputExecution, ModelError, Network
from .montecarlo import FOUR_SIGMA, TrialConfig, empirical_fingerprint, proportion_interval

SLACK = 1e-12
FINGERPRINT_TOL = 1e-9
MIN_SUPPORT = 100


class InterfaceError(ModelError):
    pass


@dataclass(frozen=True)
class Result:
    input: InputExecution | None
    dist: BehaviorFingerprint
    confidence: float = FOUR_SIGMA


@dataclass
class Check:
    label: str
    required: float
    achieved: float
    passed: bool
    ci_low: float | None = None
    ci_high: float | None = None
    input: InputExecution | None = None

    def to_json(self) -> dict:
        out = {"check": self.label, "required_bound": self.required, "achieved": self.achieved,
               "pass": self.passed}
        if self.ci_low is not None:
            out["ci_low"] = self.ci_low
            out["ci_high"] = self.ci_high
        if self.input is not None:
            out["input"] = {"inputs": list(self.input.names),
                            "prefix": [list(r) for r in self.input.prefix],
                            "extension": self.input.extension}
        return out


@dataclass
class Verdict:
    solved: bool
    witness: list = field(default_factory=list)

    def to_json(self) -> dict:
        return {"solved": self.solved, "witness": [c.to_json() for c in self.witness]}


@dataclass
class Problem:
    inputs: tuple
    outputs: tuple
    accept: Callable[[Result], list]
    generator: Callable[[InputExecution, int], BehaviorFingerprint] | None = None
    hide_hook: Callable[[frozenset], "Problem"] | None = None
    name: str = "problem"

    def __post_init__(self):
        self.inputs = tuple(sorted(self.inputs))
        self.outputs = tuple(sorted(self.outputs))
        if set(self.inputs) & set(self.outputs):
            raise ModelError("a problem's input and output neurons must be disjoint")

    @property
    def external(self) -> tuple:
        return tuple(sorted(self.inputs + self.outputs))


# ---------------------------------------------------------------------------
# helpers for predicates over fingerprints


def _executions_at(fp: BehaviorFingerprint, t: int):
    for key, p in fp.at_length(t).items():
        yield Execution.from_rows(fp.names, key), p


def bound_check(label, result: Result, achieved: float, required: float) -> Check:
    """Exact: achieved >= required (up to float slack).

    Empirical: the lower end of the interval must clear the bound.
    """
    fp = result.dist
    if not fp.empirical:
        return Check(label, required, achieved, achieved >= required - SLACK, input=result.input)
    hits = round(achieved * fp.trials)
    lo, hi = proportion_interval(hits, fp.trials, result.confidence)
    return Check(label, required, achieved, lo >= required, lo, hi, result.input)


def event_mass(fp: BehaviorFingerprint, horizon: int, predicate) -> float:
    if fp.horizon < horizon:
        raise ModelError(f"result horizon {fp.horizon} is shorter than the needed {horizon}")
    return math.fsum(p for ex, p in _executions_at(fp, horizon) if predicate(ex))


def _stable_firing(beta_in: InputExecution | None, names) -> dict | None:
    """The held input pattern over ``names`` if it is stable with a firing neuron."""
    if beta_in is None:
        return None
    sub = beta_in.restrict(names)
    if not sub.is_stable():
        return None
    pattern = dict(zip(sub.names, sub.row(0)))
    return pattern if any(pattern.values()) else None


# ---------------------------------------------------------------------------
# named problems


def wta_event(n: int, t_c: int, t_s: int, firing_inputs):
    """Some t <= t_c opens a run of t_s steps with one steady y_i, x_i firing."""
    ys = [f"y{i}" for i in range(1, n + 1)]
    allowed = {f"y{i}" for i in range(1, n + 1) if firing_inputs.get(f"x{i}")}

    def pred(ex: Execution) -> bool:
        for t in range(0, t_c + 1):
            on = [y for y in ys if ex[t][y]]
            if len(on) != 1 or on[0] not in allowed:
                continue
            win = on[0]
            if all(ex[s][win] and sum(ex[s][y] for y in ys) == 1 for s in range(t, t + t_s)):
                return True
        return False

    return pred


def wta_problem(n: int, delta: float, t_c: int, t_s: int) -> Problem:
    if n < 1 or t_s < 1 or t_c < 0 or not 0 < delta < 1:
        raise ModelError("WTA problem needs n >= 1, t_c >= 0, t_s >= 1, 0 < delta < 1")
    xs = [f"x{i}" for i in range(1, n + 1)]
    horizon = t_c + t_s - 1

    def accept(result: Result) -> list:
        pattern = _stable_firing(result.input, xs)
        if pattern is None:
            return []
        achieved = event_mass(result.dist, horizon, wta_event(n, t_c, t_s, pattern))
        return [bound_check("wta-convergence", result, achieved, 1 - delta)]

    return Problem(xs, [f"y{i}" for i in range(1, n + 1)], accept, name=f"wta({n})")


def filter_checks(n: int, delta: float, result: Result, min_support=MIN_SUPPORT) -> list:
    """Worst one-step conditional of correct z outputs over all prefixes."""
    fp = result.dist
    required = (1 - delta) ** n
    names = fp.names
    w_idx = [names.index(f"w{i}") for i in range(1, n + 1)]
    y_idx = [names.index(f"y{i}") for i in range(1, n + 1)]
    z_idx = [names.index(f"z{i}") for i in range(1, n + 1)]
    worst = None
    for t in range(1, fp.horizon + 1):
        for parent, p_parent in fp.at_length(t - 1).items():
            if p_parent <= 0:
                continue
            last = parent[-1]
            want = tuple(last[w] & last[y] for w, y in zip(w_idx, y_idx))
            good = math.fsum(fp.entries[c] for c in fp.children(parent)
                             if tuple(c[-1][z] for z in z_idx) == want)
            if fp.empirical:
                support = round(p_parent * fp.trials)
                if support < min_support:
                    continue
                hits = round(good * fp.trials)
                lo, hi = proportion_interval(hits, support, result.confidence)
                c = Check("filter-step", required, hits / support, hi >= required, lo, hi,
                          result.input)
            else:
                a = good / p_parent
                c = Check("filter-step", required, a, a >= required - SLACK, input=result.input)
            if worst is None or (not c.passed and worst.passed) or (
                    c.passed == worst.passed and c.achieved < worst.achieved):
                worst = c
    return [worst] if worst is not None else []


def filter_problem(n: int, delta: float) -> Problem:
    if n < 1 or not 0 < delta < 1:
        raise ModelError("Filter problem needs n >= 1 and 0 < delta < 1")
    ins = [f"w{i}" for i in range(1, n + 1)] + [f"y{i}" for i in range(1, n + 1)]
    return Problem(ins, [f"z{i}" for i in range(1, n + 1)],
                   lambda r: filter_checks(n, delta, r), name=f"filter({n})")


def mirror_event(n: int, t_c: int, t_s: int, firing_inputs):
    """Some t <= t_c opens t_s steps where z_i copies w_i one step late and other z stay silent."""
    allowed = [i for i in range(1, n + 1) if firing_inputs.get(f"x{i}")]

    def pred(ex: Execution) -> bool:
        for t in range(0, t_c + 1):
            for i in allowed:
                if all(ex[s + 1][f"z{j}"] == (ex[s][f"w{i}"] if j == i else 0)
                       for s in range(t, t + t_s) for j in range(1, n + 1)):
                    return True
        return False

    return pred


def attention_split_ok(delta, t_s, delta1, delta2) -> bool:
    return abs((1 - delta) - (1 - delta1) * (1 - delta2) ** t_s) <= 1e-12


def hidden_attention_problem(n: int, delta: float, t_c: int, t_s: int) -> Problem:
    xs = [f"x{i}" for i in range(1, n + 1)]
    ins = xs + [f"w{i}" for i in range(1, n + 1)]
    horizon = t_c + t_s

    def accept(result: Result) -> list:
        pattern = _stable_firing(result.input, xs)
        if pattern is None:
            return []
        achieved = event_mass(result.dist, horizon, mirror_event(n, t_c, t_s, pattern))
        return [bound_check("attention-mirror", result, achieved, 1 - delta)]

    return Problem(ins, [f"z{i}" for i in range(1, n + 1)], accept,
                   name=f"hide(attention({n}))")


def attention_problem(n: int, delta: float, t_c: int, t_s: int, split) -> Problem:
    delta1, delta2 = split
    if not attention_split_ok(delta, t_s, delta1, delta2):
        raise ModelError("inconsistent split: need (1-delta) = (1-delta1)(1-delta2)^t_s")
    prob = problem_compose(wta_problem(n, delta1, t_c, t_s), filter_problem(n, delta2))
    ys = frozenset(f"y{i}" for i in range(1, n + 1))

    def hook(V):
        if V == ys:
            return hidden_attention_problem(n, delta, t_c, t_s)
        raise ModelError("only hiding all y outputs is supported for Attention")

    prob.hide_hook = hook
    prob.name = f"attention({n})"
    return prob


def copy_problem(delta: float, x="x", y="y") -> Problem:
    """One-step copy: y at t equals x at t-1 with conditional probability >= 1 - delta."""

    def accept(result: Result) -> list:
        fp = result.dist
        ix, iy = fp.names.index(x), fp.names.index(y)
        worst = None
        for t in range(1, fp.horizon + 1):
            for parent, pp in fp.at_length(t - 1).items():
                good = math.fsum(fp.entries[c] for c in fp.children(parent)
                                 if c[-1][iy] == parent[-1][ix])
                c = bound_check("copy-step", result, good / pp, 1 - delta)
                if worst is None or c.achieved < worst.achieved:
                    worst = c
        return [worst] if worst else []

    return Problem([x], [y], accept, name="copy")


# ---------------------------------------------------------------------------
# singleton problems and exact composition


def fingerprint_distance(a: BehaviorFingerprint, b: BehaviorFingerprint) -> float:
    if tuple(a.names) != tuple(b.names):
        return math.inf
    return max((abs(a.entries.get(k, 0.0) - b.entries.get(k, 0.0))
                for k in set(a.entries) | set(b.entries)), default=0.0)


def _equality_accept(generator):
    def accept(result: Result) -> list:
        if result.input is None:
            return []
        want = generator(result.input, result.dist.horizon)
        d = fingerprint_distance(want, result.dist)
        return [Check("fingerprint-equality", FINGERPRINT_TOL, d, d <= FINGERPRINT_TOL,
                      input=result.input)]
    return accept


def singleton_problem(net: Network, params: EngineParams) -> Problem:
    """The problem whose only possibility is the network's own behaviour."""

    def gen(beta_in: InputExecution, horizon: int) -> BehaviorFingerprint:
        return behavior(net, params, beta_in, horizon)

    return Problem(net.inputs, net.outputs, _equality_accept(gen), gen, name="singleton")


class _Stub:
    """Just enough of a network for :func:`derive_component_input`."""

    def __init__(self, prob: Problem):
        self.inputs = prob.inputs
        self.outputs = prob.outputs


def _composed_generator(r1: Problem, r2: Problem, inputs, outputs):
    s1, s2 = _Stub(r1), _Stub(r2)
    ext = tuple(sorted(inputs + outputs))

    def gen(beta_in: InputExecution, horizon: int) -> BehaviorFingerprint:
        cache: dict = {}

        def comp_fp(j, b_in, t):
            key = (j, b_in, t)
            if key not in cache:
                cache[key] = (r1 if j == 1 else r2).generator(b_in, t)
            return cache[key]

        def step_factor(j, prev: Execution, row: dict, t: int) -> float:
            prob = r1 if j == 1 else r2
            b_in = derive_component_input(s1, s2, beta_in, prev, j, t).derived_input
            fp = comp_fp(j, b_in, t)
            names = fp.names
            prev_key = tuple(tuple(prev[s][n] for n in names) for s in range(t))
            last = dict(zip(b_in.names, b_in.row(t)))
            last.update({n: row[n] for n in prob.outputs})
            key = prev_key + (tuple(last[n] for n in names),)
            den = fp.entries.get(prev_key, 0.0)
            return fp.entries.get(key, 0.0) / den if den > 0 else 0.0

        init = {}
        init.update(zip(beta_in.names, beta_in.row(0)))
        for j, prob in ((1, r1), (2, r2)):
            # outputs at time 0 do not depend on the inputs, so zeros stand in
            blank = Execution([{n: 0 for n in ext}])
            b_in = derive_component_input(s1, s2, beta_in, blank, j, 0).derived_input
            fp0 = comp_fp(j, b_in, 0)
            (k0,) = fp0.at_length(0)
            init.update({n: v for n, v in zip(fp0.names, k0[0]) if n in prob.outputs})
        root = Execution([{n: init[n] for n in ext}])
        entries = {root.rows(): 1.0}
        frontier = [(root, 1.0)]
        outs = tuple(sorted(outputs))
        for t in range(1, horizon + 1):
            nxt = []
            in_row = dict(zip(beta_in.names, beta_in.row(t)))
            for prev, p_prev in frontier:
                for bits in itertools.product((0, 1), repeat=len(outs)):
                    row = dict(in_row)
                    row.update(zip(outs, bits))
                    f = step_factor(1, prev, row, t) * step_factor(2, prev, row, t)
                    if f <= 0:
                        continue
                    ex = prev.extend({n: row[n] for n in ext})
                    entries[ex.rows()] = p_prev * f
                    nxt.append((ex, p_prev * f))
            frontier = nxt
        return BehaviorFingerprint(ext, horizon, entries, beta_in)

    return gen


def _factorization_check(result: Result, r1: Problem, r2: Problem) -> Check:
    """R(beta)/R(beta') equals the product of each side's output conditional given beta'."""
    fp = result.dist
    names = fp.names
    idx = [[names.index(n) for n in r.outputs] for r in (r1, r2)]
    worst = 0.0
    for k, p in fp.entries.items():
        if len(k) < 2:
            continue
        parent = k[:-1]
        pp = fp.entries[parent]
        if pp <= 0:
            continue
        kids = fp.children(parent)
        factors = []
        for ix in idx:
            want = tuple(k[-1][i] for i in ix)
            factors.append(math.fsum(fp.entries[c] for c in kids
                                     if tuple(c[-1][i] for i in ix) == want) / pp)
        worst = max(worst, abs(p / pp - factors[0] * factors[1]))
    return Check("factorization", FINGERPRINT_TOL, worst, worst <= FINGERPRINT_TOL,
                 input=result.input)


def problem_compose(r1: Problem, r2: Problem) -> Problem:
    if set(r1.outputs) & set(r2.outputs):
        raise ModelError("problems share output neurons")
    outputs = tuple(sorted(set(r1.outputs) | set(r2.outputs)))
    inputs = tuple(sorted((set(r1.inputs) | set(r2.inputs)) - set(outputs)))
    if r1.generator is not None and r2.generator is not None:
        gen = _composed_generator(r1, r2, inputs, outputs)
        return Problem(inputs, outputs, _equality_accept(gen), gen,
                       name=f"({r1.name} x {r2.name})")

    def accept(result: Result) -> list:
        checks = []
        for r in (r1, r2):
            sub_in = None
            if result.input is not None and set(r.inputs) <= set(result.input.names):
                sub_in = result.input.restrict(r.inputs)
            sub = Result(sub_in, result.dist.marginal(r.external), result.confidence)
            checks += r.accept(sub)
        if not result.dist.empirical:
            checks.append(_factorization_check(result, r1, r2))
        return checks

    return Problem(inputs, outputs, accept, name=f"({r1.name} x {r2.name})")


def problem_hide(r: Problem, V) -> Problem:
    V = frozenset(V)
    if not V <= set(r.outputs):
        raise ModelError(f"can only hide outputs, not {sorted(V - set(r.outputs))}")
    if not V:
        return r
    keep = [n for n in r.external if n not in V]
    outputs = [n for n in r.outputs if n not in V]
    if r.generator is not None:
        base = r.generator

        def gen(beta_in, horizon):
            return base(beta_in, horizon).marginal(keep)

        return Problem(r.inputs, outputs, _equality_accept(gen), gen, name=f"hide({r.name})")
    if r.hide_hook is not None:
        return r.hide_hook(V)
    raise ModelError(f"no restated acceptance for hiding {sorted(V)} in {r.name}")


# ---------------------------------------------------------------------------


def network_result(net: Network, params: EngineParams, beta_in: InputExecution, horizon: int,
                   mode: str = "exact", cfg: TrialConfig | None = None) -> Result:
    if mode == "exact":
        return Result(beta_in, behavior(net, params, beta_in, horizon))
    if mode == "montecarlo":
        cfg = cfg or TrialConfig(horizon=horizon)
        fp = empirical_fingerprint(net, params, beta_in, horizon, cfg)
        return Result(beta_in, fp, FOUR_SIGMA if cfg is None else cfg.confidence)
    raise ModelError(f"unknown mode {mode!r}")


def solves(net: Network, params: EngineParams, prob: Problem, inputs, horizon: int,
           mode: str = "exact", cfg: TrialConfig | None = None) -> Verdict:
    if tuple(net.inputs) != prob.inputs or tuple(net.outputs) != prob.outputs:
        raise InterfaceError(
            f"network interface {net.inputs}/{net.outputs} does not match the problem's "
            f"{prob.inputs}/{prob.outputs}")
    witness = []
    for beta_in in inputs:
        witness += prob.accept(network_result(net, params, beta_in, horizon, mode, cfg))
    return Verdict(all(c.passed for c in witness), witness)


def constant_inputs(names):
    """Every held input pattern over ``names``."""
    names = tuple(sorted(names))
    return [InputExecution.constant(dict(zip(names, bits)))
            for bits in itertools.product((0, 1), repeat=len(names))]


__all__ = [
    "Check", "InterfaceError", "Problem", "Result", "Verdict", "attention_problem",
    "attention_split_ok", "constant_inputs", "copy_problem", "filter_problem",
    "fingerprint_distance", "hidden_attention_problem", "mirror_event", "network_result",
    "problem_compose", "problem_hide", "singleton_problem", "solves", "wta_event",
    "wta_problem",
]
