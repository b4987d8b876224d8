"""Composition and hiding of networks, plus numerical checks of the
factorization identities that relate a composite to its components.

The ``verify_*`` functions return absolute residuals; callers pick the
tolerance.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from . import engine
from .engine import cone_probability, conditional, trace_probability
from .model import (
    INPUT,
    INTERNAL,
    OUTPUT,
    EngineParams,
    Execution,
    InputExecution,
    ModelError,
    Network,
    Neuron,
    check_network,
    project,
)

INTERNAL_CAPTURED = "internal-captured-by-other"
SHARED_OUTPUT = "shared-output"


class IncompatibleError(ModelError):
    def __init__(self, report):
        super().__init__("networks are not compatible: " + "; ".join(
            f"{v['kind']} {','.join(v['neurons'])}" for v in report.violations))
        self.report = report


@dataclass
class CompatibilityReport:
    violations: list = field(default_factory=list)

    def __bool__(self):
        return not self.violations

    @property
    def ok(self) -> bool:
        return not self.violations


def compatible(n1: Network, n2: Network) -> CompatibilityReport:
    report = CompatibilityReport()
    for a, b in ((n1, n2), (n2, n1)):
        captured = sorted(set(a.internals) & set(b.names))
        if captured:
            report.violations.append({"kind": INTERNAL_CAPTURED, "neurons": captured})
    shared = sorted(set(n1.outputs) & set(n2.outputs))
    if shared:
        report.violations.append({"kind": SHARED_OUTPUT, "neurons": shared})
    return report


def compose(n1: Network, n2: Network) -> Network:
    """The composite network; shared neurons are identified by name.

    A neuron that is an input of one component and an output of the other
    becomes an output of the composite and keeps the bias and initial
    state of its output precursor.
    """
    report = compatible(n1, n2)
    if not report.ok:
        raise IncompatibleError(report)
    neurons = {}
    for net in (n1, n2):
        for n in net.neurons:
            have = neurons.get(n.name)
            if have is None or have.kind == INPUT:
                neurons[n.name] = n
    edges = set(n1.edges) | set(n2.edges)
    return check_network(Network(tuple(neurons.values()), tuple(edges)))


def compose_all(*nets: Network) -> Network:
    """Left fold of the binary operator."""
    if not nets:
        raise ModelError("nothing to compose")
    out = nets[0]
    for n in nets[1:]:
        out = compose(out, n)
    return out


def is_acyclic_composition(n1: Network, n2: Network) -> bool:
    """No output of ``n2`` feeds an input of ``n1``."""
    return not set(n1.inputs) & set(n2.outputs)


def hide(net: Network, hidden) -> Network:
    """Reclassify the outputs in ``hidden`` as internal neurons."""
    hidden = set(hidden)
    bad = sorted(hidden - set(net.outputs))
    if bad:
        raise ModelError(f"only outputs can be hidden, not {bad}")
    return net.with_kinds({n: INTERNAL for n in hidden})


# ---------------------------------------------------------------------------
# component input executions


@dataclass(frozen=True)
class ComponentInputSpec:
    component: int
    derived_input: InputExecution
    source: dict  # neuron -> "input" (from the composite input) or "observed"


def derive_component_input(n1: Network, n2: Network, beta_in: InputExecution,
                           observed: Execution, j: int,
                           horizon: int | None = None) -> ComponentInputSpec:
    """Input execution for component ``j`` given an observed composite trace prefix.

    Inputs that are composite inputs follow ``beta_in``; inputs driven by
    the other component copy ``observed`` at every observed time and are 0
    afterwards. The result is exact for times ``0..horizon`` (default: one
    step past the observed prefix), which is all any finite query needs.
    """
    if j not in (1, 2):
        raise ModelError("component index must be 1 or 2")
    comp, other = (n1, n2) if j == 1 else (n2, n1)
    if horizon is None:
        horizon = len(observed)
    if horizon < 0:
        raise ModelError("horizon must be non-negative")
    composite_inputs = set(beta_in.names)
    source = {}
    for name in comp.inputs:
        if name in composite_inputs:
            source[name] = "input"
        elif name in other.outputs:
            source[name] = "observed"
        else:
            raise ModelError(f"component input {name!r} is neither a composite input "
                             f"nor an output of the other component")
    names = comp.inputs
    rows = []
    for t in range(horizon + 1):
        outer = dict(zip(beta_in.names, beta_in.row(t)))
        row = []
        for name in names:
            if source[name] == "input":
                row.append(outer[name])
            else:
                row.append(observed[t][name] if t < len(observed) else 0)
        rows.append(tuple(row))
    # beyond the horizon: composite inputs keep their rule only for plain continuations
    ext = beta_in.extension if beta_in.extension != "cycle" else "zeros"
    if all(s == "input" for s in source.values()):
        return ComponentInputSpec(j, beta_in.restrict(names), source)
    return ComponentInputSpec(j, InputExecution(names, tuple(rows), ext), source)


def _component_inputs(n1, n2, beta_in, observed, horizon=None):
    return tuple(derive_component_input(n1, n2, beta_in, observed, j, horizon).derived_input
                 for j in (1, 2))


# ---------------------------------------------------------------------------
# verifiers


def verify_acyclic_factorization(n1: Network, n2: Network, params: EngineParams,
                                 beta_in: InputExecution, beta: Execution) -> float:
    """|P(beta) - P1(beta|N1) * P2(beta|N2)| for an acyclic pair."""
    if not is_acyclic_composition(n1, n2):
        raise ModelError("acyclic factorization needs N1_in and N2_out disjoint")
    net = compose(n1, n2)
    p = trace_probability(net, params, beta_in, beta)
    b1, b2 = _component_inputs(n1, n2, beta_in, beta, beta.length)
    p1 = trace_probability(n1, params, b1, project(beta, n1.external))
    p2 = trace_probability(n2, params, b2, project(beta, n2.external))
    return abs(p - p1 * p2)


def _component_conditional(comp: Network, params, b_in, event, given) -> float:
    return conditional(comp, params, b_in, event, given)


def verify_onestep_factorization(n1: Network, n2: Network, params: EngineParams,
                                 beta_in: InputExecution, beta: Execution) -> float:
    """Residual of P(beta|beta') = P1(out1 | beta'|N1) * P2(out2 | beta'|N2)."""
    if beta.length < 1:
        raise ModelError("one-step factorization needs a trace of length >= 1")
    net = compose(n1, n2)
    prev = beta.prefix(beta.length - 1)
    lhs = conditional(net, params, beta_in, beta, prev)
    rhs = 1.0
    for comp, b_in in zip((n1, n2), _component_inputs(n1, n2, beta_in, prev)):
        rhs *= _component_conditional(comp, params, b_in, project(beta, comp.outputs),
                                      project(prev, comp.external))
    return abs(lhs - rhs)


def verify_compose_out_2(n1: Network, n2: Network, params: EngineParams,
                         beta_in: InputExecution, alpha: Execution) -> dict:
    """Residuals of the four execution/trace one-step factorizations.

    ``alpha`` is an execution of the composite of length >= 1; the trace
    identities use ``trace(alpha)`` and its one-step prefix.
    """
    if alpha.length < 1:
        raise ModelError("one-step factorization needs an execution of length >= 1")
    net = compose(n1, n2)
    t = alpha.length
    alpha_p = alpha.prefix(t - 1)
    beta = project(alpha, net.external)
    beta_p = beta.prefix(t - 1)
    inputs = _component_inputs(n1, n2, beta_in, beta_p)

    def side(event_of, given_of):
        lhs = conditional(net, params, beta_in, event_of(net), given_of(net))
        rhs = 1.0
        for comp, b_in in zip((n1, n2), inputs):
            rhs *= _component_conditional(comp, params, b_in, event_of(comp), given_of(comp))
        return abs(lhs - rhs)

    def lc_of(x):
        return lambda c: project(x, c.local)

    def out_of(x):
        return lambda c: project(x, c.outputs)

    def whole(x):
        return lambda c: project(x, c.names)

    def ext(x):
        return lambda c: project(x, c.external)

    return {
        1: side(lc_of(alpha), whole(alpha_p)),
        2: side(out_of(beta), whole(alpha_p)),
        3: side(lc_of(alpha), ext(beta_p)),
        4: side(out_of(beta), ext(beta_p)),
    }


def verify_execution_independence(n1: Network, n2: Network, params: EngineParams,
                                  beta_in: InputExecution, alpha: Execution,
                                  prob=cone_probability) -> float:
    """Residual of P(alpha|beta) = P(alpha|N1 | beta|N1) * P(alpha|N2 | beta|N2).

    All probabilities are taken in the composite; ``prob`` computes cone
    probabilities of partial observations and may be swapped for the
    brute-force oracle.
    """
    net = compose(n1, n2)
    beta = project(alpha, net.external)

    def cond(event, given):
        both = engine.merge_observations(event, given)
        return prob(net, params, beta_in, both) / prob(net, params, beta_in, given)

    lhs = cond(alpha, beta)
    rhs = 1.0
    for comp in (n1, n2):
        rhs *= cond(project(alpha, comp.names), project(beta, comp.external))
    return abs(lhs - rhs)


def _sweep(n1: Network, n2: Network, params: EngineParams, beta_in: InputExecution,
           horizon: int):
    """Walk every composite trace up to ``horizon`` carrying three filters.

    Yields ``(t, (P, P1, P2), (P', P1', P2'))`` for each trace of length
    t >= 1 below a reachable prefix: the composite cone and each
    component's cone of its own view of the trace (cross-fed inputs copied
    from the trace), alongside the same quantities for the one-step prefix.
    """
    net = compose(n1, n2)
    if tuple(beta_in.names) != net.inputs:
        raise ModelError("input execution does not match the composite's input neurons")
    comps = [engine.compiled(c, params) for c in (net, n1, n2)]
    outs = net.outputs
    codes = list(itertools.product((0, 1), repeat=len(outs)))
    masks = []
    for comp in comps:
        per_code = []
        for code in codes:
            m = comp.mask({n: b for n, b in zip(outs, code) if n in comp.outputs})
            per_code.append(np.ones(comp.n_states, bool) if m is None else m)
        masks.append(np.array(per_code, dtype=float))  # (codes, S)
    f0 = net.f0
    first = dict(zip(beta_in.names, beta_in.row(0)))
    first.update({n: f0[n] for n in outs})
    starts = []
    for comp in comps:
        v = np.zeros(comp.n_states)
        v[comp.s0] = 1.0
        starts.append(v)

    def walk(t, last, masses, probs):
        rows = [beta_in.row(t - 1)] + [tuple(last[x] for x in c.inputs) for c in comps[1:]]
        kids = [(m @ c.transition(r))[None, :] * mk
                for m, c, r, mk in zip(masses, comps, rows, masks)]
        sums = [k.sum(axis=1) for k in kids]
        now = dict(zip(beta_in.names, beta_in.row(t)))
        for i, code in enumerate(codes):
            child = tuple(float(s[i]) for s in sums)
            yield t, child, probs
            if t < horizon and (child[0] > 0 or child[1] * child[2] > 0):
                nxt = dict(now)
                nxt.update(zip(outs, code))
                yield from walk(t + 1, nxt, [k[i] for k in kids], child)

    if horizon >= 1:
        yield from walk(1, first, starts, (1.0, 1.0, 1.0))


def sweep_acyclic_factorization(n1: Network, n2: Network, params: EngineParams,
                                beta_in: InputExecution, horizon: int) -> tuple[float, int]:
    """Max acyclic-factorization residual over all traces of length 1..horizon, and the count."""
    if not is_acyclic_composition(n1, n2):
        raise ModelError("acyclic factorization needs N1_in and N2_out disjoint")
    worst, n = 0.0, 0
    for _, (p, p1, p2), _ in _sweep(n1, n2, params, beta_in, horizon):
        worst = max(worst, abs(p - p1 * p2))
        n += 1
    return worst, n


def sweep_onestep_factorization(n1: Network, n2: Network, params: EngineParams,
                                beta_in: InputExecution, horizon: int) -> tuple[float, int]:
    """Max one-step factorization residual over all traces with a positive prefix."""
    worst, n = 0.0, 0
    for _, (p, p1, p2), (q, q1, q2) in _sweep(n1, n2, params, beta_in, horizon):
        if q <= 0:
            continue
        worst = max(worst, abs(p / q - (p1 / q1) * (p2 / q2)))
        n += 1
    return worst, n


def hidden_completions(net: Network, hidden, beta: Execution):
    """Traces of ``net`` that project onto ``beta`` once ``hidden`` is dropped."""
    hidden = sorted(hidden)
    f0 = net.f0
    steps = beta.length
    for bits in itertools.product((0, 1), repeat=len(hidden) * steps):
        configs = [dict(beta[0], **{n: f0[n] for n in hidden})]
        for t in range(1, steps + 1):
            chunk = bits[(t - 1) * len(hidden): t * len(hidden)]
            configs.append(dict(beta[t], **dict(zip(hidden, chunk))))
        yield Execution(configs)


def verify_hiding(net: Network, hidden, params: EngineParams, beta_in: InputExecution,
                  beta: Execution) -> float:
    """|P'(beta) - sum of P(gamma) over traces gamma of ``net`` extending beta on V|."""
    hidden = set(hidden)
    p_hidden = trace_probability(hide(net, hidden), params, beta_in, beta)
    total = sum(trace_probability(net, params, beta_in, g)
                for g in hidden_completions(net, hidden, beta))
    return abs(p_hidden - total)


def rename(net: Network, mapping: dict) -> Network:
    """Copy of ``net`` with neurons renamed."""
    ns = tuple(Neuron(mapping.get(n.name, n.name), n.kind, n.bias, n.init) for n in net.neurons)
    es = tuple(type(e)(mapping.get(e.source, e.source), mapping.get(e.target, e.target), e.weight)
               for e in net.edges)
    return Network(ns, es)


__all__ = [
    "CompatibilityReport", "ComponentInputSpec", "IncompatibleError", "compatible", "compose",
    "compose_all", "derive_component_input", "hidden_completions", "hide",
    "is_acyclic_composition", "rename", "verify_acyclic_factorization",
    "verify_compose_out_2", "verify_execution_independence", "verify_hiding",
    "verify_onestep_factorization", "sweep_acyclic_factorization",
    "sweep_onestep_factorization", "INTERNAL_CAPTURED", "SHARED_OUTPUT", "OUTPUT",
]
