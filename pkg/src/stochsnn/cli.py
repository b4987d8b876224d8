"""Command-line front end. Every command prints one JSON document.

Exit status: 0 success, 1 usage error, 2 model error, 3 verification failure.
"""
from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import builders, engine, montecarlo, problems, randomnet
from .compose import (
    IncompatibleError,
    compose,
    hide,
    sweep_acyclic_factorization,
    sweep_onestep_factorization,
    verify_compose_out_2,
    verify_execution_independence,
    verify_hiding,
)
from .model import EngineParams, InputExecution, ModelError
from .serialize import (
    dumps,
    input_from_json,
    load,
    network_from_json,
    network_to_json,
    trace_from_json,
    trace_to_json,
)

OK, USAGE, MODEL, FAILED = 0, 1, 2, 3
LEMMAS = ("acyclic-factorization", "compose-out", "compose-out-2", "independence", "hiding",
          "beh2-equivalence")
TOLERANCE = {"beh2-equivalence": 1e-12}
DEFAULT_TOL = 1e-9


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _emit(doc, out):
    out.write(dumps(doc) + "\n")


def _read_net(path):
    return network_from_json(load(path))


def _read_input(path, net):
    if path is None:
        return InputExecution(net.inputs, (tuple(0 for _ in net.inputs),), "zeros")
    beta_in = input_from_json(load(path))
    if tuple(beta_in.names) != net.inputs:
        raise ModelError(f"input execution covers {list(beta_in.names)}, "
                         f"network inputs are {list(net.inputs)}")
    return beta_in


# ---------------------------------------------------------------------------


def cmd_build(a):
    p = builders.GateParams(a.delta, a.lam)
    name = a.builder
    if name == "identity":
        net = builders.identity_gate(p)
    elif name == "and":
        net = builders.and_gate(a.k, p)
    elif name == "or":
        net = builders.or_gate(a.k, p)
    elif name == "not":
        net = builders.not_gate(p)
    elif name == "xor":
        net = builders.xor_circuit(p)
    elif name == "wta":
        net = builders.wta_network(a.n, a.gamma)
    elif name == "filter":
        net = builders.filter_network(a.n, p)
    elif name == "attention":
        net = builders.attention_network(a.n, a.gamma, p)
    else:
        n1, n2, c = builders.cyclic_toy(p, a.x1_init)
        net = {"cyclic-n1": n1, "cyclic-n2": n2, "cyclic": c}[name]
    return OK, network_to_json(net)


def cmd_compose(a):
    try:
        net = compose(_read_net(a.net1), _read_net(a.net2))
    except IncompatibleError as e:
        return MODEL, {"error": "incompatible", "violations": e.report.violations}
    return OK, network_to_json(net)


def cmd_hide(a):
    return OK, network_to_json(hide(_read_net(a.net), a.names))


def cmd_prob(a):
    net = _read_net(a.net)
    params = EngineParams(a.lam)
    beta_in = _read_input(a.input, net)
    trace = trace_from_json(load(a.trace))
    if set(trace.domain) == set(net.external):
        p = engine.trace_probability(net, params, beta_in, trace)
    else:
        p = engine.cone_probability(net, params, beta_in, trace)
    doc = {"probability": p, "length": trace.length}
    if a.conditional:
        if trace.length < 1:
            raise ModelError("a conditional needs a trace of length >= 1")
        prev = trace.prefix(trace.length - 1)
        doc["conditional"] = engine.conditional(net, params, beta_in, trace, prev)
    return OK, doc


def _parse_events(fires, silent):
    events = []
    for spec, want in [(s, 1) for s in fires or []] + [(s, 0) for s in silent or []]:
        name, sep, t = spec.rpartition("@")
        if not sep or not name:
            raise UsageError(f"event {spec!r} should look like NAME@TIME")
        events.append((name, int(t), want))
    return events


def cmd_simulate(a):
    net = _read_net(a.net)
    params = EngineParams(a.lam)
    beta_in = _read_input(a.input, net)
    cfg = montecarlo.TrialConfig(a.trials, a.horizon, a.seed, a.confidence)
    if a.fingerprint:
        fp = montecarlo.empirical_fingerprint(net, params, beta_in, a.horizon, cfg)
        return OK, fp.to_json()
    events = _parse_events(a.fires, a.silent)
    if not events:
        ex = montecarlo.sample_execution(net, params, beta_in, a.horizon, a.seed)
        return OK, {"execution": trace_to_json(ex), "seed": a.seed}
    for name, t, _ in events:
        if name not in net.external:
            raise ModelError(f"events must name external neurons, not {name!r}")
        if t > a.horizon or t < 0:
            raise ModelError(f"event time {t} outside 0..{a.horizon}")

    def pred(tr):
        return all(tr[t][n] == v for n, t, v in events)

    est = montecarlo.estimate_event(net, params, beta_in, pred, cfg)
    doc = est.to_json()
    doc["seed"] = a.seed
    doc["horizon"] = a.horizon
    return OK, doc


# ---------------------------------------------------------------------------
# verify


def _instances(a, rng, cyclic_ok):
    if a.net1:
        n1 = _read_net(a.net1)
        n2 = _read_net(a.net2) if a.net2 else None
        if n2 is None:
            yield n1, None, _read_input(a.input, n1)
        else:
            c = compose(n1, n2)
            yield n1, n2, _read_input(a.input, c)
        return
    for i in range(a.random):
        inst = randomnet.random_pair(rng, a.max_neurons, cyclic=cyclic_ok and bool(i % 2),
                                     horizon=a.horizon)
        yield inst.n1, inst.n2, inst.beta_in


def _positive_execution(rng, net, params, beta_in, length, tries=20):
    for _ in range(tries):
        ex = randomnet.random_execution(rng, net, beta_in, length)
        if engine.cone_probability(net, params, beta_in, ex) > 0:
            return ex
    return None


def cmd_verify(a):
    lemma = a.lemma
    params = EngineParams(a.lam)
    rng = np.random.default_rng(a.seed)
    worst, checked, instances = 0.0, 0, 0
    needs_pair = lemma in ("acyclic-factorization", "compose-out", "compose-out-2", "independence")
    if a.net1 is None and a.random < 1:
        raise UsageError("give --net1 (and --net2) or --random N")
    if a.net1 and needs_pair and not a.net2:
        raise UsageError(f"{lemma} needs --net1 and --net2")
    if lemma in ("hiding", "beh2-equivalence") and a.net1 is None:
        gen = (randomnet.random_single(rng, horizon=a.horizon) for _ in range(a.random))
        singles = ((net, beta_in) for net, beta_in in gen)
    elif lemma in ("hiding", "beh2-equivalence"):
        n1 = _read_net(a.net1)
        net = compose(n1, _read_net(a.net2)) if a.net2 else n1
        singles = iter([(net, _read_input(a.input, net))])
    else:
        singles = None

    if lemma == "acyclic-factorization":
        for n1, n2, beta_in in _instances(a, rng, cyclic_ok=False):
            w, k = sweep_acyclic_factorization(n1, n2, params, beta_in, a.horizon)
            worst, checked, instances = max(worst, w), checked + k, instances + 1
    elif lemma == "compose-out":
        for n1, n2, beta_in in _instances(a, rng, cyclic_ok=True):
            w, k = sweep_onestep_factorization(n1, n2, params, beta_in, a.horizon)
            worst, checked, instances = max(worst, w), checked + k, instances + 1
    elif lemma in ("compose-out-2", "independence"):
        for n1, n2, beta_in in _instances(a, rng, cyclic_ok=True):
            net = compose(n1, n2)
            instances += 1
            for t in range(1, a.horizon + 1):
                ex = _positive_execution(rng, net, params, beta_in, t)
                if ex is None:
                    continue
                if lemma == "independence":
                    w = verify_execution_independence(n1, n2, params, beta_in, ex)
                else:
                    w = max(verify_compose_out_2(n1, n2, params, beta_in, ex).values())
                worst, checked = max(worst, w), checked + 1
    elif lemma == "hiding":
        for net, beta_in in singles:
            instances += 1
            V = a.hide or [o for o in net.outputs if rng.random() < 0.5] or [net.outputs[0]]
            hidden = hide(net, V)
            for tr, p in engine.traces(hidden, params, beta_in, a.horizon):
                worst = max(worst, verify_hiding(net, V, params, beta_in, tr))
                checked += 1
    else:
        for net, beta_in in singles:
            instances += 1
            fp = engine.behavior(net, params, beta_in, a.horizon)
            back = engine.behavior_from_beh2(engine.beh2_from_behavior(fp),
                                             engine.initial_trace(net, beta_in).rows())
            worst = max(worst, problems.fingerprint_distance(fp, back))
            checked += len(fp.entries)
    tol = a.tolerance if a.tolerance is not None else TOLERANCE.get(lemma, DEFAULT_TOL)
    ok = worst <= tol
    doc = {"lemma": lemma, "instances": instances, "checked": checked, "max_residual": worst,
           "tolerance": tol, "verified": ok}
    return (OK if ok else FAILED), doc


# ---------------------------------------------------------------------------
# check


def _problem(a, net):
    name = a.problem
    if name == "copy":
        return problems.copy_problem(a.delta, net.inputs[0], net.outputs[0])
    if name == "filter":
        return problems.filter_problem(a.n, a.delta)
    if name == "wta":
        return problems.wta_problem(a.n, a.delta, a.t_c, a.t_s)
    if name in ("attention", "hidden-attention"):
        if a.delta1 is None or a.delta2 is None:
            raise UsageError("attention problems need --delta1 and --delta2")
        delta = 1 - (1 - a.delta1) * (1 - a.delta2) ** a.t_s
        prob = problems.attention_problem(a.n, delta, a.t_c, a.t_s, (a.delta1, a.delta2))
        if name == "hidden-attention":
            prob = problems.problem_hide(prob, [f"y{i}" for i in range(1, a.n + 1)])
        return prob
    raise UsageError(f"unknown problem {name!r}")


def cmd_check(a):
    net = _read_net(a.net)
    params = EngineParams(a.lam)
    prob = _problem(a, net)
    if a.input:
        inputs = [_read_input(p, net) for p in a.input]
    else:
        inputs = problems.constant_inputs(net.inputs)
    cfg = montecarlo.TrialConfig(a.trials, a.horizon, a.seed, a.confidence)
    verdict = problems.solves(net, params, prob, inputs, a.horizon, a.mode, cfg)
    doc = verdict.to_json()
    doc["problem"] = prob.name
    return (OK if verdict.solved else FAILED), doc


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="stochsnn", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def lam(p):
        p.add_argument("--lambda", dest="lam", type=float, default=1.0)

    b = sub.add_parser("build", help="emit a builder network as JSON")
    b.add_argument("builder", choices=builders.BUILDERS)
    b.add_argument("--delta", type=float, default=0.1)
    b.add_argument("--k", type=int, default=2)
    b.add_argument("--n", type=int, default=2)
    b.add_argument("--gamma", type=float, default=8.0)
    b.add_argument("--x1-init", dest="x1_init", type=int, default=1, choices=(0, 1))
    lam(b)
    b.set_defaults(func=cmd_build)

    c = sub.add_parser("compose", help="compose two network files")
    c.add_argument("net1")
    c.add_argument("net2")
    c.set_defaults(func=cmd_compose)

    h = sub.add_parser("hide", help="reclassify outputs as internal")
    h.add_argument("net")
    h.add_argument("names", nargs="*")
    h.set_defaults(func=cmd_hide)

    p = sub.add_parser("prob", help="exact probability of a trace or partial observation")
    p.add_argument("net")
    p.add_argument("--input")
    p.add_argument("--trace", required=True)
    p.add_argument("--conditional", action="store_true",
                   help="also report P(trace | its one-step prefix)")
    lam(p)
    p.set_defaults(func=cmd_prob)

    def trials(q):
        q.add_argument("--trials", type=int, default=10_000)
        q.add_argument("--seed", type=int, default=0)
        q.add_argument("--horizon", type=int, default=4)
        q.add_argument("--confidence", type=float, default=montecarlo.FOUR_SIGMA)

    s = sub.add_parser("simulate", help="Monte Carlo estimate of an event")
    s.add_argument("net")
    s.add_argument("--input")
    s.add_argument("--fires", action="append", metavar="NAME@T")
    s.add_argument("--silent", action="append", metavar="NAME@T")
    s.add_argument("--fingerprint", action="store_true")
    trials(s)
    lam(s)
    s.set_defaults(func=cmd_simulate)

    v = sub.add_parser("verify", help="check a composition identity numerically")
    v.add_argument("lemma", choices=LEMMAS)
    v.add_argument("--net1")
    v.add_argument("--net2")
    v.add_argument("--input")
    v.add_argument("--hide", nargs="*")
    v.add_argument("--random", type=int, default=0)
    v.add_argument("--max-neurons", dest="max_neurons", type=int, default=3)
    v.add_argument("--horizon", type=int, default=3)
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--tolerance", type=float)
    lam(v)
    v.set_defaults(func=cmd_verify)

    k = sub.add_parser("check", help="does a network solve a problem")
    k.add_argument("net")
    k.add_argument("problem", choices=("copy", "filter", "wta", "attention", "hidden-attention"))
    k.add_argument("--n", type=int, default=2)
    k.add_argument("--delta", type=float, default=0.1)
    k.add_argument("--delta1", type=float)
    k.add_argument("--delta2", type=float)
    k.add_argument("--t-c", dest="t_c", type=int, default=10)
    k.add_argument("--t-s", dest="t_s", type=int, default=5)
    k.add_argument("--mode", choices=("exact", "montecarlo"), default="exact")
    k.add_argument("--input", action="append")
    trials(k)
    lam(k)
    k.set_defaults(func=cmd_check)
    return ap


def run(argv=None, out=None) -> int:
    out = out or sys.stdout
    try:
        args = build_parser().parse_args(argv)
        code, doc = args.func(args)
    except UsageError as e:
        code, doc = USAGE, {"error": "usage", "message": str(e)}
    except json.JSONDecodeError as e:
        code, doc = MODEL, {"error": "malformed-json", "message": str(e)}
    except problems.InterfaceError as e:
        code, doc = MODEL, {"error": "interface-mismatch", "message": str(e)}
    except ModelError as e:
        code, doc = MODEL, {"error": "model", "message": str(e)}
    except OSError as e:
        code, doc = MODEL, {"error": "io", "message": str(e)}
    except ZeroDivisionError as e:
        code, doc = MODEL, {"error": "zero-probability-condition", "message": str(e)}
    _emit(doc, out)
    return code


def main():
    sys.exit(run())


__all__ = ["run", "main", "build_parser"]
