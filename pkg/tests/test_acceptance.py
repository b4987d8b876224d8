"""End-to-end acceptance checks. Each test prints one PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v`` to see them.
"""
import time

import numpy as np

from stochsnn import engine
from stochsnn.builders import (
    GateParams,
    and_gate,
    attention_network,
    cyclic_toy,
    filter_network,
    identity_gate,
    not_gate,
    or_gate,
    wta_network,
    xor_circuit,
)
from stochsnn.compose import (
    compose,
    hide,
    sweep_acyclic_factorization,
    sweep_onestep_factorization,
    verify_compose_out_2,
    verify_execution_independence,
    verify_hiding,
)
from stochsnn.model import EngineParams, InputExecution, project
from stochsnn.montecarlo import FOUR_SIGMA, TrialConfig, estimate_event, sample_execution
from stochsnn.oracle import brute_cone_probability, brute_execution_sum, brute_trace_probability
from stochsnn.problems import (
    constant_inputs,
    filter_problem,
    fingerprint_distance,
    hidden_attention_problem,
    problem_compose,
    singleton_problem,
    solves,
    wta_event,
)
from stochsnn.randomnet import random_execution, random_input, random_network, random_pair, random_single

P1 = EngineParams(1.0)
TOL = 1e-9
WTA_GAMMA = 8.0


def report(capsys, n, name, ok, detail):
    with capsys.disabled():
        print(f"\n[{n:>2}] {name}: {'PASS' if ok else 'FAIL'} ({detail})")
    assert ok, detail


def xor_correct(x1, x2):
    def pred(tr):
        return (tr[4]["xor"] == (x1 ^ x2) and tr[3]["nand"] == 1 - (x1 & x2)
                and tr[3]["or"] == (x1 | x2))
    return pred


def a4(tr):
    return tr[4]["x1"] == 1 and tr[4]["x2"] == 1


def test_01_gate_calibration(capsys):
    p = GateParams(0.1)
    timings, worst = [], 0.0
    for _ in range(5):
        t0 = time.perf_counter()
        net = identity_gate(p)
        vals = [engine.event_probability(net, p.engine, InputExecution.constant({"x": x}), 1,
                                         lambda tr: tr[1]["y"] == tr[0]["x"]) for x in (0, 1)]
        timings.append(time.perf_counter() - t0)
        worst = max(abs(v - 0.9) for v in vals)
    ms = min(timings) * 1e3
    report(capsys, 1, "identity gate copies with probability 0.9",
           worst <= 1e-12 and ms < 1.0, f"max err {worst:.2e}, {ms:.3f} ms")


def test_02_and_or_thresholds(capsys):
    p = GateParams(0.1)
    a3, o3 = and_gate(3, p), or_gate(3, p)

    def fire(net, bits):
        prev = dict(zip(("x1", "x2", "x3"), bits), y=0)
        return engine.transition_probability(net, p.engine, prev, {"y": 1})

    errs = [abs(fire(a3, (1, 1, 1)) - 0.9)]
    errs += [abs(fire(a3, b) - 0.1) for b in ((1, 1, 0), (1, 0, 1), (0, 1, 1))]
    errs += [abs(fire(o3, (0, 0, 0)) - 0.1)]
    errs += [abs(fire(o3, b) - 0.9) for b in ((1, 0, 0), (0, 1, 0), (0, 0, 1))]
    report(capsys, 2, "And/Or boundary firing probabilities", max(errs) <= 1e-12,
           f"max err {max(errs):.2e}")


def test_03_xor_bound(capsys):
    p = GateParams(0.05)
    net = xor_circuit(p)
    bound = 0.95 ** 5
    t0 = time.perf_counter()
    vals = [engine.event_probability(net, p.engine, InputExecution.constant({"x1": a, "x2": b}), 4,
                                     xor_correct(a, b)) for a in (0, 1) for b in (0, 1)]
    secs = time.perf_counter() - t0
    report(capsys, 3, "Xor correct at 4 with Nand/Or at 3", min(vals) >= bound and secs < 10,
           f"min {min(vals):.6f} >= {bound:.10f}, {secs:.2f} s")


def test_04_cyclic_bound(capsys):
    d = 0.05
    p = GateParams(d)
    n1, _, c = cyclic_toy(p)
    q = engine.event_probability(c, p.engine, InputExecution.empty(), 4, a4)
    # x2 marginal of the next state after a1 and x2 both fired
    x2 = sum(engine.transition_probability(n1, p.engine, {"x1": 0, "a1": 1, "x2": 1},
                                           {"a1": a, "x2": 1}) for a in (0, 1))
    want = 1 - d ** 3 / ((1 - d) ** 3 + d ** 3)
    ok = q >= 0.95 ** 7 and abs(x2 - want) <= 1e-12
    report(capsys, 4, "cyclic circuit P(x1, x2 fire at 4)", ok,
           f"{q:.6f} >= {0.95 ** 7:.7f}; one-step err {abs(x2 - want):.2e}")


def test_05_acyclic_factorization(capsys):
    rng = np.random.default_rng(5)
    worst, traces = 0.0, 0
    t0 = time.perf_counter()
    for _ in range(200):
        inst = random_pair(rng, 3, cyclic=False, horizon=4)
        w, k = sweep_acyclic_factorization(inst.n1, inst.n2, P1, inst.beta_in, 4)
        worst, traces = max(worst, w), traces + k
    secs = time.perf_counter() - t0
    report(capsys, 5, "acyclic factorization on 200 random pairs", worst <= TOL and secs < 60,
           f"max residual {worst:.2e} over {traces} traces, {secs:.1f} s")


def test_06_onestep_factorization(capsys):
    rng = np.random.default_rng(6)
    w_out = w_out2 = 0.0
    parts = {i: 0.0 for i in (1, 2, 3, 4)}
    for i in range(200):
        inst = random_pair(rng, 3, cyclic=bool(i % 2), horizon=4)
        w, _ = sweep_onestep_factorization(inst.n1, inst.n2, P1, inst.beta_in, 4)
        w_out = max(w_out, w)
        net = compose(inst.n1, inst.n2)
        for t in range(1, 5):
            alpha = random_execution(rng, net, inst.beta_in, t)
            for k, v in verify_compose_out_2(inst.n1, inst.n2, P1, inst.beta_in, alpha).items():
                parts[k] = max(parts[k], v)
    w_out2 = max(parts.values())
    report(capsys, 6, "one-step factorization incl. cyclic wiring", max(w_out, w_out2) <= TOL,
           f"compose-out {w_out:.2e}, parts " + ", ".join(f"{k}:{v:.1e}" for k, v in parts.items()))


def test_07_execution_independence(capsys):
    rng = np.random.default_rng(7)
    w_eng = w_brute = gap = 0.0
    for i in range(100):
        inst = random_pair(rng, 3, cyclic=bool(i % 2), horizon=3)
        net = compose(inst.n1, inst.n2)
        alpha = random_execution(rng, net, inst.beta_in, 3)
        a = verify_execution_independence(inst.n1, inst.n2, P1, inst.beta_in, alpha)
        b = verify_execution_independence(inst.n1, inst.n2, P1, inst.beta_in, alpha,
                                          prob=brute_cone_probability)
        tr = project(alpha, net.external)
        gap = max(gap, abs(engine.cone_probability(net, P1, inst.beta_in, tr)
                           - brute_cone_probability(net, P1, inst.beta_in, tr)))
        w_eng, w_brute = max(w_eng, a), max(w_brute, b)
    report(capsys, 7, "execution independence, engine and oracle",
           max(w_eng, w_brute, gap) <= TOL,
           f"engine {w_eng:.2e}, oracle {w_brute:.2e}, engine-oracle gap {gap:.2e}")


def test_08_hiding(capsys):
    rng = np.random.default_rng(8)
    worst, n = 0.0, 0
    for _ in range(100):
        net, beta_in = random_single(rng, horizon=3)
        V = [o for o in net.outputs if rng.random() < 0.5] or [net.outputs[-1]]
        for tr, _ in engine.traces(hide(net, V), P1, beta_in, 3):
            worst, n = max(worst, verify_hiding(net, V, P1, beta_in, tr)), n + 1
    p = GateParams(0.05)
    nand = hide(compose(and_gate(2, p, ["x1", "x2"], "and1"), not_gate(p, "and1", "a_nand", "nand")),
                ["and1"])
    low = min(engine.event_probability(nand, p.engine, b, 3,
                                       lambda tr, b=b: tr[3]["nand"] == 1 - (b.row(0)[0] & b.row(0)[1]))
              for b in constant_inputs(["x1", "x2"]))
    ok = worst <= TOL and low >= 0.95 ** 3
    report(capsys, 8, "hiding marginalizes; hidden Nand bound", ok,
           f"max residual {worst:.2e} over {n} traces; Nand min {low:.6f} >= {0.95 ** 3:.6f}")


def test_09_beh2_round_trip(capsys):
    rng = np.random.default_rng(9)
    worst = 0.0
    for _ in range(100):
        net, beta_in = random_single(rng, horizon=4)
        fp = engine.behavior(net, P1, beta_in, 4)
        back = engine.behavior_from_beh2(engine.beh2_from_behavior(fp),
                                         engine.initial_trace(net, beta_in).rows())
        worst = max(worst, fingerprint_distance(fp, back))
    report(capsys, 9, "Beh and Beh2 round trip", worst <= 1e-12, f"max err {worst:.2e}")


def test_10_forward_filter_vs_brute_force(capsys):
    rng = np.random.default_rng(10)
    worst = worst_literal = 0.0
    literal = 0
    sizes = [(i % 5, (i // 5) % 5) for i in range(100)]
    for n_int, T in sizes:
        ins = [f"x{i}" for i in range(int(rng.integers(0, 3)))]
        outs = [f"y{i}" for i in range(int(rng.integers(1, 3)))]
        net = random_network(rng, ins, outs, [f"a{i}" for i in range(n_int)])
        beta_in = random_input(rng, ins, int(rng.integers(1, 4)))
        ex = sample_execution(net, P1, beta_in, T, seed=int(rng.integers(1 << 30)))
        tr = project(ex, net.external)
        got = engine.trace_probability(net, P1, beta_in, tr)
        worst = max(worst, abs(got - brute_trace_probability(net, P1, beta_in, tr)))
        if len(net.local) * T <= 12:
            literal += 1
            worst_literal = max(worst_literal, abs(got - brute_execution_sum(net, P1, beta_in, tr)))
    ok = max(worst, worst_literal) <= 1e-12
    report(capsys, 10, "forward filter equals execution sums", ok,
           f"oracle err {worst:.2e} on 100; literal-sum err {worst_literal:.2e} on {literal}")


def test_11_montecarlo_consistency(capsys):
    p = GateParams(0.05)
    cfg = TrialConfig(100_000, 4, seed=11, confidence=FOUR_SIGMA)
    rows = []
    xor = xor_circuit(p)
    for a in (0, 1):
        for b in (0, 1):
            beta_in = InputExecution.constant({"x1": a, "x2": b})
            exact = engine.event_probability(xor, p.engine, beta_in, 4, xor_correct(a, b))
            est = estimate_event(xor, p.engine, beta_in, xor_correct(a, b), cfg)
            rows.append((f"xor{a}{b}", exact, est))
    _, _, cyc = cyclic_toy(p)
    exact = engine.event_probability(cyc, p.engine, InputExecution.empty(), 4, a4)
    est = estimate_event(cyc, p.engine, InputExecution.empty(), a4, cfg)
    rows.append(("cyclic", exact, est))
    again = estimate_event(cyc, p.engine, InputExecution.empty(), a4, cfg)
    ok = all(e.contains(x) for _, x, e in rows) and again == est
    detail = "; ".join(f"{k} {x:.4f} in [{e.ci_low:.4f}, {e.ci_high:.4f}]" for k, x, e in rows)
    report(capsys, 11, "10^5-trial 4 sigma intervals hold exact values", ok,
           detail + f"; repeat identical {again == est}")


def test_12_wta(capsys):
    t_c, t_s = 21, 10  # converge by 21, hold 10 steps, all within horizon 30
    net = wta_network(3, WTA_GAMMA)
    beta_in = InputExecution.constant({"x1": 1, "x2": 1, "x3": 0})
    cfg = TrialConfig(10_000, t_c + t_s - 1, seed=12)
    fires = {"x1": 1, "x2": 1, "x3": 0}
    est = estimate_event(net, P1, beta_in, wta_event(3, t_c, t_s, fires), cfg)
    wins = []
    for y in ("x1", "x2"):
        only = dict.fromkeys(fires, 0)
        only[y] = 1
        # a run of y alone that starts by t_c
        wins.append(estimate_event(net, P1, beta_in, wta_event(3, t_c, t_s, only), cfg).estimate)
    gap = abs(wins[0] - wins[1])
    ok = est.estimate >= 0.9 and gap <= 0.05
    report(capsys, 12, f"WTA n=3 gamma={WTA_GAMMA:g} converges and holds", ok,
           f"P={est.estimate:.4f} [{est.ci_low:.4f}, {est.ci_high:.4f}], "
           f"y1 {wins[0]:.4f} vs y2 {wins[1]:.4f}")


def test_13_problems(capsys):
    p = GateParams(0.05)
    prob = filter_problem(2, 1 - 0.95 ** 2)
    rng = np.random.default_rng(13)
    ins = constant_inputs(prob.inputs) + [random_input(rng, prob.inputs, 3) for _ in range(4)]
    filt = solves(filter_network(2, p), p.engine, prob, ins, 3)

    n1, n2, _ = cyclic_toy(p)
    cases = [(n1, n2, InputExecution.empty(), p.engine)]
    for k in range(30):
        inst = random_pair(rng, 3, cyclic=bool(k % 2))
        cases.append((inst.n1, inst.n2, inst.beta_in, P1))
    worst = 0.0
    for n1, n2, beta_in, params in cases:
        comp = problem_compose(singleton_problem(n1, params), singleton_problem(n2, params))
        want = engine.behavior(compose(n1, n2), params, beta_in, 4)
        worst = max(worst, fingerprint_distance(comp.generator(beta_in, 4), want))

    gp = GateParams(0.01)
    t_c, t_s = 20, 3
    hidden = hide(attention_network(2, WTA_GAMMA, gp), ["y1", "y2"])
    h_ins = [InputExecution.constant({"w1": 1, "w2": 0, "x1": 1, "x2": 1}),
             InputExecution(("w1", "w2", "x1", "x2"), ((1, 1, 0, 1), (0, 1, 0, 1)), "cycle")]
    mc = solves(hidden, gp.engine, hidden_attention_problem(2, 0.25, t_c, t_s), h_ins,
                t_c + t_s, "montecarlo", TrialConfig(5000, t_c + t_s, seed=13))
    ok = filt.solved and worst <= TOL and mc.solved and len(mc.witness) == len(h_ins)
    lows = ", ".join(f"{c.ci_low:.3f}" for c in mc.witness)
    report(capsys, 13, "problems: Filter exact, singleton composition, hidden Attention MC", ok,
           f"filter worst {min(c.achieved for c in filt.witness):.4f} >= {0.95 ** 4:.4f}; "
           f"composition err {worst:.2e}; attention ci_low {lows}")
