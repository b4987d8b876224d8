import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stochsnn import engine
from stochsnn.builders import (
    GateParams,
    and_gate,
    attention_network,
    cyclic_toy,
    filter_network,
    identity_gate,
    not_gate,
    wta_network,
    xor_circuit,
    XOR_NAMES,
)
from stochsnn.compose import (
    INTERNAL_CAPTURED,
    SHARED_OUTPUT,
    IncompatibleError,
    compatible,
    compose,
    derive_component_input,
    hide,
    is_acyclic_composition,
    rename,
    sweep_acyclic_factorization,
    sweep_onestep_factorization,
    verify_acyclic_factorization,
    verify_compose_out_2,
    verify_execution_independence,
    verify_hiding,
    verify_onestep_factorization,
)
from stochsnn.model import EngineParams, Execution, InputExecution, ModelError, Network, project
from stochsnn.oracle import brute_cone_probability
from stochsnn.randomnet import random_execution, random_pair, random_single

P1 = EngineParams(1.0)
G = GateParams(0.05)
TOL = 1e-9


def test_compatible_disjoint():
    a = identity_gate(G, "a", "b")
    b = identity_gate(G, "c", "d")
    assert compatible(a, b).violations == []


def test_shared_output_violation():
    a = identity_gate(G, "x", "y")
    b = identity_gate(G, "w", "y")
    rep = compatible(a, b)
    assert [v["kind"] for v in rep.violations] == [SHARED_OUTPUT]
    with pytest.raises(IncompatibleError):
        compose(a, b)


def test_internal_captured_violation():
    a = not_gate(G, "x", "a", "y")
    b = identity_gate(G, "a", "z")
    rep = compatible(a, b)
    assert rep.violations == [{"kind": INTERNAL_CAPTURED, "neurons": ["a"]}]


def test_and_then_not():
    a = and_gate(2, G, ["x1", "x2"], "and1")
    n = not_gate(G, "and1", "a", "nand")
    c = compose(a, n)
    assert (len(c.inputs), len(c.outputs), len(c.internals)) == (2, 2, 1)
    assert c.kind("and1") == "output"
    assert c.bias("and1") == a.bias("and1")


def test_shared_inputs_inserted_once():
    a = identity_gate(G, "x", "y")
    b = identity_gate(G, "x", "z")
    c = compose(a, b)
    assert c.inputs == ("x",)
    assert {(e.source, e.target) for e in c.edges} == {("x", "y"), ("x", "z")}


def test_cyclic_toy_structure():
    n1, n2, c = cyclic_toy(G)
    assert c.inputs == ()
    assert c.outputs == ("x1", "x2")
    assert c.internals == ("a1", "a2")
    assert c == compose(n1, n2)
    assert not is_acyclic_composition(n1, n2)


def test_acyclic_predicate():
    assert is_acyclic_composition(wta_network(2, 8.0), filter_network(2, G))
    assert is_acyclic_composition(identity_gate(G, "a", "b"), identity_gate(G, "c", "d"))


def test_compose_never_targets_an_input():
    c = attention_network(2, 8.0, G)
    ins = set(c.inputs)
    assert all(e.target not in ins for e in c.edges)


def test_hide_examples():
    net = xor_circuit(G)
    assert hide(net, []) == net
    a = and_gate(2, G, ["x1", "x2"], "and1")
    nand = compose(a, not_gate(G, "and1", "a_nand", "nand"))
    h = hide(nand, {"and1"})
    assert len(h.internals) == 2
    att = hide(attention_network(2, 8.0, G), ["y1", "y2"])
    assert att.outputs == ("z1", "z2")
    with pytest.raises(ModelError):
        hide(net, ["x1"])


def test_hide_twice_equals_hide_union():
    net = xor_circuit(G)
    assert hide(hide(net, ["or"]), ["and1"]) == hide(net, ["or", "and1"])


def test_derive_component_input_acyclic():
    a = and_gate(2, G, ["x1", "x2"], "and1")
    n = not_gate(G, "and1", "a", "nand")
    beta_in = InputExecution.constant({"x1": 1, "x2": 1})
    beta = Execution.from_rows(["and1", "nand", "x1", "x2"], [[0, 0, 1, 1], [1, 1, 1, 1], [1, 0, 1, 1]])
    s1 = derive_component_input(a, n, beta_in, beta, 1)
    assert s1.derived_input == beta_in
    s2 = derive_component_input(a, n, beta_in, beta, 2, horizon=5)
    assert [s2.derived_input.row(t) for t in range(6)] == [(0,), (1,), (1,), (0,), (0,), (0,)]
    assert s2.source == {"and1": "observed"}


def test_derive_component_input_no_cross_edges():
    a = identity_gate(G, "x", "y")
    b = identity_gate(G, "x", "z")
    beta_in = InputExecution(("x",), ((1,), (0,)), "cycle")
    beta = Execution.from_rows(["x", "y", "z"], [[1, 0, 0]])
    for j in (1, 2):
        assert derive_component_input(a, b, beta_in, beta, j).derived_input == beta_in


def test_derive_component_input_rejects_bad_args():
    a = identity_gate(G, "x", "y")
    beta = Execution.from_rows(["x", "y"], [[1, 0]])
    with pytest.raises(ModelError):
        derive_component_input(a, Network(()), InputExecution.constant({"x": 1}), beta, 3)
    with pytest.raises(ModelError):
        derive_component_input(a, Network(()), InputExecution.constant({"x": 1}), beta, 1, -1)


def test_acyclic_factorization_single_component_is_exact():
    net = xor_circuit(G)
    beta_in = InputExecution.constant({"x1": 1, "x2": 0})
    for tr, _ in engine.traces(net, P1, beta_in, 2):
        assert verify_acyclic_factorization(net, Network(()), P1, beta_in, tr) == 0.0


def test_acyclic_factorization_xor_final_step():
    p = G
    and1 = and_gate(2, p, ["x1", "x2"], "and1")
    inv = not_gate(p, "and1", "a_nand", "nand")
    or1 = and_gate(2, p, ["x1", "x2"], "or")
    first = compose(compose(and1, inv), or1)
    last = and_gate(2, p, ["nand", "or"], "xor")
    net = compose(first, last)
    beta_in = InputExecution.constant({"x1": 0, "x2": 1})
    rng = np.random.default_rng(0)
    trs = list(engine.traces(net, P1, beta_in, 4))
    for i in rng.choice(len(trs), 20, replace=False):
        assert verify_acyclic_factorization(first, last, P1, beta_in, trs[i][0]) <= TOL
    with pytest.raises(ModelError):
        n1, n2, _ = cyclic_toy(p)
        verify_acyclic_factorization(n1, n2, P1, InputExecution.empty(), Execution([{"x1": 1, "x2": 0}]))


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 100_000))
def test_sweep_agrees_with_per_trace_verifier(seed):
    rng = np.random.default_rng(seed)
    inst = random_pair(rng, 3, cyclic=False, horizon=2)
    w, n = sweep_acyclic_factorization(inst.n1, inst.n2, P1, inst.beta_in, 2)
    net = compose(inst.n1, inst.n2)
    per = [verify_acyclic_factorization(inst.n1, inst.n2, P1, inst.beta_in, tr)
           for t in (1, 2) for tr, _ in engine.traces(net, P1, inst.beta_in, t)]
    assert len(per) == n
    assert w <= TOL and max(per) <= TOL


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 100_000), st.booleans())
def test_onestep_sweep_agrees_with_per_trace_verifier(seed, cyclic):
    rng = np.random.default_rng(seed)
    inst = random_pair(rng, 3, cyclic=cyclic, horizon=3)
    w, _ = sweep_onestep_factorization(inst.n1, inst.n2, P1, inst.beta_in, 3)
    net = compose(inst.n1, inst.n2)
    per = [verify_onestep_factorization(inst.n1, inst.n2, P1, inst.beta_in, tr)
           for tr, _ in engine.traces(net, P1, inst.beta_in, 3)]
    assert w <= TOL and max(per) <= TOL


def test_onestep_disjoint_components():
    a = identity_gate(G, "x", "y")
    b = identity_gate(G, "u", "v")
    beta_in = InputExecution.constant({"x": 1, "u": 0})
    net = compose(a, b)
    for tr, _ in engine.traces(net, P1, beta_in, 2):
        assert verify_onestep_factorization(a, b, P1, beta_in, tr) <= 1e-15


def test_onestep_cyclic_toy_first_step():
    n1, n2, c = cyclic_toy(G)
    beta = Execution.from_rows(["x1", "x2"], [[1, 0], [0, 0]])
    assert verify_onestep_factorization(n1, n2, P1, InputExecution.empty(), beta) <= TOL


def _a4_execution():
    # x1 -> a1 -> x2 -> a2 -> x1, x2 latching
    rows = [(0, 0, 1, 0), (1, 0, 0, 0), (0, 0, 0, 1), (0, 1, 0, 1), (0, 0, 1, 1)]
    return Execution.from_rows(["a1", "a2", "x1", "x2"], rows)


def test_compose_out_2_cyclic_toy():
    n1, n2, _ = cyclic_toy(G)
    r = verify_compose_out_2(n1, n2, P1, InputExecution.empty(), _a4_execution())
    assert set(r) == {1, 2, 3, 4}
    assert max(r.values()) <= TOL


def test_compose_out_2_part4_is_onestep():
    rng = np.random.default_rng(7)
    inst = random_pair(rng, 3, cyclic=True)
    net = compose(inst.n1, inst.n2)
    alpha = random_execution(rng, net, inst.beta_in, 3)
    r = verify_compose_out_2(inst.n1, inst.n2, P1, inst.beta_in, alpha)
    one = verify_onestep_factorization(inst.n1, inst.n2, P1, inst.beta_in, project(alpha, net.external))
    assert r[4] == one


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 100_000))
def test_compose_out_2_random(seed):
    rng = np.random.default_rng(seed)
    inst = random_pair(rng, 3, cyclic=bool(seed % 2))
    net = compose(inst.n1, inst.n2)
    alpha = random_execution(rng, net, inst.beta_in, int(rng.integers(1, 5)))
    assert max(verify_compose_out_2(inst.n1, inst.n2, P1, inst.beta_in, alpha).values()) <= TOL


def test_independence_without_internals():
    a = identity_gate(G, "x", "y")
    b = identity_gate(G, "y", "z")
    beta_in = InputExecution.constant({"x": 1})
    alpha = Execution.from_rows(["x", "y", "z"], [[1, 0, 0], [1, 1, 0], [1, 1, 1]])
    assert verify_execution_independence(a, b, P1, beta_in, alpha) == 0.0


def test_independence_cyclic_toy_against_oracle():
    n1, n2, _ = cyclic_toy(G)
    alpha = _a4_execution()
    for prob in (engine.cone_probability, brute_cone_probability):
        assert verify_execution_independence(n1, n2, P1, InputExecution.empty(), alpha,
                                             prob=prob) <= TOL


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 100_000))
def test_independence_random_two_plus_two(seed):
    rng = np.random.default_rng(seed)
    inst = random_pair(rng, 2 + int(seed % 2), cyclic=bool(seed % 2))
    net = compose(inst.n1, inst.n2)
    alpha = random_execution(rng, net, inst.beta_in, 3)
    assert verify_execution_independence(inst.n1, inst.n2, P1, inst.beta_in, alpha,
                                         prob=brute_cone_probability) <= TOL


def test_hiding_empty_set_is_exact():
    net = xor_circuit(G)
    beta_in = InputExecution.constant({"x1": 1, "x2": 1})
    for tr, _ in engine.traces(net, P1, beta_in, 2):
        assert verify_hiding(net, [], P1, beta_in, tr) == 0.0


def test_hidden_nand():
    a = and_gate(2, G, ["x1", "x2"], "and1")
    nand = compose(a, not_gate(G, "and1", "a_nand", "nand"))
    h = hide(nand, ["and1"])
    for x1 in (0, 1):
        for x2 in (0, 1):
            beta_in = InputExecution.constant({"x1": x1, "x2": x2})
            for tr, _ in engine.traces(h, P1, beta_in, 3):
                assert verify_hiding(nand, ["and1"], P1, beta_in, tr) <= TOL
            good = engine.event_probability(h, P1, beta_in, 3,
                                            lambda tr: tr[3]["nand"] == 1 - (x1 & x2))
            assert good >= 0.95 ** 3


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 100_000))
def test_hiding_random(seed):
    rng = np.random.default_rng(seed)
    net, beta_in = random_single(rng)
    V = [o for o in net.outputs if rng.random() < 0.5] or [net.outputs[-1]]
    for tr, _ in engine.traces(hide(net, V), P1, beta_in, 3):
        assert verify_hiding(net, V, P1, beta_in, tr) <= TOL


def test_compose_symmetric_behaviour():
    rng = np.random.default_rng(2)
    inst = random_pair(rng, 3, cyclic=True)
    a = engine.behavior(compose(inst.n1, inst.n2), P1, inst.beta_in, 3)
    b = engine.behavior(compose(inst.n2, inst.n1), P1, inst.beta_in, 3)
    assert a.names == b.names
    assert max(abs(a.entries[k] - b.entries[k]) for k in a.entries) <= 1e-12


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 100_000))
def test_behaviour_is_compositional_under_internal_renaming(seed):
    rng = np.random.default_rng(seed)
    inst = random_pair(rng, 3, cyclic=bool(seed % 2))
    m1 = {n: n + "_r" for n in inst.n1.internals}
    m2 = {n: n + "_s" for n in inst.n2.internals}
    r1, r2 = rename(inst.n1, m1), rename(inst.n2, m2)
    a = engine.behavior(compose(inst.n1, inst.n2), P1, inst.beta_in, 3)
    b = engine.behavior(compose(r1, r2), P1, inst.beta_in, 3)
    assert max(abs(a.entries[k] - b.entries[k]) for k in a.entries) <= TOL


def test_xor_outputs_named():
    net = xor_circuit(G)
    assert set(net.outputs) == {XOR_NAMES[k] for k in ("and1", "nand", "or", "xor")}
