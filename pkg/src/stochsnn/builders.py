"""Constructors for the concrete networks: gates, Xor, WTA, Filter,
Attention and a two-component cyclic circuit.

Gate calibration: with ``L = lam * ln((1 - delta) / delta)`` a potential of
``+L`` fires with probability ``1 - delta`` and ``-L`` with ``delta``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from .compose import compose
from .model import EngineParams, ModelError, Network, check_network


@dataclass(frozen=True)
class GateParams:
    delta: float
    lam: float = 1.0

    def __post_init__(self):
        if not 0.0 < self.delta < 1.0:
            raise ModelError(f"delta must be in (0, 1), got {self.delta}")
        if not self.lam > 0.0:
            raise ModelError(f"lambda must be positive, got {self.lam}")

    @property
    def L(self) -> float:
        return self.lam * math.log((1.0 - self.delta) / self.delta)

    @property
    def engine(self) -> EngineParams:
        return EngineParams(self.lam)


def _require_gate(p: GateParams):
    if p.delta >= 0.5:
        raise ModelError(f"gate builders need delta < 0.5 (got {p.delta}); L would be <= 0")


def identity_gate(p: GateParams, x="x", y="y") -> Network:
    _require_gate(p)
    L = p.L
    return check_network(Network.build([x], {y: L}, {}, [(x, y, 2 * L)]))


def and_gate(k: int, p: GateParams, inputs=None, y="y") -> Network:
    """Fires (w.p. 1 - delta) one step after all ``k`` inputs fire."""
    _require_gate(p)
    if k < 1:
        raise ModelError("an And gate needs at least one input")
    inputs = list(inputs) if inputs is not None else [f"x{i}" for i in range(1, k + 1)]
    if len(inputs) != k:
        raise ModelError("need exactly k input names")
    L = p.L
    b = (2 * k - 1) * L
    return check_network(Network.build(inputs, {y: b}, {}, [(x, y, 2 * L) for x in inputs]))


def or_gate(k: int, p: GateParams, inputs=None, y="y") -> Network:
    _require_gate(p)
    if k < 1:
        raise ModelError("an Or gate needs at least one input")
    inputs = list(inputs) if inputs is not None else [f"x{i}" for i in range(1, k + 1)]
    if len(inputs) != k:
        raise ModelError("need exactly k input names")
    L = p.L
    return check_network(Network.build(inputs, {y: L}, {}, [(x, y, 2 * L) for x in inputs]))


def not_gate(p: GateParams, x="x", a="a", y="y") -> Network:
    """Two-step inverter through an inhibitory internal neuron ``a``."""
    _require_gate(p)
    L = p.L
    return check_network(Network.build([x], {y: -L}, {a: L}, [(x, a, 2 * L), (a, y, -2 * L)]))


XOR_NAMES = {"and1": "and1", "nand": "nand", "nand_inh": "a_nand", "or": "or", "xor": "xor"}


def xor_circuit(p: GateParams, x1="x1", x2="x2") -> Network:
    """And, then Not on the And output, then Or, then a final And of Nand and Or."""
    n = XOR_NAMES
    and1 = and_gate(2, p, [x1, x2], n["and1"])
    inv = not_gate(p, n["and1"], n["nand_inh"], n["nand"])
    or1 = or_gate(2, p, [x1, x2], n["or"])
    and2 = and_gate(2, p, [n["nand"], n["or"]], n["xor"])
    return compose(compose(compose(and1, inv), or1), and2)


def xor_flat(p: GateParams, x1="x1", x2="x2") -> Network:
    """The same circuit written out in one description."""
    _require_gate(p)
    L = p.L
    n = XOR_NAMES
    return check_network(Network.build(
        [x1, x2],
        {n["and1"]: 3 * L, n["nand"]: -L, n["or"]: L, n["xor"]: 3 * L},
        {n["nand_inh"]: L},
        [(x1, n["and1"], 2 * L), (x2, n["and1"], 2 * L),
         (n["and1"], n["nand_inh"], 2 * L), (n["nand_inh"], n["nand"], -2 * L),
         (x1, n["or"], 2 * L), (x2, n["or"], 2 * L),
         (n["nand"], n["xor"], 2 * L), (n["or"], n["xor"], 2 * L)],
    ))


@dataclass(frozen=True)
class WtaWeights:
    """Weights and biases of the WTA circuit, in units of gamma.

    ``a_s`` fires when at least one output fired, ``a_c`` when at least two
    did. A firing output with a firing input sits at potential
    ``input + self - 2*inhibit - bias = 0`` while both inhibitors fire, so
    it keeps firing with probability 1/2; with only ``a_s`` firing the sole
    winner is pushed up and silent outputs are held down.
    """

    input_weight: float = 3.0
    self_weight: float = 2.0
    inhibit: float = 1.0
    output_bias: float = 3.0
    excite: float = 2.0
    stability_bias: float = 1.0
    convergence_bias: float = 3.0


def wta_network(n: int, gamma: float, profile: WtaWeights = WtaWeights(),
                stability="a_s", convergence="a_c") -> Network:
    if n < 1:
        raise ModelError("WTA needs at least one output")
    if not gamma > 0:
        raise ModelError("gamma must be positive")
    g = gamma
    xs = [f"x{i}" for i in range(1, n + 1)]
    ys = [f"y{i}" for i in range(1, n + 1)]
    edges = []
    for x, y in zip(xs, ys):
        edges += [(x, y, g * profile.input_weight), (y, y, g * profile.self_weight),
                  (stability, y, -g * profile.inhibit), (convergence, y, -g * profile.inhibit),
                  (y, stability, g * profile.excite), (y, convergence, g * profile.excite)]
    return check_network(Network.build(
        xs, {y: g * profile.output_bias for y in ys},
        {stability: g * profile.stability_bias, convergence: g * profile.convergence_bias},
        edges))


def filter_network(n: int, p: GateParams) -> Network:
    """``n`` disjoint two-input And gates: z_i follows w_i and y_i."""
    if n < 1:
        raise ModelError("Filter needs n >= 1")
    net = None
    for i in range(1, n + 1):
        g = and_gate(2, p, [f"w{i}", f"y{i}"], f"z{i}")
        net = g if net is None else compose(net, g)
    return net


def attention_network(n: int, gamma: float, p: GateParams,
                      profile: WtaWeights = WtaWeights()) -> Network:
    """WTA feeding a Filter through the shared y_i neurons."""
    return compose(wta_network(n, gamma, profile), filter_network(n, p))


def cyclic_toy(p: GateParams, x1_init: int = 1):
    """Two networks wired in a loop through x1 and x2.

    Returns ``(n1, n2, composite)``. ``x1_init`` is the initial state of x1,
    which belongs to ``n2``.
    """
    _require_gate(p)
    L = p.L
    n1 = check_network(Network.build(
        ["x1"], {"x2": L}, {"a1": L},
        [("x1", "a1", 2 * L), ("a1", "x2", 2 * L), ("x2", "x2", 2 * L)]))
    n2 = check_network(Network.build(
        ["x2"], {"x1": L}, {"a2": L},
        [("x2", "a2", 2 * L), ("a2", "x1", 2 * L)], init={"x1": x1_init}))
    return n1, n2, compose(n1, n2)


BUILDERS = ("identity", "and", "or", "not", "xor", "wta", "filter", "attention",
            "cyclic-n1", "cyclic-n2", "cyclic")
