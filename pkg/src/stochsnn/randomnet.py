"""Random small networks and compatible pairs for property checks."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import EXTENSIONS, Edge, Execution, InputExecution, Network, Neuron, INPUT, INTERNAL, OUTPUT

DENSITY = 0.5
WEIGHT_RANGE = 3.0
BIAS_RANGE = 2.0
ZERO_BAND = 1e-6


def _weight(rng: np.random.Generator) -> float:
    while True:
        w = float(rng.uniform(-WEIGHT_RANGE, WEIGHT_RANGE))
        if abs(w) >= ZERO_BAND:
            return w


def random_network(rng: np.random.Generator, inputs, outputs, internals,
                   density: float = DENSITY, random_init: bool = True) -> Network:
    """Random weights on a random edge set; every non-input neuron may receive edges."""
    neurons = [Neuron(x, INPUT) for x in inputs]
    for kind, group in ((OUTPUT, outputs), (INTERNAL, internals)):
        for n in group:
            init = int(rng.integers(0, 2)) if random_init else 0
            neurons.append(Neuron(n, kind, float(rng.uniform(-BIAS_RANGE, BIAS_RANGE)), init))
    names = list(inputs) + list(outputs) + list(internals)
    edges = []
    for src in names:
        for tgt in list(outputs) + list(internals):
            if rng.random() < density:
                edges.append(Edge(src, tgt, _weight(rng)))
    return Network(tuple(neurons), tuple(edges))


def random_input(rng: np.random.Generator, names, length: int) -> InputExecution:
    rows = [tuple(int(b) for b in rng.integers(0, 2, len(names))) for _ in range(length)]
    ext = EXTENSIONS[int(rng.integers(0, len(EXTENSIONS)))]
    return InputExecution(tuple(names), tuple(rows), ext)


@dataclass(frozen=True)
class PairInstance:
    n1: Network
    n2: Network
    beta_in: InputExecution


def _pick(rng, options, budget):
    """A random subset of ``options`` with at most ``budget`` members."""
    k = int(rng.integers(0, min(budget, len(options)) + 1))
    order = rng.permutation(len(options))
    return {options[i] for i in order[:k]}


def random_pair(rng: np.random.Generator, max_neurons: int = 3, cyclic: bool = False,
                horizon: int = 4) -> PairInstance:
    """Two compatible networks with at most ``max_neurons`` neurons each.

    ``n2`` always reads ``n1``'s output ``p0``; with ``cyclic`` set, ``n1``
    also reads ``n2``'s output ``q0``. Composite inputs are named ``u0``/``v0``.
    """
    if max_neurons < 2 + int(cyclic):
        raise ValueError("too few neurons per side for this wiring")
    base1 = ["q0"] if cyclic else []
    opt1 = _pick(rng, ["u0", "p1", "h0"], max_neurons - 1 - len(base1))
    ins1 = base1 + (["u0"] if "u0" in opt1 else [])
    o1 = ["p0"] + (["p1"] if "p1" in opt1 else [])
    h1 = ["h0"] if "h0" in opt1 else []
    opts2 = ["k0", "v0"] + (["u0"] if "u0" in opt1 else []) + (["p1"] if "p1" in o1 else [])
    opt2 = _pick(rng, opts2, max_neurons - 2)
    ins2 = ["p0"] + [n for n in ("u0", "v0", "p1") if n in opt2]
    h2 = ["k0"] if "k0" in opt2 else []
    n1 = random_network(rng, ins1, o1, h1)
    n2 = random_network(rng, ins2, ["q0"], h2)
    comp_inputs = sorted({n for n in ins1 + ins2 if n in ("u0", "v0")})
    beta_in = random_input(rng, comp_inputs, int(rng.integers(1, horizon + 2)))
    return PairInstance(n1, n2, beta_in)


def random_single(rng: np.random.Generator, max_inputs=2, max_outputs=2, max_internals=2,
                  horizon: int = 3):
    """A random network plus an input execution for it."""
    ins = [f"x{i}" for i in range(int(rng.integers(0, max_inputs + 1)))]
    outs = [f"y{i}" for i in range(int(rng.integers(1, max_outputs + 1)))]
    hid = [f"a{i}" for i in range(int(rng.integers(0, max_internals + 1)))]
    net = random_network(rng, ins, outs, hid)
    return net, random_input(rng, ins, int(rng.integers(1, horizon + 2)))


def random_execution(rng: np.random.Generator, net: Network, beta_in: InputExecution, length: int):
    """A uniformly random execution consistent with ``beta_in`` and F0."""
    f0 = net.f0
    configs = []
    for t in range(length + 1):
        c = dict(zip(beta_in.names, beta_in.row(t)))
        if t == 0:
            c.update(f0)
        else:
            c.update({u: int(rng.integers(0, 2)) for u in net.local})
        configs.append(c)
    return Execution(configs)
