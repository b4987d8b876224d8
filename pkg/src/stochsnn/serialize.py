"""JSON forms of networks, input executions and traces."""
from __future__ import annotations

import json

from .model import (
    EXTENSIONS,
    INPUT,
    KINDS,
    Edge,
    Execution,
    InputExecution,
    ModelError,
    Network,
    Neuron,
    check_network,
)


def network_to_json(net: Network) -> dict:
    neurons = []
    for n in net.neurons:
        d = {"name": n.name, "class": n.kind}
        if n.kind != INPUT:
            d["bias"] = n.bias
            d["init"] = n.init if n.init is not None else 0
        neurons.append(d)
    edges = [{"from": e.source, "to": e.target, "weight": e.weight} for e in net.edges]
    return {"neurons": neurons, "edges": edges}


def _need(d, key, what):
    if not isinstance(d, dict) or key not in d:
        raise ModelError(f"{what} is missing {key!r}")
    return d[key]


def network_from_json(doc) -> Network:
    neurons = []
    for d in _need(doc, "neurons", "network"):
        kind = _need(d, "class", "neuron")
        if kind not in KINDS:
            raise ModelError(f"unknown neuron class {kind!r}")
        name = _need(d, "name", "neuron")
        if kind == INPUT:
            neurons.append(Neuron(name, kind))
        else:
            init = _need(d, "init", f"neuron {name!r}")
            if init not in (0, 1):
                raise ModelError(f"init of {name!r} must be 0 or 1")
            neurons.append(Neuron(name, kind, float(_need(d, "bias", f"neuron {name!r}")), init))
    edges = [Edge(_need(e, "from", "edge"), _need(e, "to", "edge"), float(_need(e, "weight", "edge")))
             for e in doc.get("edges", [])]
    return check_network(Network(tuple(neurons), tuple(edges)))


def input_to_json(beta_in: InputExecution) -> dict:
    return {"inputs": list(beta_in.names), "prefix": [list(r) for r in beta_in.prefix],
            "extension": beta_in.extension}


def input_from_json(doc) -> InputExecution:
    names = tuple(_need(doc, "inputs", "input execution"))
    prefix = tuple(tuple(int(b) for b in row) for row in doc.get("prefix", []))
    ext = doc.get("extension", "zeros")
    if ext not in EXTENSIONS:
        raise ModelError(f"unknown extension {ext!r}")
    if not prefix:
        prefix = (tuple(0 for _ in names),)
    return InputExecution(names, prefix, ext)


def trace_to_json(ex: Execution) -> dict:
    return {"neurons": list(ex.domain), "rows": [list(r) for r in ex.rows()]}


def trace_from_json(doc) -> Execution:
    names = _need(doc, "neurons", "trace")
    rows = _need(doc, "rows", "trace")
    for r in rows:
        if len(r) != len(names):
            raise ModelError("trace row width does not match its neuron list")
    return Execution.from_rows(names, [[int(b) for b in r] for r in rows])


def load(path: str):
    with open(path) as fh:
        return json.load(fh)


def dumps(doc) -> str:
    return json.dumps(doc, sort_keys=True)
