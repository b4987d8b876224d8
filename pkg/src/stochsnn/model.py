"""Networks, firing patterns, executions and the per-neuron firing rule.

Neurons are identified by name. Every collection of names is kept in
lexicographic order, which is the canonical order used for enumeration
and serialization throughout the package.
"""
from __future__ import annotations

import math
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from typing import Iterator, Union

INPUT = "input"
OUTPUT = "output"
INTERNAL = "internal"
KINDS = (INPUT, OUTPUT, INTERNAL)

EXTENSIONS = ("zeros", "hold", "cycle")


class ModelError(ValueError):
    """Raised for malformed networks, patterns or executions."""


class InconsistentExecutionError(ModelError):
    """An execution or trace disagrees with the input execution or F0."""


class FiringPattern(Mapping):
    """Immutable mapping from neuron names to 0/1."""

    __slots__ = ("_names", "_bits", "_hash")

    def __init__(self, values: Mapping[str, int] | Iterable[tuple[str, int]] = ()):
        items = dict(values)
        names = tuple(sorted(items))
        bits = []
        for name in names:
            v = items[name]
            if v not in (0, 1):
                raise ModelError(f"firing value for {name!r} must be 0 or 1, got {v!r}")
            bits.append(int(v))
        self._names = names
        self._bits = tuple(bits)
        self._hash = None

    @classmethod
    def from_bits(cls, names: Sequence[str], bits: Sequence[int]) -> "FiringPattern":
        if len(names) != len(bits):
            raise ModelError("names and bits differ in length")
        return cls(zip(names, bits))

    @classmethod
    def zeros(cls, names: Iterable[str]) -> "FiringPattern":
        return cls((n, 0) for n in names)

    @property
    def domain(self) -> tuple[str, ...]:
        return self._names

    @property
    def bits(self) -> tuple[int, ...]:
        return self._bits

    def __getitem__(self, name: str) -> int:
        try:
            return self._bits[self._index(name)]
        except ValueError:
            raise KeyError(name) from None

    def _index(self, name):
        # domains are tiny; a linear scan beats building a dict per pattern
        return self._names.index(name)

    def __iter__(self) -> Iterator[str]:
        return iter(self._names)

    def __len__(self) -> int:
        return len(self._names)

    def __hash__(self):
        if self._hash is None:
            self._hash = hash((self._names, self._bits))
        return self._hash

    def __eq__(self, other):
        if isinstance(other, FiringPattern):
            return self._names == other._names and self._bits == other._bits
        return Mapping.__eq__(self, other)

    def __repr__(self):
        inner = ", ".join(f"{n}:{b}" for n, b in zip(self._names, self._bits))
        return f"FiringPattern({{{inner}}})"

    def firing(self) -> frozenset[str]:
        return frozenset(n for n, b in zip(self._names, self._bits) if b)

    def merge(self, other: Mapping[str, int]) -> "FiringPattern":
        """Union of two patterns; they must agree on shared neurons."""
        items = dict(self)
        for name, v in other.items():
            if name in items and items[name] != v:
                raise ModelError(f"patterns disagree on {name!r}")
            items[name] = v
        return FiringPattern(items)


class Execution(Sequence):
    """Finite sequence of firing patterns over a common domain.

    The length is the number of steps, i.e. one less than the number of
    configurations. A trace is simply an execution whose domain is the
    external neurons of a network.
    """

    __slots__ = ("_configs",)

    def __init__(self, configurations: Iterable[Mapping[str, int]]):
        configs = tuple(
            c if isinstance(c, FiringPattern) else FiringPattern(c) for c in configurations
        )
        if not configs:
            raise ModelError("an execution has at least one configuration")
        dom = configs[0].domain
        for c in configs[1:]:
            if c.domain != dom:
                raise ModelError("all configurations of an execution share one domain")
        self._configs = configs

    @classmethod
    def _trusted(cls, configs: tuple[FiringPattern, ...]) -> "Execution":
        # hot path for enumeration: the caller guarantees a shared domain
        obj = cls.__new__(cls)
        obj._configs = configs
        return obj

    @classmethod
    def from_rows(cls, names: Sequence[str], rows: Iterable[Sequence[int]]) -> "Execution":
        return cls(FiringPattern.from_bits(names, r) for r in rows)

    @property
    def configurations(self) -> tuple[FiringPattern, ...]:
        return self._configs

    @property
    def domain(self) -> tuple[str, ...]:
        return self._configs[0].domain

    @property
    def length(self) -> int:
        return len(self._configs) - 1

    def rows(self) -> tuple[tuple[int, ...], ...]:
        return tuple(c.bits for c in self._configs)

    def prefix(self, t: int) -> "Execution":
        """The length-``t`` prefix."""
        if not 0 <= t <= self.length:
            raise ModelError(f"prefix length {t} outside 0..{self.length}")
        return Execution(self._configs[: t + 1])

    def extend(self, config: Mapping[str, int]) -> "Execution":
        return Execution(self._configs + (FiringPattern(config),))

    def is_prefix_of(self, other: "Execution") -> bool:
        return (
            self.domain == other.domain
            and self.length <= other.length
            and self._configs == other._configs[: len(self._configs)]
        )

    def __getitem__(self, t):
        return self._configs[t]

    def __len__(self):
        return len(self._configs)

    def __eq__(self, other):
        if isinstance(other, Execution):
            return self._configs == other._configs
        return NotImplemented

    def __hash__(self):
        return hash(self._configs)

    def __repr__(self):
        rows = " ".join("".join(map(str, r)) for r in self.rows())
        return f"Execution({','.join(self.domain)}: {rows})"


def project(obj: Union[FiringPattern, Execution], names: Iterable[str]):
    """Restrict a firing pattern or an execution to the neurons ``names``."""
    keep = set(names)
    if isinstance(obj, Execution):
        missing = keep - set(obj.domain)
        if missing:
            raise ModelError(f"cannot project onto neurons outside the domain: {sorted(missing)}")
        return Execution(project(c, keep) for c in obj)
    missing = keep - set(obj)
    if missing:
        raise ModelError(f"cannot project onto neurons outside the domain: {sorted(missing)}")
    return FiringPattern((n, v) for n, v in obj.items() if n in keep)


@dataclass(frozen=True)
class Neuron:
    name: str
    kind: str
    bias: float | None = None
    init: int | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ModelError(f"unknown neuron class {self.kind!r}")


@dataclass(frozen=True)
class Edge:
    source: str
    target: str
    weight: float


@dataclass(frozen=True)
class Network:
    """A stochastic spiking network.

    ``neurons`` and ``edges`` are stored sorted by name so that equal
    networks compare and hash equal regardless of construction order.
    Structural invariants are not enforced here; see :func:`validate_network`.
    """

    neurons: tuple[Neuron, ...]
    edges: tuple[Edge, ...] = ()
    _by_name: dict = field(init=False, repr=False, compare=False, hash=False)

    def __post_init__(self):
        neurons = tuple(sorted(self.neurons, key=lambda n: n.name))
        edges = tuple(sorted(self.edges, key=lambda e: (e.source, e.target)))
        object.__setattr__(self, "neurons", neurons)
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "_by_name", {n.name: n for n in neurons})

    @classmethod
    def build(
        cls,
        inputs: Iterable[str] = (),
        outputs: Mapping[str, float] | None = None,
        internals: Mapping[str, float] | None = None,
        edges: Iterable[tuple[str, str, float]] = (),
        init: Mapping[str, int] | None = None,
    ) -> "Network":
        """Convenience constructor: ``outputs``/``internals`` map name to bias.

        Non-input neurons start silent unless ``init`` says otherwise.
        """
        init = dict(init or {})
        ns = [Neuron(n, INPUT) for n in inputs]
        for kind, group in ((OUTPUT, outputs or {}), (INTERNAL, internals or {})):
            ns += [Neuron(n, kind, float(b), int(init.get(n, 0))) for n, b in group.items()]
        return cls(tuple(ns), tuple(Edge(s, t, float(w)) for s, t, w in edges))

    # neuron classes ------------------------------------------------------

    def _names(self, *kinds):
        return tuple(n.name for n in self.neurons if n.kind in kinds)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(n.name for n in self.neurons)

    @property
    def inputs(self) -> tuple[str, ...]:
        return self._names(INPUT)

    @property
    def outputs(self) -> tuple[str, ...]:
        return self._names(OUTPUT)

    @property
    def internals(self) -> tuple[str, ...]:
        return self._names(INTERNAL)

    @property
    def external(self) -> tuple[str, ...]:
        return self._names(INPUT, OUTPUT)

    @property
    def local(self) -> tuple[str, ...]:
        """Locally controlled neurons: outputs and internals."""
        return self._names(OUTPUT, INTERNAL)

    def neuron(self, name: str) -> Neuron:
        try:
            return self._by_name[name]
        except KeyError:
            raise ModelError(f"no neuron named {name!r}") from None

    def __contains__(self, name):
        return name in self._by_name

    def kind(self, name: str) -> str:
        return self.neuron(name).kind

    def bias(self, name: str) -> float:
        b = self.neuron(name).bias
        if b is None:
            raise ModelError(f"input neuron {name!r} has no bias")
        return b

    def weight(self, source: str, target: str) -> float:
        for e in self.edges:
            if e.source == source and e.target == target:
                return e.weight
        raise ModelError(f"no edge {source!r} -> {target!r}")

    def incoming(self, name: str) -> tuple[Edge, ...]:
        return tuple(e for e in self.edges if e.target == name)

    @property
    def f0(self) -> FiringPattern:
        return FiringPattern((n.name, n.init if n.init is not None else 0) for n in self.neurons
                             if n.kind != INPUT)

    def with_kinds(self, kinds: Mapping[str, str]) -> "Network":
        """Copy with some neurons reclassified (no other change)."""
        ns = []
        for n in self.neurons:
            k = kinds.get(n.name, n.kind)
            ns.append(Neuron(n.name, k, n.bias, n.init))
        return Network(tuple(ns), self.edges)


@dataclass(frozen=True)
class InputExecution:
    """A finite prefix of input patterns plus a rule for every later time.

    ``zeros`` continues with all-silent inputs, ``hold`` repeats the last
    prefix row and ``cycle`` repeats the whole prefix.
    """

    names: tuple[str, ...]
    prefix: tuple[tuple[int, ...], ...]
    extension: str = "zeros"

    def __post_init__(self):
        order = sorted(range(len(self.names)), key=lambda i: self.names[i])
        names = tuple(self.names[i] for i in order)
        rows = []
        for row in self.prefix:
            if len(row) != len(names):
                raise ModelError("input row width does not match the input neurons")
            if any(b not in (0, 1) for b in row):
                raise ModelError("input rows hold 0/1 values only")
            rows.append(tuple(int(row[i]) for i in order))
        if not rows:
            raise ModelError("an input execution needs a non-empty prefix")
        if self.extension not in EXTENSIONS:
            raise ModelError(f"unknown extension rule {self.extension!r}")
        object.__setattr__(self, "names", names)
        object.__setattr__(self, "prefix", tuple(rows))

    @classmethod
    def constant(cls, pattern: Mapping[str, int]) -> "InputExecution":
        """A stable input: the same pattern at every time."""
        fp = FiringPattern(pattern)
        return cls(fp.domain, (fp.bits,), "hold")

    @classmethod
    def from_patterns(cls, names: Sequence[str], patterns: Iterable[Mapping[str, int]],
                      extension: str = "zeros") -> "InputExecution":
        return cls(tuple(names), tuple(tuple(p[n] for n in names) for p in patterns), extension)

    @classmethod
    def empty(cls) -> "InputExecution":
        """The trivial input execution of a network without inputs."""
        return cls((), ((),), "zeros")

    def row(self, t: int) -> tuple[int, ...]:
        if t < 0:
            raise ModelError("negative time")
        if t < len(self.prefix):
            return self.prefix[t]
        if self.extension == "zeros":
            return (0,) * len(self.names)
        if self.extension == "hold":
            return self.prefix[-1]
        return self.prefix[t % len(self.prefix)]

    def at(self, t: int) -> FiringPattern:
        return FiringPattern.from_bits(self.names, self.row(t))

    def rows(self, horizon: int) -> tuple[tuple[int, ...], ...]:
        """Rows for times 0..horizon."""
        return tuple(self.row(t) for t in range(horizon + 1))

    def execution(self, horizon: int) -> Execution:
        return Execution.from_rows(self.names, self.rows(horizon))

    def restrict(self, names: Iterable[str]) -> "InputExecution":
        keep = set(names)
        idx = [i for i, n in enumerate(self.names) if n in keep]
        if len(idx) != len(keep):
            raise ModelError("restriction names neurons outside the input execution")
        return InputExecution(tuple(self.names[i] for i in idx),
                              tuple(tuple(r[i] for i in idx) for r in self.prefix), self.extension)

    def is_stable(self) -> bool:
        """True when every time carries the same pattern."""
        if self.extension == "zeros":
            return all(not any(r) for r in self.prefix)
        return len(set(self.prefix)) == 1


@dataclass(frozen=True)
class EngineParams:
    """Sigmoid temperature shared by all neurons."""

    lam: float = 1.0

    def __post_init__(self):
        if not self.lam > 0:
            raise ModelError("temperature must be positive")


# violations ------------------------------------------------------------

INPUT_HAS_INCOMING = "input-has-incoming-edge"
ZERO_WEIGHT = "zero-weight"
UNKNOWN_ENDPOINT = "unknown-endpoint"
DUPLICATE_EDGE = "duplicate-edge"
DUPLICATE_NEURON = "duplicate-neuron"
BAD_BIAS = "bad-bias"
BAD_INIT = "bad-init"
EMPTY_NAME = "empty-name"


@dataclass(frozen=True)
class Violation:
    kind: str
    neurons: tuple[str, ...]
    detail: str = ""


def validate_network(net: Network) -> list[Violation]:
    """Every violated structural invariant; empty means the network is valid."""
    out = []
    seen = set()
    for n in net.neurons:
        if not n.name:
            out.append(Violation(EMPTY_NAME, (n.name,)))
        if n.name in seen:
            out.append(Violation(DUPLICATE_NEURON, (n.name,)))
        seen.add(n.name)
        if n.kind == INPUT:
            if n.bias is not None:
                out.append(Violation(BAD_BIAS, (n.name,), "input neurons carry no bias"))
            if n.init is not None:
                out.append(Violation(BAD_INIT, (n.name,), "F0 covers non-input neurons only"))
        else:
            if n.bias is None or not math.isfinite(n.bias):
                out.append(Violation(BAD_BIAS, (n.name,), "missing or non-finite bias"))
            if n.init not in (0, 1):
                out.append(Violation(BAD_INIT, (n.name,), "F0 value must be 0 or 1"))
    pairs = set()
    for e in net.edges:
        if e.source not in net or e.target not in net:
            out.append(Violation(UNKNOWN_ENDPOINT, (e.source, e.target)))
        elif net.kind(e.target) == INPUT:
            out.append(Violation(INPUT_HAS_INCOMING, (e.source, e.target)))
        if e.weight == 0 or not math.isfinite(e.weight):
            out.append(Violation(ZERO_WEIGHT, (e.source, e.target)))
        if (e.source, e.target) in pairs:
            out.append(Violation(DUPLICATE_EDGE, (e.source, e.target)))
        pairs.add((e.source, e.target))
    return out


def check_network(net: Network) -> Network:
    problems = validate_network(net)
    if problems:
        raise ModelError("invalid network: " + "; ".join(
            f"{v.kind} {','.join(v.neurons)}" for v in problems))
    return net


# firing rule -------------------------------------------------------------

def potential(net: Network, prev: Mapping[str, int], u: str) -> float:
    """Weighted input from the previous configuration minus the bias of ``u``."""
    if net.kind(u) == INPUT:
        raise ModelError(f"{u!r} is an input neuron and has no potential")
    total = 0.0
    for e in net.incoming(u):
        try:
            total += prev[e.source] * e.weight
        except KeyError:
            raise ModelError(f"previous configuration lacks {e.source!r}") from None
    return total - net.bias(u)


def sigmoid(x: float) -> float:
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    z = math.exp(x)
    return z / (1.0 + z)


def firing_probability(pot: float, params: EngineParams) -> float:
    return sigmoid(pot / params.lam)


def initial_configuration(net: Network, input0: Mapping[str, int]) -> FiringPattern:
    """Merge the time-0 input pattern with F0."""
    if set(input0) != set(net.inputs):
        raise ModelError("initial input pattern must cover exactly the input neurons")
    return FiringPattern(input0).merge(net.f0)
