"""Feedforward networks on a DAG of neurons.

A neuron computes ``act(sum_k w_k z_k + h)``; a ``multiply`` neuron computes
``prod_k (w_k z_k) + h``. Piecewise activations record which branch they took,
so every evaluation also yields the branch key used for van der Waerden
colorings.
"""

import logging
import re
from graphlib import CycleError, TopologicalSorter
from typing import Any, Callable

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from xprlab.bignum import BigReal, arcsin_big, big, context, sin_big
from xprlab.certify import Certificate, Coloring, exp_poly_sub_certifier, hankel_sub_certifier
from xprlab.config import config
from xprlab.core.errors import ActivationDomainError, DomainError, LengthError
from xprlab.families import SampleGrid

logger = logging.getLogger(__name__)

ACTIVATIONS = (
    "identity",
    "step",
    "relu",
    "leaky_relu",
    "sq_relu",
    "sin",
    "arcsin",
    "tanh",
    "sigmoid",
    "elu",
    "swish",
    "gaussian",
    "multiply",
)
PIECEWISE = frozenset({"step", "relu", "leaky_relu", "sq_relu", "elu"})
# activations that count towards the one-per-path limit
TRANSCENDENTAL = frozenset({"sin", "tanh", "sigmoid", "elu", "swish", "gaussian", "arcsin"})
DEFAULT_SLOPE = {"leaky_relu": 0.01, "elu": 1.0}

_ACT_PATTERN = re.compile(r"^\s*([a-z_]+)\s*(?:\(\s*([^)]+?)\s*\))?\s*$")

UNIVERSAL_BLOCKS = 4
UNIVERSAL_BLOCK_PARAMS = 16
UNIVERSAL_PARAM_COUNT = UNIVERSAL_BLOCKS * UNIVERSAL_BLOCK_PARAMS + UNIVERSAL_BLOCKS + 1


def parse_activation(tag: str) -> tuple[str, float | None]:
    """``"leaky_relu(0.2)"`` -> ``("leaky_relu", 0.2)``."""
    match = _ACT_PATTERN.match(tag)
    if not match or match.group(1) not in ACTIVATIONS:
        raise DomainError(f"unknown activation {tag!r}")
    name, arg = match.groups()
    if arg is None:
        return name, DEFAULT_SLOPE.get(name)
    if name not in DEFAULT_SLOPE:
        raise DomainError(f"activation {name!r} takes no parameter")
    return name, float(arg)


class Edge(BaseModel):
    model_config = ConfigDict(frozen=True, validate_by_name=True, serialize_by_alias=True)

    source: str = Field(alias="from")
    w: BigReal

    @field_validator("source", mode="before")
    @classmethod
    def _as_str(cls, value: Any) -> str:
        return str(value)


class Neuron(BaseModel):
    model_config = ConfigDict(frozen=True)

    id: str
    act: str = "identity"
    inputs: list[Edge] = Field(default_factory=list)
    bias: BigReal = Field(default_factory=lambda: big(0))

    @field_validator("id", mode="before")
    @classmethod
    def _id_as_str(cls, value: Any) -> str:
        return str(value)

    @field_validator("act")
    @classmethod
    def _known_activation(cls, value: str) -> str:
        parse_activation(value)
        return value

    @property
    def kind(self) -> str:
        return parse_activation(self.act)[0]


class NetworkGraph(BaseModel):
    model_config = ConfigDict(frozen=True)

    nodes: list[Neuron]
    input: str
    output: str
    budget: int | None = None

    @field_validator("input", "output", mode="before")
    @classmethod
    def _as_str(cls, value: Any) -> str:
        return str(value)

    @model_validator(mode="after")
    def _check_graph(self) -> "NetworkGraph":
        ids = [n.id for n in self.nodes]
        if len(set(ids)) != len(ids):
            raise ValueError("neuron ids must be unique")
        known = set(ids)
        for node in self.nodes:
            for edge in node.inputs:
                if edge.source not in known:
                    raise ValueError(f"neuron {node.id!r} reads from unknown neuron {edge.source!r}")
        if self.input not in known or self.output not in known:
            raise ValueError("input and output must name neurons of the graph")
        by_id = self.by_id()
        if by_id[self.input].inputs:
            raise ValueError("the input neuron cannot have incoming edges")
        if by_id[self.output].kind != "identity":
            raise ValueError("the output neuron must be an affine readout")
        if self.budget is not None and len(self.nodes) > self.budget:
            raise ValueError(f"{len(self.nodes)} neurons exceed the budget of {self.budget}")
        try:
            self.order()
        except CycleError as e:
            raise ValueError(f"network has a cycle through {e.args[1]}") from e
        return self

    def by_id(self) -> dict[str, Neuron]:
        return {n.id: n for n in self.nodes}

    def order(self) -> list[str]:
        """Neuron ids in a topological order."""
        sorter = TopologicalSorter({n.id: [e.source for e in n.inputs] for n in self.nodes})
        return list(sorter.static_order())


class BranchTrace(BaseModel):
    model_config = ConfigDict(frozen=True)

    neurons: list[str] = Field(default_factory=list)
    branches: list[int] = Field(default_factory=list)

    def color(self) -> tuple[int, ...]:
        return tuple(self.branches)


class ValidationResult(BaseModel):
    model_config = ConfigDict(frozen=True)

    ok: bool
    max_count: int
    path: list[str] | None = None


# -- evaluation ---------------------------------------------------------------


def _activate(neuron: Neuron, z: Any, bits: int) -> tuple[Any, int | None]:
    ctx = context(bits)
    name, slope = parse_activation(neuron.act)
    match name:
        case "identity":
            return z, None
        case "step":
            return (ctx.one, 1) if z >= 0 else (ctx.zero, 0)
        case "relu":
            return (z, 1) if z >= 0 else (ctx.zero, 0)
        case "leaky_relu":
            return (z, 1) if z >= 0 else (ctx.mpf(slope) * z, 0)
        case "sq_relu":
            return (z * z, 1) if z >= 0 else (ctx.zero, 0)
        case "elu":
            return (z, 1) if z >= 0 else (ctx.mpf(slope) * ctx.expm1(z), 0)
        case "sin":
            return sin_big(z, bits), None
        case "arcsin":
            try:
                return arcsin_big(z, bits, slop=ctx.ldexp(1, -(bits // 2))), None
            except DomainError as e:
                raise ActivationDomainError(neuron.id, str(e)) from e
        case "tanh":
            return ctx.tanh(z), None
        case "sigmoid":
            return 1 / (1 + ctx.exp(-z)), None
        case "swish":
            return z / (1 + ctx.exp(-z)), None
        case "gaussian":
            return ctx.exp(-z * z), None
    raise DomainError(f"cannot apply activation {neuron.act!r}")


def eval_network(net: NetworkGraph, x: Any, bits: int | None = None) -> tuple[Any, BranchTrace]:
    """Evaluate in topological order, recording every piecewise branch."""
    bits = bits or config.bits
    ctx = context(bits)
    nodes = net.by_id()
    values: dict[str, Any] = {}
    traced: list[str] = []
    branches: list[int] = []
    for node_id in net.order():
        neuron = nodes[node_id]
        if node_id == net.input:
            values[node_id] = big(x, bits)
            continue
        bias = ctx.mpf(neuron.bias)
        if neuron.kind == "multiply":
            product = ctx.one
            for edge in neuron.inputs:
                product *= ctx.mpf(edge.w) * values[edge.source]
            values[node_id] = product + bias
            continue
        z = ctx.fsum(ctx.mpf(e.w) * values[e.source] for e in neuron.inputs) + bias
        values[node_id], branch = _activate(neuron, z, bits)
        if branch is not None:
            traced.append(node_id)
            branches.append(branch)
    return values[net.output], BranchTrace(neurons=traced, branches=branches)


def validate_single_transcendental(net: NetworkGraph) -> ValidationResult:
    """At most one transcendental neuron on every path from the input to the output."""
    nodes = net.by_id()
    # node -> (max count on a path from the input, that path)
    best: dict[str, tuple[int, list[str]]] = {}
    for node_id in net.order():
        neuron = nodes[node_id]
        own = 1 if neuron.kind in TRANSCENDENTAL else 0
        if node_id == net.input:
            best[node_id] = (own, [node_id])
            continue
        reached = [best[e.source] for e in neuron.inputs if e.source in best]
        if not reached:
            continue
        count, path = max(reached, key=lambda item: item[0])
        best[node_id] = (count + own, [*path, node_id])
    count, path = best.get(net.output, (0, []))
    if count > 1:
        logger.debug("path %s carries %d transcendental neurons", " -> ".join(path), count)
        return ValidationResult(ok=False, max_count=count, path=path)
    return ValidationResult(ok=True, max_count=count)


def branch_coloring(net: NetworkGraph, a: Any, h: Any, m: int, bits: int | None = None) -> Coloring:
    """Branch key of every grid point ``a + k h``, renumbered densely from 0."""
    bits = bits or config.bits
    a, h = big(a, bits), big(h, bits)
    keys = [eval_network(net, a + k * h, bits)[1].color() for k in range(m + 1)]
    return Coloring.from_keys(keys)


def branch_colorer(net: NetworkGraph, bits: int | None = None):
    """``x -> branch key`` in the form ``vdw_composite_certificate`` takes."""
    return lambda x: eval_network(net, x, bits)[1].color()


def network_sampler(net: NetworkGraph, bits: int | None = None):
    return lambda x: eval_network(net, x, bits)[0]


# -- the universal sin/arcsin network -----------------------------------------


def build_universal_sin_arcsin(weights: list[Any]) -> NetworkGraph:
    """The fixed universal architecture of four replicated sin/arcsin blocks.

    Block ``j`` consumes 16 parameters in this order::

        H1 = sin(w x + h)
        H2 = arcsin(w H1 + h)
        H3 = sin(w H2 + h)
        H4 = arcsin(w H3 + h)
        H5 = w H4 + w H2 + h
        H6 = sin(w x + w H2[j-1 mod 4] + h)
        H7 = sin(w H6 + h)
        H9 = H7 * H5

    and the readout takes one weight per block plus a bias.
    """
    if len(weights) != UNIVERSAL_PARAM_COUNT:
        raise LengthError(f"expected {UNIVERSAL_PARAM_COUNT} weights, got {len(weights)}")
    params = iter(weights)

    def take() -> Any:
        return next(params)

    def node(node_id: str, act: str, sources: list[str]) -> Neuron:
        inputs = [Edge(source=s, w=take()) for s in sources]
        return Neuron(id=node_id, act=act, inputs=inputs, bias=take())

    nodes = [Neuron(id="x")]
    for j in range(UNIVERSAL_BLOCKS):
        b = f"b{j}"
        previous = f"b{(j - 1) % UNIVERSAL_BLOCKS}_h2"
        nodes += [
            node(f"{b}_h1", "sin", ["x"]),
            node(f"{b}_h2", "arcsin", [f"{b}_h1"]),
            node(f"{b}_h3", "sin", [f"{b}_h2"]),
            node(f"{b}_h4", "arcsin", [f"{b}_h3"]),
            node(f"{b}_h5", "identity", [f"{b}_h4", f"{b}_h2"]),
            node(f"{b}_h6", "sin", ["x", previous]),
            node(f"{b}_h7", "sin", [f"{b}_h6"]),
            Neuron(
                id=f"{b}_h9",
                act="multiply",
                inputs=[Edge(source=f"{b}_h7", w=1), Edge(source=f"{b}_h5", w=1)],
            ),
        ]
    nodes.append(node("y", "identity", [f"b{j}_h9" for j in range(UNIVERSAL_BLOCKS)]))
    return NetworkGraph(nodes=nodes, input="x", output="y")


# -- multiplication from sines ------------------------------------------------

MULT_ERROR_CONSTANT = 1 / 3


def _square_terms(u: Any, eps: Any, bits: int) -> tuple[Any, Any, Any]:
    ctx = context(bits)
    half_pi = ctx.pi / 2
    return sin_big(half_pi, bits), sin_big(half_pi + eps * u, bits), sin_big(half_pi - eps * u, bits)


def mult_via_sines(z1: Any, z2: Any, eps: Any, bits: int | None = None) -> tuple[Any, Any]:
    """``z1 z2`` from six sine neurons, with the bound ``eps^2 / 3`` on the error.

    The group evaluates ``sin(eps z1) sin(eps z2) / eps^2`` through the
    product-to-sum identity ``sin a sin b = (cos(a - b) - cos(a + b)) / 2``.
    Each half ``u = z1 -/+ z2`` feeds ``sin(π/2)``, ``sin(π/2 + eps u)`` and
    ``sin(π/2 - eps u)``: the pair gives ``2 cos(eps u)`` and the constant
    neurons cancel across the halves. Read as squares, the same sum is the
    polarization ``((z1 + z2)^2 - (z1 - z2)^2) / 4``.
    """
    bits = bits or config.bits
    ctx = context(bits)
    z1, z2, eps = big(z1, bits), big(z2, bits), big(eps, bits)
    if abs(z1) > 1 or abs(z2) > 1:
        raise DomainError("mult_via_sines needs |z1|, |z2| <= 1")
    if not 0 < eps <= ctx.mpf("0.1"):
        raise DomainError("eps must lie in (0, 0.1]")

    def square(u: Any):
        c, plus, minus = _square_terms(u, eps, bits)
        return (2 * c - plus - minus) / (eps * eps)

    product = (square(z1 + z2) - square(z1 - z2)) / 4
    return product, ctx.mpf(MULT_ERROR_CONSTANT) * eps * eps


def replace_multiplications(net: NetworkGraph, eps: Any, bits: int | None = None) -> NetworkGraph:
    """Rewrite each two-input multiply neuron as a six-sine group plus a readout."""
    bits = bits or config.bits
    ctx = context(bits)
    eps = big(eps, bits)
    half_pi = ctx.pi / 2
    scale = 1 / (4 * eps * eps)
    nodes: list[Neuron] = []
    for neuron in net.nodes:
        if neuron.kind != "multiply":
            nodes.append(neuron)
            continue
        if len(neuron.inputs) != 2:
            raise DomainError(f"multiply neuron {neuron.id!r} has {len(neuron.inputs)} inputs, need 2")
        first, second = neuron.inputs
        readout = []
        for tag, sign in (("p", 1), ("m", -1)):
            group = [
                Neuron(id=f"{neuron.id}_{tag}0", act="sin", bias=half_pi),
                *(
                    Neuron(
                        id=f"{neuron.id}_{tag}{k}",
                        act="sin",
                        inputs=[
                            Edge(source=first.source, w=direction * eps * first.w),
                            Edge(source=second.source, w=direction * sign * eps * second.w),
                        ],
                        bias=half_pi,
                    )
                    for k, direction in ((1, 1), (2, -1))
                ),
            ]
            nodes.extend(group)
            readout += [
                Edge(source=group[0].id, w=sign * 2 * scale),
                Edge(source=group[1].id, w=-sign * scale),
                Edge(source=group[2].id, w=-sign * scale),
            ]
        nodes.append(Neuron(id=neuron.id, act="identity", inputs=readout, bias=neuron.bias))
    return NetworkGraph(nodes=nodes, input=net.input, output=net.output)


# -- random networks with one transcendental layer ----------------------------


# transcendental neuron -> (sub-certifier family, progression length s~)
BRANCH_CERTIFIERS: dict[str, tuple[str, int]] = {
    "gaussian": ("exppoly", 4),
    "sin": ("hankel", 5),
}


def branch_certifier(activation: str, bits: int | None = None) -> tuple[Callable[[SampleGrid], Certificate], int]:
    """Sub-certifier and ``s_tilde`` for the branches of a random network.

    A Gaussian branch is ``c e^{P(x)}`` with ``deg P <= 2``; a sine branch is
    ``c sin(w x + h)``, a member of H2_1.
    """
    try:
        family, s_tilde = BRANCH_CERTIFIERS[activation]
    except KeyError:
        raise DomainError(f"no branch certifier for {activation!r}") from None
    if family == "exppoly":
        return exp_poly_sub_certifier(2, bits=bits), s_tilde
    return hankel_sub_certifier(1, bits=bits), s_tilde


def random_single_transcendental_network(
    rng: np.random.Generator, k: int = 2, activation: str = "gaussian"
) -> NetworkGraph:
    """Up to two piecewise-linear neurons, one transcendental neuron and a readout.

    The transcendental neuron is a Gaussian or a sine. On each branch it sees an
    affine function of x, so the output is ``c e^{P(x)}`` with ``deg P <= 2``
    or ``c sin(w x + h)``. The kinks sit in (0.1, 0.9), giving at most
    ``k + 1`` branch keys on [0, 1].
    """
    if not 0 <= k <= 2:
        raise DomainError("k must be 0, 1 or 2")
    if activation not in BRANCH_CERTIFIERS:
        raise DomainError(f"activation must be one of {sorted(BRANCH_CERTIFIERS)}")

    def signed(low: float, high: float) -> float:
        return float(rng.choice([-1.0, 1.0]) * rng.uniform(low, high))

    nodes = [Neuron(id="x")]
    inputs = [Edge(source="x", w=float(rng.uniform(-1, 1)))]
    for i in range(k):
        act = str(rng.choice(["relu", "leaky_relu(0.1)", "step"]))
        w = signed(0.5, 2)
        kink = float(rng.uniform(0.1, 0.9))
        nodes.append(Neuron(id=f"p{i}", act=act, inputs=[Edge(source="x", w=w)], bias=-w * kink))
        inputs.append(Edge(source=f"p{i}", w=float(rng.uniform(-0.5, 0.5))))
    nodes.append(Neuron(id="g", act=activation, inputs=inputs, bias=float(rng.uniform(-0.5, 0.5))))
    nodes.append(Neuron(id="y", inputs=[Edge(source="g", w=signed(0.5, 2))]))
    return NetworkGraph(nodes=nodes, input="x", output="y", budget=2 + k + 1)


def universal_random_weights(rng: np.random.Generator, scale: float = 0.5) -> list[float]:
    """Weights in [-scale, scale]; with ``scale <= 0.5`` every arcsin input stays in [-1, 1]."""
    return [float(v) for v in rng.uniform(-scale, scale, UNIVERSAL_PARAM_COUNT)]


def path_count_bound(net: NetworkGraph) -> int:
    """``2^(piecewise neurons)``, the bound on distinct branch keys."""
    return 2 ** sum(1 for n in net.nodes if n.kind in PIECEWISE)

