"""Scalar expression graph with recorded reverse-mode differentiation.

Every node is evaluated eagerly when it is created. :func:`gradient` walks the
graph backwards and *records* the adjoint computation as new nodes on the same
graph, so the returned derivatives can be differentiated again to any depth.

>>> g = Graph()
>>> x = g.var(2.0)
>>> dx = gradient(g, x * x * x, [x])[x]
>>> gradient(g, dx, [x])[x].value
12.0
"""
from __future__ import annotations

import math
from typing import Callable, Dict, Iterable, List, Sequence, Tuple, Union

import numpy as np

__all__ = [
    "Graph",
    "Var",
    "GraphError",
    "EvaluationError",
    "var",
    "apply",
    "gradient",
    "finite_difference_check",
    "sin",
    "cos",
    "exp",
    "sigmoid",
    "square",
    "pow_int",
]

_ARITY = {
    "leaf": 0,
    "add": 2,
    "sub": 2,
    "mul": 2,
    "div": 2,
    "neg": 1,
    "pow_int": 1,
    "exp": 1,
    "sin": 1,
    "cos": 1,
    "sigmoid": 1,
    "square": 1,
}


class GraphError(ValueError):
    """Malformed graph construction (arity, foreign handles)."""


class EvaluationError(ArithmeticError):
    """A node's forward value is undefined (e.g. division by exact zero)."""


def _sigmoid(x: float) -> float:
    if x >= 0.0:
        return 1.0 / (1.0 + math.exp(-x))
    z = math.exp(x)
    return z / (1.0 + z)


def _forward(op: str, vals: Sequence[float], k: int) -> float:
    if op == "add":
        return vals[0] + vals[1]
    if op == "sub":
        return vals[0] - vals[1]
    if op == "mul":
        return vals[0] * vals[1]
    if op == "div":
        if vals[1] == 0.0:
            raise EvaluationError("division by exact zero")
        return vals[0] / vals[1]
    if op == "neg":
        return -vals[0]
    if op == "pow_int":
        if k < 0 and vals[0] == 0.0:
            raise EvaluationError("negative power of exact zero")
        return vals[0] ** k
    if op == "exp":
        return math.exp(vals[0])
    if op == "sin":
        return math.sin(vals[0])
    if op == "cos":
        return math.cos(vals[0])
    if op == "sigmoid":
        return _sigmoid(vals[0])
    if op == "square":
        return vals[0] * vals[0]
    raise GraphError(f"unknown op {op!r}")


class Var:
    """Handle to one node of a :class:`Graph`."""

    __slots__ = ("graph", "index")

    def __init__(self, graph: "Graph", index: int):
        self.graph = graph
        self.index = index

    @property
    def value(self) -> float:
        return self.graph.values[self.index]

    def __repr__(self) -> str:
        return f"Var({self.index}, {self.value!r})"

    def __hash__(self) -> int:
        return hash((id(self.graph), self.index))

    def __eq__(self, other: object) -> bool:
        return (
            isinstance(other, Var)
            and other.graph is self.graph
            and other.index == self.index
        )

    def _lift(self, other: "Operand") -> "Var":
        if isinstance(other, Var):
            return other
        return self.graph.var(float(other))

    def __add__(self, other):
        return self.graph.apply("add", [self, self._lift(other)])

    def __radd__(self, other):
        return self.graph.apply("add", [self._lift(other), self])

    def __sub__(self, other):
        return self.graph.apply("sub", [self, self._lift(other)])

    def __rsub__(self, other):
        return self.graph.apply("sub", [self._lift(other), self])

    def __mul__(self, other):
        return self.graph.apply("mul", [self, self._lift(other)])

    def __rmul__(self, other):
        return self.graph.apply("mul", [self._lift(other), self])

    def __truediv__(self, other):
        return self.graph.apply("div", [self, self._lift(other)])

    def __rtruediv__(self, other):
        return self.graph.apply("div", [self._lift(other), self])

    def __neg__(self):
        return self.graph.apply("neg", [self])

    def __pow__(self, k: int):
        if int(k) != k:
            raise GraphError("only integer powers are supported")
        return self.graph.apply("pow_int", [self], k=int(k))


Operand = Union[Var, float, int]


class Graph:
    """Append-only tape of scalar nodes.

    Node ``i`` stores its op name, operand indices (all ``< i``), an integer
    attribute (the exponent for ``pow_int``) and its cached forward value.
    """

    def __init__(self):
        self.ops: List[str] = []
        self.args: List[Tuple[int, ...]] = []
        self.attrs: List[int] = []
        self.values: List[float] = []

    def __len__(self) -> int:
        return len(self.values)

    @property
    def next_id(self) -> int:
        return len(self.values)

    def _push(self, op: str, args: Tuple[int, ...], k: int, value: float) -> Var:
        self.ops.append(op)
        self.args.append(args)
        self.attrs.append(k)
        self.values.append(value)
        return Var(self, len(self.values) - 1)

    def var(self, value: float) -> Var:
        return self._push("leaf", (), 0, float(value))

    def vars(self, values: Iterable[float]) -> List[Var]:
        return [self.var(v) for v in values]

    def apply(self, op: str, operands: Sequence[Var], k: int = 0) -> Var:
        if op not in _ARITY or op == "leaf":
            raise GraphError(f"unknown op {op!r}")
        if len(operands) != _ARITY[op]:
            raise GraphError(
                f"{op} takes {_ARITY[op]} operand(s), got {len(operands)}"
            )
        idx = []
        for v in operands:
            if not isinstance(v, Var) or v.graph is not self:
                raise GraphError("operand does not belong to this graph")
            if not 0 <= v.index < len(self.values):
                raise GraphError(f"dangling handle {v.index}")
            idx.append(v.index)
        value = _forward(op, [self.values[i] for i in idx], k)
        return self._push(op, tuple(idx), k, value)

    def reevaluate(self, i: int) -> float:
        if self.ops[i] == "leaf":
            return self.values[i]
        return _forward(self.ops[i], [self.values[j] for j in self.args[i]], self.attrs[i])

    def check(self) -> None:
        """Assert topological order and bit-exact replay of every node."""
        for i, (op, args) in enumerate(zip(self.ops, self.args)):
            if any(j >= i for j in args):
                raise GraphError(f"node {i} references a later node")
            if op != "leaf" and self.reevaluate(i) != self.values[i]:
                raise GraphError(f"node {i} does not replay its cached value")


def var(graph: Graph, value: float) -> Var:
    return graph.var(value)


def apply(graph: Graph, op: str, operands: Sequence[Var], k: int = 0) -> Var:
    return graph.apply(op, operands, k=k)


def _unary(op: str):
    def fn(x):
        if isinstance(x, Var):
            return x.graph.apply(op, [x])
        return _forward(op, [float(x)], 0)

    fn.__name__ = op
    return fn


sin = _unary("sin")
cos = _unary("cos")
exp = _unary("exp")
sigmoid = _unary("sigmoid")
square = _unary("square")


def pow_int(x, k: int):
    if isinstance(x, Var):
        return x.graph.apply("pow_int", [x], k=k)
    return float(x) ** k


def _local_adjoints(g: Graph, i: int, adj: Var) -> List[Tuple[int, Var]]:
    """Contributions ``adj * d(node_i)/d(operand)`` as new graph nodes."""
    op = g.ops[i]
    args = g.args[i]
    out = Var(g, i)
    a = Var(g, args[0]) if args else None
    if op == "add":
        return [(args[0], adj), (args[1], adj)]
    if op == "sub":
        return [(args[0], adj), (args[1], -adj)]
    if op == "mul":
        b = Var(g, args[1])
        return [(args[0], adj * b), (args[1], adj * a)]
    if op == "div":
        b = Var(g, args[1])
        q = adj / b
        return [(args[0], q), (args[1], -(q * out))]
    if op == "neg":
        return [(args[0], -adj)]
    if op == "pow_int":
        k = g.attrs[i]
        if k == 0:
            return []
        if k == 1:
            return [(args[0], adj)]
        return [(args[0], adj * (pow_int(a, k - 1) * float(k)))]
    if op == "exp":
        return [(args[0], adj * out)]
    if op == "sin":
        return [(args[0], adj * cos(a))]
    if op == "cos":
        return [(args[0], -(adj * sin(a)))]
    if op == "sigmoid":
        return [(args[0], adj * (out * (1.0 - out)))]
    if op == "square":
        return [(args[0], adj * (a * 2.0))]
    return []


def gradient(graph: Graph, output: Var, wrt: Sequence[Var]) -> Dict[Var, Var]:
    """Derivatives of ``output`` w.r.t. each of ``wrt`` as on-graph nodes.

    Variables that ``output`` does not depend on map to a constant ``0`` leaf.
    """
    for v in [output, *wrt]:
        if not isinstance(v, Var) or v.graph is not graph:
            raise GraphError("handle does not belong to this graph")
    top = output.index
    # ancestors of the output only
    live = bytearray(top + 1)
    live[top] = 1
    for i in range(top, -1, -1):
        if live[i]:
            for j in graph.args[i]:
                live[j] = 1
    adjoint: Dict[int, Var] = {top: graph.var(1.0)}
    for i in range(top, -1, -1):
        if not live[i] or i not in adjoint or graph.ops[i] == "leaf":
            continue
        for j, contrib in _local_adjoints(graph, i, adjoint[i]):
            prev = adjoint.get(j)
            adjoint[j] = contrib if prev is None else prev + contrib
    result: Dict[Var, Var] = {}
    for v in wrt:
        d = adjoint.get(v.index)
        result[v] = d if d is not None else graph.var(0.0)
    return result


def finite_difference_check(
    f: Callable[[List[Var]], Var],
    x: Sequence[float],
    h: float = 1e-5,
) -> np.ndarray:
    """Per-dimension relative error between :func:`gradient` and central differences.

    ``f`` maps a list of graph variables to a scalar node (use the
    module-level ``sin``/``exp``/... helpers or operator overloading).
    The relative error uses ``max(|analytic|, 1e-8)`` as denominator.
    """
    if h <= 0:
        raise ValueError("h must be positive")
    x = [float(v) for v in x]

    def value_at(point: Sequence[float]) -> float:
        g = Graph()
        out = f(g.vars(point))
        val = out.value if isinstance(out, Var) else float(out)
        if not math.isfinite(val):
            raise EvaluationError(f"f is not finite at {list(point)}")
        return val

    g = Graph()
    xs = g.vars(x)
    out = f(xs)
    if not isinstance(out, Var):
        out = g.var(float(out))
    if not math.isfinite(out.value):
        raise EvaluationError(f"f is not finite at {x}")
    grads = gradient(g, out, xs)
    errors = np.empty(len(x))
    for i, xi in enumerate(xs):
        up = list(x)
        dn = list(x)
        up[i] += h
        dn[i] -= h
        numeric = (value_at(up) - value_at(dn)) / (2.0 * h)
        analytic = grads[xi].value
        errors[i] = abs(analytic - numeric) / max(abs(analytic), 1e-8)
    return errors
