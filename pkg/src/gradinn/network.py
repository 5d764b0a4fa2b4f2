"""Sigmoid multilayer perceptrons for the solution, gradient and Hessian networks.

Two evaluation routes share one parameter container:

* the scalar :mod:`gradinn.autodiff` graph (``forward``, ``input_jacobian``,
  ``input_hessian``), exact and slow, used as a reference;
* vectorized JAX functions (``apply``, ``jacobian``, ``hessian``) used by
  the trainer.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path
from typing import List, Sequence, Tuple, Union

import jax
import jax.numpy as jnp
import numpy as np

from . import autodiff as ad
from .seeding import SeedLike, rng as _rng

MAGIC = b"GINN"
FORMAT_VERSION = 1


class ParamFileError(ValueError):
    pass


@dataclass(frozen=True)
class MlpSpec:
    input_dim: int
    output_dim: int
    hidden: Tuple[int, ...] = (20, 20, 20)
    activation: str = "sigmoid"
    final_activation: str = "linear"

    def __post_init__(self):
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))
        if min((self.input_dim, self.output_dim, *self.hidden)) < 1:
            raise ValueError("all layer widths must be >= 1")
        if self.activation != "sigmoid" or self.final_activation != "linear":
            raise ValueError("only sigmoid hidden layers with a linear head are supported")

    @property
    def sizes(self) -> Tuple[int, ...]:
        return (self.input_dim, *self.hidden, self.output_dim)

    @property
    def n_params(self) -> int:
        s = self.sizes
        return sum(a * b + b for a, b in zip(s[:-1], s[1:]))


@dataclass
class MlpParams:
    """Per-layer ``(W, b)`` with ``W`` of shape ``(fan_in, fan_out)``."""

    weights: List[np.ndarray]
    biases: List[np.ndarray]

    def __post_init__(self):
        if len(self.weights) != len(self.biases):
            raise ValueError("weights and biases disagree on layer count")
        for W, b in zip(self.weights, self.biases):
            if W.ndim != 2 or b.shape != (W.shape[1],):
                raise ValueError(f"inconsistent layer shapes {W.shape} / {b.shape}")

    @property
    def sizes(self) -> Tuple[int, ...]:
        return (self.weights[0].shape[0], *(W.shape[1] for W in self.weights))

    def tree(self):
        return [(jnp.asarray(W), jnp.asarray(b)) for W, b in zip(self.weights, self.biases)]

    @classmethod
    def from_tree(cls, tree) -> "MlpParams":
        return cls(
            [np.array(W, dtype=np.float64) for W, _ in tree],
            [np.array(b, dtype=np.float64) for _, b in tree],
        )

    def copy(self) -> "MlpParams":
        return MlpParams([W.copy() for W in self.weights], [b.copy() for b in self.biases])

    def all_finite(self) -> bool:
        return all(np.isfinite(W).all() and np.isfinite(b).all()
                   for W, b in zip(self.weights, self.biases))

    def __eq__(self, other) -> bool:
        if not isinstance(other, MlpParams) or self.sizes != other.sizes:
            return False
        return all(np.array_equal(a, b) for a, b in zip(self.weights, other.weights)) and all(
            np.array_equal(a, b) for a, b in zip(self.biases, other.biases)
        )

    def check_spec(self, spec: MlpSpec) -> None:
        if self.sizes != spec.sizes:
            raise ValueError(f"params have layer sizes {self.sizes}, spec wants {spec.sizes}")


def glorot_bound(fan_in: int, fan_out: int) -> float:
    return float(np.sqrt(6.0 / (fan_in + fan_out)))


def init_glorot(spec: MlpSpec, seed: SeedLike) -> MlpParams:
    """Glorot-uniform weights, zero biases."""
    rng = _rng(seed)
    weights, biases = [], []
    s = spec.sizes
    for a, b in zip(s[:-1], s[1:]):
        lim = glorot_bound(a, b)
        weights.append(rng.uniform(-lim, lim, size=(a, b)))
        biases.append(np.zeros(b))
    return MlpParams(weights, biases)


def init_scaled(spec: MlpSpec, seed: SeedLike, scale: float, zero_bias: bool = False) -> MlpParams:
    """Glorot weights times ``scale``; biases uniform in ``[-scale, scale]``.

    Large scales give wiggly initial functions; ``scale=1, zero_bias=True``
    is exactly :func:`init_glorot`.
    """
    if scale <= 0:
        raise ValueError("scale must be positive")
    base = init_glorot(spec, seed)
    weights = [W * scale for W in base.weights]
    if zero_bias:
        biases = [b.copy() for b in base.biases]
    else:
        # separate stream so the weights match init_glorot for the same seed
        rng = _rng(seed, 1)
        biases = [rng.uniform(-scale, scale, size=b.shape) for b in base.biases]
    return MlpParams(weights, biases)


# --------------------------------------------------------------------------
# scalar graph route


@dataclass
class BoundParams:
    """MLP parameters injected as graph leaves."""

    graph: ad.Graph
    weights: List[List[List[ad.Var]]]
    biases: List[List[ad.Var]]

    def leaves(self, include_biases: bool = True) -> List[ad.Var]:
        out = [w for W in self.weights for row in W for w in row]
        if include_biases:
            out += [v for b in self.biases for v in b]
        return out


def bind(params: MlpParams, graph: ad.Graph) -> BoundParams:
    weights = [[graph.vars(row) for row in W] for W in params.weights]
    biases = [graph.vars(b) for b in params.biases]
    return BoundParams(graph, weights, biases)


ParamsLike = Union[MlpParams, BoundParams]


def _bound(params: ParamsLike, graph: ad.Graph) -> BoundParams:
    if isinstance(params, BoundParams):
        if params.graph is not graph:
            raise ad.GraphError("parameters are bound to a different graph")
        return params
    return bind(params, graph)


def forward(params: ParamsLike, spec: MlpSpec, graph: ad.Graph, x: Sequence[ad.Var]) -> List[ad.Var]:
    if len(x) != spec.input_dim:
        raise ValueError(f"expected {spec.input_dim} inputs, got {len(x)}")
    p = _bound(params, graph)
    if len(p.weights) != len(spec.sizes) - 1:
        raise ValueError("parameters do not match the network spec")
    h = list(x)
    last = len(p.weights) - 1
    for layer, (W, b) in enumerate(zip(p.weights, p.biases)):
        nxt = []
        for j in range(len(b)):
            z = b[j]
            for i, hi in enumerate(h):
                z = z + hi * W[i][j]
            nxt.append(z if layer == last else ad.sigmoid(z))
        h = nxt
    return h


def input_jacobian(params: ParamsLike, spec: MlpSpec, graph: ad.Graph, x: Sequence[ad.Var]):
    """``J[k][i] = dU^k/dx_i`` as graph nodes."""
    out = forward(params, spec, graph, x)
    jac = []
    for u in out:
        g = ad.gradient(graph, u, x)
        jac.append([g[xi] for xi in x])
    return jac


def input_hessian(params: ParamsLike, spec: MlpSpec, graph: ad.Graph, x: Sequence[ad.Var]):
    """``H[k][i][j] = d2U^k/dx_i dx_j`` as graph nodes."""
    jac = input_jacobian(params, spec, graph, x)
    hess = []
    for row in jac:
        hk = []
        for d in row:
            g = ad.gradient(graph, d, x)
            hk.append([g[xj] for xj in x])
        hess.append(hk)
    return hess


# --------------------------------------------------------------------------
# vectorized JAX route (params as a list of (W, b) tuples)


def apply_point(tree, x):
    h = x
    for W, b in tree[:-1]:
        h = jax.nn.sigmoid(h @ W + b)
    W, b = tree[-1]
    return h @ W + b


def apply(tree, X):
    """Batched forward pass: ``(n, d) -> (n, d_o)``."""
    return apply_point(tree, X)


def jacobian(tree, X):
    """Batched input Jacobian: ``(n, d) -> (n, d_o, d)``."""
    return jax.vmap(jax.jacfwd(lambda x: apply_point(tree, x)))(X)


def hessian(tree, X):
    """Batched input Hessian: ``(n, d) -> (n, d_o, d, d)``."""
    return jax.vmap(jax.jacfwd(jax.jacfwd(lambda x: apply_point(tree, x))))(X)


_apply_jit = jax.jit(apply)
_jacobian_jit = jax.jit(jacobian)
_hessian_jit = jax.jit(hessian)


def predict(params: MlpParams, X) -> np.ndarray:
    return np.asarray(_apply_jit(params.tree(), jnp.asarray(X, dtype=jnp.float64)))


def predict_jacobian(params: MlpParams, X) -> np.ndarray:
    return np.asarray(_jacobian_jit(params.tree(), jnp.asarray(X, dtype=jnp.float64)))


def predict_hessian(params: MlpParams, X) -> np.ndarray:
    return np.asarray(_hessian_jit(params.tree(), jnp.asarray(X, dtype=jnp.float64)))


# --------------------------------------------------------------------------
# binary serialization


def dumps(params: MlpParams) -> bytes:
    parts = [MAGIC, struct.pack("<II", FORMAT_VERSION, len(params.weights))]
    for W in params.weights:
        parts.append(struct.pack("<II", *W.shape))
    for W, b in zip(params.weights, params.biases):
        parts.append(np.ascontiguousarray(W, dtype="<f8").tobytes())
        parts.append(np.ascontiguousarray(b, dtype="<f8").tobytes())
    return b"".join(parts)


def loads(blob: bytes) -> MlpParams:
    if len(blob) < 12 or blob[:4] != MAGIC:
        raise ParamFileError("bad magic: not a GINN parameter file")
    version, n_layers = struct.unpack_from("<II", blob, 4)
    if version != FORMAT_VERSION:
        raise ParamFileError(f"unsupported format version {version}")
    off = 12
    if len(blob) < off + 8 * n_layers:
        raise ParamFileError("truncated header")
    shapes = [struct.unpack_from("<II", blob, off + 8 * i) for i in range(n_layers)]
    off += 8 * n_layers
    expected = off + 8 * sum(a * b + b for a, b in shapes)
    if len(blob) != expected:
        raise ParamFileError(f"payload is {len(blob)} bytes, header implies {expected}")
    weights, biases = [], []
    for a, b in shapes:
        W = np.frombuffer(blob, dtype="<f8", count=a * b, offset=off).reshape(a, b)
        off += 8 * a * b
        bias = np.frombuffer(blob, dtype="<f8", count=b, offset=off)
        off += 8 * b
        weights.append(W.astype(np.float64))
        biases.append(bias.astype(np.float64))
    for (_, b_out), (a_next, _) in zip(shapes[:-1], shapes[1:]):
        if b_out != a_next:
            raise ParamFileError("layer dimensions do not chain")
    params = MlpParams(weights, biases)
    if not params.all_finite():
        raise ParamFileError("non-finite parameter values")
    return params


def save(params: MlpParams, path) -> None:
    Path(path).write_bytes(dumps(params))


def load(path) -> MlpParams:
    return loads(Path(path).read_bytes())
