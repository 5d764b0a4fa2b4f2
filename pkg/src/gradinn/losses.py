"""Loss terms for gradient-informed training.

Index conventions for the auxiliary networks (``d`` inputs, ``d_o`` outputs):

* gradient network F: output ``k * d + i`` holds the belief about ``dU^k/dx_i``;
* Hessian network G: output ``(k * d + i) * d + j`` holds ``d2U^k/dx_i dx_j``.

Each term exists twice: on the scalar autodiff graph (``loss_*``) and as a
vectorized JAX function over a masked batch (``batch_*``).  The masked form
lets ragged batches be padded to a fixed shape; the mean is taken over the
unmasked rows only.
"""
from __future__ import annotations

from dataclasses import dataclass, fields
from typing import Dict, Mapping

import jax.numpy as jnp
import numpy as np

from . import autodiff as ad
from . import network as nw

TERMS = ("l_u", "l_f", "l_g", "l_gf")


@dataclass(frozen=True)
class LossConfig:
    use_F: bool = False
    use_G: bool = False
    use_consistency: bool = False
    weight_U: float = 1.0
    weight_F: float = 1.0
    weight_G: float = 1.0
    weight_GF: float = 1.0
    l1: float = 0.0
    l2: float = 0.0
    sobolev: bool = False

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, float) and (not np.isfinite(v) or v < 0):
                raise ValueError(f"{f.name} must be finite and >= 0, got {v}")
        if self.use_G and not self.use_F:
            raise ValueError("the Hessian term needs the gradient network (use_F)")
        if self.use_consistency and not self.use_G:
            raise ValueError("the consistency term needs both F and G")

    @property
    def enabled(self) -> tuple:
        out = ["l_u"]
        if self.use_F:
            out.append("l_f")
        if self.use_G:
            out.append("l_g")
        if self.use_consistency:
            out.append("l_gf")
        return tuple(out)

    def without_collocation(self) -> "LossConfig":
        """The objective left over when there are no collocation points."""
        return LossConfig(
            weight_U=self.weight_U, l1=self.l1, l2=self.l2, sobolev=self.sobolev
        )


@dataclass(frozen=True)
class LossReport:
    total: float
    l_u: float
    l_f: float = 0.0
    l_g: float = 0.0
    l_gf: float = 0.0
    penalty: float = 0.0

    def as_dict(self) -> Dict[str, float]:
        return {f.name: getattr(self, f.name) for f in fields(self)}


def combine(config: LossConfig, l_u, l_f=0.0, l_g=0.0, l_gf=0.0, penalty=0.0):
    """Weighted total; works on floats, graph nodes and JAX arrays alike."""
    total = l_u * config.weight_U if config.weight_U != 1.0 else l_u
    if config.use_F:
        total = total + (l_f * config.weight_F if config.weight_F != 1.0 else l_f)
    if config.use_G:
        total = total + (l_g * config.weight_G if config.weight_G != 1.0 else l_g)
    if config.use_consistency:
        total = total + (l_gf * config.weight_GF if config.weight_GF != 1.0 else l_gf)
    if config.l1 or config.l2:
        total = total + penalty
    return total


def compose(config: LossConfig, terms: Mapping[str, float], penalty: float = 0.0) -> LossReport:
    missing = [t for t in config.enabled if t not in terms]
    if missing:
        raise ValueError(f"enabled loss terms missing: {missing}")
    vals = {t: (float(terms[t]) if t in config.enabled else 0.0) for t in TERMS}
    pen = float(penalty) if (config.l1 or config.l2) else 0.0
    total = combine(config, vals["l_u"], vals["l_f"], vals["l_g"], vals["l_gf"], pen)
    return LossReport(total=float(total), penalty=pen, **vals)


# --------------------------------------------------------------------------
# scalar graph route


def _require_rows(X, what: str):
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if X.shape[0] == 0:
        raise ValueError(f"empty {what} batch")
    return X


def _mean(terms):
    acc = terms[0]
    for t in terms[1:]:
        acc = acc + t
    return acc / float(len(terms))


def loss_data(u: nw.BoundParams, spec: nw.MlpSpec, graph: ad.Graph, X, Y) -> ad.Var:
    X = _require_rows(X, "labeled")
    Y = np.asarray(Y, dtype=np.float64).reshape(X.shape[0], -1)
    per_point = []
    for x, y in zip(X, Y):
        out = nw.forward(u, spec, graph, graph.vars(x))
        err = [ad.square(o - float(t)) for o, t in zip(out, y)]
        per_point.append(sum(err[1:], err[0]))
    return _mean(per_point)


def loss_gradient_match(u, spec_u, f, spec_f, graph: ad.Graph, Xc) -> ad.Var:
    Xc = _require_rows(Xc, "collocation")
    per_point = []
    for x in Xc:
        xv = graph.vars(x)
        jac = nw.input_jacobian(u, spec_u, graph, xv)
        belief = nw.forward(f, spec_f, graph, xv)
        flat = [d for row in jac for d in row]
        err = [ad.square(b - j) for b, j in zip(belief, flat)]
        per_point.append(sum(err[1:], err[0]))
    return _mean(per_point)


def loss_hessian_match(u, spec_u, g, spec_g, graph: ad.Graph, Xc) -> ad.Var:
    Xc = _require_rows(Xc, "collocation")
    per_point = []
    for x in Xc:
        xv = graph.vars(x)
        hess = nw.input_hessian(u, spec_u, graph, xv)
        belief = nw.forward(g, spec_g, graph, xv)
        flat = [h for hk in hess for row in hk for h in row]
        err = [ad.square(b - h) for b, h in zip(belief, flat)]
        per_point.append(sum(err[1:], err[0]))
    return _mean(per_point)


def loss_consistency(f, spec_f, g, spec_g, graph: ad.Graph, Xc) -> ad.Var:
    Xc = _require_rows(Xc, "collocation")
    per_point = []
    for x in Xc:
        xv = graph.vars(x)
        jf = nw.input_jacobian(f, spec_f, graph, xv)
        belief = nw.forward(g, spec_g, graph, xv)
        flat = [d for row in jf for d in row]
        err = [ad.square(b - d) for b, d in zip(belief, flat)]
        per_point.append(sum(err[1:], err[0]))
    return _mean(per_point)


def loss_sobolev(u, spec: nw.MlpSpec, graph: ad.Graph, X, Y, dY) -> ad.Var:
    if dY is None:
        raise ValueError("Sobolev training needs gradient labels")
    X = _require_rows(X, "labeled")
    Y = np.asarray(Y, dtype=np.float64).reshape(X.shape[0], -1)
    dY = np.asarray(dY, dtype=np.float64).reshape(X.shape[0], spec.output_dim, spec.input_dim)
    per_point = []
    for x, y, dy in zip(X, Y, dY):
        xv = graph.vars(x)
        out = nw.forward(u, spec, graph, xv)
        err = [ad.square(o - float(t)) for o, t in zip(out, y)]
        for k, o in enumerate(out):
            grads = ad.gradient(graph, o, xv)
            err += [ad.square(grads[xi] - float(dy[k, i])) for i, xi in enumerate(xv)]
        per_point.append(sum(err[1:], err[0]))
    return _mean(per_point)


def penalty(u: nw.BoundParams, graph: ad.Graph, l1: float, l2: float) -> ad.Var:
    if l1 < 0 or l2 < 0:
        raise ValueError("penalty weights must be >= 0")
    acc = graph.var(0.0)
    for W in u.weights:
        for row in W:
            for w in row:
                if l1:
                    acc = acc + (w if w.value >= 0 else -w) * l1
                if l2:
                    acc = acc + ad.square(w) * l2
    return acc


# --------------------------------------------------------------------------
# vectorized JAX route


def _masked_mean(per_point, mask):
    count = jnp.maximum(jnp.sum(mask), 1.0)
    return jnp.sum(per_point * mask) / count


def batch_data(u_tree, X, Y, mask):
    r = nw.apply(u_tree, X) - Y
    return _masked_mean(jnp.sum(r * r, axis=-1), mask)


def batch_gradient_match(u_tree, f_tree, Xc, mask):
    J = nw.jacobian(u_tree, Xc).reshape(Xc.shape[0], -1)
    r = nw.apply(f_tree, Xc) - J
    return _masked_mean(jnp.sum(r * r, axis=-1), mask)


def batch_hessian_match(u_tree, g_tree, Xc, mask):
    H = nw.hessian(u_tree, Xc).reshape(Xc.shape[0], -1)
    r = nw.apply(g_tree, Xc) - H
    return _masked_mean(jnp.sum(r * r, axis=-1), mask)


def batch_consistency(f_tree, g_tree, Xc, mask):
    JF = nw.jacobian(f_tree, Xc).reshape(Xc.shape[0], -1)
    r = nw.apply(g_tree, Xc) - JF
    return _masked_mean(jnp.sum(r * r, axis=-1), mask)


def batch_sobolev(u_tree, X, Y, dY, mask):
    J = nw.jacobian(u_tree, X).reshape(X.shape[0], -1)
    r = J - dY.reshape(X.shape[0], -1)
    return batch_data(u_tree, X, Y, mask) + _masked_mean(jnp.sum(r * r, axis=-1), mask)


def batch_penalty(u_tree, l1: float, l2: float):
    acc = 0.0
    for W, _ in u_tree:
        if l1:
            acc = acc + l1 * jnp.sum(jnp.abs(W))
        if l2:
            acc = acc + l2 * jnp.sum(W * W)
    return acc
