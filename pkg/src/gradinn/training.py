"""Joint Adam training of the solution network and its derivative-belief networks.

One optimizer step consumes a labeled batch of size ``bs_U`` paired with a
collocation batch of size ``bs_F = round(bs_U * M / N)``, so both datasets
are traversed once per epoch in the same number of steps.  Epochs are run in
compiled chunks; shuffles come from numpy and are fed in as index arrays,
which keeps :func:`make_batches` the single source of batch order.
"""
from __future__ import annotations

import csv
import io
import math
import time
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import jax
import jax.numpy as jnp
import numpy as np

from . import losses as L
from . import network as nw
from .seeding import SeedLike, rng, seed_join

HISTORY_COLUMNS = ("epoch", "l_u", "l_f", "l_g", "l_gf", "penalty", "total", "lr", "seconds")


class TrainingDiverged(FloatingPointError):
    """Raised when the objective or parameters become non-finite.

    ``history`` holds every epoch completed before the failure.
    """

    def __init__(self, message: str, history: "TrainHistory"):
        super().__init__(message)
        self.history = history


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 10_000
    bs_U: int = 64
    lr0: float = 0.1
    decay_steps: int = 500
    decay_rate: float = 0.90
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: SeedLike = 0
    loss: L.LossConfig = field(default_factory=L.LossConfig)
    chunk: int = 100

    def __post_init__(self):
        if self.bs_U < 1 or self.epochs < 1 or self.chunk < 1:
            raise ValueError("bs_U, epochs and chunk must be >= 1")
        if not self.lr0 > 0:
            raise ValueError("lr0 must be positive")


def lr_schedule(config: TrainConfig, epoch: int) -> float:
    """Inverse time decay, evaluated once per epoch."""
    if epoch < 0:
        raise ValueError("epoch must be >= 0")
    return config.lr0 / (1.0 + config.decay_rate * epoch / config.decay_steps)


# --------------------------------------------------------------------------
# Adam


@dataclass
class AdamState:
    m: object
    v: object
    step: int = 0


def adam_init(params) -> AdamState:
    zeros = jax.tree_util.tree_map(jnp.zeros_like, params)
    return AdamState(zeros, zeros, 0)


def _adam_update(params, grads, m, v, step, lr, b1, b2, eps):
    step = step + 1
    m = jax.tree_util.tree_map(lambda a, g: b1 * a + (1.0 - b1) * g, m, grads)
    v = jax.tree_util.tree_map(lambda a, g: b2 * a + (1.0 - b2) * g * g, v, grads)
    c1 = 1.0 - b1**step
    c2 = 1.0 - b2**step
    params = jax.tree_util.tree_map(
        lambda p, a, b: p - lr * (a / c1) / (jnp.sqrt(b / c2) + eps), params, m, v
    )
    return params, m, v, step


def adam_step(params, grads, state: AdamState, lr: float, beta1=0.9, beta2=0.999, eps=1e-8):
    """One bias-corrected Adam update on a pytree of arrays."""
    leaves, _ = jax.tree_util.tree_flatten_with_path(grads)
    for path, g in leaves:
        if not np.all(np.isfinite(np.asarray(g))):
            raise FloatingPointError(
                f"non-finite gradient in {jax.tree_util.keystr(path)}"
            )
    p, m, v, step = _adam_update(params, grads, state.m, state.v, state.step, lr, beta1, beta2, eps)
    return p, AdamState(m, v, step)


# --------------------------------------------------------------------------
# batching


@dataclass(frozen=True)
class BatchSchedule:
    N: int
    M: int
    bs_U: int
    bs_F: int
    steps: int

    @property
    def f_bounds(self) -> List[Tuple[int, int]]:
        """Collocation slice per step; the last step takes the remainder."""
        if self.M == 0:
            return []
        b = []
        for i in range(self.steps):
            lo = min(i * self.bs_F, self.M)
            hi = self.M if i == self.steps - 1 else min((i + 1) * self.bs_F, self.M)
            b.append((lo, hi))
        return b

    @property
    def f_width(self) -> int:
        return max((hi - lo for lo, hi in self.f_bounds), default=0)


def batch_schedule(N: int, M: int, bs_U: int) -> BatchSchedule:
    if N < 1 or M < 0:
        raise ValueError("need N >= 1 and M >= 0")
    bs_U = min(bs_U, N)
    steps = math.ceil(N / bs_U)
    bs_F = min(max(int(round(bs_U * M / N)), 1), M) if M else 0
    return BatchSchedule(N, M, bs_U, bs_F, steps)


def make_batches(N: int, M: int, config: TrainConfig, epoch: int):
    """Schedule plus shuffled index batches for one epoch.

    Returns ``(schedule, u_batches, f_batches)``; ``f_batches`` is empty when
    ``M == 0``.  Step ``i`` pairs ``u_batches[i]`` with ``f_batches[i]``.
    """
    sched = batch_schedule(N, M, config.bs_U)
    g = rng(config.seed, 4, epoch)
    perm_u = g.permutation(N)
    perm_f = g.permutation(M) if M else np.empty(0, dtype=np.int64)
    u_batches = [perm_u[i * sched.bs_U:(i + 1) * sched.bs_U] for i in range(sched.steps)]
    f_batches = [perm_f[lo:hi] for lo, hi in sched.f_bounds]
    return sched, u_batches, f_batches


def _padded(batches: Sequence[np.ndarray], width: int):
    idx = np.zeros((len(batches), width), dtype=np.int32)
    mask = np.zeros((len(batches), width))
    for i, b in enumerate(batches):
        idx[i, :len(b)] = b
        mask[i, :len(b)] = 1.0
    return idx, mask


# --------------------------------------------------------------------------
# history


@dataclass
class TrainHistory:
    reports: List[L.LossReport] = field(default_factory=list)
    lrs: List[float] = field(default_factory=list)
    seconds: List[float] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.reports)

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.reports])

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(HISTORY_COLUMNS)
        for e, (r, lr, s) in enumerate(zip(self.reports, self.lrs, self.seconds)):
            w.writerow([e, *(repr(float(getattr(r, c))) for c in HISTORY_COLUMNS[1:7]), repr(lr), f"{s:.6f}"])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        return text

    @classmethod
    def from_csv(cls, path) -> "TrainHistory":
        h = cls()
        with open(path, newline="") as fh:
            for row in csv.DictReader(fh):
                h.reports.append(L.LossReport(**{k: float(row[k]) for k in ("total", *L.TERMS, "penalty")}))
                h.lrs.append(float(row["lr"]))
                h.seconds.append(float(row["seconds"]))
        return h


# --------------------------------------------------------------------------
# training


@dataclass
class TrainData:
    X: np.ndarray
    Y: np.ndarray
    Xc: Optional[np.ndarray] = None
    dY: Optional[np.ndarray] = None

    def __post_init__(self):
        self.X = np.atleast_2d(np.asarray(self.X, dtype=np.float64))
        self.Y = np.asarray(self.Y, dtype=np.float64).reshape(self.X.shape[0], -1)
        if self.X.shape[0] == 0:
            raise ValueError("the labeled dataset is empty")
        if self.Xc is None:
            self.Xc = np.empty((0, self.X.shape[1]))
        self.Xc = np.asarray(self.Xc, dtype=np.float64).reshape(-1, self.X.shape[1])
        if self.dY is not None:
            self.dY = np.asarray(self.dY, dtype=np.float64).reshape(
                self.X.shape[0], self.Y.shape[1], self.X.shape[1]
            )

    @property
    def N(self) -> int:
        return self.X.shape[0]

    @property
    def M(self) -> int:
        return self.Xc.shape[0]


@dataclass
class TrainResult:
    params: Dict[str, nw.MlpParams]
    history: TrainHistory
    config: TrainConfig
    initial: Dict[str, nw.MlpParams] = field(default_factory=dict)


def _make_chunk_runner(cfg: L.LossConfig, b1: float, b2: float, eps: float):
    use_F, use_G, use_C = cfg.use_F, cfg.use_G, cfg.use_consistency

    def objective(trees, Xb, Yb, dYb, mu, Xf, mf):
        U, F, G = trees
        if cfg.sobolev:
            lu = L.batch_sobolev(U, Xb, Yb, dYb, mu)
        else:
            lu = L.batch_data(U, Xb, Yb, mu)
        zero = jnp.zeros(())
        lf = L.batch_gradient_match(U, F, Xf, mf) if use_F else zero
        lg = L.batch_hessian_match(U, G, Xf, mf) if use_G else zero
        lgf = L.batch_consistency(F, G, Xf, mf) if use_C else zero
        pen = L.batch_penalty(U, cfg.l1, cfg.l2) if (cfg.l1 or cfg.l2) else zero
        total = L.combine(cfg, lu, lf, lg, lgf, pen)
        return total, jnp.stack([lu, lf, lg, lgf, pen, total])

    grad_fn = jax.value_and_grad(objective, has_aux=True)

    def step(carry, inputs, data, lr):
        trees, opt = carry
        iu, mu, jf, mf = inputs
        X, Y, dY, Xc = data
        Xb, Yb = X[iu], Y[iu]
        dYb = dY[iu] if dY is not None else None
        Xf = Xc[jf] if use_F else None
        (_, parts), grads = grad_fn(trees, Xb, Yb, dYb, mu, Xf, mf)
        new_trees, new_opt = [], []
        for p, g, s in zip(trees, grads, opt):
            if p is None:
                new_trees.append(None)
                new_opt.append(None)
                continue
            m, v, t = s
            p, m, v, t = _adam_update(p, g, m, v, t, lr, b1, b2, eps)
            new_trees.append(p)
            new_opt.append((m, v, t))
        return (tuple(new_trees), tuple(new_opt)), parts

    def epoch(carry, inputs, data):
        iu, mu, jf, mf, lr = inputs
        carry, parts = jax.lax.scan(lambda c, x: step(c, x, data, lr), carry, (iu, mu, jf, mf))
        return carry, jnp.mean(parts, axis=0)

    @jax.jit
    def run(trees, opt, data, iu, mu, jf, mf, lrs):
        (trees, opt), parts = jax.lax.scan(
            lambda c, x: epoch(c, x, data), (trees, opt), (iu, mu, jf, mf, lrs)
        )
        return trees, opt, parts

    return run


def init_networks(specs: Dict[str, nw.MlpSpec], seed: SeedLike) -> Dict[str, nw.MlpParams]:
    """Glorot init with an independent stream per network role."""
    streams = {"U": 1, "F": 2, "G": 3}
    return {k: nw.init_glorot(s, seed_join(seed, streams[k])) for k, s in specs.items()}


def train(
    data: TrainData,
    specs: Dict[str, nw.MlpSpec],
    config: TrainConfig,
    init: Optional[Dict[str, nw.MlpParams]] = None,
    callback: Optional[Callable[[int, Dict[str, nw.MlpParams]], None]] = None,
) -> TrainResult:
    """Run ``config.epochs`` epochs and return the final parameters and history.

    ``specs`` maps roles ``"U"``, ``"F"``, ``"G"`` to network shapes; ``init``
    optionally overrides the Glorot initialization of any role.  ``callback``
    is called with ``(epochs_done, params)`` after every compiled chunk.
    """
    cfg = config.loss
    if "U" not in specs:
        raise ValueError("a solution network 'U' is required")
    if cfg.use_F and "F" not in specs:
        raise ValueError("use_F requires an 'F' network")
    if cfg.use_G and "G" not in specs:
        raise ValueError("use_G requires a 'G' network")
    if cfg.sobolev and data.dY is None:
        raise ValueError("Sobolev training needs gradient labels")
    d = data.X.shape[1]
    if specs["U"].input_dim != d or specs["U"].output_dim != data.Y.shape[1]:
        raise ValueError("U spec does not match the data dimensions")

    params = init_networks(specs, config.seed)
    if init:
        params.update({k: v.copy() for k, v in init.items()})
    for k, p in params.items():
        p.check_spec(specs[k])
    initial = {k: v.copy() for k, v in params.items()}

    eff = cfg if data.M > 0 else cfg.without_collocation()
    roles = ("U", "F", "G")
    active = {"U": True, "F": eff.use_F, "G": eff.use_G}
    trees = tuple(params[r].tree() if active[r] else None for r in roles)
    opt = tuple(
        (jax.tree_util.tree_map(jnp.zeros_like, t), jax.tree_util.tree_map(jnp.zeros_like, t), jnp.zeros((), jnp.int32))
        if t is not None else None
        for t in trees
    )
    run = _make_chunk_runner(eff, config.beta1, config.beta2, config.eps)
    dev = (
        jnp.asarray(data.X),
        jnp.asarray(data.Y),
        jnp.asarray(data.dY) if (eff.sobolev and data.dY is not None) else None,
        jnp.asarray(data.Xc if data.M else np.zeros((1, d))),
    )

    history = TrainHistory()
    sched = batch_schedule(data.N, data.M, config.bs_U)
    fw = max(sched.f_width, 1)
    epoch = 0
    while epoch < config.epochs:
        n = min(config.chunk, config.epochs - epoch)
        IU, MU, JF, MF = [], [], [], []
        for e in range(epoch, epoch + n):
            _, ub, fb = make_batches(data.N, data.M, config, e)
            iu, mu = _padded(ub, sched.bs_U)
            jf, mf = _padded(fb if fb else [np.empty(0, int)] * sched.steps, fw)
            IU.append(iu); MU.append(mu); JF.append(jf); MF.append(mf)
        lrs = np.array([lr_schedule(config, e) for e in range(epoch, epoch + n)])
        t0 = time.perf_counter()
        new_trees, new_opt, parts = run(
            trees, opt, dev,
            jnp.asarray(np.stack(IU)), jnp.asarray(np.stack(MU)),
            jnp.asarray(np.stack(JF)), jnp.asarray(np.stack(MF)), jnp.asarray(lrs),
        )
        parts = np.asarray(parts)
        dt = (time.perf_counter() - t0) / n
        finite_rows = np.isfinite(parts).all(axis=1)
        for i in range(n):
            if not finite_rows[i]:
                raise TrainingDiverged(f"objective became non-finite at epoch {epoch + i}", history)
            lu, lf, lg, lgf, pen, total = (float(v) for v in parts[i])
            history.reports.append(L.LossReport(total=total, l_u=lu, l_f=lf, l_g=lg, l_gf=lgf, penalty=pen))
            history.lrs.append(float(lrs[i]))
            history.seconds.append(dt)
        if not all(bool(jnp.all(jnp.isfinite(leaf))) for leaf in jax.tree_util.tree_leaves(new_trees)):
            raise TrainingDiverged(f"parameters became non-finite by epoch {epoch + n}", history)
        trees, opt = new_trees, new_opt
        epoch += n
        if callback is not None:
            callback(epoch, _collect(params, trees, roles))
    return TrainResult(_collect(params, trees, roles), history, config, initial)


def _collect(params, trees, roles) -> Dict[str, nw.MlpParams]:
    out = {k: v.copy() for k, v in params.items()}
    for r, t in zip(roles, trees):
        if t is not None:
            out[r] = nw.MlpParams.from_tree(t)
    return out
