"""Named self-checks: derivative oracles, solver convergence and artifact integrity.

Each check returns ``(passed, detail)``.  :func:`run_checks` runs the
built-in suite; :func:`check_artifact` inspects a saved parameter file or
run directory.
"""
from __future__ import annotations

import csv
import json
import math
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import autodiff as ad
from . import losses as L
from . import network as nw
from . import training as tr
from .problems import burgers as bg
from .problems import friedman as fr
from .problems import lotka_volterra as lv
from .problems import stokes as st
from .problems.sampling import latin_hypercube

Check = Callable[[], Tuple[bool, str]]


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str
    seconds: float = 0.0

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'}  {self.name}  ({self.seconds:.2f}s)  {self.detail}"


# --------------------------------------------------------------------------
# autodiff


def _fd_grad(f, x, h=1e-5):
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    for i in range(len(x)):
        e = np.zeros_like(x)
        e[i] = h
        out[i] = (f(x + e) - f(x - e)) / (2 * h)
    return out


def check_primitive_gradients() -> Tuple[bool, str]:
    gen = np.random.default_rng(0)
    cases = {
        "add": lambda v: v[0] + v[1],
        "sub": lambda v: v[0] - v[1],
        "mul": lambda v: v[0] * v[1],
        "div": lambda v: v[0] / v[1],
        "neg": lambda v: -v[0],
        "pow_int": lambda v: ad.pow_int(v[0], 3),
        "exp": lambda v: ad.exp(v[0]),
        "sin": lambda v: ad.sin(v[0]),
        "cos": lambda v: ad.cos(v[0]),
        "sigmoid": lambda v: ad.sigmoid(v[0]),
        "square": lambda v: ad.square(v[0]),
    }
    worst = (0.0, "")
    for name, fn in cases.items():
        for _ in range(20):
            x = gen.uniform(-2, 2, size=2)
            # keep away from points where the derivative itself vanishes
            x = np.copysign(np.maximum(np.abs(x), 0.25), x)
            err = float(np.max(ad.finite_difference_check(fn, x)))
            if err > worst[0]:
                worst = (err, name)
    return worst[0] < 1e-6, f"max relative error {worst[0]:.2e} ({worst[1]})"


def check_nested_order() -> Tuple[bool, str]:
    g = ad.Graph()
    x, y = g.vars([0.7, -1.3])
    f = ad.sin(x * y) * ad.exp(x) + ad.sigmoid(y * y - x)
    fx, fy = (lambda d: (d[x], d[y]))(ad.gradient(g, f, [x, y]))
    fxy = ad.gradient(g, fx, [y])[y].value
    fyx = ad.gradient(g, fy, [x])[x].value
    err = abs(fxy - fyx)
    return err < 1e-10, f"|f_xy - f_yx| = {err:.2e}"


def check_third_order() -> Tuple[bool, str]:
    """f(x, t) = t * sigmoid(t * x): d/dt of f_xx against differences of the closed form."""

    def fxx_closed(x, t):
        s = 1 / (1 + math.exp(-t * x))
        return t**3 * s * (1 - s) * (1 - 2 * s)

    worst = 0.0
    for x0, t0 in ((0.3, 1.7), (-1.1, 0.8), (0.9, -1.4)):
        g = ad.Graph()
        x, t = g.vars([x0, t0])
        f = t * ad.sigmoid(t * x)
        fx = ad.gradient(g, f, [x])[x]
        fxx = ad.gradient(g, fx, [x])[x]
        fxxt = ad.gradient(g, fxx, [t])[t].value
        h = 1e-5
        fd = (fxx_closed(x0, t0 + h) - fxx_closed(x0, t0 - h)) / (2 * h)
        worst = max(worst, abs(fxxt - fd) / max(abs(fd), 1e-8))
    return worst < 1e-5, f"max relative error {worst:.2e}"


def check_linearity() -> Tuple[bool, str]:
    g = ad.Graph()
    x, y = g.vars([0.4, 1.2])
    f = ad.sin(x) * y
    h = ad.exp(x * y)
    a, b = 2.5, -0.75
    lhs = ad.gradient(g, f * a + h * b, [x, y])
    gf, gh = ad.gradient(g, f, [x, y]), ad.gradient(g, h, [x, y])
    err = max(abs(lhs[v].value - (a * gf[v].value + b * gh[v].value)) for v in (x, y))
    return err < 1e-12, f"max deviation {err:.2e}"


# --------------------------------------------------------------------------
# networks and losses


def _small_nets():
    su = nw.MlpSpec(2, 1, (4, 3))
    sf = nw.MlpSpec(2, 2, (3,))
    sg = nw.MlpSpec(2, 4, (3,))
    return (su, nw.init_scaled(su, 5, 1.5)), (sf, nw.init_scaled(sf, 6, 1.5)), (sg, nw.init_scaled(sg, 7, 1.5))


def check_network_routes() -> Tuple[bool, str]:
    (su, pu), _, _ = _small_nets()
    x = np.array([0.3, -0.8])
    g = ad.Graph()
    xv = g.vars(x)
    H = nw.input_hessian(pu, su, g, xv)
    J = nw.input_jacobian(pu, su, g, xv)
    Hg = np.array([[[h.value for h in row] for row in hk] for hk in H])
    Jg = np.array([[d.value for d in row] for row in J])
    Jj = nw.predict_jacobian(pu, x[None])[0]
    Hj = nw.predict_hessian(pu, x[None])[0]
    err = max(np.max(np.abs(Jg - Jj)), np.max(np.abs(Hg - Hj)))
    return err < 1e-10, f"max graph/vectorized gap {err:.2e}"


def check_loss_routes() -> Tuple[bool, str]:
    import jax.numpy as jnp

    (su, pu), (sf, pf), (sg, pg) = _small_nets()
    Xc = np.array([[0.1, 0.2], [-0.5, 0.7], [1.0, -1.0]])
    g = ad.Graph()
    bu, bf, bgr = nw.bind(pu, g), nw.bind(pf, g), nw.bind(pg, g)
    graph_vals = [
        L.loss_gradient_match(bu, su, bf, sf, g, Xc).value,
        L.loss_hessian_match(bu, su, bgr, sg, g, Xc).value,
        L.loss_consistency(bf, sf, bgr, sg, g, Xc).value,
    ]
    mask = jnp.ones(len(Xc))
    X = jnp.asarray(Xc)
    jax_vals = [
        float(L.batch_gradient_match(pu.tree(), pf.tree(), X, mask)),
        float(L.batch_hessian_match(pu.tree(), pg.tree(), X, mask)),
        float(L.batch_consistency(pf.tree(), pg.tree(), X, mask)),
    ]
    err = max(abs(a - b) / max(abs(a), 1e-12) for a, b in zip(graph_vals, jax_vals))
    return err < 1e-10, f"max relative gap {err:.2e}"


def check_serialization() -> Tuple[bool, str]:
    (su, pu), _, _ = _small_nets()
    blob = nw.dumps(pu)
    if nw.loads(blob) != pu:
        return False, "round trip changed the parameters"
    for bad, label in ((b"XXXX" + blob[4:], "magic"), (blob[:-3], "truncation")):
        try:
            nw.loads(bad)
        except nw.ParamFileError:
            continue
        return False, f"corrupted file ({label}) was accepted"
    return True, "round trip exact; corruption rejected"


# --------------------------------------------------------------------------
# training plumbing


def check_training_rules() -> Tuple[bool, str]:
    cfg = tr.TrainConfig()
    problems = []
    if abs(tr.lr_schedule(cfg, 500) - 0.1 / 1.9) > 1e-15:
        problems.append("lr schedule")
    if tr.batch_schedule(200, 1000, 64).bs_F != 320 or tr.batch_schedule(5, 1000, 5).bs_F != 1000:
        problems.append("batch sizes")
    p = [np.zeros(1)]
    p2, _ = tr.adam_step(p, [np.ones(1)], tr.adam_init(p), 0.1)
    if abs(abs(float(p2[0][0])) - 0.1) > 1e-6:
        problems.append("first Adam step")
    return not problems, "ok" if not problems else "wrong: " + ", ".join(problems)


def check_degeneration() -> Tuple[bool, str]:
    X = np.linspace(-1, 2, 5)[:, None]
    data = tr.TrainData(X, np.sin(X))
    cfg_s = tr.TrainConfig(epochs=30, chunk=10)
    cfg_g = tr.TrainConfig(epochs=30, chunk=10, loss=L.LossConfig(use_F=True))
    u = nw.MlpSpec(1, 1)
    a = tr.train(data, {"U": u}, cfg_s)
    b = tr.train(data, {"U": u, "F": nw.MlpSpec(1, 1, (50, 50))}, cfg_g)
    same = a.params["U"] == b.params["U"] and np.array_equal(a.history.column("total"), b.history.column("total"))
    return same, "bit-identical" if same else "trajectories differ"


# --------------------------------------------------------------------------
# problem oracles


def check_friedman() -> Tuple[bool, str]:
    X = latin_hypercube(20, 5, 3)
    worst = 0.0
    for x in X:
        fd = _fd_grad(lambda z: fr.friedman_eval(z), x, 1e-6)
        an = fr.friedman_grad(x)
        worst = max(worst, float(np.max(np.abs(fd - an) / np.maximum(np.abs(an), 1e-8))))
    ok = abs(fr.friedman_eval(np.zeros(5)) - 5.0) < 1e-12 and worst < 1e-6
    return ok, f"gradient vs differences: max relative error {worst:.2e}"


def check_stokes() -> Tuple[bool, str]:
    ang = np.linspace(0, 2 * np.pi, 50, endpoint=False)
    surface = float(np.max(st.stokes_speed(np.cos(ang), np.sin(ang))))
    far = abs(float(st.stokes_speed(1e6, 0.0)) - 5.0)
    value = abs(float(st.stokes_speed(0.0, 2.0)) - 95 / 32)
    ok = surface < 1e-12 and far < 1e-4 and value < 1e-12
    return ok, f"no-slip {surface:.1e}, far field {far:.1e}, (0,2) error {value:.1e}"


def check_lv() -> Tuple[bool, str]:
    a, b, c, d = lv.PARAMS
    eq = float(np.max(np.abs(lv.lv_rhs(np.array([c / d, a / b])))))
    t = np.linspace(0, 3, 7)
    coarse = lv.lv_solve(t, max_step=1e-3).states
    fine = lv.lv_solve(t, max_step=5e-4).states
    refine = float(np.max(np.abs(coarse - fine)))
    return eq < 1e-12 and refine < 1e-8, f"equilibrium rhs {eq:.1e}, step halving {refine:.1e}"


def check_burgers() -> Tuple[bool, str]:
    base = bg.burgers_solve(bg.NU)
    default_refine = max(4, math.ceil((base.x[1] - base.x[0]) / bg.NU))
    finer = bg.burgers_solve(bg.NU, refine=2 * default_refine)
    sym = float(np.max(np.abs(base.u + base.u[:, ::-1])))
    ref = float(np.max(np.abs(base.u - finer.u)))
    ic = float(np.max(np.abs(base.u[0] - bg.initial_condition(base.x))))
    ok = sym < 1e-6 and ref < 1e-4 and ic < 1e-12
    return ok, f"odd symmetry {sym:.1e}, refinement {ref:.1e}, initial condition {ic:.1e}"


def check_lhs() -> Tuple[bool, str]:
    P = latin_hypercube(17, 4, 11)
    strata = np.sort(np.floor(P * 17).astype(int), axis=0)
    ok = bool(np.all(strata == np.arange(17)[:, None]))
    return ok, "one point per stratum" if ok else "strata violated"


CHECKS: Dict[str, Check] = {
    "autodiff.primitive_gradients": check_primitive_gradients,
    "autodiff.nested_order": check_nested_order,
    "autodiff.third_order": check_third_order,
    "autodiff.linearity": check_linearity,
    "network.graph_vs_vectorized": check_network_routes,
    "losses.graph_vs_vectorized": check_loss_routes,
    "network.serialization": check_serialization,
    "training.rules": check_training_rules,
    "training.degeneration": check_degeneration,
    "problems.friedman": check_friedman,
    "problems.stokes": check_stokes,
    "problems.lotka_volterra": check_lv,
    "problems.burgers": check_burgers,
    "problems.latin_hypercube": check_lhs,
}


def _timed(name: str, fn: Check) -> CheckResult:
    t0 = time.perf_counter()
    try:
        ok, detail = fn()
    except Exception as exc:  # noqa: BLE001 - a crashing check is a failing check
        ok, detail = False, f"{type(exc).__name__}: {exc}"
    return CheckResult(name, bool(ok), detail, time.perf_counter() - t0)


def run_checks(names: Optional[Sequence[str]] = None) -> List[CheckResult]:
    selected = list(CHECKS) if names is None else list(names)
    unknown = [n for n in selected if n not in CHECKS]
    if unknown:
        raise ValueError(f"unknown checks: {unknown}")
    return [_timed(n, CHECKS[n]) for n in selected]


# --------------------------------------------------------------------------
# artifacts


def _check_param_file(path: Path) -> Tuple[bool, str]:
    try:
        p = nw.load(path)
    except nw.ParamFileError as exc:
        return False, str(exc)
    return True, f"layers {p.sizes}"


def _check_csv(path: Path) -> Tuple[bool, str]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        return False, "empty file"
    widths = {len(r) for r in rows}
    if len(widths) != 1:
        return False, f"ragged rows (widths {sorted(widths)})"
    return True, f"{len(rows) - 1} rows"


def check_artifact(path) -> List[CheckResult]:
    """Integrity checks for a ``.bin`` parameter file or a run directory/manifest."""
    from .experiments import blob_hash, load_manifest

    path = Path(path)
    if path.suffix == ".bin":
        return [_timed(f"artifact {path.name}: parameter file", lambda: _check_param_file(path))]
    root = path if path.is_dir() else path.parent
    results = []
    try:
        manifest = load_manifest(path)
    except (OSError, json.JSONDecodeError) as exc:
        return [CheckResult(f"artifact {root.name}: manifest", False, str(exc))]
    results.append(CheckResult(f"artifact {root.name}: manifest", True, f"status {manifest.get('status')}"))
    blobs = manifest.get("inputs", {}).get("blobs", {})
    for name, rel in manifest.get("inputs", {}).get("files", {}).items():
        f = root / rel

        def input_ok(f=f, name=name):
            if not f.exists():
                return False, "missing"
            h = blob_hash(f)
            return h == blobs.get(name), f"content hash {h[:10]}"

        results.append(_timed(f"artifact {root.name}: input {name}", input_ok))
    recorded = manifest.get("output_blobs", {})
    for name, rel in manifest.get("outputs", {}).items():
        f = root / rel
        label = f"artifact {root.name}: output {name}"
        if not f.exists():
            results.append(CheckResult(label, False, "missing"))
            continue
        if f.suffix == ".bin":
            results.append(_timed(label, lambda f=f: _check_param_file(f)))
        elif f.suffix == ".csv":
            results.append(_timed(label, lambda f=f: _check_csv(f)))
        if name in recorded:
            results.append(_timed(
                f"{label} hash",
                lambda f=f, h=recorded[name]: (blob_hash(f) == h, f"recorded {h[:10]}"),
            ))
    return results
