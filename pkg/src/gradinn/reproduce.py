"""Regenerate the published tables and figures.

Each target expands into cells; a cell is one method/setting whose runs
(one per seed, or one per penalty value for tuned baselines) go through
:func:`gradinn.experiments.run`.  Results land in a new directory:

* ``results.csv`` - one row per (run, metric) with the published value and
  the measured/published ratio,
* ``report.md`` - side-by-side summary,
* ``*.svg`` - figures,
* ``runs/`` - the individual run records with their manifests.
"""
from __future__ import annotations

import csv
import datetime as _dt
import hashlib
import json
import multiprocessing
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import network as nw
from . import svg
from .baselines import DEFAULT_PENALTY_GRID, REFERENCE
from .experiments import RunConfig, fresh_dir, resolve, run
from .problems import stokes as st
from .problems import toy

TARGETS = ("table1", "table2", "tableA1", "tableA3", "table3", "table4", "table5", "fig1", "fig5", "figA1")

RESULT_COLUMNS = (
    "target", "cell", "method", "seed", "group", "selected", "metric",
    "measured", "published", "ratio", "status", "run",
)


@dataclass(frozen=True)
class Cell:
    label: str
    config_kwargs: Tuple[Tuple[str, object], ...]
    metrics: Tuple[Tuple[str, object], ...]  # (scalar name, reference key or None)
    tuned: Optional[str] = None  # "l1" / "l2": one run per grid value, keep the best rmse_u

    @property
    def kwargs(self) -> dict:
        return dict(self.config_kwargs)


@dataclass
class Options:
    seeds: Sequence[int] = (0,)
    epochs: Optional[int] = None
    scale: str = "full"
    penalty_grid: Sequence[float] = DEFAULT_PENALTY_GRID
    workers: int = 1


def _cell(label, metrics, tuned=None, **kw) -> Cell:
    return Cell(label, tuple(sorted(kw.items())), tuple(metrics), tuned)


def _friedman_partials(method_key, n):
    return [(f"d_x{i}", (method_key, n, f"x{i}")) for i in range(1, 6)]


def cells_for(target: str) -> List[Cell]:
    out: List[Cell] = []
    if target == "table1":
        for n in (50, 100, 200, 500):
            out.append(_cell(f"snn N={n}", [("rmse_u", ("snn", n))], preset="friedman", method="snn", n=n))
            for k in ("l1", "l2"):
                out.append(_cell(f"snn_{k} N={n}", [("rmse_u", (f"snn_{k}", n))], tuned=k,
                                 preset="friedman", method=f"snn_{k}", n=n))
            for m in (500, 1000, 10_000):
                out.append(_cell(f"gradinn N={n} M={m}", [("rmse_u", (f"gradinn_m{m}", n))],
                                 preset="friedman", method="gradinn", n=n, m=m))
            out.append(_cell(f"sobolev N={n}", [("rmse_u", ("sobolev", n))], preset="friedman", method="sobolev", n=n))
    elif target == "table2":
        for n in (50, 100, 200, 500):
            for meth, kw in (("snn", {}), ("gradinn", {"m": 1000}), ("sobolev", {})):
                out.append(_cell(f"{meth} N={n}", _friedman_partials(meth, n),
                                 preset="friedman", method=meth, n=n, **kw))
    elif target == "tableA1":
        for n in (50, 100, 200, 500):
            for k in ("l1", "l2"):
                out.append(_cell(f"snn_{k} N={n}", _friedman_partials(f"snn_{k}", n), tuned=k,
                                 preset="friedman", method=f"snn_{k}", n=n))
    elif target == "tableA3":
        for c in (0.0, 0.01, 0.03, 0.05):
            for meth in ("snn", "snn_l1", "snn_l2", "gradinn", "sobolev"):
                tuned = meth[-2:] if meth.startswith("snn_") else None
                out.append(_cell(f"{meth} c={c}", [("rmse_u", (meth, c))], tuned=tuned,
                                 preset="friedman-noise", method=meth, c=c))
    elif target == "table3":
        for n in (350, 550, 750):
            for meth in ("snn", "gradinn"):
                out.append(_cell(
                    f"{meth} N={n}",
                    [("rmse_u", (meth, n, "u")), ("d_x1", (meth, n, "x1")), ("d_x2", (meth, n, "x2"))],
                    preset="stokes", method=meth, n=n,
                ))
    elif target == "table4":
        for meth in ("snn", "gradinn"):
            out.append(_cell(meth, [("uptake_prey", (meth, "-bxy")), ("uptake_predator", (meth, "dxy"))],
                             preset="lv", method=meth))
    elif target == "table5":
        for meth in ("snn", "gradinn"):
            out.append(_cell(meth, [("relative_l2", meth)], preset="burgers", method=meth))
    elif target == "fig1":
        for meth in ("snn", "snn_l2", "gradinn"):
            out.append(_cell(meth, [("rmse_u", None), ("grad_tv", None), ("grad_rms", None), ("grad_mean_abs", None),
                                    ("oscillations", None)], preset="toy1d", method=meth))
    elif target == "figA1":
        for meth in ("snn", "snn_l2", "gradinn"):
            out.append(_cell(f"{meth} U-wiggly", [("rmse_u", None), ("grad_tv", None), ("oscillations", None)],
                             preset="init-study", method=meth))
        out.append(_cell("gradinn U,F-wiggly", [("rmse_u", None), ("grad_tv", None), ("oscillations", None)],
                         preset="init-study", method="gradinn", init_scale_F=4.0))
    elif target == "fig5":
        for meth in ("gradinn", "gradinn2"):
            out.append(_cell(meth, [("rmse_u", meth)], preset="stokes-2nd", method=meth, trace=True))
    else:
        raise ValueError(f"unknown target {target!r}; choose from {TARGETS}")
    return out


# static rows: published numbers for methods that are not re-run
STATIC_ROWS = {
    "table4": [("upinn", ("upinn", "mean"))],
    "table5": [("dhpm+", "dhpm+"), ("dhpm-", "dhpm-")],
}


def _published_value(target: str, key) -> Optional[float]:
    if key is None:
        return None
    ref = REFERENCE.get(target, {}).get(key)
    return None if ref is None else ref.value


# --------------------------------------------------------------------------
# execution


@dataclass
class Job:
    cell: Cell
    config: RunConfig
    group: str


@dataclass
class JobResult:
    job: Job
    scalars: Dict[str, float] = field(default_factory=dict)
    run_dir: Optional[str] = None
    status: str = "ok"


def expand(target: str, opts: Options) -> List[Job]:
    jobs = []
    for cell in cells_for(target):
        for seed in opts.seeds:
            kw = cell.kwargs
            preset, method = kw.pop("preset"), kw.pop("method")
            if opts.epochs is not None:
                kw["epochs"] = opts.epochs
            group = f"{cell.label}|{seed}"
            if cell.tuned:
                for value in opts.penalty_grid:
                    cfg = resolve(preset, method, seed=seed, scale=opts.scale, **{**kw, cell.tuned: float(value)})
                    jobs.append(Job(cell, cfg, group))
            else:
                jobs.append(Job(cell, resolve(preset, method, seed=seed, scale=opts.scale, **kw), group))
    return jobs


def _execute(cfg_dict: dict, out_root: str) -> Tuple[Dict[str, float], str, str]:
    cfg = RunConfig.from_dict(cfg_dict)
    try:
        outcome = run(cfg, out_root)
    except Exception as exc:  # noqa: BLE001 - a failed cell is recorded, the rest continue
        return {}, "", f"failed: {type(exc).__name__}: {exc}"
    return outcome.scalars, str(outcome.directory), "ok"


def execute(jobs: Sequence[Job], out_root: Path, workers: int = 1,
            log: Optional[Callable[[str], None]] = None) -> List[JobResult]:
    """Run every distinct configuration once; identical configs share a result."""
    unique: Dict[str, RunConfig] = {}
    for j in jobs:
        unique.setdefault(j.config.key(), j.config)
    done: Dict[str, Tuple[Dict[str, float], str, str]] = {}
    keys = list(unique)
    if workers > 1 and len(keys) > 1:
        ctx = multiprocessing.get_context("spawn")
        with ProcessPoolExecutor(max_workers=workers, mp_context=ctx) as pool:
            futures = {k: pool.submit(_execute, unique[k].to_dict(), str(out_root)) for k in keys}
            for i, k in enumerate(keys):
                done[k] = futures[k].result()
                if log:
                    log(f"[{i + 1}/{len(keys)}] {unique[k].preset} {unique[k].method} seed={unique[k].seed}: {done[k][2]}")
    else:
        for i, k in enumerate(keys):
            done[k] = _execute(unique[k].to_dict(), str(out_root))
            if log:
                log(f"[{i + 1}/{len(keys)}] {unique[k].preset} {unique[k].method} seed={unique[k].seed}: {done[k][2]}")
    results = []
    for j in jobs:
        scalars, run_dir, status = done[j.config.key()]
        rel = str(Path(run_dir).relative_to(out_root)) if run_dir else ""
        results.append(JobResult(j, scalars, rel, status))
    return results


def select_tuned(results: Sequence[JobResult]) -> Dict[int, bool]:
    """Within each tuned group mark the run with the lowest rmse_u."""
    selected = {}
    groups: Dict[str, List[int]] = {}
    for i, r in enumerate(results):
        if r.job.cell.tuned:
            groups.setdefault(r.job.group, []).append(i)
        else:
            selected[i] = True
    for idx in groups.values():
        ok = [i for i in idx if results[i].status == "ok"]
        best = min(ok, key=lambda i: results[i].scalars["rmse_u"]) if ok else None
        for i in idx:
            selected[i] = i == best
    return selected


def result_rows(target: str, results: Sequence[JobResult]) -> List[list]:
    selected = select_tuned(results)
    rows = []
    for i, r in enumerate(results):
        cfg = r.job.config
        for name, key in r.job.cell.metrics:
            published = _published_value(target, key)
            measured = r.scalars.get(name)
            ratio = measured / published if (measured is not None and published) else None
            rows.append([
                target, r.job.cell.label, cfg.method, cfg.seed, r.job.group, int(selected[i]), name,
                "" if measured is None else repr(measured),
                "" if published is None else repr(published),
                "" if ratio is None else f"{ratio:.4g}",
                r.status, r.run_dir,
            ])
    for label, key in STATIC_ROWS.get(target, []):
        rows.append([target, label, label, "", "", 1, "published", "", repr(_published_value(target, key)), "", "quoted", ""])
    return rows


def _summary(rows: Sequence[list]) -> List[Tuple[str, str, str, str, str, str]]:
    """Best and mean over seeds of the selected runs, per (cell, metric)."""
    agg: Dict[Tuple[str, str], List[float]] = {}
    published: Dict[Tuple[str, str], str] = {}
    order: List[Tuple[str, str]] = []
    for r in rows:
        key = (r[1], r[6])
        if key not in agg:
            agg[key] = []
            order.append(key)
        published[key] = r[8]
        if int(r[5]) and r[7]:
            agg[key].append(float(r[7]))
    out = []
    for key in order:
        vals = agg[key]
        best = f"{min(vals):.4g}" if vals else "-"
        mean = f"{np.mean(vals):.4g}" if vals else "-"
        p = published[key]
        ratio = f"{min(vals) / float(p):.3g}" if (vals and p and float(p)) else "-"
        out.append((key[0], key[1], best, mean, p and f"{float(p):.4g}" or "-", ratio))
    return out


def write_report(path: Path, targets: Sequence[str], rows_by_target: Dict[str, List[list]], opts: Options,
                 figures: Sequence[str]) -> None:
    lines = ["# Reproduction report", ""]
    lines.append(f"- seeds: {', '.join(map(str, opts.seeds))}")
    lines.append(f"- scale: {opts.scale}" + (
        " (Burgers reduced to M = 5000 and 5000 epochs; tolerances are loosened accordingly)"
        if opts.scale == "desk" else ""))
    if opts.epochs is not None:
        lines.append(f"- epochs overridden to {opts.epochs} for every run")
    lines.append(f"- penalty grid for tuned baselines: {', '.join(f'{v:g}' for v in opts.penalty_grid)}")
    lines.append("- published values are quoted constants; they are never recomputed")
    lines.append("")
    for t in targets:
        lines += [f"## {t}", "", "| cell | metric | best | mean | published | best/published |",
                  "|---|---|---|---|---|---|"]
        for cell, metric, best, mean, published, ratio in _summary(rows_by_target[t]):
            lines.append(f"| {cell} | {metric} | {best} | {mean} | {published} | {ratio} |")
        failures = [r for r in rows_by_target[t] if r[10].startswith("failed")]
        if failures:
            lines += ["", "Failed cells:"] + [f"- {r[1]} seed {r[3]}: {r[10]}" for r in failures]
        lines.append("")
    if figures:
        lines += ["## Figures", ""] + [f"- [{f}]({f})" for f in figures] + [""]
    path.write_text("\n".join(lines))


# --------------------------------------------------------------------------
# figures


def _params(out_root: Path, run_rel: str, name: str) -> nw.MlpParams:
    return nw.load(out_root / run_rel / f"{name}.bin")


def _by_label(results: Sequence[JobResult], seed: int) -> Dict[str, JobResult]:
    return {r.job.cell.label: r for r in results if r.job.config.seed == seed and r.status == "ok"}


def _toy_figures(out_dir: Path, results, seed: int, stem: str, title: str) -> List[str]:
    runs = _by_label(results, seed)
    if not runs:
        return []
    x = toy.grid(400)[:, None]
    xt = toy.training_inputs()
    sol = [svg.Series(x[:, 0], toy.toy1d_eval(x[:, 0]), "ground truth", dashed=True)]
    grad = [svg.Series(x[:, 0], toy.toy1d_grad(x[:, 0]), "ground truth", dashed=True)]
    first = next(iter(runs.values()))
    U0 = _params(out_dir, first.run_dir, "U_init")
    sol.append(svg.Series(x[:, 0], nw.predict(U0, x)[:, 0], "initialization"))
    grad.append(svg.Series(x[:, 0], nw.predict_jacobian(U0, x)[:, 0, 0], "initialization"))
    for label, r in runs.items():
        U = _params(out_dir, r.run_dir, "U")
        sol.append(svg.Series(x[:, 0], nw.predict(U, x)[:, 0], label))
        grad.append(svg.Series(x[:, 0], nw.predict_jacobian(U, x)[:, 0, 0], label))
        if label.endswith("U,F-wiggly"):
            F0 = _params(out_dir, r.run_dir, "F_init")
            grad.append(svg.Series(x[:, 0], nw.predict(F0, x)[:, 0], "F at initialization", dashed=True))
    sol.append(svg.Series(xt, toy.toy1d_eval(xt), "training points", markers=True))
    names = [f"{stem}_solution.svg", f"{stem}_gradient.svg"]
    svg.write(out_dir / names[0], svg.line_plot(sol, f"{title}: solution", "x", "u"))
    svg.write(out_dir / names[1], svg.line_plot(grad, f"{title}: gradient", "x", "du/dx"))
    return names


def _fig5(out_dir: Path, results, seed: int) -> List[str]:
    runs = _by_label(results, seed)
    series = []
    for label, r in runs.items():
        with open(out_dir / r.run_dir / "trace.csv", newline="") as fh:
            rows = list(csv.DictReader(fh))
        series.append(svg.Series([int(x["epoch"]) for x in rows], [float(x["rmse_u"]) for x in rows], label))
    if not series:
        return []
    names = ["fig5_rmse.svg"]
    svg.write(out_dir / names[0], svg.line_plot(series, "Stokes N=350: test RMSE during training", "epoch",
                                                "RMSE_U", logy=True))
    if "gradinn2" in runs:
        g = np.linspace(-5, 5, 120)
        P = np.stack(np.meshgrid(g, g, indexing="xy"), axis=-1).reshape(-1, 2)
        U = _params(out_dir, runs["gradinn2"].run_dir, "U")
        Z = np.array(nw.predict(U, P)[:, 0]).reshape(len(g), len(g))
        Z[np.hypot(P[:, 0], P[:, 1]).reshape(Z.shape) < 1.0] = np.nan
        names.append("fig5_solution.svg")
        svg.write(out_dir / names[-1], svg.heatmap(Z, g, g, "Stokes N=350, first and second order", "x1", "x2"))
        truth = np.full(len(P), np.nan)
        outside = np.hypot(P[:, 0], P[:, 1]) >= 1.0
        truth[outside] = st.stokes_speed(P[outside, 0], P[outside, 1])
        names.append("fig5_truth.svg")
        svg.write(out_dir / names[-1], svg.heatmap(truth.reshape(Z.shape), g, g, "Stokes ground truth", "x1", "x2"))
    return names


def _burgers_figures(out_dir: Path, results, seed: int) -> List[str]:
    runs = _by_label(results, seed)
    if "gradinn" not in runs:
        return []
    from .problems.datasets import read_grid_csv

    t, x, u = read_grid_csv(out_dir / runs["gradinn"].run_dir / "data" / "grid.csv")
    U = _params(out_dir, runs["gradinn"].run_dir, "U")
    P = np.stack(np.meshgrid(t, x, indexing="ij"), axis=-1).reshape(-1, 2)
    pred = nw.predict(U, P)[:, 0].reshape(len(t), len(x))
    names = ["table5_truth.svg", "table5_prediction.svg", "table5_difference.svg"]
    svg.write(out_dir / names[0], svg.heatmap(u.T, t, x, "Burgers ground truth", "t", "x"))
    svg.write(out_dir / names[1], svg.heatmap(pred.T, t, x, "Burgers prediction", "t", "x"))
    svg.write(out_dir / names[2], svg.heatmap((pred - u).T, t, x, "prediction - truth", "t", "x", diverging=True))
    return names


def figures_for(target: str, out_dir: Path, results, seed: int) -> List[str]:
    if target == "fig1":
        return _toy_figures(out_dir, results, seed, "fig1", "Toy problem")
    if target == "figA1":
        return _toy_figures(out_dir, results, seed, "figA1", "Non-smooth initialization")
    if target == "fig5":
        return _fig5(out_dir, results, seed)
    if target == "table5":
        return _burgers_figures(out_dir, results, seed)
    return []


# --------------------------------------------------------------------------


def reproduce(targets: Sequence[str], out_root, opts: Options = Options(),
              log: Optional[Callable[[str], None]] = None) -> Path:
    """Run every requested target into a new timestamped directory and return it."""
    for t in targets:
        if t not in TARGETS:
            raise ValueError(f"unknown target {t!r}; choose from {TARGETS}")
    out_root = Path(out_root)
    stamp = _dt.datetime.now(_dt.timezone.utc).strftime("%Y%m%dT%H%M%SZ")
    tag = hashlib.sha1(json.dumps([list(targets), opts.__dict__], sort_keys=True, default=list).encode()).hexdigest()[:8]
    out_dir = fresh_dir(out_root / "reproduce", f"{'+'.join(targets)}-{stamp}-{tag}")
    rows_by_target: Dict[str, List[list]] = {}
    figures: List[str] = []
    for t in targets:
        jobs = expand(t, opts)
        results = execute(jobs, out_dir, opts.workers, log)
        rows_by_target[t] = result_rows(t, results)
        try:
            figures += figures_for(t, out_dir, results, opts.seeds[0])
        except Exception:  # noqa: BLE001 - a broken plot must not lose the numbers
            (out_dir / f"{t}_figure_error.txt").write_text(traceback.format_exc())
    with open(out_dir / "results.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RESULT_COLUMNS)
        for t in targets:
            w.writerows(rows_by_target[t])
    write_report(out_dir / "report.md", targets, rows_by_target, opts, figures)
    return out_dir
