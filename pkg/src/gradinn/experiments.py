"""Experiment presets, single training runs and their on-disk records.

A run is fully described by a :class:`RunConfig`.  :func:`run` builds the
datasets, fits the chosen method, scores it and writes everything into a
fresh directory together with a ``manifest.json`` that is enough to replay
the run (:func:`replay`).
"""
from __future__ import annotations

import csv
import functools
import hashlib
import json
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np

from . import network as nw
from .baselines import MethodSpec, fit_method, make_estimator
from .metrics import (
    MetricReport,
    evaluate,
    gradient_total_variation,
    oscillation_count,
    rmse,
    write_metrics_csv,
)
from .problems import burgers as bg
from .problems import friedman as fr
from .problems import lotka_volterra as lv
from .problems import stokes as st
from .problems import toy
from .problems.datasets import CollocationSet, LabeledDataset, write_grid_csv
from .problems.sampling import latin_hypercube
from .training import TrainingDiverged

MANIFEST_FORMAT = 1
N_TEST_FRIEDMAN = 10_000
TOY_GRID = 1000


@dataclass(frozen=True)
class Preset:
    name: str
    problem: str
    n: int
    m: int
    method: str = "gradinn"
    c: float = 0.0
    nu: Optional[float] = None
    epochs: int = 10_000
    batch_size: int = 64
    l1: float = 0.0
    l2: float = 0.0
    init_scale_U: Optional[float] = None
    init_scale_F: Optional[float] = None
    desk: Tuple[Tuple[str, object], ...] = ()


PRESETS: Dict[str, Preset] = {
    p.name: p
    for p in (
        Preset("toy1d", "toy1d", n=5, m=100),
        Preset("friedman", "friedman", n=200, m=1000),
        Preset("friedman-noise", "friedman", n=200, m=1000, c=0.05),
        Preset("stokes", "stokes", n=550, m=10_000),
        Preset("stokes-2nd", "stokes", n=350, m=10_000, method="gradinn2"),
        Preset("lv", "lv", n=5, m=1000, batch_size=5),
        Preset("burgers", "burgers", n=1000, m=22_000, nu=bg.NU, desk=(("m", 5000), ("epochs", 5000))),
        Preset(
            "burgers-steep", "burgers", n=1000, m=22_000, nu=bg.NU_STEEP,
            desk=(("m", 5000), ("epochs", 5000)),
        ),
        Preset("init-study", "toy1d", n=5, m=100, init_scale_U=4.0),
    )
}

# penalty strengths used when a penalized method is run without an explicit value
TOY_L2 = 1e-3
DEFAULT_L1 = 1e-4
DEFAULT_L2 = 1e-4
GRADIENT_LABEL_PROBLEMS = ("friedman", "lv")


@dataclass(frozen=True)
class RunConfig:
    preset: str
    method: str
    seed: int = 0
    n: int = 0
    m: int = 0
    c: float = 0.0
    nu: Optional[float] = None
    epochs: int = 10_000
    batch_size: int = 64
    learning_rate: float = 0.1
    l1: float = 0.0
    l2: float = 0.0
    init_scale_U: Optional[float] = None
    init_scale_F: Optional[float] = None
    scale: str = "full"
    trace: bool = False

    def __post_init__(self):
        if self.preset not in PRESETS:
            raise ValueError(f"unknown preset {self.preset!r}; choose from {sorted(PRESETS)}")
        if self.scale not in ("full", "desk"):
            raise ValueError("scale must be 'full' or 'desk'")
        if self.n < 1 or self.m < 0 or self.epochs < 1 or self.batch_size < 1:
            raise ValueError("n, epochs and batch_size must be >= 1 and m >= 0")
        if self.c < 0:
            raise ValueError("noise level c must be >= 0")
        spec = self.method_spec  # validates kind and penalties
        if spec.needs_gradients and self.problem not in GRADIENT_LABEL_PROBLEMS:
            raise ValueError(f"Sobolev training needs gradient labels; {self.problem} has none")

    @property
    def problem(self) -> str:
        return PRESETS[self.preset].problem

    @property
    def method_spec(self) -> MethodSpec:
        return MethodSpec(self.method, l1=self.l1, l2=self.l2)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        names = {f.name for f in fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)

    def key(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha1(blob).hexdigest()


OVERRIDABLE = (
    "n", "m", "c", "nu", "epochs", "batch_size", "learning_rate", "l1", "l2",
    "init_scale_U", "init_scale_F", "trace",
)


def resolve(preset: str, method: Optional[str] = None, seed: int = 0, scale: str = "full", **overrides) -> RunConfig:
    """Preset defaults, then the desk-scale reductions, then explicit overrides."""
    if preset not in PRESETS:
        raise ValueError(f"unknown preset {preset!r}; choose from {sorted(PRESETS)}")
    bad = set(overrides) - set(OVERRIDABLE)
    if bad:
        raise ValueError(f"cannot override {sorted(bad)}")
    p = PRESETS[preset]
    base = dict(
        n=p.n, m=p.m, c=p.c, nu=p.nu, epochs=p.epochs, batch_size=p.batch_size,
        l1=p.l1, l2=p.l2, init_scale_U=p.init_scale_U, init_scale_F=p.init_scale_F,
    )
    if scale == "desk":
        base.update(dict(p.desk))
    base.update({k: v for k, v in overrides.items() if v is not None})
    method = method or p.method
    if method == "snn_l1" and not base["l1"]:
        base["l1"] = DEFAULT_L1
    if method == "snn_l2" and not base["l2"]:
        base["l2"] = TOY_L2 if p.problem == "toy1d" else DEFAULT_L2
    return RunConfig(preset=preset, method=method, seed=int(seed), scale=scale, **base)


# --------------------------------------------------------------------------
# problem data


@dataclass
class ProblemData:
    X: np.ndarray
    Y: np.ndarray
    Xc: np.ndarray
    X_test: np.ndarray
    Y_test: np.ndarray
    G_test: Optional[np.ndarray] = None
    dY: Optional[np.ndarray] = None
    uptake_test: Optional[np.ndarray] = None
    input_names: Tuple[str, ...] = ()
    output_names: Tuple[str, ...] = ("u",)
    grid: Optional[Tuple[np.ndarray, np.ndarray, np.ndarray]] = None
    extras: Dict[str, object] = field(default_factory=dict)


@functools.lru_cache(maxsize=4)
def _burgers_solution(nu: float) -> bg.BurgersSolution:
    return bg.burgers_solve(nu)


def _stokes_side(m: int) -> int:
    side = math.isqrt(m)
    if side * side != m:
        raise ValueError(f"Stokes collocation is a square grid; m={m} is not a perfect square")
    return side


def build_problem(cfg: RunConfig) -> ProblemData:
    prob = cfg.problem
    if prob == "toy1d":
        X = toy.training_inputs(cfg.n)[:, None]
        Xt = toy.grid(TOY_GRID)[:, None]
        return ProblemData(
            X=X,
            Y=toy.toy1d_eval(X),
            dY=toy.toy1d_grad(X)[:, :, None],
            Xc=toy.collocation_inputs(cfg.m)[:, None] if cfg.m else np.empty((0, 1)),
            X_test=Xt,
            Y_test=toy.toy1d_eval(Xt),
            G_test=toy.toy1d_grad(Xt)[:, :, None],
            input_names=("x",),
        )
    if prob == "friedman":
        X = fr.training_inputs(cfg.n, (cfg.seed, 10))
        Y = fr.friedman_eval(X)[:, None]
        Y = fr.add_noise(Y, cfg.c, (cfg.seed, 13))
        Xt = fr.test_inputs(N_TEST_FRIEDMAN, (cfg.seed, 12))
        return ProblemData(
            X=X,
            Y=Y,
            dY=fr.friedman_grad(X)[:, None, :],
            Xc=latin_hypercube(cfg.m, fr.DIM, (cfg.seed, 11)) if cfg.m else np.empty((0, fr.DIM)),
            X_test=Xt,
            Y_test=fr.friedman_eval(Xt)[:, None],
            G_test=fr.friedman_grad(Xt)[:, None, :],
            input_names=tuple(f"x{i + 1}" for i in range(fr.DIM)),
        )
    if prob == "stokes":
        if cfg.m:
            s = st.stokes_datasets(n_total=cfg.n, m_side=_stokes_side(cfg.m))
            Xc = s.Xc
        else:
            s = st.stokes_datasets(n_total=cfg.n, m_side=2)
            Xc = np.empty((0, 2))
        return ProblemData(
            X=s.X, Y=s.Y, Xc=Xc, X_test=s.X_test, Y_test=s.Y_test, G_test=s.G_test,
            input_names=("x1", "x2"), extras={"n_grid": s.n_grid},
        )
    if prob == "lv":
        d = lv.lv_datasets(n_train=cfg.n, m=cfg.m)
        return ProblemData(
            X=d.X, Y=d.Y, dY=d.dY, Xc=d.Xc, X_test=d.X_test, Y_test=d.Y_test, G_test=d.G_test,
            uptake_test=d.test_trajectory.uptake, input_names=("t",), output_names=("x", "y"),
        )
    if prob == "burgers":
        sol = _burgers_solution(float(cfg.nu))
        d = bg.burgers_datasets(sol, n_train=cfg.n, m=cfg.m, seed=cfg.seed)
        return ProblemData(
            X=d.X, Y=d.Y, Xc=d.Xc, X_test=d.X_test, Y_test=d.Y_test, G_test=d.G_test,
            input_names=("t", "x"), grid=(sol.t, sol.x, sol.u), extras={"solution": sol},
        )
    raise ValueError(f"unknown problem {prob!r}")


def write_datasets(data: ProblemData, directory: Path) -> Dict[str, Path]:
    """Write train/collocation/test CSVs (plus the Burgers grid) into ``directory``."""
    directory.mkdir(parents=True, exist_ok=True)
    out = {
        "train": directory / "train.csv",
        "collocation": directory / "collocation.csv",
        "test": directory / "test.csv",
    }
    LabeledDataset(data.X, data.Y, data.dY).to_csv(out["train"])
    CollocationSet(data.Xc).to_csv(out["collocation"])
    LabeledDataset(data.X_test, data.Y_test, data.G_test).to_csv(out["test"])
    if data.grid is not None:
        out["grid"] = directory / "grid.csv"
        write_grid_csv(out["grid"], *data.grid)
    return out


def blob_hash(path: Path) -> str:
    """Git blob object id of a file's contents."""
    data = Path(path).read_bytes()
    return hashlib.sha1(b"blob %d\0" % len(data) + data).hexdigest()


def content_hash(files: Dict[str, Path]) -> Tuple[str, Dict[str, str]]:
    per_file = {name: blob_hash(p) for name, p in sorted(files.items())}
    listing = "".join(f"{h} {name}\n" for name, h in per_file.items()).encode()
    return hashlib.sha1(listing).hexdigest(), per_file


def fresh_dir(parent: Path, name: str) -> Path:
    """Create ``parent/name``, adding a numeric suffix instead of reusing a directory."""
    parent.mkdir(parents=True, exist_ok=True)
    k = 0
    while True:
        path = parent / (name if k == 0 else f"{name}-{k}")
        try:
            path.mkdir()
            return path
        except FileExistsError:
            k += 1


# --------------------------------------------------------------------------
# running


@dataclass
class RunOutcome:
    config: RunConfig
    report: MetricReport
    scalars: Dict[str, float]
    directory: Path
    estimator: object
    history: object


def scalar_metrics(report: MetricReport, data: ProblemData, est) -> Dict[str, float]:
    """Flat ``name -> value`` view of every metric for this problem."""
    out = {"rmse_u": report.rmse_u}
    if report.relative_l2 is not None:
        out["relative_l2"] = report.relative_l2
    if report.rmse_partial is not None:
        single = len(data.output_names) == 1
        for i, xi in enumerate(data.input_names):
            for k, uk in enumerate(data.output_names):
                name = f"d_{xi}" if single else f"d_{uk}_{xi}"
                out[name] = float(report.rmse_partial[i, k])
    if report.uptake_rmse is not None:
        out["uptake_prey"], out["uptake_predator"] = report.uptake_rmse
    if data.input_names == ("x",):
        grad = est.predict_gradient(data.X_test)[:, 0, 0]
        pred = est.predict(data.X_test)
        out["grad_tv"] = gradient_total_variation(grad)
        out["grad_rms"] = float(np.sqrt(np.mean(grad**2)))
        out["grad_mean_abs"] = float(np.mean(np.abs(grad)))
        out["oscillations"] = float(oscillation_count(pred))
    if data.grid is not None:
        err = np.abs(est.predict(data.X_test).ravel() - data.Y_test.ravel())
        k = max(1, int(np.ceil(0.01 * err.size)))
        top = np.argsort(err)[-k:]
        out["top_error_median_abs_x"] = float(np.median(np.abs(data.X_test[top, 1])))
    return out


def _write_scalars(path: Path, scalars: Dict[str, float]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["metric", "value"])
        for k, v in scalars.items():
            w.writerow([k, repr(float(v))])


def read_scalars(path) -> Dict[str, float]:
    with open(path, newline="") as fh:
        return {r["metric"]: float(r["value"]) for r in csv.DictReader(fh)}


def make_run_estimator(cfg: RunConfig):
    params = dict(
        epochs=cfg.epochs,
        batch_size=cfg.batch_size,
        learning_rate=cfg.learning_rate,
        random_state=cfg.seed,
    )
    if cfg.method_spec.uses_collocation:
        params.update(init_scale_U=cfg.init_scale_U, init_scale_F=cfg.init_scale_F)
    elif cfg.method != "sobolev":
        params["init_scale_U"] = cfg.init_scale_U
    return make_estimator(cfg.method_spec, **params)


def run(cfg: RunConfig, out_root, log: Optional[Callable[[str], None]] = None) -> RunOutcome:
    """Train and score one configuration, writing its record under ``out_root/runs``.

    Raises :class:`~gradinn.training.TrainingDiverged` after writing the
    partial history and a manifest with ``status: diverged``.
    """
    out_root = Path(out_root)
    data = build_problem(cfg)
    run_dir = fresh_dir(out_root / "runs", f"{cfg.preset}-{cfg.method}-s{cfg.seed}-{cfg.key()[:10]}")
    inputs = write_datasets(data, run_dir / "data")
    digest, per_file = content_hash(inputs)
    manifest = {
        "format": MANIFEST_FORMAT,
        "preset": cfg.preset,
        "method": cfg.method,
        "seed": cfg.seed,
        "config": cfg.to_dict(),
        "inputs": {"hash": digest, "files": {k: str(p.relative_to(run_dir)) for k, p in inputs.items()},
                   "blobs": per_file},
        "outputs": {},
        "status": "running",
    }

    est = make_run_estimator(cfg)
    trace: List[Tuple[int, float]] = []

    def monitor(epoch, params):
        trace.append((epoch, rmse(nw.predict(params["U"], data.X_test), data.Y_test)))
        if log is not None and epoch % 1000 == 0:
            log(f"{run_dir.name}: epoch {epoch} rmse_u {trace[-1][1]:.4g}")

    callback = monitor if (cfg.trace or log is not None) else None
    try:
        fit_method(est, cfg.method_spec, data.X, data.Y, X_colloc=data.Xc, dydx=data.dY, callback=callback)
    except TrainingDiverged as exc:
        exc.history.to_csv(run_dir / "history.csv")
        manifest["outputs"] = {"history": "history.csv"}
        manifest["status"] = "diverged"
        manifest["error"] = str(exc)
        _write_manifest(run_dir, manifest)
        raise

    report = evaluate(est, data.X_test, data.Y_test, data.G_test, data.uptake_test)
    scalars = scalar_metrics(report, data, est)
    outputs = {}
    for role, p in est.params_.items():
        nw.save(p, run_dir / f"{role}.bin")
        outputs[f"params_{role}"] = f"{role}.bin"
    for role, p in est.init_params_.items():
        nw.save(p, run_dir / f"{role}_init.bin")
        outputs[f"init_{role}"] = f"{role}_init.bin"
    est.history_.to_csv(run_dir / "history.csv")
    outputs["history"] = "history.csv"
    write_metrics_csv(run_dir / "metrics.csv", [report.row(cfg.preset, cfg.method, cfg.seed)])
    outputs["metrics"] = "metrics.csv"
    _write_scalars(run_dir / "scalars.csv", scalars)
    outputs["scalars"] = "scalars.csv"
    if cfg.trace:
        with open(run_dir / "trace.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["epoch", "rmse_u"])
            w.writerows([e, repr(v)] for e, v in trace)
        outputs["trace"] = "trace.csv"
    manifest["outputs"] = outputs
    manifest["output_blobs"] = {k: blob_hash(run_dir / rel) for k, rel in sorted(outputs.items())}
    manifest["status"] = "ok"
    _write_manifest(run_dir, manifest)
    return RunOutcome(cfg, report, scalars, run_dir, est, est.history_)


def _write_manifest(run_dir: Path, manifest: dict) -> None:
    (run_dir / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def load_manifest(path) -> dict:
    path = Path(path)
    if path.is_dir():
        path = path / "manifest.json"
    return json.loads(path.read_text())


# columns holding wall-clock measurements; everything else must replay exactly
TIMING_COLUMNS = {"seconds"}


def csv_differences(a: Path, b: Path, ignore=TIMING_COLUMNS) -> List[str]:
    """Cell-level differences between two CSV files, skipping ``ignore`` columns."""
    with open(a, newline="") as fa, open(b, newline="") as fb:
        ra, rb = list(csv.reader(fa)), list(csv.reader(fb))
    if not ra or not rb or ra[0] != rb[0]:
        return [f"{a.name}: headers differ"]
    keep = [i for i, h in enumerate(ra[0]) if h not in ignore]
    if len(ra) != len(rb):
        return [f"{a.name}: {len(ra)} vs {len(rb)} rows"]
    diffs = []
    for r, (x, y) in enumerate(zip(ra, rb)):
        for i in keep:
            if x[i] != y[i]:
                diffs.append(f"{a.name} row {r} column {ra[0][i]}: {x[i]} != {y[i]}")
                if len(diffs) >= 5:
                    return diffs
    return diffs


def replay(manifest_path, out_root) -> Tuple[RunOutcome, List[str]]:
    """Rerun a recorded configuration and list every CSV that came out different.

    Every CSV is compared byte for byte except wall-clock columns.
    """
    manifest = load_manifest(manifest_path)
    src = Path(manifest_path)
    src = src if src.is_dir() else src.parent
    cfg = RunConfig.from_dict(manifest["config"])
    outcome = run(cfg, out_root)
    problems = []
    new = load_manifest(outcome.directory)
    if new["inputs"]["hash"] != manifest["inputs"]["hash"]:
        problems.append("input content hash differs")
    pairs = [(src / rel, outcome.directory / rel) for rel in manifest["inputs"]["files"].values()]
    pairs += [(src / rel, outcome.directory / rel) for rel in manifest["outputs"].values()]
    for a, b in pairs:
        if not b.exists():
            problems.append(f"{b.name} missing from replay")
        elif a.suffix == ".csv":
            problems += csv_differences(a, b)
        elif a.read_bytes() != b.read_bytes():
            problems.append(f"{a.name}: bytes differ")
    return outcome, problems
