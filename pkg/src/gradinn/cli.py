"""Command-line harness: ``gradinn {generate,train,reproduce,verify}``.

Exit codes: 0 success, 1 usage or configuration error, 2 training
diverged, 3 file-system error, 4 verification failure.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path
from typing import List, Optional, Sequence

from . import experiments as ex
from . import reproduce as rp
from .baselines import DEFAULT_PENALTY_GRID, KINDS
from .training import TrainingDiverged

EXIT_OK, EXIT_USAGE, EXIT_DIVERGED, EXIT_IO, EXIT_VERIFY = 0, 1, 2, 3, 4
OUT_ENV = "GINN_OUT_DIR"
DEFAULT_OUT = "ginn-out"

# config-file keys accepted by each command, besides the run overrides
RUN_KEYS = ("preset", "method", "seed", "scale") + ex.OVERRIDABLE
REPRODUCE_KEYS = ("targets", "seeds", "epochs", "scale", "workers", "penalty_grid")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _log(msg: str) -> None:
    print(msg, file=sys.stderr, flush=True)


def _out_root(args) -> Path:
    return Path(args.out or os.environ.get(OUT_ENV) or DEFAULT_OUT)


def _load_config(path: Optional[str], allowed: Sequence[str]) -> dict:
    if path is None:
        return {}
    with open(path) as fh:
        try:
            cfg = json.load(fh)
        except json.JSONDecodeError as exc:
            raise UsageError(f"{path}: invalid JSON ({exc})") from exc
    if not isinstance(cfg, dict):
        raise UsageError(f"{path}: top level must be an object")
    unknown = sorted(set(cfg) - set(allowed))
    if unknown:
        raise UsageError(f"{path}: unknown keys {unknown}")
    return cfg


def _merge(file_cfg: dict, args, keys: Sequence[str]) -> dict:
    """File values first, then every flag the user actually gave."""
    merged = dict(file_cfg)
    for k in keys:
        v = getattr(args, k, None)
        if v is not None:
            merged[k] = v
    return merged


def _run_config(args) -> ex.RunConfig:
    merged = _merge(_load_config(args.config, RUN_KEYS), args, RUN_KEYS)
    if "preset" not in merged:
        raise UsageError("a preset is required (positional argument or config file)")
    preset = merged.pop("preset")
    method = merged.pop("method", None)
    seed = merged.pop("seed", 0)
    scale = merged.pop("scale", "full")
    try:
        return ex.resolve(preset, method, seed=seed, scale=scale, **merged)
    except (TypeError, ValueError) as exc:
        raise UsageError(str(exc)) from exc


def _add_run_flags(p: argparse.ArgumentParser, with_method: bool = True) -> None:
    p.add_argument("preset", nargs="?", choices=sorted(ex.PRESETS), help="experiment preset")
    if with_method:
        p.add_argument("method", nargs="?", choices=KINDS, help="training method (default: the preset's)")
    p.add_argument("--seed", type=int)
    p.add_argument("--scale", choices=("full", "desk"))
    p.add_argument("--n", type=int, help="training points N")
    p.add_argument("--m", type=int, help="collocation points M")
    p.add_argument("--c", type=float, help="relative output noise")
    p.add_argument("--nu", type=float, help="Burgers viscosity")
    p.add_argument("--config", help="JSON configuration file (flags take precedence)")


# --------------------------------------------------------------------------
# commands


def cmd_generate(args) -> int:
    cfg = _run_config(args)
    data = ex.build_problem(cfg)
    directory = ex.fresh_dir(_out_root(args) / "datasets", f"{cfg.preset}-s{cfg.seed}-{cfg.key()[:10]}")
    files = ex.write_datasets(data, directory)
    digest, blobs = ex.content_hash(files)
    manifest = {
        "format": ex.MANIFEST_FORMAT,
        "preset": cfg.preset,
        "seed": cfg.seed,
        "config": cfg.to_dict(),
        "inputs": {"hash": digest, "files": {k: p.name for k, p in files.items()}, "blobs": blobs},
        "outputs": {},
        "status": "generated",
    }
    (directory / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    for name, p in files.items():
        print(f"{name}: {p}")
    return EXIT_OK


def cmd_train(args) -> int:
    out_root = _out_root(args)
    if args.manifest:
        outcome, problems = ex.replay(args.manifest, out_root)
        print(f"replayed into {outcome.directory}")
        for p in problems:
            print(f"DIFF  {p}")
        print("identical" if not problems else f"{len(problems)} difference(s)")
        return EXIT_OK if not problems else EXIT_VERIFY
    cfg = _run_config(args)
    if args.trace:
        cfg = ex.RunConfig.from_dict({**cfg.to_dict(), "trace": True})
    outcome = ex.run(cfg, out_root, log=_log if args.verbose else None)
    print(f"run: {outcome.directory}")
    for k, v in outcome.scalars.items():
        print(f"{k}: {v:.6g}")
    return EXIT_OK


def cmd_reproduce(args) -> int:
    merged = _merge(_load_config(args.config, REPRODUCE_KEYS), args, REPRODUCE_KEYS)
    targets = merged.get("targets") or []
    if not targets:
        raise UsageError("name at least one target")
    bad = [t for t in targets if t not in rp.TARGETS]
    if bad:
        raise UsageError(f"unknown targets {bad}; choose from {list(rp.TARGETS)}")
    opts = rp.Options(
        seeds=tuple(merged.get("seeds", (0,))),
        epochs=merged.get("epochs"),
        scale=merged.get("scale", "full"),
        penalty_grid=tuple(merged.get("penalty_grid", DEFAULT_PENALTY_GRID)),
        workers=int(merged.get("workers", 1)),
    )
    if opts.workers < 1 or not opts.seeds or (opts.epochs is not None and opts.epochs < 1):
        raise UsageError("workers and epochs must be >= 1 and seeds non-empty")
    out_dir = rp.reproduce(targets, _out_root(args), opts, log=_log)
    print(f"results: {out_dir / 'results.csv'}")
    print(f"report: {out_dir / 'report.md'}")
    return EXIT_OK


def cmd_verify(args) -> int:
    from . import verification as vf

    if args.list:
        print("\n".join(vf.CHECKS))
        return EXIT_OK
    results: List[vf.CheckResult] = []
    if args.artifact:
        for path in args.artifact:
            if not Path(path).exists():
                raise FileNotFoundError(path)
            results += vf.check_artifact(path)
    if args.manifest:
        outcome, problems = ex.replay(args.manifest, _out_root(args))
        detail = f"replay in {outcome.directory}" if not problems else "; ".join(problems[:3])
        results.append(vf.CheckResult(f"replay {Path(args.manifest).name}", not problems, detail))
    if not (args.artifact or args.manifest) or args.check:
        try:
            results += vf.run_checks(args.check or None)
        except ValueError as exc:
            raise UsageError(str(exc)) from exc
    for r in results:
        print(r.line(), flush=True)
    failed = [r for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} checks passed")
    return EXIT_OK if not failed else EXIT_VERIFY


# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="gradinn", description="Gradient-informed network experiments.")
    parser.add_argument("--out", help=f"output root (default: ${OUT_ENV} or ./{DEFAULT_OUT})")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("generate", help="write a preset's datasets")
    _add_run_flags(g, with_method=False)
    g.set_defaults(func=cmd_generate)

    t = sub.add_parser("train", help="train one method on one preset")
    _add_run_flags(t)
    t.add_argument("--epochs", type=int)
    t.add_argument("--batch-size", dest="batch_size", type=int)
    t.add_argument("--learning-rate", dest="learning_rate", type=float)
    t.add_argument("--l1", type=float)
    t.add_argument("--l2", type=float)
    t.add_argument("--init-scale-u", dest="init_scale_U", type=float)
    t.add_argument("--init-scale-f", dest="init_scale_F", type=float)
    t.add_argument("--trace", action="store_true", default=None, help="record test RMSE every chunk")
    t.add_argument("--manifest", help="replay a recorded run and compare outputs")
    t.add_argument("-v", "--verbose", action="store_true")
    t.set_defaults(func=cmd_train)

    r = sub.add_parser("reproduce", help="rebuild tables and figures")
    r.add_argument("targets", nargs="*", metavar="target", help=f"one or more of {', '.join(rp.TARGETS)}")
    r.add_argument("--seeds", type=int, nargs="+")
    r.add_argument("--epochs", type=int)
    r.add_argument("--scale", choices=("full", "desk"))
    r.add_argument("--workers", type=int)
    r.add_argument("--penalty-grid", dest="penalty_grid", type=float, nargs="+")
    r.add_argument("--config", help="JSON configuration file (flags take precedence)")
    r.set_defaults(func=cmd_reproduce)

    v = sub.add_parser("verify", help="run oracle checks or inspect artifacts")
    v.add_argument("--artifact", nargs="+", help="parameter file, run directory or manifest.json")
    v.add_argument("--manifest", help="replay a run and require identical outputs")
    v.add_argument("--check", nargs="+", help="run only these named checks")
    v.add_argument("--list", action="store_true", help="list check names")
    v.set_defaults(func=cmd_verify)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "targets", None) == []:
        args.targets = None
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"gradinn: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except TrainingDiverged as exc:
        print(f"gradinn: training diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except OSError as exc:
        print(f"gradinn: file error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
