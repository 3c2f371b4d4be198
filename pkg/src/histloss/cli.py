"""Command-line entry point: ``histloss <subcommand> ...``.

Every subcommand reads a JSON config, either a single run config or an
experiment file ``{"dataset": ..., "output_dir": ..., "workers": N, "runs": [...]}``.
Command-line flags override config fields. Outputs are CSV and JSON files
written atomically. Failures exit non-zero with a JSON error object on stderr.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import data as D
from .binning import locate_bin, make_bin_grid
from .harness import (
    RunConfig,
    gradcheck_suite,
    iqr,
    median_normalize,
    prepare,
    representation_experiment,
    run_ols,
    sweep,
    sweep_table,
    train,
    write_json,
)
from .harness.presets import PRESETS
from .model import atomic_write_bytes, save_network

OUTPUT_ENV = "HISTLOSS_OUTPUT_DIR"
EXIT_USAGE = 2
EXIT_FAILURE = 1

log = logging.getLogger("histloss")


class CLIError(Exception):
    def __init__(self, kind: str, message: str, code: int = EXIT_FAILURE, **extra):
        super().__init__(message)
        self.kind = kind
        self.code = code
        self.extra = extra

    def __reduce__(self):
        return (_rebuild_cli_error, (self.kind, str(self), self.code, self.extra))


def _rebuild_cli_error(kind, message, code, extra):
    return CLIError(kind, message, code, **extra)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CLIError("usage", message, EXIT_USAGE)


def emit_histogram(y, bins: int, value_range=None) -> str:
    """Two-column CSV ``bin_center,count``; every value lands in some bin."""
    y = np.asarray(y, dtype=np.float64)
    if y.size == 0:
        raise ValueError("cannot histogram an empty target vector")
    lo, hi = value_range if value_range is not None else (float(y.min()), float(y.max()))
    if hi <= lo:
        hi = lo + 1.0
    grid = make_bin_grid(lo, hi, bins)
    counts = np.bincount(np.atleast_1d(locate_bin(grid, y)), minlength=grid.k)
    lines = ["bin_center,count"] + [f"{c!r},{int(n)}" for c, n in zip(grid.centers.tolist(), counts)]
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------- config

def _read_json(path) -> dict:
    path = Path(path)
    if not path.is_file():
        raise CLIError("missing_file", f"config not found: {path}", path=str(path))
    try:
        return json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise CLIError("bad_config", f"{path}: {exc}", EXIT_USAGE, path=str(path)) from None


def _override_fields(args) -> dict:
    out = {}
    for name in ("loss", "epochs", "seed", "bins", "n_train", "n_test", "dropout", "lr", "batch_size"):
        v = getattr(args, name, None)
        if v is not None:
            out[name] = v
    if getattr(args, "hidden", None):
        out["hidden_dims"] = [int(h) for h in args.hidden.split(",")]
    if getattr(args, "sigma_scale", None) is not None:
        out["sigma_scale"] = args.sigma_scale
    if getattr(args, "support", None):
        a, b = (float(v) for v in args.support.split(","))
        out["support"] = [a, b]
    return out


def load_experiment(args) -> tuple[list[RunConfig], str | None, Path, int]:
    """Resolve configs, dataset reference, output directory and worker count."""
    doc = _read_json(args.config) if args.config else {}
    base = Path(args.config).parent if args.config else Path(".")
    runs = doc.get("runs")
    if runs is None:
        runs = [{k: v for k, v in doc.items() if k not in ("output_dir", "workers")}]
    overrides = _override_fields(args)
    preset = {}
    if getattr(args, "preset", None):
        preset = {k: list(v) if isinstance(v, tuple) else v for k, v in PRESETS[args.preset].items()}
    configs = []
    for i, r in enumerate(runs):
        r = {**preset, **r, **overrides}
        if args.dataset:
            r["dataset"] = args.dataset
        elif r.get("dataset") is None and doc.get("dataset") is not None:
            r["dataset"] = doc["dataset"]
        if r.get("dataset") and not str(r["dataset"]).startswith("synthetic") and not Path(r["dataset"]).is_absolute():
            cand = base / r["dataset"]
            if cand.exists():
                r["dataset"] = str(cand)
        r.setdefault("name", f"{r.get('loss', 'hl_gaussian')}_s{r.get('seed', 0)}" if len(runs) == 1 else f"run{i}")
        try:
            configs.append(RunConfig.from_dict(r))
        except (TypeError, ValueError) as exc:
            raise CLIError("bad_config", str(exc), EXIT_USAGE) from None
    names = [c.name for c in configs]
    if len(set(names)) != len(names):
        raise CLIError("bad_config", f"run names must be unique, got {names}", EXIT_USAGE)
    out = args.out or doc.get("output_dir") or os.environ.get(OUTPUT_ENV) or "results"
    workers = args.workers or int(doc.get("workers", 1))
    return configs, configs[0].dataset if configs else None, Path(out), max(1, workers)


def load_dataset(ref: str | None):
    """Dataset plus optional fixed split from a manifest path or ``synthetic:n=..,d=..,seed=..``."""
    if not ref:
        raise CLIError("bad_config", "no dataset given (use --dataset or a 'dataset' field)", EXIT_USAGE)
    if ref.startswith("synthetic"):
        kw = {}
        _, _, spec = ref.partition(":")
        for part in filter(None, spec.split(",")):
            k, _, v = part.partition("=")
            kw[k.strip()] = float(v) if k.strip() == "noise" else int(v)
        return D.make_synthetic(**kw), None
    path = Path(ref)
    if not path.exists():
        raise CLIError("missing_file", f"dataset not found: {path}", path=str(path))
    try:
        if path.suffix == ".json":
            man = D.read_manifest(path)
            ds = D.load_from_manifest(man)
            fixed = None
            if man.split:
                if man.split.get("kind") == "first_n":
                    fixed = D.split_first_n(ds, int(man.split["n_train"]))
                elif man.split.get("kind") == "file":
                    fixed = D.split_from_file(ds, man.resolve(man.split["path"]))
            return ds, fixed
        return D.load_csv(path, D.CT_POSITION_SCHEMA), None
    except D.DataError as exc:
        kind = "checksum_mismatch" if "checksum" in str(exc) else "bad_dataset"
        raise CLIError(kind, str(exc), path=str(path)) from None


def _guard(paths, overwrite: bool) -> None:
    existing = [str(p) for p in paths if Path(p).exists()]
    if existing and not overwrite:
        raise CLIError("exists", f"output exists (pass --overwrite): {existing[0]}", EXIT_USAGE)


# ---------------------------------------------------------------- runners

def _train_one(config: RunConfig, out: Path, overwrite: bool) -> dict:
    hist_path = out / f"{config.name}_history.csv"
    summ_path = out / f"{config.name}_summary.json"
    net_path = out / f"{config.name}.net"
    ds, fixed = load_dataset(config.dataset)
    _guard([hist_path, summ_path, net_path], overwrite)
    data = prepare(config, ds, fixed)
    net, hist = train(config, data)
    save_network(net, net_path)
    hist.checkpoint = net_path.name
    hist.write_csv(hist_path)
    summary = hist.summary()
    write_json(summ_path, summary)
    return summary


def cmd_train(args) -> dict:
    configs, _, out, workers = load_experiment(args)
    if workers > 1 and len(configs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_train_one, configs, [out] * len(configs), [args.overwrite] * len(configs)))
    else:
        results = [_train_one(c, out, args.overwrite) for c in configs]
    return {"runs": [{"name": c.name, "final": r["final"]} for c, r in zip(configs, results)]}


def _values(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise CLIError("usage", f"bad --values list: {text!r}", EXIT_USAGE) from None


def cmd_sweep(args) -> dict:
    configs, _, out, _ = load_experiment(args)
    template = configs[0]
    values = _values(args.values)
    paths = [out / f"{template.name}_{args.axis}_{v:g}_history.csv" for v in values]
    summ_path = out / f"{template.name}_{args.axis}_summary.json"
    table_path = out / f"{template.name}_{args.axis}_table.csv"
    _guard([*paths, summ_path, table_path], args.overwrite)
    ds, fixed = load_dataset(template.dataset)
    data = prepare(template, ds, fixed)
    points = sweep(template, args.axis, values, data)
    for pt, path in zip(points, paths):
        pt.history.write_csv(path)
    atomic_write_bytes(table_path, sweep_table(points).encode())
    summary = {
        "config": template.to_dict(),
        "axis": args.axis,
        "points": [
            {"value": pt.value, "train": pt.train.__dict__, "test": pt.test.__dict__, "history": p.name}
            for pt, p in zip(points, paths)
        ],
    }
    write_json(summ_path, summary)
    return summary


def cmd_repr(args) -> dict:
    configs, _, out, _ = load_experiment(args)
    base = configs[0]
    target = base.replace(loss=args.target_loss, name=f"repr_{args.mode}_{args.target_loss}")
    source = base.replace(loss=args.source_loss)
    hist_path = out / f"{target.name}_s{base.seed}_history.csv"
    summ_path = out / f"{target.name}_s{base.seed}_summary.json"
    _guard([hist_path, summ_path], args.overwrite)
    ds, fixed = load_dataset(base.dataset)
    data = prepare(base, ds, fixed)
    res = representation_experiment(args.mode, source, target, data)
    res.history.write_csv(hist_path)
    summary = {
        "mode": args.mode,
        "source_loss": None if args.mode == "random" else args.source_loss,
        "target": res.history.summary(),
    }
    if res.source_history is not None:
        summary["source"] = res.source_history.summary()
    write_json(summ_path, summary)
    return summary


def cmd_gradnorm(args) -> dict:
    configs, _, out, _ = load_experiment(args)
    base = configs[0].replace(dropout=0.0, instrument=True)
    losses = [s.strip() for s in args.losses.split(",") if s.strip()]
    paths = {loss: out / f"gradnorm_{loss}_s{base.seed}_history.csv" for loss in losses}
    norm_path = out / f"gradnorm_s{base.seed}.csv"
    summ_path = out / f"gradnorm_s{base.seed}_summary.json"
    _guard([*paths.values(), norm_path, summ_path], args.overwrite)
    ds, fixed = load_dataset(base.dataset)
    data = prepare(base, ds, fixed)
    columns, stats = {}, {}
    for loss in losses:
        _, hist = train(base.replace(loss=loss, name=f"gradnorm_{loss}"), data)
        hist.write_csv(paths[loss])
        norms = hist.column("head_grad_norm")
        columns[loss] = median_normalize(norms)
        stats[loss] = {
            "median_norm": float(np.median(norms)),
            "iqr_normalized": iqr(columns[loss]),
            "prop1_head_bound": hist.prop1_head_bound_holds(),
        }
    lines = ["epoch," + ",".join(losses)]
    for e in range(base.epochs):
        lines.append(",".join([str(e + 1)] + [repr(float(columns[loss][e])) for loss in losses]))
    atomic_write_bytes(norm_path, ("\n".join(lines) + "\n").encode())
    summary = {"config": base.to_dict(), "losses": stats}
    write_json(summ_path, summary)
    return summary


def cmd_gradcheck(args) -> dict:
    report = gradcheck_suite(args.trials, args.seed)
    out = Path(args.out or os.environ.get(OUTPUT_ENV) or "results")
    path = out / f"gradcheck_s{args.seed}.json"
    _guard([path], args.overwrite)
    d = report.to_dict()
    write_json(path, d)
    if not report.passed:
        raise CLIError("gradcheck_failed", f"max relative error {report.max_rel_error:.3e}", report=str(path))
    return {k: v for k, v in d.items() if k != "trials"}


def cmd_baseline_ols(args) -> dict:
    configs, _, out, _ = load_experiment(args)
    base = configs[0]
    path = out / f"ols_s{base.seed}_summary.json"
    _guard([path], args.overwrite)
    ds, fixed = load_dataset(base.dataset)
    data = prepare(base, ds, fixed)
    res = run_ols(data)
    summary = {"config": base.to_dict(), "train": res.train.__dict__, "test": res.test.__dict__}
    write_json(path, summary)
    return summary


def cmd_histogram(args) -> dict:
    ds, _ = load_dataset(args.dataset)
    rng = None
    if args.range:
        rng = tuple(float(v) for v in args.range.split(","))
    out = Path(args.out or os.environ.get(OUTPUT_ENV) or "results")
    path = out / f"{ds.name}_target_histogram.csv"
    _guard([path], args.overwrite)
    atomic_write_bytes(path, emit_histogram(ds.y, args.bins, rng).encode())
    return {"path": str(path), "n": ds.n, "bins": args.bins}


# ---------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="histloss", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    def common(sp, config=True):
        if config:
            sp.add_argument("--config", help="JSON run config or experiment file")
            sp.add_argument("--preset", choices=sorted(PRESETS), help="base settings, below config and flags")
            sp.add_argument("--dataset", help="manifest JSON, CSV path or synthetic:n=..,d=..,seed=..")
            sp.add_argument("--loss")
            sp.add_argument("--epochs", type=int)
            sp.add_argument("--seed", type=int)
            sp.add_argument("--bins", type=int)
            sp.add_argument("--sigma-scale", type=float, dest="sigma_scale")
            sp.add_argument("--support", help="a,b")
            sp.add_argument("--hidden", help="comma-separated hidden widths")
            sp.add_argument("--n-train", type=int, dest="n_train")
            sp.add_argument("--n-test", type=int, dest="n_test")
            sp.add_argument("--dropout", type=float)
            sp.add_argument("--lr", type=float)
            sp.add_argument("--batch-size", type=int, dest="batch_size")
            sp.add_argument("--workers", type=int)
        sp.add_argument("--out", help=f"output directory (default ${OUTPUT_ENV} or ./results)")
        sp.add_argument("--overwrite", action="store_true")

    sp = sub.add_parser("train", help="train every run in the config")
    common(sp)
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("sweep", help="HL-Gaussian runs across bins or sigma")
    common(sp)
    sp.add_argument("--axis", choices=("bins", "sigma"), required=True)
    sp.add_argument("--values", required=True, help="comma-separated; sigma values are multiples of the bin width")
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("repr", help="representation swap experiment")
    common(sp)
    sp.add_argument("--mode", choices=("fixed", "initialized", "random"), required=True)
    sp.add_argument("--source-loss", default="hl_gaussian", dest="source_loss")
    sp.add_argument("--target-loss", default="l2", dest="target_loss")
    sp.set_defaults(func=cmd_repr)

    sp = sub.add_parser("gradnorm", help="per-epoch head gradient norms without dropout")
    common(sp)
    sp.add_argument("--losses", default="l2,hl_onebin,hl_gaussian")
    sp.set_defaults(func=cmd_gradnorm)

    sp = sub.add_parser("gradcheck", help="finite-difference check of backprop")
    common(sp, config=False)
    sp.add_argument("--trials", type=int, default=100)
    sp.add_argument("--seed", type=int, default=1)
    sp.set_defaults(func=cmd_gradcheck)

    sp = sub.add_parser("baseline-ols", help="ordinary least squares baseline")
    common(sp)
    sp.set_defaults(func=cmd_baseline_ols)

    sp = sub.add_parser("histogram", help="target histogram as CSV")
    common(sp, config=False)
    sp.add_argument("--dataset", required=True)
    sp.add_argument("--bins", type=int, default=100)
    sp.add_argument("--range", help="a,b (default: data range)")
    sp.set_defaults(func=cmd_histogram)
    return p


def main(argv=None) -> int:
    try:
        parser = build_parser()
        args = parser.parse_args(argv)
        if args.command is None:
            raise CLIError("usage", "missing subcommand", EXIT_USAGE)
        logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
        result = args.func(args)
    except CLIError as exc:
        json.dump({"error": exc.kind, "message": str(exc), **exc.extra}, sys.stderr)
        sys.stderr.write("\n")
        return exc.code
    except (ValueError, RuntimeError, np.linalg.LinAlgError) as exc:
        json.dump({"error": type(exc).__name__, "message": str(exc)}, sys.stderr)
        sys.stderr.write("\n")
        return EXIT_FAILURE
    json.dump(result, sys.stdout, indent=2, sort_keys=True, default=str)
    sys.stdout.write("\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())
