"""Command-line entry point: generate datasets, train models, run studies.

Four subcommands cover the full workflow:

- ``gen-data`` writes one dataset file (d1, d2 or d3) with its splits.
- ``train`` fits one model on a dataset file and writes a checkpoint
  plus a loss-curve file.
- ``run-exp`` executes one of the four benchmark experiments from a
  JSON configuration file (flags override file values) and writes the
  tidy, quantile and, for the drift studies, series and table files.
- ``report`` re-aggregates an existing tidy file into fresh quantile
  (and, for the drift studies, table) files without re-running anything.

Exit codes: 0 success, 1 usage error, 2 runtime failure. Every output
file embeds the tool version, master seed and configuration digest.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys

import numpy as np

from .datasets import (dataset_filename, generate_d2, generate_d3,
                       load_dataset, sample_d1, save_dataset)
from .experiments import (EXPERIMENT_NUMBERS, DriftTable, TOOL_VERSION,
                          TrialResult, default_config, mae, run_experiment,
                          save_results, summarize_cells, write_quantile_rows,
                          write_table_rows)
from .models import ModelKind, build, save_checkpoint
from .nnet import NetSpec
from .training import TrainConfig, TrainingDiverged, train

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_RUNTIME = 2

_MODEL_CHOICES = tuple(k.value for k in ModelKind)
_TRAIN_FIELDS = {f.name for f in dataclasses.fields(TrainConfig)}
_CONFIG_KEYS = {"experiment", "trials", "master_seed", "models", "data",
                "net_layers", "n_grid", "noise_grid", "train",
                "train_overrides", "jobs", "outdir"}
_DATA_KEYS = {"d1_n", "drift_n", "seed"}


class UsageError(Exception):
    """Bad flags, bad config file, or bad parameter values."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


# Distinguishes "flag not given" from the meaningful --patience none.
_UNSET = object()


def _patience(text: str):
    if text.lower() == "none":
        return None
    return int(text)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="vfmlab",
                     description="virtual flow metering laboratory")
    parser.add_argument("--version", action="version",
                        version=f"vfmlab {TOOL_VERSION}")
    sub = parser.add_subparsers(dest="command", metavar="command")

    gen = sub.add_parser("gen-data", help="generate one dataset file")
    gen.add_argument("--set", required=True, choices=("d1", "d2", "d3"),
                     help="which generator to run")
    gen.add_argument("--n", type=int, default=10_000, help="number of rows")
    gen.add_argument("--sigma", type=float, default=0.0,
                     help="output noise level (d1 only)")
    gen.add_argument("--seed", type=int, default=0, help="generator seed")
    gen.add_argument("--outdir", default=".", help="output directory")
    gen.set_defaults(func=cmd_gen_data)

    tr = sub.add_parser("train", help="fit one model on a dataset file")
    tr.add_argument("--data", required=True, help="dataset file to train on")
    tr.add_argument("--model", required=True, choices=_MODEL_CHOICES,
                    help="model kind to fit")
    tr.add_argument("--subset", type=int, default=None,
                    help="use only the first N rows of the training split")
    tr.add_argument("--seed", type=int, default=0,
                    help="initialization and shuffle seed")
    tr.add_argument("--epochs", type=int, default=None,
                    help="maximum training epochs")
    tr.add_argument("--patience", type=_patience, default=_UNSET,
                    help="early-stopping patience in epochs, or 'none'")
    tr.add_argument("--batch-size", type=int, default=None)
    tr.add_argument("--lr-net", type=float, default=None,
                    help="network learning rate")
    tr.add_argument("--lr-phys", type=float, default=None,
                    help="physical-parameter learning rate")
    tr.add_argument("--sigma-assumed", type=float, default=None,
                    help="noise scale assumed in the likelihood term")
    tr.add_argument("--net-layers", default=None,
                    help="comma-separated layer sizes, e.g. 6,50,50,1")
    tr.add_argument("--outdir", default=".", help="output directory")
    tr.set_defaults(func=cmd_train)

    run = sub.add_parser("run-exp", help="run one benchmark experiment")
    run.add_argument("--config", required=True,
                     help="JSON experiment configuration file")
    run.add_argument("--trials", type=int, default=None,
                     help="override the trial count")
    run.add_argument("--seed", type=int, default=None,
                     help="override the master seed")
    run.add_argument("--jobs", type=int, default=None,
                     help="parallel worker processes for grid cells")
    run.add_argument("--outdir", default=None, help="override output directory")
    run.set_defaults(func=cmd_run_exp)

    rep = sub.add_parser("report",
                         help="re-aggregate an existing tidy result file")
    rep.add_argument("--tidy", required=True, help="tidy CSV to re-aggregate")
    rep.add_argument("--outdir", default=None,
                     help="output directory (default: alongside the tidy file)")
    rep.set_defaults(func=cmd_report)
    return parser


def cmd_gen_data(args) -> int:
    try:
        if args.set == "d1":
            ds = sample_d1(args.n, args.sigma, args.seed)
        else:
            if args.sigma != 0.0:
                raise UsageError(f"{args.set} is noise-free; --sigma must be 0")
            maker = generate_d2 if args.set == "d2" else generate_d3
            ds = maker(args.n, args.seed)
    except ValueError as exc:
        raise UsageError(str(exc))
    os.makedirs(args.outdir, exist_ok=True)
    path = os.path.join(args.outdir, dataset_filename(ds))
    save_dataset(ds, path)
    p = ds.provenance
    print(f"wrote {path}: generator={p.generator} rows={p.n} "
          f"sigma_eps={p.sigma_eps:g} seed={p.seed} "
          f"splits train/val/test={len(ds.train_idx)}/{len(ds.val_idx)}/"
          f"{len(ds.test_idx)}")
    return EXIT_OK


def _train_config_from_args(args) -> TrainConfig:
    cfg = TrainConfig(seed=args.seed)
    updates = {}
    for field, value in (("max_epochs", args.epochs),
                         ("batch_size", args.batch_size),
                         ("learning_rate_net", args.lr_net),
                         ("learning_rate_phys", args.lr_phys),
                         ("sigma_eps_assumed", args.sigma_assumed)):
        if value is not None:
            updates[field] = value
    if args.patience is not _UNSET:
        updates["patience"] = args.patience
    return dataclasses.replace(cfg, **updates) if updates else cfg


def _subset_train(ds, n_keep: int):
    """Drop all but the first n_keep training rows; keep val/test intact."""
    keep_train = ds.train_idx[:n_keep]
    keep = np.sort(np.concatenate([keep_train, ds.val_idx, ds.test_idx]))
    pos = {int(row): i for i, row in enumerate(keep)}

    def remap(idx):
        return np.array([pos[int(r)] for r in idx], dtype=int)

    return dataclasses.replace(
        ds, t=ds.t[keep], x=ds.x[keep], q_true=ds.q_true[keep], y=ds.y[keep],
        train_idx=remap(keep_train), val_idx=remap(ds.val_idx),
        test_idx=remap(ds.test_idx),
        provenance=dataclasses.replace(ds.provenance, n=len(keep)))


def cmd_train(args) -> int:
    try:
        ds = load_dataset(args.data)
    except FileNotFoundError:
        raise UsageError(f"dataset file not found: {args.data}")
    if args.subset is not None:
        if not 1 <= args.subset <= len(ds.train_idx):
            raise UsageError(f"--subset must lie in [1, {len(ds.train_idx)}], "
                             f"got {args.subset}")
        ds = _subset_train(ds, args.subset)
    if len(ds.train_idx) == 0:
        raise UsageError(f"{args.data} has an empty training split")
    kind = ModelKind(args.model)
    net_spec = None
    if kind is not ModelKind.MECH_PLAIN and kind is not ModelKind.MECH_ORACLE:
        layers = (6, 50, 50, 1)
        if args.net_layers is not None:
            try:
                layers = tuple(int(v) for v in args.net_layers.split(","))
            except ValueError:
                raise UsageError(f"bad --net-layers {args.net_layers!r}")
        try:
            net_spec = NetSpec(layers)
        except ValueError as exc:
            raise UsageError(str(exc))
    model = build(kind, net_spec=net_spec, seed=args.seed)
    cfg = _train_config_from_args(args)
    if len(ds.val_idx) == 0 and cfg.patience is not None:
        raise UsageError(f"{args.data} has no validation split; "
                         "pass --patience none")

    os.makedirs(args.outdir, exist_ok=True)
    stem = os.path.splitext(os.path.basename(args.data))[0]
    losses_path = os.path.join(args.outdir, f"{stem}_{kind.value}_losses.csv")
    try:
        fitted, report = train(model, ds, cfg)
    except TrainingDiverged as exc:
        _write_losses(losses_path, exc.report)
        print(f"training diverged at epoch {exc.report.epochs_run}; "
              f"loss curves kept in {losses_path}", file=sys.stderr)
        return EXIT_RUNTIME
    _write_losses(losses_path, report)
    ckpt_path = os.path.join(args.outdir, f"{stem}_{kind.value}.ckpt.json")
    save_checkpoint(fitted, ckpt_path)

    def _split_mae(idx) -> float:
        if len(idx) == 0:
            return float("nan")
        return mae(fitted.predict(ds.x[idx]), ds.y[idx])
    print(f"{kind.value} on {stem}: best epoch {report.best_epoch}"
          f"/{report.epochs_run}, validation MAE {_split_mae(ds.val_idx):.6g}, "
          f"test MAE {_split_mae(ds.test_idx):.6g}")
    print(f"wrote {ckpt_path} and {losses_path}")
    return EXIT_OK


def _write_losses(path, report) -> None:
    with open(path, "w") as fh:
        fh.write(f"# vfmlab={TOOL_VERSION} best_epoch={report.best_epoch} "
                 f"epochs_run={report.epochs_run}\n")
        fh.write("epoch,train_objective,val_mse\n")
        for i in range(len(report.train_curve)):
            fh.write(f"{i + 1},{report.train_curve[i]!r},"
                     f"{report.val_curve[i]!r}\n")


def _train_from_dict(base: TrainConfig, raw, where: str) -> TrainConfig:
    if not isinstance(raw, dict):
        raise UsageError(f"{where} must be an object of TrainConfig fields")
    unknown = set(raw) - _TRAIN_FIELDS
    if unknown:
        raise UsageError(f"{where} has unknown fields {sorted(unknown)}; "
                         f"valid fields: {sorted(_TRAIN_FIELDS)}")
    try:
        return dataclasses.replace(base, **raw)
    except ValueError as exc:
        raise UsageError(f"{where}: {exc}")


def _parse_run_config(raw: dict, args):
    if not isinstance(raw, dict):
        raise UsageError("config file must contain a JSON object")
    unknown = set(raw) - _CONFIG_KEYS
    if unknown:
        raise UsageError(f"unknown config keys {sorted(unknown)}; "
                         f"valid keys: {sorted(_CONFIG_KEYS)}")
    experiment = raw.get("experiment")
    if experiment not in EXPERIMENT_NUMBERS:
        raise UsageError(f"config must set experiment to one of "
                         f"{sorted(EXPERIMENT_NUMBERS)}, got {experiment!r}")

    kw = {}
    for key in ("trials", "master_seed"):
        if key in raw:
            kw[key] = raw[key]
    if "models" in raw:
        try:
            kw["models"] = tuple(ModelKind(m) for m in raw["models"])
        except ValueError:
            raise UsageError(f"models must be drawn from {_MODEL_CHOICES}")
    if "net_layers" in raw:
        try:
            kw["net_spec"] = NetSpec(tuple(int(v) for v in raw["net_layers"]))
        except ValueError as exc:
            raise UsageError(f"net_layers: {exc}")
    data = raw.get("data", {})
    unknown = set(data) - _DATA_KEYS
    if unknown:
        raise UsageError(f"unknown data keys {sorted(unknown)}; "
                         f"valid keys: {sorted(_DATA_KEYS)}")
    if "d1_n" in data:
        kw["d1_n"] = data["d1_n"]
    if "drift_n" in data:
        kw["drift_n"] = data["drift_n"]
    if "seed" in data:
        kw["data_seed"] = data["seed"]
    for key in ("n_grid", "noise_grid"):
        if key in raw:
            kw[key] = tuple(raw[key])
    if "jobs" in raw:
        kw["jobs"] = raw["jobs"]

    tuned = default_config(experiment)
    base_train = tuned.train
    if "train" in raw:
        base_train = _train_from_dict(base_train, raw["train"], "train")
        kw["train"] = base_train
    if "train_overrides" in raw:
        if not isinstance(raw["train_overrides"], dict):
            raise UsageError("train_overrides must map model kinds to "
                             "TrainConfig fields")
        overrides = []
        for name, fields in raw["train_overrides"].items():
            try:
                okind = ModelKind(name)
            except ValueError:
                raise UsageError(f"train_overrides key {name!r} is not one of "
                                 f"{_MODEL_CHOICES}")
            overrides.append((okind, _train_from_dict(
                base_train, fields, f"train_overrides[{name}]")))
        kw["train_overrides"] = tuple(overrides)

    if args.trials is not None:
        kw["trials"] = args.trials
    if args.seed is not None:
        kw["master_seed"] = args.seed
    if args.jobs is not None:
        kw["jobs"] = args.jobs
    outdir = args.outdir if args.outdir is not None else raw.get("outdir",
                                                                 "results")
    try:
        config = default_config(experiment, **kw)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"bad configuration: {exc}")
    return experiment, config, outdir


def _print_table(table: DriftTable) -> None:
    width = max(9, *(len(m) for m in table.models))
    print("  ".join(["metric  "] + [f"{m:>{width}}" for m in table.models]))
    for metric, values in (("mae_val ", table.mae_val),
                           ("mae_test", table.mae_test)):
        print("  ".join([metric] + [f"{v:>{width}.3f}" for v in values]))


def cmd_run_exp(args) -> int:
    try:
        with open(args.config) as fh:
            raw = json.load(fh)
    except FileNotFoundError:
        raise UsageError(f"config file not found: {args.config}")
    except json.JSONDecodeError as exc:
        raise UsageError(f"{args.config} is not valid JSON: {exc}")
    experiment, config, outdir = _parse_run_config(raw, args)
    result = run_experiment(experiment, config)
    paths = save_results(result, outdir)
    n_div = sum(r.diverged for r in result.trials)
    print(f"{experiment}: {len(result.trials)} model fits, "
          f"{n_div} diverged, master_seed={config.master_seed}")
    for name in ("tidy", "quantiles", "series", "table"):
        if name in paths:
            print(f"wrote {paths[name]}")
    if result.table is not None:
        _print_table(result.table)
    if result.trials and n_div == len(result.trials):
        print("every fit diverged; inspect the tidy file", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


def _parse_control(text: str):
    try:
        return int(text)
    except ValueError:
        try:
            return float(text)
        except ValueError:
            return text


def _read_tidy(path):
    with open(path) as fh:
        header = fh.readline()
        if not header.startswith("# vfmlab="):
            raise UsageError(f"{path} is not a tidy result file")
        columns = fh.readline().strip()
        if columns != "experiment,model,control,trial,metric,value":
            raise UsageError(f"{path} has unexpected columns: {columns}")
        cells = {}
        order = []
        experiment = None
        for line in fh:
            exp, model, control, trial, metric, value = line.strip().split(",")
            experiment = exp
            key = (model, _parse_control(control), int(trial))
            if key not in cells:
                cells[key] = {}
                order.append(key)
            cells[key][metric] = value
    if experiment is None:
        raise UsageError(f"{path} contains no result rows")
    records = []
    for (model, control, trial) in order:
        metrics = cells[(model, control, trial)]
        rel = metrics.get("rel_error")
        records.append(TrialResult(
            experiment, model, control, trial,
            mae_val=float(metrics["mae_val"]),
            mae_test=float(metrics["mae_test"]),
            diverged=metrics.get("diverged") == "1",
            rel_error=None if rel is None else float(rel)))
    return header, experiment, records


def _in_order(values) -> list:
    seen = []
    for v in values:
        if v not in seen:
            seen.append(v)
    return seen


def cmd_report(args) -> int:
    try:
        header, experiment, records = _read_tidy(args.tidy)
    except FileNotFoundError:
        raise UsageError(f"tidy file not found: {args.tidy}")
    models = _in_order(r.model for r in records)
    controls = _in_order(r.control for r in records)
    trials = max(r.trial for r in records) + 1

    summaries = list(summarize_cells(experiment, records, models, controls,
                                     trials))
    if any(r.rel_error is not None for r in records):
        # The baseline level's ratio is 1 by construction; quantile rows
        # cover the stressed levels only.
        rel_controls = [c for c in controls if c != 0.0]
        summaries.extend(summarize_cells(
            experiment, [r for r in records if r.control != 0.0],
            models, rel_controls, trials, metrics=("rel_error",)))

    outdir = args.outdir
    if outdir is None:
        outdir = os.path.dirname(os.path.abspath(args.tidy))
    os.makedirs(outdir, exist_ok=True)
    qpath = os.path.join(outdir, f"{experiment}_quantiles.csv")
    with open(qpath, "w") as fh:
        fh.write(header)
        write_quantile_rows(fh, summaries)
    print(f"wrote {qpath}")

    if experiment in ("exp3", "exp4"):
        med_val, med_test = [], []
        for model in models:
            rows = [r for r in records if r.model == model and not r.diverged]
            med_val.append(float(np.median([r.mae_val for r in rows]))
                           if rows else float("nan"))
            med_test.append(float(np.median([r.mae_test for r in rows]))
                            if rows else float("nan"))
        table = DriftTable(tuple(models), tuple(med_val), tuple(med_test))
        tpath = os.path.join(outdir, f"{experiment}_table.csv")
        with open(tpath, "w") as fh:
            fh.write(header)
            write_table_rows(fh, table)
        print(f"wrote {tpath}")
        _print_table(table)
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if getattr(args, "func", None) is None:
            parser.print_help()
            return EXIT_USAGE
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
