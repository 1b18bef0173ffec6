"""Benchmark experiments: dataset x model x trial grids, quantile reports.

Four studies stress the model zoo in complementary ways:

- exp1 shrinks the training set on stationary data and tracks test MAE.
- exp2 raises the output noise level and reports each model's test MAE
  relative to its own noise-free baseline, with evaluation always
  against noise-free targets.
- exp3 trains on the early phase of a depleting-reservoir series and
  predicts the future (temporal split).
- exp4 does the same for a rising gas-to-oil-ratio series.

Every random draw derives from the master seed through spawn keys
(4, experiment number, level index, trial, role), so each grid cell is
reproducible in isolation and results never depend on execution order.
Cells are independent work items; ``jobs`` > 1 fans them out over a
process pool and collection order does not affect the output. Output
files are plain CSV with one comment header line carrying the tool
version, the master seed, and a digest of the configuration, so any
figure built from them traces back to one command.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .datasets import Dataset, generate_d2, generate_d3, sample_d1
from .models import NET_KINDS, ModelKind, build
from .nnet import NetSpec
from .seeding import stream_rng
from .training import TrainConfig, TrainingDiverged, train

TOOL_VERSION = "0.1.0"

# Top-level RNG stream namespace for experiment draws.
STREAM_EXPERIMENTS = 4
# Roles inside a (experiment, level, trial) cell.
ROLE_INIT = 0
ROLE_SHUFFLE = 1
ROLE_DRAW = 2

EXPERIMENT_NUMBERS = {"exp1": 1, "exp2": 2, "exp3": 3, "exp4": 4}

DEFAULT_MODELS = (
    ModelKind.MECH_ORACLE,
    ModelKind.MECH_PLAIN,
    ModelKind.HYBRID_AREA,
    ModelKind.HYBRID_ERROR,
    ModelKind.DATA_DRIVEN,
)

DEFAULT_N_GRID = (2, 4, 8, 20, 40, 80, 800, 4000, 8000)
DEFAULT_NOISE_GRID = (1.0, 2.0, 3.0, 4.0, 5.0, 10.0)

# Fraction of surviving trials below which a summary cell is flagged.
MIN_SURVIVING_FRACTION = 0.8


@dataclass(frozen=True)
class ExperimentConfig:
    """Grid, trial count, seeds and optimizer settings for one study."""

    trials: int = 20
    master_seed: int = 0
    models: tuple[ModelKind, ...] = DEFAULT_MODELS
    net_spec: NetSpec = NetSpec((6, 50, 50, 1))
    data_seed: int = 0
    d1_n: int = 10_000
    drift_n: int = 5000
    n_grid: tuple[int, ...] = DEFAULT_N_GRID
    noise_grid: tuple[float, ...] = DEFAULT_NOISE_GRID
    train: TrainConfig = field(default_factory=TrainConfig)
    train_overrides: tuple[tuple[ModelKind, TrainConfig], ...] = ()
    jobs: int = 1

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError(f"trials must be at least 1, got {self.trials}")
        if not self.models:
            raise ValueError("models must be nonempty")
        if len(set(self.models)) != len(self.models):
            raise ValueError("models must be unique")
        if self.d1_n <= 2000:
            raise ValueError("d1_n must exceed the 2000-row test split")
        if any(n < 1 for n in self.n_grid):
            raise ValueError("n_grid entries must be positive")
        if any(s <= 0 for s in self.noise_grid):
            raise ValueError("noise_grid entries must be positive")
        if self.jobs < 1:
            raise ValueError(f"jobs must be at least 1, got {self.jobs}")

    def train_config_for(self, kind: ModelKind) -> TrainConfig:
        for k, cfg in self.train_overrides:
            if k == kind:
                return cfg
        return self.train


# Per-experiment training recipes. The physics models (few parameters)
# converge within a few hundred epochs, so exp3 caps them separately
# while giving the networks the long budget they need to pick up the
# in-range curvature that drives their drift extrapolation; on the
# gentler exp4 drift every architecture's validation optimum arrives
# well inside 500 epochs, so everything shares that budget. exp2's
# metric is the ratio of noisy-run to noise-free-run error, so every
# model must stop at a comparable optimization floor rather than fit
# the noise-free baseline to machine precision; the physics models get
# a small fixed budget there for exactly that reason. exp1 probes the
# models' best case at each sample size, and on a few hundred clean
# rows the networks keep improving for thousands of epochs while the
# default network rate leaves them far from converged, so exp1 raises
# the rate and the budget with a patience long enough to ride out the
# sparse-improvement stretches of a small validation split.
_PHYS_KINDS = (ModelKind.MECH_PLAIN, ModelKind.MECH_ORACLE)
_EXPERIMENT_TRAIN = {
    "exp1": (TrainConfig(max_epochs=5000, patience=600,
                         learning_rate_net=1e-2), ()),
    "exp2": (TrainConfig(max_epochs=120, patience=20),
             tuple((k, TrainConfig(max_epochs=3, patience=None))
                   for k in _PHYS_KINDS)),
    "exp3": (TrainConfig(max_epochs=5000, patience=100),
             tuple((k, TrainConfig(max_epochs=500, patience=100))
                   for k in _PHYS_KINDS)),
    "exp4": (TrainConfig(max_epochs=500, patience=100), ()),
}


def default_config(experiment: str, **overrides) -> ExperimentConfig:
    """Tuned per-experiment defaults; keyword overrides pass through."""
    if experiment not in EXPERIMENT_NUMBERS:
        raise ValueError(f"unknown experiment {experiment!r}, "
                         f"expected one of {sorted(EXPERIMENT_NUMBERS)}")
    train, train_overrides = _EXPERIMENT_TRAIN[experiment]
    overrides.setdefault("train", train)
    overrides.setdefault("train_overrides", train_overrides)
    return ExperimentConfig(**overrides)


@dataclass(frozen=True, eq=False)
class TrialResult:
    """One model fitted once in one grid cell."""

    experiment: str
    model: str
    control: int | float | str
    trial: int
    mae_val: float
    mae_test: float
    diverged: bool = False
    rel_error: float | None = None
    abs_errors: np.ndarray | None = None


@dataclass(frozen=True)
class QuantileSummary:
    """Trial quantiles of one metric in one (model, control) cell."""

    experiment: str
    model: str
    control: int | float | str
    metric: str
    p25: float
    p50: float
    p75: float
    n_used: int
    n_diverged: int
    flagged: bool

    def __post_init__(self):
        if self.n_used and not (self.p25 <= self.p50 <= self.p75):
            raise ValueError("quantiles must be ordered p25 <= p50 <= p75")


@dataclass(frozen=True, eq=False)
class SeriesSummary:
    """Per-step absolute-error quantiles over trials for one model."""

    model: str
    t: np.ndarray
    splits: np.ndarray
    p25: np.ndarray
    p50: np.ndarray
    p75: np.ndarray


@dataclass(frozen=True)
class DriftTable:
    """Median validation/test MAE per model for exp3/exp4."""

    models: tuple[str, ...]
    mae_val: tuple[float, ...]
    mae_test: tuple[float, ...]


@dataclass(frozen=True, eq=False)
class ExperimentResult:
    experiment: str
    config: ExperimentConfig
    trials: tuple[TrialResult, ...]
    summaries: tuple[QuantileSummary, ...]
    series: tuple[SeriesSummary, ...] = ()
    table: DriftTable | None = None


def mae(predictions, targets) -> float:
    """Mean absolute deviation between two equal-length vectors."""
    p = np.asarray(predictions, dtype=float)
    t = np.asarray(targets, dtype=float)
    if p.ndim != 1 or t.ndim != 1:
        raise ValueError("predictions and targets must be one-dimensional")
    if len(p) != len(t):
        raise ValueError(f"length mismatch: {len(p)} predictions, {len(t)} targets")
    if len(p) == 0:
        raise ValueError("mae needs at least one pair")
    return float(np.mean(np.abs(p - t)))


def quantiles(values) -> tuple[float, float, float]:
    """(p25, p50, p75) with linear interpolation between order stats."""
    v = np.asarray(values, dtype=float)
    if v.ndim != 1 or len(v) == 0:
        raise ValueError("quantiles need a nonempty one-dimensional input")
    q = np.quantile(v, (0.25, 0.5, 0.75))
    return float(q[0]), float(q[1]), float(q[2])


def config_digest(config: ExperimentConfig) -> str:
    """Short stable hash of everything that determines the results."""
    payload = {
        "trials": config.trials,
        "master_seed": config.master_seed,
        "models": [k.value for k in config.models],
        "net_layers": list(config.net_spec.layer_sizes),
        "data_seed": config.data_seed,
        "d1_n": config.d1_n,
        "drift_n": config.drift_n,
        "n_grid": list(config.n_grid),
        "noise_grid": list(config.noise_grid),
        "train": dataclasses.asdict(config.train),
        "train_overrides": {k.value: dataclasses.asdict(c)
                            for k, c in config.train_overrides},
    }
    text = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode()).hexdigest()[:12]


def _cell_rng(config: ExperimentConfig, experiment: str, level: int,
              trial: int, role: int) -> np.random.Generator:
    number = EXPERIMENT_NUMBERS[experiment]
    return stream_rng(config.master_seed, STREAM_EXPERIMENTS, number,
                      level, trial, role)


def _cell_seed(config, experiment, level, trial, role) -> int:
    return int(_cell_rng(config, experiment, level, trial, role)
               .integers(2 ** 31))


@dataclass(frozen=True, eq=False)
class _CellTask:
    """Everything one worker needs to fit all models in one grid cell."""

    experiment: str
    config: ExperimentConfig
    control: int | float | str
    trial: int
    dataset: Dataset
    init_seed: int
    shuffle_seed: int
    x_val: np.ndarray
    y_val: np.ndarray
    x_test: np.ndarray
    y_test: np.ndarray
    force_patience_none: bool = False
    sigma_assumed: float | None = None
    keep_series: bool = False
    series_x: np.ndarray | None = None
    series_y: np.ndarray | None = None


def _execute_cell(task: _CellTask) -> list[TrialResult]:
    out = []
    for kind in task.config.models:
        spec = task.config.net_spec if kind in NET_KINDS else None
        model = build(kind, net_spec=spec, seed=task.init_seed)
        cfg = task.config.train_config_for(kind)
        cfg = dataclasses.replace(cfg, seed=task.shuffle_seed)
        if task.force_patience_none:
            cfg = dataclasses.replace(cfg, patience=None)
        if task.sigma_assumed is not None:
            cfg = dataclasses.replace(cfg, sigma_eps_assumed=task.sigma_assumed)
        try:
            fitted, _ = train(model, task.dataset, cfg)
        except TrainingDiverged:
            out.append(TrialResult(task.experiment, kind.value, task.control,
                                   task.trial, float("nan"), float("nan"),
                                   diverged=True))
            continue
        mae_val = (mae(fitted.predict(task.x_val), task.y_val)
                   if len(task.x_val) else float("nan"))
        mae_test = mae(fitted.predict(task.x_test), task.y_test)
        abs_errors = None
        if task.keep_series:
            abs_errors = np.abs(task.series_y - fitted.predict(task.series_x))
        out.append(TrialResult(task.experiment, kind.value, task.control,
                               task.trial, mae_val, mae_test,
                               abs_errors=abs_errors))
    return out


def _run_tasks(tasks: list[_CellTask], jobs: int) -> list[TrialResult]:
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            grouped = list(pool.map(_execute_cell, tasks))
    else:
        grouped = [_execute_cell(t) for t in tasks]
    return [r for group in grouped for r in group]


def summarize_cells(experiment: str, results, model_names, controls,
                    trials: int, metrics=("mae_val", "mae_test"),
                    ) -> tuple[QuantileSummary, ...]:
    """Cell-wise trial quantiles, excluding (but counting) divergences."""
    by_cell: dict[tuple[str, object], list[TrialResult]] = {}
    for r in results:
        by_cell.setdefault((r.model, r.control), []).append(r)
    rows = []
    for control in controls:
        for name in model_names:
            cell = by_cell.get((name, control), [])
            for metric in metrics:
                values = [getattr(r, metric) for r in cell
                          if not r.diverged and getattr(r, metric) is not None
                          and np.isfinite(getattr(r, metric))]
                n_div = sum(r.diverged for r in cell)
                flagged = len(values) < MIN_SURVIVING_FRACTION * trials
                if values:
                    p25, p50, p75 = quantiles(values)
                else:
                    p25 = p50 = p75 = float("nan")
                rows.append(QuantileSummary(experiment, name, control,
                                            metric, p25, p50, p75,
                                            len(values), n_div, flagged))
    return tuple(rows)


def _summarize(experiment: str, config: ExperimentConfig,
               results: list[TrialResult], controls, metrics=("mae_val",
                                                              "mae_test"),
               ) -> tuple[QuantileSummary, ...]:
    return summarize_cells(experiment, results,
                           [k.value for k in config.models], controls,
                           config.trials, metrics)


def run_exp1(config: ExperimentConfig) -> ExperimentResult:
    """Test error versus training-set size on the stationary dataset.

    Each trial draws its own N rows (without replacement) from the
    8000 non-test rows, splits off 20% of the draw as validation, and
    scores on the fixed noise-free 2000-row test split. With fewer than
    five drawn rows the validation part rounds to empty and the run
    falls back to the full epoch budget.
    """
    base = sample_d1(config.d1_n, 0.0, config.data_seed)
    pool = np.sort(np.concatenate([base.train_idx, base.val_idx]))
    if max(config.n_grid) > len(pool):
        raise ValueError(f"n_grid entries cannot exceed the {len(pool)}-row "
                         "training pool")
    x_test = base.x[base.test_idx]
    y_test = base.q_true[base.test_idx]
    tasks = []
    for level, n_sub in enumerate(config.n_grid):
        for trial in range(config.trials):
            draw = _cell_rng(config, "exp1", level, trial, ROLE_DRAW)
            chosen = draw.choice(pool, size=n_sub, replace=False)
            n_val = round(0.2 * n_sub)
            val_rows = np.sort(chosen[:n_val])
            train_rows = np.sort(chosen[n_val:])
            rest = np.setdiff1d(np.arange(len(base)), chosen)
            ds = dataclasses.replace(base, train_idx=train_rows,
                                     val_idx=val_rows, test_idx=rest)
            tasks.append(_CellTask(
                "exp1", config, n_sub, trial, ds,
                init_seed=_cell_seed(config, "exp1", level, trial, ROLE_INIT),
                shuffle_seed=_cell_seed(config, "exp1", level, trial,
                                        ROLE_SHUFFLE),
                x_val=base.x[val_rows], y_val=base.q_true[val_rows],
                x_test=x_test, y_test=y_test,
                force_patience_none=(n_val == 0)))
    results = _run_tasks(tasks, config.jobs)
    summaries = _summarize("exp1", config, results, config.n_grid)
    return ExperimentResult("exp1", config, tuple(results), summaries)


def run_exp2(config: ExperimentConfig) -> ExperimentResult:
    """Relative test error versus output noise on the stationary data.

    Noise enters the training and validation targets only; test MAE is
    always against noise-free truth. Within a trial every noise level
    reuses one standard-normal draw scaled by sigma (common random
    numbers), and level 0 is that trial's baseline. The reported
    rel_error divides a level's test MAE by the same trial's baseline
    MAE; the baseline row carries rel_error 1 by construction.

    The training objective's assumed noise scale follows each level's
    true sigma (the noise-free baseline keeps the configured value), so
    the likelihood term is weighted the way the generating process says
    it should be.
    """
    base = sample_d1(config.d1_n, 0.0, config.data_seed)
    x_val = base.x[base.val_idx]
    y_val = base.q_true[base.val_idx]
    x_test = base.x[base.test_idx]
    y_test = base.q_true[base.test_idx]
    levels = (0.0,) + tuple(config.noise_grid)
    tasks = []
    for trial in range(config.trials):
        # Per-trial draws shared across levels: the noise shape, the
        # network init and the shuffle order stay fixed while only the
        # noise amplitude moves.
        z = _cell_rng(config, "exp2", 0, trial, ROLE_DRAW).standard_normal(
            len(base))
        init_seed = _cell_seed(config, "exp2", 0, trial, ROLE_INIT)
        shuffle_seed = _cell_seed(config, "exp2", 0, trial, ROLE_SHUFFLE)
        for sigma in levels:
            y = base.q_true + sigma * z
            ds = dataclasses.replace(
                base, y=y,
                provenance=dataclasses.replace(base.provenance,
                                               sigma_eps=sigma))
            tasks.append(_CellTask("exp2", config, sigma, trial, ds,
                                   init_seed=init_seed,
                                   shuffle_seed=shuffle_seed,
                                   x_val=x_val, y_val=y_val,
                                   x_test=x_test, y_test=y_test,
                                   sigma_assumed=sigma if sigma > 0 else None))
    raw = _run_tasks(tasks, config.jobs)

    baselines = {(r.model, r.trial): r for r in raw if r.control == 0.0}
    results = []
    for r in raw:
        rel = None
        ref = baselines.get((r.model, r.trial))
        if not r.diverged and ref is not None and not ref.diverged:
            rel = r.mae_test / ref.mae_test
        results.append(dataclasses.replace(r, rel_error=rel))

    summaries = list(_summarize("exp2", config, results, levels))
    summaries.extend(_summarize("exp2", config,
                                [r for r in results if r.control != 0.0],
                                config.noise_grid, metrics=("rel_error",)))
    return ExperimentResult("exp2", config, tuple(results), tuple(summaries))


def _run_drift(experiment: str, dataset: Dataset,
               config: ExperimentConfig) -> ExperimentResult:
    """Shared exp3/exp4 body: temporal split, per-step error series."""
    x_val = dataset.x[dataset.val_idx]
    y_val = dataset.q_true[dataset.val_idx]
    x_test = dataset.x[dataset.test_idx]
    y_test = dataset.q_true[dataset.test_idx]
    tasks = []
    for trial in range(config.trials):
        tasks.append(_CellTask(
            experiment, config, dataset.provenance.generator, trial, dataset,
            init_seed=_cell_seed(config, experiment, 0, trial, ROLE_INIT),
            shuffle_seed=_cell_seed(config, experiment, 0, trial,
                                    ROLE_SHUFFLE),
            x_val=x_val, y_val=y_val, x_test=x_test, y_test=y_test,
            keep_series=True, series_x=dataset.x, series_y=dataset.q_true))
    results = _run_tasks(tasks, config.jobs)
    control = dataset.provenance.generator
    summaries = _summarize(experiment, config, results, (control,))

    splits = dataset.split_labels()
    series = []
    med_val, med_test = [], []
    for kind in config.models:
        rows = [r for r in results if r.model == kind.value and not r.diverged]
        if rows:
            stack = np.vstack([r.abs_errors for r in rows])
            p25, p50, p75 = np.quantile(stack, (0.25, 0.5, 0.75), axis=0)
        else:
            p25 = p50 = p75 = np.full(len(dataset), np.nan)
        series.append(SeriesSummary(kind.value, dataset.t, splits,
                                    p25, p50, p75))
        med_val.append(float(np.median([r.mae_val for r in rows]))
                       if rows else float("nan"))
        med_test.append(float(np.median([r.mae_test for r in rows]))
                        if rows else float("nan"))
    table = DriftTable(tuple(k.value for k in config.models),
                       tuple(med_val), tuple(med_test))
    return ExperimentResult(experiment, config, tuple(results), summaries,
                            tuple(series), table)


def run_exp3(config: ExperimentConfig) -> ExperimentResult:
    """Future prediction across reservoir depletion (dataset d2)."""
    return _run_drift("exp3", generate_d2(config.drift_n, config.data_seed),
                      config)


def run_exp4(config: ExperimentConfig) -> ExperimentResult:
    """Future prediction across a rising gas-to-oil ratio (dataset d3)."""
    return _run_drift("exp4", generate_d3(config.drift_n, config.data_seed),
                      config)


RUNNERS = {"exp1": run_exp1, "exp2": run_exp2, "exp3": run_exp3,
           "exp4": run_exp4}


def run_experiment(experiment: str, config: ExperimentConfig
                   ) -> ExperimentResult:
    try:
        runner = RUNNERS[experiment]
    except KeyError:
        raise ValueError(f"unknown experiment {experiment!r}, "
                         f"expected one of {sorted(RUNNERS)}")
    return runner(config)


def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, str):
        return value
    return repr(float(value))


def _header(result: ExperimentResult) -> str:
    return (f"# vfmlab={TOOL_VERSION} experiment={result.experiment} "
            f"master_seed={result.config.master_seed} "
            f"config={config_digest(result.config)}\n")


def write_tidy(result: ExperimentResult, path) -> None:
    """One row per (model, control, trial, metric); divergences kept."""
    with open(path, "w") as fh:
        fh.write(_header(result))
        fh.write("experiment,model,control,trial,metric,value\n")
        for r in result.trials:
            stem = f"{r.experiment},{r.model},{_fmt(r.control)},{r.trial},"
            fh.write(stem + f"mae_val,{_fmt(r.mae_val)}\n")
            fh.write(stem + f"mae_test,{_fmt(r.mae_test)}\n")
            if r.rel_error is not None:
                fh.write(stem + f"rel_error,{_fmt(r.rel_error)}\n")
            fh.write(stem + f"diverged,{_fmt(r.diverged)}\n")


def write_quantile_rows(fh, summaries) -> None:
    fh.write("experiment,model,control,metric,p25,p50,p75,"
             "n_used,n_diverged,flagged\n")
    for s in summaries:
        fh.write(f"{s.experiment},{s.model},{_fmt(s.control)},{s.metric},"
                 f"{_fmt(s.p25)},{_fmt(s.p50)},{_fmt(s.p75)},"
                 f"{s.n_used},{s.n_diverged},{_fmt(s.flagged)}\n")


def write_quantiles(result: ExperimentResult, path) -> None:
    """Plot-ready p25/p50/p75 per (model, control, metric) cell."""
    with open(path, "w") as fh:
        fh.write(_header(result))
        write_quantile_rows(fh, result.summaries)


def write_series(result: ExperimentResult, path) -> None:
    """Per-step absolute-error quantile bands with split labels."""
    with open(path, "w") as fh:
        fh.write(_header(result))
        fh.write("t,model,split,abs_err_p25,abs_err_p50,abs_err_p75\n")
        for s in result.series:
            for i in range(len(s.t)):
                fh.write(f"{int(s.t[i])},{s.model},{s.splits[i]},"
                         f"{_fmt(s.p25[i])},{_fmt(s.p50[i])},"
                         f"{_fmt(s.p75[i])}\n")


def write_table_rows(fh, table: DriftTable) -> None:
    fh.write("metric," + ",".join(table.models) + "\n")
    fh.write("mae_val," + ",".join(_fmt(v) for v in table.mae_val) + "\n")
    fh.write("mae_test," + ",".join(_fmt(v) for v in table.mae_test) + "\n")


def write_table(result: ExperimentResult, path) -> None:
    """Median validation/test MAE as a models-by-metrics table."""
    with open(path, "w") as fh:
        fh.write(_header(result))
        write_table_rows(fh, result.table)


def save_results(result: ExperimentResult, outdir) -> dict[str, str]:
    """Write every applicable file into outdir; returns name -> path."""
    os.makedirs(outdir, exist_ok=True)
    paths = {}
    tidy = os.path.join(outdir, f"{result.experiment}_tidy.csv")
    write_tidy(result, tidy)
    paths["tidy"] = tidy
    quant = os.path.join(outdir, f"{result.experiment}_quantiles.csv")
    write_quantiles(result, quant)
    paths["quantiles"] = quant
    if result.series:
        series = os.path.join(outdir, f"{result.experiment}_series.csv")
        write_series(result, series)
        paths["series"] = series
    if result.table is not None:
        table = os.path.join(outdir, f"{result.experiment}_table.csv")
        write_table(result, table)
        paths["table"] = table
    return paths
