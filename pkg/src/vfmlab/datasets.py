"""Benchmark dataset generators and persistence.

Three synthetic datasets drive the experiments: a stationary sample
covering wide operating ranges (d1), a depleting-reservoir schedule with
stepped choke openings (d2), and a rising gas-to-oil-ratio schedule with
the choke fully open (d3). All three are bit-reproducible from
(generator id, n, sigma_eps, seed) and persist to a delimited text
format that round-trips floats exactly.
"""

from __future__ import annotations

import csv
import dataclasses
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .choke import FluidSpec
from .process import NoiseSpec, ProcessSpec, add_noise, evaluate_process
from .seeding import stream_rng

SPLIT_NAMES = ("train", "val", "test")
CSV_COLUMNS = ("t", "p1_bar", "p2_bar", "T1_C", "u_pct", "eta_oil",
               "eta_gas", "eta_water", "q_true", "y", "split")

# RNG stream coordinates under a dataset seed; the leading 1 namespaces
# this module against other consumers of the same seed.
STREAM_D1_INPUTS = (1, 0)
STREAM_D1_NOISE = (1, 1)
STREAM_SPLIT = (1, 2)
STREAM_CALIBRATION = (1, 3)

CALIBRATION_SEED = 0
CALIBRATION_SIZE = 1_000_000


@dataclass(frozen=True)
class Observation:
    """One row of a dataset, in external units."""

    t: int
    p1_bar: float
    p2_bar: float
    t1_c: float
    u_pct: float
    eta_oil: float
    eta_water: float
    eta_gas: float
    q_true: float
    y: float


@dataclass(frozen=True)
class Provenance:
    """Where a dataset came from; enough to regenerate it exactly."""

    generator: str
    n: int
    sigma_eps: float
    seed: int
    redraws: int = 0


@dataclass(frozen=True, eq=False)
class Dataset:
    """Ordered observations plus disjoint train/val/test index sets.

    Inputs sit in ``x`` with columns (p1_bar, p2_bar, t1_c, u_pct,
    eta_oil, eta_water); the gas fraction is the simplex remainder. A
    dataset with all three index sets empty is unsplit; once any set is
    populated the three must partition the rows.
    """

    t: np.ndarray
    x: np.ndarray
    q_true: np.ndarray
    y: np.ndarray
    train_idx: np.ndarray
    val_idx: np.ndarray
    test_idx: np.ndarray
    provenance: Provenance

    def __post_init__(self):
        n = len(self.t)
        if self.x.shape != (n, 6):
            raise ValueError(f"x must have shape ({n}, 6), got {self.x.shape}")
        for name in ("q_true", "y"):
            if getattr(self, name).shape != (n,):
                raise ValueError(f"{name} must have shape ({n},)")
        if np.any(self.t < 0):
            raise ValueError("time indices must be nonnegative")
        if np.any(self.q_true < 0):
            raise ValueError("q_true must be nonnegative")
        frac_sum = self.x[:, 4] + self.x[:, 5]
        if np.any(self.x[:, 4:6] < -1e-12) or np.any(frac_sum > 1.0 + 1e-12):
            raise ValueError("fractions exceed one or fall below zero")
        splits = [np.asarray(s, dtype=int) for s in
                  (self.train_idx, self.val_idx, self.test_idx)]
        total = sum(len(s) for s in splits)
        if total:
            merged = np.concatenate(splits)
            if len(np.unique(merged)) != total:
                raise ValueError("split index sets overlap")
            if total != n or merged.min() < 0 or merged.max() >= n:
                raise ValueError("splits must partition the dataset rows")
        for arr in (self.t, self.x, self.q_true, self.y, *splits):
            arr.setflags(write=False)

    def __len__(self) -> int:
        return len(self.t)

    @property
    def eta_gas(self) -> np.ndarray:
        return 1.0 - self.x[:, 4] - self.x[:, 5]

    def row(self, i: int) -> Observation:
        return Observation(
            t=int(self.t[i]), p1_bar=float(self.x[i, 0]),
            p2_bar=float(self.x[i, 1]), t1_c=float(self.x[i, 2]),
            u_pct=float(self.x[i, 3]), eta_oil=float(self.x[i, 4]),
            eta_water=float(self.x[i, 5]), eta_gas=float(self.eta_gas[i]),
            q_true=float(self.q_true[i]), y=float(self.y[i]))

    def split_indices(self, name: str) -> np.ndarray:
        try:
            return {"train": self.train_idx, "val": self.val_idx,
                    "test": self.test_idx}[name]
        except KeyError:
            raise ValueError(f"unknown split {name!r}, expected one of {SPLIT_NAMES}")

    def split_xy(self, name: str) -> tuple[np.ndarray, np.ndarray]:
        idx = self.split_indices(name)
        return self.x[idx], self.y[idx]

    def split_labels(self) -> np.ndarray:
        labels = np.full(len(self), "", dtype=object)
        for name in SPLIT_NAMES:
            labels[self.split_indices(name)] = name
        return labels


def _resample_nonpositive(values: np.ndarray, draw) -> tuple[np.ndarray, int]:
    """Redraw entries <= 0 via draw(count) until all are positive."""
    values = np.array(values, dtype=float)
    redraws = 0
    bad = values <= 0.0
    while np.any(bad):
        count = int(np.count_nonzero(bad))
        values[bad] = draw(count)
        redraws += count
        bad = values <= 0.0
    return values, redraws


def stationary_inputs(rng: np.random.Generator, n: int) -> tuple[np.ndarray, int]:
    """Draw n rows from the stationary operating-envelope distribution.

    Marginals: p1 ~ U(30, 70) bar, p2 ~ N(22, 0.5) bar, T1 ~ N(50, 2)
    °C, u ~ U(0, 100) %, eta_oil ~ U(0, 0.8), eta_water ~ U(0, 0.2).
    Nonpositive p2 or T1 draws (vanishingly rare) are redrawn; the
    second return value counts those redraws.
    """
    p1 = rng.uniform(30.0, 70.0, n)
    p2 = rng.normal(22.0, 0.5, n)
    t1 = rng.normal(50.0, 2.0, n)
    u = rng.uniform(0.0, 100.0, n)
    eta_oil = rng.uniform(0.0, 0.8, n)
    eta_water = rng.uniform(0.0, 0.2, n)
    p2, redraws_p2 = _resample_nonpositive(p2, lambda c: rng.normal(22.0, 0.5, c))
    t1, redraws_t1 = _resample_nonpositive(t1, lambda c: rng.normal(50.0, 2.0, c))
    x = np.column_stack([p1, p2, t1, u, eta_oil, eta_water])
    return x, redraws_p2 + redraws_t1


def calibration_reference_inputs(n: int = CALIBRATION_SIZE,
                                 seed: int = CALIBRATION_SEED) -> np.ndarray:
    """The stationary sample the packaged flow scale was calibrated on."""
    x, _ = stationary_inputs(stream_rng(seed, *STREAM_CALIBRATION), n)
    return x


def sample_d1(n: int = 10_000, sigma_eps: float = 0.0, seed: int = 0,
              spec: ProcessSpec | None = None) -> Dataset:
    """Stationary i.i.d. sample over the full operating envelope.

    Inputs follow the stationary_inputs marginals. Split: 2000 random
    test rows, then 20% of the remainder as validation. The same seed
    yields the same inputs at every noise level, so noise levels share
    their underlying standard draws.
    """
    if n < 1:
        raise ValueError(f"n must be at least 1, got {n}")
    spec = spec if spec is not None else ProcessSpec()
    x, redraws = stationary_inputs(stream_rng(seed, *STREAM_D1_INPUTS), n)
    q_true = evaluate_process(spec, x)
    y = add_noise(q_true, NoiseSpec(sigma_eps=sigma_eps, seed=seed),
                  stream_rng(seed, *STREAM_D1_NOISE))
    ds = Dataset(t=np.arange(n), x=x, q_true=q_true, y=y,
                 train_idx=np.array([], dtype=int),
                 val_idx=np.array([], dtype=int),
                 test_idx=np.array([], dtype=int),
                 provenance=Provenance("d1", n, sigma_eps, seed, redraws))
    if n > 2000:
        ds = split_random(ds, n_test=2000, val_frac=0.2, seed=seed)
    return ds


def _depletion_pressure(n: int) -> np.ndarray:
    """Inlet pressure profile 30 + 40·exp(-3t/n) bar, 70 down to ~32."""
    t = np.arange(n)
    return 30.0 + 40.0 * np.exp(-3.0 * t / n)


def generate_d2(n: int = 5000, seed: int = 0,
                spec: ProcessSpec | None = None) -> Dataset:
    """Depleting reservoir: decaying p1, choke stepped open, noise-free.

    u starts at 20% and rises by 2.5 percentage points every
    floor(n/33) samples, capped at 100%. p2 = 22 bar, T1 = 50 °C,
    eta_oil = 0.85, eta_water = 0.02 throughout. Temporal split: last
    2000 rows test, preceding 600 validation. Deterministic; the seed
    only tags provenance.
    """
    if n < 1:
        raise ValueError(f"n must be at least 1, got {n}")
    spec = spec if spec is not None else ProcessSpec()
    t = np.arange(n)
    p1 = _depletion_pressure(n)
    step = max(1, n // 33)
    u = np.minimum(20.0 + 2.5 * (t // step), 100.0)
    x = np.column_stack([p1, np.full(n, 22.0), np.full(n, 50.0), u,
                         np.full(n, 0.85), np.full(n, 0.02)])
    q_true = evaluate_process(spec, x)
    ds = Dataset(t=t, x=x, q_true=q_true, y=q_true.copy(),
                 train_idx=np.array([], dtype=int),
                 val_idx=np.array([], dtype=int),
                 test_idx=np.array([], dtype=int),
                 provenance=Provenance("d2", n, 0.0, seed))
    if n > 2600:
        ds = split_temporal(ds, n_test=2000, n_val=600)
    return ds


def generate_d3(n: int = 5000, seed: int = 0,
                spec: ProcessSpec | None = None) -> Dataset:
    """Rising gas-to-oil ratio at full choke opening, noise-free.

    GOR climbs linearly from 200 at t=0 to 1000 at t=n-1; fractions
    follow via gor_to_fractions with eta_water = 0.02. p1 repeats the
    depletion profile; u = 100 throughout. Split as in generate_d2.
    """
    if n < 1:
        raise ValueError(f"n must be at least 1, got {n}")
    spec = spec if spec is not None else ProcessSpec()
    t = np.arange(n)
    p1 = _depletion_pressure(n)
    gor = np.linspace(200.0, 1000.0, n)
    eta_oil, eta_gas = gor_to_fractions(gor, 0.02, spec.fluid)
    x = np.column_stack([p1, np.full(n, 22.0), np.full(n, 50.0),
                         np.full(n, 100.0), eta_oil, np.full(n, 0.02)])
    q_true = evaluate_process(spec, x)
    ds = Dataset(t=t, x=x, q_true=q_true, y=q_true.copy(),
                 train_idx=np.array([], dtype=int),
                 val_idx=np.array([], dtype=int),
                 test_idx=np.array([], dtype=int),
                 provenance=Provenance("d3", n, 0.0, seed))
    if n > 2600:
        ds = split_temporal(ds, n_test=2000, n_val=600)
    return ds


def gor_to_fractions(gor, eta_water, fluid: FluidSpec):
    """Mass fractions implied by a standard-volume gas-to-oil ratio.

    With r = gor·rho_gas_sc/rho_oil_sc (the gas/oil mass ratio):
    eta_oil = (1 - eta_water)/(1 + r) and eta_gas = (1 - eta_water)·
    r/(1 + r), so the simplex holds by construction.
    """
    gor = np.asarray(gor, dtype=float)
    eta_water = np.asarray(eta_water, dtype=float)
    if np.any(gor < 0):
        raise ValueError("gor must be nonnegative")
    if np.any(eta_water < 0) or np.any(eta_water >= 1):
        raise ValueError("eta_water must lie in [0, 1)")
    r = gor * fluid.rho_gas_sc / fluid.rho_oil_sc
    eta_oil = (1.0 - eta_water) / (1.0 + r)
    eta_gas = (1.0 - eta_water) * r / (1.0 + r)
    return eta_oil, eta_gas


def split_random(ds: Dataset, n_test: int, val_frac: float, seed: int) -> Dataset:
    """Attach a uniformly random test/validation/train partition."""
    n = len(ds)
    if not 0 <= n_test < n:
        raise ValueError(f"n_test must lie in [0, {n}), got {n_test}")
    if not 0.0 <= val_frac < 1.0:
        raise ValueError(f"val_frac must lie in [0, 1), got {val_frac}")
    perm = stream_rng(seed, *STREAM_SPLIT).permutation(n)
    test = np.sort(perm[:n_test])
    rest = perm[n_test:]
    n_val = round(val_frac * len(rest))
    val = np.sort(rest[:n_val])
    train = np.sort(rest[n_val:])
    return dataclasses.replace(ds, train_idx=train, val_idx=val, test_idx=test)


def split_temporal(ds: Dataset, n_test: int, n_val: int) -> Dataset:
    """Attach a time-ordered partition: train, then val, then test."""
    n = len(ds)
    if n_test < 0 or n_val < 0 or n_test + n_val >= n:
        raise ValueError(
            f"need n_test + n_val < {n}, got n_test={n_test}, n_val={n_val}")
    order = np.argsort(ds.t, kind="stable")
    test = np.sort(order[n - n_test:])
    val = np.sort(order[n - n_test - n_val:n - n_test])
    train = np.sort(order[:n - n_test - n_val])
    return dataclasses.replace(ds, train_idx=train, val_idx=val, test_idx=test)


def dataset_filename(ds: Dataset) -> str:
    """Provenance-encoding file name, e.g. d1_n10000_sigma2_seed0.csv."""
    p = ds.provenance
    return f"{p.generator}_n{p.n}_sigma{p.sigma_eps:g}_seed{p.seed}.csv"


def save_dataset(ds: Dataset, path) -> None:
    """Write one observation per row; floats as repr for exact reload."""
    labels = ds.split_labels()
    p = ds.provenance
    with open(path, "w", newline="") as fh:
        fh.write(f"# generator={p.generator} n={p.n} sigma_eps={p.sigma_eps!r} "
                 f"seed={p.seed} redraws={p.redraws}\n")
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        eta_gas = ds.eta_gas
        for i in range(len(ds)):
            writer.writerow([
                int(ds.t[i]),
                *(repr(float(v)) for v in ds.x[i, :5]),
                repr(float(eta_gas[i])), repr(float(ds.x[i, 5])),
                repr(float(ds.q_true[i])), repr(float(ds.y[i])),
                labels[i]])


def load_dataset(path) -> Dataset:
    """Reload a saved dataset; arrays round-trip bit-exactly."""
    with open(path, newline="") as fh:
        meta_line = fh.readline().strip()
        if not meta_line.startswith("# "):
            raise ValueError(f"{path}: missing provenance line")
        meta = dict(tok.split("=", 1) for tok in meta_line[2:].split())
        reader = csv.reader(fh)
        header = tuple(next(reader))
        if header != CSV_COLUMNS:
            raise ValueError(f"{path}: unexpected columns {header}")
        rows = list(reader)
    n = len(rows)
    t = np.empty(n, dtype=int)
    x = np.empty((n, 6))
    q_true = np.empty(n)
    y = np.empty(n)
    labels = []
    for i, row in enumerate(rows):
        if len(row) != len(CSV_COLUMNS):
            raise ValueError(f"{path}: row {i} has {len(row)} fields, "
                             f"expected {len(CSV_COLUMNS)}")
        t[i] = int(row[0])
        x[i, :5] = [float(v) for v in row[1:6]]
        x[i, 5] = float(row[7])
        q_true[i] = float(row[8])
        y[i] = float(row[9])
        labels.append(row[10])
    labels = np.asarray(labels, dtype=object)
    splits = {name: np.flatnonzero(labels == name) for name in SPLIT_NAMES}
    provenance = Provenance(
        generator=meta["generator"], n=int(meta["n"]),
        sigma_eps=float(meta["sigma_eps"]), seed=int(meta["seed"]),
        redraws=int(meta["redraws"]))
    if provenance.n != n:
        raise ValueError(f"{path}: provenance says {provenance.n} rows, found {n}")
    return Dataset(t=t, x=x, q_true=q_true, y=y,
                   train_idx=splits["train"], val_idx=splits["val"],
                   test_idx=splits["test"], provenance=provenance)
