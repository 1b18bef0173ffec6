"""The five virtual-flow-metering model architectures.

One differentiable-model contract covers all five kinds: a flat
parameter vector with Gaussian priors and optional box bounds, a
prediction in flow reporting units, and the analytic gradient of the
prediction with respect to the parameters.

  mech_plain    physics only: no-slip flux through a linear valve area,
                trainable discharge coefficient and maximum area. Its
                structure deliberately mismatches the process (which has
                slip and an equal-percentage area).
  mech_oracle   physics with the process's own structure (slip,
                equal-percentage area), trainable c_d, a_max and
                rangeability with priors centered away from the truth.
  data_driven   feed-forward network on all six standardized inputs,
                output de-standardized by the target statistics.
  hybrid_error  mech_plain plus a network correction on the output.
  hybrid_area   mech_plain with its area multiplied by a
                softplus-positive network factor.

Physics parameters multiply the flow through the area term only, so
their gradients are exact closed-form factors; network gradients come
from reverse-mode accumulation. Both hybrids initialize to the plain
physics model exactly (zeroed or identity-mapped network head).
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass
from enum import Enum

import numpy as np

from . import nnet
from .choke import FluidSpec, mass_flux, standard_volume_factor
from .nnet import NetParams, NetSpec
from .process import (
    BAR_TO_PA,
    CELSIUS_TO_KELVIN,
    DEFAULT_FLOW_SCALE,
    validate_inputs,
)

CHECKPOINT_FORMAT = "vfm-model"
CHECKPOINT_VERSION = 1

# The area hybrid's multiplier is softplus(UNIT_BIAS + GAIN · net(z)).
# The fixed bias makes the multiplier exactly one when the network head
# is zero, so the hybrid starts at the plain physics model; the gain
# deliberately damps the head so a unit of network output moves the
# area by a fraction of what the same output moves the error hybrid's
# prediction. That keeps the area hybrid the lower-capacity correction
# by construction.
SOFTPLUS_UNIT_BIAS = float(np.log(np.e - 1.0))
AREA_HEAD_GAIN = 0.2


class ModelKind(Enum):
    MECH_PLAIN = "mech_plain"
    MECH_ORACLE = "mech_oracle"
    DATA_DRIVEN = "data_driven"
    HYBRID_ERROR = "hybrid_error"
    HYBRID_AREA = "hybrid_area"


NET_KINDS = frozenset({ModelKind.DATA_DRIVEN, ModelKind.HYBRID_ERROR,
                       ModelKind.HYBRID_AREA})
PHYSICS_KINDS = frozenset({ModelKind.MECH_PLAIN, ModelKind.MECH_ORACLE,
                           ModelKind.HYBRID_ERROR, ModelKind.HYBRID_AREA})


@dataclass(frozen=True, eq=False)
class ParamVector:
    """Flat parameters with per-entry Gaussian priors and box bounds."""

    values: np.ndarray
    names: tuple[str, ...]
    prior_mean: np.ndarray
    prior_sigma: np.ndarray
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        m = len(self.values)
        for field in ("names", "prior_mean", "prior_sigma", "lower", "upper"):
            if len(getattr(self, field)) != m:
                raise ValueError(f"{field} length does not match values ({m})")
        if np.any(self.prior_sigma <= 0):
            raise ValueError("prior sigmas must be positive")
        if np.any(self.values < self.lower) or np.any(self.values > self.upper):
            raise ValueError("values violate box bounds")
        for arr in (self.values, self.prior_mean, self.prior_sigma,
                    self.lower, self.upper):
            arr.setflags(write=False)

    def __len__(self) -> int:
        return len(self.values)

    def with_values(self, values: np.ndarray) -> "ParamVector":
        return dataclasses.replace(self, values=np.array(values, dtype=float))

    def project(self, values: np.ndarray) -> np.ndarray:
        """Clip a candidate vector into the box bounds."""
        return np.clip(values, self.lower, self.upper)


@dataclass(frozen=True, eq=False)
class Normalization:
    """Input and target standardization statistics stored with a model."""

    x_mean: np.ndarray
    x_std: np.ndarray
    y_mean: float = 0.0
    y_std: float = 1.0

    def __post_init__(self):
        if self.x_mean.shape != (6,) or self.x_std.shape != (6,):
            raise ValueError("normalization statistics must cover 6 inputs")
        if np.any(self.x_std <= 0) or self.y_std <= 0:
            raise ValueError("standard deviations must be positive")
        self.x_mean.setflags(write=False)
        self.x_std.setflags(write=False)

    @staticmethod
    def identity() -> "Normalization":
        return Normalization(np.zeros(6), np.ones(6), 0.0, 1.0)

    @staticmethod
    def from_training(x: np.ndarray, y: np.ndarray) -> "Normalization":
        """Per-feature statistics; constant features get unit scale."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        x_std = np.std(x, axis=0)
        x_std = np.where(x_std < 1e-12, 1.0, x_std)
        y_std = float(np.std(y))
        if y_std < 1e-12:
            y_std = 1.0
        return Normalization(np.mean(x, axis=0), x_std, float(np.mean(y)), y_std)

    def standardize(self, x: np.ndarray) -> np.ndarray:
        return (x - self.x_mean) / self.x_std


def _softplus(s: np.ndarray) -> np.ndarray:
    return np.logaddexp(0.0, s)


def _sigmoid(s: np.ndarray) -> np.ndarray:
    out = np.empty_like(s)
    pos = s >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-s[pos]))
    es = np.exp(s[~pos])
    out[~pos] = es / (1.0 + es)
    return out


def _ep_characteristic(u_frac: np.ndarray, rangeability: float) -> np.ndarray:
    return (rangeability ** u_frac - 1.0) / (rangeability - 1.0)


def _ep_characteristic_drange(u_frac: np.ndarray, rangeability: float) -> np.ndarray:
    r = rangeability
    num = u_frac * r ** (u_frac - 1.0) * (r - 1.0) - (r ** u_frac - 1.0)
    return num / (r - 1.0) ** 2


def physics_kernel(x: np.ndarray, fluid: FluidSpec, slip: bool,
                   flow_scale: float) -> np.ndarray:
    """Area-independent part of the flow: scale · mass flux · volume factor.

    Everything the trainable physics parameters multiply against; it
    depends only on the inputs, so it can be computed once per dataset
    and reused across training steps.
    """
    p1 = x[:, 0] * BAR_TO_PA
    p2 = x[:, 1] * BAR_TO_PA
    t1 = x[:, 2] + CELSIUS_TO_KELVIN
    eta_oil = x[:, 4]
    eta_water = x[:, 5]
    eta_gas = np.clip(1.0 - eta_oil - eta_water, 0.0, 1.0)
    flux = mass_flux(p1, p2, t1, eta_oil, eta_gas, eta_water, fluid, slip)
    svf = standard_volume_factor(eta_oil, eta_gas, eta_water, fluid)
    return flow_scale * np.asarray(flux) * np.asarray(svf)


@dataclass(frozen=True, eq=False)
class Prepared:
    """Per-dataset caches: physics kernel and standardized inputs."""

    n: int
    kernel: np.ndarray | None
    u_frac: np.ndarray | None
    z: np.ndarray | None

    def take(self, idx: np.ndarray) -> "Prepared":
        return Prepared(
            n=len(idx),
            kernel=None if self.kernel is None else self.kernel[idx],
            u_frac=None if self.u_frac is None else self.u_frac[idx],
            z=None if self.z is None else self.z[idx])


@dataclass(frozen=True, eq=False)
class Model:
    """Immutable model value; training replaces the parameter vector."""

    kind: ModelKind
    fluid: FluidSpec
    flow_scale: float
    net_spec: NetSpec | None
    params: ParamVector
    norm: Normalization

    @property
    def n_phys(self) -> int:
        if self.kind is ModelKind.MECH_ORACLE:
            return 3
        if self.kind is ModelKind.DATA_DRIVEN:
            return 0
        return 2

    @property
    def phys_slice(self) -> slice:
        return slice(0, self.n_phys)

    @property
    def net_slice(self) -> slice:
        return slice(self.n_phys, len(self.params))

    def with_values(self, values: np.ndarray) -> "Model":
        return dataclasses.replace(self, params=self.params.with_values(values))

    def with_norm(self, norm: Normalization) -> "Model":
        return dataclasses.replace(self, norm=norm)

    def prepare(self, x) -> Prepared:
        """Validate inputs once and cache the parameter-free pieces."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if x.shape[1] != 6:
            raise ValueError(f"expected 6 input features, got shape {x.shape}")
        validate_inputs(x)
        kernel = u_frac = z = None
        if self.kind in PHYSICS_KINDS:
            slip = self.kind is ModelKind.MECH_ORACLE
            kernel = physics_kernel(x, self.fluid, slip, self.flow_scale)
            u_frac = x[:, 3] / 100.0
        if self.kind in NET_KINDS:
            z = self.norm.standardize(x)
        return Prepared(n=len(x), kernel=kernel, u_frac=u_frac, z=z)

    def _net_params(self, theta: np.ndarray) -> NetParams:
        return nnet.unflatten(self.net_spec, theta[self.net_slice])

    def predict_prepared(self, theta: np.ndarray, prep: Prepared
                         ) -> tuple[np.ndarray, dict]:
        """Predictions plus a cache reused by weighted_gradient."""
        kind = self.kind
        cache: dict = {}
        if kind is ModelKind.MECH_PLAIN:
            c_d, a_max = theta
            base = prep.u_frac * prep.kernel
            cache["base"] = base
            return c_d * a_max * base, cache
        if kind is ModelKind.MECH_ORACLE:
            c_d, a_max, rangeability = theta
            h = _ep_characteristic(prep.u_frac, rangeability)
            base = h * prep.kernel
            cache["base"] = base
            return c_d * a_max * base, cache
        net_out, net_cache = nnet.forward_cached(self._net_params(theta), prep.z)
        cache["net"] = net_cache
        if kind is ModelKind.DATA_DRIVEN:
            return self.norm.y_mean + self.norm.y_std * net_out, cache
        if kind is ModelKind.HYBRID_ERROR:
            c_d, a_max = theta[0], theta[1]
            base = prep.u_frac * prep.kernel
            cache["base"] = base
            return c_d * a_max * base + self.norm.y_std * net_out, cache
        # hybrid_area
        c_d, a_max = theta[0], theta[1]
        base = prep.u_frac * prep.kernel
        arg = SOFTPLUS_UNIT_BIAS + AREA_HEAD_GAIN * net_out
        sp = _softplus(arg)
        cache["base"] = base
        cache["softplus"] = sp
        cache["sigmoid"] = _sigmoid(arg)
        return c_d * a_max * base * sp, cache

    def weighted_gradient(self, theta: np.ndarray, prep: Prepared,
                          cache: dict, w: np.ndarray) -> np.ndarray:
        """sum_i w[i] * d prediction_i / d theta, as one flat vector."""
        kind = self.kind
        grad = np.zeros(len(theta))
        if kind is ModelKind.MECH_PLAIN:
            c_d, a_max = theta
            grad[0] = np.dot(w, a_max * cache["base"])
            grad[1] = np.dot(w, c_d * cache["base"])
            return grad
        if kind is ModelKind.MECH_ORACLE:
            c_d, a_max, rangeability = theta
            grad[0] = np.dot(w, a_max * cache["base"])
            grad[1] = np.dot(w, c_d * cache["base"])
            dh = _ep_characteristic_drange(prep.u_frac, rangeability)
            grad[2] = np.dot(w, c_d * a_max * dh * prep.kernel)
            return grad
        net_params = self._net_params(theta)
        if kind is ModelKind.DATA_DRIVEN:
            g_net, _ = nnet.backprop(net_params, cache["net"], w)
            grad[:] = self.norm.y_std * g_net
            return grad
        if kind is ModelKind.HYBRID_ERROR:
            c_d, a_max = theta[0], theta[1]
            grad[0] = np.dot(w, a_max * cache["base"])
            grad[1] = np.dot(w, c_d * cache["base"])
            g_net, _ = nnet.backprop(net_params, cache["net"], w)
            grad[self.net_slice] = self.norm.y_std * g_net
            return grad
        # hybrid_area
        c_d, a_max = theta[0], theta[1]
        base_sp = cache["base"] * cache["softplus"]
        grad[0] = np.dot(w, a_max * base_sp)
        grad[1] = np.dot(w, c_d * base_sp)
        head_w = (w * c_d * a_max * cache["base"] * cache["sigmoid"]
                  * AREA_HEAD_GAIN)
        g_net, _ = nnet.backprop(net_params, cache["net"], head_w)
        grad[self.net_slice] = g_net
        return grad

    def predict(self, x) -> float | np.ndarray:
        """Flow prediction for one input vector or an (n, 6) batch."""
        x_arr = np.asarray(x, dtype=float)
        prep = self.prepare(x_arr)
        out, _ = self.predict_prepared(self.params.values, prep)
        return float(out[0]) if x_arr.ndim == 1 else out

    def predict_gradient(self, x) -> np.ndarray:
        """d prediction / d theta for a single input vector."""
        x_arr = np.asarray(x, dtype=float)
        if x_arr.ndim != 1:
            raise ValueError("predict_gradient expects a single input vector")
        prep = self.prepare(x_arr)
        _, cache = self.predict_prepared(self.params.values, prep)
        return self.weighted_gradient(self.params.values, prep, cache, np.ones(1))


def _phys_block(kind: ModelKind):
    if kind is ModelKind.MECH_ORACLE:
        return (("c_d", "a_max", "rangeability"),
                np.array([0.7, 4e-4, 30.0]),
                np.array([0.2, 2e-4, 20.0]),
                np.array([0.05, 1e-6, 1.01]),
                np.array([2.0, np.inf, np.inf]))
    return (("c_d", "a_max"),
            np.array([0.84, 5e-4]),
            np.array([0.1, 2e-4]),
            np.array([0.05, 1e-6]),
            np.array([2.0, np.inf]))


NET_PRIOR_SIGMA = 10.0


def _identity_start_net(kind: ModelKind, spec: NetSpec) -> NetParams:
    """Init whose zeroed head makes a hybrid coincide with plain physics."""
    params = nnet.init(spec)
    if kind is ModelKind.DATA_DRIVEN:
        return params
    weights = [w.copy() for w in params.weights]
    biases = [b.copy() for b in params.biases]
    weights[-1][:] = 0.0
    biases[-1][:] = 0.0
    return NetParams(spec, tuple(weights), tuple(biases))


def build(kind: ModelKind, fluid: FluidSpec | None = None,
          net_spec: NetSpec | None = None, seed: int = 0,
          flow_scale: float = DEFAULT_FLOW_SCALE) -> Model:
    """Construct a model at its prior-mean / identity-start parameters.

    ``seed`` fixes the network initialization; it overrides the seed
    carried by ``net_spec``. Physics parameters start at their prior
    means.
    """
    fluid = fluid if fluid is not None else FluidSpec()
    names: tuple[str, ...] = ()
    blocks = []
    if kind in PHYSICS_KINDS:
        p_names, mu, sigma, lo, hi = _phys_block(kind)
        names += p_names
        blocks.append((mu.copy(), mu, sigma, lo, hi))
    if kind in NET_KINDS:
        if net_spec is None:
            raise ValueError(f"{kind.value} requires a net_spec")
        net_spec = dataclasses.replace(net_spec, seed=seed)
        net_values = nnet.flatten(_identity_start_net(kind, net_spec))
        m = len(net_values)
        names += tuple(f"net.{i}" for i in range(m))
        blocks.append((net_values, np.zeros(m),
                       np.full(m, NET_PRIOR_SIGMA),
                       np.full(m, -np.inf), np.full(m, np.inf)))
    else:
        net_spec = None
    params = ParamVector(
        values=np.concatenate([b[0] for b in blocks]),
        names=names,
        prior_mean=np.concatenate([b[1] for b in blocks]),
        prior_sigma=np.concatenate([b[2] for b in blocks]),
        lower=np.concatenate([b[3] for b in blocks]),
        upper=np.concatenate([b[4] for b in blocks]))
    return Model(kind=kind, fluid=fluid, flow_scale=flow_scale,
                 net_spec=net_spec, params=params,
                 norm=Normalization.identity())


def checkpoint(model: Model) -> dict:
    """Self-describing serializable record of a model."""
    p = model.params

    def _bound(v: float) -> float | None:
        return None if np.isinf(v) else float(v)

    return {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "kind": model.kind.value,
        "flow_scale": float(model.flow_scale),
        "fluid": {f.name: getattr(model.fluid, f.name)
                  for f in dataclasses.fields(model.fluid)},
        "net_spec": None if model.net_spec is None else {
            "layer_sizes": list(model.net_spec.layer_sizes),
            "seed": model.net_spec.seed},
        "normalization": {
            "x_mean": [float(v) for v in model.norm.x_mean],
            "x_std": [float(v) for v in model.norm.x_std],
            "y_mean": float(model.norm.y_mean),
            "y_std": float(model.norm.y_std)},
        "params": {
            "names": list(p.names),
            "values": [float(v) for v in p.values],
            "prior_mean": [float(v) for v in p.prior_mean],
            "prior_sigma": [float(v) for v in p.prior_sigma],
            "lower": [_bound(v) for v in p.lower],
            "upper": [_bound(v) for v in p.upper]},
    }


def restore(record: dict) -> Model:
    """Rebuild a model from a checkpoint record; validates shapes."""
    if record.get("format") != CHECKPOINT_FORMAT:
        raise ValueError(f"not a model checkpoint: format={record.get('format')!r}")
    if record.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {record.get('version')!r}")
    kind = ModelKind(record["kind"])
    fluid = FluidSpec(**record["fluid"])
    net_spec = None
    if record["net_spec"] is not None:
        net_spec = NetSpec(tuple(record["net_spec"]["layer_sizes"]),
                           seed=record["net_spec"]["seed"])
    if (net_spec is None) == (kind in NET_KINDS):
        raise ValueError(f"checkpoint net_spec inconsistent with kind {kind.value}")
    pr = record["params"]
    values = np.array(pr["values"], dtype=float)
    lengths = {len(pr[k]) for k in ("names", "values", "prior_mean",
                                    "prior_sigma", "lower", "upper")}
    if lengths != {len(values)}:
        raise ValueError("checkpoint parameter blocks have inconsistent lengths")
    expected = {ModelKind.MECH_PLAIN: 2, ModelKind.MECH_ORACLE: 3}.get(kind)
    if expected is None:
        expected = net_spec.n_params + (0 if kind is ModelKind.DATA_DRIVEN else 2)
    if len(values) != expected:
        raise ValueError(f"checkpoint has {len(values)} parameters, "
                         f"expected {expected} for {kind.value}")

    def _bound(v, default):
        return default if v is None else float(v)

    params = ParamVector(
        values=values,
        names=tuple(pr["names"]),
        prior_mean=np.array(pr["prior_mean"], dtype=float),
        prior_sigma=np.array(pr["prior_sigma"], dtype=float),
        lower=np.array([_bound(v, -np.inf) for v in pr["lower"]]),
        upper=np.array([_bound(v, np.inf) for v in pr["upper"]]))
    nr = record["normalization"]
    norm = Normalization(np.array(nr["x_mean"], dtype=float),
                         np.array(nr["x_std"], dtype=float),
                         float(nr["y_mean"]), float(nr["y_std"]))
    return Model(kind=kind, fluid=fluid, flow_scale=float(record["flow_scale"]),
                 net_spec=net_spec, params=params, norm=norm)


def save_checkpoint(model: Model, path) -> None:
    with open(path, "w") as fh:
        json.dump(checkpoint(model), fh, indent=1)
        fh.write("\n")


def load_checkpoint(path) -> Model:
    with open(path) as fh:
        return restore(json.load(fh))
