"""Physics kernels for multiphase flow through a production choke.

Implements a critical-flow choke model for an oil/gas/water mixture:
fluid property closures, the critical-pressure-ratio fixed point, the
mass-flow equation with an optional slip correction, valve area
characteristics, and the conversion from mass flow to standard-condition
volumetric rates.

Unit conventions in this module are SI throughout: pressures in Pa,
temperatures in K, areas in m², densities in kg/m³, mass flow in kg/s,
volumetric rates in m³/s. Callers that speak bar / °C convert at the
boundary (see :mod:`vfmlab.process`).

All operations are pure functions of their arguments and accept scalars
or numpy arrays (broadcasting elementwise), so they are safe to call
concurrently.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

__all__ = [
    "AreaKind",
    "ChokeConditions",
    "ChokeParams",
    "FluidSpec",
    "FixedPointError",
    "NoLiquidError",
    "PhaseFractions",
    "area_equal_percentage",
    "area_linear",
    "critical_pressure_ratio",
    "effective_area",
    "gas_specific_volume",
    "liquid_density",
    "mass_flux",
    "mixture_density_throat",
    "polytropic_exponent",
    "sachdeva_mass_flow",
    "slip_ratio",
    "split_volumetric",
]

SIMPLEX_TOL = 1e-9
YC_TOL = 1e-9
YC_MAX_ITER = 200


class NoLiquidError(ValueError):
    """A liquid property was requested for a mixture with no liquid phase."""


class FixedPointError(RuntimeError):
    """The critical-pressure-ratio iteration did not converge.

    The last iterate is kept in :attr:`last_iterate` for diagnostics.
    """

    def __init__(self, message: str, last_iterate):
        super().__init__(message)
        self.last_iterate = last_iterate


@dataclass(frozen=True)
class FluidSpec:
    """Fluid constants shared by the process and every physics-bearing model.

    Defaults are representative petroleum values: a medium crude, brine,
    and a light natural gas treated as ideal.

    Attributes
    ----------
    rho_oil_sc, rho_water_sc, rho_gas_sc : float
        Phase densities at standard conditions (kg/m³).
    k : float
        Gas heat-capacity ratio c_p / c_v (dimensionless, > 1).
    r_gas : float
        Specific gas constant (J/(kg·K)), must equal c_p - c_v.
    c_liq : float
        Liquid specific heat (J/(kg·K)).
    c_v, c_p : float
        Gas isochoric / isobaric specific heats (J/(kg·K)).
    """

    rho_oil_sc: float = 850.0
    rho_water_sc: float = 1000.0
    rho_gas_sc: float = 0.85
    k: float = 1.3
    r_gas: float = 500.0
    c_liq: float = 2000.0
    c_v: float = 1700.0
    c_p: float = 2200.0

    def __post_init__(self):
        for name in ("rho_oil_sc", "rho_water_sc", "rho_gas_sc"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        if self.k <= 1:
            raise ValueError(f"k must exceed 1, got {self.k}")
        if not (self.c_p > self.c_v > 0):
            raise ValueError(f"need c_p > c_v > 0, got c_p={self.c_p}, c_v={self.c_v}")
        if self.c_liq <= 0:
            raise ValueError(f"c_liq must be positive, got {self.c_liq}")
        gap = self.c_p - self.c_v
        if abs(self.r_gas - gap) > 1e-9 * max(abs(self.r_gas), gap):
            raise ValueError(
                f"r_gas must equal c_p - c_v: r_gas={self.r_gas}, c_p - c_v={gap}"
            )


@dataclass(frozen=True)
class PhaseFractions:
    """Mass fractions of oil, gas and water; they must sum to one."""

    eta_oil: float
    eta_gas: float
    eta_water: float

    def __post_init__(self):
        for name in ("eta_oil", "eta_gas", "eta_water"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {value}")
        total = self.eta_oil + self.eta_gas + self.eta_water
        if abs(total - 1.0) > SIMPLEX_TOL:
            raise ValueError(f"mass fractions must sum to one, got {total!r}")


@dataclass(frozen=True)
class ChokeConditions:
    """Boundary conditions at the choke: pressures (Pa), temperature (K),
    and choke opening u in percent of full travel."""

    p1: float
    p2: float
    t1: float
    u: float

    def __post_init__(self):
        if self.p1 <= 0:
            raise ValueError(f"p1 must be positive, got {self.p1}")
        if self.p2 <= 0:
            raise ValueError(f"p2 must be positive, got {self.p2}")
        if self.t1 <= 0:
            raise ValueError(f"t1 must be positive, got {self.t1}")
        if not 0.0 <= self.u <= 100.0:
            raise ValueError(f"u must lie in [0, 100], got {self.u}")


class AreaKind(enum.Enum):
    """Shape of the opening-to-area characteristic."""

    LINEAR = "linear"
    EQUAL_PERCENTAGE = "equal_percentage"
    NEURAL_SCALED = "neural_scaled"


@dataclass(frozen=True)
class ChokeParams:
    """Choke geometry and calibration parameters.

    ``c_d`` is the discharge coefficient, a multiplicative calibration of
    the area characteristic. ``a_max`` is the full-open effective area in
    m². ``rangeability`` is the equal-percentage parameter R (> 1).
    """

    c_d: float = 0.84
    a_max: float = 5e-4
    rangeability: float = 50.0
    area_kind: AreaKind = AreaKind.LINEAR
    slip_enabled: bool = False

    def __post_init__(self):
        if not 0.0 < self.c_d <= 2.0:
            raise ValueError(f"c_d must lie in (0, 2], got {self.c_d}")
        if self.a_max <= 0:
            raise ValueError(f"a_max must be positive, got {self.a_max}")
        if self.rangeability <= 1:
            raise ValueError(f"rangeability must exceed 1, got {self.rangeability}")


def liquid_density(fr: PhaseFractions, fluid: FluidSpec) -> float:
    """Density of the oil/water liquid mixture (kg/m³).

    Volume-weighted harmonic mixture of the standard-condition phase
    densities. Raises :class:`NoLiquidError` when the mixture carries no
    liquid at all; callers must branch to the gas-only path instead.
    """
    eta_liq = fr.eta_oil + fr.eta_water
    if eta_liq <= 0.0:
        raise NoLiquidError("no-liquid: eta_oil + eta_water is zero")
    return eta_liq / (fr.eta_oil / fluid.rho_oil_sc + fr.eta_water / fluid.rho_water_sc)


def gas_specific_volume(p, t, fluid: FluidSpec):
    """Ideal-gas specific volume v = R T / p (m³/kg).

    Compressibility is fixed to one, which keeps the process smooth and
    cheap to differentiate.
    """
    p = np.asarray(p, dtype=float)
    t = np.asarray(t, dtype=float)
    if np.any(p <= 0):
        raise ValueError("pressure must be positive")
    if np.any(t <= 0):
        raise ValueError("temperature must be positive")
    out = fluid.r_gas * t / p
    return float(out) if out.ndim == 0 else out


def polytropic_exponent(x_g, fluid: FluidSpec):
    """Polytropic exponent of the expanding gas/liquid mixture.

    n = 1 + x_g (c_p - c_v) / (x_g c_v + (1 - x_g) c_liq), which recovers
    k for pure gas and tends to 1 in the liquid-dominated limit. Valid
    for gas mass fraction x_g in (0, 1]; the x_g = 0 case is handled by
    the incompressible branch upstream.
    """
    x_g = np.asarray(x_g, dtype=float)
    if np.any(x_g <= 0) or np.any(x_g > 1):
        raise ValueError("x_g must lie in (0, 1]")
    out = 1.0 + x_g * (fluid.c_p - fluid.c_v) / (x_g * fluid.c_v + (1.0 - x_g) * fluid.c_liq)
    return float(out) if out.ndim == 0 else out


def _yc_map(y, lam, kk1, n, inv_k):
    """One evaluation of the critical-ratio fixed-point map g(y)."""
    lam2 = lam * np.power(y, inv_k)  # (1 - x_g) v_l / (x_g v_g2)
    num = kk1 + lam * (1.0 - y)
    den = kk1 + 0.5 * n + n * lam2 + 0.5 * n * lam2 * lam2
    return num / den


def critical_pressure_ratio(x_g, v_g1, v_l, k, n):
    """Critical throat-to-upstream pressure ratio y_c in (0, 1).

    Solves the fixed point y = g(y) of the mixture critical-flow
    condition, where g compares the expansion work available upstream to
    the kinetic terms at the throat (with the throat gas specific volume
    v_g2 = v_g1 * y^(-1/k) folded in). Uses a damped iteration
    y <- (y + g(y)) / 2 from y0 = 0.5 and falls back to bisection on the
    residual for any element that has not converged after
    ``YC_MAX_ITER`` sweeps.

    Parameters are the gas mass fraction x_g in (0, 1], upstream gas
    specific volume v_g1, liquid specific volume v_l, heat-capacity
    ratio k and polytropic exponent n. Scalars or arrays broadcast.

    Raises :class:`FixedPointError` (carrying the last iterate) if even
    the bisection fails, which does not happen for valid inputs.
    """
    x_g = np.asarray(x_g, dtype=float)
    v_g1 = np.asarray(v_g1, dtype=float)
    v_l = np.asarray(v_l, dtype=float)
    k = np.asarray(k, dtype=float)
    n = np.asarray(n, dtype=float)
    if np.any(x_g <= 0) or np.any(x_g > 1):
        raise ValueError("x_g must lie in (0, 1]")
    if np.any(v_g1 <= 0) or np.any(v_l <= 0):
        raise ValueError("specific volumes must be positive")
    if np.any(k <= 1) or np.any(n <= 1):
        raise ValueError("k and n must exceed 1")

    lam = (1.0 - x_g) * v_l / (x_g * v_g1)
    kk1 = k / (k - 1.0)
    inv_k = 1.0 / k
    shape = np.broadcast_shapes(lam.shape, kk1.shape, n.shape)
    lam, kk1, n, inv_k = np.broadcast_arrays(lam, kk1, n, inv_k)

    y = np.full(shape, 0.5)
    done = np.zeros(shape, dtype=bool)
    for _ in range(YC_MAX_ITER):
        g = _yc_map(y, lam, kk1, n, inv_k)
        done = np.abs(g - y) < YC_TOL
        if done.all():
            break
        y = np.where(done, y, 0.5 * (y + g))
    if not done.all():
        # Oscillating elements: bisect the residual g(y) - y, which is
        # positive near 0 and negative at 1.
        lo = np.full(shape, 1e-12)
        hi = np.ones(shape)
        for _ in range(100):
            mid = 0.5 * (lo + hi)
            res = _yc_map(mid, lam, kk1, n, inv_k) - mid
            lo = np.where(res > 0, mid, lo)
            hi = np.where(res > 0, hi, mid)
        y = np.where(done, y, 0.5 * (lo + hi))
        g = _yc_map(y, lam, kk1, n, inv_k)
        if np.any(np.abs(g - y) >= 1e-8):
            raise FixedPointError("critical pressure ratio did not converge", y)
    out = np.asarray(y)
    return float(out) if out.ndim == 0 else out


def area_linear(u, params: ChokeParams):
    """Linear valve characteristic A = c_d * a_max * u / 100 (m²)."""
    u = np.asarray(u, dtype=float)
    if np.any(u < 0) or np.any(u > 100):
        raise ValueError("u must lie in [0, 100]")
    out = params.c_d * params.a_max * (u / 100.0)
    return float(out) if out.ndim == 0 else out


def area_equal_percentage(u, params: ChokeParams):
    """Equal-percentage valve characteristic (m²).

    A = a_max (R^(u/100) - 1) / (R - 1) with rangeability R, anchored so
    that A(0) = 0 exactly and A(100) = a_max exactly. The discharge
    coefficient does not enter here; :func:`effective_area` applies it
    as the multiplicative calibration of the characteristic.
    """
    u = np.asarray(u, dtype=float)
    if np.any(u < 0) or np.any(u > 100):
        raise ValueError("u must lie in [0, 100]")
    r = params.rangeability
    out = params.a_max * (np.power(r, u / 100.0) - 1.0) / (r - 1.0)
    return float(out) if out.ndim == 0 else out


def effective_area(u, params: ChokeParams):
    """Effective flow area seen by the mass-flow equation (m²).

    The discharge coefficient multiplies whichever characteristic is
    selected. ``AreaKind.NEURAL_SCALED`` is composed outside this module
    (the learned multiplier is not a choke parameter).
    """
    if params.area_kind is AreaKind.LINEAR:
        return area_linear(u, params)
    if params.area_kind is AreaKind.EQUAL_PERCENTAGE:
        out = params.c_d * np.asarray(area_equal_percentage(u, params))
        return float(out) if out.ndim == 0 else out
    raise ValueError(f"no closed-form area for {params.area_kind}")


def slip_ratio(x_g, rho_g2, rho_l):
    """Gas/liquid velocity ratio S = (rho_l / rho_g2)^(1/6), clamped to [1, 10]."""
    rho_g2 = np.asarray(rho_g2, dtype=float)
    rho_l = np.asarray(rho_l, dtype=float)
    if np.any(rho_g2 <= 0) or np.any(rho_l <= 0):
        raise ValueError("densities must be positive")
    out = np.clip(np.power(rho_l / rho_g2, 1.0 / 6.0), 1.0, 10.0)
    return float(out) if out.ndim == 0 else out


def mixture_density_throat(x_g, v_g2, v_l, slip=None):
    """Mixture density at the throat (kg/m³).

    Without slip this is the homogeneous value
    (x_g v_g2 + (1 - x_g) v_l)^(-1). With a slip ratio S the gas void
    fraction alpha = x_g v_g2 / (x_g v_g2 + S (1 - x_g) v_l) weighs the
    phase densities instead; S = 1 reproduces the homogeneous value.
    """
    x_g = np.asarray(x_g, dtype=float)
    v_g2 = np.asarray(v_g2, dtype=float)
    v_l = np.asarray(v_l, dtype=float)
    if np.any(x_g < 0) or np.any(x_g > 1):
        raise ValueError("x_g must lie in [0, 1]")
    if np.any(v_g2 <= 0) or np.any(v_l <= 0):
        raise ValueError("specific volumes must be positive")
    if slip is None:
        out = 1.0 / (x_g * v_g2 + (1.0 - x_g) * v_l)
    else:
        slip = np.asarray(slip, dtype=float)
        if np.any(slip < 1):
            raise ValueError("slip ratio must be >= 1")
        gas_vol = x_g * v_g2
        alpha = gas_vol / (gas_vol + slip * (1.0 - x_g) * v_l)
        out = alpha / v_g2 + (1.0 - alpha) / v_l
    return float(out) if out.ndim == 0 else out


def mass_flux(p1, p2, t1, eta_oil, eta_gas, eta_water, fluid: FluidSpec,
              slip_enabled: bool):
    """Mass flow per unit effective area (kg/(s·m²)), vectorized.

    This is the whole choke model except the area factor: the mass flow
    through an effective area A is simply A times this flux, which is
    what makes the area parameters cheap to calibrate. Handles the three
    composition regimes elementwise:

    * pure liquid (eta_gas = 0): incompressible orifice flux
      sqrt(2 rho_l max(p1 - p2, 0));
    * gas-bearing mixtures: throat ratio y = max(p2/p1, y_c) (critical
      flow caps the ratio), throat gas volume v_g2 = v_g1 y^(-1/k),
      throat mixture density with or without slip, and flux
      rho_m2 sqrt(2 p1 [(1-x_g)(1-y) v_l + x_g k/(k-1) (v_g1 - y v_g2)]).

    A negative radicand (possible only in a numeric corner near y -> 1)
    is clamped to zero flow rather than raised.
    """
    p1, p2, t1, eta_oil, eta_gas, eta_water = np.broadcast_arrays(
        *(np.asarray(a, dtype=float) for a in (p1, p2, t1, eta_oil, eta_gas, eta_water))
    )
    scalar = p1.ndim == 0
    p1, p2, t1, eta_oil, eta_gas, eta_water = (
        np.atleast_1d(a) for a in (p1, p2, t1, eta_oil, eta_gas, eta_water)
    )

    x_g = eta_gas
    eta_liq = eta_oil + eta_water
    has_liq = eta_liq > 0
    has_gas = x_g > 0

    # Liquid density; harmless fill where there is no liquid (all uses
    # are multiplied by (1 - x_g) = 0 there).
    vol_liq = eta_oil / fluid.rho_oil_sc + eta_water / fluid.rho_water_sc
    rho_l = np.where(has_liq, eta_liq / np.where(has_liq, vol_liq, 1.0), 1.0)
    v_l = 1.0 / rho_l

    flux = np.zeros(p1.shape)

    # Incompressible branch.
    liq_only = has_liq & ~has_gas
    if liq_only.any():
        dp = np.clip(p1 - p2, 0.0, None)
        flux = np.where(liq_only, np.sqrt(2.0 * rho_l * dp), flux)

    if has_gas.any():
        x_safe = np.where(has_gas, x_g, 0.5)
        v_g1 = fluid.r_gas * t1 / p1
        n = 1.0 + x_safe * (fluid.c_p - fluid.c_v) / (
            x_safe * fluid.c_v + (1.0 - x_safe) * fluid.c_liq
        )
        y_c = critical_pressure_ratio(x_safe, v_g1, v_l, fluid.k, n)
        y = np.maximum(p2 / p1, y_c)
        v_g2 = v_g1 * np.power(y, -1.0 / fluid.k)
        if slip_enabled:
            s = np.clip(np.power(rho_l * v_g2, 1.0 / 6.0), 1.0, 10.0)
            gas_vol = x_safe * v_g2
            alpha = gas_vol / (gas_vol + s * (1.0 - x_safe) * v_l)
            rho_m2 = alpha / v_g2 + (1.0 - alpha) / v_l
        else:
            rho_m2 = 1.0 / (x_safe * v_g2 + (1.0 - x_safe) * v_l)
        kk1 = fluid.k / (fluid.k - 1.0)
        radicand = 2.0 * p1 * (
            (1.0 - x_safe) * (1.0 - y) * v_l + x_safe * kk1 * (v_g1 - y * v_g2)
        )
        gas_flux = rho_m2 * np.sqrt(np.clip(radicand, 0.0, None))
        flux = np.where(has_gas, gas_flux, flux)

    return float(flux[0]) if scalar else flux


def sachdeva_mass_flow(cond: ChokeConditions, fr: PhaseFractions,
                       fluid: FluidSpec, params: ChokeParams, area) -> float:
    """Mass flow rate (kg/s) through the given effective area (m²).

    Composes :func:`mass_flux` with the area; ``params.slip_enabled``
    selects the throat-density model. The result is zero for a closed
    valve and nonnegative always.
    """
    area = np.asarray(area, dtype=float)
    if np.any(area < 0):
        raise ValueError("area must be nonnegative")
    flux = mass_flux(cond.p1, cond.p2, cond.t1, fr.eta_oil, fr.eta_gas,
                     fr.eta_water, fluid, params.slip_enabled)
    out = area * flux
    out = np.asarray(out)
    return float(out) if out.ndim == 0 else out


def split_volumetric(m_dot, fr: PhaseFractions, fluid: FluidSpec):
    """Phase volumetric rates at standard conditions (m³/s).

    q_i = eta_i * m_dot / rho_i_sc per phase; returns
    (q_oil, q_gas, q_water, q_total) with q_total the plain sum.
    """
    m_dot = np.asarray(m_dot, dtype=float)
    if np.any(m_dot < 0):
        raise ValueError("mass flow must be nonnegative")
    q_oil = fr.eta_oil * m_dot / fluid.rho_oil_sc
    q_gas = fr.eta_gas * m_dot / fluid.rho_gas_sc
    q_water = fr.eta_water * m_dot / fluid.rho_water_sc
    q_total = q_oil + q_gas + q_water
    if m_dot.ndim == 0:
        return float(q_oil), float(q_gas), float(q_water), float(q_total)
    return q_oil, q_gas, q_water, q_total


def standard_volume_factor(eta_oil, eta_gas, eta_water, fluid: FluidSpec):
    """Standard-condition mixture volume per unit mass (m³/kg).

    Multiplying a mass flow by this factor gives the total volumetric
    rate of :func:`split_volumetric` in one step; used to cache the
    composition-dependent part of the flow response.
    """
    return (
        np.asarray(eta_oil, dtype=float) / fluid.rho_oil_sc
        + np.asarray(eta_gas, dtype=float) / fluid.rho_gas_sc
        + np.asarray(eta_water, dtype=float) / fluid.rho_water_sc
    )
