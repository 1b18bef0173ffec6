"""Poke at the choke-flow kernel: critical plateau, valve curves, slip.

Three quick looks at the physics layer on its own, without any datasets
or models: (1) mass flow versus downstream pressure flattens once the
pressure ratio drops below the critical ratio y_c, (2) the linear and
equal-percentage area characteristics give very different flow-versus-
opening shapes, (3) the slip correction raises the throat mixture
density and with it the flow.
"""

import numpy as np

from vfmlab import ChokeConditions, ChokeParams, FluidSpec, PhaseFractions
from vfmlab.choke import (AreaKind, critical_pressure_ratio, effective_area,
                          gas_specific_volume, liquid_density,
                          polytropic_exponent, sachdeva_mass_flow,
                          split_volumetric)

BAR = 1e5


def main():
    fluid = FluidSpec()
    fr = PhaseFractions(eta_oil=0.55, eta_gas=0.25, eta_water=0.20)
    params = ChokeParams(area_kind=AreaKind.EQUAL_PERCENTAGE)

    # 1. Sweep p2 downward at fixed p1: the flow rises, then saturates.
    p1 = 80.0 * BAR
    t1 = 350.0
    v_g1 = gas_specific_volume(p1, t1, fluid)
    v_l = 1.0 / liquid_density(fr, fluid)
    n = polytropic_exponent(fr.eta_gas, fluid)
    y_c = critical_pressure_ratio(fr.eta_gas, v_g1, v_l, fluid.k, n)
    print(f"critical pressure ratio y_c = {y_c:.4f} "
          f"(p2 below {y_c * p1 / BAR:.1f} bar is choked)")
    print("   p2/p1    flow kg/s")
    for ratio in (0.95, y_c + 0.02, y_c, y_c - 0.1, 0.65, 0.4, 0.2):
        cond = ChokeConditions(p1=p1, p2=ratio * p1, t1=t1, u=60.0)
        area = effective_area(cond.u, params)
        m = sachdeva_mass_flow(cond, fr, fluid, params, area)
        tag = "  <- plateau" if ratio <= y_c else ""
        print(f"   {ratio:5.3f}    {m:8.3f}{tag}")

    # 2. Valve characteristics: equal percentage hugs zero then shoots up.
    lin = ChokeParams(area_kind=AreaKind.LINEAR)
    print("   u%    A_linear m^2    A_equal_pct m^2")
    for u in (10.0, 30.0, 50.0, 70.0, 90.0, 100.0):
        print(f"   {u:5.1f}  {effective_area(u, lin):.3e}      "
              f"{effective_area(u, params):.3e}")

    # 3. Slip: heavier effective throat mixture, more mass through.
    cond = ChokeConditions(p1=p1, p2=30.0 * BAR, t1=t1, u=60.0)
    area = effective_area(cond.u, params)
    no_slip = sachdeva_mass_flow(cond, fr, fluid, params, area)
    with_slip = sachdeva_mass_flow(
        cond, fr, fluid,
        ChokeParams(area_kind=AreaKind.EQUAL_PERCENTAGE, slip_enabled=True),
        area)
    print(f"no-slip flow {no_slip:.3f} kg/s, with slip {with_slip:.3f} kg/s "
          f"(+{100 * (with_slip / no_slip - 1):.1f}%)")

    # Standard-condition volumetric split of the slip case.
    q_oil, q_gas, q_water, q_total = split_volumetric(with_slip, fr, fluid)
    hour = 3600.0
    print(f"standard rates m^3/h: oil {q_oil * hour:.2f}, "
          f"gas {q_gas * hour:.2f}, water {q_water * hour:.2f}, "
          f"total {q_total * hour:.2f}")
    assert np.isclose(q_total, q_oil + q_gas + q_water)


if __name__ == "__main__":
    main()
