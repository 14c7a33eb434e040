"""Frozen empirical constants for checks whose theory gives no explicit value.

Each constant was fitted once on the reference configuration by
scripts/calibrate_constants.py and frozen here; checks assert stability of
the fitted value across resolution and seed sweeps rather than any
closed-form prediction.
"""

from __future__ import annotations

FROZEN: dict[str, float] = {
    # Horizon prefactor of the transported-ellipsoid lower bound:
    # t_max = c * (r/aspect)^2 / (K0 <|v0| + r/aspect>^(gamma+2)).
    "lower_bound_horizon_c": 0.5,
    # Horizon prefactor of the velocity-spreading bound: t_max = c * r / R.
    "velocity_spread_horizon_c": 0.25,
    # Upper-bound prefactor of the coefficient growth estimates.
    "coefficient_upper_c": 2.2,
    # Supersolution prefactor: sigma >= c * L0 * rho * (1 + rho) makes the
    # decaying envelope a supersolution on a Maxwellian background.
    "envelope_supersolution_c": 1.3,
}


def frozen_constant(name: str, override: float | None = None) -> float:
    if override is not None:
        return float(override)
    return FROZEN[name]
