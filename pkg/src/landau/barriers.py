"""Barrier functions for comparison arguments and the regularity-envelope ODE."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from .grids import KineticPoint, radial_cutoff
from .weights import WeightSpec, bracket

__all__ = [
    "SpreadParams",
    "GOdeParams",
    "BlowUpError",
    "barrier_eval",
    "lower_barrier",
    "gaussian_spread_barrier",
    "decay_envelope",
    "g_ode_envelope",
    "mu_exponent",
    "nu_exponent",
    "regularity_power",
]


@dataclass(frozen=True)
class SpreadParams:
    """Geometry of a positivity-spreading experiment.

    delta is the lower-bound level on the initial ball; r the ball radius;
    aspect the velocity-to-space aspect ratio (the initial velocity ball
    has radius r/aspect); kappa the Gaussian spread rate; big_r the target
    velocity radius for spreading.
    """

    delta: float
    r: float
    aspect: float = 1.0
    x0: tuple[float, float, float] = (0.0, 0.0, 0.0)
    v0: tuple[float, float, float] = (0.0, 0.0, 0.0)
    kappa: float = 1.0
    big_r: float = 2.0

    def __post_init__(self):
        for name in ("delta", "r", "aspect", "big_r"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")


def _ellipsoid(params: SpreadParams, t, x, v):
    """|v-v0|^2 / (r/aspect)^2 + |x-x0-t v|^2 / r^2, vectorized."""
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    dv = v - np.asarray(params.v0)
    dx = x - np.asarray(params.x0) - np.asarray(t)[..., None] * v
    rv = params.r / params.aspect
    return np.sum(dv * dv, axis=-1) / rv**2 + np.sum(dx * dx, axis=-1) / params.r**2


def lower_barrier(params: SpreadParams, c1: float, t, x, v, c2: float | None = None):
    """Transported ellipsoid barrier -c1 t + c2 (1 - ellipsoid); c2 defaults to 3 delta/4."""
    if c2 is None:
        c2 = 0.75 * params.delta
    return -c1 * np.asarray(t, dtype=float) + c2 * (1.0 - _ellipsoid(params, t, x, v))


def gaussian_spread_barrier(params: SpreadParams, a1: float, a2: float, t, x, v):
    """delta (zeta(x) - a1 t)(xi_R(v) - a2 t) e^(-kappa |v-v0|^2 / t), zero at t = 0.

    Coordinates are recentered on (x0 + t v0, v0); zeta is the parabolic
    cap 1 - |x|^2/(r/2)^2 and xi_R a smooth radial cutoff that is 1 inside
    big_r and vanishes outside 2 big_r.
    """
    t = np.asarray(t, dtype=float)
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    dv = v - np.asarray(params.v0)
    dx = x - np.asarray(params.x0) - t[..., None] * np.asarray(params.v0)
    zeta = 1.0 - np.sum(dx * dx, axis=-1) / (params.r / 2.0) ** 2
    xi = radial_cutoff(np.linalg.norm(dv, axis=-1), 2.0 * params.big_r)
    s2 = np.sum(dv * dv, axis=-1)
    with np.errstate(divide="ignore", over="ignore"):
        gauss = np.where(t > 0, np.exp(-params.kappa * s2 / np.where(t > 0, t, 1.0)), 0.0)
    return params.delta * (zeta - a1 * t) * (xi - a2 * t) * gauss


def decay_envelope(k0: float, spec: WeightSpec, t, v):
    """K0 exp(-(rho - sigma t) <v>^beta)."""
    t = np.asarray(t, dtype=float)
    rate = spec.rho - spec.sigma * t
    if np.any(rate <= 0):
        raise ValueError("envelope horizon exceeded")
    return k0 * np.exp(-rate * bracket(v) ** spec.beta)


def barrier_eval(kind: str, params, z: KineticPoint, **kw) -> float:
    """Pointwise barrier evaluation at a kinetic point.

    kind 'lower' needs c1 (and optionally c2) in kw; 'spread' needs a1, a2;
    'envelope' takes params = (k0, WeightSpec).
    """
    t, x, v = z.arrays()
    if kind == "lower":
        return float(lower_barrier(params, kw["c1"], t, x[None], v[None], c2=kw.get("c2"))[()])
    if kind == "spread":
        if t < 0:
            raise ValueError("spread barrier needs t >= 0")
        return float(gaussian_spread_barrier(params, kw["a1"], kw["a2"], t, x[None], v[None])[()])
    if kind == "envelope":
        k0, spec = params
        return float(decay_envelope(k0, spec, t, v))
    raise ValueError(f"unknown barrier kind {kind!r}")


def mu_exponent(alpha: float) -> float:
    """Default singular-power exponent of the envelope ODE."""
    return alpha**2 / (24.0 - 2.0 * alpha)


def regularity_power(alpha: float) -> float:
    """Exponent tracking the nonlinearity of the second-derivative bound."""
    frac = 2.0 * alpha / (6.0 - alpha)
    return (3.0 + 2.0 * alpha / 3.0 + 3.0 / alpha) * (1.0 - frac) + frac


def nu_exponent(alpha: float) -> float:
    """Default superlinear power of the envelope ODE."""
    return regularity_power(alpha / 2.0) / 2.0


class BlowUpError(RuntimeError):
    def __init__(self, time: float):
        super().__init__(f"envelope blows up at t = {time:.6g}")
        self.time = time


@dataclass(frozen=True)
class GOdeParams:
    """dG/dt = 2 c0 (G + t^(mu-1) G^(1+nu)), G(0) = g0."""

    g0: float
    c0: float
    mu: float
    nu: float

    def __post_init__(self):
        if not self.g0 > 0:
            raise ValueError("g0 must be positive")
        if not 0.0 < self.mu <= 1.0:
            raise ValueError("mu must lie in (0, 1]")
        if self.nu < 0:
            raise ValueError("nu must be nonnegative")


def g_ode_envelope(params: GOdeParams, t_grid) -> np.ndarray:
    """Integrate the envelope ODE through its integrable singularity at t=0.

    For nu = 0 the equation is linear and solved in closed form with the
    exact integrating factor of the singular term. For nu > 0 the time
    substitution s = t^mu removes the singularity and the reciprocal power
    w = G^(-nu) turns the equation linear, with blow-up appearing as w
    crossing zero; adaptive Runge-Kutta handles the regular w equation.
    Output is monotone increasing; blow-up before the end of the grid
    raises BlowUpError carrying the blow-up time.
    """
    t = np.asarray(t_grid, dtype=float)
    if t.ndim != 1 or len(t) == 0 or np.any(t < 0) or np.any(np.diff(t) <= 0):
        raise ValueError("t_grid must be increasing and nonnegative")
    if params.nu == 0.0:
        return params.g0 * np.exp(2.0 * params.c0 * (t + t**params.mu / params.mu))

    mu, nu, c0 = params.mu, params.nu, params.c0
    w0 = params.g0 ** (-nu)

    def rhs(s, w):
        return [-(2.0 * c0 * nu / mu) * (s ** (1.0 / mu - 1.0) * w[0] + 1.0)]

    def blow(s, w):
        return w[0]

    blow.terminal = True
    blow.direction = -1.0

    s_end = t[-1] ** mu
    s_eval = t**mu
    sol = solve_ivp(
        rhs,
        (0.0, s_end),
        [w0],
        t_eval=s_eval,
        method="RK45",
        rtol=1e-11,
        atol=1e-14 * w0,
        events=blow,
        max_step=max(s_end / 64.0, 1e-12),
    )
    if sol.status == 1 and len(sol.t_events[0]):
        raise BlowUpError(float(sol.t_events[0][0] ** (1.0 / mu)))
    if not sol.success:
        raise RuntimeError(f"envelope integration failed: {sol.message}")
    w = sol.y[0]
    if np.any(w <= 0):
        raise BlowUpError(float(sol.t[np.argmax(w <= 0)] ** (1.0 / mu)))
    return w ** (-1.0 / nu)
