"""Sub-exponential velocity weights exp((rho - sigma t) <v>^beta) and derivatives."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grids import VelocityGrid

__all__ = ["WeightSpec", "weight_eval", "weight_on_grid", "bracket", "suggested_velocity_radius"]


def bracket(v) -> np.ndarray | float:
    """Smooth speed <v> = sqrt(1 + |v|^2)."""
    v = np.asarray(v, dtype=float)
    return np.sqrt(1.0 + np.sum(v * v, axis=-1))


@dataclass(frozen=True)
class WeightSpec:
    """Parameters of the decaying envelope weight.

    The weight exp((rho - sigma t) <v>^beta) is only meaningful while
    rho - sigma t stays positive; evaluation past that horizon is an error.
    """

    rho: float
    sigma: float = 0.0
    beta: float = 1.0

    def __post_init__(self):
        if not self.rho > 0:
            raise ValueError("rho must be positive")
        if self.sigma < 0:
            raise ValueError("sigma must be nonnegative")
        if not 0.0 <= self.beta <= 1.0:
            raise ValueError("beta must lie in [0, 1]")

    def rate_at(self, t: float) -> float:
        rate = self.rho - self.sigma * t
        if not rate > 0:
            raise ValueError(f"weight horizon exceeded: rho - sigma t = {rate} <= 0 at t = {t}")
        return rate

    def horizon(self) -> float:
        return np.inf if self.sigma == 0 else self.rho / self.sigma


def weight_eval(spec: WeightSpec, t: float, v, order: int = 0):
    """Evaluate the weight and, for order >= 1, its analytic v-derivatives.

    Returns the scalar value, optionally followed by the gradient triple
    and the symmetric 3x3 Hessian.
    """
    if order not in (0, 1, 2):
        raise ValueError("order must be 0, 1, or 2")
    rate = spec.rate_at(t)
    v = np.asarray(v, dtype=float).reshape(3)
    b = float(bracket(v))
    phi = float(np.exp(rate * b**spec.beta))
    if order == 0:
        return phi
    rb = rate * spec.beta
    grad = rb * phi * b ** (spec.beta - 2.0) * v
    if order == 1:
        return phi, grad
    outer = np.outer(v, v)
    hess = rb * b ** (spec.beta - 4.0) * phi * (
        (spec.beta - 2.0) * outer + b**2 * np.eye(3) + rb * b**spec.beta * outer
    )
    return phi, grad, hess


def weight_on_grid(spec: WeightSpec, t: float, grid: VelocityGrid) -> np.ndarray:
    """Weight values at every velocity node, shape (n, n, n)."""
    rate = spec.rate_at(t)
    return np.exp(rate * grid.bracket() ** spec.beta)


def suggested_velocity_radius(spec: WeightSpec, floor: float = 1e-12) -> float:
    """Smallest box radius at which the envelope has dropped below floor x peak."""
    target = 1.0 + np.log(1.0 / floor) / spec.rho
    b = target ** (1.0 / spec.beta) if spec.beta > 0 else np.inf
    return float(np.sqrt(max(b**2 - 1.0, 0.0)))
