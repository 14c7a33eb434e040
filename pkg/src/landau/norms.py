"""Weighted norms and sampled Holder seminorm estimates."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import qmc

from .grids import PhaseField, kinetic_distance_arrays
from .weights import WeightSpec, weight_on_grid

__all__ = [
    "HolderProbe",
    "weighted_norm",
    "holder_seminorm_estimate",
    "sample_point_pairs",
    "pair_distances",
    "weight_at_points",
]


@dataclass(frozen=True)
class HolderProbe:
    """Deterministic pair-sampling parameters for seminorm estimation."""

    alpha: float
    pair_count: int
    seed: int = 0
    metric: str = "kinetic"
    moment_order: float = 0.0

    def __post_init__(self):
        if not 0.0 < self.alpha <= 1.0:
            raise ValueError("alpha must lie in (0, 1]")
        if self.pair_count < 1:
            raise ValueError("pair_count must be at least 1")
        if self.metric not in ("kinetic", "euclidean"):
            raise ValueError("metric must be 'kinetic' or 'euclidean'")


def _poly_weight(field: PhaseField, q: float) -> np.ndarray:
    return field.velocity.bracket() ** q


def weighted_norm(field: PhaseField, kind: str, weight) -> float:
    """Sup or L2 norm of the weighted field.

    weight is either a polynomial order q (apply <v>^q) or a WeightSpec
    evaluated at the field's time. The L2 norm uses midpoint quadrature
    with cell volume dx^dim * dv^3.
    """
    if isinstance(weight, WeightSpec):
        w = weight_on_grid(weight, field.t, field.velocity)
    else:
        w = _poly_weight(field, float(weight))
    wf = w[None] * field.values
    if kind == "sup":
        return float(np.max(np.abs(wf)))
    if kind == "L2":
        return float(np.sqrt(np.sum(wf * wf) * field.cell_volume))
    raise ValueError("kind must be 'sup' or 'L2'")


def _as_snapshots(target) -> list[tuple[float, PhaseField]]:
    if isinstance(target, PhaseField):
        return [(target.t, target)]
    if hasattr(target, "snapshots") and hasattr(target, "times"):
        return list(zip(target.times, target.snapshots))
    out = []
    for item in target:
        if isinstance(item, PhaseField):
            out.append((item.t, item))
        else:
            t, f = item
            out.append((float(t), f))
    if not out:
        raise ValueError("empty sampling domain")
    return out


def _halton(dims: int, count: int, seed: int) -> np.ndarray:
    engine = qmc.Halton(d=dims, scramble=True, seed=seed)
    return engine.random(count)


def _node_points(field: PhaseField, flat: np.ndarray):
    """Coordinates (x, v) of flattened (x-node, v-node) indices."""
    n = field.velocity.n
    nv3 = n**3
    xi, vi = np.divmod(flat, nv3)
    xc = field.space.node_coords()[xi]
    ax = field.velocity.axis
    i, rem = np.divmod(vi, n * n)
    j, k = np.divmod(rem, n)
    vc = np.stack([ax[i], ax[j], ax[k]], axis=-1)
    vals = field.values.reshape(field.space.count * nv3)[flat]
    return xc, vc, vals


def sample_point_pairs(target, probe: HolderProbe):
    """Low-discrepancy sample of point pairs over the node set.

    Returns a dict of arrays (t1, x1, v1, f1, t2, x2, v2, f2) with
    degenerate pairs removed; deterministic for a given seed, and the
    first half of a 2N sample equals the N sample (prefix property).
    """
    snaps = _as_snapshots(target)
    n_nodes = snaps[0][1].space.count * snaps[0][1].velocity.n ** 3
    same_time = len(snaps) == 1 or probe.metric == "euclidean"
    u = _halton(4, probe.pair_count, probe.seed)
    s1 = np.minimum((u[:, 0] * len(snaps)).astype(int), len(snaps) - 1)
    s2 = s1 if same_time else np.minimum((u[:, 2] * len(snaps)).astype(int), len(snaps) - 1)
    i1 = np.minimum((u[:, 1] * n_nodes).astype(int), n_nodes - 1)
    i2 = np.minimum((u[:, 3] * n_nodes).astype(int), n_nodes - 1)
    keep = ~((s1 == s2) & (i1 == i2))
    if not np.any(keep):
        raise ValueError("empty sampling domain: all sampled pairs are degenerate")
    s1, s2, i1, i2 = s1[keep], s2[keep], i1[keep], i2[keep]

    out = {}
    for tag, srs, idx in (("1", s1, i1), ("2", s2, i2)):
        t = np.array([snaps[s][0] for s in srs])
        x = np.empty((len(srs), 3))
        v = np.empty((len(srs), 3))
        f = np.empty(len(srs))
        for s in np.unique(srs):
            m = srs == s
            xc, vc, vals = _node_points(snaps[s][1], idx[m])
            x[m], v[m], f[m] = xc, vc, vals
        out[f"t{tag}"], out[f"x{tag}"], out[f"v{tag}"], out[f"f{tag}"] = t, x, v, f
    out["space"] = snaps[0][1].space
    return out


def pair_distances(pairs, metric: str) -> np.ndarray:
    if metric == "kinetic":
        return kinetic_distance_arrays(
            pairs["t1"], pairs["x1"], pairs["v1"], pairs["t2"], pairs["x2"], pairs["v2"], pairs["space"]
        )
    dx = pairs["space"].wrap_offset(pairs["x2"] - pairs["x1"])
    dv = pairs["v2"] - pairs["v1"]
    return np.sqrt(np.sum(dx * dx, axis=-1) + np.sum(dv * dv, axis=-1))


def holder_seminorm_estimate(target, probe: HolderProbe, weight: WeightSpec | None = None) -> float:
    """Sampled lower bound on the (optionally weighted) Holder seminorm.

    target is a single field or a sequence of (t, field) slices; kinetic
    time offsets are only sampled when several slices are supplied.
    """
    pairs = sample_point_pairs(target, probe)
    d = pair_distances(pairs, probe.metric)
    g1, g2 = pairs["f1"], pairs["f2"]
    if weight is not None:
        g1 = weight_at_points(weight, pairs["t1"], pairs["v1"]) * g1
        g2 = weight_at_points(weight, pairs["t2"], pairs["v2"]) * g2
    good = d > 0
    if not np.any(good):
        return 0.0
    return float(np.max(np.abs(g1[good] - g2[good]) / d[good] ** probe.alpha))


def weight_at_points(spec: WeightSpec, t, v) -> np.ndarray:
    """Vectorized weight at arbitrary (t, v) points; v has trailing axis 3."""
    t = np.asarray(t, dtype=float)
    rate = spec.rho - spec.sigma * t
    if np.any(rate <= 0):
        raise ValueError("weight horizon exceeded for a sampled time")
    b = np.sqrt(1.0 + np.sum(np.asarray(v, dtype=float) ** 2, axis=-1))
    return np.exp(rate * b**spec.beta)
