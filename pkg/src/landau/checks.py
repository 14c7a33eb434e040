"""Trajectory-level verification of decay, positivity, regularity, and energy bounds.

Every check is deterministic given its probe seed, reports margins rather
than clipping them, and never asserts a closed-form constant the theory
does not provide: inexplicit constants are fitted once, frozen in
calibration.py, and re-checked for stability across sweeps.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np
from scipy.stats import qmc

from .barriers import GOdeParams, BlowUpError, SpreadParams, g_ode_envelope, mu_exponent, nu_exponent
from .calibration import frozen_constant
from .grids import PhaseField
from .interpolate import sample_field
from .norms import HolderProbe, holder_seminorm_estimate, weight_at_points
from .weights import WeightSpec, bracket

__all__ = [
    "DecayHypothesis",
    "DecayEnvelopeResult",
    "decay_envelope_check",
    "PositivityResult",
    "positivity_propagation_check",
    "VelocitySpreadResult",
    "velocity_spread_check",
    "CompositeSpreadReport",
    "composite_spread_report",
    "GTrace",
    "finite_difference_sup",
    "HolderPropagationResult",
    "holder_propagation_check",
    "InterpolationResult",
    "interpolation_ratio_check",
    "ConvolutionRatioResult",
    "convolution_bound_ratio",
    "EnergyTrace",
    "weighted_energy_trace",
    "moment_bound",
]


def _snapshots(traj):
    return list(zip(traj.times, traj.snapshots))


def moment_bound(traj, gamma: float) -> float:
    """Largest (1 + |v|^(gamma+2)) moment over snapshots and x nodes."""
    worst = 0.0
    for _, f in _snapshots(traj):
        w = 1.0 + np.sqrt(f.velocity.speed_squared()) ** (gamma + 2.0)
        per_x = np.sum(f.values.reshape(f.space.count, -1) * w.ravel()[None], axis=1)
        worst = max(worst, float(per_x.max()) * f.velocity.cell_volume)
    return worst


@dataclass(frozen=True)
class DecayHypothesis:
    """Envelope amplitude, weight parameters, and the moment bound inputs."""

    k0: float
    spec: WeightSpec
    q: float
    l0: float

    def __post_init__(self):
        if not (self.k0 > 0 and self.l0 > 0):
            raise ValueError("k0 and l0 must be positive")


@dataclass(frozen=True)
class DecayEnvelopeResult:
    sigma_min: float
    horizon: float
    passed: bool
    implied_c: float
    initial_margin: float


def decay_envelope_check(traj, hyp: DecayHypothesis, tol: float = 1e-4) -> DecayEnvelopeResult:
    """Smallest erosion rate sigma keeping f under the decaying envelope.

    The envelope K0 exp(-(rho - sigma t)<v>^beta) must dominate every node
    of every snapshot up to min(T, rho/(2 sigma)); the admissible set is
    upward closed in sigma, so bisection applies. The implied prefactor
    sigma_min / (L0 rho (1 + rho)) is reported for cross-resolution
    stability checks.
    """
    gamma = traj.config.kernel.gamma
    if not hyp.q > 5.0 + gamma:
        raise ValueError("decay hypothesis needs q > 5 + gamma")
    rho, beta = hyp.spec.rho, hyp.spec.beta
    snaps = _snapshots(traj)
    t0, f0 = snaps[0]
    env0 = hyp.k0 * np.exp(-rho * f0.velocity.bracket() ** beta)
    worst0 = float(np.max(f0.values / env0[None]))
    if worst0 > 1.0 + 1e-12:
        raise ValueError(f"ill-posed check: initial data exceeds the envelope by {worst0:.3g}x")

    def admissible(sigma: float) -> bool:
        horizon = rho / (2.0 * sigma) if sigma > 0 else np.inf
        for t, f in snaps:
            if t > horizon:
                break
            env = hyp.k0 * np.exp(-(rho - sigma * t) * f.velocity.bracket() ** beta)
            if np.any(f.values > env[None] * (1.0 + 1e-13)):
                return False
        return True

    if admissible(0.0):
        sigma_min = 0.0
    else:
        hi = 1.0
        while not admissible(hi):
            hi *= 2.0
            if hi > 1e8:
                return DecayEnvelopeResult(np.inf, 0.0, False, np.inf, worst0)
        lo = 0.0
        while hi - lo > tol * max(hi, 1.0):
            mid = 0.5 * (lo + hi)
            if admissible(mid):
                hi = mid
            else:
                lo = mid
        sigma_min = hi
    horizon = min(snaps[-1][0], rho / (2.0 * sigma_min)) if sigma_min > 0 else snaps[-1][0]
    implied_c = sigma_min / (hyp.l0 * rho * (1.0 + rho))
    return DecayEnvelopeResult(sigma_min, horizon, True, implied_c, worst0)


@dataclass(frozen=True)
class PositivityResult:
    passed: bool
    precondition_ok: bool
    horizon: float
    min_margin: float
    checked_nodes: int
    margin_floor: float


def _region_masks(f: PhaseField, params: SpreadParams, t: float, quarter: bool = True):
    """Node mask of the transported ellipsoid region at time t."""
    v1, v2, v3 = f.velocity.meshes()
    rv = params.r / params.aspect
    dv2 = (v1 - params.v0[0]) ** 2 + (v2 - params.v0[1]) ** 2 + (v3 - params.v0[2]) ** 2
    if f.space.dim == 0:
        ell = dv2 / rv**2
        mask = ell[None] < (0.25 if quarter else 1.0)
        return mask
    xc = f.space.node_coords()[:, : f.space.dim]
    vmesh = np.stack([v1, v2, v3], axis=-1)
    masks = np.zeros((f.space.count,) + v1.shape, dtype=bool)
    for i in range(f.space.count):
        dx = xc[i][None, None, None, :] - np.asarray(params.x0)[: f.space.dim] - t * vmesh[..., : f.space.dim]
        dx = f.space.wrap_offset(dx)
        ell = dv2 / rv**2 + np.sum(dx * dx, axis=-1) / params.r**2
        masks[i] = ell < (0.25 if quarter else 1.0)
    return masks


def positivity_propagation_check(
    traj,
    params: SpreadParams,
    k0: float | None = None,
    horizon_c: float | None = None,
) -> PositivityResult:
    """Check the transported-ellipsoid lower bound f >= delta/2 (1 - slack).

    The horizon prefactor is the frozen calibration constant; the grid
    slack is 2 dv / r. The minimum margin f / (delta/2 (1 - slack)) over
    the checked region is reported, so a deliberately weakened threshold
    shows up as a proportionally larger margin.
    """
    cfg = traj.config
    gamma = cfg.kernel.gamma
    if k0 is None:
        k0 = moment_bound(traj, gamma)
    c_fit = frozen_constant("lower_bound_horizon_c", horizon_c)
    rv = params.r / params.aspect
    speed0 = float(np.linalg.norm(params.v0)) + rv
    horizon = min(
        traj.times[-1],
        params.aspect,
        c_fit * rv**2 / (k0 * (1.0 + speed0**2) ** ((gamma + 2.0) / 2.0)),
    )

    t0, f0 = _snapshots(traj)[0]
    v1, v2, v3 = f0.velocity.meshes()
    dv2 = (v1 - params.v0[0]) ** 2 + (v2 - params.v0[1]) ** 2 + (v3 - params.v0[2]) ** 2
    vmask = dv2 < rv**2
    if f0.space.dim == 0:
        region0 = vmask[None]
    else:
        xc = f0.space.node_coords()[:, : f0.space.dim]
        off = f0.space.wrap_offset(xc - np.asarray(params.x0)[: f0.space.dim])
        xmask = np.sum(off * off, axis=1) < params.r**2
        region0 = xmask[:, None, None, None] & vmask[None]
    if not np.any(region0):
        raise ValueError("initial lower-bound region is empty on the grid")
    precondition_ok = bool(np.min(f0.values[region0]) >= params.delta * (1.0 - 1e-12))

    eps_grid = 2.0 * f0.velocity.spacing / params.r
    if eps_grid >= 1.0:
        raise ValueError("ball radius r is below twice the grid spacing; the grid slack is vacuous")
    floor = 0.5 * params.delta * (1.0 - eps_grid)
    min_margin = np.inf
    checked = 0
    for t, f in _snapshots(traj):
        if t > horizon:
            break
        mask = _region_masks(f, params, t, quarter=True)
        if not np.any(mask):
            continue
        vals = f.values[mask]
        checked += vals.size
        min_margin = min(min_margin, float(np.min(vals)) / floor)
    if checked == 0:
        raise ValueError("checked region is empty on the grid")
    passed = precondition_ok and min_margin >= 1.0
    return PositivityResult(passed, precondition_ok, horizon, min_margin, checked, floor)


@dataclass(frozen=True)
class VelocitySpreadResult:
    kappa_fit: float
    passed: bool
    band_ok: bool
    horizon: float
    checked_nodes: int


def velocity_spread_check(
    traj,
    params: SpreadParams,
    tau: float,
    horizon_c: float | None = None,
) -> VelocitySpreadResult:
    """Fit the smallest Gaussian rate kappa with f >= (delta/4) e^(-kappa |v-v0|^2 / t).

    The hypothesis band f >= delta on [0, tau] x B_r(x0) x B_r(v0) is
    re-verified on the grid; the bound is then fitted over x in
    B_(r/4)(x0 + t v0) and v in B_R(v0) for t up to min(tau, c r / R).
    """
    c_fit = frozen_constant("velocity_spread_horizon_c", horizon_c)
    horizon = min(tau, c_fit * params.r / params.big_r)
    snaps = _snapshots(traj)

    band_ok = True
    for t, f in snaps:
        if t > tau:
            break
        v1, v2, v3 = f.velocity.meshes()
        dv2 = (v1 - params.v0[0]) ** 2 + (v2 - params.v0[1]) ** 2 + (v3 - params.v0[2]) ** 2
        vmask = dv2 < params.r**2
        if f.space.dim == 0:
            region = vmask[None]
        else:
            xc = f.space.node_coords()[:, : f.space.dim]
            off = f.space.wrap_offset(xc - np.asarray(params.x0)[: f.space.dim])
            xmask = np.sum(off * off, axis=1) < params.r**2
            region = xmask[:, None, None, None] & vmask[None]
        if not np.any(region):
            raise ValueError("hypothesis band region is empty on the grid")
        if np.min(f.values[region]) < params.delta * (1.0 - 1e-12):
            band_ok = False

    kappa_fit = 0.0
    checked = 0
    quarter = params.delta / 4.0
    for t, f in snaps:
        if t <= 0 or t > horizon:
            continue
        v1, v2, v3 = f.velocity.meshes()
        s2 = (v1 - params.v0[0]) ** 2 + (v2 - params.v0[1]) ** 2 + (v3 - params.v0[2]) ** 2
        vmask = s2 < params.big_r**2
        if f.space.dim == 0:
            region = vmask[None]
        else:
            xc = f.space.node_coords()[:, : f.space.dim]
            target = np.asarray(params.x0)[: f.space.dim] + t * np.asarray(params.v0)[: f.space.dim]
            off = f.space.wrap_offset(xc - target)
            xmask = np.sum(off * off, axis=1) < (params.r / 4.0) ** 2
            region = xmask[:, None, None, None] & vmask[None]
        if not np.any(region):
            continue
        vals = f.values[region]
        s2r = np.broadcast_to(s2[None], region.shape)[region]
        checked += vals.size
        need = vals < quarter
        if np.any(need & (s2r < (0.5 * f.velocity.spacing) ** 2)):
            kappa_fit = np.inf
            break
        if np.any(need & (vals <= 0)):
            kappa_fit = np.inf
            break
        sel = need & (s2r >= (0.5 * f.velocity.spacing) ** 2)
        if np.any(sel):
            kappa_here = np.max(t * np.log(quarter / vals[sel]) / s2r[sel])
            kappa_fit = max(kappa_fit, float(kappa_here))
    passed = band_ok and checked > 0 and np.isfinite(kappa_fit)
    return VelocitySpreadResult(kappa_fit, passed, band_ok, horizon, checked)


@dataclass(frozen=True)
class CompositeSpreadReport:
    times: tuple[float, ...]
    eta: np.ndarray  # (n_times, n_x)
    v_nodes: np.ndarray  # (n_times, n_x, 3)
    big_r: np.ndarray  # (n_times,)
    window: tuple[float, float]
    passed: bool


def composite_spread_report(traj, r_prime: float, window: tuple[float, float] | None = None) -> CompositeSpreadReport:
    """Locate, per (t, x), the velocity ball where f is uniformly largest.

    eta(t, x) is the best min of f over r_prime balls of nodes, attained at
    v_x; R(t) = max_x |v_x|. Pass requires eta > 0 at every x for all
    snapshot times inside the window (default: second half of the run).
    The report is emitted even on failure.
    """
    from scipy.ndimage import minimum_filter

    snaps = _snapshots(traj)
    vel = snaps[0][1].velocity
    rad = max(1, int(round(r_prime / vel.spacing)))
    span = np.arange(-rad, rad + 1)
    z1, z2, z3 = np.meshgrid(span, span, span, indexing="ij")
    footprint = z1**2 + z2**2 + z3**2 <= rad**2

    if window is None:
        t_end = snaps[-1][0]
        window = (0.5 * t_end, t_end)

    times, etas, vxs, big_rs = [], [], [], []
    ax = vel.axis
    for t, f in snaps:
        per_x_eta = np.empty(f.space.count)
        per_x_v = np.empty((f.space.count, 3))
        for i in range(f.space.count):
            eroded = minimum_filter(f.values[i], footprint=footprint, mode="constant", cval=0.0)
            flat = int(np.argmax(eroded))
            idx = np.unravel_index(flat, eroded.shape)
            per_x_eta[i] = eroded[idx]
            per_x_v[i] = (ax[idx[0]], ax[idx[1]], ax[idx[2]])
        times.append(t)
        etas.append(per_x_eta)
        vxs.append(per_x_v)
        big_rs.append(float(np.max(np.linalg.norm(per_x_v, axis=1))))

    eta_arr = np.stack(etas)
    passed = True
    for k, t in enumerate(times):
        if window[0] <= t <= window[1] and np.min(eta_arr[k]) <= 0:
            passed = False
    return CompositeSpreadReport(tuple(times), eta_arr, np.stack(vxs), np.asarray(big_rs), window, passed)


@dataclass(frozen=True)
class GTrace:
    times: tuple[float, ...]
    values: tuple[float, ...]
    samples: list | None = None


def _sample_offsets(engine: qmc.Halton, count: int, dim: int, dx: float, dv: float):
    """Accepted (node_u, h, k) samples; offsets in the unit ball, above grid scale."""
    per_axis = 1 + 3 * (dim > 0) + 3
    need = count
    out_u, out_h, out_k = [], [], []
    while need > 0:
        draw = engine.random(max(4 * need, 64))
        u = draw[:, 0]
        col = 1
        if dim:
            h = 2.0 * draw[:, col : col + 3] - 1.0
            h[:, dim:] = 0.0
            col += 3
        else:
            h = np.zeros((len(draw), 3))
        k = 2.0 * draw[:, col : col + 3] - 1.0
        hn = np.linalg.norm(h, axis=1)
        kn = np.linalg.norm(k, axis=1)
        ok = (kn <= 1.0) & (kn >= 2.0 * dv)
        if dim:
            ok &= (hn <= 1.0) & (hn >= 2.0 * dx)
        out_u.append(u[ok])
        out_h.append(h[ok])
        out_k.append(k[ok])
        need = count - sum(len(a) for a in out_u)
    u = np.concatenate(out_u)[:count]
    h = np.concatenate(out_h)[:count]
    k = np.concatenate(out_k)[:count]
    return u, h, k


def finite_difference_sup(traj_or_fields, probe: HolderProbe, spec: WeightSpec, return_samples: bool = False) -> GTrace:
    """Sup of the weighted squared finite difference per snapshot.

    g = w(t, v) |f(x+h, v+k) - f(x, v)|^2 / (|h|^2 + |k|^2)^alpha over
    sampled base nodes and offsets in the unit ball; offsets below twice
    the grid spacing are rejected (they measure interpolation error, not
    regularity). Deterministic for a given probe seed.
    """
    if isinstance(traj_or_fields, PhaseField):
        snaps = [(traj_or_fields.t, traj_or_fields)]
    elif hasattr(traj_or_fields, "snapshots"):
        snaps = _snapshots(traj_or_fields)
    else:
        snaps = [(f.t, f) for f in traj_or_fields]
    f0 = snaps[0][1]
    dim = f0.space.dim
    n = f0.velocity.n
    dx = f0.space.spacing if dim else 0.0
    dv = f0.velocity.spacing

    times, sups, kept = [], [], []
    for t, f in snaps:
        if spec.rho - spec.sigma * t <= 0:
            raise ValueError("weight horizon exceeded along the trajectory")
        engine = qmc.Halton(d=7, scramble=True, seed=probe.seed)
        u, h, k = _sample_offsets(engine, probe.pair_count, dim, dx, dv)
        n_nodes = f.space.count * n**3
        flat = np.minimum((u * n_nodes).astype(int), n_nodes - 1)
        xi, vi = np.divmod(flat, n**3)
        ax = f.velocity.axis
        i1, rem = np.divmod(vi, n * n)
        i2, i3 = np.divmod(rem, n)
        v_base = np.stack([ax[i1], ax[i2], ax[i3]], axis=-1)
        x_base = f.space.node_coords()[xi][:, :dim] if dim else None
        f_base = f.values.reshape(-1)[flat]
        shifted = sample_field(f, (x_base + h[:, :dim]) if dim else None, v_base + k)
        w = weight_at_points(spec, np.full(len(flat), t), v_base)
        denom = (np.sum(h * h, axis=1) + np.sum(k * k, axis=1)) ** probe.alpha
        g = w * (shifted - f_base) ** 2 / denom
        times.append(t)
        sups.append(float(np.max(g)) if len(g) else 0.0)
        if return_samples:
            kept.append({"x": x_base, "v": v_base, "h": h, "k": k, "g": g, "f": f_base, "shifted": shifted})
    return GTrace(tuple(times), tuple(sups), kept if return_samples else None)


@dataclass(frozen=True)
class HolderPropagationResult:
    c0_fit: float
    passed: bool
    g0: float
    envelope_start: float
    mu: float
    nu: float


def holder_propagation_check(
    traj,
    probe: HolderProbe,
    spec: WeightSpec,
    mu: float | None = None,
    nu: float | None = None,
    c0_cap: float = 1e4,
) -> HolderPropagationResult:
    """Fit the smallest ODE rate constant whose envelope dominates g_sup(t).

    The envelope solves dG/dt = 2 c0 (G + t^(mu-1) G^(1+nu)) from
    G(0) = 1 + g_sup(0) + 4 sup_t (weighted sup of f)^2; the admissible
    set in c0 is scanned upward (blow-up bounds it above).
    """
    trace = finite_difference_sup(traj, probe, spec)
    g0 = trace.values[0]
    half = WeightSpec(rho=spec.rho / 2.0, sigma=0.0, beta=spec.beta)
    sup_wf = 0.0
    for t, f in _snapshots(traj):
        w = np.exp(half.rho * f.velocity.bracket() ** half.beta)
        sup_wf = max(sup_wf, float(np.max(w[None] * np.abs(f.values))))
    g_start = 1.0 + g0 + 4.0 * sup_wf**2
    mu_v = mu_exponent(probe.alpha) if mu is None else mu
    nu_v = nu_exponent(probe.alpha) if nu is None else nu

    t_pos = np.array([t for t in trace.times if t > 0])
    g_pos = np.array([g for t, g in zip(trace.times, trace.values) if t > 0])

    def admissible(c0: float) -> bool:
        if not len(t_pos):
            return True
        try:
            env = g_ode_envelope(GOdeParams(g0=g_start, c0=c0, mu=mu_v, nu=nu_v), t_pos)
        except BlowUpError:
            return False
        return bool(np.all(g_pos <= env * (1.0 + 1e-12)))

    if admissible(0.0):
        c0_fit = 0.0
    else:
        lo, hi = 0.0, 1e-3
        while not admissible(hi):
            hi *= 4.0
            if hi > c0_cap:
                return HolderPropagationResult(np.inf, False, g0, g_start, mu_v, nu_v)
        for _ in range(50):
            mid = 0.5 * (lo + hi)
            if admissible(mid):
                hi = mid
            else:
                lo = mid
        c0_fit = hi
    return HolderPropagationResult(c0_fit, np.isfinite(c0_fit), g0, g_start, mu_v, nu_v)


@dataclass(frozen=True)
class InterpolationResult:
    max_ratio: float
    ratios: tuple[float, ...]


def interpolation_ratio_check(fields, alpha: float, beta: float, rho0: float, rho1: float, probe: HolderProbe) -> InterpolationResult:
    """Sampled two-sided interpolation defect of the weighted seminorms.

    Compares the half-exponent seminorm at the mean weight against the
    geometric mean of the full-exponent seminorm at the light weight and
    the sup norm at the heavy weight.
    """
    if not rho1 >= rho0 >= 0:
        raise ValueError("need rho1 >= rho0 >= 0")
    if len(fields) == 0:
        raise ValueError("degenerate ensemble")
    mid = 0.5 * (rho0 + rho1)
    probe_half = HolderProbe(alpha=alpha / 2.0, pair_count=probe.pair_count, seed=probe.seed, metric=probe.metric)
    probe_full = HolderProbe(alpha=alpha, pair_count=probe.pair_count, seed=probe.seed, metric=probe.metric)
    w_mid = WeightSpec(rho=mid, beta=beta) if mid > 0 else None
    w_lo = WeightSpec(rho=rho0, beta=beta) if rho0 > 0 else None
    ratios = []
    for f in fields:
        lhs = holder_seminorm_estimate(f, probe_half, weight=w_mid)
        semi = holder_seminorm_estimate(f, probe_full, weight=w_lo)
        w1 = np.exp(rho1 * f.velocity.bracket() ** beta)
        sup1 = float(np.max(w1[None] * np.abs(f.values)))
        rhs = np.sqrt(semi * sup1)
        ratios.append(0.0 if rhs == 0 else lhs / rhs)
    return InterpolationResult(float(np.max(ratios)), tuple(ratios))


@dataclass(frozen=True)
class ConvolutionRatioResult:
    max_ratio: float
    ratios: tuple[float, ...]


def convolution_bound_ratio(fields, mu_power: float, spec: WeightSpec) -> ConvolutionRatioResult:
    """Weighted L2 defect of convolution against the power kernel |z|^mu.

    ratio = ||(h * |.|^mu) / sqrt(phi)||_2 / ||sqrt(phi) h||_2 at t = 0,
    with 0/0 read as 0.
    """
    from scipy.signal import fftconvolve

    if mu_power <= 0:
        raise ValueError("kernel power must be positive")
    ratios = []
    for f in fields:
        if f.space.dim != 0:
            raise ValueError("convolution bound is a velocity-only statement; use homogeneous fields")
        vel = f.velocity
        off = np.arange(-(vel.n - 1), vel.n) * vel.spacing
        z1, z2, z3 = np.meshgrid(off, off, off, indexing="ij")
        kernel = np.sqrt(z1**2 + z2**2 + z3**2) ** mu_power
        conv = fftconvolve(f.values[0], kernel, mode="same") * vel.cell_volume
        phi = np.exp(spec.rho * vel.bracket() ** spec.beta)
        num = np.sqrt(np.sum(conv**2 / phi) * vel.cell_volume)
        den = np.sqrt(np.sum(phi * f.values[0] ** 2) * vel.cell_volume)
        ratios.append(0.0 if den == 0 else float(num / den))
    return ConvolutionRatioResult(float(np.max(ratios)) if ratios else 0.0, tuple(ratios))


@dataclass(frozen=True)
class EnergyTrace:
    times: tuple[float, ...]
    values: tuple[float, ...]
    c_fit: float
    kappa: float
    identically_zero: bool


def weighted_energy_trace(traj_a, traj_b, spec: WeightSpec, kappa: float) -> EnergyTrace:
    """Weighted L2 energy of the difference field and its growth constant.

    E(t) = sum phi(t, v) (fA - fB)^2 cell_volume; the fitted constant is
    the smallest C with E(t) <= E(0) exp(C (t + t^(1+kappa))) over the
    shared snapshot times.
    """
    snaps_a, snaps_b = _snapshots(traj_a), _snapshots(traj_b)
    if len(snaps_a) != len(snaps_b):
        raise ValueError("trajectories have different snapshot counts")
    times, energies = [], []
    scale = 0.0
    for (ta, fa), (tb, fb) in zip(snaps_a, snaps_b):
        if abs(ta - tb) > 1e-10 * max(1.0, abs(ta)):
            raise ValueError("snapshot times differ")
        if not fa.same_grids(fb):
            raise ValueError("grid mismatch between trajectories")
        w = np.exp((spec.rho - spec.sigma * ta) * fa.velocity.bracket() ** spec.beta)
        diff = fa.values - fb.values
        energies.append(float(np.sum(w[None] * diff * diff)) * fa.cell_volume)
        times.append(ta)
        scale = max(scale, float(np.max(np.abs(fa.values))))
    e0 = energies[0]
    if e0 == 0.0:
        zero_ok = all(e <= 1e-20 * max(scale, 1.0) ** 2 for e in energies)
        return EnergyTrace(tuple(times), tuple(energies), 0.0, kappa, zero_ok)
    c_fit = 0.0
    for t, e in zip(times[1:], energies[1:]):
        if e > 0:
            c_fit = max(c_fit, np.log(e / e0) / (t + t ** (1.0 + kappa)))
    return EnergyTrace(tuple(times), tuple(energies), float(c_fit), kappa, False)
