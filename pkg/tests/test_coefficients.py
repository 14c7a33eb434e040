import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from landau.coefficients import (
    CoefficientField,
    KernelParams,
    LowerBoundBall,
    compute_coefficients,
    divergence_identities_residual,
    ellipticity_report,
    kernel_matrix,
)
from landau.grids import PhaseField, SpatialGrid, VelocityGrid


def homogeneous_field(values_fn, n=8, radius=2.0, t=0.0):
    space = SpatialGrid(dim=0)
    vel = VelocityGrid(n=n, radius=radius)
    v1, v2, v3 = vel.meshes()
    return PhaseField(t, space, vel, values_fn(v1, v2, v3)[None])


def direct_coefficients(field, params):
    """Independent direct-sum quadrature of the three convolutions."""
    vel = field.velocity
    n = vel.n
    ax = vel.axis
    vol = vel.cell_volume
    f = field.values[0]
    a = np.zeros((n, n, n, 3, 3))
    b = np.zeros((n, n, n, 3))
    c = np.zeros((n, n, n))
    nodes = np.stack(np.meshgrid(ax, ax, ax, indexing="ij"), axis=-1)
    flat = nodes.reshape(-1, 3)
    fflat = f.reshape(-1)
    for idx in np.ndindex(n, n, n):
        v = nodes[idx]
        z = v[None, :] - flat
        r2 = np.sum(z * z, axis=1)
        r = np.sqrt(r2)
        rg = r**params.gamma
        a_loc = params.a0 * (
            (r ** (params.gamma + 2.0))[:, None, None] * np.eye(3)[None]
            - rg[:, None, None] * z[:, :, None] * z[:, None, :]
        )
        a[idx] = np.tensordot(fflat, a_loc, axes=1) * vol
        b[idx] = (fflat * rg) @ z * params.b0 * vol
        c[idx] = np.sum(fflat * rg) * params.c0 * vol
    return a, b, c


def test_kernel_params_identities():
    p = KernelParams(gamma=0.5)
    assert p.b0 == pytest.approx(2.0)
    assert p.c0 == pytest.approx(3.5 * 2.0)
    with pytest.raises(ValueError):
        KernelParams(gamma=0.5, b0=1.0)
    broken = KernelParams(gamma=0.5, b0=1.0, enforce_identities=False)
    assert broken.b0 == 1.0
    with pytest.raises(ValueError):
        KernelParams(gamma=1.5)


def test_kernel_matrix_hand_values():
    p = KernelParams(gamma=0.0)
    assert np.allclose(kernel_matrix((1, 0, 0), p), np.diag([0.0, 1.0, 1.0]))
    assert np.allclose(kernel_matrix((0, 0, 0), p), np.zeros((3, 3)))
    p1 = KernelParams(gamma=1.0)
    assert np.allclose(kernel_matrix((0, 2, 0), p1), np.diag([8.0, 0.0, 8.0]))


@settings(max_examples=60, deadline=None)
@given(
    z=st.tuples(st.floats(-3, 3), st.floats(-3, 3), st.floats(-3, 3)),
    gamma=st.floats(0.0, 1.0),
)
def test_kernel_matrix_psd_with_null_direction(z, gamma):
    m = kernel_matrix(z, KernelParams(gamma=gamma))
    eig = np.linalg.eigvalsh(m)
    assert eig.min() >= -1e-10 * max(1.0, eig.max())
    assert np.allclose(m @ np.asarray(z), 0.0, atol=1e-9 * max(1.0, np.max(np.abs(m))))


def test_zero_field_gives_zero_coefficients():
    f = homogeneous_field(lambda v1, v2, v3: np.zeros_like(v1))
    coeffs = compute_coefficients(f, KernelParams(gamma=1.0))
    assert np.all(coeffs.a == 0) and np.all(coeffs.b == 0) and np.all(coeffs.c == 0)


def test_fft_matches_direct_quadrature():
    rng = np.random.default_rng(2)
    vals = rng.random((8, 8, 8))
    f = homogeneous_field(lambda v1, v2, v3: vals, n=8)
    for gamma in (0.0, 0.5, 1.0):
        params = KernelParams(gamma=gamma)
        coeffs = compute_coefficients(f, params)
        a_d, b_d, c_d = direct_coefficients(f, params)
        scale = np.max(np.abs(a_d))
        for k, (i, j) in enumerate(((0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2))):
            assert np.allclose(coeffs.a[0, k], a_d[..., i, j], rtol=1e-10, atol=1e-10 * scale)
        assert np.allclose(np.moveaxis(coeffs.b[0], 0, -1), b_d, rtol=1e-10, atol=1e-10 * np.max(np.abs(b_d)))
        assert np.allclose(coeffs.c[0], c_d, rtol=1e-10, atol=1e-10 * np.max(np.abs(c_d)))


def test_gamma_zero_c_is_constant():
    rng = np.random.default_rng(4)
    vals = rng.random((8, 8, 8))
    f = homogeneous_field(lambda v1, v2, v3: vals, n=8)
    params = KernelParams(gamma=0.0)
    coeffs = compute_coefficients(f, params)
    expected = params.c0 * vals.sum() * f.velocity.cell_volume
    assert np.allclose(coeffs.c, expected, rtol=1e-12)


def test_gamma_zero_even_field_zero_drift_at_origin():
    f = homogeneous_field(lambda v1, v2, v3: np.exp(-(v1**2 + v2**2 + v3**2)), n=8)
    coeffs = compute_coefficients(f, KernelParams(gamma=0.0))
    # With an even field the drift is odd: at the 8 nodes nearest the origin
    # it is at the level of quadrature roundoff relative to the reaction term.
    c_scale = np.max(coeffs.c)
    mid = f.velocity.n // 2
    near = coeffs.b[0][:, mid - 1 : mid + 1, mid - 1 : mid + 1, mid - 1 : mid + 1]
    # b is linear in v near 0, so the nearest-node value is O(dv); compare
    # the odd-symmetry cancellation instead: b(v) + b(-v) = 0 exactly.
    b_full = coeffs.b[0]
    flipped = -b_full[:, ::-1, ::-1, ::-1]
    assert np.allclose(b_full, flipped, atol=1e-12 * c_scale)
    assert near.shape[0] == 3


def test_psd_at_every_node_for_nonnegative_field():
    rng = np.random.default_rng(7)
    vals = rng.random((6, 6, 6))
    space = SpatialGrid(dim=0)
    vel = VelocityGrid(n=6, radius=1.5)
    f = PhaseField(0.0, space, vel, vals[None])
    coeffs = compute_coefficients(f, KernelParams(gamma=1.0))
    mats = coeffs.matrices_at(np.arange(6**3))
    eig = np.linalg.eigvalsh(mats)
    assert eig.min() >= -1e-10 * eig.max()
    assert np.all(coeffs.c >= 0)


def smooth_bump(n, radius=2.0):
    space = SpatialGrid(dim=0)
    vel = VelocityGrid(n=n, radius=radius)
    v1, v2, v3 = vel.meshes()
    s2 = (v1**2 + v2**2 + v3**2) / 1.0
    vals = np.where(s2 < 1.0, np.exp(-1.0 / np.maximum(1.0 - s2, 1e-300)), 0.0)
    return PhaseField(0.0, space, vel, vals[None])


def test_divergence_identities_zero_field():
    f = homogeneous_field(lambda v1, v2, v3: np.zeros_like(v1))
    coeffs = compute_coefficients(f, KernelParams(gamma=1.0))
    assert divergence_identities_residual(coeffs) == (0.0, 0.0)


@pytest.mark.parametrize("gamma", [0.0, 1.0])
def test_divergence_identities_refinement_order(gamma):
    params = KernelParams(gamma=gamma)
    res = {}
    for n in (16, 32):
        coeffs = compute_coefficients(smooth_bump(n), params)
        res[n] = divergence_identities_residual(coeffs)
    for k in range(2):
        if res[16][k] > 1e-13:
            order = np.log2(res[16][k] / res[32][k])
            assert order >= 1.8, (gamma, k, res)


def test_divergence_identities_negative_control():
    # Breaking b0 = 2 a0 leaves an O(1) residual that does not shrink.
    bad = KernelParams(gamma=0.0, b0=1.0, enforce_identities=False)
    res = {}
    for n in (16, 32):
        coeffs = compute_coefficients(smooth_bump(n), bad)
        res[n] = divergence_identities_residual(coeffs)[0]
    assert res[32] > 0.5 * res[16]
    assert res[32] > 1e-3


def test_ellipticity_report_zero_field_fails():
    f = homogeneous_field(lambda v1, v2, v3: np.zeros_like(v1), n=12, radius=8.0)
    coeffs = compute_coefficients(f, KernelParams(gamma=0.0))
    rep = ellipticity_report(coeffs, LowerBoundBall(delta=0.5, r=1.0), f, gamma=0.0)
    assert not rep.passed
    assert rep.lambda0 == 0.0


@pytest.mark.slow
def test_ellipticity_ball_slopes_match_moment_expansion():
    # Indicator of the unit ball: parallel Rayleigh flattens (slope ~ gamma),
    # perpendicular grows like <v>^(gamma+2), on shells in [4, R_v/2].
    n, radius = 48, 16.0
    space = SpatialGrid(dim=0)
    vel = VelocityGrid(n=n, radius=radius)
    s2 = vel.speed_squared()
    vals = np.where(s2 < 1.0, 1.0, 0.0)[None]
    f = PhaseField(0.0, space, vel, vals)
    for gamma in (0.0, 1.0):
        coeffs = compute_coefficients(f, KernelParams(gamma=gamma))
        rep = ellipticity_report(coeffs, LowerBoundBall(delta=1.0, r=0.9), f, gamma=gamma)
        assert rep.hypothesis_ok
        assert rep.passed, rep
        assert abs(rep.slope_parallel - gamma) <= 0.15
        assert abs(rep.slope_perp - (gamma + 2.0)) <= 0.15
        assert rep.lambda0 > 0


@pytest.mark.slow
def test_maxwellian_perp_parallel_ratio_grows_quadratically():
    n, radius = 48, 16.0
    space = SpatialGrid(dim=0)
    vel = VelocityGrid(n=n, radius=radius)
    s2 = vel.speed_squared()
    f = PhaseField(0.0, space, vel, np.exp(-s2 / 2.0)[None])
    coeffs = compute_coefficients(f, KernelParams(gamma=0.0))
    rep = ellipticity_report(coeffs, LowerBoundBall(delta=0.3, r=1.0), f, gamma=0.0)
    radii = [s for s in rep.shell_radii if s >= 4.0]
    ratios = [q2 / q1 for s, q1, q2 in zip(rep.shell_radii, rep.q_parallel, rep.q_perp) if s >= 4.0]
    slope = np.polyfit(np.log(np.hypot(1.0, radii)), np.log(ratios), 1)[0]
    assert abs(slope - 2.0) <= 0.15
