import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from landau.weights import WeightSpec, bracket, suggested_velocity_radius, weight_eval


def fd_gradient(spec, t, v, step=1e-5):
    g = np.zeros(3)
    for i in range(3):
        vp, vm = np.array(v, float), np.array(v, float)
        vp[i] += step
        vm[i] -= step
        g[i] = (weight_eval(spec, t, vp) - weight_eval(spec, t, vm)) / (2 * step)
    return g


def fd_hessian(spec, t, v, step=1e-5):
    h = np.zeros((3, 3))
    for j in range(3):
        vp, vm = np.array(v, float), np.array(v, float)
        vp[j] += step
        vm[j] -= step
        gp = weight_eval(spec, t, vp, order=1)[1]
        gm = weight_eval(spec, t, vm, order=1)[1]
        h[:, j] = (gp - gm) / (2 * step)
    return 0.5 * (h + h.T)


def test_weight_at_origin_symmetry():
    spec = WeightSpec(rho=1.0, sigma=0.0, beta=1.0)
    phi, grad = weight_eval(spec, 0.0, (0, 0, 0), order=1)
    assert phi == pytest.approx(np.e)
    assert np.allclose(grad, 0.0)


def test_weight_horizon_boundary_rejected():
    spec = WeightSpec(rho=1.0, sigma=0.5, beta=1.0)
    with pytest.raises(ValueError):
        weight_eval(spec, 2.0, (1, 0, 0))
    # Just inside the horizon is fine.
    assert weight_eval(spec, 1.999, (0, 0, 0)) > 0


def test_weight_derivatives_match_finite_differences_reference_point():
    spec = WeightSpec(rho=0.7, sigma=0.1, beta=0.5)
    t, v = 1.0, np.array([1.0, 2.0, -1.0])
    phi, grad, hess = weight_eval(spec, t, v, order=2)
    assert np.allclose(grad, fd_gradient(spec, t, v), rtol=1e-6)
    assert np.allclose(hess, fd_hessian(spec, t, v), rtol=1e-6)
    assert np.allclose(hess, hess.T)


@settings(max_examples=80, deadline=None)
@given(
    rho=st.floats(0.2, 1.5),
    sigma=st.floats(0.0, 0.4),
    beta=st.floats(0.1, 1.0),
    t=st.floats(0.0, 1.0),
    v=st.tuples(st.floats(-2, 2), st.floats(-2, 2), st.floats(-2, 2)),
)
def test_weight_derivatives_match_finite_differences(rho, sigma, beta, t, v):
    spec = WeightSpec(rho=rho, sigma=sigma, beta=beta)
    if spec.rho - spec.sigma * t < 0.05:
        return
    phi, grad, hess = weight_eval(spec, t, v, order=2)
    assert np.allclose(grad, fd_gradient(spec, t, v), rtol=2e-5, atol=1e-8 * phi)
    assert np.allclose(hess, fd_hessian(spec, t, v), rtol=2e-4, atol=1e-6 * phi)


def test_bracket_values():
    assert bracket(np.zeros(3)) == 1.0
    assert bracket(np.array([1.0, 2.0, 2.0])) == pytest.approx(np.sqrt(10))


def test_spec_validation():
    with pytest.raises(ValueError):
        WeightSpec(rho=0.0)
    with pytest.raises(ValueError):
        WeightSpec(rho=1.0, beta=1.5)
    with pytest.raises(ValueError):
        WeightSpec(rho=1.0, sigma=-0.1)


def test_suggested_radius_reaches_floor():
    spec = WeightSpec(rho=0.5, sigma=0.0, beta=1.0)
    r = suggested_velocity_radius(spec)
    drop = np.exp(-spec.rho * (bracket(np.array([r, 0, 0])) ** spec.beta - 1.0))
    assert drop <= 1e-12 * 1.01
