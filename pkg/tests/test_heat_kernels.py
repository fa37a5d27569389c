import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hypolab.errors import DomainError, UnsupportedError
from hypolab.heat_kernels import (heisenberg_kernel, hopf_kernel_integral, hopf_kernel_series,
                                  hopf_quaternionic_relation, kernel_evaluator, kernel_mass,
                                  pde_residual, quaternionic_kernel_integral,
                                  quaternionic_kernel_series, series_exponents, sl2_heat_apply,
                                  sphere_kernel)
from hypolab.model_spaces import heisenberg, hopf, quaternionic, sphere_volume

from oracles import heisenberg_crank_nicolson, s3_heat_kernel


def test_heisenberg_origin_value():
    # n = 1, r = z = 0: (1/2pi^2) int lam / sinh(2 lam t) dlam, and int x/sinh x = pi^2/4
    for t in (0.25, 0.7):
        assert heisenberg_kernel(1, t, 0.0, 0.0).value == pytest.approx(1 / (32 * t * t), rel=1e-10)


def test_heisenberg_matches_pde_solver():
    pts = [(0.0, 0.0), (0.5, 0.3), (0.3, 0.8)]
    ref = heisenberg_crank_nicolson(1, 0.25, pts)
    got = np.array([heisenberg_kernel(1, 0.25, r, z).value for r, z in pts])
    np.testing.assert_allclose(got, ref, rtol=1e-3)


@settings(max_examples=15, deadline=None)
@given(s=st.floats(0.5, 2.0), r=st.floats(0.0, 1.5), z=st.floats(-1.0, 1.0))
def test_heisenberg_dilation(s, r, z):
    t = 0.4
    for n in (1, 2):
        lhs = heisenberg_kernel(n, s * s * t, s * r, s * s * z).value
        rhs = s ** (-(2 * n + 2)) * heisenberg_kernel(n, t, r, z).value
        assert lhs == pytest.approx(rhs, rel=1e-9)


def test_heisenberg_even_in_z():
    assert heisenberg_kernel(2, 0.3, 0.4, 0.7).value == pytest.approx(
        heisenberg_kernel(2, 0.3, 0.4, -0.7).value, rel=1e-14)


def test_heisenberg_rejects_bad_input():
    with pytest.raises(DomainError):
        heisenberg_kernel(1, 0.0, 0.1, 0.1)
    with pytest.raises(DomainError):
        heisenberg_kernel(1, 0.5, -0.1, 0.1)


@pytest.mark.parametrize("t,delta", [(0.05, 0.4), (0.3, 1.1), (1.0, 2.5)])
def test_s3_kernel_against_character_series(t, delta):
    assert sphere_kernel(1, t, delta=delta) == pytest.approx(s3_heat_kernel(t, delta), rel=1e-11)


@pytest.mark.parametrize("n", [1, 2, 3])
def test_sphere_forms_agree(n):
    for delta in (0.5, 1.3, 2.4):
        g = sphere_kernel(n, 0.2, delta=delta)
        th = sphere_kernel(n, 0.2, delta=delta, form="theta")
        assert th == pytest.approx(g, rel=1e-9)


def test_sphere_theta_form_domain():
    with pytest.raises(DomainError):
        sphere_kernel(1, 0.2, delta=0.0, form="theta")
    with pytest.raises(UnsupportedError):
        sphere_kernel(1, 0.2, delta=0.5, form="laplace")


@pytest.mark.parametrize("n,t,r,theta", [(1, 0.5, 0.6, 0.8), (1, 0.2, 0.3, 1.0), (2, 0.3, 1.0, 0.2)])
def test_hopf_series_vs_integral(n, t, r, theta):
    a = hopf_kernel_series(n, t, r, theta).value
    b = hopf_kernel_integral(n, t, r, theta).value
    assert a == pytest.approx(b, rel=1e-9)


@pytest.mark.parametrize("n,t,r,eta", [(1, 0.5, 0.6, 0.8), (1, 0.2, 1.0, 2.0), (2, 0.4, 0.3, 1.2)])
def test_quaternionic_series_vs_integral(n, t, r, eta):
    a = quaternionic_kernel_series(n, t, r, eta).value
    b = quaternionic_kernel_integral(n, t, r, eta).value
    assert a == pytest.approx(b, rel=1e-9)


def test_long_time_limit_is_uniform():
    assert hopf_kernel_series(1, 20.0, 0.6, 0.8).value == pytest.approx(1 / sphere_volume(3), rel=1e-12)
    assert quaternionic_kernel_series(1, 20.0, 0.6, 0.8).value == pytest.approx(
        1 / sphere_volume(7), rel=1e-12)


def test_hopf_even_in_fiber_angle_and_positive():
    for th in (0.3, 1.5, 3.0):
        a = hopf_kernel_series(1, 0.2, 0.7, th).value
        assert a > 0
        assert a == pytest.approx(hopf_kernel_series(1, 0.2, 0.7, -th).value, rel=1e-13)


@pytest.mark.parametrize("model", [heisenberg(1), hopf(1), quaternionic(1), hopf(2)])
def test_kernels_have_unit_mass(model):
    assert kernel_mass(model, 0.5) == pytest.approx(1.0, abs=1e-9)


@pytest.mark.parametrize("model", [heisenberg(1), hopf(1), quaternionic(1)])
def test_kernels_solve_heat_equation(model):
    ev = kernel_evaluator(model)
    p = ev(0.5, 0.6, 0.8)
    assert pde_residual(model, ev, 0.5, (0.6, 0.8)) < 1e-6 * max(p, 1.0)


def test_relation_between_fibrations():
    lhs, rhs, rel = hopf_quaternionic_relation(1, 0.5, 0.6, 0.8)
    assert rel < 1e-8
    with pytest.raises(DomainError):
        hopf_quaternionic_relation(1, 0.5, 0.6, 0.0)


def test_series_exponents():
    assert sorted(series_exponents(hopf(1), 1, 2))[:3] == [0, 2, 4]
    with pytest.raises(UnsupportedError):
        series_exponents(heisenberg(1), 2, 2)


def test_sl2_semigroup_preserves_constants():
    assert sl2_heat_apply(np.ones_like, 0.4, 0.9) == pytest.approx(1.0, rel=1e-10)
    assert sl2_heat_apply(np.ones_like, 0.4, 0.0) == pytest.approx(1.0, rel=1e-10)


@pytest.mark.parametrize("s", [0.5, 1.7, 3.0])
def test_sl2_spherical_functions_are_eigenfunctions(s):
    # sin(s r)/(s sinh r) has eigenvalue -(1 + s^2) for the radial Laplacian of hyperbolic 3-space
    phi = lambda r: np.sin(s * r) / (s * np.sinh(r))  # noqa: E731
    t, eta = 0.4, 0.9
    assert sl2_heat_apply(phi, t, eta) == pytest.approx(np.exp(-(1 + s * s) * t) * phi(eta), rel=1e-9)


def test_sl2_semigroup_property():
    f = lambda r: np.exp(-r * r)  # noqa: E731
    g = lambda r: np.array([sl2_heat_apply(f, 0.2, float(e)) for e in np.atleast_1d(r)])  # noqa: E731
    assert sl2_heat_apply(g, 0.3, 0.7) == pytest.approx(sl2_heat_apply(f, 0.5, 0.7), rel=1e-7)
