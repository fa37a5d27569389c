from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hypolab.errors import ConventionError, DomainError
from hypolab.geometry_estimates import (DiameterInputs, LiYauConstants, bonnet_myers_diameter,
                                        cd_inequality_slack, d_alpha, gamma_intertwining_defect,
                                        harnack_check, liyau_general_slack, liyau_rhs_terms,
                                        liyau_slack, phi_diameter)
from hypolab.heat_kernels import heisenberg_kernel
from hypolab.model_spaces import Convention, HeisenbergCalculus, curvature_constants, hopf
from hypolab.poly import Poly

NAMES = ("x", "y", "z")


def test_d_alpha_arithmetic():
    # 2 * 4 * (1 + 3*1/(2*0.5)) / 4 = 8
    assert d_alpha(2, 1, 0.5, 3) == pytest.approx(8.0)
    with pytest.raises(DomainError):
        d_alpha(2, 1, 0.5, 2)


def test_heisenberg_liyau_constants():
    c = LiYauConstants.heisenberg(1)
    assert (c.n, c.kappa, c.rho1, c.rho2) == (2, 4, 0, 2)
    coef, const = liyau_rhs_terms(c, 0.5)
    # g = 1 + 3*4/(2*2) = 4, constant n (alpha-1)^2 g^2 / (8 (alpha-2) t) = 2*4*16/4
    assert coef == pytest.approx(4.0)
    assert const == pytest.approx(32.0)


def test_general_slack_with_curvature():
    c = LiYauConstants(alpha=3.0, n=2, kappa=1.0, rho1=1.0, rho2=2.0)
    g = 1 + 3 * 1 / (2 * 2)
    t = 0.7
    expected = ((g - 2 * t / 3) * (-1.0) + 2 * t / 6 - g + 2 * 4 * g * g / (8 * t)
                - (0.3 + 2 * 2 * t / 3 * 0.1))
    assert liyau_general_slack(c, t, 0.3, 0.1, -1.0) == pytest.approx(expected, rel=1e-14)


def test_radial_gamma_matches_frame():
    # on the x axis the frame gives Xf = f_r and Yf = r f_z for radial f
    cal = HeisenbergCalculus(1)
    f = cal.parse("(x**2 + y**2)**2 + 3*z")
    for r in (Fraction(1, 3), Fraction(2)):
        assert cal.gamma(f)(r, 0, 0) == 16 * r ** 6 + 9 * r ** 2


def test_liyau_gamma_against_cartesian_differences():
    n, s, t, (r, z) = 1, 0.2, 0.3, (0.5, 0.2)
    rec = liyau_slack(n, s, t, (r, z))
    p = lambda x, y, zz: heisenberg_kernel(n, s + t, np.hypot(x, y), zz).value  # noqa: E731
    h = 1e-4
    Xu = (p(r + h, 0, z) - p(r - h, 0, z)) / (2 * h)
    Yu = (p(r, h, z + r * h) - p(r, -h, z - r * h)) / (2 * h)
    Zu = (p(r, 0, z + h) - p(r, 0, z - h)) / (2 * h)
    u = p(r, 0, z)
    assert rec.gamma_log == pytest.approx((Xu ** 2 + Yu ** 2) / u ** 2, rel=1e-6)
    assert rec.gamma_v_log == pytest.approx(Zu ** 2 / u ** 2, rel=1e-6)


@pytest.mark.parametrize("t,point", [(0.3, (0.5, 0.2)), (5.0, (0.5, 0.2)), (0.6, (1.0, 0.5))])
def test_liyau_holds(t, point):
    assert liyau_slack(1, 0.2, t, point).slack > 0


def test_liyau_requires_flat_case():
    with pytest.raises(DomainError):
        liyau_slack(1, 0.2, 0.3, (0.5, 0.2), LiYauConstants(3.0, 2, 4, 1.0, 2))


@pytest.mark.parametrize("x,y", [(0.0, 0.0), (0.5, 0.0), (1.0, 0.0), (0.5, 1.0)])
def test_harnack_holds(x, y):
    rec = harnack_check(1, x, y, 0.3, 0.6)
    assert rec.slack > 0
    assert rec.distance == abs(x - y)
    with pytest.raises(DomainError):
        harnack_check(1, x, y, 0.6, 0.3)


def test_cd_slack_of_a_coordinate():
    # f = x: Gamma_2 = 1, Gamma_2^V = 0, L f = 0, Gamma = 1, Gamma^V = 0 -> kappa/eps
    f = Poly.parse("x", NAMES)
    assert cd_inequality_slack(f, (0, 0, 0), 1) == 4
    assert cd_inequality_slack(f, (0, 0, 0), Fraction(1, 2)) == 8


@settings(max_examples=25, deadline=None)
@given(coeffs=st.lists(st.integers(-3, 3), min_size=10, max_size=10),
       pt=st.tuples(*[st.integers(-4, 4)] * 3), eps=st.sampled_from([Fraction(1, 10), 1, 10]))
def test_cd_inequality_on_random_polynomials(coeffs, pt, eps):
    monos = ["1", "x", "y", "z", "x*y", "x*z", "y*z", "x**2", "y**2*z", "x*y*z"]
    f = Poly.parse(" + ".join(f"({c})*{m}" for c, m in zip(coeffs, monos)), NAMES)
    slack = cd_inequality_slack(f, tuple(Fraction(v, 4) for v in pt), eps)
    assert isinstance(slack, Fraction)
    assert slack >= 0


def test_cd_slack_rejects_wrong_convention():
    with pytest.raises(ConventionError):
        cd_inequality_slack(Poly.parse("x", NAMES), (0, 0, 0), 1,
                            curvature_constants(hopf(1), Convention.LICHNE_FULL))
    with pytest.raises(DomainError):
        cd_inequality_slack(Poly.parse("x", NAMES), (0, 0, 0), 0)


def test_gamma_intertwining():
    assert gamma_intertwining_defect(Poly.parse("x**2*z + y**3 - x*y*z**2", NAMES)).is_zero()


def test_phi_integral():
    val, closed = phi_diameter(1.0, 1.0)
    assert val == pytest.approx(8.885766, abs=1e-6)
    assert closed == pytest.approx(2 * np.pi * np.sqrt(2))
    for a, D in [(0.5, 3.0), (2.0, 0.7)]:
        v, c = phi_diameter(a, D)
        assert v == pytest.approx(c, rel=1e-10)


@settings(max_examples=30, deadline=None)
@given(r1=st.floats(0.1, 10), r2=st.floats(0.1, 10), k=st.floats(0, 10), n=st.integers(1, 8))
def test_bonnet_myers_forms_agree(r1, r2, k, n):
    b = bonnet_myers_diameter(DiameterInputs(r1, r2, k, n))
    assert b.general == pytest.approx(b.beta3, rel=1e-12)


def test_bonnet_myers_flat_fiber_reduction():
    b = bonnet_myers_diameter(DiameterInputs(2.0, 1.0, 0.0, 3))
    assert b.beta3 == pytest.approx(2 * np.sqrt(3) * np.pi * np.sqrt(3 / 2.0))
    with pytest.raises(DomainError):
        DiameterInputs(0.0, 1.0, 0.0, 3)
