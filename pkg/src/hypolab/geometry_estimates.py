"""Li-Yau, Harnack, curvature-dimension and diameter estimates.

The Li-Yau and Harnack checks use the Heisenberg heat kernel itself as the
solution ``u = P_t p_s = p_{t+s}``, so every quantity is radial and available
by quadrature.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np
from scipy import integrate

from .errors import DomainError
from .heat_kernels import heisenberg_kernel
from .model_spaces import (Convention, CurvatureConstants, HeisenbergCalculus, apply_radial,
                           curvature_constants, heisenberg, radial_operator)
from .poly import Poly


@dataclass(frozen=True)
class LiYauConstants:
    alpha: float
    n: int  # horizontal dimension
    kappa: float
    rho1: float
    rho2: float

    def __post_init__(self):
        if not self.alpha > 2:
            raise DomainError("alpha must exceed 2")
        if not self.rho2 > 0:
            raise DomainError("rho2 must be positive")

    @classmethod
    def heisenberg(cls, n=1, alpha=3.0):
        c = curvature_constants(heisenberg(n), Convention.CD_QUARTER)
        return cls(alpha, c.horizontal_dim, c.kappa, c.rho1, c.rho2)


@dataclass(frozen=True)
class DiameterInputs:
    rho1: float
    rho2: float
    kappa: float
    n: int
    beta: float = 3.0

    def __post_init__(self):
        if not (self.rho1 > 0 and self.rho2 > 0 and self.kappa >= 0 and self.n >= 1):
            raise DomainError("need rho1 > 0, rho2 > 0, kappa >= 0, n >= 1")
        if not self.beta > 2:
            raise DomainError("beta must exceed 2")


def d_alpha(n, kappa, rho2, alpha):
    """``n (alpha-1)^2 (1 + alpha kappa/((alpha-1) rho2)) / (4 (alpha-2))``."""
    if not alpha > 2:
        raise DomainError("alpha must exceed 2")
    if not rho2 > 0:
        raise DomainError("rho2 must be positive")
    return n * (alpha - 1) ** 2 * (1 + alpha * kappa / ((alpha - 1) * rho2)) / (4 * (alpha - 2))


def liyau_rhs_terms(c: LiYauConstants, t):
    """Coefficient of ``L u / u`` and the constant term of the general estimate."""
    a, n = c.alpha, c.n
    g = 1 + a * c.kappa / ((a - 1) * c.rho2)
    coef = g - 2 * c.rho1 * t / a
    const = (n * c.rho1 ** 2 * t / (2 * a) - c.rho1 * n * g / 2
             + n * (a - 1) ** 2 * g ** 2 / (8 * (a - 2) * t))
    return coef, const


def liyau_general_slack(c: LiYauConstants, t, gamma_log, gamma_v_log, lap_over_u):
    """RHS - LHS of the Li-Yau estimate with ``rho1`` allowed nonzero.

    Inputs are the pointwise values ``Gamma(ln u)``, ``Gamma^V(ln u)`` and
    ``L u / u``; with ``rho1 = 0`` this reduces to the simplified form.
    """
    coef, const = liyau_rhs_terms(c, t)
    lhs = gamma_log + 2 * c.rho2 * t / c.alpha * gamma_v_log
    return coef * lap_over_u + const - lhs


def _richardson_d1(f, x, h):
    d = lambda hh: (f(x + hh) - f(x - hh)) / (2 * hh)  # noqa: E731
    return d(h / 2) + (d(h / 2) - d(h)) / 3


@dataclass(frozen=True)
class LiYauRecord:
    slack: float
    gamma_log: float
    gamma_v_log: float
    lap_over_u: float
    u: float


def liyau_slack(n, s, t, point, c: LiYauConstants | None = None) -> LiYauRecord:
    """Li-Yau slack on the Heisenberg group for ``u = p_{s+t}`` at ``point = (r, z)``.

    Radial derivatives: ``Gamma(f) = f_r^2 + r^2 f_z^2``, ``Gamma^V(f) = f_z^2``.
    First derivatives are central differences with step ``1e-3`` relative,
    extrapolated once; the sub-Laplacian goes through ``apply_radial``.
    """
    c = c or LiYauConstants.heisenberg(n)
    if c.rho1 != 0:
        raise DomainError("the Heisenberg check is the rho1 = 0 estimate")
    r, z = point
    T = s + t
    u = lambda a, b: heisenberg_kernel(n, T, a, b).value  # noqa: E731
    u0 = u(r, z)
    hr = max(1e-4, 1e-3 * abs(r))
    hz = max(1e-4, 1e-3 * abs(z))
    ur = _richardson_d1(lambda a: u(a, z), r, hr)
    uz = _richardson_d1(lambda b: u(r, b), z, hz)
    lap = apply_radial(radial_operator(heisenberg(n)), u, (r, z))
    g = (ur * ur + r * r * uz * uz) / u0 ** 2
    gv = uz * uz / u0 ** 2
    slack = liyau_general_slack(c, t, g, gv, lap / u0)
    return LiYauRecord(float(slack), float(g), float(gv), float(lap / u0), float(u0))


@dataclass(frozen=True)
class HarnackRecord:
    slack: float
    lhs: float
    rhs: float
    distance: float


def harnack_check(n, x, y, s, t, alpha=3.0) -> HarnackRecord:
    """``u(y,t) (t/s)^{D/2} exp(D d^2 / (4 n (t-s))) - u(x,s)`` on the ``x_1`` axis.

    ``u`` is the heat kernel from the origin and ``n`` in the exponent is the
    horizontal dimension. Horizontal lines through the origin are geodesics,
    so ``d(x, y) = |x - y|`` exactly for axis points.
    """
    if not s < t:
        raise DomainError("need s < t")
    c = LiYauConstants.heisenberg(n, alpha)
    D = d_alpha(c.n, c.kappa, c.rho2, alpha)
    d = abs(x - y)
    lhs = heisenberg_kernel(n, s, abs(x), 0.0).value
    rhs = heisenberg_kernel(n, t, abs(y), 0.0).value * (t / s) ** (D / 2) * np.exp(
        D * d * d / (4 * c.n * (t - s)))
    return HarnackRecord(float(rhs - lhs), float(lhs), float(rhs), d)


def _as_fraction(v):
    if isinstance(v, Fraction):
        return v
    if isinstance(v, float):
        return Fraction(repr(v))
    return Fraction(v)


def cd_inequality_slack(f: Poly, point, epsilon, c: CurvatureConstants | None = None):
    """``Gamma_2 + eps Gamma_2^V - (1/n)(L f)^2 - (rho1 - kappa/eps) Gamma - rho2 Gamma^V``.

    Evaluated exactly on the Heisenberg group; returns a ``Fraction``.
    """
    if c is None:
        c = curvature_constants(heisenberg(max(1, len(f.names) // 2)), Convention.CD_QUARTER)
    c.require(Convention.CD_QUARTER)
    eps = _as_fraction(epsilon)
    if eps <= 0:
        raise DomainError("epsilon must be positive")
    g2, g2v, lap, g, gv = _cd_components(f, c.horizontal_dim // 2)
    rho1, kappa, rho2 = (_as_fraction(v) for v in (c.rho1, c.kappa, c.rho2))
    x = tuple(point)
    return (g2(x) + eps * g2v(x) - lap(x) ** 2 / c.horizontal_dim
            - (rho1 - kappa / eps) * g(x) - rho2 * gv(x))


@lru_cache(maxsize=256)
def _cd_components(f: Poly, n):
    # the polynomials do not depend on epsilon, so sweeps over it reuse them
    cal = HeisenbergCalculus(n)
    return cal.gamma2(f), cal.gamma2_v(f), cal.lap_h(f), cal.gamma(f), cal.gamma_v(f)


def gamma_intertwining_defect(f: Poly, n=1):
    """``Gamma(f, Gamma^V f) - Gamma^V(f, Gamma f)`` as an exact polynomial."""
    cal = HeisenbergCalculus(n)
    return cal.gamma(f, cal.gamma_v(f)) - cal.gamma_v(f, cal.gamma(f))


@lru_cache(maxsize=None)
def _phi_second_derivative():
    import sympy as sp

    x, a, D = sp.symbols("x alpha D", positive=True)
    c = 2 / (a * D)
    phi = D * ((1 + c * x) * sp.log(1 + c * x) - c * x * sp.log(c * x))
    return sp.lambdify((x, a, D), sp.simplify(sp.diff(phi, x, 2)), "math")


def phi_diameter(alpha, D):
    """``-2 int_0^inf sqrt(x) Phi''(x) dx`` by adaptive quadrature, and ``2 pi sqrt(2D/alpha)``.

    ``Phi''`` comes from symbolic differentiation of ``Phi``; the substitution
    ``x = u^2`` removes the ``x^{-1/2}`` endpoint singularity.
    """
    if not (alpha > 0 and D > 0):
        raise DomainError("alpha and D must be positive")
    d2 = _phi_second_derivative()
    val, _ = integrate.quad(lambda u: -4 * u * u * d2(u * u, alpha, D) if u > 0 else 8 / alpha,
                            0, np.inf, epsabs=0, epsrel=1e-13, limit=200)
    return float(val), float(2 * np.pi * np.sqrt(2 * D / alpha))


@dataclass(frozen=True)
class DiameterBounds:
    general: float
    beta3: float
    beta: float


def bonnet_myers_diameter(inp: DiameterInputs) -> DiameterBounds:
    """Diameter bound for general ``beta`` and the closed ``beta = 3`` form."""
    r1, r2, k, n, b = inp.rho1, inp.rho2, inp.kappa, inp.n, inp.beta
    general = np.pi * (1 + k / r2) * np.sqrt(n / r1) * np.sqrt(
        b * (b - 1) / (b - 2) * (b - r2 / (r2 + k)))
    beta3 = 2 * np.sqrt(3) * np.pi * np.sqrt((r2 + k) / (r1 * r2) * (1 + 3 * k / (2 * r2)) * n)
    return DiameterBounds(float(general), float(beta3), b)
