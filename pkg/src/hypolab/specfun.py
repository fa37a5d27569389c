"""Orthogonal polynomials and the theta function used by the kernel series.

All polynomial evaluations go through three-term recurrences in the degree,
vectorised over the argument (and, for Jacobi, over the beta parameter so a
whole family ``P_m^{alpha, |k|}`` can be built in one sweep).
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import gammaln

from .errors import DomainError


@dataclass(frozen=True)
class JacobiParams:
    degree: int
    alpha: float
    beta: float

    def __post_init__(self):
        if int(self.degree) != self.degree or self.degree < 0:
            raise DomainError(f"Jacobi degree must be a nonnegative integer, got {self.degree}")
        if self.alpha <= -1 or self.beta <= -1:
            raise DomainError(f"Jacobi parameters must exceed -1, got ({self.alpha}, {self.beta})")


@dataclass(frozen=True)
class GegenbauerParams:
    degree: int
    order: float

    def __post_init__(self):
        if int(self.degree) != self.degree or self.degree < 0:
            raise DomainError(f"Gegenbauer degree must be a nonnegative integer, got {self.degree}")
        if self.order <= 0:
            raise DomainError(f"Gegenbauer order must be positive, got {self.order}")


@dataclass(frozen=True)
class ThetaArgs:
    t: float
    delta: float
    k_cutoff: int | None = None


def _check_unit_interval(x):
    x = np.asarray(x, dtype=float)
    if np.any(np.abs(x) > 1.0 + 1e-15):
        raise DomainError("argument must lie in [-1, 1]")
    return x


def jacobi_table(max_degree, alpha, beta, x):
    """Return ``P_m^{alpha,beta}(x)`` for ``m = 0..max_degree``.

    ``alpha``, ``beta`` and ``x`` broadcast against each other; the result has
    a leading axis of length ``max_degree + 1``. No domain check on ``x``: the
    polynomials are entire and callers that need continuation rely on that.
    """
    a = np.asarray(alpha, dtype=float)
    b = np.asarray(beta, dtype=float)
    x = np.asarray(x, dtype=float)
    shape = np.broadcast(a, b, x).shape
    out = np.empty((max_degree + 1,) + shape)
    out[0] = 1.0
    if max_degree == 0:
        return out
    out[1] = (a + 1) + (a + b + 2) * (x - 1) / 2
    ab = a + b
    ab2 = a * a - b * b
    for m in range(2, max_degree + 1):
        s = 2 * m + ab
        c0 = 2 * m * (m + ab) * (s - 2)
        c1 = (s - 1) * (s * (s - 2) * x + ab2)
        c2 = 2 * (m + a - 1) * (m + b - 1) * s
        out[m] = (c1 * out[m - 1] - c2 * out[m - 2]) / c0
    return out


def jacobi_p(params: JacobiParams, x):
    """Jacobi polynomial ``P_m^{alpha,beta}(x)`` on ``[-1, 1]``."""
    x = _check_unit_interval(x)
    val = jacobi_table(params.degree, params.alpha, params.beta, x)[params.degree]
    return float(val) if val.ndim == 0 else val


def log_jacobi_norm(m, alpha, beta):
    """Log of ``int_{-1}^1 P_m^2 (1-x)^alpha (1+x)^beta dx`` (vectorised)."""
    m = np.asarray(m, dtype=float)
    return ((alpha + beta + 1) * np.log(2.0) - np.log(2 * m + alpha + beta + 1)
            + gammaln(m + alpha + 1) + gammaln(m + beta + 1)
            - gammaln(m + 1) - gammaln(m + alpha + beta + 1))


def jacobi_norm(params: JacobiParams, fiber_weight_exponent=None):
    """Squared norm of ``P_m^{alpha,beta}`` in ``L^2((1-x)^alpha (1+x)^beta dx)``.

    In the Hopf setting ``alpha = n - 1`` and ``beta = |k|`` and this is
    ``2^{n+|k|} / (2m+|k|+n) * G(m+n) G(m+|k|+1) / (G(m+1) G(m+n+|k|))``.
    ``fiber_weight_exponent`` overrides ``beta`` when given.
    """
    beta = params.beta if fiber_weight_exponent is None else fiber_weight_exponent
    if beta <= -1:
        raise DomainError("weight exponent must exceed -1")
    return float(np.exp(log_jacobi_norm(params.degree, params.alpha, beta)))


def gegenbauer_table(max_degree, order, x):
    """``C_m^order(x)`` for ``m = 0..max_degree`` (entire in ``x``)."""
    x = np.asarray(x, dtype=float)
    out = np.empty((max_degree + 1,) + x.shape)
    out[0] = 1.0
    if max_degree == 0:
        return out
    out[1] = 2 * order * x
    for m in range(2, max_degree + 1):
        out[m] = (2 * x * (m + order - 1) * out[m - 1] - (m + 2 * order - 2) * out[m - 2]) / m
    return out


def gegenbauer_c(params: GegenbauerParams, x):
    """Gegenbauer polynomial ``C_m^nu(x)`` on ``[-1, 1]``."""
    x = _check_unit_interval(x)
    val = gegenbauer_table(params.degree, params.order, x)[params.degree]
    return float(val) if val.ndim == 0 else val


def log_gegenbauer_scaled(max_degree, order, x):
    """Logs of ``C_m^order(x)`` for ``x >= 1`` where every value is positive.

    The recurrence is run with periodic rescaling so arguments like
    ``cosh(40)`` do not overflow at high degree.
    """
    x = np.asarray(x, dtype=float)
    if np.any(x < 1.0):
        raise DomainError("scaled Gegenbauer evaluation needs x >= 1")
    out = np.empty((max_degree + 1,) + x.shape)
    out[0] = 0.0
    if max_degree == 0:
        return out
    prev = np.ones_like(x)
    cur = 2 * order * x
    logscale = np.zeros_like(x)
    out[1] = np.log(cur)
    for m in range(2, max_degree + 1):
        nxt = (2 * x * (m + order - 1) * cur - (m + 2 * order - 2) * prev) / m
        prev, cur = cur, nxt
        big = cur > 1e150
        if np.any(big):
            prev = np.where(big, prev * 1e-150, prev)
            cur = np.where(big, cur * 1e-150, cur)
            logscale = logscale + np.where(big, 150 * np.log(10.0), 0.0)
        out[m] = np.log(cur) + logscale
    return out


def theta_cutoff(t, rel_tol=1e-18):
    """Lattice half-width for ``theta_v`` so the first dropped image is negligible.

    The dominant image contributes ``~1``; image ``k`` contributes at most
    ``exp(-((2|k|-1) pi)^2 / 4t)`` for ``|delta| <= pi``.
    """
    k = 1
    while np.exp(-((2 * k - 1) * np.pi) ** 2 / (4 * t)) >= rel_tol:
        k += 1
    return k


def theta_v(args: ThetaArgs):
    """``V(t, delta) = (4 pi t)^{-1/2} sum_k exp(-(delta - 2 k pi)^2 / 4t)``."""
    t = args.t
    if t <= 0:
        raise DomainError("theta function needs t > 0")
    # reduce to [-pi, pi] first: V is 2 pi periodic and the cutoff assumes it
    delta = np.remainder(np.asarray(args.delta, dtype=float) + np.pi, 2 * np.pi) - np.pi
    kc = args.k_cutoff if args.k_cutoff is not None else theta_cutoff(t)
    k = np.arange(-kc, kc + 1).reshape((-1,) + (1,) * delta.ndim)
    terms = np.exp(-(delta - 2 * np.pi * k) ** 2 / (4 * t))
    # sum smallest first
    order = np.argsort(np.abs(k.ravel()))[::-1]
    val = terms[order].sum(axis=0) / np.sqrt(4 * np.pi * t)
    return float(val) if np.ndim(val) == 0 else val


@lru_cache(maxsize=None)
def _theta_stack(n):
    """Lambdified ``(-1/(2 pi sin d) d/dd)^n exp(-(d - c)^2 / 4t)``."""
    import sympy as sp

    d, c, t = sp.symbols("d c t", real=True)
    expr = sp.exp(-(d - c) ** 2 / (4 * t))
    for _ in range(n):
        expr = sp.simplify(-sp.diff(expr, d) / (2 * sp.pi * sp.sin(d)))
    return sp.lambdify((d, c, t), expr, "numpy")


def theta_stack(n, t, delta, k_cutoff=None):
    """``(-1/(2 pi sin delta) d/d delta)^n V(t, delta)`` for ``delta`` in ``(0, pi)``."""
    if t <= 0:
        raise DomainError("theta function needs t > 0")
    delta = np.asarray(delta, dtype=float)
    kc = k_cutoff if k_cutoff is not None else theta_cutoff(t) + 1
    fn = _theta_stack(n)
    total = np.zeros_like(delta)
    for k in sorted(range(-kc, kc + 1), key=abs, reverse=True):
        total = total + fn(delta, 2 * np.pi * k, t)
    val = total / np.sqrt(4 * np.pi * t)
    return float(val) if val.ndim == 0 else val
