"""Explicit horizontal heat kernels of the three model foliations.

Every kernel is a density with respect to the symmetric measure of
``model_spaces.measure_density`` and is evaluated in the radial chart
``(r, fiber)`` with the fiber coordinate ``z`` (Heisenberg), ``theta`` (Hopf)
or ``eta`` (quaternionic Hopf).

Two independent routes exist for the sphere fibrations: a Jacobi spectral
series and a one-dimensional integral of the Riemannian sphere kernel over
the fiber variable. The integral needs the sphere kernel at arguments above 1,
which is handled by continuing its Gegenbauer series (an entire function)
and certifying convergence with a term-ratio test.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.special import gammaln, logsumexp

from .errors import AccuracyError, DomainError, UnsupportedError
from .model_spaces import Kind, ModelSpace, apply_radial, measure_density, radial_operator, sphere_volume
from .specfun import gegenbauer_table, jacobi_table, log_gegenbauer_scaled, theta_stack

LOG_TINY = np.log(1e-18)


@dataclass(frozen=True)
class SeriesTruncation:
    """Double-sum truncation. ``None`` sizes are chosen from the tail bound."""

    max_m: int | None = None
    max_k: int | None = None
    tail_tolerance: float = 1e-13


@dataclass(frozen=True)
class QuadratureSpec:
    """Composite Gauss-Legendre rule on ``[0, cutoff]``.

    ``cutoff`` and ``panel_width`` default to values derived from the
    integrand (envelope below ``1e-18`` of its peak; a panel never spans more
    than half an oscillation). The error estimate is the change when the
    panel count is doubled; ``tolerance`` is relative to the result.
    """

    cutoff: float | None = None
    order: int = 20
    panel_width: float | None = None
    tolerance: float = 1e-10


@dataclass
class KernelEvaluation:
    value: float
    t: float
    point: tuple
    method: str
    error_estimate: float
    meta: dict = field(default_factory=dict)

    def __float__(self):
        return float(self.value)


def _check_t(t):
    if not t > 0:
        raise DomainError(f"time must be positive, got {t}")


# quadrature plumbing ---------------------------------------------------------

@lru_cache(maxsize=None)
def _gauss(order):
    return np.polynomial.legendre.leggauss(order)


def panel_rule(a, b, width, order=20):
    """Nodes and weights of ``order``-point Gauss-Legendre on equal panels."""
    npan = max(1, int(np.ceil((b - a) / width)))
    edges = np.linspace(a, b, npan + 1)
    x, w = _gauss(order)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    nodes = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    return nodes, weights


def _integrate_twice(fn, a, b, width, order):
    """Integrate with ``width`` and ``width/2``; return (fine, |fine - coarse|)."""
    x1, w1 = panel_rule(a, b, width, order)
    x2, w2 = panel_rule(a, b, width / 2, order)
    coarse = np.tensordot(fn(x1), w1, axes=([-1], [0]))
    fine = np.tensordot(fn(x2), w2, axes=([-1], [0]))
    return fine, np.abs(fine - coarse)


# Heisenberg ------------------------------------------------------------------

def log_x_over_sinh(x):
    """``log(x / sinh x)`` for ``x >= 0`` without overflow or cancellation."""
    x = np.abs(np.asarray(x, dtype=float))
    small = x < 1e-4
    xs = np.where(small, 1.0, x)
    big = np.log(2 * xs) - xs - np.log1p(-np.exp(-2 * xs))
    return np.where(small, -x * x / 6, big)


def x_coth(x):
    """``x coth x`` with the value 1 at the origin."""
    x = np.asarray(x, dtype=float)
    small = np.abs(x) < 1e-4
    xs = np.where(small, 1.0, x)
    return np.where(small, 1 + x * x / 3, xs / np.tanh(xs))


def _heis_log_envelope(n, t, r, lam):
    a = 2 * lam * t
    return n * log_x_over_sinh(a) - n * np.log(2 * t) - (r * r / (4 * t)) * x_coth(a)


def heisenberg_cutoff(n, t, r=0.0, rel=1e-18):
    """Smallest power-of-two multiple of ``1/t`` where the envelope is ``rel`` of its peak."""
    peak = _heis_log_envelope(n, t, r, 0.0)
    lam = 1.0 / t
    while _heis_log_envelope(n, t, r, lam) - peak > np.log(rel):
        lam *= 1.25
    return lam


def _heis_matrix(n, t, r, z, quad: QuadratureSpec):
    """Kernel on the outer grid ``r x z`` (both 1D) with an error estimate."""
    r = np.atleast_1d(np.asarray(r, dtype=float))
    z = np.atleast_1d(np.asarray(z, dtype=float))
    lam_max = quad.cutoff or heisenberg_cutoff(n, t, float(r.min()))
    zmax = float(np.max(np.abs(z)))
    width = quad.panel_width or min(np.pi / max(zmax, 1e-12), 1.0 / (n * t), lam_max / 8)
    pref = 2.0 / (2 * np.pi) ** (n + 1)

    def integrand(lam):
        # shape (nz, nr, nlam): cos(lam z) times the Mehler factor
        env = np.exp(_heis_log_envelope(n, t, r[:, None], lam[None, :]))
        return np.cos(z[:, None, None] * lam[None, None, :]) * env[None, :, :]

    def quadrature(w_):
        x, w = panel_rule(0.0, lam_max, w_, quad.order)
        env = np.exp(_heis_log_envelope(n, t, r[:, None], x[None, :]))  # (nr, nl)
        cz = np.cos(z[:, None] * x[None, :]) * w[None, :]  # (nz, nl)
        return cz @ env.T  # (nz, nr)

    fine = quadrature(width / 2)
    coarse = quadrature(width)
    tail = np.exp(_heis_log_envelope(n, t, r, lam_max)) / (2 * n * t)
    err = np.abs(fine - coarse) + tail[None, :]
    return pref * fine, pref * err


def heisenberg_kernel(n, t, r, z, quad: QuadratureSpec | None = None) -> KernelEvaluation:
    """Heisenberg horizontal heat kernel at ``(r, z)`` from the origin.

    ``(2/(2 pi)^{n+1}) int_0^inf cos(lam z) (lam / sinh 2 lam t)^n
    exp(-(lam r^2 / 2) coth 2 lam t) dlam``, density w.r.t. Lebesgue measure
    on ``R^{2n+1}``.
    """
    _check_t(t)
    if r < 0:
        raise DomainError("radial coordinate must be nonnegative")
    quad = quad or QuadratureSpec()
    val, err = _heis_matrix(n, t, r, z, quad)
    value, error = float(val[0, 0]), float(err[0, 0])
    if error > quad.tolerance * abs(value) and error > 1e-300:
        raise AccuracyError(f"lambda quadrature error {error:.3g} exceeds tolerance "
                            f"for |p|={abs(value):.3g}; refine the panels")
    return KernelEvaluation(value, t, (r, z), "integral", error,
                            {"cutoff": quad.cutoff or heisenberg_cutoff(n, t, r), "order": quad.order})


# Riemannian sphere kernel ----------------------------------------------------

def _sphere_log_coeffs(nu, t, max_m):
    m = np.arange(max_m + 1)
    return (gammaln(nu) - np.log(2.0) - (nu + 1) * np.log(np.pi)
            + np.log(m + nu) - m * (m + 2 * nu) * t)


def _log_gegenbauer_at_one(m, nu):
    return gammaln(m + 2 * nu) - gammaln(2 * nu) - gammaln(m + 1)


def sphere_truncation(nu, t, tol=1e-16):
    """Degree where the bound ``sum_{m>M} (m+nu) C_m(1) e^{-m(m+2nu)t}`` drops below ``tol/mu``."""
    log_ref = _sphere_log_coeffs(nu, t, 0)[0]
    m = 1
    while True:
        lb = _sphere_log_coeffs(nu, t, m)[m] + _log_gegenbauer_at_one(m, nu)
        if lb - log_ref < np.log(tol) - 5 and m * t > 0.5:
            return m
        m += 1


def _sphere_tail_bound(nu, t, max_m):
    m = np.arange(max_m + 1, max_m + 200)
    lc = (gammaln(nu) - np.log(2.0) - (nu + 1) * np.log(np.pi) + np.log(m + nu)
          - m * (m + 2 * nu) * t + _log_gegenbauer_at_one(m, nu))
    return float(np.exp(logsumexp(lc)))


def sphere_log_abs(nu, t, x, max_m):
    """``log|q_t(x)|`` and ``sign q_t(x)`` on ``S^{2 nu + 1}`` for any ``x >= -1``.

    Arguments above 1 use the scaled positive recurrence and ``logsumexp``.
    The continuation is accepted only if the last retained term is below
    ``1e-17`` of the largest and the terms are decreasing there.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    lc = _sphere_log_coeffs(nu, t, max_m)
    logabs = np.empty(x.shape)
    sign = np.ones(x.shape)
    inside = x <= 1.0
    if inside.any():
        val = np.tensordot(np.exp(lc), gegenbauer_table(max_m, nu, x[inside]), axes=1)
        logabs[inside] = np.log(np.abs(val))
        sign[inside] = np.sign(val)
    if (~inside).any():
        terms = log_gegenbauer_scaled(max_m, nu, x[~inside]) + lc[:, None]
        top = terms.max(axis=0)
        last = terms[-1]
        if np.any(last - top > np.log(1e-17)) or np.any(terms[-1] > terms[-2]):
            raise AccuracyError(
                f"continued sphere series not converged at degree {max_m} for "
                f"x up to {float(x.max()):.4g}; the argument is too large for this truncation")
        logabs[~inside] = logsumexp(terms, axis=0)
    return logabs, sign


def _continuation_degree(nu, t, x_max):
    u = float(np.arccosh(max(x_max, 1.0)))
    return int(np.ceil(u / t + np.sqrt(60.0 / t))) + 40


def sphere_kernel(n, t, cos_delta=None, form="gegenbauer", delta=None,
                  max_m=None, tail_tolerance=1e-14):
    """Riemannian heat kernel of ``S^{2n+1}`` at angular distance ``delta``.

    ``form="gegenbauer"``: ``G(n)/(2 pi^{n+1}) sum (m+n) e^{-m(m+2n)t} C_m^n(cos delta)``.
    ``form="theta"``: ``e^{n^2 t} (-1/(2 pi sin delta) d/d delta)^n V(t, delta)``,
    which needs ``delta`` away from 0 and pi.
    """
    _check_t(t)
    if form == "theta":
        if delta is None:
            if cos_delta is None or abs(cos_delta) > 1:
                raise DomainError("theta form needs delta or |cos_delta| <= 1")
            delta = float(np.arccos(cos_delta))
        if not 1e-3 <= delta <= np.pi - 1e-3:
            raise DomainError("theta form needs delta in [1e-3, pi - 1e-3]")
        if int(n) != n:
            raise UnsupportedError("theta form is only available for integer n")
        return float(np.exp(n * n * t) * theta_stack(int(n), t, delta))
    if form != "gegenbauer":
        raise UnsupportedError(f"unknown form {form!r}")
    if cos_delta is None:
        cos_delta = float(np.cos(delta))
    if abs(cos_delta) > 1 + 1e-15:
        raise DomainError("gegenbauer form needs |cos_delta| <= 1; "
                          "use sphere_log_abs for the continuation")
    cos_delta = float(np.clip(cos_delta, -1.0, 1.0))
    mm = max_m or sphere_truncation(n, t, tail_tolerance)
    tail = _sphere_tail_bound(n, t, mm)
    lc = _sphere_log_coeffs(n, t, mm)
    val = float(np.dot(np.exp(lc), gegenbauer_table(mm, n, cos_delta)))
    if tail > tail_tolerance * max(abs(val), 1.0 / sphere_volume(2 * n + 1)):
        raise AccuracyError(f"sphere series tail {tail:.3g} above tolerance; raise max_m")
    return val


# Hopf fibration --------------------------------------------------------------

def hopf_rates(n, m, k):
    """``lambda_{m,k} = 4m(m+|k|+n) + 2|k|n`` (exact for integer input)."""
    k = np.abs(k)
    return 4 * m * (m + k + n) + 2 * k * n


def quaternionic_rates(n, k, m):
    """``lambda_{k,m} = 4k(k+2n+m+1) + 4nm``; see ``notes`` in the README."""
    return 4 * k * (k + 2 * n + m + 1) + 4 * n * m


def _log_binom(a, b):
    return gammaln(a + 1) - gammaln(b + 1) - gammaln(a - b + 1)


def _hopf_log_bound(n, t, r, m, k):
    """Log of a bound on |term (m, +-k)| (both signs of k together)."""
    q = np.maximum(n - 1, k)
    logcos = np.log(np.cos(r)) if r < np.pi / 2 else -np.inf
    kpart = np.where(k > 0, k * logcos + np.log(2.0), 0.0)
    return (gammaln(n) - np.log(2.0) - (n + 1) * np.log(np.pi)
            + np.log(2 * m + k + n) + _log_binom(m + k + n - 1, n - 1)
            + _log_binom(m + q, m) - hopf_rates(n, m, k) * t + kpart)


def _quat_log_bound(n, t, r, k, m):
    q = np.maximum(2 * n - 1, m + 1)
    logcos = np.log(np.cos(r)) if r < np.pi / 2 else -np.inf
    mpart = np.where(m > 0, m * logcos, 0.0)
    return (_quat_log_alpha(n, k, m) + _log_binom(k + q, k) + np.log(m + 1.0)
            - quaternionic_rates(n, k, m) * t + mpart)


def _quat_log_alpha(n, k, m):
    return (gammaln(2 * n) - np.log(2.0) - (2 * n + 2) * np.log(np.pi)
            + np.log(2 * k + m + 2 * n + 1) + np.log(m + 1.0)
            + _log_binom(k + m + 2 * n, 2 * n - 1))


def _choose_box(log_bound, tol_abs, start=(8, 8)):
    """Pick ``(A, B)`` so the bound summed outside ``[0..A] x [0..B]`` is below ``tol_abs``.

    ``log_bound(i, j)`` broadcasts over index arrays. A search box is grown
    until its outer rows and columns are ``e^{-30}`` below ``tol_abs``; the
    dropped mass inside the box is the returned tail estimate.
    """
    a_big, b_big = start
    target = np.log(tol_abs) - 30
    for _ in range(60):
        i = np.arange(a_big + 1)[:, None]
        j = np.arange(b_big + 1)[None, :]
        lb = log_bound(i, j)
        grow = False
        if lb[-1].max() > target or (a_big > 2 and lb[-1].max() > lb[-2].max()):
            a_big = int(a_big * 1.5) + 1
            grow = True
        if lb[:, -1].max() > target or (b_big > 2 and lb[:, -1].max() > lb[:, -2].max()):
            b_big = int(b_big * 1.5) + 1
            grow = True
        if not grow:
            break
    else:
        raise AccuracyError("could not bound the series tail")
    b = np.exp(lb)
    rows = np.cumsum(b.sum(axis=1)[::-1])[::-1]  # rows[i] = sum over rows >= i
    cols = np.cumsum(b.sum(axis=0)[::-1])[::-1]
    A = next((i - 1 for i in range(1, len(rows)) if rows[i] < tol_abs / 2), len(rows) - 1)
    B = next((j - 1 for j in range(1, len(cols)) if cols[j] < tol_abs / 2), len(cols) - 1)
    tail = (rows[A + 1] if A + 1 < len(rows) else 0.0) + (cols[B + 1] if B + 1 < len(cols) else 0.0)
    return max(A, 1), max(B, 1), float(tail) + float(np.exp(target)) * b.size


def _explicit_tail(log_bound, A, B):
    a_big, b_big = 2 * A + 40, 2 * B + 40
    i = np.arange(a_big + 1)[:, None]
    j = np.arange(b_big + 1)[None, :]
    b = np.exp(log_bound(i, j))
    b[: A + 1, : B + 1] = 0.0
    return float(b.sum())


def hopf_series_grid(n, t, r, theta, max_m, max_k):
    """Truncated Hopf series on the outer grid ``r x theta`` (1D arrays)."""
    r = np.atleast_1d(np.asarray(r, dtype=float))
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    k = np.arange(max_k + 1)
    m = np.arange(max_m + 1)[:, None]
    P = jacobi_table(max_m, n - 1, k[:, None], np.cos(2 * r)[None, :])  # (M+1, K+1, nr)
    logc = (np.log(2 * m + k + n) + _log_binom(m + k + n - 1, n - 1)
            - hopf_rates(n, m, k) * t)  # (M+1, K+1)
    A = np.einsum("mk,mki->ki", np.exp(logc), P) * np.cos(r)[None, :] ** k[:, None]
    w = np.where(k == 0, 1.0, 2.0)[:, None] * np.cos(np.outer(k, theta))  # (K+1, nth)
    pref = np.exp(gammaln(n)) / (2 * np.pi ** (n + 1))
    return pref * A.T @ w


def _series_eval(kind, n, t, r, w, trunc: SeriesTruncation):
    if kind is Kind.HOPF:
        bound = lambda a, b: _hopf_log_bound(n, t, r, a, b)  # noqa: E731
        grid = hopf_series_grid
    else:
        bound = lambda a, b: _quat_log_bound(n, t, r, a, b)  # noqa: E731
        grid = quaternionic_series_grid
    ref = 1.0 / sphere_volume(2 * n + 1 if kind is Kind.HOPF else 4 * n + 3)
    if trunc.max_m is not None and trunc.max_k is not None:
        A, B = (trunc.max_m, trunc.max_k) if kind is Kind.HOPF else (trunc.max_k, trunc.max_m)
        tail = _explicit_tail(bound, A, B)
    else:
        A, B, tail = _choose_box(bound, trunc.tail_tolerance * ref)
    val = float(_grid_call(grid, kind, n, t, r, w, A, B)[0, 0])
    if tail > trunc.tail_tolerance * abs(val) and trunc.max_m is None:
        A, B, tail = _choose_box(bound, 0.5 * trunc.tail_tolerance * abs(val) + 1e-300)
        val = float(_grid_call(grid, kind, n, t, r, w, A, B)[0, 0])
    if tail > trunc.tail_tolerance * abs(val):
        raise AccuracyError(f"series tail estimate {tail:.3g} exceeds "
                            f"{trunc.tail_tolerance:g} x |p|; use a larger truncation")
    return val, tail, A, B


def _grid_call(grid, kind, n, t, r, w, A, B):
    # hopf_series_grid takes (max_m, max_k); the quaternionic one (max_k, max_m)
    return grid(n, t, r, w, A, B)


def hopf_kernel_series(n, t, r, theta, trunc: SeriesTruncation | None = None) -> KernelEvaluation:
    """Hopf horizontal heat kernel by its Jacobi expansion.

    ``G(n)/(2 pi^{n+1}) sum_{k in Z} sum_m (2m+|k|+n) binom(m+|k|+n-1, n-1)
    e^{-lambda_{m,k} t + i k theta} (cos r)^{|k|} P_m^{n-1,|k|}(cos 2r)``.
    """
    _check_t(t)
    if not 0 <= r < np.pi / 2:
        raise DomainError("r must lie in [0, pi/2)")
    trunc = trunc or SeriesTruncation()
    val, tail, M, K = _series_eval(Kind.HOPF, n, t, r, theta, trunc)
    return KernelEvaluation(val, t, (r, theta), "series", tail, {"max_m": M, "max_k": K})


def _y_panel_width(t, freq):
    # half an oscillation of cos(freq * y) at most, and sqrt(t) for the Gaussian
    w = np.sqrt(t)
    if freq > 0:
        w = min(w, np.pi / freq)
    return w


def _fiber_cutoff(log_env, start):
    """Grow ``Y`` until ``log_env(Y)`` is 1e-18 below the max over ``[0, Y]``."""
    Y = start
    for _ in range(60):
        ys = np.linspace(0.0, Y, 400)
        le = log_env(ys)
        if le[-1] - le.max() < LOG_TINY and le[-1] < le[-2]:
            return Y
        Y *= 1.5
    raise AccuracyError("fiber integrand does not decay; cannot place a cutoff")


def _imag_residue(values_pos, weights, phase):
    # symmetric rule on (-Y, Y): the odd sine part of e^{-i y theta/2t} cancels pairwise
    im = np.sum(weights * values_pos * (np.sin(-phase) + np.sin(phase)))
    return float(abs(im))


def hopf_kernel_integral(n, t, r, theta, quad: QuadratureSpec | None = None) -> KernelEvaluation:
    """Hopf kernel as ``(4 pi t)^{-1/2} int e^{-(y + i theta)^2 / 4t} q_t(cos r cosh y) dy``.

    ``q_t`` is the ``S^{2n+1}`` kernel; evaluated as the real symmetric form
    ``2 int_0^Y cos(y theta/2t) e^{-(y^2 - theta^2)/4t} q_t(cos r cosh y) dy``.
    """
    _check_t(t)
    if not 0 <= r < np.pi / 2:
        raise DomainError("r must lie in [0, pi/2)")
    quad = quad or QuadratureSpec()
    cr = np.cos(r)

    def log_env(y, M=None):
        x = cr * np.cosh(y)
        la, _ = sphere_log_abs(n, t, x, M or _continuation_degree(n, t, float(np.max(x))))
        return la - (y * y - theta * theta) / (4 * t)

    Y = quad.cutoff or _fiber_cutoff(log_env, max(8.0, 10 * np.sqrt(t)))
    M = _continuation_degree(n, t, cr * np.cosh(Y))
    freq = abs(theta) / (2 * t)
    width = quad.panel_width or _y_panel_width(t, freq)

    def integrand(y):
        la, sg = sphere_log_abs(n, t, cr * np.cosh(y), M)
        return 2 * sg * np.exp(la - (y * y - theta * theta) / (4 * t)) * np.cos(freq * y)

    val, err = _integrate_twice(integrand, 0.0, Y, width, quad.order)
    val = float(val) / np.sqrt(4 * np.pi * t)
    err = float(err) / np.sqrt(4 * np.pi * t) + np.exp(log_env(np.array([Y]), M)[0]) * Y
    x, w = panel_rule(0.0, Y, width / 2, quad.order)
    la, sg = sphere_log_abs(n, t, cr * np.cosh(x), M)
    im = _imag_residue(sg * np.exp(la - (x * x - theta * theta) / (4 * t)), w, freq * x)
    im /= np.sqrt(4 * np.pi * t)
    if err > quad.tolerance * abs(val):
        raise AccuracyError(f"fiber quadrature error {err:.3g} too large for |p|={abs(val):.3g}")
    return KernelEvaluation(val, t, (r, theta), "integral", err,
                            {"cutoff": Y, "degree": M, "imag_residue": im})


# quaternionic Hopf fibration -------------------------------------------------

def chebyshev_u_table(max_degree, cos_eta):
    """``sin((m+1) eta) / sin eta`` for ``m = 0..max_degree`` (finite at the poles)."""
    x = np.asarray(cos_eta, dtype=float)
    out = np.empty((max_degree + 1,) + x.shape)
    out[0] = 1.0
    if max_degree >= 1:
        out[1] = 2 * x
    for m in range(2, max_degree + 1):
        out[m] = 2 * x * out[m - 1] - out[m - 2]
    return out


def quaternionic_series_grid(n, t, r, eta, max_k, max_m):
    """Truncated quaternionic series on the outer grid ``r x eta``."""
    r = np.atleast_1d(np.asarray(r, dtype=float))
    eta = np.atleast_1d(np.asarray(eta, dtype=float))
    m = np.arange(max_m + 1)
    k = np.arange(max_k + 1)[:, None]
    P = jacobi_table(max_k, 2 * n - 1, (m + 1)[:, None], np.cos(2 * r)[None, :])  # (K+1, M+1, nr)
    logc = _quat_log_alpha(n, k, m) - quaternionic_rates(n, k, m) * t
    A = np.einsum("km,kmi->mi", np.exp(logc), P) * np.cos(r)[None, :] ** m[:, None]
    U = chebyshev_u_table(max_m, np.cos(eta))  # (M+1, neta)
    return A.T @ U


def quaternionic_kernel_series(n, t, r, eta, trunc: SeriesTruncation | None = None) -> KernelEvaluation:
    """Quaternionic Hopf kernel by its Jacobi expansion.

    ``sum_{k,m} alpha_{k,m} e^{-lambda_{k,m} t} (cos r)^m P_k^{2n-1,m+1}(cos 2r)
    sin((m+1) eta) / sin eta`` with ``lambda_{k,m} = 4k(k+2n+m+1) + 4nm``.
    The fiber factor is evaluated as a Chebyshev polynomial of the second
    kind, so ``eta = 0`` and ``eta = pi`` need no special casing.
    """
    _check_t(t)
    if not 0 <= r < np.pi / 2:
        raise DomainError("r must lie in [0, pi/2)")
    if not 0 <= eta <= np.pi:
        raise DomainError("eta must lie in [0, pi]")
    trunc = trunc or SeriesTruncation()
    val, tail, K, M = _series_eval(Kind.QUATERNIONIC, n, t, r, eta, trunc)
    return KernelEvaluation(val, t, (r, eta), "series", tail, {"max_k": K, "max_m": M})


def _sin_ratio(eta, y, t):
    """``sin(eta y / 2t) / sin(eta)`` with its ``eta -> 0`` limit ``y / 2t``."""
    if abs(eta) < 1e-7:
        return y / (2 * t)
    return np.sin(eta * y / (2 * t)) / np.sin(eta)


def quaternionic_kernel_integral(n, t, r, eta, quad: QuadratureSpec | None = None) -> KernelEvaluation:
    """``e^{-t}/sqrt(pi t) int_0^inf sinh y sin(eta y/2t)/sin eta e^{-(y^2-eta^2)/4t} q_t(cos r cosh y) dy``.

    ``q_t`` is the heat kernel of ``S^{4n+3}``.
    """
    _check_t(t)
    if not 0 <= r < np.pi / 2:
        raise DomainError("r must lie in [0, pi/2)")
    if not 0 <= eta < np.pi:
        raise DomainError("the integral form needs eta in [0, pi)")
    quad = quad or QuadratureSpec()
    nu = 2 * n + 1
    cr = np.cos(r)

    def log_env(y, M=None):
        x = cr * np.cosh(y)
        la, _ = sphere_log_abs(nu, t, x, M or _continuation_degree(nu, t, float(np.max(x))))
        ysafe = np.maximum(y, 1e-300)
        return la + np.log(np.sinh(ysafe)) + np.log(ysafe) - (y * y - eta * eta) / (4 * t)

    Y = quad.cutoff or _fiber_cutoff(log_env, max(8.0, 10 * np.sqrt(t)))
    M = _continuation_degree(nu, t, cr * np.cosh(Y))
    freq = eta / (2 * t)
    width = quad.panel_width or _y_panel_width(t, freq)

    def integrand(y):
        la, sg = sphere_log_abs(nu, t, cr * np.cosh(y), M)
        return (sg * np.exp(la - (y * y - eta * eta) / (4 * t)) * np.sinh(y)
                * _sin_ratio(eta, y, t))

    val, err = _integrate_twice(integrand, 0.0, Y, width, quad.order)
    pref = np.exp(-t) / np.sqrt(np.pi * t)
    val = float(val) * pref
    err = float(err) * pref + pref * np.exp(log_env(np.array([Y]), M)[0]) * Y
    if err > quad.tolerance * abs(val):
        raise AccuracyError(f"fiber quadrature error {err:.3g} too large for |p|={abs(val):.3g}")
    return KernelEvaluation(val, t, (r, eta), "integral", err, {"cutoff": Y, "degree": M})


def _log_two_sinh(a):
    """``log(2 sinh a)`` for ``a >= 0`` (``-inf`` at 0)."""
    a = np.asarray(a, dtype=float)
    with np.errstate(divide="ignore"):
        return a + np.log(-np.expm1(-2 * a))


def sl2_heat_apply(f, t, eta, quad: QuadratureSpec | None = None):
    """Radial heat semigroup ``e^{t Delta}`` of ``SL(2)`` applied to ``f`` at ``eta``.

    ``e^{-t}/sqrt(pi t) int_0^inf sinh r sinh(eta r/2t)/sinh eta
    e^{-(r^2+eta^2)/4t} f(r) dr``; all hyperbolic factors are combined in log
    form so large arguments do not overflow. ``eta = 0`` uses the limit
    ``sinh(eta r/2t)/sinh eta -> r/2t``.
    """
    _check_t(t)
    if eta < 0:
        raise DomainError("eta must be nonnegative")
    quad = quad or QuadratureSpec(order=20)

    def log_kernel(r):
        r = np.asarray(r, dtype=float)
        base = _log_two_sinh(r) - np.log(2.0) - (r * r + eta * eta) / (4 * t)
        if eta == 0:
            with np.errstate(divide="ignore"):
                return base + np.log(r / (2 * t))
        return base + _log_two_sinh(eta * r / (2 * t)) - _log_two_sinh(eta)

    def integrand(r):
        fr = np.asarray(f(r), dtype=float)
        with np.errstate(over="ignore", invalid="ignore"):
            return np.exp(log_kernel(r)) * fr

    # the kernel peaks near r = eta + 2t; extend until f times the kernel is negligible
    R = quad.cutoff or (eta + 2 * t + 12 * np.sqrt(t) + 4)
    for _ in range(40):
        probe = np.linspace(0.0, R, 801)[1:]
        vals = np.abs(integrand(probe))
        if not np.all(np.isfinite(vals)):
            raise AccuracyError("integrand overflowed; f grows too fast")
        if vals[-1] <= 1e-18 * vals.max() and vals[-1] <= vals[-2]:
            break
        if quad.cutoff:
            raise AccuracyError("integrand is not negligible at the requested cutoff")
        R *= 1.5
    else:
        raise AccuracyError("integrand does not decay; f is not sub-Gaussian")
    width = quad.panel_width or min(np.sqrt(t), 1.0)
    val, err = _integrate_twice(integrand, 0.0, R, width, quad.order)
    pref = np.exp(-t) / np.sqrt(np.pi * t)
    return float(val) * pref


def hopf_quaternionic_relation(n, t, r, theta, h=1e-3):
    """Compare the quaternionic kernel with ``-e^{4nt}/(2 pi sin theta cos r) d_theta`` of
    the Hopf kernel of ``S^{4n+1}``.

    The derivative is a sixth-order central difference of the series.
    Returns ``(lhs, rhs, relative residual)``.
    """
    if not 0 < theta < np.pi or not 0 < r < np.pi / 2:
        raise DomainError("need theta in (0, pi) and r in (0, pi/2)")
    if theta - 3 * h <= 0 or theta + 3 * h >= np.pi:
        raise DomainError("theta too close to the fiber poles for the stencil")
    lhs = quaternionic_kernel_series(n, t, r, theta).value
    th = theta + h * np.arange(-3, 4)
    trunc = SeriesTruncation(tail_tolerance=1e-14)
    _, _, M, K = _series_eval(Kind.HOPF, 2 * n, t, r, theta, trunc)
    p = hopf_series_grid(2 * n, t, r, th, M + 2, K + 2)[0]
    c = np.array([-1, 9, -45, 0, 45, -9, 1]) / 60.0
    dp = float(np.dot(c, p)) / h
    rhs = -np.exp(4 * n * t) / (2 * np.pi * np.sin(theta) * np.cos(r)) * dp
    return lhs, rhs, abs(lhs - rhs) / abs(lhs)


# mass, PDE, spectra ----------------------------------------------------------

def kernel_mass(model: ModelSpace, t, nodes=None):
    """``int p_t d mu`` by tensor quadrature of the kernel against the model measure."""
    _check_t(t)
    n = model.n
    if model.kind is Kind.HEISENBERG:
        R = np.sqrt(4 * t * 60.0)
        Z = 60.0 * 2 * t / np.pi  # the kernel decays like exp(-pi z / 2t)
        rr, wr = panel_rule(0.0, R, R / 24, 20)
        zz, wz = panel_rule(0.0, Z, Z / 24, 20)
        vals, _ = _heis_matrix(n, t, rr, zz, QuadratureSpec())
        dens = measure_density(model, (rr, 0.0))
        return float(2 * wz @ vals @ (wr * dens))
    rr, wr = panel_rule(0.0, np.pi / 2, np.pi / 2 / (nodes or 16), 20)
    if model.kind is Kind.HOPF:
        bound = lambda a, b: _hopf_log_bound(n, t, 0.0, a, b)  # noqa: E731
        M, K, _ = _choose_box(bound, 1e-16)
        th = np.linspace(-np.pi, np.pi, 2 * K + 3, endpoint=False)
        vals = hopf_series_grid(n, t, rr, th, M, K)
        dens = measure_density(model, (rr, 0.0))
        return float((wr * dens) @ vals.sum(axis=1) * (2 * np.pi / len(th)))
    bound = lambda a, b: _quat_log_bound(n, t, 0.0, a, b)  # noqa: E731
    K, M, _ = _choose_box(bound, 1e-16)
    ee, we = panel_rule(0.0, np.pi, np.pi / max(8, M // 4), 20)
    vals = quaternionic_series_grid(n, t, rr, ee, K, M)
    dens = measure_density(model, (rr[:, None], ee[None, :]))
    return float(wr @ (vals * dens) @ we)


def kernel_evaluator(model: ModelSpace):
    """``(t, r, fiber) -> value`` using the default representation of each model."""
    if model.kind is Kind.HEISENBERG:
        return lambda t, r, w: heisenberg_kernel(model.n, t, r, w).value
    if model.kind is Kind.HOPF:
        return lambda t, r, w: hopf_kernel_series(model.n, t, r, w).value
    return lambda t, r, w: quaternionic_kernel_series(model.n, t, r, w).value


def pde_residual(model: ModelSpace, evaluator, t, point, h_t=None):
    """``|d_t p - L p|`` at ``point``: fourth-order differences in time, ``apply_radial`` in space."""
    _check_t(t)
    evaluator = evaluator or kernel_evaluator(model)
    r, w = point
    h = h_t or 1e-3 * t
    ft = lambda s: evaluator(s, r, w)  # noqa: E731
    dt = (-ft(t + 2 * h) + 8 * ft(t + h) - 8 * ft(t - h) + ft(t - 2 * h)) / (12 * h)
    lap = apply_radial(radial_operator(model), lambda a, b: evaluator(t, a, b), point)
    return abs(dt - lap)


def series_exponents(model: ModelSpace, max_a, max_b):
    """Set of integer exponents ``lambda`` in the kernel series over an index box."""
    if model.kind is Kind.HEISENBERG:
        raise UnsupportedError("the Heisenberg kernel has no discrete series")
    out = set()
    for a in range(max_a + 1):
        for b in range(max_b + 1):
            lam = hopf_rates(model.n, a, b) if model.kind is Kind.HOPF else quaternionic_rates(model.n, a, b)
            out.add(int(lam))
    return out
