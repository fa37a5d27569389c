"""Independent reference computations used only by the tests."""
import numpy as np
from scipy.linalg import solve_banded


def heisenberg_crank_nicolson(n, t, points, lam_max=80.0, panels=40, order=8, R=5.0, dr=0.005,
                              t0=1e-3, growth=1.02):
    """Heisenberg kernel by solving the z-Fourier transformed equation numerically.

    For each frequency ``lam`` the transform ``Phi`` solves
    ``Phi_t = r^{1-2n} (r^{2n-1} Phi_r)_r - lam^2 r^2 Phi`` with a point source at
    the origin, started from the Euclidean Gaussian at ``t0``. Crank-Nicolson
    on a cell-centred grid; ``p(r, z) = (1/pi) int_0^inf cos(lam z) Phi(t, r) dlam``.
    """
    N = int(round(R / dr))
    rc = (np.arange(N) + 0.5) * dr
    rf = np.arange(N + 1) * dr
    w = rf ** (2 * n - 1)
    vol = rc ** (2 * n - 1)
    up = np.zeros(N)
    lo = np.zeros(N)
    up[:-1] = w[1:-1] / (vol[:-1] * dr * dr)
    lo[1:] = w[1:-1] / (vol[1:] * dr * dr)
    times = [t0]
    while times[-1] < t:
        times.append(min(t, times[-1] * growth))
    x, wts = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(0, lam_max, panels + 1)
    lams = np.concatenate([(a + b) / 2 + (b - a) / 2 * x for a, b in zip(edges[:-1], edges[1:])])
    lw = np.concatenate([(b - a) / 2 * wts for a, b in zip(edges[:-1], edges[1:])])
    r_req = np.array([p[0] for p in points])
    z_req = np.array([p[1] for p in points])
    out = np.zeros(len(points))
    for lam, wl in zip(lams, lw):
        phi = (4 * np.pi * t0) ** (-n) * np.exp(-rc ** 2 / (4 * t0))
        diag = -(up + lo) - lam * lam * rc * rc
        for a, b in zip(times[:-1], times[1:]):
            h = b - a
            rhs = phi + h / 2 * (diag * phi + np.r_[up[:-1] * phi[1:], 0] + np.r_[0, lo[1:] * phi[:-1]])
            ab = np.zeros((3, N))
            ab[0, 1:] = -h / 2 * up[:-1]
            ab[1] = 1 - h / 2 * diag
            ab[2, :-1] = -h / 2 * lo[1:]
            phi = solve_banded((1, 1), ab, rhs)
        # quadratic in r near the axis: extrapolate to r = 0
        at0 = (rc[1] ** 2 * phi[0] - rc[0] ** 2 * phi[1]) / (rc[1] ** 2 - rc[0] ** 2)
        vals = np.where(r_req == 0, at0, np.interp(r_req, rc, phi))
        out += wl * np.cos(lam * z_req) * vals
    return out / np.pi


def s3_heat_kernel(t, delta, terms=400):
    """Heat kernel of the unit 3-sphere from its spectrum ``m(m+2)``, multiplicity ``(m+1)^2``."""
    m = np.arange(terms)
    return float(np.sum((m + 1) * np.exp(-m * (m + 2) * t) * np.sin((m + 1) * delta))
                 / np.sin(delta) / (2 * np.pi ** 2))
