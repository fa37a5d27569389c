"""Kinetic Fokker-Planck operator on phase space ``(x, v) in R^2``.

    L = d_vv - v d_v + V'(x) d_v - v d_x,     mu = exp(-V(x) - v^2/2) dx dv

with the twisted metric in which ``e1 = 2 d_x + d_v`` (horizontal) and
``e2 = d_v`` (vertical) are orthonormal. The leaves are the lines ``x = const``.

Symbolic quantities (``L f``, ``T_2``, the ``DY`` tensor) go through sympy.
The evolution ``d_t h = L h`` is solved on a truncated box with a
conservative finite-volume scheme: the Ornstein-Uhlenbeck part in ``v`` is
implicit, the Hamiltonian transport explicit and upwinded with face fluxes
taken from the stream function ``mu`` itself, so the discrete transport is
exactly divergence free and preserves constants.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import sympy as sp
from scipy import sparse
from scipy.sparse.linalg import splu

from .errors import AccuracyError, DomainError, InfeasibleError, SolverError, UnsupportedError

X, VEL = sp.symbols("x v", real=True)
TWISTED = np.array([[4.0, 2.0], [2.0, 2.0]])  # |grad f|^2 = (f_x, f_v) A (f_x, f_v)^T


# potentials ------------------------------------------------------------------

@dataclass(frozen=True)
class Potential:
    """Confinement potential ``V(x)`` with a bounded second derivative.

    ``hessian_range`` is an interval containing every value of ``V''``; the
    bound ``M`` with ``|V''| <= M`` is derived from it.
    """

    expr: sp.Expr
    hessian_range: tuple
    name: str = "custom"

    @classmethod
    def parse(cls, text, hessian_range=None, name=None):
        expr = sp.sympify(text, locals={"x": X})
        if expr.free_symbols - {X}:
            raise UnsupportedError("the potential may only depend on x")
        if expr.is_polynomial(X) and sp.degree(sp.Poly(expr, X)) > 2:
            raise DomainError("a polynomial potential of degree > 2 has an unbounded Hessian")
        if hessian_range is None:
            # sampled, not proven: good enough for the smooth test potentials
            d2 = sp.lambdify(X, sp.diff(expr, X, 2), "numpy")
            xs = np.linspace(-50, 50, 200001)
            vals = np.broadcast_to(np.asarray(d2(xs), dtype=float), xs.shape)
            hessian_range = (float(vals.min()), float(vals.max()))
        lo, hi = hessian_range
        if not (np.isfinite(lo) and np.isfinite(hi)):
            raise DomainError("the Hessian of V must be bounded")
        return cls(expr, (float(lo), float(hi)), name or str(expr))

    @classmethod
    def quadratic(cls):
        return cls(X ** 2 / 2, (1.0, 1.0), "quadratic")

    @property
    def hessian_bound(self):
        return max(abs(self.hessian_range[0]), abs(self.hessian_range[1]))

    @property
    def is_quadratic(self):
        return sp.degree(sp.Poly(self.expr, X)) <= 2 if self.expr.is_polynomial(X) else False

    def funcs(self):
        return _potential_funcs(self.expr)


@lru_cache(maxsize=None)
def _potential_funcs(expr):
    dv = sp.diff(expr, X)
    d2 = sp.diff(dv, X)
    mk = lambda e: np.vectorize(sp.lambdify(X, e, "numpy"), otypes=[float])  # noqa: E731
    return mk(expr), mk(dv), mk(d2)


def _as_expr(f):
    if isinstance(f, sp.Expr):
        # symbols named x or v from a plain sympify are rebound to the real ones
        return f.subs({s: {"x": X, "v": VEL}[s.name] for s in f.free_symbols
                       if s.name in ("x", "v") and s not in (X, VEL)})
    if isinstance(f, (int, float)):
        return sp.Float(f) if isinstance(f, float) else sp.Integer(f)
    if isinstance(f, str):
        return sp.sympify(f, locals={"x": X, "v": VEL})
    raise UnsupportedError("test functions must be sympy expressions or strings")


# symbolic operators ----------------------------------------------------------

def kfp_operator(V: Potential, f):
    """``L f`` as a sympy expression."""
    f = _as_expr(f)
    dV = sp.diff(V.expr, X)
    return sp.diff(f, VEL, 2) - VEL * sp.diff(f, VEL) + dV * sp.diff(f, VEL) - VEL * sp.diff(f, X)


def kfp_apply(V: Potential, f, point):
    """``(L f)(x, v)``. Symbolic input is exact; callables use 4th-order differences."""
    x0, v0 = (float(p) for p in point)
    if callable(f) and not isinstance(f, sp.Expr):
        h = 1e-3
        _, dV, _ = V.funcs()
        fx = (-f(x0 + 2 * h, v0) + 8 * f(x0 + h, v0) - 8 * f(x0 - h, v0) + f(x0 - 2 * h, v0)) / (12 * h)
        fv = (-f(x0, v0 + 2 * h) + 8 * f(x0, v0 + h) - 8 * f(x0, v0 - h) + f(x0, v0 - 2 * h)) / (12 * h)
        fvv = (-f(x0, v0 + 2 * h) + 16 * f(x0, v0 + h) - 30 * f(x0, v0)
               + 16 * f(x0, v0 - h) - f(x0, v0 - 2 * h)) / (12 * h * h)
        return float(fvv - v0 * fv + dV(x0) * fv - v0 * fx)
    return float(kfp_operator(V, f).subs({X: x0, VEL: v0}))


def frame_apply(f):
    """``(e1 f, e2 f)`` in the twisted frame."""
    f = _as_expr(f)
    return 2 * sp.diff(f, X) + sp.diff(f, VEL), sp.diff(f, VEL)


def grad_norm2(f):
    g1, g2 = frame_apply(f)
    return g1 ** 2 + g2 ** 2


def _inner(f, g):
    f1, f2 = frame_apply(f)
    g1, g2 = frame_apply(g)
    return f1 * g1 + f2 * g2


def t2_expr(V: Potential, f):
    """``T_2(f) = (L |grad f|^2 - 2 <grad f, grad L f>) / 2`` symbolically."""
    f = _as_expr(f)
    return sp.expand((kfp_operator(V, grad_norm2(f)) - 2 * _inner(f, kfp_operator(V, f))) / 2)


def t2_form(V: Potential, f, point):
    x0, v0 = point
    return float(t2_expr(V, f).subs({X: x0, VEL: v0}))


def drift_components(V: Potential):
    """Components of ``Y = -v d_v + V' d_v - v d_x`` in the frame ``(e1, e2)``.

    ``d_x = (e1 - e2)/2`` and ``d_v = e2``.
    """
    dV = sp.diff(V.expr, X)
    cx, cv = -VEL, dV - VEL  # coefficients of d_x and d_v
    return cx / 2, cv - cx / 2


def minus_dy_matrix(V: Potential):
    """Symmetric matrix of ``-DY(X, X)`` in frame components, as sympy.

    The metric is translation invariant with a constant orthonormal frame, so
    the Levi-Civita derivative is the componentwise derivative:
    ``DY(e_i, e_j) = e_i(Y_j)``.
    """
    Y = drift_components(V)
    ops = [lambda g: 2 * sp.diff(g, X) + sp.diff(g, VEL), lambda g: sp.diff(g, VEL)]
    D = sp.Matrix(2, 2, lambda i, j: ops[i](Y[j]))
    return sp.simplify(-(D + D.T) / 2)


def bochner_bound(V: Potential, f, point):
    """``(Ric_V - DY)(grad f, grad f)`` with ``Ric_V = 0`` (flat leaves)."""
    x0, v0 = point
    g = sp.Matrix(frame_apply(f))
    return float((g.T * minus_dy_matrix(V) * g)[0, 0].subs({X: x0, VEL: v0}))


@lru_cache(maxsize=None)
def _t2_jet(expr):
    """``T_2`` as a function of the 2-jet ``(x, v, f_x, f_v, f_xx, f_xv, f_vv)``."""
    V = Potential(expr, (0.0, 0.0))
    F = sp.Function("f")(X, VEL)
    t2 = t2_expr(V, F)
    jets = sp.symbols("p q a b c", real=True)
    subs = {sp.Derivative(F, (X, 2)): jets[2], sp.Derivative(F, X, VEL): jets[3],
            sp.Derivative(F, (VEL, 2)): jets[4]}
    t2 = t2.subs(subs).subs({sp.Derivative(F, X): jets[0], sp.Derivative(F, VEL): jets[1]})
    if t2.atoms(sp.Derivative):
        raise SolverError("third derivatives did not cancel in T_2")
    return sp.lambdify((X, VEL) + jets, t2, "numpy")


def t2_from_jet(V: Potential, point, jet):
    """``T_2`` at ``point`` for any function with first/second derivatives ``jet``."""
    return _t2_jet(V.expr)(*point, *jet)


# K(eta) ----------------------------------------------------------------------

@dataclass(frozen=True)
class KEtaResult:
    K: float
    eta: float
    worst_hessian: float


def _keta_matrix(h, eta, K):
    # -DY - (eta on horizontal, -K on vertical); -DY = [[1/2, -(2h-1)/2], [., 1/2]]
    off = -(2 * h - 1) / 2
    return np.array([[0.5 - eta, off], [off, 0.5 + K]])


def _psd(M, tol=0.0):
    return np.linalg.eigvalsh(M)[0] >= -tol


def k_eta(V: Potential, eta, k_max=100.0, samples=201):
    """Smallest ``K >= -1/2`` with ``-DY >= -K |X_V|^2 + eta |X_H|^2`` over the Hessian range.

    Bisection on ``K`` over ``[-1/2, k_max]``; feasibility is a 2x2 PSD test at
    every sampled value of ``V''`` (the endpoints are always included).
    """
    if not 0 < eta < 0.5:
        raise DomainError("eta must lie in (0, 1/2)")
    lo_h, hi_h = V.hessian_range
    hs = np.unique(np.concatenate([np.linspace(lo_h, hi_h, samples), [lo_h, hi_h]]))

    def feasible(K):
        return all(_psd(_keta_matrix(h, eta, K)) for h in hs)

    if not feasible(k_max):
        worst = max(hs, key=lambda h: abs(2 * h - 1))
        raise InfeasibleError(f"no K <= {k_max} works at eta={eta}", certificate={"hessian": float(worst)})
    lo, hi = -0.5, k_max
    if feasible(lo):
        hi = lo
    for _ in range(200):
        if hi - lo < 1e-13:
            break
        mid = 0.5 * (lo + hi)
        if feasible(mid):
            hi = mid
        else:
            lo = mid
    worst = max(hs, key=lambda h: abs(2 * h - 1))
    return KEtaResult(float(hi), float(eta), float(worst))


def k_eta_closed_form(V: Potential, eta):
    """``max_h (2h-1)^2 / (2 - 4 eta) - 1/2`` over the Hessian interval (oracle)."""
    lo, hi = V.hessian_range
    s = max((2 * lo - 1) ** 2, (2 * hi - 1) ** 2)
    return max(s / (2 - 4 * eta) - 0.5, -0.5)


def gradient_bound_constant(V: Potential):
    """``K`` with ``-DY >= -K`` on all of ``R^2``: minus the smallest eigenvalue over the Hessian range."""
    lo, hi = V.hessian_range
    vals = [np.linalg.eigvalsh(_keta_matrix(h, 0.0, 0.0))[0] for h in np.linspace(lo, hi, 201)]
    return float(-min(vals))


# phase grid and solver -------------------------------------------------------

@dataclass(frozen=True)
class PhaseGrid:
    x_range: tuple = (-7.0, 7.0)
    v_range: tuple = (-7.0, 7.0)
    nx: int = 128
    nv: int = 128
    dt: float = 0.01

    def __post_init__(self):
        if self.x_range[0] != -self.x_range[1] or self.v_range[0] != -self.v_range[1]:
            raise DomainError("the box must be symmetric")
        if not (self.nx >= 4 and self.nv >= 4 and self.dt > 0):
            raise DomainError("need at least 4 cells per axis and dt > 0")

    @property
    def dx(self):
        return (self.x_range[1] - self.x_range[0]) / self.nx

    @property
    def dv(self):
        return (self.v_range[1] - self.v_range[0]) / self.nv

    @property
    def x(self):
        return self.x_range[0] + (np.arange(self.nx) + 0.5) * self.dx

    @property
    def v(self):
        return self.v_range[0] + (np.arange(self.nv) + 0.5) * self.dv

    def mesh(self):
        return np.meshgrid(self.x, self.v, indexing="ij")

    def refined(self, factor=2):
        return PhaseGrid(self.x_range, self.v_range, self.nx * factor, self.nv * factor, self.dt / factor)

    def outside_mass(self, V: Potential):
        """Fraction of ``mu`` outside the box (1D quadratures, ``mu`` is a product)."""
        Vf, _, _ = V.funcs()
        L = 3 * max(self.x_range[1], self.v_range[1])
        xs = np.linspace(-L, L, 60001)
        wx = np.exp(-(Vf(xs) - Vf(xs).min()))
        wv = np.exp(-xs ** 2 / 2)
        inx = np.abs(xs) <= self.x_range[1]
        inv = np.abs(xs) <= self.v_range[1]
        px = np.trapezoid(wx * inx, xs) / np.trapezoid(wx, xs)
        pv = np.trapezoid(wv * inv, xs) / np.trapezoid(wv, xs)
        return float(1 - px * pv)


@dataclass
class Discretization:
    grid: PhaseGrid
    weight: np.ndarray  # normalized mu-mass per cell, shape (nx, nv)
    cell_mass: np.ndarray  # unnormalized rho dx dv, flattened
    skew: sparse.csr_matrix  # transport part, antisymmetric
    ou: sparse.csr_matrix  # OU part plus edge-layer upwind dissipation, symmetric

    def generator(self):
        """Discrete ``L`` acting on flattened cell values."""
        return sparse.diags(1.0 / self.cell_mass) @ (self.skew + self.ou)


def discretize(V: Potential, grid: PhaseGrid):
    """Finite-volume matrices in the ``mu``-weighted cell inner product.

    With ``M = diag(cell_mass)`` the discrete generator is ``M^{-1}(S + D)``:
    ``S`` is antisymmetric (centred transport, face fluxes from the stream
    function ``mu`` at the corners) and ``D`` is the symmetric zero-flux OU
    stencil in ``v``. Rows of both sum to zero, so constants are preserved
    and the ``mu``-mass is conserved exactly.
    """
    Vf, _, _ = V.funcs()
    nx, nv = grid.nx, grid.nv
    x, v = grid.x, grid.v
    xc = grid.x_range[0] + np.arange(nx + 1) * grid.dx
    vc = grid.v_range[0] + np.arange(nv + 1) * grid.dv
    shift = float(Vf(x).min())
    psi = np.exp(-(Vf(xc)[:, None] - shift) - vc[None, :] ** 2 / 2)
    psi[0, :] = psi[-1, :] = 0.0
    psi[:, 0] = psi[:, -1] = 0.0
    fx = psi[1:-1, 1:] - psi[1:-1, :-1]  # flux from cell (i, j) into (i+1, j)
    fv = -(psi[1:, 1:-1] - psi[:-1, 1:-1])  # flux from cell (i, j) into (i, j+1)
    rho = np.exp(-(Vf(x)[:, None] - shift) - v[None, :] ** 2 / 2)
    cell_mass = rho * grid.dx * grid.dv
    idx = np.arange(nx * nv).reshape(nx, nv)
    # (S f)_c = sum over faces of F_out (f_c + f_nb)/2; the f_c part sums to zero
    a, b = idx[:-1, :].ravel(), idx[1:, :].ravel()
    c, d = idx[:, :-1].ravel(), idx[:, 1:].ravel()
    rows = np.concatenate([a, b, c, d])
    cols = np.concatenate([b, a, d, c])
    vals = np.concatenate([fx.ravel() / 2, -fx.ravel() / 2, fv.ravel() / 2, -fv.ravel() / 2])
    N = nx * nv
    skew = sparse.csr_matrix((vals, (rows, cols)), shape=(N, N))
    # OU: conductance rho at the v-faces, times dx dv / dv^2
    vf = vc[1:-1]
    cond = (np.exp(-(Vf(x)[:, None] - shift) - vf[None, :] ** 2 / 2) * grid.dx / grid.dv).ravel()
    off = sparse.csr_matrix((np.concatenate([cond, cond]), (np.concatenate([c, d]), np.concatenate([d, c]))),
                            shape=(N, N))
    # full upwinding is the centred flux plus conductance |F|/2; it is switched on
    # only in an outer layer, where centred transport wiggles against the walls
    # and mu carries almost no mass
    lx, lv = grid.x_range[1], grid.v_range[1]
    layer = lambda px, pv: np.clip((np.maximum(np.abs(px) / lx, np.abs(pv) / lv) - 0.65) / 0.15, 0, 1)  # noqa: E731
    ux = (np.abs(fx) / 2 * layer(xc[1:-1, None], v[None, :])).ravel()
    uv = (np.abs(fv) / 2 * layer(x[:, None], vc[None, 1:-1])).ravel()
    off = off + sparse.csr_matrix((np.concatenate([ux, ux, uv, uv]), (rows, cols)), shape=(N, N))
    ou = off - sparse.diags(np.asarray(off.sum(axis=1)).ravel())
    return Discretization(grid, cell_mass / cell_mass.sum(), cell_mass.ravel(), skew, ou.tocsr())


def transport(d: Discretization, f):
    """Discrete ``(V' d_v - v d_x) f`` on an ``(nx, nv)`` array."""
    return (d.skew @ f.ravel() / d.cell_mass).reshape(f.shape)


@dataclass
class Trajectory:
    times: np.ndarray
    frames: list
    disc: Discretization
    mass_drift: float


def grid_solve(V: Potential, f0, T, grid: PhaseGrid, record_every=0.1) -> Trajectory:
    """Evolve ``d_t h = L h`` from ``f0`` (callable on the mesh or array) to time ``T``.

    Crank-Nicolson with a single sparse LU factorization. In the ``mu``
    inner product the scheme is a contraction, so the weighted ``L^2`` norm
    must not grow; growth beyond round-off raises ``SolverError``.
    """
    d = discretize(V, grid)
    XX, VV = grid.mesh()
    f = np.array(f0(XX, VV) if callable(f0) else f0, dtype=float)
    if f.shape != (grid.nx, grid.nv):
        raise DomainError("initial data does not match the grid")
    if T < 0:
        raise DomainError("T must be nonnegative")
    nsteps = int(np.ceil(T / grid.dt - 1e-9))
    times, frames = [0.0], [f.copy()]
    mass0 = float(np.sum(d.weight * f))
    if nsteps == 0:
        return Trajectory(np.array(times), frames, d, 0.0)
    step = T / nsteps
    A = d.skew + d.ou
    M = sparse.diags(d.cell_mass)
    lu = splu((M - step / 2 * A).tocsc())
    rhs = (M + step / 2 * A).tocsr()
    rec = max(1, int(round(record_every / step)))
    y = f.ravel()
    energy = float(y @ (d.cell_mass * y))
    for k in range(1, nsteps + 1):
        y = lu.solve(rhs @ y)
        if k % rec == 0 or k == nsteps:
            e = float(y @ (d.cell_mass * y))
            if not np.isfinite(e) or e > energy * (1 + 1e-9) + 1e-300:
                raise SolverError(f"weighted L2 norm grew at t={k * step:.4g}")
            energy = e
            times.append(k * step)
            frames.append(y.reshape(f.shape).copy())
    drift = abs(float(np.sum(d.weight * frames[-1])) - mass0)
    return Trajectory(np.array(times), frames, d, drift)


def grid_gradient(grid: PhaseGrid, f):
    """``(e1 f, e2 f)`` by second-order differences."""
    fx = np.gradient(f, grid.dx, axis=0)
    fv = np.gradient(f, grid.dv, axis=1)
    return 2 * fx + fv, fv


def grid_grad_norm2(grid, f):
    g1, g2 = grid_gradient(grid, f)
    return g1 * g1 + g2 * g2


# Poincare and log-Sobolev constants -----------------------------------------

def _q1_matrices(V: Potential, grid: PhaseGrid, metric=TWISTED):
    """Weighted stiffness ``int grad phi_i^T A grad phi_j dmu`` and mass matrices for Q1 elements.

    Nodes sit on the cell corners; each cell uses 2x2 Gauss points.
    """
    Vf, _, _ = V.funcs()
    nx, nv, hx, hv = grid.nx, grid.nv, grid.dx, grid.dv
    xs = grid.x_range[0] + np.arange(nx + 1) * hx
    vs = grid.v_range[0] + np.arange(nv + 1) * hv
    shift = float(Vf(xs).min())
    g = np.array([-1, 1]) / np.sqrt(3.0)
    rows, cols, kv, mv = [], [], [], []
    ii, jj = np.meshgrid(np.arange(nx), np.arange(nv), indexing="ij")
    ii, jj = ii.ravel(), jj.ravel()
    corners = [(0, 0), (1, 0), (0, 1), (1, 1)]
    node = lambda a, b: a * (nv + 1) + b  # noqa: E731
    Ke = np.zeros((len(ii), 4, 4))
    Me = np.zeros((len(ii), 4, 4))
    for gx in g:
        for gv in g:
            s, t = (gx + 1) / 2, (gv + 1) / 2  # reference coordinates in [0, 1]
            xq = xs[ii] + s * hx
            vq = vs[jj] + t * hv
            w = np.exp(-(Vf(xq) - shift) - vq ** 2 / 2) * hx * hv / 4
            phi = np.array([(1 - s) * (1 - t), s * (1 - t), (1 - s) * t, s * t])
            dphx = np.array([-(1 - t), (1 - t), -t, t]) / hx
            dphv = np.array([-(1 - s), -s, (1 - s), s]) / hv
            G = np.stack([dphx, dphv])  # (2, 4)
            Kq = G.T @ metric @ G
            Ke += w[:, None, None] * Kq[None]
            Me += w[:, None, None] * np.outer(phi, phi)[None]
    idx = np.array([[node(ii + a, jj + b) for (a, b) in corners]]).squeeze(0).T  # (ncell, 4)
    rows = np.repeat(idx, 4, axis=1).ravel()
    cols = np.tile(idx, (1, 4)).ravel()
    N = (nx + 1) * (nv + 1)
    K = sparse.csr_matrix((Ke.ravel(), (rows, cols)), shape=(N, N))
    M = sparse.csr_matrix((Me.ravel(), (rows, cols)), shape=(N, N))
    return K, M


@dataclass(frozen=True)
class PoincareResult:
    kappa: float
    rayleigh: float
    iterations: int
    eigenvector: np.ndarray = field(repr=False)


def poincare_constant(V: Potential, grid: PhaseGrid, tol=1e-12, max_iter=2000, shift=-1e-3):
    """Smallest nonzero eigenvalue of ``int |grad f|^2 dmu / Var_mu f`` (twisted metric).

    Inverse iteration on ``K - s M`` for the Q1 discretization, with the
    constants deflated by M-orthogonal projection at every step. The
    returned ``rayleigh`` is the Rayleigh quotient of the final iterate.
    """
    K, M = _q1_matrices(V, grid)
    N = K.shape[0]
    ones = np.ones(N)
    m1 = M @ ones
    tot = ones @ m1
    solver = splu((K - shift * M).tocsc())
    rng = np.random.default_rng(0)
    y = rng.standard_normal(N)
    lam_old = np.inf
    for it in range(1, max_iter + 1):
        y = y - (m1 @ y) / tot * ones
        y = y / np.sqrt(y @ (M @ y))
        lam = float(y @ (K @ y))
        if abs(lam - lam_old) <= tol * abs(lam):
            break
        lam_old = lam
        y = solver.solve(M @ y)
    else:
        raise AccuracyError("inverse iteration did not converge")
    var = float(y @ (M @ y) - (m1 @ y) ** 2 / tot)
    rq = float(y @ (K @ y)) / var
    return PoincareResult(lam, rq, it, y)


def logsob_constant(V: Potential, grid: PhaseGrid, n_angles=721):
    """Log-Sobolev constant of ``mu`` in the twisted metric for quadratic ``V``.

    ``mu`` is then a standard Gaussian and the tilts ``f = exp(a.z - |a|^2/2)``
    give ``int f |grad log f|^2 dmu / Ent(f) = 2 a^T A a / |a|^2``; the
    infimum over directions, ``2 lambda_min(A)``, is the constant. Each
    direction's ratio is also measured by grid quadrature as a certificate.
    Returns ``(constant, grid_ratio_at_minimizer)``.
    """
    if not V.is_quadratic or V.hessian_range != (1.0, 1.0) or sp.diff(V.expr, X).subs(X, 0) != 0:
        raise UnsupportedError("log-Sobolev mode is only available for V = x^2/2")
    ang = np.linspace(0, np.pi, n_angles)
    dirs = np.stack([np.cos(ang), np.sin(ang)])
    ratios = 2 * np.einsum("ia,ij,ja->a", dirs, TWISTED, dirs)
    k = int(np.argmin(ratios))
    a = 0.3 * dirs[:, k]
    XX, VV = grid.mesh()
    w = np.exp(-XX ** 2 / 2 - VV ** 2 / 2)
    w /= w.sum()
    f = np.exp(a[0] * XX + a[1] * VV - a @ a / 2)
    f /= np.sum(w * f)
    fisher = np.sum(w * f * grid_grad_norm2(grid, np.log(f)))
    ent = np.sum(w * f * np.log(f))
    return float(ratios[k]), float(fisher / ent)


# hypocoercive decay ----------------------------------------------------------

@dataclass
class HypocoerciveReport:
    mode: str
    times: np.ndarray
    functional: np.ndarray
    fitted_rate: float
    predicted_rate: float
    rho1: float
    rho2: float
    kappa: float
    monotone: bool
    passed: bool
    notes: list = field(default_factory=list)


def predicted_rate(rho1, rho2, kappa, mode="poincare"):
    if mode == "poincare":
        return 2 * rho2 * kappa / (kappa + rho1 + rho2)
    if mode == "logsob":
        return 2 * rho2 * kappa / (kappa + 2 * (rho1 + rho2))
    raise UnsupportedError(f"unknown mode {mode!r}")


def fit_rate(times, values, floor=1e-12):
    """OLS slope of ``-log F`` over the second half of the run, above ``floor``."""
    times = np.asarray(times)
    values = np.asarray(values)
    sel = (times >= times[-1] / 2) & (values > floor)
    if sel.sum() < 3:
        raise AccuracyError("not enough points above the noise floor to fit a rate")
    slope = np.polyfit(times[sel], np.log(values[sel]), 1)[0]
    return float(-slope)


def functional_trajectory(traj: Trajectory, rho1, rho2, mode):
    g = traj.disc.grid
    w = traj.disc.weight
    out = []
    for f in traj.frames:
        if mode == "poincare":
            val = (rho1 + rho2) * np.sum(w * f * f) + np.sum(w * grid_grad_norm2(g, f))
        else:
            if np.any(f <= 0):
                raise SolverError("positivity lost in log-Sobolev mode")
            lf = np.log(f)
            val = 2 * (rho1 + rho2) * np.sum(w * f * lf) + np.sum(w * f * grid_grad_norm2(g, lf))
        out.append(float(val))
    return np.array(out)


def hypocoercive_decay(V: Potential, f0, T, grid: PhaseGrid, mode="poincare", eta=0.25,
                       kappa=None, monotone_tol=1e-8):
    """Measure the decay of the composite functional against ``lambda`` predicted from ``(K(eta), eta, kappa)``.

    A negative ``K(eta)`` is clamped to 0 since the decay theorem assumes
    ``rho1 >= 0``. ``f0`` is recentred (poincare) or renormalized (logsob)
    against the discrete invariant weights so the hypotheses hold exactly on
    the grid.
    """
    notes = []
    K = k_eta(V, eta).K
    rho1 = K
    if rho1 < 0:
        notes.append(f"K(eta)={K:.6g} < 0 clamped to 0")
        rho1 = 0.0
    rho2 = eta
    if kappa is None:
        kappa = poincare_constant(V, grid).kappa if mode == "poincare" else logsob_constant(V, grid)[0]
    lam = predicted_rate(rho1, rho2, kappa, mode)
    d = discretize(V, grid)
    XX, VV = grid.mesh()
    init = np.array(f0(XX, VV) if callable(f0) else f0, dtype=float)
    if mode == "poincare":
        init = init - np.sum(d.weight * init)
    else:
        if np.any(init <= 0):
            raise DomainError("log-Sobolev mode needs a positive initial datum")
        init = init / np.sum(d.weight * init)
    traj = grid_solve(V, init, T, grid, record_every=T / 200)
    F = functional_trajectory(traj, rho1, rho2, mode)
    monotone = bool(np.all(np.diff(F) <= monotone_tol * F[:-1]))
    if not monotone:
        raise SolverError("composite functional increased beyond solver tolerance")
    rate = fit_rate(traj.times, F)
    return HypocoerciveReport(mode, traj.times, F, rate, lam, rho1, rho2, float(kappa), monotone,
                              rate >= 0.95 * lam, notes)


# gradient bound --------------------------------------------------------------

@dataclass
class GradientBoundReport:
    K: float
    t: float
    min_interior_slack: float
    scale: float
    boundary_violation: bool
    slack: np.ndarray = field(repr=False)


def gradient_bound_check(V: Potential, f0, t, grid: PhaseGrid, K=None, margin=5, core=None):
    """Slack ``e^{2Kt} P_t |grad f|^2 - |grad P_t f|^2`` on the grid.

    Both semigroup terms come from ``grid_solve``. Points within ``margin``
    cells of the box edge are excluded from the verdict; a violation there
    only is flagged as a boundary artifact. For data that do not decay
    toward the walls, ``core`` restricts the verdict to ``|x|, |v| <= core``.
    """
    if not 0 <= margin < min(grid.nx, grid.nv) // 2:
        raise DomainError("margin leaves no interior")
    K = gradient_bound_constant(V) if K is None else K
    XX, VV = grid.mesh()
    f = np.array(f0(XX, VV) if callable(f0) else f0, dtype=float)
    g0 = grid_grad_norm2(grid, f)
    pf = grid_solve(V, f, t, grid, record_every=t).frames[-1]
    pg = grid_solve(V, g0, t, grid, record_every=t).frames[-1]
    slack = np.exp(2 * K * t) * pg - grid_grad_norm2(grid, pf)
    inner = slack[margin:slack.shape[0] - margin, margin:slack.shape[1] - margin]
    if core is not None:
        inner = slack[(np.abs(XX) <= core) & (np.abs(VV) <= core)]
    scale = float(np.max(g0))
    boundary = bool(np.min(slack) < -1e-4 * scale <= np.min(inner))
    return GradientBoundReport(float(K), t, float(np.min(inner)), scale, boundary, slack)


# invariance and Lyapunov -----------------------------------------------------

def invariance_residual(V: Potential, f, box=7.0, panels=28, order=20):
    """``|int L f dmu|`` for the normalized invariant measure, by tensor Gauss-Legendre."""
    from .heat_kernels import panel_rule

    Vf, _, _ = V.funcs()
    grid = PhaseGrid((-box, box), (-box, box), 8, 8)
    if grid.outside_mass(V) > 1e-10:
        raise DomainError("quadrature box misses more than 1e-10 of the invariant measure")
    Lf = sp.lambdify((X, VEL), kfp_operator(V, f), "numpy")
    xs, wx = panel_rule(-box, box, 2 * box / panels, order)
    XX, VV = np.meshgrid(xs, xs, indexing="ij")
    shift = float(Vf(xs).min())
    w = np.outer(wx * np.exp(-(Vf(xs) - shift)), wx * np.exp(-xs ** 2 / 2))
    vals = np.broadcast_to(np.asarray(Lf(XX, VV), dtype=float), XX.shape)
    return float(abs(np.sum(w * vals)) / np.sum(w))


@dataclass
class LyapunovReport:
    min_W: float
    grad_constant: float
    generator_constant: float
    C: float
    LW: sp.Expr


def lyapunov_check(V: Potential, grid: PhaseGrid):
    """Check ``W = 1 + x^2 + v^2``: ``W >= 1``, ``|grad W| <= C W``, ``L W <= C W`` on the grid."""
    W = 1 + X ** 2 + VEL ** 2
    LW = sp.expand(kfp_operator(V, W))
    g = sp.sqrt(grad_norm2(W))
    XX, VV = grid.mesh()
    Wn = sp.lambdify((X, VEL), W, "numpy")(XX, VV)
    gn = sp.lambdify((X, VEL), g, "numpy")(XX, VV)
    Ln = np.broadcast_to(sp.lambdify((X, VEL), LW, "numpy")(XX, VV), XX.shape)
    c1 = float(np.max(gn / Wn))
    c2 = float(np.max(Ln / Wn))
    return LyapunovReport(float(Wn.min()), c1, c2, max(c1, c2), LW)
