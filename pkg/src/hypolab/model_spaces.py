"""The three model foliations: radial operators, measures, curvature constants.

The Heisenberg group additionally carries an exact carré du champ calculus on
polynomials, built from its left invariant frame

    X_i = d/dx_i - y_i d/dz,   Y_i = d/dy_i + x_i d/dz,   Z = d/dz.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable

import numpy as np
from scipy.special import gammaln

from .errors import ConventionError, DomainError, UnsupportedError
from .poly import Poly


class Kind(str, enum.Enum):
    HEISENBERG = "heisenberg"
    HOPF = "hopf"
    QUATERNIONIC = "quaternionic"


class Convention(str, enum.Enum):
    """How the vertical bracket constant ``rho2`` is normalized.

    ``CD_QUARTER`` : -1/4 Tr_H(J_Z^2)   (curvature-dimension inequality)
    ``LICHNE_FULL``: Tr(J_Z^* J_Z)      (first eigenvalue bound)
    ``BONNET_QUARTER``: 1/4 Tr(J_Z^* J_Z) (diameter bound)
    """

    CD_QUARTER = "CD-quarter-trace"
    LICHNE_FULL = "lichne-full-trace"
    BONNET_QUARTER = "bonnet-quarter-trace"


@dataclass(frozen=True)
class ModelSpace:
    kind: Kind
    n: int

    def __post_init__(self):
        object.__setattr__(self, "kind", Kind(self.kind))
        if int(self.n) != self.n or self.n < 1:
            raise DomainError(f"model parameter n must be a positive integer, got {self.n}")

    @property
    def horizontal_dim(self):
        return 4 * self.n if self.kind is Kind.QUATERNIONIC else 2 * self.n

    @property
    def total_dim(self):
        return {Kind.HEISENBERG: 2 * self.n + 1, Kind.HOPF: 2 * self.n + 1,
                Kind.QUATERNIONIC: 4 * self.n + 3}[self.kind]

    @property
    def fiber_name(self):
        return {Kind.HEISENBERG: "z", Kind.HOPF: "theta", Kind.QUATERNIONIC: "eta"}[self.kind]


def heisenberg(n=1):
    return ModelSpace(Kind.HEISENBERG, n)


def hopf(n=1):
    return ModelSpace(Kind.HOPF, n)


def quaternionic(n=1):
    return ModelSpace(Kind.QUATERNIONIC, n)


# radial operators ------------------------------------------------------------

EDGE = 1e-3


@dataclass(frozen=True)
class RadialOperator:
    """``d_rr + drift(r) d_r + fiber_coefficient(r) * fiber_operator``."""

    model: ModelSpace
    drift: Callable
    fiber_coefficient: Callable
    fiber_operator: str
    r_domain: tuple

    def fiber_drift(self, w):
        # only the SU(2) fiber carries a first-order term
        if self.fiber_operator == "d2_eta + 2 cot(eta) d_eta":
            return 2.0 / np.tan(w)
        return 0.0 * w


def radial_operator(model: ModelSpace) -> RadialOperator:
    n = model.n
    if model.kind is Kind.HEISENBERG:
        return RadialOperator(model, lambda r: (2 * n - 1) / r, lambda r: r * r,
                              "d2_z", (0.0, np.inf))
    if model.kind is Kind.HOPF:
        return RadialOperator(model, lambda r: (2 * n - 1) / np.tan(r) - np.tan(r),
                              lambda r: np.tan(r) ** 2, "d2_theta", (0.0, np.pi / 2))
    return RadialOperator(model, lambda r: (4 * n - 1) / np.tan(r) - 3 * np.tan(r),
                          lambda r: np.tan(r) ** 2, "d2_eta + 2 cot(eta) d_eta",
                          (0.0, np.pi / 2))


def fd_step(x):
    return max(1e-4, 1e-3 * abs(x))


def d1(f, x, h):
    """Fourth-order central first derivative."""
    return (-f(x + 2 * h) + 8 * f(x + h) - 8 * f(x - h) + f(x - 2 * h)) / (12 * h)


def d2(f, x, h):
    """Fourth-order central second derivative."""
    return (-f(x + 2 * h) + 16 * f(x + h) - 30 * f(x) + 16 * f(x - h) - f(x - 2 * h)) / (12 * h * h)


def apply_radial(op: RadialOperator, f, point, h=None):
    """Apply the radial operator to ``f(r, w)`` at ``point = (r, w)``.

    Derivatives are fourth-order central differences; the step defaults to
    ``max(1e-4, 1e-3 |coordinate|)`` per coordinate.
    """
    r, w = (float(p) for p in point)
    lo, hi = op.r_domain
    hr = h or fd_step(r)
    hw = h or fd_step(w)
    if r - 2 * hr <= lo or r + 2 * hr >= hi:
        raise DomainError(f"r={r} too close to the chart boundary {op.r_domain}")
    if op.fiber_operator.startswith("d2_eta") and (w - 2 * hw <= 0 or w + 2 * hw >= np.pi):
        raise DomainError(f"eta={w} too close to the poles of the SU(2) fiber")
    fr = lambda s: f(s, w)  # noqa: E731
    fw = lambda s: f(r, s)  # noqa: E731
    val = d2(fr, r, hr) + op.drift(r) * d1(fr, r, hr)
    fiber = d2(fw, w, hw)
    if op.fiber_operator.startswith("d2_eta"):
        fiber = fiber + op.fiber_drift(w) * d1(fw, w, hw)
    return float(val + op.fiber_coefficient(r) * fiber)


# measures --------------------------------------------------------------------

@dataclass(frozen=True)
class RadialMeasure:
    density: Callable
    total_mass: float
    fiber: str
    r_range: tuple
    fiber_range: tuple


def _log_prefactor(model):
    n = model.n
    if model.kind is Kind.QUATERNIONIC:
        return np.log(8.0) + (2 * n + 1) * np.log(np.pi) - gammaln(2 * n)
    return np.log(2.0) + n * np.log(np.pi) - gammaln(n)


def measure_density(model: ModelSpace, point):
    """Density of the symmetric measure in the ``(r, fiber)`` chart.

    Heisenberg: ``area(S^{2n-1}) r^{2n-1} dr dz``. Hopf:
    ``2 pi^n / G(n) sin^{2n-1} r cos r dr dtheta``. Quaternionic:
    ``8 pi^{2n+1} / G(2n) sin^{4n-1} r cos^3 r sin^2 eta dr deta``.
    """
    r, w = point
    r = np.asarray(r, dtype=float)
    w = np.asarray(w, dtype=float)
    n = model.n
    c = np.exp(_log_prefactor(model))
    if model.kind is Kind.HEISENBERG:
        val = c * r ** (2 * n - 1) + 0 * w
    elif model.kind is Kind.HOPF:
        val = c * np.sin(r) ** (2 * n - 1) * np.cos(r) + 0 * w
    else:
        val = c * np.sin(r) ** (4 * n - 1) * np.cos(r) ** 3 * np.sin(w) ** 2
    return float(val) if val.ndim == 0 else val


def sphere_volume(dim):
    """Volume of the unit sphere ``S^dim``: ``2 pi^{(d+1)/2} / G((d+1)/2)``."""
    return float(2 * np.pi ** ((dim + 1) / 2) / np.exp(gammaln((dim + 1) / 2)))


def radial_measure(model: ModelSpace) -> RadialMeasure:
    if model.kind is Kind.HEISENBERG:
        return RadialMeasure(lambda r, w: measure_density(model, (r, w)), np.inf, "dz",
                             (0.0, np.inf), (-np.inf, np.inf))
    fiber = "dtheta" if model.kind is Kind.HOPF else "deta"
    frange = (-np.pi, np.pi) if model.kind is Kind.HOPF else (0.0, np.pi)
    return RadialMeasure(lambda r, w: measure_density(model, (r, w)),
                         sphere_volume(model.total_dim), fiber, (0.0, np.pi / 2), frange)


# Heisenberg carré du champ ---------------------------------------------------

def heisenberg_names(n):
    return tuple(f"x{i}" for i in range(1, n + 1)) + tuple(f"y{i}" for i in range(1, n + 1)) + ("z",) \
        if n > 1 else ("x", "y", "z")


class HeisenbergCalculus:
    """Exact Gamma-calculus of the Heisenberg sub-Laplacian on polynomials."""

    def __init__(self, n=1):
        self.n = n
        self.names = heisenberg_names(n)
        self.xs = self.names[:n]
        self.ys = self.names[n:2 * n]
        gens = dict(zip(self.names, Poly.generators(self.names)))
        self._x = [gens[v] for v in self.xs]
        self._y = [gens[v] for v in self.ys]

    def coords(self):
        return Poly.generators(self.names)

    def parse(self, text):
        return Poly.parse(text, self.names)

    def _check(self, f):
        if not isinstance(f, Poly):
            raise UnsupportedError("Heisenberg Gamma-calculus only accepts polynomials")
        if f.names != self.names:
            raise UnsupportedError(f"polynomial must be over {self.names}")
        return f

    def X(self, i, f):
        return f.diff(self.xs[i]) - self._y[i] * f.diff("z")

    def Y(self, i, f):
        return f.diff(self.ys[i]) + self._x[i] * f.diff("z")

    def Z(self, f):
        return f.diff("z")

    def lap_h(self, f):
        f = self._check(f)
        out = Poly.constant(self.names, 0)
        for i in range(self.n):
            out = out + self.X(i, self.X(i, f)) + self.Y(i, self.Y(i, f))
        return out

    def lap_v(self, f):
        return self.Z(self.Z(self._check(f)))

    def gamma(self, f, g=None):
        f = self._check(f)
        g = f if g is None else self._check(g)
        out = Poly.constant(self.names, 0)
        for i in range(self.n):
            out = out + self.X(i, f) * self.X(i, g) + self.Y(i, f) * self.Y(i, g)
        return out

    def gamma_v(self, f, g=None):
        f = self._check(f)
        g = f if g is None else self._check(g)
        return self.Z(f) * self.Z(g)

    def gamma2(self, f):
        lf = self.lap_h(f)
        return (self.lap_h(self.gamma(f)) - 2 * self.gamma(f, lf)) / 2

    def gamma2_v(self, f):
        lf = self.lap_h(f)
        return (self.lap_h(self.gamma_v(f)) - 2 * self.gamma_v(f, lf)) / 2

    ORDERS = {"gamma": "gamma", "gamma_v": "gamma_v", "gamma2": "gamma2",
              "gamma2_v": "gamma2_v", "lap_h": "lap_h", "lap_v": "lap_v"}

    def evaluate(self, f, order, point):
        if order not in self.ORDERS:
            raise UnsupportedError(f"unknown order {order!r}; choose from {sorted(self.ORDERS)}")
        return getattr(self, self.ORDERS[order])(f)(*point)


def heisenberg_gamma_calculus(f, order, point, n=1):
    """Exact value of one of ``gamma, gamma_v, gamma2, gamma2_v, lap_h, lap_v``."""
    return HeisenbergCalculus(n).evaluate(f, order, point)


def check_commutation(f, n=1, sample=None):
    """Max deviation from ``[lap_h, lap_v] f = 0`` and the Gamma intertwining.

    Both differences are formed as exact polynomials; the return value is the
    largest absolute value over the sample points (0 when the difference
    polynomials vanish identically).
    """
    cal = HeisenbergCalculus(n)
    f = cal._check(f)
    d1_ = cal.lap_h(cal.lap_v(f)) - cal.lap_v(cal.lap_h(f))
    d2_ = cal.gamma(f, cal.gamma_v(f)) - cal.gamma_v(f, cal.gamma(f))
    if d1_.is_zero() and d2_.is_zero():
        return 0.0
    if sample is None:
        rng = np.random.default_rng(0)
        sample = [tuple(Fraction(int(v), 7) for v in rng.integers(-14, 15, len(cal.names)))
                  for _ in range(16)]
    return float(max(max(abs(d1_(*p)), abs(d2_(*p))) for p in sample))


# curvature constants ---------------------------------------------------------

@dataclass(frozen=True)
class CurvatureConstants:
    rho1: object
    kappa: object
    rho2: object
    horizontal_dim: int
    convention: Convention

    def __post_init__(self):
        object.__setattr__(self, "convention", Convention(self.convention))

    def require(self, convention):
        convention = Convention(convention)
        if self.convention is not convention:
            raise ConventionError(
                f"constants are in the {self.convention.value} normalization, "
                f"{convention.value} was required")
        return self

    def as_tuple(self):
        return (self.rho1, self.kappa, self.rho2, self.horizontal_dim)


def heisenberg_j_matrix(n=1):
    """``J_Z`` on the horizontal frame, from the frame brackets.

    ``g_H(J_Z A, B) = g_V(Z, T(A, B))`` with torsion ``T(A, B) = -[A, B]_V``.
    Brackets are computed from the vector fields themselves, not from a table.
    """
    cal = HeisenbergCalculus(n)
    frame = [("X", i) for i in range(n)] + [("Y", i) for i in range(n)]

    def apply(vf, f):
        kind, i = vf
        return cal.X(i, f) if kind == "X" else cal.Y(i, f)

    coords = cal.coords()
    zero = tuple(Fraction(0) for _ in cal.names)
    m = len(frame)
    J = np.zeros((m, m))
    for a, A in enumerate(frame):
        for b, B in enumerate(frame):
            # components of [A, B] in the coordinate basis
            comp = [apply(A, apply(B, c)) - apply(B, apply(A, c)) for c in coords]
            # vertical part in the frame: c_z + sum a_i y_i - b_i x_i
            vert = comp[-1]
            for i in range(n):
                vert = vert + comp[i] * cal._y[i] - comp[n + i] * cal._x[i]
            # left invariance makes this constant; read it at the origin
            J[b, a] = -float(vert(*zero))
    return J


def curvature_constants(model: ModelSpace, convention) -> CurvatureConstants:
    """Curvature constants of a model in an explicit ``rho2`` normalization.

    Heisenberg constants are computed from the frame. The sphere fibrations
    are tabulated in the full-trace normalization only; asking for them in a
    quarter-trace convention raises instead of guessing a conversion.
    """
    convention = Convention(convention)
    d = model.n
    if model.kind is Kind.HEISENBERG:
        J = heisenberg_j_matrix(d)
        J2 = J @ J
        kappa = float(np.max(np.linalg.eigvalsh(-J2)))
        trace = float(np.trace(J.T @ J))
        rho2 = trace if convention is Convention.LICHNE_FULL else trace / 4
        return CurvatureConstants(0, _clean(kappa), _clean(rho2), 2 * d, convention)
    if convention is not Convention.LICHNE_FULL:
        raise ConventionError(
            f"{model.kind.value} constants are only tabulated in the "
            f"{Convention.LICHNE_FULL.value} normalization")
    if model.kind is Kind.HOPF:
        return CurvatureConstants(2 * (d + 1), 1, 2 * d, 2 * d, convention)
    # Ric of HP^d under the submersion metric from the unit S^{4d+3} is 4(d+2)
    return CurvatureConstants(4 * (d + 2), 3, 4 * d, 4 * d, convention)


def _clean(v):
    r = round(v)
    return int(r) if abs(v - r) < 1e-12 else v
