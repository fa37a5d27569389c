import numpy as np
import pytest
import sympy as sp
from scipy.linalg import expm

from hypolab import kolmogorov_kfp as kfp
from hypolab.errors import DomainError, InfeasibleError, SolverError, UnsupportedError
from hypolab.suites import INVARIANCE_BATTERY, bochner_jet_slack, keta_certificate, random_jets

Q = kfp.Potential.quadratic()
FLAT = kfp.Potential(sp.Integer(0), (0.0, 0.0), "flat")
x, v = sp.symbols("x v", real=True)


@pytest.fixture(scope="module")
def grid64():
    return kfp.PhaseGrid(nx=64, nv=64, dt=0.02)


@pytest.mark.parametrize("f,point,expected", [("v", (0.3, 0.7), -0.7 + 0.3), ("x", (0.3, 0.7), -0.7),
                                              ("5", (1.0, -2.0), 0.0), ("v**2", (1.0, 2.0), 2 - 8 + 4)])
def test_operator_examples(f, point, expected):
    assert kfp.kfp_apply(Q, f, point) == pytest.approx(expected, abs=1e-14)


def test_operator_on_callables_matches_symbolic():
    f = lambda a, b: np.sin(a) * np.cos(2 * b)  # noqa: E731
    assert kfp.kfp_apply(Q, f, (0.4, -0.3)) == pytest.approx(
        kfp.kfp_apply(Q, "sin(x)*cos(2*v)", (0.4, -0.3)), abs=1e-9)


def test_foreign_symbols_are_rebound():
    assert kfp.kfp_apply(Q, sp.Symbol("v") ** 2, (1.0, 2.0)) == pytest.approx(-2.0)


def test_t2_of_velocity():
    # |grad v|^2 = 2 is constant and L v = -v, so T2 = <grad v, grad v> = 2
    assert float(kfp.t2_expr(FLAT, "v")) == pytest.approx(2.0)


def test_t2_jet_matches_symbolic():
    f = "sin(x)*v**2 + x*v"
    e = kfp._as_expr(f)
    pt = (0.4, -0.8)
    X, VEL = kfp.X, kfp.VEL
    e = e.subs({x: X, v: VEL})
    jet = [float(sp.diff(e, *d).subs({X: pt[0], VEL: pt[1]}))
           for d in ((X,), (VEL,), (X, X), (X, VEL), (VEL, VEL))]
    assert kfp.t2_from_jet(Q, pt, jet) == pytest.approx(float(kfp.t2_form(Q, f, pt)), rel=1e-12)


def test_bochner_on_random_jets():
    pts, jets = random_jets(np.random.default_rng(3), 100)
    for V in (Q, kfp.Potential.parse("log(cosh(x))")):
        assert min(bochner_jet_slack(V, p, j) for p, j in zip(pts, jets)) >= -1e-9


@pytest.mark.parametrize("f", INVARIANCE_BATTERY[:6])
def test_invariance(f):
    assert kfp.invariance_residual(Q, f) < 1e-8


def test_invariance_heavier_tails():
    # e^{-log cosh x} only decays like e^{-|x|}, so the box has to be wide
    V = kfp.Potential.parse("log(cosh(x))")
    assert kfp.invariance_residual(V, "v*exp(-x**2-v**2)", box=30.0, panels=120) < 1e-8
    with pytest.raises(DomainError):
        kfp.invariance_residual(V, "v*exp(-x**2-v**2)")


def test_invariance_box_too_small():
    with pytest.raises(DomainError):
        kfp.invariance_residual(Q, "v", box=3.0)


def test_potential_parsing():
    assert kfp.Potential.parse("x**2/2").hessian_range == (1.0, 1.0)
    lc = kfp.Potential.parse("log(cosh(x))")
    assert lc.hessian_range[0] >= -1e-12 and lc.hessian_range[1] == pytest.approx(1.0)
    with pytest.raises(DomainError):
        kfp.Potential.parse("x**4")
    with pytest.raises(UnsupportedError):
        kfp.Potential.parse("x*v")


@pytest.mark.parametrize("eta", [0.1, 0.2, 0.25, 0.3, 0.4])
def test_k_eta_against_closed_form(eta):
    res = kfp.k_eta(Q, eta)
    assert res.K == pytest.approx(kfp.k_eta_closed_form(Q, eta), abs=1e-10)
    assert res.K >= -0.5
    assert keta_certificate(Q, eta, res.K) >= -1e-9


def test_k_eta_quarter():
    assert kfp.k_eta(Q, 0.25).K == pytest.approx(0.5, abs=1e-12)


def test_k_eta_certificate_fails_below_optimum():
    K = kfp.k_eta(Q, 0.25).K
    assert keta_certificate(Q, 0.25, K - 0.1, count=2000) < 0


def test_k_eta_errors():
    with pytest.raises(DomainError):
        kfp.k_eta(Q, 0.5)
    steep = kfp.Potential(x ** 2 * 20, (40.0, 40.0), "steep")
    with pytest.raises(InfeasibleError):
        kfp.k_eta(steep, 0.45, k_max=10.0)


def test_gradient_bound_constant():
    # -DY for V = x^2/2 has eigenvalues 0 and 1
    assert kfp.gradient_bound_constant(Q) == pytest.approx(0.0, abs=1e-12)


def test_phase_grid_validation():
    with pytest.raises(DomainError):
        kfp.PhaseGrid((-3, 4), (-7, 7))
    with pytest.raises(DomainError):
        kfp.PhaseGrid(nx=2)
    assert kfp.PhaseGrid().outside_mass(Q) < 1e-10


def test_constants_are_preserved(grid64):
    tr = kfp.grid_solve(Q, lambda a, b: np.full_like(a, 3.0), 1.0, grid64)
    np.testing.assert_allclose(tr.frames[-1], 3.0, atol=1e-12)


def test_mass_conservation_and_energy(grid64):
    tr = kfp.grid_solve(Q, lambda a, b: a, 5.0, grid64, record_every=0.5)
    assert tr.mass_drift < 1e-6
    energy = [np.sum(tr.disc.weight * f * f) for f in tr.frames]
    assert np.all(np.diff(energy) <= 1e-12)


def exact_quadratic_solution(coeffs, t, XX, VV):
    """Evolve a polynomial of degree <= 2 under L for V = x^2/2 exactly."""
    # basis 1, x, v, x^2, xv, v^2; columns hold L applied to each basis element
    A = np.zeros((6, 6))
    A[2, 1] = -1                                  # L x = -v
    A[1, 2], A[2, 2] = 1, -1                      # L v = x - v
    A[4, 3] = -2                                  # L x^2 = -2xv
    A[3, 4], A[4, 4], A[5, 4] = 1, -1, -1         # L xv = x^2 - xv - v^2
    A[0, 5], A[4, 5], A[5, 5] = 2, 2, -2          # L v^2 = 2 + 2xv - 2v^2
    c = expm(t * A) @ np.asarray(coeffs, dtype=float)
    return c[0] + c[1] * XX + c[2] * VV + c[3] * XX ** 2 + c[4] * XX * VV + c[5] * VV ** 2


def test_grid_solution_converges_to_polynomial_flow():
    errs = []
    for n in (64, 128):
        grid = kfp.PhaseGrid(nx=n, nv=n)
        XX, VV = grid.mesh()
        tr = kfp.grid_solve(Q, lambda a, b: a, 1.0, grid, record_every=1.0)
        exact = exact_quadratic_solution([0, 1, 0, 0, 0, 0], 1.0, XX, VV)
        d, w = tr.frames[-1] - exact, tr.disc.weight
        errs.append(np.sqrt(np.sum(w * d * d) / np.sum(w * exact * exact)))
    assert errs[1] < 2e-3
    # second order in space: halving the mesh width cuts the error by about 4
    assert errs[0] / errs[1] > 3.5


def test_solver_rejects_bad_input(grid64):
    with pytest.raises(DomainError):
        kfp.grid_solve(Q, np.zeros((3, 3)), 1.0, grid64)
    with pytest.raises(DomainError):
        kfp.grid_solve(Q, lambda a, b: a, -1.0, grid64)


def test_poincare_constant_and_refinement():
    k64 = kfp.poincare_constant(Q, kfp.PhaseGrid(nx=64, nv=64))
    k128 = kfp.poincare_constant(Q, kfp.PhaseGrid(nx=128, nv=128))
    assert k64.kappa > 0
    assert abs(k64.kappa - k128.kappa) <= 0.02 * k128.kappa
    # for a standard Gaussian the minimizers are linear and kappa = lambda_min([[4,2],[2,2]])
    assert k128.kappa == pytest.approx(3 - np.sqrt(5), rel=1e-6)
    assert k128.rayleigh == pytest.approx(k128.kappa, rel=1e-8)


def test_logsob_constant(grid64):
    c, ratio = kfp.logsob_constant(Q, kfp.PhaseGrid())
    assert c == pytest.approx(2 * (3 - np.sqrt(5)), rel=1e-5)
    assert ratio == pytest.approx(c, rel=1e-3)
    with pytest.raises(UnsupportedError):
        kfp.logsob_constant(kfp.Potential.parse("log(cosh(x))"), grid64)


def test_predicted_rate_arithmetic():
    assert kfp.predicted_rate(0.5, 0.25, 1.0) == pytest.approx(2 / 7)
    assert kfp.predicted_rate(0.5, 0.25, 1.0, "logsob") == pytest.approx(0.5 / 2.5)
    with pytest.raises(UnsupportedError):
        kfp.predicted_rate(0.5, 0.25, 1.0, "entropy")


def test_fit_rate_recovers_exponential():
    t = np.linspace(0, 10, 101)
    assert kfp.fit_rate(t, 3 * np.exp(-0.7 * t)) == pytest.approx(0.7, rel=1e-10)


def test_decay_report(grid64):
    rep = kfp.hypocoercive_decay(Q, lambda a, b: a, 10.0, grid64)
    assert rep.monotone and rep.passed
    assert rep.predicted_rate == pytest.approx(2 * 0.25 * (3 - np.sqrt(5)) / (3 - np.sqrt(5) + 0.75), rel=1e-6)
    assert rep.fitted_rate >= 0.95 * rep.predicted_rate


def test_decay_rate_stable_under_refinement():
    coarse = kfp.hypocoercive_decay(Q, lambda a, b: a, 10.0, kfp.PhaseGrid(nx=64, nv=64))
    fine = kfp.hypocoercive_decay(Q, lambda a, b: a, 10.0, kfp.PhaseGrid(nx=128, nv=128))
    assert abs(coarse.fitted_rate - fine.fitted_rate) <= 0.05 * fine.fitted_rate


def test_logsob_decay(grid64):
    rep = kfp.hypocoercive_decay(Q, lambda a, b: 1 + 0.5 * np.sin(a + b), 6.0, grid64, mode="logsob")
    assert rep.passed
    with pytest.raises(DomainError):
        kfp.hypocoercive_decay(Q, lambda a, b: np.sin(a), 1.0, grid64, mode="logsob")


def test_gradient_bound_and_negative_control():
    grid = kfp.PhaseGrid()
    rep = kfp.gradient_bound_check(Q, lambda a, b: np.sin(a) * np.exp(-b * b), 0.5, grid)
    assert rep.min_interior_slack >= -1e-4 * rep.scale
    sv = lambda a, b: np.sin(b)  # noqa: E731
    ok = kfp.gradient_bound_check(Q, sv, 0.5, grid, core=3.0)
    bad = kfp.gradient_bound_check(Q, sv, 0.5, grid, K=ok.K - 0.5, core=3.0)
    assert ok.min_interior_slack >= -1e-4 * ok.scale
    assert bad.min_interior_slack < -1e-4 * bad.scale


def test_gradient_bound_constant_datum(grid64):
    rep = kfp.gradient_bound_check(Q, lambda a, b: np.ones_like(a), 0.5, grid64)
    assert np.max(np.abs(rep.slack)) < 1e-12


def test_lyapunov():
    rep = kfp.lyapunov_check(Q, kfp.PhaseGrid(nx=32, nv=32))
    assert rep.min_W >= 1
    assert sp.simplify(rep.LW - (2 - 2 * kfp.VEL ** 2)) == 0
    assert 0 < rep.C < np.inf
