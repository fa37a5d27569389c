"""Verification suites: each one sweeps a fixed lattice and returns rows plus verdicts.

The CLI serializes these; the acceptance tests assert on the verdicts.
"""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import product

import numpy as np

from . import geometry_estimates as geo
from . import heat_kernels as hk
from . import kolmogorov_kfp as kfp
from .model_spaces import (Convention, Kind, ModelSpace, apply_radial, check_commutation,
                           curvature_constants, heisenberg, heisenberg_names, hopf, quaternionic,
                           radial_operator)
from .poly import Poly, monomials
from .specfun import jacobi_table
from .spectral_bounds import check_sharpness, enumerate_spectrum

KERNEL_T = (0.5, 1.0, 2.0)
KERNEL_R = (0.3, 0.7, 1.1)
HOPF_THETA = (0.4, 1.0, 2.0)
QUAT_ETA = (0.4, 1.2, 2.4)
RELATION_POINTS = tuple((t, r, th) for t in KERNEL_T for r, th in zip(KERNEL_R, HOPF_THETA))
MASS_T = (0.1, 0.5, 2.0)
LIYAU_LATTICE = tuple((n, 0.2, t, p) for n in (1, 2) for t in (0.3, 0.6, 1.2)
                      for p in ((0.5, 0.2), (1.0, 0.5)))
HARNACK_LATTICE = tuple((n, x, y, 0.3, 0.6) for n in (1, 2)
                        for x, y in ((0.0, 0.0), (0.5, 0.0), (1.0, 0.0), (0.5, 1.0)))
KFP_ETAS = (0.1, 0.2, 0.3, 0.4)


@dataclass
class Verdict:
    name: str
    passed: bool
    detail: str = ""

    def __post_init__(self):
        self.passed = bool(self.passed)


@dataclass
class SuiteResult:
    name: str
    rows: list
    verdicts: list
    refs: list
    params: dict = field(default_factory=dict)

    @property
    def passed(self):
        return all(v.passed for v in self.verdicts)


def threads():
    """Worker count from ``HYPOLAB_THREADS``; all cores when unset."""
    raw = os.environ.get("HYPOLAB_THREADS")
    if raw:
        return max(1, int(raw))
    return os.cpu_count() or 1


def sweep(fn, items):
    """Ordered parallel map over ``items``."""
    items = list(items)
    n = min(threads(), len(items)) or 1
    if n == 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))


def _rel(a, b):
    return abs(a - b) / abs(b)


# kernels ---------------------------------------------------------------------

def representations(tol_hopf=1e-8, tol_quat=1e-6):
    jobs = [("hopf", n, t, r, th) for n in (1, 2) for t, r, th in product(KERNEL_T, KERNEL_R, HOPF_THETA)]
    jobs += [("quaternionic", 1, t, r, e) for t, r, e in product(KERNEL_T, KERNEL_R, QUAT_ETA)]

    def one(job):
        kind, n, t, r, w = job
        if kind == "hopf":
            s, i = hk.hopf_kernel_series(n, t, r, w), hk.hopf_kernel_integral(n, t, r, w)
        else:
            s, i = hk.quaternionic_kernel_series(n, t, r, w), hk.quaternionic_kernel_integral(n, t, r, w)
        return {"model": kind, "n": n, "t": t, "r": r, "fiber": w, "series": s.value,
                "integral": i.value, "rel_diff": _rel(i.value, s.value)}

    rows = sweep(one, jobs)
    worst_h = max(r["rel_diff"] for r in rows if r["model"] == "hopf")
    worst_q = max(r["rel_diff"] for r in rows if r["model"] == "quaternionic")
    positive = all(r["series"] > 0 for r in rows)
    verdicts = [Verdict("hopf series = integral", worst_h < tol_hopf, f"max rel diff {worst_h:.3e}"),
                Verdict("quaternionic series = integral", worst_q < tol_quat, f"max rel diff {worst_q:.3e}"),
                Verdict("kernel positive on lattice", positive)]
    return SuiteResult("representations", rows, verdicts,
                       ["Hopf and quaternionic heat kernels: eigenfunction series versus fiber integral"],
                       {"tol_hopf": tol_hopf, "tol_quat": tol_quat})


def relation(tol=1e-6):
    def one(p):
        t, r, th = p
        lhs, rhs, rel = hk.hopf_quaternionic_relation(1, t, r, th)
        return {"t": t, "r": r, "theta": th, "quaternionic": lhs, "hopf_derivative": rhs, "rel_residual": rel}

    rows = sweep(one, RELATION_POINTS)
    worst = max(r["rel_residual"] for r in rows)
    return SuiteResult("relation", rows, [Verdict("relation residual", worst < tol, f"max {worst:.3e}")],
                       ["quaternionic kernel as a fiber derivative of the Hopf kernel one dimension up"],
                       {"tol": tol})


def masses(tol=1e-6):
    jobs = [(m, t) for m in (heisenberg(1), hopf(1), quaternionic(1)) for t in MASS_T]

    def one(job):
        m, t = job
        mass = hk.kernel_mass(m, t)
        return {"model": m.kind.value, "n": m.n, "t": t, "mass": mass, "defect": abs(mass - 1)}

    rows = sweep(one, jobs)
    worst = max(r["defect"] for r in rows)
    return SuiteResult("masses", rows, [Verdict("stochastic completeness", worst < tol, f"max defect {worst:.3e}")],
                       ["stochastic completeness: the semigroup preserves constants"], {"tol": tol})


# spectra ---------------------------------------------------------------------

def eigenfunction_residual(model: ModelSpace, a, b, point=(0.6, 0.9)):
    """``|L phi + lambda phi| / |phi|`` for the series eigenfunction with indices ``(a, b)``."""
    n = model.n
    if model.kind is Kind.HOPF:
        m, k = a, b
        lam = int(hk.hopf_rates(n, m, k))

        def phi(r, th):
            return float(np.cos(k * th) * np.cos(r) ** k * jacobi_table(m, n - 1, k, np.cos(2 * r))[m])
    else:
        k, m = a, b
        lam = int(hk.quaternionic_rates(n, k, m))

        def phi(r, eta):
            U = hk.chebyshev_u_table(m, np.cos(eta))[m]
            return float(U * np.cos(r) ** m * jacobi_table(k, 2 * n - 1, m + 1, np.cos(2 * r))[k])

    val = phi(*point)
    Lphi = apply_radial(radial_operator(model), phi, point)
    return lam, abs(Lphi + lam * val) / max(abs(val), 1e-300)


def spectrum(count=20, models=None):
    models = models or [hopf(1), hopf(2), quaternionic(1), quaternionic(2)]
    rows, verdicts = [], []
    for model in models:
        levels = enumerate_spectrum(model, count)
        top = levels[-1].eigenvalue
        exps = sorted(e for e in hk.series_exponents(model, top, top) if e <= top)
        match = [e.eigenvalue for e in levels] == exps[:count]
        worst = 0.0
        for e in levels:
            lam, res = eigenfunction_residual(model, *e.indices)
            if lam != e.eigenvalue:
                worst = np.inf
            worst = max(worst, res / max(lam, 1))
            rows.append({"model": model.kind.value, "n": model.n, "eigenvalue": e.eigenvalue,
                         "indices": list(e.indices), "eigenfunction_residual": res})
        verdicts.append(Verdict(f"{model.kind.value} n={model.n}: levels = series exponents", match))
        verdicts.append(Verdict(f"{model.kind.value} n={model.n}: eigenfunctions", worst < 1e-6,
                                f"max relative residual {worst:.2e}"))
    l1h = enumerate_spectrum(hopf(1), 2)[1].eigenvalue
    l1q = enumerate_spectrum(quaternionic(1), 2)[1].eigenvalue
    verdicts.append(Verdict("hopf n=1 lambda_1 = 2", l1h == 2, f"got {l1h}"))
    verdicts.append(Verdict("quaternionic n=1 lambda_1 = 1", l1q == 1, f"got {l1q}"))
    return SuiteResult("spectrum", rows, verdicts,
                       ["sub-Laplacian spectra of the Hopf and quaternionic Hopf fibrations"], {"count": count})


def lichnerowicz(d_range=range(1, 6)):
    rows, ok = [], True
    for kind in (Kind.HOPF, Kind.QUATERNIONIC):
        for row in check_sharpness(kind, d_range):
            rows.append({"model": kind.value, "d": row.d, "bound": str(row.bound),
                         "lambda1": row.lambda1, "equal": row.equal})
            ok &= row.equal
    h1 = next((r for r in rows if r["model"] == "hopf" and r["d"] == 1), None)
    verdicts = [Verdict("bound = lambda_1 for every d", ok)]
    if h1 is not None:
        verdicts.append(Verdict("hopf d=1 bound = 2", Fraction(h1["bound"]) == 2, h1["bound"]))
    return SuiteResult("lichnerowicz", rows, verdicts,
                       ["sharp first-eigenvalue bound under the curvature-dimension inequality"],
                       {"d": list(d_range)})


# Gamma calculus --------------------------------------------------------------

def random_cubic(rng, names):
    """Integer-coefficient polynomial of degree exactly 3 in ``names``."""
    mons = list(monomials(names, 3))
    coeffs = rng.integers(-5, 6, len(mons))
    cubic = [i for i, m in enumerate(mons) if m.degree() == 3]
    if not any(coeffs[i] for i in cubic):
        coeffs[cubic[0]] = 1
    terms = {}
    for c, m in zip(coeffs, mons):
        (e,) = m.terms
        terms[e] = int(c)
    return Poly(names, terms)


def cd(count=100, epsilons=(Fraction(1, 10), Fraction(1), Fraction(10)), seed=0, tol=1e-10):
    rng = np.random.default_rng(seed)
    rows, worst = [], np.inf
    for n in (1, 2):
        names = heisenberg_names(n)
        c = curvature_constants(heisenberg(n), Convention.CD_QUARTER)
        for i in range(count):
            f = random_cubic(rng, names)
            point = tuple(Fraction(int(v), 4) for v in rng.integers(-8, 9, len(names)))
            for eps in epsilons:
                s = geo.cd_inequality_slack(f, point, eps, c)
                worst = min(worst, float(s))
                rows.append({"n": n, "index": i, "epsilon": str(eps), "slack": float(s)})
    return SuiteResult("cd", rows, [Verdict("CD slack >= -tol", worst >= -tol, f"min slack {worst:.6g}")],
                       ["curvature-dimension inequality on the Heisenberg group with constants (0, 4, 2n, 2n)"],
                       {"count": count, "seed": seed, "tol": tol})


def commutation(max_degree=6, dims=(1, 2)):
    rows, ok = [], True
    for n in dims:
        mons = list(monomials(heisenberg_names(n), max_degree))
        bad = [str(m) for m in mons if check_commutation(m, n) != 0.0]
        ok &= not bad
        rows.append({"n": n, "monomials": len(mons), "failures": len(bad)})
    return SuiteResult("commutation", rows, [Verdict("exact commutation on all monomials", ok)],
                       ["horizontal and vertical Laplacians commute; Gamma intertwining"],
                       {"max_degree": max_degree})


# Li-Yau, Harnack, diameters --------------------------------------------------

def liyau(tol=1e-6):
    def one(job):
        n, s, t, p = job
        rec = geo.liyau_slack(n, s, t, p)
        return {"n": n, "s": s, "t": t, "r": p[0], "z": p[1], "slack": rec.slack}

    rows = sweep(one, LIYAU_LATTICE)
    worst = min(r["slack"] for r in rows)
    return SuiteResult("liyau", rows, [Verdict("Li-Yau slack >= -tol", worst >= -tol, f"min {worst:.6g}")],
                       ["Li-Yau gradient estimate, rho1 = 0 form, Heisenberg heat kernel"], {"tol": tol})


def harnack(tol=1e-6):
    def one(job):
        n, x, y, s, t = job
        rec = geo.harnack_check(n, x, y, s, t)
        return {"n": n, "x": x, "y": y, "s": s, "t": t, "distance": rec.distance, "slack": rec.slack}

    rows = sweep(one, HARNACK_LATTICE)
    worst = min(r["slack"] for r in rows)
    axis = [r["slack"] for r in rows if r["n"] == 1 and r["y"] == 0.0]
    trend = "increasing" if np.all(np.diff(axis) > 0) else "decreasing" if np.all(np.diff(axis) < 0) else "mixed"
    return SuiteResult("harnack", rows,
                       [Verdict("Harnack slack >= -tol", worst >= -tol, f"min {worst:.6g}; slack vs distance {trend}")],
                       ["parabolic Harnack inequality from the Li-Yau estimate"], {"tol": tol})


def phi(count=10, seed=0, tol=1e-8):
    rng = np.random.default_rng(seed)
    pairs = [(1.0, 1.0)] + [tuple(rng.uniform(0.1, 10, 2)) for _ in range(count)]
    rows = []
    for a, D in pairs:
        q, c = geo.phi_diameter(a, D)
        rows.append({"alpha": a, "D": D, "quadrature": q, "closed_form": c, "abs_diff": abs(q - c)})
    worst = max(r["abs_diff"] for r in rows)
    v11 = rows[0]["quadrature"]
    return SuiteResult("phi", rows,
                       [Verdict("quadrature = closed form", worst < tol, f"max diff {worst:.3e}"),
                        Verdict("value at (1,1) = 8.885766", abs(v11 - 8.885766) < 1e-6, f"{v11:.9f}")],
                       ["diameter bound from ultracontractivity via Phi"], {"count": count, "seed": seed, "tol": tol})


def diameter(count=100, seed=0, tol=1e-12):
    rng = np.random.default_rng(seed)
    rows = []
    for _ in range(count):
        r1, r2 = rng.uniform(0.1, 10, 2)
        k = rng.uniform(0, 10)
        n = int(rng.integers(1, 6))
        b = geo.bonnet_myers_diameter(geo.DiameterInputs(r1, r2, k, n, 3.0))
        rows.append({"rho1": r1, "rho2": r2, "kappa": k, "n": n, "general": b.general, "beta3": b.beta3,
                     "rel_diff": _rel(b.general, b.beta3)})
    worst = max(r["rel_diff"] for r in rows)
    return SuiteResult("diameter", rows, [Verdict("general(beta=3) = beta3 form", worst < tol, f"max {worst:.3e}")],
                       ["Bonnet-Myers type diameter bound"], {"count": count, "seed": seed, "tol": tol})


# kinetic Fokker-Planck -------------------------------------------------------

INVARIANCE_BATTERY = (
    "v*exp(-x**2-v**2)", "x*v*exp(-x**2-v**2)", "exp(-x**2-v**2)", "x*exp(-x**2-v**2)",
    "v**2*exp(-x**2-v**2)", "x**2*v*exp(-x**2-v**2)", "x*v**3*exp(-x**2-v**2)",
    "sin(x)*exp(-x**2-v**2)", "cos(v)*exp(-x**2-v**2)", "sin(x+v)*exp(-(x**2+v**2)/2)",
    "exp(-(x-1)**2-v**2)", "exp(-x**2-(v+1)**2)", "v*exp(-(x-0.5)**2-2*v**2)",
    "(x**3-v)*exp(-x**2-v**2)", "x*v*exp(-2*x**2-v**2/2)", "exp(-x**2-x*v-v**2)",
    "atan(x)*v*exp(-x**2-v**2)", "cos(2*x)*sin(v)*exp(-x**2-v**2)",
    "(1+x**2)**-1*exp(-v**2)*exp(-x**2)", "v**4*x*exp(-x**2-v**2)",
)


def kfp_invariance(potential=None, tol=1e-8):
    V = potential or kfp.Potential.quadratic()
    rows = [{"f": f, "residual": kfp.invariance_residual(V, f)} for f in INVARIANCE_BATTERY]
    worst = max(r["residual"] for r in rows)
    return SuiteResult("kfp-invariance", rows, [Verdict("int L f dmu = 0", worst < tol, f"max {worst:.3e}")],
                       ["invariant measure of the kinetic Fokker-Planck operator"],
                       {"potential": V.name, "tol": tol})


def random_jets(rng, count, box=3.0, scale=3.0):
    pts = rng.uniform(-box, box, (count, 2))
    jets = rng.normal(0, scale, (count, 5))
    return pts, jets


def bochner_jet_slack(V, point, jet):
    """``T_2 - (-DY)(grad f, grad f)`` from a 2-jet ``(f_x, f_v, f_xx, f_xv, f_vv)``."""
    fx, fv = jet[0], jet[1]
    g = np.array([2 * fx + fv, fv])
    _, _, d2 = V.funcs()
    h = float(d2(point[0]))
    M = kfp._keta_matrix(h, 0.0, 0.0)
    return float(kfp.t2_from_jet(V, point, jet) - g @ M @ g)


def kfp_bochner(potential=None, count=200, seed=0, tol=1e-9):
    V = potential or kfp.Potential.quadratic()
    rng = np.random.default_rng(seed)
    pts, jets = random_jets(rng, count)
    rows = [{"x": p[0], "v": p[1], "slack": bochner_jet_slack(V, p, j)} for p, j in zip(pts, jets)]
    worst = min(r["slack"] for r in rows)
    return SuiteResult("kfp-bochner", rows, [Verdict("T2 >= (Ric_V - DY)", worst >= -tol, f"min {worst:.3e}")],
                       ["Bochner inequality for the twisted metric on phase space"],
                       {"potential": V.name, "count": count, "seed": seed, "tol": tol})


def keta_certificate(V, eta, K, count=500, seed=0):
    """Min over random 2-jets of ``T_2 + K Gamma^V - eta Gamma^H``."""
    rng = np.random.default_rng(seed)
    pts, jets = random_jets(rng, count)
    worst = np.inf
    for p, j in zip(pts, jets):
        gh = (2 * j[0] + j[1]) ** 2
        gv = j[1] ** 2
        worst = min(worst, float(kfp.t2_from_jet(V, p, j) + K * gv - eta * gh))
    return worst


def kfp_keta(potential=None, etas=KFP_ETAS, count=500, seed=0, tol=1e-9):
    V = potential or kfp.Potential.quadratic()
    rows = []
    for eta in etas:
        res = kfp.k_eta(V, eta)
        cert = keta_certificate(V, eta, res.K, count, seed)
        rows.append({"eta": eta, "K": res.K, "closed_form": kfp.k_eta_closed_form(V, eta), "certificate_min": cert})
    Ks = [r["K"] for r in rows]
    verdicts = [Verdict("certificate", all(r["certificate_min"] >= -tol for r in rows),
                        f"min {min(r['certificate_min'] for r in rows):.3e}"),
                Verdict("K(eta) >= -1/2", all(k >= -0.5 for k in Ks)),
                Verdict("K(eta) nondecreasing", bool(np.all(np.diff(Ks) >= -1e-12)))]
    return SuiteResult("kfp-keta", rows, verdicts, ["K(eta) bound for the kinetic Fokker-Planck T2 form"],
                       {"potential": V.name, "etas": list(etas), "count": count, "seed": seed, "tol": tol})


def default_decay_datum(x, v):
    return x + 0 * v


def default_entropy_datum(x, v):
    return 1 + 0.5 * np.sin(x + v)


def kfp_decay(potential=None, eta=0.25, T=10.0, grid=None, mode="poincare", f0=None):
    V = potential or kfp.Potential.quadratic()
    grid = grid or kfp.PhaseGrid()
    if f0 is None:
        f0 = default_decay_datum if mode == "poincare" else default_entropy_datum
    rep = kfp.hypocoercive_decay(V, f0, T, grid, mode=mode, eta=eta)
    rows = [{"t": float(t), "F": float(F)} for t, F in zip(rep.times, rep.functional)]
    verdicts = [Verdict("fitted rate >= 0.95 predicted", rep.passed,
                        f"fitted {rep.fitted_rate:.6g}, predicted {rep.predicted_rate:.6g}"),
                Verdict("functional nonincreasing", rep.monotone)]
    params = {"potential": V.name, "eta": eta, "T": T, "mode": mode, "nx": grid.nx, "nv": grid.nv,
              "dt": grid.dt, "rho1": rep.rho1, "rho2": rep.rho2, "kappa": rep.kappa,
              "fitted_rate": rep.fitted_rate, "predicted_rate": rep.predicted_rate, "notes": rep.notes}
    return SuiteResult("kfp-decay", rows, verdicts,
                       ["hypocoercive decay of the composite functional with lambda = 2 rho2 kappa/(kappa + rho1 + rho2)"],
                       params)


def gradbound_datum(x, v):
    return np.sin(x) * np.exp(-v ** 2)


def control_datum(x, v):
    return np.sin(v) + 0 * x


def kfp_gradbound(potential=None, t=0.5, grid=None, tol=1e-4, control_shift=0.5, core=3.0):
    """Gradient bound at the computed ``K`` plus a negative control at ``K - control_shift``.

    ``sin(x) exp(-v^2)`` is judged on the interior minus a 5-cell margin.
    ``sin(v)`` does not decay toward the walls, so it and the control are
    judged on ``|x|, |v| <= core``.
    """
    V = potential or kfp.Potential.quadratic()
    grid = grid or kfp.PhaseGrid()
    rows, verdicts = [], []
    for name, f0, region in (("sin(x)exp(-v^2)", gradbound_datum, None), ("sin(v)", control_datum, core)):
        rep = kfp.gradient_bound_check(V, f0, t, grid, core=region)
        ctl = kfp.gradient_bound_check(V, f0, t, grid, K=rep.K - control_shift, core=region)
        rows.append({"f0": name, "region": "5-cell margin" if region is None else f"core {region:g}",
                     "K": rep.K, "min_interior_slack": rep.min_interior_slack, "scale": rep.scale,
                     "boundary_artifact": rep.boundary_violation, "control_K": ctl.K,
                     "control_min_slack": ctl.min_interior_slack})
        verdicts.append(Verdict(f"gradient bound, f0={name}", rep.min_interior_slack >= -tol * rep.scale,
                                f"min slack {rep.min_interior_slack:.4g} (scale {rep.scale:.4g})"))
    ctl_row = rows[-1]
    verdicts.append(Verdict("negative control violates", ctl_row["control_min_slack"] < -tol * ctl_row["scale"],
                            f"min slack {ctl_row['control_min_slack']:.4g} at K={ctl_row['control_K']:g}"))
    return SuiteResult("kfp-gradbound", rows, verdicts,
                       ["gradient bound |grad P_t f|^2 <= exp(2Kt) P_t |grad f|^2"],
                       {"potential": V.name, "t": t, "nx": grid.nx, "nv": grid.nv, "tol": tol,
                        "control_shift": control_shift, "core": core})


def kfp_lyapunov(potential=None, grid=None):
    V = potential or kfp.Potential.quadratic()
    grid = grid or kfp.PhaseGrid()
    rep = kfp.lyapunov_check(V, grid)
    rows = [{"min_W": rep.min_W, "grad_constant": rep.grad_constant,
             "generator_constant": rep.generator_constant, "C": rep.C, "LW": str(rep.LW)}]
    return SuiteResult("kfp-lyapunov", rows, [Verdict("W >= 1", rep.min_W >= 1), Verdict("C finite", np.isfinite(rep.C))],
                       ["Lyapunov function W = 1 + x^2 + v^2"], {"potential": V.name})


VERIFY_SUITES = {
    "lichnerowicz": lichnerowicz, "cd": cd, "commutation": commutation, "masses": masses,
    "representations": representations, "relation": relation, "liyau": liyau, "harnack": harnack,
    "diameter": diameter, "phi": phi,
}
