"""Exact spectra of the sphere-fibration sub-Laplacians and the first-eigenvalue bound."""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from .errors import ConventionError, DomainError, UnsupportedError
from .heat_kernels import hopf_rates, quaternionic_rates
from .model_spaces import Convention, CurvatureConstants, Kind, ModelSpace, curvature_constants


@dataclass(frozen=True)
class SpectrumEntry:
    eigenvalue: int
    indices: tuple
    model: str


def _rate(model, a, b):
    if model.kind is Kind.HOPF:
        return int(hopf_rates(model.n, a, b))
    return int(quaternionic_rates(model.n, a, b))


def enumerate_spectrum(model: ModelSpace, count: int):
    """The ``count`` smallest distinct eigenvalues of ``-L`` with one witness each.

    Hopf witnesses are ``(m, k)`` and quaternionic ones ``(k, m)``, matching
    the index order of the kernel series. Both rate formulas increase in each
    index, so once the rate along an axis exceeds the current ``count``-th
    smallest value nothing further out can enter; the scan stops there.
    """
    if model.kind is Kind.HEISENBERG:
        raise UnsupportedError("the Heisenberg sub-Laplacian has continuous spectrum")
    if count < 1:
        raise DomainError("count must be at least 1")
    best = {}
    a_max = b_max = 50 * count
    cutoff = None
    for a in range(a_max + 1):
        if cutoff is not None and _rate(model, a, 0) > cutoff:
            break
        for b in range(b_max + 1):
            lam = _rate(model, a, b)
            if cutoff is not None and lam > cutoff:
                break
            if lam not in best or (a, b) < best[lam]:
                best[lam] = (a, b)
        if len(best) >= count:
            cutoff = sorted(best)[count - 1]
    levels = sorted(best)[:count]
    return [SpectrumEntry(lam, best[lam], model.kind.value) for lam in levels]


def first_eigenvalue(model: ModelSpace):
    return enumerate_spectrum(model, 2)[1].eigenvalue


def lichnerowicz_bound(c: CurvatureConstants):
    """``rho1 / (1 - 1/n + 3 kappa / rho2)``, exact for rational input."""
    if c.convention is not Convention.LICHNE_FULL:
        raise ConventionError(f"the eigenvalue bound needs {Convention.LICHNE_FULL.value} "
                              f"constants, got {c.convention.value}")
    rho1, kappa, rho2, n = (Fraction(v) if not isinstance(v, float) else Fraction(repr(v))
                            for v in c.as_tuple())
    if rho1 <= 0 or rho2 <= 0 or kappa < 0 or n < 2:
        raise DomainError("need rho1 > 0, rho2 > 0, kappa >= 0 and n >= 2")
    return rho1 / (1 - 1 / n + 3 * kappa / rho2)


@dataclass(frozen=True)
class SharpnessRow:
    d: int
    bound: Fraction
    lambda1: int
    equal: bool


def check_sharpness(kind, d_range, kappa_shift=0):
    """Bound versus exact ``lambda_1`` for each ``d``; ``kappa_shift`` perturbs kappa."""
    rows = []
    for d in d_range:
        model = ModelSpace(kind, d)
        c = curvature_constants(model, Convention.LICHNE_FULL)
        if kappa_shift:
            c = CurvatureConstants(c.rho1, c.kappa + kappa_shift, c.rho2, c.horizontal_dim, c.convention)
        bound = lichnerowicz_bound(c)
        lam1 = first_eigenvalue(model)
        rows.append(SharpnessRow(d, bound, lam1, bound == lam1))
    return rows
