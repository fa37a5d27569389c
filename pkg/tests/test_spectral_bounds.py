from fractions import Fraction

import pytest

from hypolab.errors import ConventionError, DomainError, UnsupportedError
from hypolab.model_spaces import Convention, Kind, curvature_constants, heisenberg, hopf, quaternionic
from hypolab.spectral_bounds import (check_sharpness, enumerate_spectrum, first_eigenvalue,
                                     lichnerowicz_bound)
from hypolab.suites import eigenfunction_residual


def brute_levels(rate, count, box=40):
    return sorted({rate(a, b) for a in range(box) for b in range(box)})[:count]


def test_hopf_low_levels():
    assert [e.eigenvalue for e in enumerate_spectrum(hopf(1), 3)] == [0, 2, 4]


@pytest.mark.parametrize("n", [1, 2, 3])
def test_spectra_match_brute_force(n):
    hopf_rate = lambda m, k: 4 * m * (m + k + n) + 2 * k * n  # noqa: E731
    quat_rate = lambda k, m: 4 * k * (k + 2 * n + m + 1) + 4 * n * m  # noqa: E731
    assert [e.eigenvalue for e in enumerate_spectrum(hopf(n), 20)] == brute_levels(hopf_rate, 20)
    assert [e.eigenvalue for e in enumerate_spectrum(quaternionic(n), 20)] == brute_levels(quat_rate, 20)


def test_witness_indices_reproduce_eigenvalue():
    for e in enumerate_spectrum(hopf(2), 10):
        m, k = e.indices
        assert 4 * m * (m + k + 2) + 4 * k == e.eigenvalue


@pytest.mark.parametrize("model,a,b", [(hopf(1), 1, 0), (hopf(1), 0, 2), (hopf(2), 1, 1),
                                        (quaternionic(1), 1, 0), (quaternionic(1), 0, 1)])
def test_series_eigenfunctions(model, a, b):
    lam, res = eigenfunction_residual(model, a, b)
    assert lam > 0
    assert res < 1e-8


def test_first_eigenvalues():
    assert first_eigenvalue(hopf(1)) == 2
    assert first_eigenvalue(hopf(3)) == 6
    assert first_eigenvalue(quaternionic(1)) == 4


def test_bounds_are_exact_fractions():
    b = lichnerowicz_bound(curvature_constants(hopf(2), Convention.LICHNE_FULL))
    assert isinstance(b, Fraction)
    # rho1 = 6, kappa = 1, rho2 = 4, n = 4: 6 / (3/4 + 3/4)
    assert b == 4


@pytest.mark.parametrize("kind", [Kind.HOPF, Kind.QUATERNIONIC])
def test_sharpness_and_perturbation(kind):
    rows = check_sharpness(kind, range(1, 6))
    assert all(r.equal for r in rows)
    shifted = check_sharpness(kind, range(1, 6), kappa_shift=Fraction(1, 10))
    assert all(s.bound < r.bound for s, r in zip(shifted, rows))


def test_convention_is_enforced():
    with pytest.raises(ConventionError):
        lichnerowicz_bound(curvature_constants(heisenberg(1), Convention.CD_QUARTER))
    with pytest.raises(ConventionError):
        curvature_constants(hopf(1), Convention.CD_QUARTER)


def test_heisenberg_has_no_discrete_spectrum():
    with pytest.raises(UnsupportedError):
        enumerate_spectrum(heisenberg(1), 3)
    with pytest.raises(DomainError):
        enumerate_spectrum(hopf(1), 0)
