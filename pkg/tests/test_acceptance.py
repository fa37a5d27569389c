"""Acceptance criteria, one test each, at their stated tolerances.

Each test prints a single ``PASS``/``FAIL`` line with the failing checks, so
``pytest tests/test_acceptance.py -v`` doubles as the acceptance report.
Running this file directly prints the same lines without pytest.
"""
import sys
import time

import pytest

from hypolab import suites
from hypolab.kolmogorov_kfp import PhaseGrid


def criterion_1():
    start = time.perf_counter()
    res = suites.representations(tol_hopf=1e-8, tol_quat=1e-6)
    elapsed = time.perf_counter() - start
    n_hopf = sum(r["model"] == "hopf" for r in res.rows)
    n_quat = sum(r["model"] == "quaternionic" for r in res.rows)
    extra = [suites.Verdict("lattice sizes 2x27 + 27", (n_hopf, n_quat) == (54, 27), f"{n_hopf}+{n_quat}"),
             suites.Verdict("runtime < 30 s", elapsed < 30, f"{elapsed:.1f} s")]
    return res.verdicts + extra


def criterion_2():
    res = suites.relation(tol=1e-6)
    return res.verdicts + [suites.Verdict("9 points", len(res.rows) == 9)]


def criterion_3():
    return suites.masses(tol=1e-6).verdicts


def criterion_4():
    return suites.spectrum(count=20).verdicts


def criterion_5():
    return suites.lichnerowicz(range(1, 6)).verdicts


def criterion_6():
    res = suites.cd(count=100, tol=1e-10)
    return res.verdicts + [suites.Verdict("600 evaluations", len(res.rows) == 600)]


def criterion_7():
    return suites.commutation(max_degree=6, dims=(1, 2)).verdicts


def criterion_8():
    return suites.liyau(tol=1e-6).verdicts + suites.harnack(tol=1e-6).verdicts


def criterion_9():
    return suites.phi(count=10, tol=1e-8).verdicts


def criterion_10():
    return suites.diameter(count=100, tol=1e-12).verdicts


def criterion_11():
    inv = suites.kfp_invariance(tol=1e-8)
    return (inv.verdicts + [suites.Verdict("20-function battery", len(inv.rows) == 20)]
            + suites.kfp_bochner(count=200, tol=1e-9).verdicts
            + suites.kfp_keta(etas=(0.1, 0.2, 0.3, 0.4)).verdicts)


def criterion_12():
    start = time.perf_counter()
    grid = PhaseGrid(nx=128, nv=128)
    verdicts = suites.kfp_decay(grid=grid).verdicts + suites.kfp_gradbound(grid=grid, tol=1e-4).verdicts
    elapsed = time.perf_counter() - start
    return verdicts + [suites.Verdict("runtime < 5 min", elapsed < 300, f"{elapsed:.1f} s")]


CRITERIA = {
    1: ("dual kernel representations", criterion_1),
    2: ("inter-fibration relation", criterion_2),
    3: ("stochastic completeness", criterion_3),
    4: ("spectra and first eigenvalues", criterion_4),
    5: ("Lichnerowicz sharpness", criterion_5),
    6: ("curvature-dimension inequality", criterion_6),
    7: ("Laplacian commutation", criterion_7),
    8: ("Li-Yau and Harnack", criterion_8),
    9: ("ultracontractive diameter integral", criterion_9),
    10: ("Bonnet-Myers forms", criterion_10),
    11: ("kinetic invariance, Bochner, K(eta)", criterion_11),
    12: ("hypocoercive decay and gradient bound", criterion_12),
}


def report_line(number):
    title, fn = CRITERIA[number]
    verdicts = fn()
    failed = [v for v in verdicts if not v.passed]
    status = "FAIL" if failed else "PASS"
    why = "; ".join(f"{v.name} ({v.detail})" if v.detail else v.name for v in failed)
    return not failed, f"criterion {number:2d} {status}: {title}" + (f" -- failed: {why}" if why else "")


@pytest.mark.parametrize("number", sorted(CRITERIA))
def test_criterion(number, capsys):
    ok, line = report_line(number)
    with capsys.disabled():
        print("\n" + line)
    assert ok, line


if __name__ == "__main__":
    results = [report_line(n) for n in sorted(CRITERIA)]
    for _, line in results:
        print(line)
    sys.exit(0 if all(ok for ok, _ in results) else 1)
