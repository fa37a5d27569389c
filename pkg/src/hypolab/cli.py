"""Command-line entry point: ``hypolab <command> ...``.

Every command writes one report (JSON by default, or CSV of the result
rows) and exits 0 when all verdicts pass, 1 when one fails and 2 on a
usage error.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import tempfile

import numpy as np

from . import heat_kernels as hk
from . import kolmogorov_kfp as kfp
from . import suites
from .errors import AccuracyError, HypolabError, InfeasibleError, SolverError
from .model_spaces import Kind, ModelSpace
from .spectral_bounds import enumerate_spectrum
from .suites import SuiteResult, Verdict

MODEL_ANCHORS = {
    "heisenberg": "Heisenberg group heat kernel, sinh/coth integral representation",
    "hopf": "Hopf fibration heat kernel: Jacobi series and fiber integral over the sphere kernel",
    "quaternionic": "quaternionic Hopf fibration heat kernel: Jacobi/Chebyshev series and integral",
}


class UsageError(Exception):
    pass


def parse_range(text):
    """``"1..5"`` or ``"1,3,4"`` to a list of ints."""
    try:
        if ".." in text:
            a, b = text.split("..")
            return list(range(int(a), int(b) + 1))
        return [int(p) for p in text.split(",")]
    except ValueError as exc:
        raise UsageError(f"bad integer range {text!r}") from exc


def parse_potential(text):
    if text == "quadratic":
        return kfp.Potential.quadratic()
    try:
        return kfp.Potential.parse(text)
    except Exception as exc:  # sympify raises a zoo of exception types
        raise UsageError(f"cannot parse potential {text!r}: {exc}") from exc


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if np.isfinite(v) else str(v)
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if obj is None or isinstance(obj, (int, str)):
        return obj
    return str(obj)


def render(result: SuiteResult, command, params, seed, fmt):
    if fmt == "csv":
        keys = []
        for row in result.rows:
            keys += [k for k in row if k not in keys]
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=keys, lineterminator="\n")
        w.writeheader()
        for row in result.rows:
            w.writerow({k: _jsonable(v) for k, v in row.items()})
        return buf.getvalue()
    report = {
        "command": command,
        "params": {**params, **result.params},
        "seed": seed,
        "results": result.rows,
        "verdicts": [{"name": v.name, "passed": v.passed, "detail": v.detail} for v in result.verdicts],
        "paper_refs": result.refs,
    }
    return json.dumps(_jsonable(report), indent=2, sort_keys=True) + "\n"


def write_atomic(path, text):
    path = os.path.abspath(path)
    fd, tmp = tempfile.mkstemp(dir=os.path.dirname(path), prefix=".hypolab-")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# commands --------------------------------------------------------------------

def cmd_kernel(a):
    kind = Kind(a.model)
    model = ModelSpace(kind, a.n)
    point = (a.r, a.theta)
    row = {"model": kind.value, "n": a.n, "t": a.t, "r": a.r, "fiber": a.theta}
    verdicts = []
    if kind is Kind.HEISENBERG:
        if a.method == "series":
            raise UsageError("the Heisenberg kernel has no series representation")
        ev = hk.heisenberg_kernel(a.n, a.t, a.r, a.theta)
        row.update(integral=ev.value, integral_error=ev.error_estimate)
    else:
        series = hk.hopf_kernel_series if kind is Kind.HOPF else hk.quaternionic_kernel_series
        integral = hk.hopf_kernel_integral if kind is Kind.HOPF else hk.quaternionic_kernel_integral
        if a.method in ("series", "both"):
            ev = series(a.n, a.t, *point)
            row.update(series=ev.value, series_tail=ev.error_estimate)
        if a.method in ("integral", "both"):
            ev = integral(a.n, a.t, *point)
            row.update(integral=ev.value, integral_error=ev.error_estimate)
        if a.method == "both":
            rel = abs(row["series"] - row["integral"]) / abs(row["series"])
            row["rel_diff"] = rel
            tol = a.tol if a.tol is not None else (1e-8 if kind is Kind.HOPF else 1e-6)
            verdicts.append(Verdict("series = integral", rel < tol, f"rel diff {rel:.3e} (tol {tol:g})"))
    if a.residual:
        row["pde_residual"] = hk.pde_residual(model, None, a.t, point)
    return SuiteResult("kernel", [row], verdicts, [MODEL_ANCHORS[kind.value]], {"method": a.method})


def cmd_spectrum(a):
    model = ModelSpace(Kind(a.model), a.n)
    levels = enumerate_spectrum(model, a.count)
    rows = [{"level": i, "eigenvalue": e.eigenvalue, "indices": "/".join(map(str, e.indices))}
            for i, e in enumerate(levels)]
    return SuiteResult("spectrum", rows, [], ["sub-Laplacian spectra of the sphere fibrations"],
                       {"model": a.model, "n": a.n, "count": a.count})


def cmd_verify(a):
    fn = suites.VERIFY_SUITES[a.suite]
    kwargs = {}
    if a.suite == "lichnerowicz":
        kwargs["d_range"] = parse_range(a.d)
    if a.suite in ("cd", "phi", "diameter"):
        kwargs["seed"] = a.seed
    if a.tol is not None:
        if a.suite == "representations":
            kwargs.update(tol_hopf=a.tol, tol_quat=a.tol)
        elif a.suite not in ("lichnerowicz", "commutation"):
            kwargs["tol"] = a.tol
    return fn(**kwargs)


def _grid(a):
    return kfp.PhaseGrid((-a.box, a.box), (-a.box, a.box), a.nx, a.nv, a.dt)


def cmd_kfp(a):
    V = parse_potential(a.potential)
    if a.kfp_command == "apply":
        val = kfp.kfp_apply(V, a.f, (a.x, a.v))
        expr = kfp.kfp_operator(V, a.f)
        return SuiteResult("kfp-apply", [{"f": a.f, "x": a.x, "v": a.v, "Lf": val, "Lf_expr": str(expr)}], [],
                           ["kinetic Fokker-Planck generator with confinement potential"], {"potential": V.name})
    if a.kfp_command == "invariance":
        if a.f:
            tol = a.tol if a.tol is not None else 1e-8
            res = kfp.invariance_residual(V, a.f)
            return SuiteResult("kfp-invariance", [{"f": a.f, "residual": res}],
                               [Verdict("int L f dmu = 0", res < tol, f"{res:.3e}")],
                               ["invariant measure of the kinetic Fokker-Planck operator"],
                               {"potential": V.name, "tol": tol})
        return suites.kfp_invariance(V, **({"tol": a.tol} if a.tol is not None else {}))
    if a.kfp_command == "bochner":
        return suites.kfp_bochner(V, count=a.count, seed=a.seed)
    if a.kfp_command == "keta":
        etas = tuple(a.eta) if a.eta else suites.KFP_ETAS
        return suites.kfp_keta(V, etas=etas, seed=a.seed)
    if a.kfp_command == "decay":
        return suites.kfp_decay(V, eta=a.eta, T=a.T, grid=_grid(a), mode=a.mode)
    if a.kfp_command == "gradbound":
        return suites.kfp_gradbound(V, t=a.t, grid=_grid(a), **({"tol": a.tol} if a.tol is not None else {}))
    return suites.kfp_lyapunov(V, grid=_grid(a))


def build_parser():
    p = argparse.ArgumentParser(prog="hypolab", description="Heat kernels, spectra and functional "
                                "inequalities on sub-Riemannian model spaces.")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--output", "-o", help="report path (default: stdout)")
    common.add_argument("--format", choices=("json", "csv"), default="json")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--tol", type=float, default=None, help="override the pass/fail tolerance")
    sub = p.add_subparsers(dest="command", required=True)

    k = sub.add_parser("kernel", parents=[common], help="evaluate a heat kernel")
    k.add_argument("--model", choices=[m.value for m in Kind], required=True)
    k.add_argument("--n", type=int, default=1)
    k.add_argument("--t", type=float, required=True)
    k.add_argument("--r", type=float, required=True)
    k.add_argument("--theta", type=float, default=0.0, help="fiber coordinate (z, theta or eta)")
    k.add_argument("--method", choices=("series", "integral", "both"), default="both")
    k.add_argument("--residual", action="store_true", help="also report the heat-equation residual")

    s = sub.add_parser("spectrum", parents=[common], help="list eigenvalues of a sphere fibration")
    s.add_argument("--model", choices=("hopf", "quaternionic"), required=True)
    s.add_argument("--n", type=int, default=1)
    s.add_argument("--count", type=int, default=20)

    v = sub.add_parser("verify", parents=[common], help="run a verification suite")
    v.add_argument("--suite", choices=sorted(suites.VERIFY_SUITES), required=True)
    v.add_argument("--d", default="1..5", help="dimension range for lichnerowicz, e.g. 1..5")

    kf = sub.add_parser("kfp", help="kinetic Fokker-Planck tools")
    ksub = kf.add_subparsers(dest="kfp_command", required=True)
    kcommon = argparse.ArgumentParser(add_help=False, parents=[common])
    kcommon.add_argument("--potential", default="quadratic", help="'quadratic' or an expression in x")
    grid = argparse.ArgumentParser(add_help=False)
    grid.add_argument("--nx", type=int, default=128)
    grid.add_argument("--nv", type=int, default=128)
    grid.add_argument("--box", type=float, default=7.0)
    grid.add_argument("--dt", type=float, default=0.01)

    ap = ksub.add_parser("apply", parents=[kcommon])
    ap.add_argument("--f", required=True)
    ap.add_argument("--x", type=float, required=True)
    ap.add_argument("--v", type=float, required=True)
    inv = ksub.add_parser("invariance", parents=[kcommon])
    inv.add_argument("--f", help="single test function (default: the built-in battery)")
    bo = ksub.add_parser("bochner", parents=[kcommon])
    bo.add_argument("--count", type=int, default=200)
    ke = ksub.add_parser("keta", parents=[kcommon])
    ke.add_argument("--eta", type=float, nargs="*")
    de = ksub.add_parser("decay", parents=[kcommon, grid])
    de.add_argument("--eta", type=float, default=0.25)
    de.add_argument("--T", type=float, default=10.0)
    de.add_argument("--mode", choices=("poincare", "logsob"), default="poincare")
    gb = ksub.add_parser("gradbound", parents=[kcommon, grid])
    gb.add_argument("--t", type=float, default=0.5)
    ksub.add_parser("lyapunov", parents=[kcommon, grid])
    return p


COMMANDS = {"kernel": cmd_kernel, "spectrum": cmd_spectrum, "verify": cmd_verify, "kfp": cmd_kfp}


def main(argv=None):
    parser = build_parser()
    a = parser.parse_args(argv)  # exits 2 on bad usage
    name = a.command if a.command != "kfp" else f"kfp {a.kfp_command}"
    params = {k: v for k, v in vars(a).items() if k not in ("output", "format", "seed", "command", "kfp_command")}
    try:
        result = COMMANDS[a.command](a)
    except (UsageError, HypolabError) as exc:
        print(f"hypolab: {exc}", file=sys.stderr)
        # numerical failures are failed checks; bad parameters are usage errors
        return 1 if isinstance(exc, (SolverError, AccuracyError, InfeasibleError)) else 2
    text = render(result, name, params, a.seed, a.format)
    if a.output:
        write_atomic(a.output, text)
    else:
        sys.stdout.write(text)
    failed = [v for v in result.verdicts if not v.passed]
    for v in failed:
        print(f"FAIL {result.name}: {v.name} ({v.detail})", file=sys.stderr)
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
