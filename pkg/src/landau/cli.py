"""Command line entry point ``landau``.

    landau run <scenario.json> -o <dir>
    landau verify kernel [--nodes N]
    landau verify conv [--n N]
    landau norms <snapshot-dir> [--alpha A] [--q Q]

Exit codes: 0 success, 1 failed verification, 2 invalid input,
3 solver failure, 4 I/O failure.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import platform
import sys
import time
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .coefficients import compute_coefficients, convolve_direct, convolve_fast, max_relative_deviation
from .diagnostics import CSV_HEADER, DiagnosticsWriter, Monitor, diagnose, fisher_time_integral, moment_time_holder
from .grid import Cylinder, SnapshotFormatError, VelocityGrid, read_snapshot, write_snapshot
from .holder import SpaceTimeField, holder_1plus, regularity_verdict
from .kernel import (
    a_kernel,
    b_kernel,
    grad_a_kernel,
    hess_a_kernel,
    isotropic_fourth_moment,
    mu_mean_zero_check,
    sphere_moment,
)
from .plotting import diagnostics_figure, slices_figure
from .profiles import maxwellian, maxwellian_mixture
from .scenario import Scenario, ScenarioError, load_scenario, scenario_from_dict
from .solver import StepError, run

log = logging.getLogger("landau")

EXIT_OK, EXIT_FAIL, EXIT_INVALID, EXIT_SOLVER, EXIT_IO = 0, 1, 2, 3, 4
MOMENT_TEST_FUNCTIONS = {
    "1": lambda v1, v2, v3: np.ones_like(v1),
    "v1": lambda v1, v2, v3: v1,
    "|v|^2": lambda v1, v2, v3: v1**2 + v2**2 + v3**2,
}


# -- run ---------------------------------------------------------------------------

def _versions() -> dict:
    return {
        "landau": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
    }


def _write_json(path: Path, obj):
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n", encoding="utf-8")


def _json_safe(x):
    if isinstance(x, dict):
        return {k: _json_safe(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_json_safe(v) for v in x]
    if isinstance(x, float) and not math.isfinite(x):
        return None
    return x


def analyse(snapshots, scenario: Scenario, initial=None, records=()) -> dict:
    """Hoelder estimates, the regularity verdict and trajectory functionals."""
    mon = scenario.monitors
    field = SpaceTimeField.from_snapshots(snapshots)
    inner = scenario.inner_cylinder()
    out = {"snapshots": len(field.times), "times": field.times.tolist()}
    if len(field.times) >= 2:
        rep = holder_1plus(field, inner, mon.alpha, mon.sample_budget, mon.seed)
        out["holder"] = rep.to_dict()
        out["moment_holder_half"] = {k: moment_time_holder(snapshots, phi) for k, phi in MOMENT_TEST_FUNCTIONS.items()}
    if mon.verdict and len(field.times) >= 2:
        bound = math.inf if mon.s0_bound is None else mon.s0_bound
        verdict = regularity_verdict(field, scenario.outer_cylinder(), inner, mon.q, mon.alpha, bound)
        out["verdict"] = verdict.to_dict()
        out["verdict"]["components"] = verdict.components()
    if records:
        recs = ([initial] if initial is not None else []) + list(records)
        out["fisher_time_integral"] = fisher_time_integral([r.time for r in recs], [r.fisher for r in recs])
    return _json_safe(out)


def run_scenario(scenario: Scenario, outdir) -> int:
    """Run a scenario and write its artifacts into ``outdir``.

    Artifacts: ``diagnostics.csv`` (one row per step), ``holder_report.json``,
    ``snapshots/snap_XXXX.bin``, ``figures/*.png`` and ``manifest.json``.  On
    a solver failure everything produced so far is kept and 3 is returned.
    """
    out = Path(outdir)
    snapdir = out / "snapshots"
    figdir = out / "figures"
    snapdir.mkdir(parents=True, exist_ok=True)
    figdir.mkdir(exist_ok=True)
    for old in snapdir.glob("snap_*.bin"):
        old.unlink()
    manifest = {
        "config": scenario.to_dict(),
        "seed": scenario.monitors.seed,
        "versions": _versions(),
        "status": "running",
        "started": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
    }
    _write_json(out / "manifest.json", manifest)

    mon = scenario.monitors
    monitor = Monitor(mon.q, mon.ball_center, mon.ball_radius)
    f0 = scenario.initial_field()
    status, code, traj, error = "completed", EXIT_OK, None, None
    t0 = time.perf_counter()
    with DiagnosticsWriter(out / "diagnostics.csv") as writer:
        try:
            traj = run(
                f0,
                scenario.solver,
                monitor,
                mon.snapshot_stride,
                on_record=writer.write,
                on_snapshot=lambda k, f: write_snapshot(f, snapdir / f"snap_{k:04d}.bin"),
            )
        except StepError as err:
            status, code, traj, error = "solver_error", EXIT_SOLVER, err.partial, str(err)
            log.error("%s", err)

    report = {"status": status}
    if traj is not None and traj.snapshots:
        try:
            report.update(analyse(traj.snapshots, scenario, traj.initial, traj.records))
        except ValueError as exc:
            report["analysis_error"] = str(exc)
        if traj.records:
            diagnostics_figure(traj.initial, traj.records, figdir / "diagnostics.png")
        slices_figure(traj.snapshots, figdir / "slices.png")
    _write_json(out / "holder_report.json", report)

    manifest.update(
        status=status,
        exit_code=code,
        error=error,
        steps_completed=len(traj.records) if traj is not None else 0,
        steps_planned=scenario.solver.n_steps,
        wall_seconds=round(time.perf_counter() - t0, 3),
        artifacts=sorted(str(p.relative_to(out)) for p in out.rglob("*") if p.is_file() and p.name != "manifest.json")
        + ["manifest.json"],
    )
    _write_json(out / "manifest.json", manifest)
    return code


def _cmd_run(args) -> int:
    try:
        scenario = load_scenario(args.config)
    except ScenarioError as exc:
        print(exc, file=sys.stderr)
        return EXIT_INVALID
    except OSError as exc:
        print(f"cannot read {args.config}: {exc}", file=sys.stderr)
        return EXIT_IO
    try:
        code = run_scenario(scenario, args.output)
    except OSError as exc:
        print(f"I/O failure: {exc}", file=sys.stderr)
        return EXIT_IO
    print(f"{'completed' if code == EXIT_OK else 'stopped early'}; artifacts in {args.output}")
    return code


# -- verify ------------------------------------------------------------------------

_SUB = str.maketrans("0123456789", "₀₁₂₃₄₅₆₇₈₉")


def _fd_certification(n_points=1000, seed=0):
    """Worst relative errors of the kernel derivatives against central differences."""
    rng = np.random.default_rng(seed)
    u = rng.normal(size=(n_points, 3))
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    z = u * 10.0 ** rng.uniform(-2, 2, size=(n_points, 1))
    r = np.linalg.norm(z, axis=1)
    a = a_kernel(z)
    null = np.max(np.linalg.norm(np.einsum("nij,nj->ni", a, z), axis=1) / (np.linalg.norm(a, axis=(1, 2)) * r))
    trace = np.max(np.abs(np.trace(a, axis1=1, axis2=2) * r / 2 - 1))
    g = grad_a_kernel(z)
    hs = hess_a_kernel(z)
    g_fd = np.empty_like(g)
    h_fd = np.empty_like(hs)
    for k in range(3):
        e = np.zeros(3)
        e[k] = 1.0
        s1 = (1e-5 * r)[:, None]
        g_fd[..., k] = (a_kernel(z + s1 * e) - a_kernel(z - s1 * e)) / (2 * s1[:, :, None])
        for l in range(3):
            f = np.zeros(3)
            f[l] = 1.0
            s2 = (1e-3 * r)[:, None, None]
            s2v = s2[:, :, 0]
            if k == l:
                h_fd[..., k, l] = (a_kernel(z + s2v * e) - 2 * a + a_kernel(z - s2v * e)) / s2**2
            else:
                h_fd[..., k, l] = (
                    a_kernel(z + s2v * (e + f)) - a_kernel(z + s2v * (e - f))
                    - a_kernel(z - s2v * (e - f)) + a_kernel(z - s2v * (e + f))
                ) / (4 * s2**2)
    scale_g = np.max(np.abs(g), axis=(1, 2, 3))[:, None, None, None]
    scale_h = np.max(np.abs(hs), axis=(1, 2, 3, 4))[:, None, None, None, None]
    g_err = np.max(np.abs(g - g_fd) / scale_g)
    h_err = np.max(np.abs(hs - h_fd) / scale_h)
    b_err = np.max(np.abs(np.einsum("nijj->ni", g) - b_kernel(z)) / np.max(np.abs(b_kernel(z)), axis=1, keepdims=True))
    return {"null direction": null, "trace": trace, "grad vs FD": g_err, "hess vs FD": h_err, "contraction = b": b_err}


def verify_kernel(nodes: int = 64):
    """Rows ``(label, value, target, passed)`` of the kernel identity suite."""
    rows = []
    for i in range(3):
        for j in range(i, 3):
            v = sphere_moment(2, (i, j), nodes)
            target = 4 * math.pi / 3 if i == j else 0.0
            label = f"∫P{str(i + 1).translate(_SUB)}P{str(j + 1).translate(_SUB)} dσ"
            rows.append((label, v, target, abs(v - target) < 1e-8))
    worst = 0.0
    for idx in np.ndindex(3, 3, 3, 3):
        worst = max(worst, abs(sphere_moment(4, idx, nodes) - isotropic_fourth_moment(*idx)))
    rows.append(("max |∫PᵢPⱼPₖPₗ dσ - (4π/15)(δδ+δδ+δδ)|", worst, 0.0, worst < 1e-8))
    mz = mu_mean_zero_check(nodes)
    rows.append(("max |∫μₖₗ dσ|", mz, 0.0, mz < 1e-8))
    for label, err in _fd_certification().items():
        tol = 1e-12 if label in ("null direction", "trace", "contraction = b") else 1e-5
        rows.append((f"kernel {label} (max rel err)", err, 0.0, err < tol))
    return rows


def _two_bump(grid):
    return maxwellian_mixture(
        grid,
        [
            {"mass": 0.7, "temperature": 0.6, "mean": (-1.5, 0.0, 0.5)},
            {"mass": 0.3, "temperature": 0.4, "mean": (1.5, 1.0, 0.0)},
        ],
    )


def verify_conv(n: int = 17, L: float = 8.0):
    """Fast against direct convolution for a Maxwellian and a two-bump field."""
    grid = VelocityGrid(n, L)
    rows = []
    for name, f in (("maxwellian", maxwellian(grid)), ("two-bump", _two_bump(grid))):
        for which in ("a", "b"):
            t = time.perf_counter()
            direct = convolve_direct(f, which)
            t_direct = time.perf_counter() - t
            t = time.perf_counter()
            fast = convolve_fast(f, which)
            t_fast = time.perf_counter() - t
            dev = max_relative_deviation(fast, direct)
            rows.append((f"{name} {which}bar fast vs direct (direct {t_direct:.2f}s, fast {t_fast:.3f}s)", dev, 0.0, dev < 1e-6))
    return rows


def _print_rows(rows, title):
    width = max(len(r[0]) for r in rows)
    print(title)
    for label, value, target, ok in rows:
        print(f"  {label:<{width}} = {value:.5f}" if abs(value) >= 1e-3 else f"  {label:<{width}} = {value:.3e}", end="")
        print(f"   target {target:.5f}   {'PASS' if ok else 'FAIL'}")
    n_ok = sum(r[3] for r in rows)
    print(f"{n_ok}/{len(rows)} checks passed")
    return EXIT_OK if n_ok == len(rows) else EXIT_FAIL


def _cmd_verify(args) -> int:
    if args.suite == "kernel":
        return _print_rows(verify_kernel(args.nodes), f"kernel identities ({args.nodes}^2 sphere nodes)")
    return _print_rows(verify_conv(args.n), f"convolution paths (n={args.n})")


# -- norms -------------------------------------------------------------------------

def _load_snapshots(path: Path):
    d = path / "snapshots" if (path / "snapshots").is_dir() else path
    files = sorted(d.glob("*.bin"))
    if not files:
        raise FileNotFoundError(f"no snapshot files in {d}")
    snaps = [read_snapshot(p) for p in files]
    return sorted(snaps, key=lambda s: s.time)


def _cmd_norms(args) -> int:
    try:
        snaps = _load_snapshots(Path(args.snapshots))
    except SnapshotFormatError as exc:
        print(f"bad snapshot: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as exc:
        print(f"cannot read snapshots: {exc}", file=sys.stderr)
        return EXIT_IO
    grid = snaps[0].grid
    if any(s.grid != grid for s in snaps):
        print("snapshots live on different grids", file=sys.stderr)
        return EXIT_INVALID
    doc = {
        "initial_data": {"kind": "maxwellian"},
        "grid": {"n": grid.n, "L": grid.L},
        "solver": {"t_final": max(snaps[-1].time, 1e-300)},
        "monitors": {
            "q": args.q,
            "alpha": args.alpha,
            "ball": {"center": args.center, "radius": args.radius},
            "sample_budget": args.budget,
            "seed": args.seed,
            "verdict": args.q > 3,
        },
    }
    try:
        scenario = scenario_from_dict(doc)
        mon = scenario.monitors
        monitor = Monitor(mon.q, mon.ball_center, mon.ball_radius)
        w = csv.writer(sys.stdout, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for s in snaps:
            rec = diagnose(s, compute_coefficients(s), monitor, float("nan"))
            w.writerow(rec.row())
        report = analyse(snaps, scenario)
    except (ScenarioError, ValueError) as exc:
        print(exc, file=sys.stderr)
        return EXIT_INVALID
    text = json.dumps(report, indent=2, sort_keys=True)
    if args.report:
        try:
            Path(args.report).write_text(text + "\n", encoding="utf-8")
        except OSError as exc:
            print(f"cannot write report: {exc}", file=sys.stderr)
            return EXIT_IO
    else:
        print()
        print(text)
    return EXIT_OK


# -- entry -------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="landau", description="Landau-Coulomb solver and regularity diagnostics")
    ap.add_argument("-v", "--verbose", action="store_true", help="log every step")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run a JSON scenario")
    p.add_argument("config")
    p.add_argument("-o", "--output", required=True, help="output directory")
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("verify", help="kernel identity or convolution path checks")
    p.add_argument("suite", choices=("kernel", "conv"))
    p.add_argument("--n", type=int, default=17, help="grid size for the conv suite")
    p.add_argument("--nodes", type=int, default=64, help="sphere nodes per angle for the kernel suite")
    p.set_defaults(func=_cmd_verify)

    p = sub.add_parser("norms", help="diagnostics and Hoelder norms of stored snapshots")
    p.add_argument("snapshots", help="snapshot directory or run output directory")
    p.add_argument("--alpha", type=float, default=0.5)
    p.add_argument("--q", type=float, default=4.0)
    p.add_argument("--center", type=float, nargs=3, default=[0.0, 0.0, 0.0])
    p.add_argument("--radius", type=float, default=2.0)
    p.add_argument("--budget", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--report", help="write the JSON report here instead of stdout")
    p.set_defaults(func=_cmd_norms)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
