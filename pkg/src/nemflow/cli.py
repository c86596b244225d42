"""Command-line entry point.

Subcommands: ``simulate``, ``check-coefficients``, ``besov-audit``,
``oracle``, ``convergence``.  Exit codes: 0 success, 2 configuration
error, 3 ellipticity failure, 4 runtime blow-up (NaN or temperature
floor), 5 Picard non-convergence.  Every error path prints one
machine-parsable line ``nemflow-error code=<n> kind=<kind>: <message>``
to stderr.  The FFT thread count is taken from the ``NEMFLOW_THREADS``
environment variable.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from . import admissibility as adm
from .besov import verify_product_estimate, verify_smoothing_estimate
from .coefficients import CoefficientSet
from .config import parse_config, parse_sections, _build_coefficients
from .diagnostics import DiagnosticsCollector
from .errors import (BlowUpError, ConfigError, EllipticityError, NemflowError,
                     PicardNonConvergenceError, TemperaturePositivityError)
from .grid import Grid
from .mms import ManufacturedSolution
from .snapshots import write_state
from .solver import (SolverConfig, assemble_linear_operators, run)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_ELLIPTICITY = 3
EXIT_RUNTIME = 4
EXIT_PICARD = 5

_ERROR_KINDS = (
    (ConfigError, EXIT_CONFIG, "config"),
    (FileNotFoundError, EXIT_CONFIG, "config"),
    (EllipticityError, EXIT_ELLIPTICITY, "ellipticity"),
    (PicardNonConvergenceError, EXIT_PICARD, "picard"),
    (TemperaturePositivityError, EXIT_RUNTIME, "blowup"),
    (BlowUpError, EXIT_RUNTIME, "blowup"),
)


def _fail(code: int, kind: str, message: str) -> int:
    sys.stderr.write(f"nemflow-error code={code} kind={kind}: {message}\n")
    return code


# ---------------------------------------------------------------------------
# run manifest
# ---------------------------------------------------------------------------


def _sha256_file(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _write_manifest(path: Path, payload: dict) -> None:
    tmp = path.with_suffix(".tmp")
    with open(tmp, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    os.replace(tmp, path)


def _manifest_payload(config_hash: str, seed: int, outputs: dict,
                      started: float, finished=None) -> dict:
    chain = hashlib.sha256()
    chain.update(config_hash.encode())
    chain.update(str(seed).encode())
    for name in sorted(outputs):
        chain.update(name.encode())
        chain.update(outputs[name].encode())
    return {
        "code_version": __version__,
        "config_sha256": config_hash,
        "seed": seed,
        "started_at": started,
        "finished_at": finished,
        "outputs": outputs,
        # excludes timestamps: identical config+seed => identical chain
        "chain_sha256": chain.hexdigest(),
    }


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------


def cmd_simulate(args) -> int:
    parsed = parse_config(args.config, seed_override=args.seed)
    cfg = parsed.solver
    if args.diag_stride is not None:
        from dataclasses import replace
        cfg = replace(cfg, diag_stride=int(args.diag_stride))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    sample = adm.ViscositySample.from_coefficients(
        parsed.coefficients, parsed.coefficients.theta_ref,
        dim=parsed.grid.dim)
    report = adm.full_report(sample, trials=2000, seed=cfg.seed)
    if not (report.heat_ok and report.incompressible_ok):
        sys.stderr.write(
            "nemflow-warning kind=admissibility: coefficient set violates "
            "the second-law inequalities at theta_ref; entropy production "
            "may turn negative\n")

    started = time.time()
    manifest_path = out / "manifest.json"
    _write_manifest(manifest_path, _manifest_payload(
        parsed.config_hash, cfg.seed, {}, started))

    collector = DiagnosticsCollector(parsed.coefficients)
    snapshots_dir = out / "snapshots"
    result = run(parsed.initial_state, parsed.coefficients, cfg,
                 record_hook=collector.hook)

    outputs = {}
    diag_path = out / "diagnostics.csv"
    collector.write_csv(diag_path)
    outputs["diagnostics.csv"] = _sha256_file(diag_path)
    summary_path = out / "summary.json"
    collector.write_summary(summary_path)
    outputs["summary.json"] = _sha256_file(summary_path)
    if args.snapshots:
        snapshots_dir.mkdir(exist_ok=True)
        for t, snap in result.snapshots:
            name = f"snapshots/state_{t:012.6f}.bin"
            write_state(out / name, snap)
            outputs[name] = _sha256_file(out / name)
    _write_manifest(manifest_path, _manifest_payload(
        parsed.config_hash, cfg.seed, outputs, started, time.time()))
    print(json.dumps(collector.summary(), indent=2))
    return EXIT_OK


# ---------------------------------------------------------------------------
# check-coefficients / oracle
# ---------------------------------------------------------------------------


def _load_coefficients(path) -> CoefficientSet:
    with open(path, "rb") as fh:
        text = fh.read().decode("utf-8")
    sections = parse_sections(text)
    if "coefficients" not in sections:
        raise ConfigError("missing [coefficients] section")
    return _build_coefficients(sections["coefficients"])


def _thetas_from_args(args, coeffs) -> list:
    if args.theta_range is not None:
        lo, hi, count = args.theta_range
        if int(count) < 1:
            raise ConfigError("theta range needs at least one sample")
        return list(np.linspace(float(lo), float(hi), int(count)))
    if args.theta is not None:
        return [float(args.theta)]
    return [coeffs.theta_ref]


def cmd_check_coefficients(args) -> int:
    coeffs = _load_coefficients(args.config)
    dim = args.dim or len(coeffs.n_ref)
    reports = []
    for theta in _thetas_from_args(args, coeffs):
        if theta <= 0:
            raise ConfigError(f"temperature {theta} must be positive")
        sample = adm.ViscositySample.from_coefficients(coeffs, theta, dim=dim)
        rep = adm.full_report(sample, trials=args.trials, seed=args.seed)
        reports.append({"theta": theta, "dim": dim, **rep.to_dict()})
    payload = reports[0] if len(reports) == 1 else {"reports": reports}
    text = json.dumps(payload, indent=2)
    if args.out:
        Path(args.out).write_text(text + "\n")
    print(text)
    return EXIT_OK


def cmd_oracle(args) -> int:
    coeffs = _load_coefficients(args.config)
    dim = args.dim or len(coeffs.n_ref)
    theta = args.theta if args.theta is not None else coeffs.theta_ref
    sample = adm.ViscositySample.from_coefficients(coeffs, theta, dim=dim)
    result = adm.dissipation_quadratic_min(
        sample, compressible=args.compressible, trials=args.trials,
        seed=args.seed)
    sd = adm.semidefinite_check(
        adm.dissipation_matrix(sample, args.compressible))
    payload = {
        "theta": theta,
        "dim": dim,
        "compressible": args.compressible,
        "trials": args.trials,
        "seed": args.seed,
        "oracle_min": result.min_value,
        "product_sphere_min": result.product_sphere_min,
        "argmin_N": result.argmin_N.tolist(),
        "argmin_D": result.argmin_D.tolist(),
        "eigen_lambda_min": sd.lambda_min,
        "eigen_verdict": sd.passed,
        "agrees": (abs(result.min_value) <= 1e-8
                   or sd.passed == (result.min_value > 0)),
    }
    print(json.dumps(payload, indent=2))
    return EXIT_OK


# ---------------------------------------------------------------------------
# besov-audit
# ---------------------------------------------------------------------------


def cmd_besov_audit(args) -> int:
    grid = Grid((args.resolution,) * args.dim)
    d = grid.dim
    pairs = [(d / 2, d / 2), (d / 2, d / 2 - 1), (d / 2, d / 2 - 2),
             (d / 2 - 1, d / 2 - 1)]
    table = {"resolution": args.resolution, "dim": d, "trials": args.trials,
             "seed": args.seed, "product_estimates": [],
             "smoothing_estimates": []}
    for s1, s2 in pairs:
        if s1 + s2 <= 0:
            # outside the estimate's validity range (arises for d = 2;
            # every listed pair is admissible from d = 3 on)
            table["product_estimates"].append(
                {"s1": s1, "s2": s2, "skipped": "s1+s2 <= 0"})
            continue
        fit = verify_product_estimate(grid, s1, s2, trials=args.trials,
                                      seed=args.seed)
        table["product_estimates"].append({
            "s1": s1, "s2": s2, "constant": fit.constant,
            "median_ratio": fit.median_ratio, "passed": fit.passed})
    from .coefficients import default_nematic_coefficients
    coeffs = default_nematic_coefficients(d)
    for name, kwargs in (
            ("laplacian_l1", dict(operator="laplacian", time_norm="l1")),
            ("laplacian_l2", dict(operator="laplacian", time_norm="l2")),
            ("thermal_l1", dict(operator="thermal", coeffs=coeffs,
                                time_norm="l1"))):
        fit = verify_smoothing_estimate(grid, s=0.0, trials=args.trials,
                                        seed=args.seed, **kwargs)
        table["smoothing_estimates"].append({
            "name": name, "constant": fit.constant,
            "median_ratio": fit.median_ratio, "passed": fit.passed})
    text = json.dumps(table, indent=2)
    if args.out:
        Path(args.out).write_text(text + "\n")
    print(text)
    return EXIT_OK


# ---------------------------------------------------------------------------
# convergence
# ---------------------------------------------------------------------------


def _observed_orders(errors):
    errors = np.asarray(errors)
    return list(np.log2(errors[:-1] / errors[1:]))


def cmd_convergence(args) -> int:
    if args.levels < 1:
        raise ConfigError("need at least one refinement level")
    parsed = parse_config(args.config)
    grid, coeffs = parsed.grid, parsed.coefficients
    base_cfg = parsed.solver
    dts = [base_cfg.dt / 2**k for k in range(args.levels + 1)]
    t_end = base_cfg.t_end
    report = {"dts": dts, "t_end": t_end, "studies": []}

    from .initial_data import state_from_modes
    # heat-only: single anisotropic diffusion mode
    kvec = (2, 1) if grid.dim == 2 else (2, 1, 0)
    amp = 1e-2
    state = state_from_modes(grid, coeffs, theta_modes=[(kvec, amp, 0.3)])
    l1, l2 = coeffs.lambda_bar
    ndotk = sum(a * b for a, b in zip(coeffs.n_ref, kvec))
    scale = [2 * np.pi / p for p in grid.period]
    k_phys = [k * s for k, s in zip(kvec, scale)]
    k2 = sum(k * k for k in k_phys)
    mu = l1 * k2 + l2 * (sum(a * b for a, b in
                             zip(coeffs.n_ref, k_phys))) ** 2
    x = grid.coordinates()
    phase = sum(k * xi for k, xi in zip(k_phys, x)) + 0.3
    exact = coeffs.theta_ref + amp * np.exp(-mu * t_end) * np.cos(phase)
    errs = []
    for dt in dts:
        cfg = SolverConfig(dt=dt, t_end=t_end, subsystem="heat-only",
                           snapshot_stride=10**9)
        res = run(state, coeffs, cfg)
        errs.append(float(np.max(np.abs(res.final_state.theta.values
                                        - exact))))
    report["studies"].append({"name": "heat-only", "errors": errs,
                              "orders": _observed_orders(errs)})

    # stokes-only: single shear mode
    ustate = state_from_modes(grid, coeffs,
                              u_modes=[((0, 1) + (0,) * (grid.dim - 2),
                                        0, amp, 0.0)])
    a = coeffs.alpha_bar
    rate = (a[3] + a[4] + a[6]) / 2.0 * scale[1] ** 2
    exact_u = ustate.u.values * np.exp(-rate * t_end)
    errs = []
    for dt in dts:
        cfg = SolverConfig(dt=dt, t_end=t_end, subsystem="stokes-only",
                           snapshot_stride=10**9)
        res = run(ustate, coeffs, cfg)
        errs.append(float(np.max(np.abs(res.final_state.u.values - exact_u))))
    report["studies"].append({"name": "stokes-only", "errors": errs,
                              "orders": _observed_orders(errs)})

    # manufactured solution on the full system
    if grid.dim == 2:
        mms = ManufacturedSolution(grid, coeffs, epsilon=1e-2)
        ops = assemble_linear_operators(coeffs, grid)
        force = mms.forcing(coeffs, ops)
        errs = []
        for dt in dts:
            cfg = SolverConfig(dt=dt, t_end=t_end, snapshot_stride=10**9)
            res = run(mms.state(0.0), coeffs, cfg, forcing=force)
            ex = mms.state(t_end)
            errs.append(float(max(
                np.max(np.abs(res.final_state.u.values - ex.u.values)),
                np.max(np.abs(res.final_state.n.values - ex.n.values)),
                np.max(np.abs(res.final_state.theta.values
                              - ex.theta.values)))))
        entry = {"name": "manufactured", "errors": errs,
                 "orders": _observed_orders(errs)}
        if len(errs) >= 3:
            r1 = [2 * errs[i + 1] - errs[i] for i in range(len(errs) - 1)]
            r2 = [(4 * r1[i + 1] - r1[i]) / 3 for i in range(len(r1) - 1)]
            entry["spatial_floor_estimate"] = abs(r2[-1])
        report["studies"].append(entry)

    text = json.dumps(report, indent=2)
    if args.out:
        Path(args.out).write_text(text + "\n")
    print(text)
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nemflow",
        description="Pseudo-spectral non-isothermal nematic liquid crystal "
                    "simulator and verification toolkit.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="integrate a configured run")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--snapshots", action="store_true",
                   help="write binary state snapshots")
    p.add_argument("--diag-stride", type=int, default=None)
    p.add_argument("--seed", type=int, default=None,
                   help="override the config seed")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("check-coefficients",
                       help="second-law admissibility report")
    p.add_argument("--config", required=True)
    p.add_argument("--theta", type=float, default=None)
    p.add_argument("--theta-range", nargs=3, type=float, default=None,
                   metavar=("LO", "HI", "COUNT"))
    p.add_argument("--dim", type=int, default=None)
    p.add_argument("--trials", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_check_coefficients)

    p = sub.add_parser("oracle", help="sampling oracle for the dissipation "
                                      "quadratic form")
    p.add_argument("--config", required=True)
    p.add_argument("--theta", type=float, default=None)
    p.add_argument("--dim", type=int, default=None)
    p.add_argument("--compressible", action="store_true")
    p.add_argument("--trials", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("besov-audit", help="empirical shell-norm estimate "
                                           "constants")
    p.add_argument("--resolution", type=int, default=32)
    p.add_argument("--dim", type=int, default=2, choices=(2, 3))
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_besov_audit)

    p = sub.add_parser("convergence", help="dt-refinement studies")
    p.add_argument("--config", required=True)
    p.add_argument("--levels", type=int, required=True)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_convergence)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except NemflowError as exc:
        for klass, code, kind in _ERROR_KINDS:
            if isinstance(exc, klass):
                return _fail(code, kind, str(exc))
        return _fail(EXIT_RUNTIME, "error", str(exc))
    except FileNotFoundError as exc:
        return _fail(EXIT_CONFIG, "config", str(exc))


if __name__ == "__main__":
    sys.exit(main())
