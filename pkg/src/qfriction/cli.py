"""Command line front end.

Subcommands: model, evolve, check, steady, forces, sweep. Each takes a
YAML config plus optional --out / --seed overrides. Exit codes: 0 on
success (and all checks passing), 1 when a check battery reports a
failure, 2 on usage or config errors, 3 on numerical failures (resource
caps, integrator breakdown, degenerate constructions).

Runs are deterministic: identical config and seed produce byte-identical
CSV and JSON outputs. Figures are written next to the delimited output
unless output.figures is false. The sweep subcommand distributes runs
over processes; QFRICTION_WORKERS overrides the worker count.
"""

from __future__ import annotations

import argparse
import copy
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .config import (
    ConfigError,
    ModelBundle,
    build_dissipator,
    build_model_bundle,
    initial_state,
    load_config,
    momentum_probe_ops,
    observable_map,
    validate_config,
)
from .criteria import (
    CheckResult,
    CriteriaReport,
    detailed_balance_witnesses,
    ehrenfest_check,
    ehrenfest_operators,
    ground_decay_rate,
    momentum_balance_residual,
    rt_probe,
    therm_residual,
    ti_residual,
)
from .errors import DegenerateInputError, IntegrationFailure, ResourceLimitError
from .evolution import integrate, steady_state_analysis, suggest_dt
from .hilbert import DensityMatrix
from .models import normal_mode_ops, thermal_state
from .serialize import (
    FLOAT_FMT,
    operator_to_dict,
    write_json,
    write_trajectory_csv,
)

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_USAGE = 2
EXIT_NUMERICAL = 3

_NUMERICAL_ERRORS = (ResourceLimitError, IntegrationFailure,
                     DegenerateInputError, np.linalg.LinAlgError)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qfriction",
        description="Translation-covariant dissipator construction, "
                    "evolution and diagnostics.")
    sub = parser.add_subparsers(dest="command", required=True)
    descriptions = {
        "model": "summarize the configured model and channels",
        "evolve": "propagate the initial state and record observables",
        "check": "run the diagnostic battery and report pass/fail",
        "steady": "assemble the generator matrix and analyse its spectrum",
        "forces": "compare d<O>/dt against the generator's force terms",
        "sweep": "repeat a subcommand over a list of parameter values",
    }
    for name, desc in descriptions.items():
        sp = sub.add_parser(name, help=desc, description=desc)
        sp.add_argument("--config", required=True, help="YAML config path")
        sp.add_argument("--out", default=None,
                        help="output directory (overrides output.directory)")
        sp.add_argument("--seed", type=int, default=None,
                        help="RNG seed (overrides run.seed)")
    return parser


def _outdir(cfg, override) -> Path:
    path = Path(override) if override else Path(cfg["output"]["directory"])
    path.mkdir(parents=True, exist_ok=True)
    return path


def _times(run_cfg) -> np.ndarray:
    return np.linspace(0.0, run_cfg["t_final"], run_cfg["snapshots"])


def _prep(cfg):
    bundle = build_model_bundle(cfg)
    spec = build_dissipator(cfg, bundle)
    return bundle, spec


# ---------------------------------------------------------------------------
# Subcommands


def cmd_model(cfg, outdir: Path) -> int:
    bundle = build_model_bundle(cfg)
    info = {
        "kind": bundle.kind,
        "dims": list(bundle.space.dims),
        "dim": bundle.space.dim,
        "hbar": bundle.hbar,
        "kB": bundle.kB,
    }
    if bundle.model is not None:
        m = bundle.model
        info["oscillator"] = {"omega1": m.omega1, "omega2": m.omega2,
                              "theta": m.theta, "m1": m.m1, "m2": m.m2}
    if bundle.gs is not None:
        g = bundle.gs.grid
        info["grid"] = {"points": g.points, "p_min": g.p_min, "dp": g.dp,
                        "n_channels": bundle.gs.n_channels}
    if cfg["dissipator"]["channels"]:
        spec = build_dissipator(cfg, bundle)
        info["channels"] = [
            {"variant": ch.variant, "kappa": ch.kappa,
             "alpha": [ch.alpha.real, ch.alpha.imag]}
            for ch in spec.channels]
    write_json(outdir / "model.json", info)
    print(f"model: {bundle.kind}, dims {tuple(bundle.space.dims)}, "
          f"dim {bundle.space.dim}")
    for ch in info.get("channels", []):
        print(f"channel: {ch['variant']}, kappa={ch['kappa']:g}")
    print(f"wrote {outdir / 'model.json'}")
    return EXIT_OK


def cmd_evolve(cfg, outdir: Path) -> int:
    bundle, spec = _prep(cfg)
    run = cfg["run"]
    obs = observable_map(bundle, run["observables"])
    rho0 = initial_state(cfg, bundle)
    traj = integrate(rho0, bundle.H, spec, _times(run), method=run["method"],
                     dt=run["dt"], rtol=run["rtol"], atol=run["atol"],
                     observables=obs, record_steps=run["record_steps"])
    names = [e["name"] for e in run["observables"]]
    write_trajectory_csv(outdir / "trajectory.csv", traj, names)
    trace = np.asarray(traj.monitors["trace"])
    summary = {
        "t_final": float(traj.times[-1]),
        "snapshots": int(len(traj.times)),
        "method": run["method"],
        "max_trace_deviation": float(np.abs(trace - 1.0).max()),
        "max_herm_defect": float(np.max(traj.monitors["herm_defect"])),
        "min_eigenvalue": float(np.min(traj.monitors["min_eig"])),
        "final": {name: traj.monitors[name][-1] for name in names},
    }
    write_json(outdir / "summary.json", summary)
    if cfg["output"]["save_states"]:
        sdir = outdir / "states"
        sdir.mkdir(exist_ok=True)
        for i, state in enumerate(traj.states):
            write_json(sdir / f"state_{i:03d}.json", operator_to_dict(state))
    if cfg["output"]["figures"]:
        from .plotting import render_trajectory
        render_trajectory(outdir / "trajectory.png", traj, names)
    print(f"evolved to t={summary['t_final']:g} "
          f"({summary['snapshots']} snapshots, {run['method']})")
    print(f"max |trace-1| {summary['max_trace_deviation']:.3e}, "
          f"min eigenvalue {summary['min_eigenvalue']:.3e}")
    for name in names:
        print(f"final <{name}> = {summary['final'][name]:.6g}")
    print(f"wrote {outdir / 'trajectory.csv'}")
    return EXIT_OK


def run_checks(cfg, bundle: ModelBundle, spec) -> CriteriaReport:
    """Assemble the diagnostic battery for a validated config."""
    cc = cfg["check"]
    seed = cfg["run"]["seed"]
    checks = []

    ti_cfg = cc["ti"]
    if ti_cfg["enabled"]:
        ti = ti_residual(spec, momentum_probe_ops(bundle),
                         n_samples=ti_cfg["samples"], seed=seed,
                         support=ti_cfg["support"])
        checks.append(CheckResult(
            name="translation-invariance", value=ti.value,
            tolerance=ti_cfg["tolerance"],
            passed=ti.value <= ti_cfg["tolerance"], samples=ti.n_states,
            note=f"dissipator scale {ti.scale:.3e}"))

    th_cfg = cc["thermalization"]
    T = th_cfg["temperature"]
    if th_cfg["enabled"]:
        if T > 0:
            rho_ref = thermal_state(bundle.H, T, kB=bundle.kB)
            note = f"Gibbs state at T={T:g}"
        else:
            rho_ref = DensityMatrix.from_ket(bundle.space, bundle.ground)
            note = "ground state"
        tval = therm_residual(spec, rho_ref)
        checks.append(CheckResult(
            name="thermalization", value=tval, tolerance=th_cfg["tolerance"],
            passed=tval <= th_cfg["tolerance"], note=note))

    dec_cfg = cc["decay"]
    if dec_cfg["enabled"]:
        dval = ground_decay_rate(spec, bundle.ground)
        checks.append(CheckResult(
            name="ground-decay-rate", value=dval,
            tolerance=dec_cfg["tolerance"],
            passed=dval <= dec_cfg["tolerance"]))

    rt_cfg = cc["rt"]
    if rt_cfg["probes"]:
        rt = rt_probe(spec, bundle.H, T, rt_cfg["probes"], kB=bundle.kB)
        checks.append(CheckResult(
            name="relaxed-balance", value=rt.residual,
            tolerance=rt_cfg["tolerance"],
            passed=rt.residual <= rt_cfg["tolerance"],
            samples=len(rt_cfg["probes"]),
            note=f"dissipator action {rt.action_norm:.3e}"))

    if bundle.kind == "grid" and cc["balance"]["enabled"]:
        bal_cfg = cc["balance"]
        bval = momentum_balance_residual(bundle.gs, spec.channels)
        checks.append(CheckResult(
            name="momentum-balance", value=bval,
            tolerance=bal_cfg["tolerance"],
            passed=bval <= bal_cfg["tolerance"]))

    wit_cfg = cc["witnesses"]
    if wit_cfg["temperature"] is not None:
        total = 0.0
        for ch in spec.channels:
            rep = detailed_balance_witnesses(ch.operator, bundle.H,
                                             wit_cfg["temperature"],
                                             kB=bundle.kB)
            total += rep.obstruction
        floor = wit_cfg["min_obstruction"]
        checks.append(CheckResult(
            name="balance-obstruction", value=total, tolerance=floor,
            passed=total >= floor, samples=len(spec.channels),
            note="lower bound; larger means strict balance is further away"))

    pos_cfg = cc["positivity"]
    if pos_cfg["enabled"]:
        rho0 = initial_state(cfg, bundle)
        times = np.linspace(0.0, pos_cfg["t_final"], 9)
        traj = integrate(rho0, bundle.H, spec, times,
                         method=cfg["run"]["method"], dt=pos_cfg["dt"],
                         rtol=cfg["run"]["rtol"], atol=cfg["run"]["atol"])
        worst_neg = max(0.0, -float(np.min(traj.monitors["min_eig"])))
        checks.append(CheckResult(
            name="positivity", value=worst_neg,
            tolerance=pos_cfg["tolerance"],
            passed=worst_neg <= pos_cfg["tolerance"],
            note=f"evolved to t={pos_cfg['t_final']:g}"))
        drift = float(np.abs(np.asarray(traj.monitors["trace"]) - 1.0).max())
        checks.append(CheckResult(
            name="trace-preservation", value=drift,
            tolerance=pos_cfg["trace_tolerance"],
            passed=drift <= pos_cfg["trace_tolerance"]))

    meta = {"model": bundle.kind, "dims": list(bundle.space.dims),
            "channels": [ch.variant for ch in spec.channels], "seed": seed}
    return CriteriaReport(checks=checks, meta=meta)


def _write_report_csv(path, report: CriteriaReport):
    with open(path, "w", newline="") as fh:
        fh.write("check,value,tolerance,status,samples,note\n")
        for c in report.checks:
            status = "pass" if c.passed else "fail"
            note = c.note.replace(",", ";")
            fh.write(f"{c.name},{FLOAT_FMT % c.value},{FLOAT_FMT % c.tolerance},"
                     f"{status},{c.samples},{note}\n")


def cmd_check(cfg, outdir: Path) -> int:
    bundle, spec = _prep(cfg)
    report = run_checks(cfg, bundle, spec)
    write_json(outdir / "report.json", report.to_dict())
    _write_report_csv(outdir / "report.csv", report)
    if cfg["output"]["figures"]:
        from .plotting import render_report
        render_report(outdir / "report.png", report)
    print(report.table())
    print(f"wrote {outdir / 'report.json'}")
    return EXIT_OK if report.passed else EXIT_CHECK_FAILED


def cmd_steady(cfg, outdir: Path) -> int:
    bundle, spec = _prep(cfg)
    result = steady_state_analysis(bundle.H, spec)
    order = np.lexsort((result.eigenvalues.imag, -result.eigenvalues.real))
    ev = result.eigenvalues[order]
    with open(outdir / "spectrum.csv", "w", newline="") as fh:
        fh.write("re,im\n")
        for z in ev:
            fh.write(f"{FLOAT_FMT % z.real},{FLOAT_FMT % z.imag}\n")
    g = bundle.ground
    kernel = []
    for i, state in enumerate(result.states):
        m = state.matrix
        entry = {
            "trace": float(np.trace(m).real),
            "purity": float(np.trace(m @ m).real),
            "ground_weight": float(np.real(g.conj() @ m @ g)),
        }
        kernel.append(entry)
        if cfg["output"]["save_states"]:
            write_json(outdir / f"steady_state_{i:02d}.json",
                       operator_to_dict(state))
    info = {
        "kernel_dim": result.kernel_dim,
        "gap": result.gap,
        "max_real": result.max_real,
        "kernel_states": kernel,
    }
    write_json(outdir / "spectrum.json", info)
    if cfg["output"]["figures"]:
        from .plotting import render_spectrum
        render_spectrum(outdir / "spectrum.png", result)
    print(f"kernel dimension {result.kernel_dim}, gap {result.gap:.6e}, "
          f"max Re {result.max_real:.3e}")
    for i, entry in enumerate(kernel):
        print(f"kernel state {i}: ground weight {entry['ground_weight']:.6f}, "
              f"purity {entry['purity']:.6f}")
    print(f"wrote {outdir / 'spectrum.csv'}")
    return EXIT_OK


def cmd_forces(cfg, outdir: Path) -> int:
    bundle, spec = _prep(cfg)
    run = cfg["run"]
    if bundle.kind == "grid":
        x_op = None
        keys = ("p1", "p1_rhs")
    else:
        x_op = normal_mode_ops(bundle.model, bundle.space).x1
        keys = ("p1", "p1_rhs", "x1", "x1_rhs")
    ops = ehrenfest_operators(bundle.H, spec, x_op,
                              momentum_probe_ops(bundle)[0])
    rho0 = initial_state(cfg, bundle)
    tf = run["t_final"]
    dt = run["dt"]
    if run["method"] == "rk4":
        # a dense series on an exactly uniform grid keeps the derivative
        # stencil at fourth order, so round the step to divide the span
        dt = tf / max(1, round(tf / (dt or suggest_dt(bundle.H, spec))))
    traj = integrate(rho0, bundle.H, spec, [0.0, tf], method=run["method"],
                     dt=dt, rtol=run["rtol"], atol=run["atol"],
                     observables=ops, record_steps=True)
    rep = ehrenfest_check(traj, keys)
    with open(outdir / "forces.csv", "w", newline="") as fh:
        fh.write("t," + ",".join(keys) + "\n")
        for i, t in enumerate(traj.step_times):
            row = [FLOAT_FMT % t]
            row += [FLOAT_FMT % traj.step_series[k][i] for k in keys]
            fh.write(",".join(row) + "\n")
    payload = {
        "p_defect": rep.p_defect, "p_scale": rep.p_scale,
        "p_relative": rep.p_relative, "source": rep.source,
        "steps": int(len(traj.step_times)),
    }
    if rep.x_defect is not None:
        payload.update(x_defect=rep.x_defect, x_scale=rep.x_scale,
                       x_relative=rep.x_relative)
    write_json(outdir / "forces.json", payload)
    if cfg["output"]["figures"]:
        from .plotting import render_forces
        render_forces(outdir / "forces.png", traj, keys)
    print(f"momentum balance: defect {rep.p_defect:.3e} "
          f"(relative {rep.p_relative:.3e})")
    if rep.x_defect is not None:
        print(f"position balance: defect {rep.x_defect:.3e} "
              f"(relative {rep.x_relative:.3e})")
    print(f"wrote {outdir / 'forces.csv'}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# Sweep


def _set_by_path(tree, dotted: str, value):
    node = tree
    parts = dotted.split(".")
    for i, part in enumerate(parts):
        last = i == len(parts) - 1
        if isinstance(node, list):
            try:
                idx = int(part)
            except ValueError:
                raise ConfigError([f"sweep.path: segment {part!r} indexes a "
                                   "list and must be an integer"])
            if not 0 <= idx < len(node):
                raise ConfigError([f"sweep.path: index {idx} is out of range "
                                   f"for a list of length {len(node)}"])
            if last:
                node[idx] = value
            else:
                node = node[idx]
        elif isinstance(node, dict):
            if last:
                node[part] = value
            elif part not in node:
                raise ConfigError([f"sweep.path: key {part!r} not found while "
                                   f"descending {dotted!r}"])
            else:
                node = node[part]
        else:
            raise ConfigError([f"sweep.path: cannot descend below the scalar "
                               f"at segment {part!r}"])


def _sweep_worker(payload) -> int:
    """Run one sweep point; must stay importable for process pools."""
    variant, command, outdir, seed = payload
    try:
        cfg = validate_config(variant)
        if seed is not None:
            cfg["run"]["seed"] = seed
        return _dispatch(command, cfg, Path(outdir))
    except ConfigError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except _NUMERICAL_ERRORS as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ValueError as exc:
        print(f"invalid parameters: {exc}", file=sys.stderr)
        return EXIT_USAGE


def cmd_sweep(cfg, raw, outdir: Path, seed) -> int:
    sw = cfg["sweep"]
    if sw is None:
        raise ConfigError(["sweep: section is required for the sweep subcommand"])
    runs = []
    payloads = []
    for i, value in enumerate(sw["values"]):
        variant = copy.deepcopy(raw)
        variant.pop("sweep", None)
        _set_by_path(variant, sw["path"], value)
        rundir = outdir / f"sweep_{i:03d}"
        rundir.mkdir(parents=True, exist_ok=True)
        payloads.append((variant, sw["subcommand"], str(rundir), seed))
        runs.append({"index": i, "value": value, "directory": rundir.name})

    workers = int(os.environ.get("QFRICTION_WORKERS", "0")) or (os.cpu_count() or 1)
    workers = min(workers, len(payloads))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            codes = list(pool.map(_sweep_worker, payloads))
    else:
        codes = [_sweep_worker(p) for p in payloads]
    for run, code in zip(runs, codes):
        run["exit_code"] = code
    write_json(outdir / "sweep.json", {
        "subcommand": sw["subcommand"], "path": sw["path"],
        "values": sw["values"], "workers": workers, "runs": runs})
    worst = max(codes, default=EXIT_OK)
    print(f"sweep over {sw['path']}: {len(runs)} runs, "
          f"{sum(1 for c in codes if c == 0)} succeeded (workers {workers})")
    print(f"wrote {outdir / 'sweep.json'}")
    return worst


# ---------------------------------------------------------------------------
# Entry point


def _dispatch(command: str, cfg, outdir: Path) -> int:
    if command == "model":
        return cmd_model(cfg, outdir)
    if command == "evolve":
        return cmd_evolve(cfg, outdir)
    if command == "check":
        return cmd_check(cfg, outdir)
    if command == "steady":
        return cmd_steady(cfg, outdir)
    if command == "forces":
        return cmd_forces(cfg, outdir)
    raise ValueError(f"unhandled command {command!r}")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        raw = load_config(args.config)
    except OSError as exc:
        print(f"cannot read config: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ConfigError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    try:
        need_channels = args.command not in ("model",)
        cfg = validate_config(raw, require_dissipator=need_channels)
        if args.seed is not None:
            cfg["run"]["seed"] = args.seed
        outdir = _outdir(cfg, args.out)
        if args.command == "sweep":
            return cmd_sweep(cfg, raw, outdir, args.seed)
        return _dispatch(args.command, cfg, outdir)
    except ConfigError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except _NUMERICAL_ERRORS as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ValueError as exc:
        print(f"invalid parameters: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
