"""Command line front end.

    dfc topology|calc|diagnose|validate --scenario PATH [--out DIR] [--seed N]

Exit codes: 0 success, 2 schema error, 3 decoder refusal (enumeration cap),
4 pipeline failure. Set DFC_LOG=DEBUG|INFO|WARNING for verbosity.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import diagnosis as dg
from . import iteration, kinematics, recovery, topology
from .pipeline import run_pipeline
from .recovery import EnumerationLimitError
from .scenario import Scenario, ScenarioError, load, substream

EXIT_OK = 0
EXIT_SCHEMA = 2
EXIT_REFUSAL = 3
EXIT_PIPELINE = 4

log = logging.getLogger("dfc")


def _header(sc: Scenario) -> str:
    return f"scenario={sc.name} sha256={sc.sha256} seed={sc.seed}"


def _write_json(path: Path, obj):
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _manifest(sc: Scenario, out: Path, command: str, artifacts: list[str]):
    _write_json(out / f"manifest_{command}.json", {
        "command": command,
        "scenario": sc.name,
        "scenario_sha256": sc.sha256,
        "seed": sc.seed,
        "artifacts": sorted(artifacts),
    })


def topology_report(sc: Scenario) -> dict:
    g = sc.graph
    kappa = topology.vertex_connectivity(g)
    connected = topology.is_connected(g)
    report = {
        "scenario_sha256": sc.sha256,
        "n": g.n,
        "k": sc.platoon.k if sc.platoon else None,
        "vertex_connectivity": kappa,
        "max_tolerable_faults": topology.max_tolerable_faults(kappa),
        "eccentricity": {
            str(i): topology.eccentricity(g, i) if connected else None for i in range(1, g.n + 1)
        },
        "degree": {str(i): g.degree(i) for i in range(1, g.n + 1)},
    }
    return report


def cmd_topology(sc: Scenario, out: Path) -> int:
    report = topology_report(sc)
    out.mkdir(parents=True, exist_ok=True)
    _write_json(out / "topology.json", report)
    _manifest(sc, out, "topology", ["topology.json"])
    print(f"n = {report['n']}")
    if report["k"] is not None:
        print(f"k = {report['k']}")
    print(f"vertex connectivity = {report['vertex_connectivity']}")
    print(f"max tolerable faults f = {report['max_tolerable_faults']}")
    ecc = ", ".join(f"{i}:{e}" for i, e in report["eccentricity"].items())
    print(f"eccentricity = {ecc}")
    return EXIT_OK


def _initial_state(sc: Scenario) -> np.ndarray:
    x0 = sc.calc.x0
    if isinstance(x0, tuple):
        return np.asarray(x0, dtype=float)
    if isinstance(x0, dict):
        from .pipeline import build_trace
        return kinematics.snapshot(build_trace(sc), float(x0.get("t", 0.0)), x0["channel"])
    return sc.calc.x0_scale * substream(sc.seed, "initial-state").standard_normal(sc.n)


def cmd_calc(sc: Scenario, out: Path) -> int:
    cfg, f = sc.calc, sc.recovery.f
    W = sc.weights()
    L_max = cfg.horizon if cfg.horizon is not None else sc.n - 1
    steps = max(L_max, cfg.norm_steps)
    faults = sc.fault_model(steps)
    x0 = _initial_state(sc)
    trace = iteration.run(W, x0, faults, steps)
    vehicles = cfg.vehicles or tuple(range(1, sc.n + 1))

    curves = {}
    for i in vehicles:
        curves[i] = recovery.recovery_error_curve(
            trace, W, i, f, L_max, tol=sc.recovery.tol, max_supports=sc.recovery.max_supports
        )

    out.mkdir(parents=True, exist_ok=True)
    header = _header(sc)
    artifacts = ["error_curves.csv", "trace.csv", "norms.csv", "calc_summary.json"]
    recovery.write_error_curves_csv(curves, out / "error_curves.csv", header)
    iteration.write_trace_csv(trace, out / "trace.csv", header)
    iteration.write_norms_csv(trace.norms(), out / "norms.csv", header)
    summary = {"scenario_sha256": sc.sha256, "fault_budget": f, "horizon": L_max, "vehicles": {}}
    if faults.faults:
        clean = iteration.run(W, x0, iteration.NO_FAULTS, steps)
        iteration.write_norms_csv(clean.norms(), out / "norms_fault_free.csv", header)
        artifacts.append("norms_fault_free.csv")
    if W.stable and steps + 1 >= cfg.flag_window:
        summary["steady_state_fault_flag"] = iteration.steady_state_fault_flag(
            trace, cfg.flag_tol * max(1.0, float(np.linalg.norm(x0))), cfg.flag_window
        )
    for i, errs in curves.items():
        L = recovery.first_exact_horizon(errs)
        summary["vehicles"][str(i)] = {
            "first_exact_L": L,
            "time_steps": None if L is None else L + 1,
            "final_error": float(errs[-1]),
        }
        print(f"vehicle {i}: exact from L = {L}" + ("" if L is None else f" ({L + 1} time steps)"))
    _write_json(out / "calc_summary.json", summary)
    _manifest(sc, out, "calc", artifacts)
    return EXIT_OK


def cmd_diagnose(sc: Scenario, out: Path) -> int:
    result = run_pipeline(sc)
    out.mkdir(parents=True, exist_ok=True)
    header = _header(sc)
    artifacts = ["residuals.csv", "verdicts.json", "kinematics.csv", "kinematics_truth.csv"]
    residuals = [r for o in result.outcomes.values() for r in o.residuals]
    dg.write_residuals_csv(residuals, out / "residuals.csv", header)
    kinematics.write_trace_csv(result.trace.measured, out / "kinematics.csv", header)
    kinematics.write_trace_csv(result.trace.truth, out / "kinematics_truth.csv", header)

    records = []
    for i, o in result.outcomes.items():
        v = o.verdict
        speed_file = None
        if v.corrected_speed is not None:
            speed_file = f"corrected_speed_v{i}.csv"
            artifacts.append(speed_file)
            with open(out / speed_file, "w", newline="") as fh:
                fh.write(f"# {header}\n")
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(["t", "u_measured", "u_corrected"])
                for tk, um, uc in zip(result.trace.t, result.trace.measured.u[i - 1], v.corrected_speed):
                    w.writerow([repr(float(tk)), repr(float(um)), repr(float(uc))])
        records.append({
            "vehicle": i,
            "verdict": v.verdict,
            "faulty_vehicle": v.faulty_vehicle,
            "threshold": None if np.isnan(v.threshold) else v.threshold,
            "evidence": [{"target": j, "rms": s} for j, s in sorted(v.evidence.items())],
            "corrected_speed_file": speed_file,
            "cause": v.cause or None,
            "rank_condition": o.rank_condition,
            "horizon": o.horizon,
            "scenario_sha256": sc.sha256,
        })
        print(f"vehicle {i}: {v.label}" + (f" ({v.cause})" if v.cause else ""))
    _write_json(out / "verdicts.json", {
        "scenario_sha256": sc.sha256,
        "comm_fault_flag": result.comm_fault_flag,
        "verdicts": records,
    })
    _manifest(sc, out, "diagnose", artifacts)
    if result.failed:
        print(f"recovery failed for vehicles {result.failed}", file=sys.stderr)
        return EXIT_PIPELINE
    return EXIT_OK


def cmd_validate(sc: Scenario, out: Path) -> int:
    print(f"{sc.name}: valid (n = {sc.n}, sha256 = {sc.sha256})")
    return EXIT_OK


COMMANDS = {
    "topology": cmd_topology,
    "calc": cmd_calc,
    "diagnose": cmd_diagnose,
    "validate": cmd_validate,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dfc", description=__doc__.splitlines()[0])
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--scenario", required=True, help="scenario JSON file")
    parser.add_argument("--out", help="output directory (overrides the scenario)")
    parser.add_argument("--seed", type=int, help="override the scenario seed")
    return parser


def main(argv=None) -> int:
    logging.basicConfig(
        level=os.environ.get("DFC_LOG", "WARNING").upper(),
        format="%(levelname)s %(name)s: %(message)s",
    )
    args = build_parser().parse_args(argv)
    if args.seed is not None and not 0 <= args.seed < 2**64:
        print("schema error: --seed must be an unsigned 64-bit integer", file=sys.stderr)
        return EXIT_SCHEMA
    try:
        sc = load(args.scenario, seed=args.seed, output_dir=args.out)
    except FileNotFoundError:
        print(f"schema error: no such scenario file {args.scenario}", file=sys.stderr)
        return EXIT_SCHEMA
    except ScenarioError as exc:
        print(f"schema error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    try:
        return COMMANDS[args.command](sc, Path(sc.output_dir))
    except EnumerationLimitError as exc:
        print(f"decoder refused: {exc}", file=sys.stderr)
        return EXIT_REFUSAL
    except topology.UnreachableError as exc:
        print(f"pipeline failure: {exc}", file=sys.stderr)
        return EXIT_PIPELINE


if __name__ == "__main__":
    sys.exit(main())
