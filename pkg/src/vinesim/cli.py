"""Command line front end.

Subcommands cover the bench workflows (calibrate, bend-test, two-segment),
scripted simulation (simulate), sequence planning (plan), reachable-set
sampling (workspace) and the live websocket server (serve). File and flag
units are human scale (mm, kPa, deg, N); everything internal is SI.

Exit codes: 0 success, 1 runtime failure (reason on stderr), 2 usage.
"""

import argparse
import csv
import json
import math
import sys
from pathlib import Path

from . import calibration as cal
from . import planner as pln
from . import session as ses
from . import workspace as wsp
from .model import (MaterialModel, RobotDescription, jammed_state,
                    unjammed_state)
from .statics import virtual_two_segment_test
from .units import ATMOSPHERE_PA

_CONDITIONS = {
    "unjammed": cal.UNJAMMED,
    "jam-atm": cal.JAMMED_ATMOSPHERE,
    "jam-vac": cal.JAMMED_VACUUM,
}


def _condition_state(name, internal_gauge):
    if name == "unjammed":
        return unjammed_state(internal_gauge)
    if name == "jam-atm":
        return jammed_state(internal_gauge, pouch_abs=ATMOSPHERE_PA)
    return jammed_state(internal_gauge, pouch_abs=0.0)


def _ensure_out(path, force):
    p = Path(path)
    if p.exists() and not force:
        raise RuntimeError(
            "output %s exists; pass --force to overwrite" % p)
    return p


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="vinesim",
        description="Simulation, calibration and sequence planning for "
                    "jamming-patterned everting beam robots.")
    p.add_argument("--seed", type=int, default=0,
                   help="RNG seed; all subcommands are deterministic for a "
                        "fixed seed and input set")
    sub = p.add_subparsers(dest="subcommand", metavar="subcommand")
    sub.required = True

    q = sub.add_parser("calibrate",
                       help="fit the four pressure/jamming rigidity "
                            "parameters to bench anchors")
    q.add_argument("anchors", help="anchors JSON file")
    q.add_argument("--out", default="calibration.json",
                   help="report JSON output path (default %(default)s)")
    q.add_argument("--force", action="store_true",
                   help="overwrite the output file if it exists")

    q = sub.add_parser("bend-test",
                       help="tabulate simulated cantilever bench forces "
                            "across pouch conditions and pressures")
    q.add_argument("--pressures-kpa", default="6.9,13.8,20.7",
                   help="comma-separated internal gauge pressures in kPa "
                        "(default %(default)s)")
    q.add_argument("--displacement-mm", type=float, default=10.0,
                   help="prescribed tip deflection in mm (default "
                        "%(default)s)")
    q.add_argument("--span-mm", type=float, default=250.0,
                   help="cantilever span in mm (default %(default)s)")
    q.add_argument("--out", default="bend_test.csv",
                   help="CSV output path (default %(default)s)")
    q.add_argument("--force", action="store_true",
                   help="overwrite the output file if it exists")

    q = sub.add_parser("two-segment",
                       help="run the two-segment tip-load response test "
                            "and classify the bending mode")
    q.add_argument("--proximal", choices=sorted(_CONDITIONS),
                   default="jam-vac",
                   help="proximal segment pouch condition (default "
                        "%(default)s)")
    q.add_argument("--distal", choices=sorted(_CONDITIONS),
                   default="unjammed",
                   help="distal segment pouch condition (default "
                        "%(default)s)")
    q.add_argument("--internal-kpa", type=float, default=6.9,
                   help="internal gauge pressure in kPa (default "
                        "%(default)s)")
    q.add_argument("--segment-length-mm", type=float, default=250.0,
                   help="length of each segment in mm (default %(default)s)")
    q.add_argument("--steps", type=int, default=25,
                   help="number of load steps (default %(default)s)")
    q.add_argument("--csv", default=None,
                   help="optional CSV path for the force/tilt trace")
    q.add_argument("--force", action="store_true",
                   help="overwrite the CSV file if it exists")

    q = sub.add_parser("simulate",
                       help="run a scenario's command script and write the "
                            "session log")
    q.add_argument("scenario", help="scenario JSON file")
    q.add_argument("--log", default=None,
                   help="log JSONL output path (default: scenario name "
                        "with .log.jsonl)")
    q.add_argument("--force", action="store_true",
                   help="overwrite the log file if it exists")

    q = sub.add_parser("plan",
                       help="turn per-joint angle targets into a verified "
                            "stiffen-bend-lock command script")
    q.add_argument("targets", help="target configuration JSON file")
    q.add_argument("--out", default="plan_script.json",
                   help="command script output path (default %(default)s)")
    q.add_argument("--mode", choices=("staged", "simultaneous"),
                   default="staged",
                   help="staged runs one joint at a time with verification; "
                        "simultaneous grades pressures for one shared pull "
                        "(default %(default)s)")
    q.add_argument("--internal-kpa", type=float, default=6.9,
                   help="internal gauge pressure in kPa (default "
                        "%(default)s)")
    q.add_argument("--retries", type=int, default=5,
                   help="maximum tension corrections per joint (default "
                        "%(default)s)")
    q.add_argument("--drift-tol-deg", type=float, default=None,
                   help="settled drift tolerance for locked joints in deg "
                        "(default: each joint's own target tolerance)")
    q.add_argument("--no-growth", action="store_true",
                   help="omit the leading full-length growth command")
    q.add_argument("--force", action="store_true",
                   help="overwrite the output file if it exists")

    q = sub.add_parser("workspace",
                       help="sample the reachable tip set and report hull "
                            "metrics")
    q.add_argument("--mode", choices=("multi-joint", "base-only"),
                   default="multi-joint",
                   help="sweep every joint or only the base joint "
                        "(default %(default)s)")
    q.add_argument("--angle-max-deg", type=float, default=30.0,
                   help="per-joint angle magnitude limit in deg (default "
                        "%(default)s)")
    q.add_argument("--angle-step-deg", type=float, default=5.0,
                   help="grid step in deg (default %(default)s)")
    q.add_argument("--budget", type=int, default=wsp.DEFAULT_BUDGET,
                   help="maximum number of grid points; larger grids are "
                        "truncated and flagged partial (default %(default)s)")
    q.add_argument("--spatial", action="store_true",
                   help="sweep bend azimuth per joint instead of a single "
                        "plane")
    q.add_argument("--azimuth-step-deg", type=float, default=30.0,
                   help="azimuth step for --spatial in deg (default "
                        "%(default)s)")
    q.add_argument("--internal-kpa", type=float, default=6.9,
                   help="internal gauge pressure in kPa (default "
                        "%(default)s)")
    q.add_argument("--jobs", type=int, default=1,
                   help="worker processes for spatial sampling; output is "
                        "identical for any value (default %(default)s)")
    q.add_argument("--compare", action="store_true",
                   help="also sample base-only and print the hull expansion "
                        "ratio")
    q.add_argument("--out", default="workspace.csv",
                   help="CSV output path (default %(default)s)")
    q.add_argument("--force", action="store_true",
                   help="overwrite the output file if it exists")

    q = sub.add_parser("serve",
                       help="serve the live session websocket (and the "
                            "operator console if built)")
    q.add_argument("--scenario", default=None,
                   help="scenario JSON to apply before serving (default: "
                        "pristine session with default robot)")
    q.add_argument("--host", default="127.0.0.1",
                   help="bind address (default %(default)s)")
    q.add_argument("--port", type=int, default=8750,
                   help="bind port (default %(default)s)")
    q.add_argument("--static", default="frontend/dist",
                   help="operator console bundle directory, served at / "
                        "when present (default %(default)s)")
    return p


def _cmd_calibrate(args):
    with open(args.anchors) as fh:
        anchors = cal.anchors_from_dict(json.load(fh))
    out = _ensure_out(args.out, args.force)
    report = cal.fit_parameters(anchors, RobotDescription(), MaterialModel(),
                                seed=args.seed)
    with open(out, "w") as fh:
        json.dump(cal.report_to_dict(report), fh, indent=2)
        fh.write("\n")
    for name, value in report.parameters.items():
        print("%s = %.6g" % (name, value))
    ratio = cal.consistency_ratio(report.material, RobotDescription())
    print("held-out jammed/unjammed force ratio: %.1f%%" % (ratio * 100.0))
    print("max weighted residual: %.3f (1.0 = at tolerance)"
          % report.max_weighted_residual())
    print("runtime: %.1f s over %d starts" % (report.runtime,
                                              len(report.start_costs)))
    print("report written to %s" % out)
    return 0


def _cmd_bend_test(args):
    pressures = [float(s) for s in args.pressures_kpa.split(",") if s.strip()]
    if not pressures:
        raise RuntimeError("no pressures given")
    out = _ensure_out(args.out, args.force)
    material, desc = MaterialModel(), RobotDescription()
    disp = args.displacement_mm * 1e-3
    span = args.span_mm * 1e-3
    with open(out, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["condition", "internal_kpa", "displacement_mm",
                    "span_mm", "force_n"])
        for name in ("unjammed", "jam-atm", "jam-vac"):
            for p_kpa in pressures:
                f = cal.bench_force(material, desc, p_kpa * 1e3,
                                    _CONDITIONS[name], disp, span)
                w.writerow([name, "%.3f" % p_kpa,
                            "%.3f" % args.displacement_mm,
                            "%.3f" % args.span_mm, "%.4f" % f])
    print("bench table written to %s" % out)
    return 0


def _cmd_two_segment(args):
    gauge = args.internal_kpa * 1e3
    res = virtual_two_segment_test(
        RobotDescription(), MaterialModel(),
        proximal=_condition_state(args.proximal, gauge),
        distal=_condition_state(args.distal, gauge),
        segment_length=args.segment_length_mm * 1e-3,
        steps=args.steps)
    print("classification: %s" % res.classification)
    print("peak tip load: %.2f N" % res.peak_force)
    print("distal tilt at peak: %.2f deg" % math.degrees(res.distal_tilt))
    print("proximal tilt at peak: %.2f deg"
          % math.degrees(res.proximal_tilt))
    if args.csv:
        out = _ensure_out(args.csv, args.force)
        with open(out, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["force_n", "distal_deg", "proximal_deg"])
            for f, d, p in zip(res.forces, res.distal_trace,
                               res.proximal_trace):
                w.writerow(["%.4f" % f, "%.4f" % math.degrees(d),
                            "%.4f" % math.degrees(p)])
        print("trace written to %s" % out)
    return 0


def _cmd_simulate(args):
    scn = ses.load_scenario(args.scenario)
    log_path = args.log or str(Path(args.scenario).with_suffix("")) \
        + ".log.jsonl"
    out = _ensure_out(log_path, args.force)
    session = ses.Session.from_scenario(scn)
    records = session.run_script(scn.script)
    session.save_log(out)
    rejected = [r for r in records if not r["ok"]]
    print("%d commands executed, %d rejected" % (len(records), len(rejected)))
    for r in rejected:
        print("  seq %d %s: %s" % (r["seq"], r["command"]["op"], r["reason"]))
    print("log written to %s" % out)
    print("final state hash: %s" % session.state_hash())
    return 0


def _cmd_plan(args):
    target = pln.load_targets(args.targets)
    out = _ensure_out(args.out, args.force)
    kw = dict(internal_gauge=args.internal_kpa * 1e3,
              include_growth=not args.no_growth)
    if args.mode == "staged":
        if args.drift_tol_deg is not None:
            kw["drift_tolerance"] = math.radians(args.drift_tol_deg)
        res = pln.plan_stiffen_bend_lock(RobotDescription(), MaterialModel(),
                                         target, n_retry=args.retries, **kw)
    else:
        res = pln.plan_simultaneous(RobotDescription(), MaterialModel(),
                                    target, **kw)
    res.script.save(out)
    print(res.report_text())
    print("script written to %s (%d commands)" % (out, len(res.script)))
    print("final state hash: %s" % res.final_state_hash)
    return 0


def _cmd_workspace(args):
    out = _ensure_out(args.out, args.force)
    kw = dict(angle_max=math.radians(args.angle_max_deg),
              angle_step=math.radians(args.angle_step_deg),
              budget=args.budget, spatial=args.spatial,
              azimuth_step=math.radians(args.azimuth_step_deg),
              internal_gauge=args.internal_kpa * 1e3, jobs=args.jobs)
    desc, material = RobotDescription(), MaterialModel()
    res = wsp.sample_workspace(desc, material, mode=args.mode, **kw)
    wsp.save_points_csv(res, out)
    unit = "m^3" if res.spatial else "m^2"
    print("%d points (%s grid of %d%s)"
          % (res.count, res.mode, res.total_grid,
             ", partial" if res.partial else ""))
    print("hull measure: %.6g %s" % (res.hull_measure, unit))
    print("tension sensitivity: %.3g mm tip per N"
          % (res.sensitivity * 1e3))
    if args.compare:
        other = wsp.sample_workspace(
            desc, material,
            mode="base-only" if args.mode == "multi-joint" else "multi-joint",
            **kw)
        multi, base = ((res, other) if args.mode == "multi-joint"
                       else (other, res))
        print("expansion ratio multi/base: %.2f"
              % (multi.hull_measure / base.hull_measure))
    print("points written to %s" % out)
    return 0


def _cmd_serve(args):
    import uvicorn
    from .server import create_app
    scn = ses.load_scenario(args.scenario) if args.scenario else None
    static = args.static if Path(args.static).is_dir() else None
    app = create_app(scn, static_dir=static)
    print("serving session on ws://%s:%d/ws" % (args.host, args.port))
    if static:
        print("console at http://%s:%d/" % (args.host, args.port))
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


_DISPATCH = {
    "calibrate": _cmd_calibrate,
    "bend-test": _cmd_bend_test,
    "two-segment": _cmd_two_segment,
    "simulate": _cmd_simulate,
    "plan": _cmd_plan,
    "workspace": _cmd_workspace,
    "serve": _cmd_serve,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _DISPATCH[args.subcommand](args)
    except KeyboardInterrupt:
        return 130
    except Exception as exc:
        print("error: %s" % exc, file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
