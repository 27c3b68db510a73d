"""Command-line entry point: ``bilinsphere {classify,certify,simulate,oracle,export}``.

Exit codes: 0 on a controllability certificate or a successful plain
command, 2 when the criteria are not established (or oracle pairs stay
unconnected), 1 on errors.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from . import documents as docs
from .dynamics import (DegenerateSpectrum, Underflow, apply_schedule, monte_carlo_connect,
                       sample_flows, simulate_schedule)
from .geometry import DegenerateGeometry, build_cell_complex
from .linalg3 import geodesic, normalize
from .reachability import _closures_from_sinks, decide
from .replay import EPS_REPLAY, ReplayBudgetExceeded, validate_verdict
from .system import Box, check_cc1, check_cc3_cc4, check_ck1

EXIT_OK, EXIT_ERROR, EXIT_INCONCLUSIVE = 0, 1, 2


def _load(args):
    with open(args.input, encoding="utf-8") as fh:
        doc = docs.loads(fh.read())
    samples = None
    if args.samples:
        d = len(doc.get("B", [])) if isinstance(doc, dict) else 0
        with open(args.samples, encoding="utf-8") as fh:
            samples = docs.parse_samples(fh.read(), d)
    system, sub, _ = docs.parse_system_document(doc, args.eps_spec, samples)
    return system, sub


def _conditions(system, sub, args):
    cc1 = check_cc1(system, sub, args.grid, args.eps_geom)
    gen = check_cc3_cc4(sub, args.eps_geom)
    ck1 = check_ck1(sub)
    cc2 = "open" if isinstance(system.control_set, Box) else "unsatisfiable"
    return cc1, cc2, docs.conditions_record(cc1, gen, ck1, cc2)


def _emit(doc, args):
    text = docs.dumps(doc)
    if args.output:
        with open(args.output, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def cmd_classify(args) -> int:
    system, sub = _load(args)
    _, _, conds = _conditions(system, sub, args)
    _emit(docs.report_document("classify", samples=docs.samples_record(sub), conditions=conds), args)
    return EXIT_OK


def cmd_certify(args) -> int:
    system, sub = _load(args)
    cc1, cc2, conds = _conditions(system, sub, args)
    cx = build_cell_complex(sub, args.eps_geom)
    verdict = decide(sub, cx, {"cc1": {"holds": cc1.holds}, "cc2": {"status": cc2}},
                     args.eps_nudge, args.max_iter, 5, args.eps_geom)
    if args.replay:
        verdict = validate_verdict(verdict, sub, args.eps_replay)
    _emit(docs.report_document("certify", samples=docs.samples_record(sub), conditions=conds,
                               verdict=docs.verdict_record(verdict)), args)
    return EXIT_OK if verdict.controllable else EXIT_INCONCLUSIVE


def cmd_simulate(args) -> int:
    system, sub = _load(args)
    with open(args.schedule, encoding="utf-8") as fh:
        start, schedule, step = docs.parse_schedule(fh.read())
    for k, _ in schedule.segments:
        if not 0 <= k < len(sub):
            raise docs.ValidationError(f"segments: sample index {k} out of range")
    traj = simulate_schedule(sub, start, schedule, step)
    _emit(docs.trajectory_document(traj, args.stride), args)
    return EXIT_OK


def cmd_oracle(args) -> int:
    system, sub = _load(args)
    rng = np.random.default_rng(args.seed)
    flows = sample_flows(sub)
    pairs = []
    connected = 0
    for i in range(args.pairs):
        a = normalize(rng.normal(size=3))
        b = normalize(rng.normal(size=3))
        sched = monte_carlo_connect(sub, a, b, args.tol, args.budget, args.seed + i)
        rec = {"from": a, "to": b, "connected": sched is not None}
        if sched is not None:
            connected += 1
            rec["segments"] = [list(s) for s in sched.segments]
            rec["end_error"] = geodesic(apply_schedule(flows, a, sched), b)
            rec["integrated_end_error"] = geodesic(simulate_schedule(sub, a, sched).end, b)
        pairs.append(rec)
    _emit(docs.report_document("oracle", tol=args.tol, budget=args.budget, seed=args.seed,
                               connected=connected, pairs=pairs), args)
    return EXIT_OK if connected == args.pairs else EXIT_INCONCLUSIVE


def cmd_export(args) -> int:
    system, sub = _load(args)
    cx = build_cell_complex(sub, args.eps_geom)
    closures = {}
    if len(cx.real) >= 2:
        closures = {s: _closures_from_sinks(cx, s, args.eps_nudge, args.max_iter, 5, args.eps_geom)
                    for s in cx.real_indices}
    _emit(docs.geometry_document(cx, closures), args)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-i", "--input", required=True, help="system document (JSON)")
    common.add_argument("--samples", help="samples document overriding the system's samples")
    common.add_argument("--eps-spec", type=float, default=1e-7,
                        help="relative spectral gap below which a sample is degenerate")
    common.add_argument("--eps-geom", type=float, default=1e-9,
                        help="determinant magnitude treated as an incidence")
    common.add_argument("-o", "--output", help="write the document here instead of stdout")

    closure = argparse.ArgumentParser(add_help=False)
    closure.add_argument("--max-iter", type=int, default=32, help="closure sweep budget")
    closure.add_argument("--eps-nudge", type=float, default=1e-4,
                         help="offset (radians) of seeds and vertex probes")

    grid = argparse.ArgumentParser(add_help=False)
    grid.add_argument("--grid", type=int, default=10000, help="sphere grid size for CC1")

    p = argparse.ArgumentParser(prog="bilinsphere",
                                description="Controllability certificates for projected bilinear systems.")
    cmds = p.add_subparsers(dest="command", required=True)
    c = cmds.add_parser("classify", parents=[common, grid], help="spectra and condition reports")
    c.set_defaults(func=cmd_classify)
    c = cmds.add_parser("certify", parents=[common, closure, grid], help="decide the criteria")
    c.add_argument("--replay", action="store_true", help="validate certificate steps by simulation")
    c.add_argument("--eps-replay", type=float, default=EPS_REPLAY, help="replay landing tolerance")
    c.set_defaults(func=cmd_certify)
    c = cmds.add_parser("simulate", parents=[common], help="integrate a switching schedule")
    c.add_argument("--schedule", required=True, help="schedule document (JSON)")
    c.add_argument("--stride", type=int, default=1, help="keep every n-th integration point")
    c.set_defaults(func=cmd_simulate)
    c = cmds.add_parser("oracle", parents=[common], help="Monte Carlo connectivity check")
    c.add_argument("--pairs", type=int, default=20)
    c.add_argument("--tol", type=float, default=0.05)
    c.add_argument("--seed", type=int, default=42)
    c.add_argument("--budget", type=int, default=10_000, help="segments per pair")
    c.set_defaults(func=cmd_oracle)
    c = cmds.add_parser("export", parents=[common, closure], help="cell complex and closure geometry")
    c.set_defaults(func=cmd_export)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if getattr(args, "stride", 1) < 1 or getattr(args, "pairs", 1) < 0:
            raise docs.ValidationError("--stride and --pairs must be positive")
        return args.func(args)
    except (OSError, docs.ParseError, docs.ValidationError, DegenerateSpectrum, DegenerateGeometry,
            ReplayBudgetExceeded, Underflow, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
