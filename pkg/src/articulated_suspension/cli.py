"""Command-line entry point: ``run``, ``bench`` and ``validate``.

Exit status is 0 on success. Failures print ``error [<stage>]: ...`` to
stderr and exit with the code of that stage in :data:`EXIT_CODES`.
"""

import argparse
import json
import logging
import sys
from pathlib import Path

from .errors import SimulationError, SuspensionError

EXIT_CODES = {
    "load": 3,
    "setup": 4,
    "optimizer": 5,
    "hydraulics": 6,
    "forces": 7,
    "write": 8,
    "bench": 9,
    "validate": 10,
}


class StageFailed(Exception):
    def __init__(self, stage, message):
        self.stage = stage
        super().__init__(message)


def _load_model(path):
    from .model import load_model
    try:
        return load_model(path)
    except (OSError, ValueError, KeyError, TypeError, SuspensionError) as e:
        raise StageFailed("load", f"cannot load model {path}: {e}") from e


def cmd_run(args):
    from .sim import Scenario
    try:
        sc = Scenario.load(args.scenario)
    except (OSError, ValueError, KeyError, TypeError, SuspensionError) as e:
        raise StageFailed("load", f"cannot load scenario {args.scenario}: {e}") from e
    model = _load_model(sc.model) if sc.model is not None else None
    from .sim import run_scenario
    try:
        res = run_scenario(sc, model)
    except SimulationError as e:
        raise StageFailed(e.stage, str(e)) from e
    out = Path(args.output_dir if args.output_dir is not None else sc.output_dir)
    try:
        paths = []
        if not args.no_csv:
            paths.append(res.write_csv(out / (args.csv or sc.csv)))
        paths.append(res.write_summary(out / (args.summary or sc.summary)))
    except OSError as e:
        raise StageFailed("write", str(e)) from e
    s = res.summary
    print(f"{s['name']}: {s['steps']} steps, rms force metric {s['rms_force_metric']:.6g} N, "
          f"rms CoM x {s['rms_com_x']:.6g} m, {s['wall_time_s']:.1f} s")
    for p in paths:
        print(f"wrote {p}")


def cmd_bench(args):
    from .bench import benchmark, format_report
    model = _load_model(args.model)
    try:
        rows = benchmark(model, calls=args.calls)
    except SuspensionError as e:
        raise StageFailed("bench", str(e)) from e
    print(format_report(rows))
    if args.output_dir is not None or args.summary is not None:
        path = Path(args.output_dir or ".") / (args.summary or "bench.json")
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_text(json.dumps([r.to_dict() for r in rows], indent=2) + "\n")
        except OSError as e:
            raise StageFailed("write", str(e)) from e
        print(f"wrote {path}")


def cmd_validate(args):
    from .validate import STAGES, validate
    model = _load_model(args.model)
    stages = args.stage or STAGES
    try:
        checks = validate(model, stages)
    except SuspensionError as e:
        raise StageFailed("validate", str(e)) from e
    for c in checks:
        print(c.line())
    failed = sorted({c.stage for c in checks if not c.passed})
    if failed:
        raise StageFailed("validate", "invariants violated in " + ", ".join(failed))


def build_parser():
    p = argparse.ArgumentParser(prog="suspension-sim",
                                description="Articulated-suspension dynamics and control.")
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="simulate a scenario file")
    r.add_argument("scenario")
    r.add_argument("--output-dir", "-o")
    r.add_argument("--csv", help="metrics file name (relative to the output directory)")
    r.add_argument("--summary", help="summary file name (relative to the output directory)")
    r.add_argument("--no-csv", action="store_true", help="write only the summary")
    r.set_defaults(func=cmd_run)

    b = sub.add_parser("bench", help="time the compiled kernels")
    b.add_argument("model", nargs="?", help="model file (bundled platform if omitted)")
    b.add_argument("--calls", type=int, default=100_000)
    b.add_argument("--output-dir", "-o")
    b.add_argument("--summary", help="JSON report file name")
    b.set_defaults(func=cmd_bench)

    v = sub.add_parser("validate", help="run the invariant suite on a model file")
    v.add_argument("model", nargs="?", help="model file (bundled platform if omitted)")
    v.add_argument("--stage", action="append",
                   choices=("closure", "branches", "rates", "aggregation", "normal_forces"))
    v.set_defaults(func=cmd_validate)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    level = (logging.WARNING, logging.INFO, logging.DEBUG)[min(args.verbose, 2)]
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except StageFailed as e:
        print(f"error [{e.stage}]: {e}", file=sys.stderr)
        return EXIT_CODES.get(e.stage, 1)
    return 0


if __name__ == "__main__":
    sys.exit(main())
