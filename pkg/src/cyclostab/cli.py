"""Command-line entry point ``cyclostab``.

Exit status: 0 on success, 2 for configuration errors, 3 for numerical failures.
"""

from __future__ import annotations

import argparse
import sys
from concurrent.futures import ProcessPoolExecutor

from .errors import ConfigError, CyclostabError, ValidationError
from .scenarios import builtin, list_scenarios, load_scenario, load_yaml, run_scenario, write_outputs

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3

_SIMULATE_KINDS = ("simulate-pde", "simulate-ode", "simulate-compartmental")


def _job(task):
    """Run one scenario; returns ``(label, status, message)``.  Executed in worker processes."""
    command, source, override_path, out_dir = task
    label = source
    try:
        overrides = load_yaml(open(override_path).read()) if override_path else None
    except OSError as exc:
        return label, EXIT_CONFIG, f"cannot read {override_path}: {exc.strerror}"
    except ConfigError as exc:
        return label, EXIT_CONFIG, f"{override_path}: {exc}"
    try:
        sc = builtin(source, overrides) if command == "scenario" else load_scenario(source)
        if command == "analyze" and sc.kind != "analyze":
            raise ConfigError(f"'analyze' needs kind: analyze, got {sc.kind}")
        if command == "simulate" and sc.kind not in _SIMULATE_KINDS:
            raise ConfigError(f"'simulate' needs a simulate-* kind, got {sc.kind}")
    except (ConfigError, ValidationError) as exc:
        return label, EXIT_CONFIG, f"{source}: {exc}"
    try:
        result = run_scenario(sc)
        paths = write_outputs(result, out_dir)
    except CyclostabError as exc:
        return label, EXIT_NUMERIC, f"{source}: {type(exc).__name__}: {exc}"
    except OSError as exc:
        return label, EXIT_CONFIG, f"{source}: cannot write outputs: {exc}"
    return label, EXIT_OK, "wrote " + ", ".join(str(p) for p in paths)


def build_parser():
    parser = argparse.ArgumentParser(
        prog="cyclostab",
        description="Stability analysis and simulation of cyclic feedback systems with diffusion.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--out", default="out", help="output directory (default: out)")
        p.add_argument("--jobs", type=int, default=1, help="run scenarios in N worker processes")

    p = sub.add_parser("analyze", help="secant, scaling and modal analysis from a config")
    p.add_argument("--config", action="append", required=True, help="scenario file (repeatable)")
    common(p)
    p = sub.add_parser("simulate", help="run simulation configs")
    p.add_argument("--config", action="append", required=True, help="scenario file (repeatable)")
    common(p)
    p = sub.add_parser("scenario", help="run built-in scenarios by name")
    p.add_argument("names", nargs="+", help="built-in scenario names (see 'list')")
    p.add_argument("--config", help="YAML overrides merged into each built-in")
    common(p)
    sub.add_parser("list", help="list built-in scenarios")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.command == "list":
        for name, desc in list_scenarios():
            print(f"{name:18s} {desc}")
        return EXIT_OK
    if args.jobs < 1:
        print("error: --jobs must be at least 1", file=sys.stderr)
        return EXIT_CONFIG
    if args.command == "scenario":
        tasks = [("scenario", name, args.config, args.out) for name in args.names]
    else:
        tasks = [(args.command, path, None, args.out) for path in args.config]
    if args.jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_job, tasks))
    else:
        results = [_job(t) for t in tasks]
    status = EXIT_OK
    for label, code, message in results:
        print(message, file=sys.stdout if code == EXIT_OK else sys.stderr)
        status = max(status, code)
    return status


if __name__ == "__main__":
    sys.exit(main())
