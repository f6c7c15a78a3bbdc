"""Command-line entry point.

Exit codes: 0 on success, 2 on a validation failure, 3 on a solver
failure (the diagnostic dump path is printed to stderr).
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .errors import SolverError, ValidationError
from .scenario import MODES, parse_scenario
from .studies import convergence_study, decay_study, run_scenario, steady_check


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hydride-sim",
        description="Simulate the coupled hydride-storage model and its diagnostic studies.",
    )
    parser.add_argument("command", nargs="?", choices=MODES, help="mode (overrides the config)")
    parser.add_argument("--config", metavar="PATH", help="scenario document; defaults apply if omitted")
    parser.add_argument("--out", metavar="DIR", default=".", help="output directory (default: .)")
    parser.add_argument(
        "--override",
        metavar="KEY=VALUE",
        action="append",
        default=[],
        help="override a scenario key (repeatable)",
    )
    parser.add_argument("--mode", choices=MODES, help="alternative way to select the mode")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command and args.mode and args.command != args.mode:
            raise ValidationError(
                f"conflicting modes: positional {args.command!r} vs --mode {args.mode!r}"
            )
        text = ""
        if args.config:
            path = Path(args.config)
            if not path.exists():
                raise ValidationError(f"config file not found: {path}")
            text = path.read_text(encoding="utf-8")
        overrides = {}
        for item in args.override:
            if "=" not in item:
                raise ValidationError(f"--override expects KEY=VALUE, got {item!r}")
            key, value = item.split("=", 1)
            overrides[key.strip()] = value.strip()
        scenario = parse_scenario(text, overrides)
        mode = args.command or args.mode or scenario.mode
        out_dir = scenario.out_dir or args.out

        if mode == "run":
            result = run_scenario(scenario, out_dir=out_dir)
            final = result.trajectory.final
            print(f"run complete: t = {final.t:g}, {len(result.records) - 1} steps -> {out_dir}")
        elif mode == "steady-check":
            report = steady_check(scenario, out_dir=out_dir)
            print(
                "steady-check: branch=%s residual=%.3e fixed_point_delta=%.3e"
                % (report["branch"], report["steady_residual"], report["fixed_point_delta"])
            )
        elif mode == "decay-study":
            rows = decay_study(scenario, out_dir=out_dir)
            for row in rows:
                print(
                    "gamma=%-6g alpha=%.4f r2=%.4f dual-norm %0.3e -> %0.3e"
                    % (row["gamma"], row["alpha"], row["r2"],
                       row["dual_norm_initial"], row["dual_norm_final"])
                )
        else:  # convergence-study
            report = convergence_study(scenario, out_dir=out_dir)
            print("dt orders:", ["%.3f" % o for o in report["dt_orders"]])
            print("mesh orders:", ["%.3f" % o for o in report["mesh_orders"]])
            print("nu distances:", ["%.3e" % d for d in report["nu_distances"]])
        return 0
    except ValidationError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return 2
    except SolverError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        dump = getattr(exc, "dump_path", None)
        if dump is not None:
            print(f"diagnostic dump: {dump}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
