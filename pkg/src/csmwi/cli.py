"""Command-line interface: run experiments, validate the solver, self-test."""

from __future__ import annotations

import argparse
import sys

from .errors import ConfigurationError, PipelineError
from .harness import SCENARIOS, ExperimentConfig, run_experiment, selftest_checks, validate_fdfd_checks


def _print_checks(checks: list[tuple[str, bool, str]]) -> int:
    failed = 0
    for name, ok, detail in checks:
        status = "PASS" if ok else "FAIL"
        print(f"[{status}] {name}: {detail}")
        failed += 0 if ok else 1
    return 0 if failed == 0 else 1


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="csmwi",
        description="Compressive-sensing microwave breast imaging pipeline",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run one experiment from a JSON config")
    run_p.add_argument("--config", required=True, help="experiment configuration file")
    run_p.add_argument(
        "--scenario",
        choices=sorted(SCENARIOS),
        help="override segmentation error and SNR with a stock scenario",
    )
    run_p.add_argument("--out", help="output directory (overrides the config)")

    sub.add_parser("validate-fdfd", help="analytic/reciprocity/absorption solver checks")
    sub.add_parser("selftest", help="projection and gradient oracle checks")

    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            cfg = ExperimentConfig.from_json(args.config, scenario=args.scenario, output_dir=args.out)
            loc, artifacts = run_experiment(cfg)
            for key in sorted(artifacts["summary"]):
                print(f"{key} = {artifacts['summary'][key]}")
            print(f"outputs written to {artifacts['output_dir']}")
            return 0
        if args.command == "validate-fdfd":
            return _print_checks(validate_fdfd_checks())
        if args.command == "selftest":
            return _print_checks(selftest_checks())
    except (PipelineError, ConfigurationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 2


if __name__ == "__main__":
    sys.exit(main())
