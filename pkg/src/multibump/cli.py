"""Command-line front-end for the certification pipelines."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

from dotenv import load_dotenv

from multibump.configuration import Configuration, load_config_file, parse_assignments
from multibump.errors import MultibumpError
from multibump.templates import VERDICT_EXIT_CODES

logger = logging.getLogger(__name__)

COMMANDS = {
    "profile": ("profile", "Solve the strip profile and its modes, and bracket the extremal parameter."),
    "theorem1": ("theorem1", "Certify the strip construction at the smallest eps."),
    "theorem2": ("theorem2", "Certify the torsion construction for every eps."),
    "sweep": ("sweep", "Run the strip or torsion construction over every eps and fit the rate."),
    "remark-r": ("remark_r", "Run the eigenfunction negative control."),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="multibump",
        description="Construct and numerically certify multi-peak solutions on perturbed strips and cylinders.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for command, (_, help_text) in COMMANDS.items():
        p = sub.add_parser(command, help=help_text, description=help_text)
        p.add_argument("--config", type=Path, help="key=value configuration file.")
        p.add_argument(
            "--set",
            dest="overrides",
            action="append",
            default=[],
            metavar="KEY=VALUE",
            help="Override one configuration key; repeatable.",
        )
        p.add_argument("--output-dir", help="Artifact directory (default: $MULTIBUMP_OUTPUT_DIR or ./runs).")
        p.add_argument("--log-level", help="Logging level, e.g. DEBUG.")
        p.add_argument("--label", default="", help="Free-form label copied into the report.")
    return parser


def resolve_configuration(args: argparse.Namespace) -> Configuration:
    """Merge the config file, --set overrides and the dedicated flags."""
    configuration = load_config_file(args.config) if args.config else Configuration()
    overrides = parse_assignments(args.overrides)
    if args.output_dir:
        overrides["output_dir"] = args.output_dir
    if args.log_level:
        overrides["log_level"] = args.log_level
    if overrides:
        configuration = configuration.with_overrides(overrides)
    return configuration


def run(command: str, configuration: Configuration, label: str = "") -> tuple[str, dict]:
    """Invoke the pipeline graph of `command`; return the verdict and final state."""
    from multibump.graph import GRAPHS

    pipeline = COMMANDS[command][0]
    result = GRAPHS[pipeline].invoke(
        {"pipeline": pipeline, "label": label},
        {"configurable": configuration.to_dict()},
    )
    return result["verdict"], result


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Entry point of the `multibump` console script."""
    load_dotenv()
    args = build_parser().parse_args(argv)
    try:
        configuration = resolve_configuration(args)
    except MultibumpError as exc:
        logging.basicConfig(format="%(asctime)s - %(name)s - %(levelname)s - %(message)s")
        logger.error("invalid configuration: %s", exc)
        return exc.exit_code
    logging.basicConfig(
        level=configuration.log_level.upper(),
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
    )
    verdict, result = run(args.command, configuration, args.label)
    summary = Path(configuration.output_dir) / COMMANDS[args.command][0] / "summary.txt"
    if summary.exists():
        sys.stdout.write(summary.read_text())
    else:
        sys.stdout.write(f"verdict: {verdict}\n")
    if result.get("error"):
        logger.error("stopped in %s: %s", result["error"]["stage"], result["error"]["message"])
    return VERDICT_EXIT_CODES[verdict]


if __name__ == "__main__":
    sys.exit(main())
