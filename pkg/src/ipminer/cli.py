"""Command line entry point."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .config import ConfigError, load_config, with_overrides
from .pipeline import PipelineError, run
from .trajectory import write_trajectories
from .scenarios import generate_scenario

_STAGES_FOR = {
    "run": ("events", "sipm", "evipm"),
    "events": ("events",),
    "sipm": ("events", "sipm"),
    "evipm": ("events", "sipm", "evipm"),
    "export-density": ("events", "sipm", "evipm"),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ipminer",
                                     description="Mine interaction patterns from trajectories.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log stage progress")
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "run": "full pipeline (stages from the config)",
        "events": "extract events only",
        "sipm": "events and static patterns",
        "evipm": "events, static and evolving patterns",
        "generate": "write the configured synthetic scenario as a trajectory CSV",
        "export-density": "evolving patterns plus their density grids",
    }
    for name, text in helps.items():
        p = sub.add_parser(name, help=text)
        p.add_argument("--config", required=True, type=Path, help="key = value config file")
        p.add_argument("--max-agents", type=int, default=None, help="largest static pattern size")
        p.add_argument("--workers", type=int, default=None, help="worker processes")
        p.add_argument("--out", type=Path, default=None, help="output directory")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        config = load_config(args.config)
        config = with_overrides(config, max_agents=args.max_agents, workers=args.workers,
                                output=args.out)
        if args.command == "run":
            stages = config.stages
        else:
            stages = _STAGES_FOR.get(args.command)
        if stages is not None:
            config = with_overrides(config, stages=stages)
    except (ConfigError, ValueError) as exc:
        print(f"ipminer: config error: {exc}", file=sys.stderr)
        return 2

    if args.command == "generate":
        if config.scenario is None:
            print("ipminer: config error: 'generate' needs a 'scenario' key", file=sys.stderr)
            return 2
        out = Path(config.output)
        out.mkdir(parents=True, exist_ok=True)
        dataset = generate_scenario(config.scenario)
        write_trajectories(dataset, out / "trajectories.csv")
        print(f"wrote {len(dataset)} agents over {len(dataset.scope)} instants to "
              f"{out / 'trajectories.csv'}")
        return 0

    try:
        result = run(config, density=args.command in ("run", "export-density"))
    except PipelineError as exc:
        print(f"ipminer: error in stage '{exc.stage}': {exc.cause}", file=sys.stderr)
        return 1
    summary = ", ".join(f"{k}={v}" for k, v in result.counts.items())
    print(f"{args.command}: {summary} -> {config.output}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
