"""persona-harness command line.

    persona-harness render --config cfg.toml --voter v001 --ballot-format approval
    persona-harness generate --config cfg.toml --mock

Exit codes follow the core pipeline's convention: 0 ok, 2 unreadable input
file, 3 inputs that parse but fail validation, 4 bad flags or config.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from repvote import BallotFormat, ParseError, build_roster, parse_election
from repvote.io import parse_traits

from .config import ConfigError, endpoint_config, load_config, prompt_template
from .endpoint import ChatEndpoint, EndpointError, MockEndpoint
from .generate import generate
from .prompts import GROUP_ORDER, MissingTraitError, render_prompt

EXIT_OK = 0
EXIT_PARSE = 2
EXIT_VALIDATION = 3
EXIT_CONFIG = 4


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="persona-harness", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command")

    render = sub.add_parser("render", help="print the prompt for one voter")
    render.add_argument("--config", required=True, help="TOML config file")
    render.add_argument("--voter", required=True, help="voter id from the traits file")
    render.add_argument(
        "--ballot-format",
        required=True,
        help="single, approval, score, or cumulative",
    )
    render.add_argument(
        "--groups",
        help="comma-separated trait groups (default: all groups in config)",
    )

    gen = sub.add_parser("generate", help="produce ballot-exchange JSONL")
    gen.add_argument("--config", required=True, help="TOML config file")
    gen.add_argument("--mock", action="store_true", help="offline canned endpoint")
    gen.add_argument("--output", help="override [files].output")
    gen.add_argument("--rejects", help="override [files].rejects")
    gen.add_argument("--formats", help="override [generate].formats, comma-separated")
    gen.add_argument("--temperatures", help="override, comma-separated floats")
    gen.add_argument("--runs", type=int, help="override [generate].runs_per_temp")
    gen.add_argument("--workers", type=int, help="override [generate].workers")
    gen.add_argument("--api-key", help="endpoint key (else config or env)")
    return parser


def _load_roster(config: dict):
    files = config.get("files", {})
    election = files.get("election")
    traits = files.get("traits")
    if not election or not traits:
        raise ConfigError("[files] needs election and traits paths")
    parsed = parse_election(election, strict=False)
    roster = build_roster(parsed.ballots, parse_traits(traits))
    return parsed.instance, roster


def _formats(raw) -> list[BallotFormat]:
    if isinstance(raw, str):
        raw = [part.strip() for part in raw.split(",") if part.strip()]
    return [BallotFormat.parse(name) for name in raw]


def _cmd_render(args) -> int:
    config = load_config(args.config)
    template = prompt_template(config)
    instance, roster = _load_roster(config)
    voters = {v.voter_id: v for v in roster}
    if args.voter not in voters:
        print(f"unknown voter {args.voter!r}", file=sys.stderr)
        return EXIT_VALIDATION
    if args.groups:
        groups = [g.strip() for g in args.groups.split(",") if g.strip()]
    else:
        groups = [g for g in GROUP_ORDER if g in template.groups]
    fmt = BallotFormat.parse(args.ballot_format)
    print(render_prompt(voters[args.voter], instance, fmt, groups, template))
    return EXIT_OK


def _cmd_generate(args) -> int:
    config = load_config(args.config)
    template = prompt_template(config)
    instance, roster = _load_roster(config)

    files = config.get("files", {})
    section = config.get("generate", {})
    output = Path(args.output or files.get("output", "ai.jsonl"))
    rejects = Path(args.rejects or files.get("rejects", "rejects.jsonl"))
    formats = _formats(args.formats or section.get("formats", ["approval"]))
    raw_temps = args.temperatures or section.get("temperatures", [0.4, 0.2, 0.0])
    if isinstance(raw_temps, str):
        raw_temps = [part.strip() for part in raw_temps.split(",") if part.strip()]
    temperatures = [float(t) for t in raw_temps]
    runs = args.runs if args.runs is not None else int(section.get("runs_per_temp", 20))
    workers = args.workers if args.workers is not None else int(section.get("workers", 1))
    groups = section.get(
        "trait_groups", [g for g in GROUP_ORDER if g in prompt_template(config).groups]
    )

    if args.mock:
        endpoint = MockEndpoint(
            instance, malformed_rate=float(section.get("mock_malformed_rate", 0.0))
        )
    else:
        endpoint = ChatEndpoint(endpoint_config(config, api_key=args.api_key))

    result = generate(
        roster,
        instance,
        formats,
        endpoint,
        temperatures,
        runs,
        output,
        rejects,
        template,
        groups,
        source=str(section.get("source", "ai")),
        parse_retries=int(section.get("parse_retries", 2)),
        max_workers=workers,
    )
    print(f"wrote {output} ({result.written} lines), {result.rejected} rejected")
    return EXIT_OK


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise _UsageError("a subcommand is required (render, generate)")
        if args.command == "render":
            return _cmd_render(args)
        return _cmd_generate(args)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except FileNotFoundError as exc:
        print(f"missing file: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (MissingTraitError, EndpointError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    raise SystemExit(main())
