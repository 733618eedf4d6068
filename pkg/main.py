#!/usr/bin/env python3
"""
PBGNet command line.

Subcommands: train, grid, certify, surface, verify. Every subcommand prints
its JSON result on stdout and exits with 0 on success, 1 on usage errors,
2 on data errors and 3 on numeric failures.
"""

import argparse
import json
import logging
import sys
from typing import Any, Dict, List, Optional

from pbgnet.errors import EXIT_NUMERIC, EXIT_OK, EXIT_USAGE, ConfigError
from pbgnet.settings import load_settings

from tools.certify import Certify
from tools.grid_search import GridSearch
from tools.surface import Surface
from tools.train_run import TrainRun
from tools.verify import Verify

TOOLS = [TrainRun(), GridSearch(), Certify(), Surface(), Verify()]

ARG_TYPES = {"string": str, "integer": int, "number": float}


class UsageError(Exception):
    pass


class CommandParser(argparse.ArgumentParser):
    """ArgumentParser that reports usage errors with exit code 1."""

    def error(self, message: str):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def add_parameters(parser: argparse.ArgumentParser, parameters: Dict[str, Dict[str, Any]]) -> None:
    for name, schema in parameters.items():
        flag = "--" + name.replace("_", "-")
        help_text = schema["human_description"]
        if schema.get("default") is not None:
            help_text += f" (default: {schema['default']})"
        if schema["type"] == "boolean":
            parser.add_argument(flag, dest=name, action="store_true", help=help_text)
        else:
            parser.add_argument(flag, dest=name, type=ARG_TYPES[schema["type"]], required=schema["required"],
                                help=help_text)


def build_parser() -> argparse.ArgumentParser:
    parser = CommandParser(prog="pbgnet", description="Train binary-activated networks with PAC-Bayes bounds")
    subparsers = parser.add_subparsers(dest="command", parser_class=CommandParser)
    subparsers.required = True
    for tool in TOOLS:
        sub = subparsers.add_parser(tool.name, help=tool.description, description=tool.description)
        add_parameters(sub, tool.get_runtime_parameters())
        sub.set_defaults(tool=tool)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    try:
        settings = load_settings()
        args = build_parser().parse_args(argv)
    except (UsageError, ConfigError) as e:
        print(f"❌ {e}", file=sys.stderr)
        return EXIT_USAGE

    logging.basicConfig(level=settings.log_level, format="%(asctime)s %(levelname)s %(name)s: %(message)s")

    params = {key: value for key, value in vars(args).items() if key not in ("command", "tool") and value is not None}
    response = args.tool.run(**params)
    print(json.dumps(response, indent=2, default=str))

    if not response["success"]:
        print(f"❌ {args.command} failed: {response['error_type']}: {response['error']}", file=sys.stderr)
        return response["exit_code"]
    if args.command == "verify" and not response["result"]["ok"]:
        print(f"❌ Run {response['result']['run_id']} does not match its artifacts", file=sys.stderr)
        return EXIT_NUMERIC
    print(f"✅ {args.command} finished", file=sys.stderr)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
