# Copyright 2024 Canonical Limited
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""Command line arguments parsing for 'dynamic-safety-case-manager'."""
import argparse
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterable, Optional

import pkg_resources

from dscms.utils import parse_timestamp

COMMANDS = (
    "validate",
    "ingest",
    "check",
    "simulate",
    "recover",
    "revalidate",
    "report",
    "audit",
    "serve",
)

logger = logging.getLogger(__name__)


class CapitalizeHelpFormatter(argparse.RawTextHelpFormatter):
    """Capitalize message prefix."""

    def add_usage(
        self,
        usage: Optional[str],
        actions: Iterable[argparse.Action],
        groups: Iterable[argparse._MutuallyExclusiveGroup],
        prefix: Optional[str] = None,
    ) -> None:
        """Add usage with capitalized prefix.

        :param usage: usage message.
        :type usage: Optional[str]
        :param actions: actions.
        :type actions: Iterable[argparse.Action]
        :param groups: Arguments to be parsed.
        :type groups: Iterable[argparse._MutuallyExclusiveGroup]
        :param prefix: Arguments to be parsed.
        :type prefix: Optional[str]
        """
        if prefix is None:
            prefix = "Usage: "
        super().add_usage(usage, actions, groups, prefix)

    def start_section(self, heading: Optional[str]) -> None:
        """Capitalize the title of the options group.

        :param heading: heading of an argument group.
        :type heading: Optional[str]
        """
        if heading == "options":
            heading = "Options"
        super().start_section(heading)

    def add_argument(self, action: argparse.Action) -> None:
        """Capitalize the help message for -h/--help.

        :param action: group heading.
        :type action: argparse.Action
        """
        if action.option_strings and (
            "-h" in action.option_strings or "--help" in action.option_strings
        ):
            action.help = "Show this help message and exit."
        super().add_argument(action)


def address(value: str) -> tuple[str, int]:
    """Parse 'host:port' listen address.

    :param value: address given on the command line
    :type value: str
    :return: host and port
    :rtype: tuple[str, int]
    :raises argparse.ArgumentTypeError: if the address is not in form host:port
    """
    host, _, port = value.rpartition(":")
    if not host or not port.isdigit() or not 0 < int(port) < 65536:
        raise argparse.ArgumentTypeError(f"invalid address '{value}', expected host:port")

    return host, int(port)


def timestamp(value: str) -> Any:
    """Parse timestamp option.

    :param value: ISO-8601 timestamp
    :type value: str
    :return: timezone-aware datetime
    :rtype: Any
    :raises argparse.ArgumentTypeError: if the timestamp cannot be parsed
    """
    try:
        return parse_timestamp(value)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc


def get_subcommand_common_opts_parser() -> argparse.ArgumentParser:
    """Create a shared parser for options specific to subcommands.

    Using SUPPRESS for the subparser default keeps it from overwriting the parent parser value.

    :return: a parser groups options commonly shared by subcommands
    :rtype: argparse.ArgumentParser
    """
    subcommand_common_opts_parser = argparse.ArgumentParser(add_help=False)
    subcommand_common_opts_parser.add_argument(
        "--workspace",
        default=argparse.SUPPRESS,
        dest="workspace",
        type=Path,
        help="Set the workspace directory to operate on.\nIf not set, DSCMS_WORKSPACE or "
        "the workspace under DSCMS_DATA is used.",
    )
    subcommand_common_opts_parser.add_argument(
        "--gates",
        default=argparse.SUPPRESS,
        dest="gates",
        type=Path,
        help="Gate configuration file.\nIf not set, the bundled gates are used.",
    )

    # quiet and verbose options are mutually exclusive
    group = subcommand_common_opts_parser.add_mutually_exclusive_group()
    group.add_argument(
        "--verbose",
        "-v",
        default=argparse.SUPPRESS,
        action="count",
        dest="verbosity",
        help="Increase logging verbosity in STDOUT.\nMultiple 'v's yield progressively "
        "more detail (up to 3).\nNote that by default the logfile will not include debug "
        "logs\nfrom uvicorn and sse-starlette. To include them, use the\nmaximum verbosity.",
    )
    group.add_argument(
        "--quiet",
        "-q",
        action="store_true",
        dest="quiet",
        help="Disable output in STDOUT.",
        default=argparse.SUPPRESS,
    )

    return subcommand_common_opts_parser


def get_at_opts_parser() -> argparse.ArgumentParser:
    """Create a shared parser for the evaluation time option.

    :return: a parser with the --at option
    :rtype: argparse.ArgumentParser
    """
    at_parser = argparse.ArgumentParser(add_help=False)
    at_parser.add_argument(
        "--at",
        type=timestamp,
        dest="at",
        default=argparse.SUPPRESS,
        help="Evaluation time as ISO-8601 timestamp.\nDefaults to the current time.",
    )
    return at_parser


def create_validate_subparser(
    subparsers: argparse._SubParsersAction, common: argparse.ArgumentParser
) -> None:
    """Create and configure 'validate' subcommand parser.

    :param subparsers: subparsers that 'validate' subparser belongs to
    :type subparsers: argparse._SubParsersAction
    :param common: parser groups options commonly shared by subcommands
    :type common: argparse.ArgumentParser
    """
    validate_parser = subparsers.add_parser(
        "validate",
        description="Check the structure and traceability of a case against an SPI catalog."
        "\nWithout arguments the bundled case and catalog are validated.",
        help="Validate a case document and its SPI catalog.",
        usage="dscms validate [case] [catalog] [options]",
        parents=[common],
        formatter_class=CapitalizeHelpFormatter,
    )
    validate_parser.add_argument(
        "case_path", nargs="?", type=Path, default=None, help="Case document."
    )
    validate_parser.add_argument(
        "catalog_path",
        nargs="?",
        type=Path,
        default=None,
        help="SPI catalog file or directory of catalog files.",
    )


def create_workspace_subparsers(
    subparsers: argparse._SubParsersAction,
    common: argparse.ArgumentParser,
    at_parser: argparse.ArgumentParser,
) -> None:
    """Create and configure subcommand parsers operating on the workspace.

    :param subparsers: subparsers they belong to
    :type subparsers: argparse._SubParsersAction
    :param common: parser groups options commonly shared by subcommands
    :type common: argparse.ArgumentParser
    :param at_parser: parser with the evaluation time option
    :type at_parser: argparse.ArgumentParser
    """
    ingest_parser = subparsers.add_parser(
        "ingest",
        description="Append observations to the workspace store.\nIf any observation is new, "
        "a consistency check runs at the evaluation time.",
        help="Ingest observations and check the case.",
        usage="dscms ingest <obs-file> [options]",
        parents=[common, at_parser],
        formatter_class=CapitalizeHelpFormatter,
    )
    ingest_parser.add_argument(
        "obs_file", type=Path, help="Line-delimited observation file ('-' for stdin)."
    )
    ingest_parser.add_argument(
        "--raw",
        action="store_true",
        default=argparse.SUPPRESS,
        help="Read raw feed records and map them to SPI observations.",
    )
    ingest_parser.add_argument(
        "--mappings",
        type=Path,
        default=argparse.SUPPRESS,
        help="Feed-mapping file used with --raw.\nDefaults to the bundled mappings.",
    )

    check_parser = subparsers.add_parser(
        "check",
        description="Evaluate every SPI and print the impact report of the breaches.",
        help="Run a consistency check.",
        usage="dscms check [options]",
        parents=[common, at_parser],
        formatter_class=CapitalizeHelpFormatter,
    )
    check_parser.add_argument(
        "--artifact",
        action="append",
        dest="artifacts",
        default=argparse.SUPPRESS,
        help="Changed development artifact reference, can be repeated.",
    )

    simulate_parser = subparsers.add_parser(
        "simulate",
        description="Replay a bundled scenario: ingest its observations and check the case "
        "at\nthe scenario trigger time.",
        help="Replay a bundled scenario.",
        usage="dscms simulate <scenario> [options]",
        parents=[common],
        formatter_class=CapitalizeHelpFormatter,
    )
    simulate_parser.add_argument("scenario", type=str, help="Scenario name, e.g. scenario-1.")
    simulate_parser.add_argument(
        "--isolated",
        action="store_true",
        dest="isolated",
        default=argparse.SUPPRESS,
        help="Replay against a scratch copy of the bundled fixtures,\nleaving the workspace "
        "untouched.",
    )

    recover_parser = subparsers.add_parser(
        "recover",
        description="Apply a batch of recovery actions as a new case version.",
        help="Apply recovery actions.",
        usage="dscms recover <actions-file> [options]",
        parents=[common],
        formatter_class=CapitalizeHelpFormatter,
    )
    recover_parser.add_argument("actions_file", type=Path, help="YAML recovery document.")
    recover_parser.add_argument(
        "--auto-approve",
        help="Apply the actions without prompt.",
        action="store_true",
        dest="auto_approve",
        default=argparse.SUPPRESS,
    )

    subparsers.add_parser(
        "revalidate",
        description="Re-run the consistency check after a recovery.\nA clean outcome closes "
        "every open recovery item.",
        help="Revalidate the case.",
        usage="dscms revalidate [options]",
        parents=[common, at_parser],
        formatter_class=CapitalizeHelpFormatter,
    )
    subparsers.add_parser(
        "report",
        description="Print the governance report of the workspace.",
        help="Print the governance report.",
        usage="dscms report [options]",
        parents=[common],
        formatter_class=CapitalizeHelpFormatter,
    )
    subparsers.add_parser(
        "audit",
        description="Verify the audit chain of the workspace.",
        help="Verify the audit chain.",
        usage="dscms audit [options]",
        parents=[common],
        formatter_class=CapitalizeHelpFormatter,
    )

    serve_parser = subparsers.add_parser(
        "serve",
        description="Serve the workspace over HTTP with token authentication.",
        help="Run the web service and dashboard.",
        usage="dscms serve --token-file <path> [options]",
        parents=[common],
        formatter_class=CapitalizeHelpFormatter,
    )
    serve_parser.add_argument(
        "--addr",
        type=address,
        dest="addr",
        default=argparse.SUPPRESS,
        help="Listen address as host:port. Defaults to 127.0.0.1:8080.",
    )
    serve_parser.add_argument(
        "--token-file",
        type=Path,
        dest="token_file",
        required=True,
        help="YAML file mapping tokens to roles.",
    )


def create_subparsers(parser: argparse.ArgumentParser) -> argparse._SubParsersAction:
    """Create and configure subparsers.

    :param parser: the top level parser to create subparsers for,
    :type parser: argparse.ArgumentParser
    :return: configured subparsers
    :rtype: argparse._SubParsersAction
    """
    subparsers = parser.add_subparsers(
        title="Commands",
        dest="command",
        help="For more information about a command, run 'dscms help <command>'.",
    )

    help_parser = subparsers.add_parser(
        "help",
        usage="dscms help [command]",
    )
    help_parser.add_argument(
        "subcommand",
        nargs="?",
        choices=COMMANDS,
        type=str,
        help="A sub-command to get information of.",
    )

    common = get_subcommand_common_opts_parser()
    create_validate_subparser(subparsers, common)
    create_workspace_subparsers(subparsers, common, get_at_opts_parser())

    return subparsers


@dataclass(frozen=True)
class CLIargs:
    """Wrap CLI arguments instead of using argparse.Namespace.

    Keep in sync with the argument parser defined in parse_args and check types.
    """

    # pylint: disable=too-many-instance-attributes

    command: str
    verbosity: int = 0
    quiet: bool = False
    workspace: Optional[Path] = None
    gates: Optional[Path] = None
    at: Optional[Any] = None
    auto_approve: bool = False
    isolated: bool = False
    case_path: Optional[Path] = None
    catalog_path: Optional[Path] = None
    obs_file: Optional[Path] = None
    raw: bool = False
    mappings: Optional[Path] = None
    actions_file: Optional[Path] = None
    scenario: Optional[str] = None
    artifacts: Optional[list[str]] = None
    addr: tuple[str, int] = ("127.0.0.1", 8080)
    token_file: Optional[Path] = None
    subcommand: Optional[str] = None  # for help option

    @property
    def prompt(self) -> bool:
        """Whether DSCMS should prompt the user before applying changes.

        :return: Prompt unless auto_approve is set.
        :rtype: bool
        """
        return not self.auto_approve


def parse_args(args: Any) -> CLIargs:  # pylint: disable=inconsistent-return-statements
    """Parse cli arguments.

    :param args: Arguments parser.
    :type args: Any
    :return: CLIargs custom object.
    :rtype: CLIargs
    :raises argparse.ArgumentError: Unexpected arguments input.
    """
    parser = argparse.ArgumentParser(
        description="Dynamic Safety Case Management System (dscms) keeps a safety case\n"
        "consistent with safety performance indicators and development changes.\nBreaches "
        "are propagated through the argument, routed to governance roles\nand resolved by "
        "recovery actions and revalidation.",
        formatter_class=CapitalizeHelpFormatter,
        usage="%(prog)s [options] <command>",
        exit_on_error=False,
        add_help=True,
        allow_abbrev=False,
    )
    parser.add_argument(
        "--version",
        "-V",
        action="version",
        default=argparse.SUPPRESS,
        help="Show version details.",
        version=pkg_resources.require("dynamic_safety_case_manager")[0].version,
    )

    subparsers = create_subparsers(parser)

    # It no sub-commands or options are given, print help message and exit
    if len(args) == 0 or (len(args) == 1 and args[0] == "help"):
        parser.print_help()
        parser.exit()

    try:
        parsed_args = CLIargs(**vars(parser.parse_args(args)))

        # print help messages for an available sub-command
        if parsed_args.command == "help":
            if parsed_args.subcommand in subparsers.choices:
                subparsers.choices[parsed_args.subcommand].print_help()
            parser.exit()

        return parsed_args
    except argparse.ArgumentError as exc:
        parser.error(
            message=f"Error parsing arguments: {exc}\nSee 'dscms help' for more information."
        )
