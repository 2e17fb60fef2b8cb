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

"""Entrypoint for 'dynamic-safety-case-manager'."""
import asyncio
import json
import logging
import sys
from datetime import datetime
from enum import Enum
from pathlib import Path
from typing import Any, Optional

from dscms.argument.parser import load_case
from dscms.argument.validation import validate_structure, validate_traceability
from dscms.commands import CLIargs, parse_args
from dscms.consistency.recovery import parse_recovery_document
from dscms.exceptions import (
    AuditLogError,
    DSCMSException,
    ObservationParseError,
    ValidationFailed,
)
from dscms.governance.audit import verify_chain
from dscms.ingestion import Observation
from dscms.ingestion.feeds import (
    FeedMapping,
    load_feed_mappings,
    map_feed,
    parse_observations,
    validate_mappings,
)
from dscms.logging import setup_logging
from dscms.monitor import BUNDLED_CASE, BUNDLED_CATALOG, Monitor, simulate_isolated
from dscms.scenarios import load_scenario
from dscms.spi.catalog import load_catalog
from dscms.utils import (
    BUNDLED_DATA,
    default_workspace,
    dump_yaml,
    print_and_debug,
    progress_indicator,
    prompt_input,
    utcnow,
)
from dscms.utils.text_styler import failed, passed

logger = logging.getLogger(__name__)


class VerbosityLevel(Enum):
    """
    Enumeration of verbosity levels for logging.

    - 'WARNING': Both errors and warnings will be logged.
    - 'INFO': Errors, warnings, and general information will be logged.
    - 'DEBUG': Detailed debugging information will be logged.
    - 'NOTSET': Maximum verbosity where everything will be logged.
    """

    WARNING = 0
    INFO = 1
    DEBUG = 2
    NOTSET = 3

    @classmethod
    def _missing_(cls, value: object) -> Enum:
        """Return maximum verbosity for value larger than 3.

        :param value: value to get enum member
        :type value: object
        :return: return a member of VerbosityLevel
        :rtype: Enum
        :raises ValueError: Invalid value input.
        """
        if isinstance(value, int) and value > 3:
            return cls.NOTSET
        raise ValueError(f"{value} is not a valid member of VerbosityLevel.")


def get_log_level(quiet: bool = False, verbosity: int = 0) -> str:
    """Get a log level based on input options.

    :param quiet: Whether to run DSCMS in quiet mode.
    :type quiet: bool
    :param verbosity: Verbosity level based on user's input.
    :type verbosity: int
    :return: Log level.
    :rtype: str
    """
    return "CRITICAL" if quiet else VerbosityLevel(verbosity).name


async def continue_recovery() -> bool:
    """Determine whether to apply the recovery actions based on user input.

    :return: Boolean value indicate whether to apply the recovery.
    :rtype: bool
    """
    input_value = await prompt_input(
        ["Would you like to apply the recovery?", "Continue"], separator=" ", default="n"
    )

    match input_value:
        case "y" | "yes":
            logger.info("Applying the recovery.")
            return True
        case "n" | "no":
            logger.info("Exiting DSCMS without applying the recovery.")
        case _:
            print_and_debug("No valid input provided! Exiting DSCMS without recovery.")

    return False


def _output(args: CLIargs, document: Any) -> None:
    """Print a document as YAML unless in quiet mode."""
    if not args.quiet:
        print_and_debug(dump_yaml(document).rstrip())


def open_monitor(args: CLIargs) -> Monitor:
    """Open the workspace selected by the arguments.

    :param args: CLI arguments
    :type args: CLIargs
    :return: monitor of the workspace
    :rtype: Monitor
    """
    workspace = args.workspace or default_workspace()
    progress_indicator.start(f"Opening workspace '{workspace}'...")
    monitor = Monitor.open(workspace, gates_path=args.gates)
    progress_indicator.succeed(f"Opened {monitor.case.case_id} v{monitor.case.version}")
    return monitor


def validate(args: CLIargs) -> None:
    """Validate a case and catalog, by default the bundled ones.

    :param args: CLI arguments
    :type args: CLIargs
    :raises ValidationFailed: if there is any violation
    """
    case = load_case(args.case_path or BUNDLED_CASE)
    catalog = load_catalog(args.catalog_path or BUNDLED_CATALOG)
    violations = validate_structure(case) + validate_traceability(case, catalog)
    if args.case_path is None and args.catalog_path is None:
        # bundled feed mappings must resolve against the bundled catalog
        validate_mappings(load_feed_mappings(BUNDLED_DATA / "feeds" / "mappings.yaml"), catalog)

    for violation in violations:
        logger.warning("%s", violation)
        print(failed(str(violation)))

    if violations:
        raise ValidationFailed(f"{len(violations)} violation(s) in {case.case_id}")

    print(passed(f"{case.case_id} v{case.version} and {len(catalog)} SPIs are valid."))


def map_raw_records(
    text: str, mappings: list[FeedMapping], at: Optional[datetime] = None
) -> tuple[list[Observation], list[str]]:
    """Map line-delimited raw feed records to observations.

    :param text: raw records, one JSON record per line
    :type text: str
    :param mappings: feed mappings
    :type mappings: list[FeedMapping]
    :param at: time of records without 'ts', defaults to None
    :type at: Optional[datetime]
    :return: observations and the rejected lines
    :rtype: tuple[list[Observation], list[str]]
    """
    records: list[dict[str, Any]] = []
    line_numbers: list[int] = []
    rejected: list[str] = []
    for number, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            rejected.append(f"line {number}: not a JSON record ({exc.msg})")
            continue
        if not isinstance(record, dict):
            rejected.append(f"line {number}: not a JSON record")
            continue
        records.append(record)
        line_numbers.append(number)

    mapped = map_feed(records, mappings, at or utcnow())
    rejected.extend(f"line {line_numbers[u.index]}: {u.reason}" for u in mapped.unmatched)
    return mapped.observations, rejected


def run_ingest(args: CLIargs) -> None:
    """Ingest an observation file into the workspace.

    :param args: CLI arguments
    :type args: CLIargs
    :raises ObservationParseError: if no line of the file could be parsed
    """
    path = args.obs_file or Path("-")
    text = sys.stdin.read() if str(path) == "-" else path.read_text(encoding="utf-8")
    mappings: list[FeedMapping] = []
    if args.raw:
        mappings = load_feed_mappings(args.mappings or BUNDLED_DATA / "feeds" / "mappings.yaml")
        observations, rejected = map_raw_records(text, mappings, args.at)
    else:
        parsed = parse_observations(text)
        observations, rejected = parsed.observations, [str(error) for error in parsed.errors]
    if rejected and not observations:
        raise ObservationParseError(f"No valid observation in '{path}'", rejected)

    monitor = open_monitor(args)
    validate_mappings(mappings, monitor.snapshot.catalog)
    progress_indicator.start("Ingesting observations...")
    outcome = monitor.ingest(observations, args.at)
    progress_indicator.succeed()
    record = outcome.to_dict()
    record["rejected"] = rejected
    _output(args, record)


def run_check(args: CLIargs) -> None:
    """Run a consistency check of the workspace.

    :param args: CLI arguments
    :type args: CLIargs
    """
    monitor = open_monitor(args)
    progress_indicator.start("Checking consistency...")
    outcome = monitor.check(args.at, args.artifacts or ())
    progress_indicator.succeed()
    _output(args, outcome.report.to_dict())


def run_simulate(args: CLIargs) -> None:
    """Replay a bundled scenario.

    :param args: CLI arguments
    :type args: CLIargs
    """
    scenario = load_scenario(str(args.scenario))
    if args.isolated:
        progress_indicator.start(f"Simulating {scenario.name} in a scratch workspace...")
        outcome, _ = simulate_isolated(scenario)
    else:
        monitor = open_monitor(args)
        progress_indicator.start(f"Simulating {scenario.name}...")
        outcome = monitor.simulate(scenario)
    progress_indicator.succeed()

    check = outcome.check
    _output(
        args,
        {
            "scenario": scenario.name,
            "title": scenario.title,
            "receipt": outcome.receipt.to_dict(),
            "impact": check.report.to_dict() if check else None,
            "alert": check.alert.to_dict() if check and check.alert else None,
        },
    )


async def run_recover(args: CLIargs) -> None:
    """Apply a recovery document to the workspace case.

    :param args: CLI arguments
    :type args: CLIargs
    """
    document = parse_recovery_document(Path(str(args.actions_file)).read_text(encoding="utf-8"))
    monitor = open_monitor(args)
    print_and_debug(
        f"{len(document.actions)} recovery action(s) against "
        f"{monitor.case.case_id} v{monitor.case.version}"
    )
    if args.prompt and not await continue_recovery():
        return

    progress_indicator.start("Applying recovery...")
    case = monitor.recover(document)
    progress_indicator.succeed(f"{case.case_id} is now at v{case.version}")
    print("Run 'dscms revalidate' to check the new case version.")


def run_revalidate(args: CLIargs) -> None:
    """Revalidate the workspace case.

    :param args: CLI arguments
    :type args: CLIargs
    """
    monitor = open_monitor(args)
    progress_indicator.start("Revalidating...")
    outcome = monitor.revalidate(args.at)
    if outcome.revalidation.clean:
        progress_indicator.succeed("Revalidation clean")
    else:
        progress_indicator.warn("Residual impact remains")
    _output(args, outcome.to_dict())


def run_audit(args: CLIargs) -> None:
    """Verify the audit chain of the workspace.

    :param args: CLI arguments
    :type args: CLIargs
    :raises AuditLogError: if the chain is broken
    """
    monitor = open_monitor(args)
    verification = verify_chain(monitor.audit)
    if not verification:
        raise AuditLogError(
            f"Audit chain broken at record {verification.first_bad_index}: "
            f"{verification.reason}"
        )

    print(passed(f"Audit chain of {len(monitor.audit)} record(s) verified"))
    print(f"Audit head: {monitor.audit.head}")


async def run_serve(args: CLIargs) -> None:
    """Serve the workspace over HTTP.

    :param args: CLI arguments
    :type args: CLIargs
    """
    # the web stack is only imported when serving
    from dscms.service import serve  # pylint: disable=import-outside-toplevel
    from dscms.service.auth import load_tokens  # pylint: disable=import-outside-toplevel

    tokens = load_tokens(Path(str(args.token_file)))
    monitor = open_monitor(args)
    host, port = args.addr
    print(f"Serving {monitor.case.case_id} on http://{host}:{port}/")
    await serve(monitor, tokens, host, port)


async def _run_command(args: CLIargs) -> None:
    """Run 'dynamic-safety-case-manager' command.

    :param args: CLI arguments
    :type args: CLIargs
    """
    match args.command:
        case "validate":
            validate(args)
        case "ingest":
            run_ingest(args)
        case "check":
            run_check(args)
        case "simulate":
            run_simulate(args)
        case "recover":
            await run_recover(args)
        case "revalidate":
            run_revalidate(args)
        case "report":
            _output(args, open_monitor(args).report())
        case "audit":
            run_audit(args)
        case "serve":
            await run_serve(args)


def entrypoint() -> None:
    """Execute 'dynamic-safety-case-manager' command."""
    try:
        args = parse_args(sys.argv[1:])

        # disable progress indicator when in quiet mode to suppress its console output
        progress_indicator.enabled = not args.quiet
        log_level = get_log_level(quiet=args.quiet, verbosity=args.verbosity)
        setup_logging(log_level)

        asyncio.run(_run_command(args))
    except DSCMSException as exc:
        progress_indicator.fail()
        logger.error(exc)
        print(json.dumps(exc.to_record(), sort_keys=True), file=sys.stderr)
        sys.exit(1)
    except KeyboardInterrupt as exc:
        # if spinner_id is not None it means that indicator was not finished
        if progress_indicator.spinner_id is not None:
            progress_indicator.fail()
        print(str(exc) or "dynamic-safety-case-manager has been terminated")
        sys.exit(getattr(exc, "exit_code", 130))
    except Exception as exc:  # pylint: disable=broad-exception-caught
        logger.error("Unexpected error occurred.")
        logger.exception(exc)
        sys.exit(2)
    finally:
        progress_indicator.stop()
