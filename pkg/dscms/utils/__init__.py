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

"""Utilities for dynamic-safety-case-manager."""

import inspect
import json
import logging
import os
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Optional, Union

import yaml
from aioconsole import ainput
from halo import Halo

from dscms.utils.text_styler import bold, normal

DSCMS_DATA = (
    Path(os.environ["DSCMS_DATA"])
    if os.getenv("DSCMS_DATA")
    else (
        Path(f"/home/{os.getenv('USER')}/.local/share/dscms") if os.getenv("USER") else Path(".")
    )
)
BUNDLED_DATA = Path(__file__).parent.parent / "data"
AUDIT_HASH = os.environ.get("DSCMS_AUDIT_HASH", "sha256")
SNAPSHOT_GENERATIONS = int(os.environ.get("DSCMS_SNAPSHOT_GENERATIONS", 5))
EVENT_HISTORY = int(os.environ.get("DSCMS_EVENT_HISTORY", 512))

progress_indicator = Halo(spinner="line", placement="right")


def default_workspace() -> Path:
    """Get the workspace directory.

    DSCMS_WORKSPACE takes precedence over the directory under DSCMS_DATA.

    :return: Path of the workspace directory.
    :rtype: Path
    """
    return Path(os.environ.get("DSCMS_WORKSPACE", DSCMS_DATA / "workspace"))


def print_and_debug(message: Any) -> None:
    """Print and log message at debug level.

    :param message: The object to print and log.
    :type message: Any
    """
    print(message)

    logger = logging.getLogger(inspect.stack()[1].filename)
    logger.debug(message)


async def prompt_input(
    text_list: list[str],
    separator: str = "\n",
    choices: Optional[list[str]] = None,
    default: str = "",
) -> str:
    """Generate eye-catching prompt.

    :param text_list: List of text to show at the prompt with the user options.
    :type text_list: list[str]
    :param separator: Separator between each text. Default to newline.
    :type separator: str
    :param choices: List of options to show at the prompt with the user options. If no value
    supplied, 'y' and 'n' will be used by default.
    :type choices: Optional[list[str]]
    :param default: The default choice if user doesn't a provide valid input.
    :type default: str
    :return: The input value (if any) or the default choice.
    :rtype: str
    """
    if not choices:
        choices = ["y", "n"]

    message_str = normal(separator).join(normal(text) for text in text_list)
    choices_str = normal("/").join(
        bold(choice.upper() if choice == default.casefold() else choice) for choice in choices
    )
    formatted_message = normal("\n") + message_str + normal(" (") + choices_str + normal("): ")

    input_value = await ainput(formatted_message)

    return (input_value or default).casefold()


def parse_timestamp(value: Union[str, datetime]) -> datetime:
    """Parse ISO-8601 timestamp and normalize it to UTC.

    Naive timestamps are taken as UTC and a trailing 'Z' is accepted.

    :param value: timestamp as string or datetime
    :type value: Union[str, datetime]
    :return: timezone-aware UTC datetime
    :rtype: datetime
    :raises ValueError: if the value is not a valid timestamp
    """
    if isinstance(value, datetime):
        parsed = value
    elif isinstance(value, str):
        text = value.strip()
        if text.endswith(("Z", "z")):
            text = text[:-1] + "+00:00"
        parsed = datetime.fromisoformat(text)
    else:
        raise ValueError(f"invalid timestamp {value!r}")

    if parsed.tzinfo is None:
        return parsed.replace(tzinfo=timezone.utc)

    return parsed.astimezone(timezone.utc)


def format_timestamp(value: datetime) -> str:
    """Format timestamp as ISO-8601 UTC with 'Z' suffix.

    :param value: timestamp
    :type value: datetime
    :return: formatted timestamp
    :rtype: str
    """
    return parse_timestamp(value).isoformat().replace("+00:00", "Z")


def utcnow() -> datetime:
    """Get current time in UTC.

    :return: timezone-aware current time
    :rtype: datetime
    """
    return datetime.now(timezone.utc)


def dump_yaml(data: Any) -> str:
    """Dump data as YAML keeping the insertion order of mappings.

    :param data: data to dump
    :type data: Any
    :return: YAML document
    :rtype: str
    """
    return yaml.safe_dump(data, sort_keys=False, default_flow_style=False, allow_unicode=True)


def canonical_json(data: Any) -> str:
    """Serialize data to canonical JSON used for digests.

    :param data: JSON-serializable data
    :type data: Any
    :return: compact JSON with sorted keys
    :rtype: str
    """
    return json.dumps(data, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def write_atomic(path: Path, text: str) -> None:
    """Replace a file's content so readers see either the old or the new text.

    :param path: target file
    :type path: Path
    :param text: new content
    :type text: str
    """
    tmp = path.with_name(path.name + ".tmp")
    with tmp.open("w", encoding="utf-8") as file:
        file.write(text)
        file.flush()
        os.fsync(file.fileno())
    os.replace(tmp, path)
