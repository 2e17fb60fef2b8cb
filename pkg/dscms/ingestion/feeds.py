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

"""Observation files and raw feed mapping."""
from __future__ import annotations

import hashlib
import json
import logging
import math
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path
from typing import Any, Iterable, Mapping, Optional, Union

import yaml

from dscms.exceptions import FeedMappingError
from dscms.ingestion import Observation
from dscms.spi import EvidenceSource, SpiCatalog
from dscms.utils import canonical_json, parse_timestamp

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class LineError:
    """Rejected line of an observation file."""

    line: int
    message: str

    def __str__(self) -> str:
        """Render the error with its line number.

        :return: error description
        :rtype: str
        """
        return f"line {self.line}: {self.message}"


@dataclass(frozen=True)
class ParsedObservations:
    """Observations parsed from a file and the lines that were rejected."""

    observations: list[Observation]
    errors: list[LineError]


def _finite_number(value: Any) -> bool:
    return not isinstance(value, bool) and isinstance(value, (int, float)) and math.isfinite(value)


def _parse_line(line: str) -> Observation:
    try:
        record = json.loads(line)
    except json.JSONDecodeError as exc:
        raise ValueError(f"not a JSON record ({exc.msg})") from exc
    if not isinstance(record, Mapping):
        raise ValueError("not a JSON record")

    missing = [name for name in ("ts", "spi", "value", "source") if name not in record]
    if missing:
        raise ValueError(f"missing fields {', '.join(missing)}")

    try:
        ts = parse_timestamp(record["ts"])
    except ValueError as exc:
        raise ValueError(f"bad timestamp {record['ts']!r}") from exc

    try:
        source = EvidenceSource(record["source"])
    except ValueError as exc:
        raise ValueError(f"unknown source {record['source']!r}") from exc

    value = record["value"]
    if not _finite_number(value):
        raise ValueError(f"non-finite value {value!r}")

    meta = {} if record.get("meta") is None else record["meta"]
    if not isinstance(meta, Mapping):
        raise ValueError(f"meta is not a record: {meta!r}")

    return Observation(
        spi=str(record["spi"]),
        ts=ts,
        value=float(value),
        source=source,
        meta=dict(meta),
    )


def parse_observations(stream: Union[str, Iterable[str]]) -> ParsedObservations:
    """Parse line-delimited observation records.

    Invalid lines are reported with their line number and never abort the batch.

    :param stream: file content or an iterable of lines
    :type stream: Union[str, Iterable[str]]
    :return: parsed observations and per-line errors
    :rtype: ParsedObservations
    """
    lines = stream.splitlines() if isinstance(stream, str) else stream
    observations, errors = [], []
    for number, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            observations.append(_parse_line(line))
        except ValueError as exc:
            errors.append(LineError(number, str(exc)))

    for error in errors:
        logger.warning("rejected observation at %s", error)

    return ParsedObservations(observations, errors)


def load_observations(path: Path) -> ParsedObservations:
    """Parse an observation file.

    :param path: observation file
    :type path: Path
    :return: parsed observations and per-line errors
    :rtype: ParsedObservations
    """
    logger.info("Loading observations from '%s'", path)
    return parse_observations(Path(path).read_text(encoding="utf-8"))


@dataclass(frozen=True)
class FeedMapping:
    """Rule turning matching raw records into observations of one SPI.

    ``value_field`` None means every matching record counts as one event.
    """

    source: EvidenceSource
    match: Mapping[str, Any]
    target_spi: str
    value_field: Optional[str] = None

    def matches(self, record: Mapping[str, Any]) -> bool:
        """Whether a raw record is selected by the mapping.

        :param record: raw record
        :type record: Mapping[str, Any]
        :return: True if every match field has the expected value
        :rtype: bool
        """
        if "source" in record and record["source"] != self.source.value:
            return False

        return all(
            name in record and str(record[name]) == str(expected)
            for name, expected in self.match.items()
        )

    def value_of(self, record: Mapping[str, Any]) -> float:
        """Observation value of a matching record.

        :param record: raw record
        :type record: Mapping[str, Any]
        :return: value
        :rtype: float
        :raises ValueError: if the value field is absent or not a finite number
        """
        if self.value_field is None:
            return 1.0

        value = record.get(self.value_field)
        if not _finite_number(value):
            raise ValueError(f"field '{self.value_field}' is not a finite number: {value!r}")

        return float(value)


@dataclass(frozen=True)
class UnmatchedRecord:
    """Raw record that produced no observation."""

    index: int
    record: Mapping[str, Any]
    reason: str = "no mapping matched"


@dataclass(frozen=True)
class MappedFeed:
    """Observations made from raw records and the records left unmatched."""

    observations: list[Observation] = field(default_factory=list)
    unmatched: list[UnmatchedRecord] = field(default_factory=list)


def batch_id(records: Iterable[Mapping[str, Any]]) -> str:
    """Content id of a batch of raw records.

    :param records: raw records
    :type records: Iterable[Mapping[str, Any]]
    :return: short digest of the canonical batch
    :rtype: str
    """
    text = canonical_json([dict(record) for record in records])
    return hashlib.sha256(text.encode("utf-8")).hexdigest()[:16]


def map_feed(
    records: Iterable[Mapping[str, Any]],
    mappings: Iterable[FeedMapping],
    at: Optional[datetime] = None,
    batch: Optional[str] = None,
) -> MappedFeed:
    """Turn raw feed records into observations.

    A record matched by several mappings yields one observation per mapping. The
    observations carry the batch id and the record index, so equal records of
    different batches stay distinct while re-mapping the same batch deduplicates.

    :param records: raw records; their 'ts' field is the observation time
    :type records: Iterable[Mapping[str, Any]]
    :param mappings: feed mappings
    :type mappings: Iterable[FeedMapping]
    :param at: time used for records without 'ts', defaults to None
    :type at: Optional[datetime]
    :param batch: batch id, defaults to the content id of the records
    :type batch: Optional[str]
    :return: observations and unmatched records
    :rtype: MappedFeed
    """
    records, mappings = list(records), list(mappings)
    batch = batch or batch_id(records)
    result = MappedFeed()
    for index, record in enumerate(records):
        matched = [mapping for mapping in mappings if mapping.matches(record)]
        if not matched:
            result.unmatched.append(UnmatchedRecord(index, record))
            continue

        try:
            ts = parse_timestamp(record["ts"]) if "ts" in record else at
            if ts is None:
                raise ValueError("record has no 'ts' field")
            observations = [
                Observation(
                    spi=mapping.target_spi,
                    ts=ts,
                    value=mapping.value_of(record),
                    source=mapping.source,
                    meta={"feed_batch": batch, "feed_record": index},
                )
                for mapping in matched
            ]
        except ValueError as exc:
            result.unmatched.append(UnmatchedRecord(index, record, str(exc)))
            continue

        result.observations.extend(observations)

    logger.info(
        "mapped %d observation(s), %d record(s) unmatched",
        len(result.observations),
        len(result.unmatched),
    )
    return result


def _parse_value_field(raw: Any) -> Optional[str]:
    if raw is None or raw == 1 or raw == "1":
        return None

    return str(raw)


def parse_feed_mappings(document: str) -> list[FeedMapping]:
    """Parse feed-mapping document.

    :param document: YAML with a 'mappings' list
    :type document: str
    :return: feed mappings
    :rtype: list[FeedMapping]
    :raises FeedMappingError: if any mapping is malformed
    """
    data = yaml.safe_load(document) or {}
    records = data.get("mappings", []) if isinstance(data, Mapping) else data
    mappings, errors = [], []
    for index, record in enumerate(records or []):
        try:
            mappings.append(
                FeedMapping(
                    source=EvidenceSource(record["source"]),
                    match=dict(record.get("match") or {}),
                    target_spi=str(record["target_spi"]),
                    value_field=_parse_value_field(record.get("value_field")),
                )
            )
        except (KeyError, TypeError, ValueError) as exc:
            errors.append(f"mappings[{index}]: {exc}")

    if errors:
        raise FeedMappingError("Feed mappings rejected", errors)

    return mappings


def load_feed_mappings(path: Path) -> list[FeedMapping]:
    """Load feed mappings from a file.

    :param path: feed-mapping file
    :type path: Path
    :return: feed mappings
    :rtype: list[FeedMapping]
    """
    logger.info("Loading feed mappings from '%s'", path)
    return parse_feed_mappings(Path(path).read_text(encoding="utf-8"))


def validate_mappings(mappings: Iterable[FeedMapping], catalog: SpiCatalog) -> None:
    """Check every mapping targets an SPI of the catalog.

    :param mappings: feed mappings
    :type mappings: Iterable[FeedMapping]
    :param catalog: SPI catalog
    :type catalog: SpiCatalog
    :raises FeedMappingError: if a mapping targets an unknown SPI
    """
    unknown = sorted({m.target_spi for m in mappings if m.target_spi not in catalog})
    if unknown:
        raise FeedMappingError("Feed mappings target unknown SPIs", unknown)
