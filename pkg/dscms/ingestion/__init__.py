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

"""Observations and the append-only observation store."""
from __future__ import annotations

import bisect
import json
import logging
import math
from collections import defaultdict
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path
from typing import Any, Iterable, Iterator, Mapping, Optional

from dscms.spi import EvidenceSource, SpiCatalog
from dscms.utils import canonical_json, format_timestamp, parse_timestamp, write_atomic

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Observation:
    """One timestamped datum for an SPI."""

    spi: str
    ts: datetime
    value: float
    source: EvidenceSource
    meta: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        """Normalize the timestamp to UTC and reject non-finite values.

        :raises ValueError: if the value is not finite or meta is not a record
        """
        object.__setattr__(self, "ts", parse_timestamp(self.ts))
        if not math.isfinite(self.value):
            raise ValueError(f"non-finite value {self.value!r}")
        if not isinstance(self.meta, Mapping):
            raise ValueError(f"meta must be a record, got {self.meta!r}")

    @property
    def key(self) -> tuple[str, datetime, float, str]:
        """Identity used for deduplication.

        :return: spi, timestamp, value and canonical meta
        :rtype: tuple[str, datetime, float, str]
        """
        return self.spi, self.ts, self.value, canonical_json(dict(self.meta))

    def to_dict(self) -> dict[str, Any]:
        """Serialize the observation to an observation file record.

        :return: observation record
        :rtype: dict[str, Any]
        """
        record: dict[str, Any] = {
            "ts": format_timestamp(self.ts),
            "spi": self.spi,
            "value": self.value,
            "source": self.source.value,
        }
        if self.meta:
            record["meta"] = dict(self.meta)

        return record

    @classmethod
    def from_dict(cls, record: Mapping[str, Any]) -> Observation:
        """Build observation from an observation file record.

        :param record: observation record
        :type record: Mapping[str, Any]
        :return: observation
        :rtype: Observation
        :raises ValueError: if a field is missing or invalid
        :raises KeyError: if a required field is missing
        """
        value = record["value"]
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ValueError(f"value must be a number, got {value!r}")
        meta = record.get("meta") or {}
        if not isinstance(meta, Mapping):
            raise ValueError("meta must be a record")

        return cls(
            spi=str(record["spi"]),
            ts=parse_timestamp(record["ts"]),
            value=float(value),
            source=EvidenceSource(record["source"]),
            meta=dict(meta),
        )


@dataclass(frozen=True)
class IngestReceipt:
    """Outcome of one ingest call."""

    accepted: int
    deduplicated: int
    evaluation_trigger: bool
    unknown_spi: int = 0

    def to_dict(self) -> dict[str, Any]:
        """Serialize the receipt.

        :return: receipt record
        :rtype: dict[str, Any]
        """
        return {
            "accepted": self.accepted,
            "deduplicated": self.deduplicated,
            "evaluation_trigger": self.evaluation_trigger,
            "unknown_spi": self.unknown_spi,
        }


class ObservationStore:
    """Append-only, time-indexed collection of observations.

    When a path is given, every accepted observation is also appended to that
    line-delimited file.
    """

    def __init__(self, observations: Iterable[Observation] = (), path: Optional[Path] = None):
        """Create the store.

        :param observations: initial observations, duplicates are dropped
        :type observations: Iterable[Observation]
        :param path: file receiving appended observations, defaults to None
        :type path: Optional[Path]
        """
        self.path = path
        self._keys: set[tuple[str, datetime, float, str]] = set()
        self._order: list[Observation] = []
        self._by_spi: dict[str, list[Observation]] = defaultdict(list)
        for observation in observations:
            self._insert(observation)

    def __len__(self) -> int:
        """Number of stored observations.

        :return: number of observations
        :rtype: int
        """
        return len(self._order)

    def __iter__(self) -> Iterator[Observation]:
        """Iterate over observations in arrival order.

        :return: iterator of observations
        :rtype: Iterator[Observation]
        """
        return iter(list(self._order))

    def __contains__(self, observation: object) -> bool:
        """Whether an equal observation is stored.

        :param observation: observation
        :type observation: object
        :return: True if stored
        :rtype: bool
        """
        return isinstance(observation, Observation) and observation.key in self._keys

    def __eq__(self, other: object) -> bool:
        """Stores are equal when they hold the same set of observations.

        :param other: other object
        :type other: object
        :return: True if equal
        :rtype: bool
        """
        if not isinstance(other, ObservationStore):
            return NotImplemented

        return self._keys == other._keys

    def _insert(self, observation: Observation) -> bool:
        if observation.key in self._keys:
            return False

        self._keys.add(observation.key)
        self._order.append(observation)
        bisect.insort(self._by_spi[observation.spi], observation, key=lambda obs: obs.ts)
        return True

    def add(self, observation: Observation) -> bool:
        """Append observation unless an equal one is already stored.

        :param observation: observation
        :type observation: Observation
        :return: True if the observation was appended
        :rtype: bool
        """
        if not self._insert(observation):
            return False

        if self.path is not None:
            with self.path.open("a", encoding="utf-8") as file:
                file.write(json.dumps(observation.to_dict(), sort_keys=True) + "\n")

        return True

    def for_spi(self, spi_id: str) -> list[Observation]:
        """Observations of one SPI sorted ascending by timestamp.

        :param spi_id: SPI id
        :type spi_id: str
        :return: observations
        :rtype: list[Observation]
        """
        return list(self._by_spi.get(spi_id, ()))

    @property
    def spis(self) -> list[str]:
        """SPIs having at least one observation.

        :return: sorted SPI ids
        :rtype: list[str]
        """
        return sorted(self._by_spi)

    def copy(self, path: Optional[Path] = None) -> ObservationStore:
        """Copy the store.

        :param path: file of the copy, defaults to None
        :type path: Optional[Path]
        :return: new store with the same observations
        :rtype: ObservationStore
        """
        return ObservationStore(self._order, path)

    @classmethod
    def open(cls, path: Path, limit: Optional[int] = None) -> ObservationStore:
        """Open store backed by a line-delimited file.

        Lines past the limit were written after the last snapshot and are discarded
        from the file, so the store matches the snapshot exactly.

        :param path: store file
        :type path: Path
        :param limit: number of records to keep, defaults to all
        :type limit: Optional[int]
        :return: observation store
        :rtype: ObservationStore
        """
        lines = path.read_text(encoding="utf-8").splitlines() if path.exists() else []
        lines = [line for line in lines if line.strip()]
        if limit is not None and len(lines) > limit:
            logger.warning("discarding %d observations written after snapshot", len(lines) - limit)
            lines = lines[:limit]
            write_atomic(path, "".join(line + "\n" for line in lines))

        return cls((Observation.from_dict(json.loads(line)) for line in lines), path)


def ingest(
    store: ObservationStore,
    observations: Iterable[Observation],
    catalog: Optional[SpiCatalog] = None,
) -> IngestReceipt:
    """Append observations to the store.

    :param store: observation store
    :type store: ObservationStore
    :param observations: observations to append
    :type observations: Iterable[Observation]
    :param catalog: when given, observations of SPIs missing from it are not stored
    :type catalog: Optional[SpiCatalog]
    :return: receipt; evaluation_trigger is set when at least one observation is new
    :rtype: IngestReceipt
    """
    accepted = deduplicated = 0
    unknown: set[str] = set()
    unknown_count = 0
    for observation in observations:
        if catalog is not None and observation.spi not in catalog:
            unknown.add(observation.spi)
            unknown_count += 1
        elif store.add(observation):
            accepted += 1
        else:
            deduplicated += 1

    if unknown:
        logger.warning(
            "rejected %d observation(s) of SPIs not in the catalog: %s",
            unknown_count,
            ", ".join(sorted(unknown)),
        )
    logger.info("ingested %d observation(s), %d duplicate(s)", accepted, deduplicated)
    return IngestReceipt(accepted, deduplicated, accepted > 0, unknown_count)
