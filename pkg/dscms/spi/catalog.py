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

"""SPI catalog files.

A catalog file holds the SPIs of one claim group::

    group: C2.1
    title: "..."
    spis:
      - id: C2.1-SPI-1
        claim: C2.1
        ...

A bare list of SPI records is accepted as well. A catalog is loaded either from one file or
from every ``*.yaml`` file of a directory.
"""
from __future__ import annotations

import logging
from datetime import datetime
from pathlib import Path
from typing import Any, Iterable, Mapping, Optional

import yaml

from dscms.exceptions import CatalogError
from dscms.spi import (
    Aggregation,
    Comparator,
    EvidenceSource,
    PrioritizationScore,
    SpiCatalog,
    SpiDef,
    SpiKind,
    ThresholdSpec,
    Unit,
)
from dscms.utils import dump_yaml, format_timestamp, parse_timestamp, utcnow

REQUIRED_FIELDS = (
    "id",
    "claim",
    "title",
    "unit",
    "kind",
    "evidence_source",
    "aggregation",
    "window_days",
    "comparator",
    "threshold",
    "update_frequency_days",
)

logger = logging.getLogger(__name__)


def _positive_int(record: Mapping[str, Any], name: str) -> int:
    value = record[name]
    if isinstance(value, bool) or not isinstance(value, int) or value < 1:
        raise ValueError(f"{name} must be a positive integer, got {value!r}")

    return value


def _optional_float(value: Any) -> Optional[float]:
    if value is None:
        return None
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ValueError(f"example must be a number, got {value!r}")

    return float(value)


def parse_spi(record: Mapping[str, Any]) -> SpiDef:
    """Parse one catalog record.

    :param record: catalog record
    :type record: Mapping[str, Any]
    :return: SPI definition
    :rtype: SpiDef
    :raises ValueError: if a field is missing or invalid
    """
    missing = [name for name in REQUIRED_FIELDS if record.get(name) in (None, "")]
    if missing:
        raise ValueError(f"missing fields {', '.join(missing)}")

    priority = record.get("priority")
    return SpiDef(
        id=str(record["id"]),
        claim=str(record["claim"]),
        title=str(record["title"]),
        unit=Unit(record["unit"]),
        kind=SpiKind(record["kind"]),
        evidence_source=EvidenceSource(record["evidence_source"]),
        aggregation=Aggregation(record["aggregation"]),
        window_days=_positive_int(record, "window_days"),
        comparator=Comparator(record["comparator"]),
        threshold=ThresholdSpec.parse(record["threshold"]),
        update_frequency_days=_positive_int(record, "update_frequency_days"),
        example=_optional_float(record.get("example")),
        example_breached=record.get("example_breached"),
        priority=PrioritizationScore(**priority) if priority else None,
    )


def _records(document: Any) -> list[Any]:
    if document is None:
        return []
    if isinstance(document, list):
        return document
    if isinstance(document, Mapping) and isinstance(document.get("spis"), list):
        return document["spis"]

    raise ValueError("catalog document must be a list of SPIs or a mapping with 'spis'")


def parse_catalog(
    documents: Iterable[tuple[str, str]], loaded_at: Optional[datetime] = None
) -> SpiCatalog:
    """Parse catalog documents into one catalog.

    Every problem found in any document is reported together.

    :param documents: pairs of document name and YAML text
    :type documents: Iterable[tuple[str, str]]
    :param loaded_at: catalog load time, defaults to now
    :type loaded_at: Optional[datetime]
    :return: SPI catalog
    :rtype: SpiCatalog
    :raises CatalogError: if any record is invalid or an SPI id is defined twice
    """
    errors: list[str] = []
    spis: dict[str, SpiDef] = {}
    for name, text in documents:
        try:
            records = _records(yaml.safe_load(text))
        except (yaml.YAMLError, ValueError) as exc:
            errors.append(f"{name}: {exc}")
            continue

        for index, record in enumerate(records):
            location = f"{name}[{index}]"
            if not isinstance(record, Mapping):
                errors.append(f"{location}: SPI record must be a mapping")
                continue
            try:
                spi = parse_spi(record)
            except (ValueError, TypeError) as exc:
                errors.append(f"{location} ({record.get('id', '?')}): {exc}")
                continue
            if spi.id in spis:
                errors.append(f"{location}: duplicate SPI id {spi.id}")
                continue
            spis[spi.id] = spi

    if errors:
        raise CatalogError("SPI catalog rejected", errors)

    return SpiCatalog(spis.values(), loaded_at or utcnow())


def load_catalog(path: Path, loaded_at: Optional[datetime] = None) -> SpiCatalog:
    """Load catalog from a file or from every YAML file in a directory.

    :param path: catalog file or directory
    :type path: Path
    :param loaded_at: catalog load time, defaults to now
    :type loaded_at: Optional[datetime]
    :return: SPI catalog
    :rtype: SpiCatalog
    :raises CatalogError: if the path does not exist or any document is invalid
    """
    path = Path(path)
    if path.is_dir():
        files = sorted(path.glob("*.yaml"))
    elif path.is_file():
        files = [path]
    else:
        raise CatalogError("SPI catalog rejected", [f"{path}: no such file or directory"])

    logger.info("Loading SPI catalog from %d file(s) in '%s'", len(files), path)
    catalog = parse_catalog(
        ((file.name, file.read_text(encoding="utf-8")) for file in files), loaded_at
    )
    logger.debug("%r", catalog)
    return catalog


def catalog_to_dict(catalog: SpiCatalog) -> dict[str, Any]:
    """Convert catalog to a single mapping with stable ordering.

    :param catalog: SPI catalog
    :type catalog: SpiCatalog
    :return: catalog mapping
    :rtype: dict[str, Any]
    """
    return {
        "loaded_at": format_timestamp(catalog.loaded_at),
        "spis": [spi.to_dict() for spi in catalog],
    }


def catalog_from_dict(data: Mapping[str, Any]) -> SpiCatalog:
    """Load catalog from the mapping made by :func:`catalog_to_dict`.

    :param data: catalog mapping
    :type data: Mapping[str, Any]
    :return: SPI catalog
    :rtype: SpiCatalog
    :raises CatalogError: if any record is invalid
    """
    return parse_catalog(
        [("snapshot", dump_yaml({"spis": data.get("spis", [])}))],
        parse_timestamp(data["loaded_at"]),
    )
