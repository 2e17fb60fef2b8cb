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

"""Safety Performance Indicator definitions, statuses and the catalog."""
from __future__ import annotations

import logging
import operator
from dataclasses import dataclass, replace
from datetime import datetime
from enum import Enum
from typing import Any, Callable, Iterable, Iterator, Optional

from dscms.exceptions import UnknownSpi
from dscms.utils import format_timestamp, parse_timestamp

TREND_ONLY = "trend_only"

logger = logging.getLogger(__name__)


class Unit(str, Enum):
    """Unit an SPI value is expressed in."""

    COUNT = "count"
    CURRENCY = "currency"
    PERCENT = "percent"
    DAYS = "days"
    QUALITATIVE = "qualitative"


class SpiKind(str, Enum):
    """Leading indicators anticipate risk, lagging ones measure realized outcomes."""

    LEADING = "leading"
    LAGGING = "lagging"


class EvidenceSource(str, Enum):
    """Data source providing evidence for an SPI."""

    INCIDENTS = "incidents"
    NEAR_MISSES = "near-misses"
    CYBER_THREAT_INTELLIGENCE = "cyber-threat-intelligence"
    RESEARCH_INSIGHTS = "research-insights"
    INDUSTRY_BODIES = "industry-bodies"
    INTERNAL_EVALUATIONS = "internal-evaluations"
    SCALING_LAWS = "scaling-laws"
    EXTERNAL_EVALUATIONS = "external-evaluations"


class Aggregation(str, Enum):
    """How observations inside the evaluation window become one value."""

    COUNT_WINDOW = "count_window"
    SUM_WINDOW = "sum_window"
    MEAN_WINDOW = "mean_window"
    LATEST = "latest"
    MOM_PERCENT_CHANGE = "mom_percent_change"
    MEAN_DELTA_DAYS = "mean_delta_days"


_COMPARATOR_FUNCTIONS: dict[str, Callable[[float, float], bool]] = {
    "gte": operator.ge,
    "gt": operator.gt,
    "lte": operator.le,
    "lt": operator.lt,
}


class Comparator(str, Enum):
    """Comparison of an aggregated value against its threshold; true means breach."""

    GTE = "gte"
    GT = "gt"
    LTE = "lte"
    LT = "lt"

    def holds(self, value: float, threshold: float) -> bool:
        """Apply the comparator.

        :param value: aggregated value
        :type value: float
        :param threshold: threshold value
        :type threshold: float
        :return: True if comparator(value, threshold) holds
        :rtype: bool
        """
        return _COMPARATOR_FUNCTIONS[self.value](value, threshold)


@dataclass(frozen=True)
class ThresholdSpec:
    """Numeric threshold, or no threshold at all for SPIs tracked for trends."""

    value: Optional[float] = None

    def __post_init__(self) -> None:
        """Store the threshold as a float."""
        if self.value is not None:
            object.__setattr__(self, "value", float(self.value))

    @property
    def trend_only(self) -> bool:
        """Whether the SPI is only tracked for trends.

        :return: True if there is no numeric threshold
        :rtype: bool
        """
        return self.value is None

    @classmethod
    def parse(cls, raw: Any) -> ThresholdSpec:
        """Parse threshold from a catalog field.

        :param raw: a number or the literal 'trend_only'
        :type raw: Any
        :return: threshold spec
        :rtype: ThresholdSpec
        :raises ValueError: if the value is neither a number nor 'trend_only'
        """
        if raw == TREND_ONLY:
            return cls(None)
        if isinstance(raw, bool) or not isinstance(raw, (int, float)):
            raise ValueError(f"threshold must be a number or '{TREND_ONLY}', got {raw!r}")

        return cls(float(raw))

    def to_raw(self) -> Any:
        """Serialize threshold to a catalog field.

        :return: number or 'trend_only'
        :rtype: Any
        """
        if self.value is None:
            return TREND_ONLY

        value = float(self.value)
        return int(value) if value.is_integer() else value


@dataclass(frozen=True)
class PrioritizationScore:
    """Scores of an SPI on the six prioritization criteria, each 0 to 5."""

    relevance: int
    claim_importance: int
    proactive: int
    measurability: int
    timeliness: int
    implementation_feasibility: int

    @property
    def significance_dimensions(self) -> tuple[int, int, int]:
        """Dimensions averaged into significance.

        :return: relevance, claim importance and proactive scores
        :rtype: tuple[int, int, int]
        """
        return self.relevance, self.claim_importance, self.proactive

    @property
    def feasibility_dimensions(self) -> tuple[int, int, int]:
        """Dimensions averaged into feasibility.

        :return: measurability, timeliness and implementation feasibility scores
        :rtype: tuple[int, int, int]
        """
        return self.measurability, self.timeliness, self.implementation_feasibility

    def to_dict(self) -> dict[str, int]:
        """Serialize the score.

        :return: score per dimension
        :rtype: dict[str, int]
        """
        return {
            "relevance": self.relevance,
            "claim_importance": self.claim_importance,
            "proactive": self.proactive,
            "measurability": self.measurability,
            "timeliness": self.timeliness,
            "implementation_feasibility": self.implementation_feasibility,
        }


@dataclass(frozen=True)
class SpiDef:  # pylint: disable=too-many-instance-attributes
    """Safety Performance Indicator attached to a claim."""

    id: str
    claim: str
    title: str
    unit: Unit
    kind: SpiKind
    evidence_source: EvidenceSource
    aggregation: Aggregation
    window_days: int
    comparator: Comparator
    threshold: ThresholdSpec
    update_frequency_days: int
    example: Optional[float] = None
    example_breached: Optional[bool] = None
    priority: Optional[PrioritizationScore] = None

    def breaches(self, value: Optional[float]) -> bool:
        """Check whether an aggregated value breaches the SPI threshold.

        :param value: aggregated value, None if absent
        :type value: Optional[float]
        :return: True if the threshold is breached
        :rtype: bool
        """
        if value is None or self.threshold.value is None:
            return False

        return self.comparator.holds(value, self.threshold.value)

    def to_dict(self) -> dict[str, Any]:
        """Serialize the SPI to a catalog record.

        :return: catalog record
        :rtype: dict[str, Any]
        """
        record: dict[str, Any] = {
            "id": self.id,
            "claim": self.claim,
            "title": self.title,
            "unit": self.unit.value,
            "kind": self.kind.value,
            "evidence_source": self.evidence_source.value,
            "aggregation": self.aggregation.value,
            "window_days": self.window_days,
            "comparator": self.comparator.value,
            "threshold": self.threshold.to_raw(),
            "update_frequency_days": self.update_frequency_days,
        }
        if self.example is not None:
            record["example"] = self.example
        if self.example_breached is not None:
            record["example_breached"] = self.example_breached
        if self.priority is not None:
            record["priority"] = self.priority.to_dict()

        return record


@dataclass(frozen=True)
class SpiStatus:
    """Latest evaluation of an SPI."""

    spi: str
    value: Optional[float]
    breached: bool
    stale: bool
    evaluated_at: datetime
    contributing_observation_count: int
    unit: Unit = Unit.COUNT

    def to_dict(self) -> dict[str, Any]:
        """Serialize the status.

        :return: status record
        :rtype: dict[str, Any]
        """
        return {
            "spi": self.spi,
            "value": self.value,
            "unit": self.unit.value,
            "breached": self.breached,
            "stale": self.stale,
            "evaluated_at": format_timestamp(self.evaluated_at),
            "contributing_observation_count": self.contributing_observation_count,
        }

    @classmethod
    def from_dict(cls, record: dict[str, Any]) -> SpiStatus:
        """Load the status from its serialized form.

        :param record: status record
        :type record: dict[str, Any]
        :return: status
        :rtype: SpiStatus
        """
        return cls(
            spi=record["spi"],
            value=record["value"],
            breached=record["breached"],
            stale=record["stale"],
            evaluated_at=parse_timestamp(record["evaluated_at"]),
            contributing_observation_count=record["contributing_observation_count"],
            unit=Unit(record.get("unit", Unit.COUNT.value)),
        )


@dataclass(frozen=True)
class BreachEvent:
    """SPI transitioning into breach."""

    spi: str
    claim: str
    value: float
    threshold: float
    comparator: Comparator
    at: datetime

    def to_dict(self) -> dict[str, Any]:
        """Serialize the event.

        :return: event record
        :rtype: dict[str, Any]
        """
        return {
            "spi": self.spi,
            "claim": self.claim,
            "value": self.value,
            "threshold": self.threshold,
            "comparator": self.comparator.value,
            "at": format_timestamp(self.at),
        }


@dataclass(frozen=True)
class GapReport:
    """Difference between a lagging and a leading indicator."""

    gap: Optional[float]
    comparable: bool


class SpiCatalog:
    """Immutable collection of SPI definitions indexed by id."""

    def __init__(self, spis: Iterable[SpiDef], loaded_at: datetime) -> None:
        """Create the catalog.

        :param spis: SPI definitions with unique ids
        :type spis: Iterable[SpiDef]
        :param loaded_at: time the catalog was loaded, used as staleness reference
        :type loaded_at: datetime
        """
        self._spis = {spi.id: spi for spi in spis}
        self.loaded_at = loaded_at

    def __iter__(self) -> Iterator[SpiDef]:
        """Iterate over SPIs in id order.

        :return: iterator of SPI definitions
        :rtype: Iterator[SpiDef]
        """
        return iter([self._spis[spi_id] for spi_id in sorted(self._spis)])

    def __contains__(self, spi_id: object) -> bool:
        """Whether the catalog defines the SPI.

        :param spi_id: SPI id
        :type spi_id: object
        :return: True if defined
        :rtype: bool
        """
        return spi_id in self._spis

    def __len__(self) -> int:
        """Number of SPIs in the catalog.

        :return: number of SPIs
        :rtype: int
        """
        return len(self._spis)

    def __eq__(self, other: object) -> bool:
        """Catalogs are equal when they define the same SPIs and load time.

        :param other: other object
        :type other: object
        :return: True if equal
        :rtype: bool
        """
        if not isinstance(other, SpiCatalog):
            return NotImplemented

        return self._spis == other._spis and self.loaded_at == other.loaded_at

    def __repr__(self) -> str:
        """Representation of the catalog.

        :return: representation
        :rtype: str
        """
        return f"SpiCatalog({len(self)} SPIs, loaded_at={format_timestamp(self.loaded_at)})"

    def get(self, spi_id: str) -> SpiDef:
        """Get SPI by id.

        :param spi_id: SPI id
        :type spi_id: str
        :return: SPI definition
        :rtype: SpiDef
        :raises UnknownSpi: if the id is not in the catalog
        """
        try:
            return self._spis[spi_id]
        except KeyError as exc:
            raise UnknownSpi(f"Unknown SPI '{spi_id}'") from exc

    def for_claim(self, claim_id: str) -> list[SpiDef]:
        """SPIs measuring a claim.

        :param claim_id: claim id
        :type claim_id: str
        :return: SPI definitions in id order
        :rtype: list[SpiDef]
        """
        return [spi for spi in self if spi.claim == claim_id]

    def with_spi(self, spi: SpiDef) -> SpiCatalog:
        """Copy of the catalog with one SPI added or replaced.

        :param spi: SPI definition
        :type spi: SpiDef
        :return: new catalog
        :rtype: SpiCatalog
        """
        return SpiCatalog([*(s for s in self if s.id != spi.id), spi], self.loaded_at)

    def with_threshold(
        self, spi_id: str, threshold: ThresholdSpec, comparator: Comparator
    ) -> SpiCatalog:
        """Copy of the catalog with a new threshold for one SPI.

        :param spi_id: SPI id
        :type spi_id: str
        :param threshold: new threshold
        :type threshold: ThresholdSpec
        :param comparator: new comparator
        :type comparator: Comparator
        :return: new catalog
        :rtype: SpiCatalog
        :raises UnknownSpi: if the id is not in the catalog
        """
        spi = replace(self.get(spi_id), threshold=threshold, comparator=comparator)
        logger.debug("threshold of %s set to %s %s", spi_id, comparator.value, threshold.to_raw())
        return self.with_spi(spi)
