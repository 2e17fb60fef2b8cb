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

"""SPI prioritization by significance and feasibility."""
from __future__ import annotations

import logging
from dataclasses import dataclass, fields
from statistics import fmean
from typing import Iterable

from dscms.exceptions import PrioritizationError
from dscms.spi import PrioritizationScore, SpiDef

DEFAULT_CUTOFF = 2.5
MIN_SCORE, MAX_SCORE = 0, 5

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class RankedSpi:
    """SPI with its derived significance and feasibility."""

    spi: SpiDef
    significance: float
    feasibility: float


def prioritize(score: PrioritizationScore) -> tuple[float, float]:
    """Average the criteria dimensions into significance and feasibility.

    :param score: prioritization score
    :type score: PrioritizationScore
    :return: significance and feasibility rounded to 2 decimal places
    :rtype: tuple[float, float]
    :raises PrioritizationError: if a dimension is not an integer between 0 and 5
    """
    for dimension in fields(score):
        value = getattr(score, dimension.name)
        if isinstance(value, bool) or not isinstance(value, int):
            raise PrioritizationError(f"{dimension.name} must be an integer, got {value!r}")
        if not MIN_SCORE <= value <= MAX_SCORE:
            raise PrioritizationError(
                f"{dimension.name} must be between {MIN_SCORE} and {MAX_SCORE}, got {value}"
            )

    return (
        round(fmean(score.significance_dimensions), 2),
        round(fmean(score.feasibility_dimensions), 2),
    )


def rank_spis(spis: Iterable[SpiDef]) -> list[RankedSpi]:
    """Rank scored SPIs, most significant first.

    SPIs without a prioritization score are left out.

    :param spis: SPI definitions
    :type spis: Iterable[SpiDef]
    :return: SPIs by descending significance, then feasibility, then ascending id
    :rtype: list[RankedSpi]
    """
    ranked = [
        RankedSpi(spi, *prioritize(spi.priority)) for spi in spis if spi.priority is not None
    ]
    return sorted(ranked, key=lambda r: (-r.significance, -r.feasibility, r.spi.id))


def select_priority_spis(
    spis: Iterable[SpiDef], cutoff: float = DEFAULT_CUTOFF
) -> list[RankedSpi]:
    """Select SPIs in the high-significance and high-feasibility quadrant.

    :param spis: SPI definitions
    :type spis: Iterable[SpiDef]
    :param cutoff: minimum significance and feasibility, defaults to 2.5
    :type cutoff: float
    :return: ranked SPIs scoring at least the cutoff on both axes
    :rtype: list[RankedSpi]
    """
    selected = [r for r in rank_spis(spis) if r.significance >= cutoff and r.feasibility >= cutoff]
    logger.debug("%d SPI(s) selected with cutoff %s", len(selected), cutoff)
    return selected
