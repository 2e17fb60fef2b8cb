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

"""SPI evaluation over windows of observations.

Windows are half-open: a window of w days ending at now covers [now - w, now).
"""
from __future__ import annotations

import logging
from datetime import datetime, timedelta
from statistics import fmean
from typing import Iterable, Mapping, Optional, Sequence, Union

from dscms.ingestion import Observation, ObservationStore
from dscms.spi import Aggregation, BreachEvent, GapReport, SpiCatalog, SpiDef, SpiStatus

logger = logging.getLogger(__name__)


def in_window(obs: Iterable[Observation], end: datetime, window_days: int) -> list[Observation]:
    """Observations inside the window ending at end.

    :param obs: observations
    :type obs: Iterable[Observation]
    :param end: exclusive end of the window
    :type end: datetime
    :param window_days: window length in days
    :type window_days: int
    :return: observations with end - window_days <= ts < end
    :rtype: list[Observation]
    """
    start = end - timedelta(days=window_days)
    return [o for o in obs if start <= o.ts < end]


def mom_percent_change(
    obs: Sequence[Observation], now: datetime, window_days: int
) -> Optional[float]:
    """Percent change of the window sum against the window before it.

    :param obs: observations sorted by timestamp
    :type obs: Sequence[Observation]
    :param now: evaluation time
    :type now: datetime
    :param window_days: window length in days
    :type window_days: int
    :return: percent change, None when the previous window sums to zero
    :rtype: Optional[float]
    """
    current = sum(o.value for o in in_window(obs, now, window_days))
    previous = sum(
        o.value for o in in_window(obs, now - timedelta(days=window_days), window_days)
    )
    if previous == 0:
        return None

    return 100 * (current - previous) / previous


def aggregate(
    spi: SpiDef, obs: Sequence[Observation], now: datetime
) -> tuple[Optional[float], int]:
    """Aggregate observations of an SPI.

    With no observations at all the value is absent. Counts and sums of an empty
    window are zero, while means and latest values of an empty window are absent.

    :param spi: SPI definition
    :type spi: SpiDef
    :param obs: observations of the SPI sorted by timestamp
    :type obs: Sequence[Observation]
    :param now: evaluation time
    :type now: datetime
    :return: aggregated value and number of contributing observations
    :rtype: tuple[Optional[float], int]
    """
    if spi.aggregation is Aggregation.MOM_PERCENT_CHANGE:
        contributing = in_window(obs, now, 2 * spi.window_days)
        return mom_percent_change(obs, now, spi.window_days), len(contributing)

    window = in_window(obs, now, spi.window_days)
    values = [o.value for o in window]
    match spi.aggregation:
        case Aggregation.COUNT_WINDOW:
            value: Optional[float] = float(len(values)) if obs else None
        case Aggregation.SUM_WINDOW:
            value = float(sum(values)) if obs else None
        case Aggregation.LATEST:
            value = values[-1] if values else None
        case Aggregation.MEAN_WINDOW | Aggregation.MEAN_DELTA_DAYS:
            value = fmean(values) if values else None

    return value, len(values)


def is_stale(spi: SpiDef, obs: Sequence[Observation], now: datetime, loaded_at: datetime) -> bool:
    """Whether the SPI has not been updated within its update frequency.

    The reference is the newest observation at or before now, or the catalog load
    time when there is none.

    :param spi: SPI definition
    :type spi: SpiDef
    :param obs: observations of the SPI sorted by timestamp
    :type obs: Sequence[Observation]
    :param now: evaluation time
    :type now: datetime
    :param loaded_at: catalog load time
    :type loaded_at: datetime
    :return: True if stale
    :rtype: bool
    """
    past = [o.ts for o in obs if o.ts <= now]
    reference = past[-1] if past else loaded_at
    return now - reference > timedelta(days=spi.update_frequency_days)


def evaluate(
    spi: SpiDef,
    obs: Sequence[Observation],
    now: datetime,
    loaded_at: Optional[datetime] = None,
) -> SpiStatus:
    """Evaluate one SPI.

    :param spi: SPI definition
    :type spi: SpiDef
    :param obs: observations of the SPI sorted by timestamp
    :type obs: Sequence[Observation]
    :param now: evaluation time
    :type now: datetime
    :param loaded_at: catalog load time used as staleness reference, defaults to now
    :type loaded_at: Optional[datetime]
    :return: SPI status
    :rtype: SpiStatus
    """
    value, contributing = aggregate(spi, obs, now)
    return SpiStatus(
        spi=spi.id,
        value=value,
        breached=spi.breaches(value),
        stale=is_stale(spi, obs, now, now if loaded_at is None else loaded_at),
        evaluated_at=now,
        contributing_observation_count=contributing,
        unit=spi.unit,
    )


def evaluate_all(
    catalog: SpiCatalog,
    store: ObservationStore,
    now: datetime,
    previous: Optional[Union[Mapping[str, SpiStatus], Iterable[SpiStatus]]] = None,
) -> tuple[list[SpiStatus], list[BreachEvent]]:
    """Evaluate every SPI of the catalog.

    Breach events are edge-triggered: an SPI that was already breached in the
    previous evaluation does not raise a new event.

    :param catalog: SPI catalog
    :type catalog: SpiCatalog
    :param store: observation store
    :type store: ObservationStore
    :param now: evaluation time
    :type now: datetime
    :param previous: statuses of the previous evaluation, defaults to None
    :type previous: Optional[Union[Mapping[str, SpiStatus], Iterable[SpiStatus]]]
    :return: statuses and breach events, both ordered by SPI id
    :rtype: tuple[list[SpiStatus], list[BreachEvent]]
    """
    if previous is None:
        previous = {}
    elif not isinstance(previous, Mapping):
        previous = {status.spi: status for status in previous}

    statuses, events = [], []
    for spi in catalog:
        status = evaluate(spi, store.for_spi(spi.id), now, catalog.loaded_at)
        statuses.append(status)
        if spi.threshold.trend_only and status.value is not None:
            logger.info("trend %s: %s (%s)", spi.id, status.value, spi.unit.value)

        was_breached = spi.id in previous and previous[spi.id].breached
        if status.breached and not was_breached:
            events.append(
                BreachEvent(
                    spi=spi.id,
                    claim=spi.claim,
                    value=status.value,  # type: ignore[arg-type]
                    threshold=spi.threshold.value,  # type: ignore[arg-type]
                    comparator=spi.comparator,
                    at=now,
                )
            )
            logger.warning(
                "SPI %s breached: %s %s %s",
                spi.id,
                status.value,
                spi.comparator.value,
                spi.threshold.to_raw(),
            )

    return statuses, events


def leading_lagging_gap(leading: SpiStatus, lagging: SpiStatus) -> GapReport:
    """Compare a leading indicator with the lagging one it anticipates.

    :param leading: status of the leading indicator
    :type leading: SpiStatus
    :param lagging: status of the lagging indicator
    :type lagging: SpiStatus
    :return: gap = lagging - leading, absent when not comparable or a value is missing
    :rtype: GapReport
    """
    if leading.unit is not lagging.unit:
        return GapReport(gap=None, comparable=False)
    if leading.value is None or lagging.value is None:
        return GapReport(gap=None, comparable=True)

    return GapReport(gap=lagging.value - leading.value, comparable=True)
