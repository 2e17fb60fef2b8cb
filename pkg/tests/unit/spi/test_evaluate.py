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
import logging

import pytest

from dscms.ingestion import ObservationStore
from dscms.spi import Aggregation, Comparator, SpiCatalog, ThresholdSpec, Unit
from dscms.spi.evaluate import (
    aggregate,
    evaluate,
    evaluate_all,
    in_window,
    is_stale,
    leading_lagging_gap,
    mom_percent_change,
)
from tests.unit.utils import LOADED_AT, NOW, make_spi, obs, spi_status, ts


def series(*points):
    """Observations of C1-SPI-1 from (days before NOW, value) pairs, sorted by time."""
    return sorted((obs("C1-SPI-1", ts(day), value) for day, value in points), key=lambda o: o.ts)


def test_in_window_is_half_open():
    """Test the window includes its start and excludes its end."""
    observations = series((30.001, 1), (30, 2), (15, 3), (0, 4))

    assert [o.value for o in in_window(observations, NOW, 30)] == [2, 3]


@pytest.mark.parametrize(
    "aggregation, points, exp_value, exp_count",
    [
        (Aggregation.COUNT_WINDOW, [(1, 1), (2, 1), (40, 1)], 2.0, 2),
        (Aggregation.COUNT_WINDOW, [(40, 1)], 0.0, 0),
        (Aggregation.COUNT_WINDOW, [], None, 0),
        (Aggregation.SUM_WINDOW, [(1, 3), (2, 4.5), (40, 100)], 7.5, 2),
        (Aggregation.SUM_WINDOW, [(40, 100)], 0.0, 0),
        (Aggregation.SUM_WINDOW, [], None, 0),
        (Aggregation.MEAN_WINDOW, [(1, 2), (2, 4)], 3.0, 2),
        (Aggregation.MEAN_WINDOW, [(40, 2)], None, 0),
        (Aggregation.MEAN_DELTA_DAYS, [(3, 5), (4, 9)], 7.0, 2),
        (Aggregation.LATEST, [(5, 1), (2, 9), (40, 3)], 9, 2),
        (Aggregation.LATEST, [(40, 3)], None, 0),
        (Aggregation.MOM_PERCENT_CHANGE, [(1, 5), (2, 6), (40, 10)], 10.0, 3),
        (Aggregation.MOM_PERCENT_CHANGE, [(1, 5), (40, 10), (70, 7)], -50.0, 2),
        (Aggregation.MOM_PERCENT_CHANGE, [(1, 5)], None, 1),
    ],
)
def test_aggregate(aggregation, points, exp_value, exp_count):
    """Test every aggregation over a 30 days window."""
    spi = make_spi(aggregation=aggregation, unit=Unit.PERCENT)

    assert aggregate(spi, series(*points), NOW) == (exp_value, exp_count)


def test_mom_percent_change_zero_previous():
    """Test the change is absent when the previous window sums to zero."""
    assert mom_percent_change(series((1, 5), (40, 0)), NOW, 30) is None
    assert mom_percent_change(series((40, 4)), NOW, 30) == -100.0


@pytest.mark.parametrize(
    "points, loaded_at, exp_stale",
    [
        ([(30, 1)], NOW, False),
        ([(31, 1)], NOW, True),
        ([(31, 1), (2, 1)], NOW, False),
        # future observations are not a reference
        ([(31, 1), (-5, 1)], NOW, True),
        ([], ts(30), False),
        ([], ts(31), True),
    ],
)
def test_is_stale(points, loaded_at, exp_stale):
    """Test staleness against the newest past observation or the catalog load time."""
    assert is_stale(make_spi(), series(*points), NOW, loaded_at) is exp_stale


def test_evaluate():
    """Test evaluating one SPI."""
    spi = make_spi(unit=Unit.COUNT)

    status = evaluate(spi, series(*[(day, 1) for day in range(1, 6)]), NOW, LOADED_AT)

    assert status.spi == "C1-SPI-1"
    assert status.value == 5.0
    assert status.breached is True
    assert status.stale is False
    assert status.evaluated_at == NOW
    assert status.contributing_observation_count == 5
    assert status.unit is Unit.COUNT


def test_evaluate_without_observations():
    """Test an SPI without observations is absent and not breached."""
    status = evaluate(make_spi(), [], NOW)

    assert status.value is None
    assert status.breached is False
    # without a load time the evaluation time is the reference
    assert status.stale is False


def test_evaluate_all_breach_events_are_edge_triggered():
    """Test a breach raises one event until the SPI recovers."""
    catalog = SpiCatalog([make_spi("C1-SPI-1"), make_spi("C2-SPI-1", "C2")], LOADED_AT)
    store = ObservationStore(series(*[(day, 1) for day in range(1, 6)]))

    statuses, events = evaluate_all(catalog, store, NOW)

    assert [s.spi for s in statuses] == ["C1-SPI-1", "C2-SPI-1"]
    assert [s.breached for s in statuses] == [True, False]
    assert [e.to_dict() for e in events] == [
        {
            "spi": "C1-SPI-1",
            "claim": "C1",
            "value": 5.0,
            "threshold": 5.0,
            "comparator": "gte",
            "at": "2025-03-01T00:00:00Z",
        }
    ]
    assert evaluate_all(catalog, store, NOW, statuses)[1] == []
    assert evaluate_all(catalog, store, NOW, {s.spi: s for s in statuses})[1] == []

    recovered = [spi_status("C1-SPI-1", breached=False)]
    assert len(evaluate_all(catalog, store, NOW, recovered)[1]) == 1


def test_evaluate_all_trend_only(caplog):
    """Test trend-only SPIs are reported but never breach."""
    spi = make_spi(threshold=ThresholdSpec(None), comparator=Comparator.GT)
    store = ObservationStore(series((1, 1), (2, 1)))

    with caplog.at_level(logging.INFO):
        statuses, events = evaluate_all(SpiCatalog([spi], LOADED_AT), store, NOW)

    assert statuses[0].value == 2.0
    assert not statuses[0].breached
    assert events == []
    assert "trend C1-SPI-1: 2.0 (count)" in caplog.text


@pytest.mark.parametrize(
    "leading, lagging, exp_gap, exp_comparable",
    [
        (spi_status("L", value=2), spi_status("G", value=5), 3, True),
        (spi_status("L", value=5), spi_status("G", value=2), -3, True),
        (spi_status("L"), spi_status("G", value=2), None, True),
        (spi_status("L", value=2), spi_status("G", value=5, unit=Unit.DAYS), None, False),
    ],
)
def test_leading_lagging_gap(leading, lagging, exp_gap, exp_comparable):
    """Test the gap between a leading and a lagging indicator."""
    report = leading_lagging_gap(leading, lagging)

    assert report.gap == exp_gap
    assert report.comparable is exp_comparable
