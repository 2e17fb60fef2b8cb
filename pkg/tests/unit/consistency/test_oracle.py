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
import random
from dataclasses import replace

import pytest

from dscms.argument import NodeStatus
from dscms.argument.validation import validate_structure
from dscms.consistency import ChangeScenario, ImpactReport
from dscms.consistency.engine import propagate
from dscms.consistency.oracle import oracle_compare, oracle_impact
from tests.unit.utils import catalog_for, chain_case, random_case, spi_status


def direct_only(case, direct, statuses):
    """Engine that never propagates."""
    report = propagate(case, direct, statuses)
    transitions = {
        node: change for node, change in report.transitions.items() if node in report.direct
    }
    return replace(report, indirect=frozenset(), transitions=transitions)


def flag_everything(case, direct, statuses):
    """Engine that downgrades every indirect invalidation to a review flag."""
    report = propagate(case, direct, statuses)
    transitions = {
        node: (old, new if node in report.direct else NodeStatus.UNDER_REVIEW)
        for node, (old, new) in report.transitions.items()
    }
    return replace(report, transitions=transitions)


def test_oracle_impact_chain_case():
    """Test the oracle on a scenario reaching the top claim."""
    statuses = [spi_status("C1-SPI-1", True), spi_status("C2-SPI-1", True)]

    impact = oracle_impact(chain_case(), ChangeScenario({"C2-SPI-1"}), statuses)

    assert impact == {
        "C2": NodeStatus.INVALIDATED,
        "C1": NodeStatus.INVALIDATED,
        "C0": NodeStatus.INVALIDATED,
    }


@pytest.mark.parametrize("seed", range(200))
def test_engine_agrees_with_oracle(seed):
    """Test the engine and the oracle compute the same impact on random cases."""
    case, catalog, scenario, statuses = random_case(random.Random(seed))
    assert validate_structure(case) == []

    diff = oracle_compare(case, catalog, scenario, statuses)

    assert diff.agrees, diff


@pytest.mark.parametrize("seed", range(20))
def test_engine_agrees_with_oracle_large_cases(seed):
    """Test agreement on larger random cases."""
    case, catalog, scenario, statuses = random_case(random.Random(1000 + seed), size=60)

    assert oracle_compare(case, catalog, scenario, statuses).agrees


def test_oracle_detects_missing_propagation():
    """Test an engine that does not propagate is caught with false negatives."""
    case = chain_case()
    scenario = ChangeScenario({"C2-SPI-1"})
    statuses = [spi_status("C2-SPI-1", True)]

    diff = oracle_compare(case, catalog_for(case), scenario, statuses, direct_only)

    assert not diff.agrees
    assert diff.false_negatives == {"C1"}
    assert diff.false_positives == frozenset()


def test_oracle_detects_wrong_status():
    """Test an engine computing the wrong status is caught."""
    case = chain_case()
    scenario = ChangeScenario(changed_artifacts={"detector"})

    diff = oracle_compare(case, catalog_for(case), scenario, [], flag_everything)

    assert diff.status_mismatches == {"E1", "C2"}
    assert diff.false_negatives == frozenset()


def test_oracle_detects_false_positives():
    """Test an engine impacting unrelated nodes is caught."""

    def overreach(case, direct, statuses):
        report = propagate(case, direct, statuses)
        transitions = dict(report.transitions)
        transitions["X1"] = (NodeStatus.VALID, NodeStatus.UNDER_REVIEW)
        return ImpactReport(None, case.version, report.direct, report.indirect, transitions)

    case = chain_case()
    scenario = ChangeScenario({"C3-SPI-1"})

    diff = oracle_compare(case, catalog_for(case), scenario, [], overreach)

    assert diff.false_positives == {"X1"}
    assert not diff.agrees


def test_randomized_cases_find_broken_engine():
    """Test the random cases are rich enough to expose an engine that does not propagate."""
    failures = 0
    for seed in range(50):
        case, catalog, scenario, statuses = random_case(random.Random(seed))
        if not oracle_compare(case, catalog, scenario, statuses, direct_only).agrees:
            failures += 1

    assert failures > 0
