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

"""Exhaustive fixpoint used to cross-check the propagation engine.

The oracle sweeps every edge of the case until no status changes. It is slow and
order-independent, and shares no code with the worklist in the engine.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Iterable

from dscms.argument import NodeStatus, PropagationPolicy, SafetyCase
from dscms.consistency import ChangeScenario, ImpactReport
from dscms.consistency.engine import direct_impact, propagate
from dscms.spi import SpiCatalog, SpiStatus

logger = logging.getLogger(__name__)

Engine = Callable[[SafetyCase, Iterable[str], Iterable[SpiStatus]], ImpactReport]
_LEVEL = {NodeStatus.UNDER_REVIEW: 1, NodeStatus.INVALIDATED: 2}


@dataclass(frozen=True)
class OracleDiff:
    """Differences between the engine and the oracle impact areas."""

    false_negatives: frozenset[str]
    false_positives: frozenset[str]
    status_mismatches: frozenset[str]

    @property
    def agrees(self) -> bool:
        """Whether engine and oracle agree completely.

        :return: True if there is no difference
        :rtype: bool
        """
        return not (self.false_negatives or self.false_positives or self.status_mismatches)


def oracle_impact(
    case: SafetyCase, scenario: ChangeScenario, statuses: Iterable[SpiStatus]
) -> dict[str, NodeStatus]:
    """Compute the impact area by brute force.

    :param case: safety case
    :type case: SafetyCase
    :param scenario: change scenario
    :type scenario: ChangeScenario
    :param statuses: SPI statuses consulted by spi-gated edges
    :type statuses: Iterable[SpiStatus]
    :return: resulting status of every impacted node
    :rtype: dict[str, NodeStatus]
    """
    breached = {s.spi for s in statuses if s.breached} - set(case.acknowledged_spis)

    impacted: dict[str, NodeStatus] = {}
    for spi_id, node_id in case.spi_attachments.items():
        if spi_id in scenario.breached_spis:
            impacted[node_id] = NodeStatus.INVALIDATED
    for node_id, node in case.nodes.items():
        if node.artifacts & scenario.changed_artifacts:
            impacted[node_id] = NodeStatus.INVALIDATED

    changed = True
    sweeps = 0
    while changed:
        changed = False
        sweeps += 1
        for edge in case.edges:
            if impacted.get(edge.src) is not NodeStatus.INVALIDATED:
                continue

            gated_breach = any(
                claim == edge.dst and spi in breached
                for spi, claim in case.spi_attachments.items()
            )
            if edge.policy is PropagationPolicy.INVALIDATE or (
                edge.policy is PropagationPolicy.SPI_GATED and gated_breach
            ):
                result = NodeStatus.INVALIDATED
            else:
                result = NodeStatus.UNDER_REVIEW

            current = impacted.get(edge.dst)
            if current is None or _LEVEL[result] > _LEVEL[current]:
                impacted[edge.dst] = result
                changed = True

    logger.debug("oracle reached fixpoint after %d sweeps", sweeps)
    return impacted


def oracle_compare(
    case: SafetyCase,
    catalog: SpiCatalog,
    scenario: ChangeScenario,
    statuses: Iterable[SpiStatus],
    engine: Engine = propagate,
) -> OracleDiff:
    """Diff the engine's impact area against the oracle.

    :param case: safety case
    :type case: SafetyCase
    :param catalog: SPI catalog
    :type catalog: SpiCatalog
    :param scenario: change scenario
    :type scenario: ChangeScenario
    :param statuses: SPI statuses
    :type statuses: Iterable[SpiStatus]
    :param engine: propagation function under test, defaults to propagate
    :type engine: Engine
    :return: false negatives, false positives and nodes with a different status
    :rtype: OracleDiff
    """
    statuses = list(statuses)
    expected = oracle_impact(case, scenario, statuses)
    report = engine(case, direct_impact(case, catalog, scenario), statuses)
    actual = {node: new for node, (_, new) in report.transitions.items()}

    return OracleDiff(
        false_negatives=frozenset(expected) - frozenset(actual),
        false_positives=frozenset(actual) - frozenset(expected),
        status_mismatches=frozenset(
            node for node in expected.keys() & actual.keys() if expected[node] is not actual[node]
        ),
    )
