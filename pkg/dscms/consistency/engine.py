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

"""Consistency check: direct impact, propagation and revalidation."""
from __future__ import annotations

import heapq
import logging
from dataclasses import dataclass, replace
from datetime import datetime
from typing import Iterable, Mapping, Optional

from dscms.argument import NodeStatus, PropagationPolicy, Relationship, SafetyCase
from dscms.consistency import (
    DIRECT_RULE,
    ChangeScenario,
    ImpactReport,
    PropagationStep,
    RevalidationReport,
)
from dscms.exceptions import UnknownArtifact, UnknownSpi
from dscms.ingestion import ObservationStore
from dscms.spi import BreachEvent, SpiCatalog, SpiStatus
from dscms.spi.evaluate import evaluate_all

logger = logging.getLogger(__name__)


def breached_spis(statuses: Iterable[SpiStatus]) -> frozenset[str]:
    """Ids of breached SPIs.

    :param statuses: SPI statuses
    :type statuses: Iterable[SpiStatus]
    :return: breached SPI ids
    :rtype: frozenset[str]
    """
    return frozenset(status.spi for status in statuses if status.breached)


def direct_impact(
    case: SafetyCase, catalog: SpiCatalog, scenario: ChangeScenario
) -> frozenset[str]:
    """Nodes directly impacted by a change scenario.

    :param case: safety case
    :type case: SafetyCase
    :param catalog: SPI catalog
    :type catalog: SpiCatalog
    :param scenario: change scenario
    :type scenario: ChangeScenario
    :return: nodes with an attached breached SPI or tagged with a changed artifact
    :rtype: frozenset[str]
    :raises UnknownSpi: if a breached SPI is not in the catalog or not attached to a node
    :raises UnknownArtifact: if no node references a changed artifact
    """
    direct = set()
    for spi_id in sorted(scenario.breached_spis):
        catalog.get(spi_id)
        node_id = case.spi_attachments.get(spi_id)
        if node_id is None:
            raise UnknownSpi(f"SPI '{spi_id}' is not attached to any node of '{case.case_id}'")
        direct.add(node_id)

    for artifact in sorted(scenario.changed_artifacts):
        tagged = case.tagged_with_artifact(artifact)
        if not tagged:
            raise UnknownArtifact(f"No node of '{case.case_id}' references artifact '{artifact}'")
        direct.update(tagged)

    logger.debug("direct impact: %s", sorted(direct))
    return frozenset(direct)


def apply_rule(
    case: SafetyCase, edge: Relationship, breached: frozenset[str]
) -> NodeStatus:
    """Status an impacted source imposes on the edge destination.

    :param case: safety case
    :type case: SafetyCase
    :param edge: edge leaving an invalidated node
    :type edge: Relationship
    :param breached: effective breached SPI ids
    :type breached: frozenset[str]
    :return: status of the destination required by the edge policy
    :rtype: NodeStatus
    """
    match edge.policy:
        case PropagationPolicy.INVALIDATE:
            return NodeStatus.INVALIDATED
        case PropagationPolicy.SPI_GATED if breached.intersection(case.attached_spis(edge.dst)):
            return NodeStatus.INVALIDATED
        case _:
            return NodeStatus.UNDER_REVIEW


def propagate(
    case: SafetyCase, direct: Iterable[str], statuses: Iterable[SpiStatus]
) -> ImpactReport:
    """Propagate impact from directly impacted nodes along their outgoing edges.

    The worklist holds invalidated nodes and is processed in node id order. Nodes
    flagged for review are terminal.

    :param case: safety case
    :type case: SafetyCase
    :param direct: directly impacted node ids
    :type direct: Iterable[str]
    :param statuses: SPI statuses consulted by spi-gated edges
    :type statuses: Iterable[SpiStatus]
    :return: impact report without a scenario attached
    :rtype: ImpactReport
    """
    breached = case.effective_breaches(breached_spis(statuses))
    direct = frozenset(direct)
    impacted: dict[str, NodeStatus] = {}
    trace: list[PropagationStep] = []
    worklist: list[str] = []

    for node_id in sorted(direct):
        case.node(node_id)
        impacted[node_id] = NodeStatus.INVALIDATED
        trace.append(PropagationStep(node_id, DIRECT_RULE, NodeStatus.INVALIDATED))
        heapq.heappush(worklist, node_id)

    analysed: set[str] = set()
    while worklist:
        current = heapq.heappop(worklist)
        if current in analysed:
            continue
        analysed.add(current)

        for edge in case.outgoing(current):
            result = apply_rule(case, edge, breached)
            trace.append(PropagationStep(edge.dst, edge.policy.value, result, edge.label))
            previous = impacted.get(edge.dst)
            if previous is None or result.rank > previous.rank:
                impacted[edge.dst] = result
            if result is NodeStatus.INVALIDATED and edge.dst not in analysed:
                heapq.heappush(worklist, edge.dst)

    top = case.top
    report = ImpactReport(
        scenario=None,
        case_version=case.version,
        direct=direct,
        indirect=frozenset(impacted) - direct,
        transitions={
            node_id: (case.nodes[node_id].status, status)
            for node_id, status in sorted(impacted.items())
        },
        trace=tuple(trace),
        requires_argument_rebuild=top is not None
        and impacted.get(top.id) is NodeStatus.INVALIDATED,
    )
    logger.debug(
        "propagation: invalidated %s, under review %s", report.invalidated, report.under_review
    )
    return report


def scenario_from_statuses(
    case: SafetyCase, statuses: Iterable[SpiStatus], changed_artifacts: Iterable[str] = ()
) -> Optional[ChangeScenario]:
    """Build the change scenario of an evaluation.

    Acknowledged breaches are left out.

    :param case: safety case
    :type case: SafetyCase
    :param statuses: SPI statuses
    :type statuses: Iterable[SpiStatus]
    :param changed_artifacts: changed artifact references, defaults to ()
    :type changed_artifacts: Iterable[str]
    :return: change scenario, None if nothing changed
    :rtype: Optional[ChangeScenario]
    """
    breached = case.effective_breaches(breached_spis(statuses))
    artifacts = frozenset(changed_artifacts)
    if not breached and not artifacts:
        return None

    return ChangeScenario(breached, artifacts)


def check_statuses(
    case: SafetyCase,
    catalog: SpiCatalog,
    statuses: Iterable[SpiStatus],
    changed_artifacts: Iterable[str] = (),
) -> ImpactReport:
    """Run the consistency check on already evaluated SPIs.

    :param case: safety case
    :type case: SafetyCase
    :param catalog: SPI catalog
    :type catalog: SpiCatalog
    :param statuses: SPI statuses
    :type statuses: Iterable[SpiStatus]
    :param changed_artifacts: changed artifact references, defaults to ()
    :type changed_artifacts: Iterable[str]
    :return: impact report
    :rtype: ImpactReport
    """
    statuses = list(statuses)
    scenario = scenario_from_statuses(case, statuses, changed_artifacts)
    if scenario is None:
        return ImpactReport(scenario=None, case_version=case.version)

    report = propagate(case, direct_impact(case, catalog, scenario), statuses)
    return replace(report, scenario=scenario)


def check(
    case: SafetyCase,
    catalog: SpiCatalog,
    store: ObservationStore,
    now: datetime,
    changed_artifacts: Iterable[str] = (),
) -> ImpactReport:
    """Evaluate every SPI and compute the impact of breaches on the case.

    :param case: safety case
    :type case: SafetyCase
    :param catalog: SPI catalog
    :type catalog: SpiCatalog
    :param store: observation store
    :type store: ObservationStore
    :param now: evaluation time
    :type now: datetime
    :param changed_artifacts: changed artifact references, defaults to ()
    :type changed_artifacts: Iterable[str]
    :return: impact report
    :rtype: ImpactReport
    """
    statuses, _ = evaluate_all(catalog, store, now)
    return check_statuses(case, catalog, statuses, changed_artifacts)


@dataclass(frozen=True)
class CheckResult:
    """Everything one consistency check produced."""

    case: SafetyCase
    statuses: list[SpiStatus]
    events: list[BreachEvent]
    report: ImpactReport


def lapse_acknowledgements(case: SafetyCase, statuses: Iterable[SpiStatus]) -> SafetyCase:
    """Drop acknowledgements of SPIs that are no longer breached.

    :param case: safety case
    :type case: SafetyCase
    :param statuses: SPI statuses
    :type statuses: Iterable[SpiStatus]
    :return: case keeping only acknowledgements of breached SPIs
    :rtype: SafetyCase
    """
    kept = case.acknowledged_spis & breached_spis(statuses)
    if kept == case.acknowledged_spis:
        return case

    logger.info("acknowledgements lapsed: %s", sorted(case.acknowledged_spis - kept))
    return replace(case, acknowledged_spis=kept)


def annotate_case(
    case: SafetyCase, report: ImpactReport, statuses: Iterable[SpiStatus]
) -> SafetyCase:
    """Write the outcome of a check back onto node statuses.

    Impacted nodes take their status from the report. Claims with a stale attached
    SPI become stale and every other node is valid.

    :param case: safety case
    :type case: SafetyCase
    :param report: impact report of the check
    :type report: ImpactReport
    :param statuses: SPI statuses of the check
    :type statuses: Iterable[SpiStatus]
    :return: case with updated statuses, version unchanged
    :rtype: SafetyCase
    """
    stale_spis = {status.spi for status in statuses if status.stale}
    new_statuses = {}
    for node_id in case.node_ids:
        if node_id in report.transitions:
            new_statuses[node_id] = report.transitions[node_id][1]
        elif stale_spis.intersection(case.attached_spis(node_id)):
            new_statuses[node_id] = NodeStatus.STALE
        else:
            new_statuses[node_id] = NodeStatus.VALID

    return case.with_statuses(new_statuses)


def run_check(
    case: SafetyCase,
    catalog: SpiCatalog,
    store: ObservationStore,
    now: datetime,
    previous: Optional[Mapping[str, SpiStatus]] = None,
    changed_artifacts: Iterable[str] = (),
) -> CheckResult:
    """Run a full check and annotate the case with its outcome.

    :param case: safety case
    :type case: SafetyCase
    :param catalog: SPI catalog
    :type catalog: SpiCatalog
    :param store: observation store
    :type store: ObservationStore
    :param now: evaluation time
    :type now: datetime
    :param previous: statuses of the previous evaluation, defaults to None
    :type previous: Optional[Mapping[str, SpiStatus]]
    :param changed_artifacts: changed artifact references, defaults to ()
    :type changed_artifacts: Iterable[str]
    :return: annotated case, statuses, breach events and impact report
    :rtype: CheckResult
    """
    statuses, events = evaluate_all(catalog, store, now, previous)
    case = lapse_acknowledgements(case, statuses)
    report = check_statuses(case, catalog, statuses, changed_artifacts)
    logger.info(
        "check of %s v%d at %s: %d invalidated, %d under review",
        case.case_id,
        case.version,
        now.isoformat(),
        len(report.invalidated),
        len(report.under_review),
    )
    return CheckResult(annotate_case(case, report, statuses), statuses, events, report)


def revalidate(
    case: SafetyCase, catalog: SpiCatalog, store: ObservationStore, now: datetime
) -> RevalidationReport:
    """Re-run the consistency check after a recovery.

    :param case: safety case
    :type case: SafetyCase
    :param catalog: SPI catalog
    :type catalog: SpiCatalog
    :param store: observation store
    :type store: ObservationStore
    :param now: evaluation time
    :type now: datetime
    :return: clean when the impact area is empty, with the residual report
    :rtype: RevalidationReport
    """
    residual = check(case, catalog, store, now)
    return RevalidationReport(clean=residual.empty, residual=residual)
