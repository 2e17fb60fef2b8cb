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

"""Governance report document."""
from __future__ import annotations

import logging
from typing import Any, Iterable, Optional

from dscms.argument import SafetyCase
from dscms.consistency import ImpactReport
from dscms.governance import Alert, GateResult, Severity
from dscms.spi import SpiCatalog, SpiKind, SpiStatus
from dscms.spi.evaluate import leading_lagging_gap
from dscms.spi.prioritize import DEFAULT_CUTOFF, RankedSpi, select_priority_spis
from dscms.utils import format_timestamp

logger = logging.getLogger(__name__)

TRACEABILITY: tuple[dict[str, str], ...] = (
    {
        "req": "REQ-001",
        "title": "Early Creation of Safety Cases",
        "feature": "dscms.argument.parser",
        "verification": "inspection",
        "criterion": "the bundled case parses and validates with zero violations",
        "test": "tests/unit/argument/test_parser.py",
    },
    {
        "req": "REQ-002",
        "title": "Consistent Maintenance of Safety Cases",
        "feature": "dscms.consistency.recovery, dscms.workspace",
        "verification": "test",
        "criterion": "every recovery produces a new validated case version kept across restarts",
        "test": "tests/unit/test_workspace.py",
    },
    {
        "req": "REQ-005",
        "title": "Automated Consistency Checks",
        "feature": "dscms.consistency.engine",
        "verification": "test",
        "criterion": "propagation equals the exhaustive fixpoint on randomized cases",
        "test": "tests/unit/consistency/test_oracle.py",
    },
    {
        "req": "REQ-017",
        "title": "SPI Definition and Management",
        "feature": "dscms.spi.catalog",
        "verification": "inspection",
        "criterion": "each SPI has a threshold, update frequency and claim; examples match",
        "test": "tests/unit/spi/test_catalog.py",
    },
    {
        "req": "REQ-018",
        "title": "SPI-Driven Argument Re-Evaluation",
        "feature": "dscms.spi.evaluate, dscms.monitor",
        "verification": "simulation",
        "criterion": "a threshold breach flags the impacted claims in every bundled scenario",
        "test": "tests/scenarios/test_scenarios.py",
    },
    {
        "req": "REQ-019",
        "title": "External Data Feed Integration",
        "feature": "dscms.ingestion.feeds",
        "verification": "test",
        "criterion": "feed records map to catalog SPIs with no unresolved references",
        "test": "tests/unit/ingestion/test_feeds.py",
    },
    {
        "req": "REQ-020",
        "title": "External Data Change Impact",
        "feature": "dscms.monitor",
        "verification": "test",
        "criterion": "accepted observations trigger a consistency check",
        "test": "tests/unit/test_monitor.py",
    },
    {
        "req": "REQ-023",
        "title": "Governance Reporting Interface",
        "feature": "dscms.service.app, dscms.governance.report",
        "verification": "demonstration",
        "criterion": "case, impact, audit and report are served to authorized roles",
        "test": "tests/unit/service/test_app.py",
    },
    {
        "req": "REQ-025",
        "title": "Data Security and Access Control",
        "feature": "dscms.service.auth, dscms.governance.audit",
        "verification": "test",
        "criterion": "unauthorized requests are refused and audit tampering is detected",
        "test": "tests/unit/governance/test_audit.py",
    },
)


def spi_record(status: SpiStatus, catalog: Optional[SpiCatalog]) -> dict[str, Any]:
    """Status of an SPI with its threshold and claim when the catalog defines it.

    :param status: SPI status
    :type status: SpiStatus
    :param catalog: SPI catalog
    :type catalog: Optional[SpiCatalog]
    :return: SPI record
    :rtype: dict[str, Any]
    """
    record: dict[str, Any] = {
        "spi": status.spi,
        "value": status.value,
        "breached": status.breached,
        "stale": status.stale,
    }
    if catalog is not None and status.spi in catalog:
        spi = catalog.get(status.spi)
        record["claim"] = spi.claim
        record["kind"] = spi.kind.value
        record["comparator"] = spi.comparator.value
        record["threshold"] = spi.threshold.to_raw()

    return record


def priority_record(ranked: RankedSpi) -> dict[str, Any]:
    """SPI of the priority quadrant with its derived scores.

    :param ranked: ranked SPI
    :type ranked: RankedSpi
    :return: priority record
    :rtype: dict[str, Any]
    """
    return {
        "spi": ranked.spi.id,
        "claim": ranked.spi.claim,
        "significance": ranked.significance,
        "feasibility": ranked.feasibility,
    }


def gap_records(statuses: Iterable[SpiStatus], catalog: SpiCatalog) -> list[dict[str, Any]]:
    """Gaps between the leading and lagging indicators of each claim.

    Every leading SPI of a claim is paired with every lagging SPI of the same claim. Pairs
    measured in different units or missing a value are left out.

    :param statuses: latest SPI statuses
    :type statuses: Iterable[SpiStatus]
    :param catalog: SPI catalog giving claims and kinds
    :type catalog: SpiCatalog
    :return: gap records ordered by claim, leading then lagging SPI id
    :rtype: list[dict[str, Any]]
    """
    by_spi = {status.spi: status for status in statuses if status.spi in catalog}
    records: list[dict[str, Any]] = []
    for leading in sorted(by_spi):
        spi = catalog.get(leading)
        if spi.kind is not SpiKind.LEADING:
            continue
        for lagging in catalog.for_claim(spi.claim):
            if lagging.kind is not SpiKind.LAGGING or lagging.id not in by_spi:
                continue
            gap = leading_lagging_gap(by_spi[leading], by_spi[lagging.id])
            if gap.gap is None:
                continue
            records.append(
                {"claim": spi.claim, "leading": leading, "lagging": lagging.id, "gap": gap.gap}
            )

    return sorted(records, key=lambda r: (r["claim"], r["leading"], r["lagging"]))


def governance_report(  # pylint: disable=too-many-arguments
    case: SafetyCase,
    statuses: Iterable[SpiStatus],
    alerts: Iterable[Alert],
    gates: Iterable[GateResult],
    impact: Optional[ImpactReport] = None,
    catalog: Optional[SpiCatalog] = None,
    open_recoveries: Iterable[str] = (),
    cutoff: float = DEFAULT_CUTOFF,
) -> dict[str, Any]:
    """Build the governance report.

    The document only depends on its inputs, so two reports of the same snapshot
    serialize to the same bytes.

    :param case: safety case annotated by the last check
    :type case: SafetyCase
    :param statuses: latest SPI statuses
    :type statuses: Iterable[SpiStatus]
    :param alerts: active alerts
    :type alerts: Iterable[Alert]
    :param gates: latest gate results
    :type gates: Iterable[GateResult]
    :param impact: latest impact report, defaults to None
    :type impact: Optional[ImpactReport]
    :param catalog: SPI catalog adding thresholds to SPI entries, defaults to None
    :type catalog: Optional[SpiCatalog]
    :param open_recoveries: open recovery item ids, defaults to ()
    :type open_recoveries: Iterable[str]
    :param cutoff: priority quadrant cut-off on significance and feasibility, defaults to 2.5
    :type cutoff: float
    :return: report document with stable field ordering
    :rtype: dict[str, Any]
    """
    alerts = list(alerts)
    statuses = sorted(statuses, key=lambda status: status.spi)
    top = case.top
    headline = max(
        (alert.severity for alert in alerts), key=lambda s: s.level, default=Severity.NONE
    )
    evaluated_at = max((status.evaluated_at for status in statuses), default=None)

    report = {
        "case_id": case.case_id,
        "case_version": case.version,
        "evaluated_at": format_timestamp(evaluated_at) if evaluated_at else None,
        "headline": {
            "severity": headline.value,
            "top_claim": top.id if top else None,
            "top_claim_status": top.status.value if top else None,
            "requires_argument_rebuild": bool(impact and impact.requires_argument_rebuild),
        },
        "claims": [{"id": claim.id, "status": claim.status.value} for claim in case.claims()],
        "spis": [spi_record(status, catalog) for status in statuses],
        "impact": impact.to_dict() if impact else None,
        "alerts": [alert.to_dict() for alert in alerts],
        "gates": [gate.to_dict() for gate in sorted(gates, key=lambda g: g.gate)],
        "open_recoveries": sorted(open_recoveries),
        "priority_spis": (
            [priority_record(ranked) for ranked in select_priority_spis(catalog, cutoff)]
            if catalog is not None
            else []
        ),
        "leading_lagging_gaps": gap_records(statuses, catalog) if catalog is not None else [],
        "acknowledged_spis": sorted(case.acknowledged_spis),
        "traceability": [dict(entry) for entry in TRACEABILITY],
    }
    logger.debug("governance report for %s v%d built", case.case_id, case.version)
    return report
