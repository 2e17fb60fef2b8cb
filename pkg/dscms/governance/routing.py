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

"""Severity classification of impact reports and alert routing."""
from __future__ import annotations

import logging
from typing import Iterable, Optional

from dscms.argument import NodeKind, SafetyCase
from dscms.consistency import ImpactReport
from dscms.governance import Alert, InsightCategory, RequiredAction, Role, Severity

logger = logging.getLogger(__name__)

CATEGORY_TAGS = {
    "capability-uplift-indicator": InsightCategory.CAPABILITY_INCREASE,
    "systemic-threat-indicator": InsightCategory.SYSTEMIC_IMPACT,
    "process-indicator": InsightCategory.INTERNAL_PROCESS,
}
CATEGORY_SEVERITY = {
    InsightCategory.CAPABILITY_INCREASE: Severity.HIGHEST,
    InsightCategory.SYSTEMIC_IMPACT: Severity.HIGH_MEDIUM,
    InsightCategory.INTERNAL_PROCESS: Severity.MEDIUM_LOW,
}
ROUTES: dict[Severity, tuple[frozenset[Role], tuple[RequiredAction, ...]]] = {
    Severity.MEDIUM_LOW: (
        frozenset({Role.SAFETY_TEAM}),
        (RequiredAction.UPDATE_EVALUATIONS, RequiredAction.LOG_IN_REPORT),
    ),
    Severity.HIGH_MEDIUM: (
        frozenset({Role.RESPONSIBLE_SCALING_OFFICER, Role.EXECUTIVE_LEADERSHIP, Role.SAFETY_TEAM}),
        (RequiredAction.NOTIFY_RSO_CEO, RequiredAction.FULL_CAPABILITY_REEVALUATION),
    ),
    Severity.HIGHEST: (
        frozenset(Role),
        (
            RequiredAction.PAUSE_TRAINING_OR_DEPLOYMENT,
            RequiredAction.RSP_REEVALUATION,
            RequiredAction.FULL_CAPABILITY_REEVALUATION,
            RequiredAction.NOTIFY_RSO_CEO,
        ),
    ),
}
ASL_HINTS = {
    Severity.HIGHEST: "assess advancement to the next AI Security Level",
    Severity.HIGH_MEDIUM: "review AI Security Level thresholds",
}


def classify(
    report: ImpactReport, case: SafetyCase
) -> tuple[frozenset[InsightCategory], Severity]:
    """Derive insight categories and severity from the invalidated claims.

    :param report: impact report computed against the case
    :type report: ImpactReport
    :param case: safety case
    :type case: SafetyCase
    :return: categories and the highest severity among them
    :rtype: tuple[frozenset[InsightCategory], Severity]
    """
    categories = set()
    for node_id in report.invalidated:
        node = case.nodes.get(node_id)
        if node is None or node.kind is not NodeKind.CLAIM:
            continue
        categories.update(CATEGORY_TAGS[tag] for tag in node.tags if tag in CATEGORY_TAGS)

    severity = max(
        (CATEGORY_SEVERITY[c] for c in categories), key=lambda s: s.level, default=Severity.NONE
    )
    logger.debug(
        "classified report of v%d: %s, %s",
        report.case_version,
        sorted(c.value for c in categories),
        severity.value,
    )
    return frozenset(categories), severity


def route(
    severity: Severity,
    categories: Iterable[InsightCategory],
    case_version: Optional[int] = None,
    impact: Optional[str] = None,
) -> Optional[Alert]:
    """Route an alert to its recipients with its required actions.

    :param severity: impact severity
    :type severity: Severity
    :param categories: insight categories
    :type categories: Iterable[InsightCategory]
    :param case_version: version of the case the alert refers to, defaults to None
    :type case_version: Optional[int]
    :param impact: reference of the impact report behind the alert, defaults to None
    :type impact: Optional[str]
    :return: alert, None when the severity is none
    :rtype: Optional[Alert]
    """
    if severity is Severity.NONE:
        return None

    recipients, actions = ROUTES[severity]
    alert = Alert(
        severity=severity,
        categories=frozenset(categories),
        recipients=recipients,
        required_actions=actions,
        asl_hint=ASL_HINTS.get(severity),
        case_version=case_version,
        impact=impact,
    )
    logger.warning(
        "%s alert for %s", severity.value, ", ".join(sorted(r.value for r in recipients))
    )
    return alert
