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

"""Governance types: insight categories, severities, roles, alerts and gates."""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Mapping, Optional


class InsightCategory(str, Enum):
    """Kind of insight an invalidated claim gives about the system."""

    CAPABILITY_INCREASE = "capability_increase"
    SYSTEMIC_IMPACT = "systemic_impact"
    INTERNAL_PROCESS = "internal_process"


class Severity(str, Enum):
    """Impact severity; members are declared from lowest to highest."""

    NONE = "none"
    MEDIUM_LOW = "medium_low"
    HIGH_MEDIUM = "high_medium"
    HIGHEST = "highest"

    @property
    def level(self) -> int:
        """Position of the severity in the total order.

        :return: 0 for none up to 3 for highest
        :rtype: int
        """
        return list(Severity).index(self)


class Role(str, Enum):
    """Governance roles receiving alerts and accessing the service."""

    RESPONSIBLE_SCALING_OFFICER = "responsible_scaling_officer"
    EXECUTIVE_LEADERSHIP = "executive_leadership"
    SAFETY_TEAM = "safety_team"
    EXTERNAL_OVERSIGHT = "external_oversight"


class RequiredAction(str, Enum):
    """Action codes an alert requires from its recipients."""

    LOG_IN_REPORT = "log_in_report"
    NOTIFY_RSO_CEO = "notify_rso_ceo"
    FULL_CAPABILITY_REEVALUATION = "full_capability_reevaluation"
    PAUSE_TRAINING_OR_DEPLOYMENT = "pause_training_or_deployment"
    RSP_REEVALUATION = "rsp_reevaluation"
    UPDATE_EVALUATIONS = "update_evaluations"


@dataclass(frozen=True)
class Alert:
    """Routed alert for one impact report."""

    severity: Severity
    categories: frozenset[InsightCategory]
    recipients: frozenset[Role]
    required_actions: tuple[RequiredAction, ...]
    asl_hint: Optional[str] = None
    case_version: Optional[int] = None
    # reference of the impact report; two routings of the same impact are the same alert
    impact: Optional[str] = field(default=None, compare=False)

    def to_dict(self) -> dict[str, Any]:
        """Serialize the alert.

        :return: alert record
        :rtype: dict[str, Any]
        """
        return {
            "severity": self.severity.value,
            "categories": sorted(category.value for category in self.categories),
            "recipients": sorted(role.value for role in self.recipients),
            "required_actions": [action.value for action in self.required_actions],
            "asl_hint": self.asl_hint,
            "case_version": self.case_version,
            "impact": self.impact,
        }

    @classmethod
    def from_dict(cls, record: Mapping[str, Any]) -> Alert:
        """Load alert from its serialized form.

        :param record: alert record
        :type record: Mapping[str, Any]
        :return: alert
        :rtype: Alert
        """
        return cls(
            severity=Severity(record["severity"]),
            categories=frozenset(InsightCategory(c) for c in record["categories"]),
            recipients=frozenset(Role(r) for r in record["recipients"]),
            required_actions=tuple(RequiredAction(a) for a in record["required_actions"]),
            asl_hint=record.get("asl_hint"),
            case_version=record.get("case_version"),
            impact=record.get("impact"),
        )


@dataclass(frozen=True)
class GateDef:
    """Lifecycle decision gate configuration."""

    id: str
    stage: str
    description: str = ""


@dataclass(frozen=True)
class GateResult:
    """Outcome of a decision gate; passes iff there are no blockers."""

    gate: str
    blockers: tuple[str, ...] = ()
    stage: str = ""

    @property
    def passed(self) -> bool:
        """Whether the gate passed.

        :return: True if nothing blocks the gate
        :rtype: bool
        """
        return not self.blockers

    def to_dict(self) -> dict[str, Any]:
        """Serialize the gate result.

        :return: gate result record
        :rtype: dict[str, Any]
        """
        return {
            "gate": self.gate,
            "stage": self.stage,
            "passed": self.passed,
            "blockers": list(self.blockers),
        }
