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

"""Change scenarios, impact reports and recovery actions."""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping, Optional, Union

from dscms.argument import ArgNode, NodeStatus, PropagationPolicy, RelationKind
from dscms.exceptions import InvalidChangeScenario
from dscms.spi import Comparator, ThresholdSpec
from dscms.utils import canonical_json

DIRECT_RULE = "direct"


@dataclass(frozen=True)
class ChangeScenario:
    """SPI breaches and changed development artifacts to check the case against."""

    breached_spis: frozenset[str] = frozenset()
    changed_artifacts: frozenset[str] = frozenset()

    def __post_init__(self) -> None:
        """Reject empty scenarios.

        :raises InvalidChangeScenario: if both sets are empty
        """
        object.__setattr__(self, "breached_spis", frozenset(self.breached_spis))
        object.__setattr__(self, "changed_artifacts", frozenset(self.changed_artifacts))
        if not self.breached_spis and not self.changed_artifacts:
            raise InvalidChangeScenario("change scenario has neither breaches nor artifacts")

    def to_dict(self) -> dict[str, Any]:
        """Serialize the scenario.

        :return: scenario record
        :rtype: dict[str, Any]
        """
        return {
            "breached_spis": sorted(self.breached_spis),
            "changed_artifacts": sorted(self.changed_artifacts),
        }


@dataclass(frozen=True)
class PropagationStep:
    """One rule application of the consistency check."""

    node: str
    rule: str
    result_status: NodeStatus
    edge: Optional[str] = None

    def to_dict(self) -> dict[str, Any]:
        """Serialize the step.

        :return: step record
        :rtype: dict[str, Any]
        """
        return {
            "edge": self.edge,
            "policy": self.rule,
            "node": self.node,
            "result_status": self.result_status.value,
        }


@dataclass(frozen=True)
class ImpactReport:  # pylint: disable=too-many-instance-attributes
    """Impact area of a change scenario on one case version."""

    scenario: Optional[ChangeScenario]
    case_version: int
    direct: frozenset[str] = frozenset()
    indirect: frozenset[str] = frozenset()
    transitions: Mapping[str, tuple[NodeStatus, NodeStatus]] = field(default_factory=dict)
    trace: tuple[PropagationStep, ...] = ()
    requires_argument_rebuild: bool = False

    @property
    def impact_area(self) -> frozenset[str]:
        """Directly and indirectly impacted nodes.

        :return: node ids
        :rtype: frozenset[str]
        """
        return self.direct | self.indirect

    @property
    def empty(self) -> bool:
        """Whether nothing is impacted.

        :return: True if the impact area is empty
        :rtype: bool
        """
        return not self.impact_area

    def with_status(self, status: NodeStatus) -> list[str]:
        """Impacted nodes ending in a status.

        :param status: resulting status
        :type status: NodeStatus
        :return: sorted node ids
        :rtype: list[str]
        """
        return sorted(node for node, (_, new) in self.transitions.items() if new is status)

    @property
    def invalidated(self) -> list[str]:
        """Invalidated nodes.

        :return: sorted node ids
        :rtype: list[str]
        """
        return self.with_status(NodeStatus.INVALIDATED)

    @property
    def under_review(self) -> list[str]:
        """Nodes flagged for review.

        :return: sorted node ids
        :rtype: list[str]
        """
        return self.with_status(NodeStatus.UNDER_REVIEW)

    @property
    def reference(self) -> str:
        """Content reference of the report, used by the alerts routed for it.

        :return: case version and a short digest of the serialized report
        :rtype: str
        """
        digest = hashlib.sha256(canonical_json(self.to_dict()).encode("utf-8")).hexdigest()
        return f"impact-v{self.case_version}-{digest[:12]}"

    def to_dict(self) -> dict[str, Any]:
        """Serialize the report with stable ordering.

        :return: report record
        :rtype: dict[str, Any]
        """
        return {
            "case_version": self.case_version,
            "scenario": self.scenario.to_dict() if self.scenario else None,
            "direct": sorted(self.direct),
            "indirect": sorted(self.indirect),
            "transitions": [
                {"node": node, "from": old.value, "to": new.value}
                for node, (old, new) in sorted(self.transitions.items())
            ],
            "trace": [step.to_dict() for step in self.trace],
            "requires_argument_rebuild": self.requires_argument_rebuild,
        }

    @classmethod
    def from_dict(cls, record: Mapping[str, Any]) -> ImpactReport:
        """Load report from its serialized form.

        :param record: report record
        :type record: Mapping[str, Any]
        :return: impact report
        :rtype: ImpactReport
        """
        scenario = record.get("scenario")
        return cls(
            scenario=ChangeScenario(
                frozenset(scenario["breached_spis"]), frozenset(scenario["changed_artifacts"])
            )
            if scenario
            else None,
            case_version=record["case_version"],
            direct=frozenset(record["direct"]),
            indirect=frozenset(record["indirect"]),
            transitions={
                t["node"]: (NodeStatus(t["from"]), NodeStatus(t["to"]))
                for t in record["transitions"]
            },
            trace=tuple(
                PropagationStep(
                    node=step["node"],
                    rule=step["policy"],
                    result_status=NodeStatus(step["result_status"]),
                    edge=step["edge"],
                )
                for step in record["trace"]
            ),
            requires_argument_rebuild=record["requires_argument_rebuild"],
        )


@dataclass(frozen=True)
class RevalidationReport:
    """Outcome of re-running the consistency check after a recovery."""

    clean: bool
    residual: ImpactReport

    def to_dict(self) -> dict[str, Any]:
        """Serialize the revalidation outcome.

        :return: revalidation record
        :rtype: dict[str, Any]
        """
        return {"clean": self.clean, "residual": self.residual.to_dict()}


@dataclass(frozen=True)
class AddNode:
    """Add a node to the case."""

    node: ArgNode

    def to_dict(self) -> dict[str, Any]:
        """Serialize the action.

        :return: action record
        :rtype: dict[str, Any]
        """
        node = self.node.to_dict()
        node.pop("status")
        return {"action": "add_node", "node": node}


@dataclass(frozen=True)
class AddEdge:
    """Add a relationship; a missing policy is resolved from the source node kind."""

    src: str
    dst: str
    rel: RelationKind
    policy: Optional[PropagationPolicy] = None

    def to_dict(self) -> dict[str, Any]:
        """Serialize the action.

        :return: action record
        :rtype: dict[str, Any]
        """
        edge: dict[str, Any] = {"from": self.src, "to": self.dst, "rel": self.rel.value}
        if self.policy is not None:
            edge["policy"] = self.policy.value

        return {"action": "add_edge", "edge": edge}


@dataclass(frozen=True)
class SetThreshold:
    """Replace the threshold and comparator of an SPI."""

    spi_id: str
    threshold: ThresholdSpec
    comparator: Comparator

    def to_dict(self) -> dict[str, Any]:
        """Serialize the action.

        :return: action record
        :rtype: dict[str, Any]
        """
        return {
            "action": "set_threshold",
            "spi_id": self.spi_id,
            "threshold": self.threshold.to_raw(),
            "comparator": self.comparator.value,
        }


@dataclass(frozen=True)
class Reinstate:
    """Return a node to valid and acknowledge the breaches of its attached SPIs."""

    node_id: str

    def to_dict(self) -> dict[str, Any]:
        """Serialize the action.

        :return: action record
        :rtype: dict[str, Any]
        """
        return {"action": "reinstate", "node_id": self.node_id}


@dataclass(frozen=True)
class AttachEvidence:
    """Add an evidence node supporting an existing node."""

    node_id: str
    evidence: ArgNode

    def to_dict(self) -> dict[str, Any]:
        """Serialize the action.

        :return: action record
        :rtype: dict[str, Any]
        """
        evidence = self.evidence.to_dict()
        evidence.pop("status")
        evidence.pop("kind")
        return {"action": "attach_evidence", "node_id": self.node_id, "evidence": evidence}


RecoveryAction = Union[AddNode, AddEdge, SetThreshold, Reinstate, AttachEvidence]


def action_records(actions: Iterable[RecoveryAction]) -> list[dict[str, Any]]:
    """Serialize recovery actions.

    :param actions: recovery actions
    :type actions: Iterable[RecoveryAction]
    :return: action records
    :rtype: list[dict[str, Any]]
    """
    return [action.to_dict() for action in actions]
