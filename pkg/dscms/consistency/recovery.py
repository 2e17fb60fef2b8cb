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

"""Recovery actions applied to the safety case as one atomic batch.

A recovery document is YAML::

    base_version: 1
    actions:
      - add_node: {node: {id: C3.4, kind: claim, text: ...}}
      - add_edge: {edge: {from: C3.4, to: C2.2, rel: supports}}
      - set_threshold: {spi_id: C5.1-SPI-4, threshold: 45, comparator: gt}
      - reinstate: {node_id: C2.2}
      - attach_evidence: {node_id: C8.x, evidence: {id: E8.3, text: ...}}
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from typing import Any, Iterable, Mapping, Optional, Sequence, Union

import yaml

from dscms.argument import (
    ArgNode,
    NodeKind,
    NodeStatus,
    PropagationPolicy,
    RelationKind,
    Relationship,
    SafetyCase,
    VersionChange,
    default_policy,
)
from dscms.argument.validation import Violation, validate_structure
from dscms.consistency import (
    AddEdge,
    AddNode,
    AttachEvidence,
    RecoveryAction,
    Reinstate,
    SetThreshold,
    action_records,
)
from dscms.exceptions import RecoveryRejected, UnknownSpi
from dscms.spi import Comparator, SpiCatalog, ThresholdSpec

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class RecoveryDocument:
    """Recovery batch together with the case version its author saw."""

    base_version: Optional[int]
    actions: tuple[RecoveryAction, ...]


def _node_from_record(record: Any, kind: Optional[NodeKind] = None) -> ArgNode:
    if not isinstance(record, Mapping) or not record.get("id"):
        raise ValueError("node requires a non-empty id")

    return ArgNode(
        id=str(record["id"]),
        kind=kind or NodeKind(record.get("kind", NodeKind.CLAIM.value)),
        text=str(record.get("text", "")),
        tags=frozenset(str(tag) for tag in record.get("tags") or []),
    )


def _parse_action(record: Mapping[str, Any]) -> RecoveryAction:
    if len(record) != 1:
        raise ValueError(f"expected a single action, got {sorted(record)}")

    ((name, body),) = record.items()
    body = body or {}
    match name:
        case "add_node":
            return AddNode(_node_from_record(body.get("node", body)))
        case "add_edge":
            edge = body.get("edge", body)
            policy = edge.get("policy")
            return AddEdge(
                src=str(edge["from"]),
                dst=str(edge["to"]),
                rel=RelationKind(edge.get("rel", RelationKind.SUPPORTS.value)),
                policy=PropagationPolicy(policy) if policy is not None else None,
            )
        case "set_threshold":
            return SetThreshold(
                spi_id=str(body["spi_id"]),
                threshold=ThresholdSpec.parse(body["threshold"]),
                comparator=Comparator(body["comparator"]),
            )
        case "reinstate":
            return Reinstate(str(body["node_id"]))
        case "attach_evidence":
            return AttachEvidence(
                node_id=str(body["node_id"]),
                evidence=_node_from_record(body["evidence"], NodeKind.EVIDENCE),
            )
        case _:
            raise ValueError(f"unknown action {name!r}")


def parse_recovery_actions(records: Iterable[Any]) -> list[RecoveryAction]:
    """Parse recovery action records.

    :param records: action records, each a single-key mapping
    :type records: Iterable[Any]
    :return: recovery actions
    :rtype: list[RecoveryAction]
    :raises RecoveryRejected: if any record is malformed
    """
    actions, violations = [], []
    for index, record in enumerate(records):
        try:
            if not isinstance(record, Mapping):
                raise ValueError("action must be a mapping")
            actions.append(_parse_action(record))
        except (KeyError, TypeError, ValueError, AttributeError) as exc:
            violations.append(Violation("bad-action", f"actions[{index}]", str(exc)))

    if violations:
        raise RecoveryRejected(violations)

    return actions


def parse_recovery_document(document: Union[str, Mapping[str, Any]]) -> RecoveryDocument:
    """Parse a recovery document.

    :param document: YAML text or an already loaded mapping
    :type document: Union[str, Mapping[str, Any]]
    :return: recovery document
    :rtype: RecoveryDocument
    :raises RecoveryRejected: if the document is malformed
    """
    if isinstance(document, str):
        try:
            data = yaml.safe_load(document)
        except yaml.YAMLError as exc:
            raise RecoveryRejected([Violation("bad-format", None, str(exc))]) from exc
    else:
        data = document

    if not isinstance(data, Mapping) or not isinstance(data.get("actions"), list):
        raise RecoveryRejected(
            [Violation("bad-format", None, "recovery document requires an actions list")]
        )

    base_version = data.get("base_version")
    malformed = isinstance(base_version, bool) or not isinstance(base_version, int)
    if base_version is not None and malformed:
        raise RecoveryRejected(
            [Violation("bad-version", "base_version", f"invalid version {base_version!r}")]
        )

    return RecoveryDocument(base_version, tuple(parse_recovery_actions(data["actions"])))


class _Draft:
    """Mutable working copy of a case and catalog while a batch is applied."""

    def __init__(self, case: SafetyCase, catalog: SpiCatalog) -> None:
        self.nodes = dict(case.nodes)
        self.edges = list(case.edges)
        self.acknowledged = set(case.acknowledged_spis)
        self.attachments = dict(case.spi_attachments)
        self.catalog = catalog
        self.violations: list[Violation] = []

    def add_node(self, node: ArgNode) -> None:
        if node.id in self.nodes:
            self.violations.append(Violation("duplicate-id", node.id, "node already exists"))
            return
        self.nodes[node.id] = replace(node, status=NodeStatus.VALID)

    def add_edge(self, action: AddEdge) -> None:
        source = self.nodes.get(action.src)
        policy = action.policy or default_policy(action.rel, source.kind if source else None)
        edge = Relationship(action.src, action.dst, action.rel, policy)
        if any(e.sort_key == edge.sort_key for e in self.edges):
            self.violations.append(Violation("duplicate-edge", edge.label, "edge already exists"))
            return
        self.edges.append(edge)

    def set_threshold(self, action: SetThreshold) -> None:
        try:
            self.catalog = self.catalog.with_threshold(
                action.spi_id, action.threshold, action.comparator
            )
        except UnknownSpi as exc:
            self.violations.append(Violation("unknown-spi", action.spi_id, str(exc)))

    def reinstate(self, node_id: str) -> None:
        if node_id not in self.nodes:
            self.violations.append(Violation("unknown-node", node_id, "cannot reinstate"))
            return
        self.nodes[node_id] = replace(self.nodes[node_id], status=NodeStatus.VALID)
        self.acknowledged.update(
            spi for spi, claim in self.attachments.items() if claim == node_id
        )

    def attach_evidence(self, action: AttachEvidence) -> None:
        if action.node_id not in self.nodes:
            self.violations.append(Violation("unknown-node", action.node_id, "no such node"))
            return
        self.add_node(replace(action.evidence, kind=NodeKind.EVIDENCE))
        self.edges.append(
            Relationship(
                action.evidence.id,
                action.node_id,
                RelationKind.SUPPORTS,
                PropagationPolicy.INVALIDATE,
            )
        )

    def apply(self, action: RecoveryAction) -> None:
        match action:
            case AddNode():
                self.add_node(action.node)
            case AddEdge():
                self.add_edge(action)
            case SetThreshold():
                self.set_threshold(action)
            case Reinstate():
                self.reinstate(action.node_id)
            case AttachEvidence():
                self.attach_evidence(action)


def apply_recovery(
    case: SafetyCase, actions: Sequence[RecoveryAction], catalog: SpiCatalog
) -> tuple[SafetyCase, SpiCatalog]:
    """Apply a batch of recovery actions.

    The batch is atomic: if any action or the resulting structure is invalid,
    nothing is applied.

    :param case: current safety case
    :type case: SafetyCase
    :param actions: recovery actions
    :type actions: Sequence[RecoveryAction]
    :param catalog: current SPI catalog
    :type catalog: SpiCatalog
    :return: new case version and the possibly updated catalog
    :rtype: tuple[SafetyCase, SpiCatalog]
    :raises RecoveryRejected: if the batch is empty or produces any violation
    """
    if not actions:
        raise RecoveryRejected([Violation("empty-batch", None, "no recovery actions given")])

    draft = _Draft(case, catalog)
    for action in actions:
        draft.apply(action)

    version = case.version + 1
    updated = SafetyCase(
        case_id=case.case_id,
        version=version,
        nodes=draft.nodes,
        edges=tuple(draft.edges),
        spi_attachments=draft.attachments,
        acknowledged_spis=frozenset(draft.acknowledged),
        history=case.history + (VersionChange(version, tuple(action_records(actions))),),
    )
    violations = draft.violations + validate_structure(updated)
    if violations:
        logger.warning("recovery against %s v%d rejected", case.case_id, case.version)
        raise RecoveryRejected(violations)

    logger.info(
        "recovery applied to %s: v%d -> v%d (%d actions)",
        case.case_id,
        case.version,
        version,
        len(actions),
    )
    return updated, draft.catalog
