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

"""Case document parsing and serialization.

A case document is YAML with the top-level fields ``case_id``, ``version``, ``nodes``,
``edges`` and ``spi_attachments``. Node ``status``, ``acknowledged_spis`` and ``history``
are optional and only written back by :func:`serialize_case`.
"""
from __future__ import annotations

import logging
from pathlib import Path
from typing import Any, Mapping, Union

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
from dscms.exceptions import CaseParseError
from dscms.utils import dump_yaml

logger = logging.getLogger(__name__)


def _string_list(
    value: Any, location: str, name: str, errors: list[Violation]
) -> tuple[str, ...]:
    if value is None:
        return ()
    if not isinstance(value, list) or not all(isinstance(item, str) for item in value):
        errors.append(Violation("bad-format", location, f"{name} must be a list of strings"))
        return ()

    return tuple(value)


def _parse_nodes(records: Any, errors: list[Violation]) -> dict[str, ArgNode]:
    nodes: dict[str, ArgNode] = {}
    if not isinstance(records, list):
        errors.append(Violation("bad-format", "nodes", "nodes must be a list"))
        return nodes

    for index, record in enumerate(records):
        location = f"nodes[{index}]"
        if not isinstance(record, Mapping) or not record.get("id"):
            errors.append(Violation("missing-field", location, "node requires a non-empty id"))
            continue

        node_id = str(record["id"])
        if node_id in nodes:
            errors.append(Violation("duplicate-id", node_id, f"duplicate id at {location}"))
            continue

        try:
            kind = NodeKind(record.get("kind"))
        except ValueError:
            message = f"unknown kind {record.get('kind')!r}"
            errors.append(Violation("unknown-kind", node_id, message))
            continue

        try:
            status = NodeStatus(record.get("status", NodeStatus.VALID.value))
        except ValueError:
            errors.append(
                Violation("unknown-status", node_id, f"unknown status {record.get('status')!r}")
            )
            continue

        nodes[node_id] = ArgNode(
            id=node_id,
            kind=kind,
            text=str(record.get("text", "")),
            tags=frozenset(_string_list(record.get("tags"), node_id, "tags", errors)),
            status=status,
        )

    return nodes


def _parse_edges(
    records: Any, nodes: Mapping[str, ArgNode], errors: list[Violation]
) -> tuple[Relationship, ...]:
    edges: list[Relationship] = []
    if not isinstance(records, list):
        errors.append(Violation("bad-format", "edges", "edges must be a list"))
        return ()

    for index, record in enumerate(records):
        location = f"edges[{index}]"
        if not isinstance(record, Mapping) or not record.get("from") or not record.get("to"):
            errors.append(Violation("missing-field", location, "edge requires 'from' and 'to'"))
            continue

        try:
            rel = RelationKind(record.get("rel"))
        except ValueError:
            errors.append(
                Violation("unknown-relationship", location, f"unknown rel {record.get('rel')!r}")
            )
            continue

        src, dst = str(record["from"]), str(record["to"])
        source = nodes.get(src)
        if record.get("policy") is None:
            policy = default_policy(rel, source.kind if source else None)
        else:
            try:
                policy = PropagationPolicy(record["policy"])
            except ValueError:
                errors.append(
                    Violation("unknown-policy", location, f"unknown policy {record['policy']!r}")
                )
                continue

        edges.append(Relationship(src=src, dst=dst, rel=rel, policy=policy))

    return tuple(edges)


def _parse_attachments(records: Any, errors: list[Violation]) -> dict[str, str]:
    attachments: dict[str, str] = {}
    if records is None:
        return attachments
    if not isinstance(records, list):
        errors.append(Violation("bad-format", "spi_attachments", "spi_attachments must be a list"))
        return attachments

    for index, record in enumerate(records):
        location = f"spi_attachments[{index}]"
        complete = isinstance(record, Mapping) and record.get("spi_id") and record.get("claim_id")
        if not complete:
            errors.append(
                Violation("missing-field", location, "attachment requires spi_id and claim_id")
            )
            continue
        spi_id = str(record["spi_id"])
        if spi_id in attachments:
            errors.append(Violation("duplicate-id", spi_id, f"SPI attached twice at {location}"))
            continue
        attachments[spi_id] = str(record["claim_id"])

    return attachments


def _parse_history(records: Any, errors: list[Violation]) -> tuple[VersionChange, ...]:
    if records is None:
        return ()
    if not isinstance(records, list):
        errors.append(Violation("bad-format", "history", "history must be a list"))
        return ()

    history = []
    for index, record in enumerate(records):
        location = f"history[{index}]"
        if not isinstance(record, Mapping):
            errors.append(Violation("bad-format", location, "history entry must be a mapping"))
            continue

        version = record.get("version")
        if not isinstance(version, int) or isinstance(version, bool) or version < 1:
            errors.append(Violation("bad-version", location, f"invalid version {version!r}"))
            continue

        actions = record.get("actions") or []
        if not isinstance(actions, list) or not all(isinstance(a, Mapping) for a in actions):
            errors.append(Violation("bad-format", location, "actions must be a list of mappings"))
            continue

        history.append(VersionChange(version, tuple(dict(action) for action in actions)))

    return tuple(history)


def parse_case(document: Union[str, Mapping[str, Any]]) -> SafetyCase:
    """Parse a case document into a safety case.

    Parsing is all-or-nothing: every problem found is reported together.

    :param document: YAML text or an already loaded mapping
    :type document: Union[str, Mapping[str, Any]]
    :return: parsed safety case
    :rtype: SafetyCase
    :raises CaseParseError: if the document is malformed or violates the case invariants
    """
    if isinstance(document, str):
        try:
            data = yaml.safe_load(document)
        except yaml.YAMLError as exc:
            raise CaseParseError([Violation("bad-format", None, str(exc))]) from exc
    else:
        data = document

    if not isinstance(data, Mapping):
        raise CaseParseError([Violation("bad-format", None, "case document must be a mapping")])

    errors: list[Violation] = []
    if not data.get("case_id"):
        errors.append(Violation("missing-field", "case_id", "case_id is required"))

    version = data.get("version", 1)
    if not isinstance(version, int) or isinstance(version, bool) or version < 1:
        errors.append(Violation("bad-version", "version", f"invalid version {version!r}"))
        version = 1

    nodes = _parse_nodes(data.get("nodes") or [], errors)
    edges = _parse_edges(data.get("edges") or [], nodes, errors)
    attachments = _parse_attachments(data.get("spi_attachments"), errors)
    acknowledged = _string_list(
        data.get("acknowledged_spis"), "acknowledged_spis", "acknowledged_spis", errors
    )

    case = SafetyCase(
        case_id=str(data.get("case_id", "")),
        version=version,
        nodes=nodes,
        edges=edges,
        spi_attachments=attachments,
        acknowledged_spis=frozenset(acknowledged),
        history=_parse_history(data.get("history"), errors),
    )
    errors.extend(validate_structure(case))
    if errors:
        raise CaseParseError(errors)

    logger.debug(
        "parsed case %s v%d with %d nodes and %d edges",
        case.case_id,
        case.version,
        len(case.nodes),
        len(case.edges),
    )
    return case


def case_to_dict(case: SafetyCase) -> dict[str, Any]:
    """Convert safety case to a case document mapping with stable ordering.

    :param case: safety case
    :type case: SafetyCase
    :return: case document mapping
    :rtype: dict[str, Any]
    """
    return {
        "case_id": case.case_id,
        "version": case.version,
        "nodes": [case.nodes[node_id].to_dict() for node_id in case.node_ids],
        "edges": [edge.to_dict() for edge in sorted(case.edges, key=lambda e: e.sort_key)],
        "spi_attachments": [
            {"spi_id": spi_id, "claim_id": claim_id}
            for spi_id, claim_id in sorted(case.spi_attachments.items())
        ],
        "acknowledged_spis": sorted(case.acknowledged_spis),
        "history": [change.to_dict() for change in case.history],
    }


def serialize_case(case: SafetyCase) -> str:
    """Serialize safety case to a deterministic case document.

    :param case: safety case
    :type case: SafetyCase
    :return: YAML case document
    :rtype: str
    """
    return dump_yaml(case_to_dict(case))


def load_case(path: Path) -> SafetyCase:
    """Load and parse a case document from a file.

    :param path: path to the case document
    :type path: Path
    :return: parsed safety case
    :rtype: SafetyCase
    """
    logger.info("Loading case document '%s'", path)
    return parse_case(Path(path).read_text(encoding="utf-8"))
