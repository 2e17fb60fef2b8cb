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

"""Structural and traceability validation of a safety case."""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import TYPE_CHECKING, Any, Optional

from dscms.argument import NodeKind, RelationKind, SafetyCase

if TYPE_CHECKING:  # pragma: no cover
    from dscms.spi import SpiCatalog

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Violation:
    """Problem found in a safety case, carrying a code and the offending element."""

    code: str
    element: Optional[str] = None
    message: str = ""

    def __str__(self) -> str:
        """Render the violation as 'code: element'.

        :return: violation description
        :rtype: str
        """
        if self.element is None:
            return f"{self.code}: {self.message}" if self.message else self.code

        return f"{self.code}: {self.element}"

    def to_dict(self) -> dict[str, Any]:
        """Serialize the violation.

        :return: violation record
        :rtype: dict[str, Any]
        """
        return {"code": self.code, "element": self.element, "message": self.message}


def _top_violations(case: SafetyCase) -> list[Violation]:
    tops = [case.nodes[i] for i in case.node_ids if case.nodes[i].is_top]
    if not tops:
        return [Violation("missing-top", None, "missing top claim")]

    violations = [
        Violation("multiple-top", node.id, "more than one node is tagged as top")
        for node in tops[1:]
    ]
    violations.extend(
        Violation("top-not-claim", node.id, "top node must be a claim")
        for node in tops
        if node.kind is not NodeKind.CLAIM
    )
    return violations


def _edge_violations(case: SafetyCase) -> list[Violation]:
    violations = []
    for edge in sorted(case.edges, key=lambda e: e.sort_key):
        if edge.src == edge.dst:
            violations.append(Violation("self-loop", edge.label, "edge endpoints are equal"))
        missing = [endpoint for endpoint in (edge.src, edge.dst) if endpoint not in case.nodes]
        if missing:
            violations.append(
                Violation("dangling-edge", edge.label, f"unknown endpoint {', '.join(missing)}")
            )
            continue
        source_kind = case.nodes[edge.src].kind
        if edge.rel is RelationKind.CHALLENGES and source_kind is not NodeKind.DEFEATER:
            violations.append(
                Violation("bad-challenges-source", edge.label, "only defeaters may challenge")
            )

    return violations


def _supports_cycle(case: SafetyCase) -> Optional[str]:
    """Find a node on or behind a supports cycle.

    :param case: safety case
    :type case: SafetyCase
    :return: smallest node id left over by a topological sort, None if acyclic
    :rtype: Optional[str]
    """
    supports = [
        e
        for e in case.edges
        if e.rel is RelationKind.SUPPORTS and e.src in case.nodes and e.dst in case.nodes
    ]
    in_degree = {node_id: 0 for node_id in case.nodes}
    for edge in supports:
        in_degree[edge.dst] += 1

    ready = [node_id for node_id, degree in in_degree.items() if degree == 0]
    while ready:
        current = ready.pop()
        for edge in supports:
            if edge.src == current:
                in_degree[edge.dst] -= 1
                if in_degree[edge.dst] == 0:
                    ready.append(edge.dst)

    remaining = sorted(node_id for node_id, degree in in_degree.items() if degree > 0)
    return remaining[0] if remaining else None


def _unreachable_claims(case: SafetyCase) -> list[str]:
    top = case.top
    if top is None:
        return []

    reached = {top.id}
    to_visit = [top.id]
    while to_visit:
        for child in case.children(to_visit.pop()):
            if child not in reached:
                reached.add(child)
                to_visit.append(child)

    return [claim.id for claim in case.claims() if claim.id not in reached]


def validate_structure(case: SafetyCase) -> list[Violation]:
    """Check the structural invariants of a safety case.

    :param case: safety case
    :type case: SafetyCase
    :return: violations, empty if the case is structurally sound
    :rtype: list[Violation]
    """
    violations = _top_violations(case)
    violations.extend(_edge_violations(case))

    if (cycle_node := _supports_cycle(case)) is not None:
        violations.append(Violation("cyclic-supports", cycle_node, "cyclic supports graph"))

    violations.extend(
        Violation("unreachable-from-top", claim_id, "no supports path to the top claim")
        for claim_id in _unreachable_claims(case)
    )

    for spi_id, claim_id in sorted(case.spi_attachments.items()):
        node = case.nodes.get(claim_id)
        if node is None or node.kind is not NodeKind.CLAIM:
            violations.append(
                Violation("bad-spi-attachment", spi_id, f"'{claim_id}' is not a claim")
            )

    logger.debug(
        "case %s v%d: %d structural violations", case.case_id, case.version, len(violations)
    )
    return violations


def validate_traceability(case: SafetyCase, catalog: SpiCatalog) -> list[Violation]:
    """Check that every leaf claim is traced to an SPI or evidence and every SPI to a claim.

    :param case: safety case
    :type case: SafetyCase
    :param catalog: SPI catalog
    :type catalog: SpiCatalog
    :return: warnings, empty if traceability is complete
    :rtype: list[Violation]
    """
    warnings = []
    catalog_claims = {spi.claim for spi in catalog}
    for claim in case.claims():
        if case.children(claim.id):
            continue
        if claim.id in catalog_claims or case.attached_spis(claim.id):
            continue
        warnings.append(
            Violation("untraced-leaf", claim.id, "leaf claim has neither SPI nor evidence")
        )

    for spi in catalog:
        node = case.nodes.get(spi.claim)
        if node is None or node.kind is not NodeKind.CLAIM:
            warnings.append(
                Violation("dangling-spi-claim", spi.id, f"claim '{spi.claim}' is not in the case")
            )
            continue
        attached_to = case.spi_attachments.get(spi.id)
        if attached_to is not None and attached_to != spi.claim:
            warnings.append(
                Violation(
                    "attachment-mismatch",
                    spi.id,
                    f"catalog names '{spi.claim}', case attaches to '{attached_to}'",
                )
            )

    for spi_id in sorted(case.spi_attachments):
        if spi_id not in catalog:
            warnings.append(Violation("unknown-attached-spi", spi_id, "SPI is not in the catalog"))

    return warnings
