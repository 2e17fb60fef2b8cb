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

"""Safety argument graph: nodes, relationships and the versioned safety case."""
from __future__ import annotations

import heapq
import logging
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Any, Iterable, Mapping, Optional

from dscms.exceptions import UnknownNode

TOP_TAG = "top"
ARTIFACT_TAG_PREFIX = "artifact:"

logger = logging.getLogger(__name__)


class NodeKind(str, Enum):
    """Kinds of argumentation elements."""

    CLAIM = "claim"
    STRATEGY = "strategy"
    EVIDENCE = "evidence"
    CONTEXT = "context"
    DEFEATER = "defeater"


class NodeStatus(str, Enum):
    """Consistency status of an argumentation element."""

    VALID = "valid"
    UNDER_REVIEW = "under-review"
    STALE = "stale"
    INVALIDATED = "invalidated"

    @property
    def rank(self) -> int:
        """Position of the status in the propagation order.

        valid and stale share the bottom; invalidated is the top.

        :return: rank of the status
        :rtype: int
        """
        return {"valid": 0, "stale": 0, "under-review": 1, "invalidated": 2}[self.value]


class RelationKind(str, Enum):
    """Kinds of relationship between argumentation elements."""

    SUPPORTS = "supports"
    IN_CONTEXT_OF = "in-context-of"
    CHALLENGES = "challenges"


class PropagationPolicy(str, Enum):
    """How impact on an edge source affects its destination."""

    INVALIDATE = "invalidate"
    FLAG = "flag"
    SPI_GATED = "spi-gated"


@dataclass(frozen=True)
class ArgNode:
    """Argumentation element of a safety case."""

    id: str
    kind: NodeKind
    text: str = ""
    tags: frozenset[str] = frozenset()
    status: NodeStatus = NodeStatus.VALID

    @property
    def is_top(self) -> bool:
        """Whether the node is the top claim.

        :return: True if the node carries the top tag
        :rtype: bool
        """
        return TOP_TAG in self.tags

    @property
    def artifacts(self) -> frozenset[str]:
        """Development artifacts referenced by the node.

        :return: artifact references without the tag prefix
        :rtype: frozenset[str]
        """
        return frozenset(
            tag.removeprefix(ARTIFACT_TAG_PREFIX)
            for tag in self.tags
            if tag.startswith(ARTIFACT_TAG_PREFIX)
        )

    def to_dict(self) -> dict[str, Any]:
        """Serialize the node to a case document record.

        :return: node record
        :rtype: dict[str, Any]
        """
        return {
            "id": self.id,
            "kind": self.kind.value,
            "text": self.text,
            "tags": sorted(self.tags),
            "status": self.status.value,
        }


def default_policy(rel: RelationKind, src_kind: Optional[NodeKind]) -> PropagationPolicy:
    """Get the propagation policy of an edge with no policy in the document.

    :param rel: relationship kind
    :type rel: RelationKind
    :param src_kind: kind of the source node, None if the source is unknown
    :type src_kind: Optional[NodeKind]
    :return: default policy
    :rtype: PropagationPolicy
    """
    match rel:
        case RelationKind.SUPPORTS if src_kind is NodeKind.EVIDENCE:
            return PropagationPolicy.INVALIDATE
        case RelationKind.CHALLENGES:
            return PropagationPolicy.INVALIDATE
        case _:
            return PropagationPolicy.FLAG


@dataclass(frozen=True)
class Relationship:
    """Directed relationship; impact flows from src to dst."""

    src: str
    dst: str
    rel: RelationKind
    policy: PropagationPolicy

    @property
    def label(self) -> str:
        """Human-readable edge label.

        :return: label in form 'src -supports-> dst'
        :rtype: str
        """
        return f"{self.src} -{self.rel.value}-> {self.dst}"

    @property
    def sort_key(self) -> tuple[str, str, str]:
        """Key for stable edge ordering.

        :return: tuple of src, dst and relationship kind
        :rtype: tuple[str, str, str]
        """
        return self.src, self.dst, self.rel.value

    def to_dict(self) -> dict[str, Any]:
        """Serialize the edge to a case document record.

        :return: edge record
        :rtype: dict[str, Any]
        """
        return {
            "from": self.src,
            "to": self.dst,
            "rel": self.rel.value,
            "policy": self.policy.value,
        }


@dataclass(frozen=True)
class VersionChange:
    """Audit-ready description of the actions that produced a case version."""

    version: int
    actions: tuple[dict[str, Any], ...]

    def to_dict(self) -> dict[str, Any]:
        """Serialize the change record.

        :return: change record
        :rtype: dict[str, Any]
        """
        return {"version": self.version, "actions": [dict(action) for action in self.actions]}


@dataclass(frozen=True)
class SafetyCase:
    """Versioned safety argument graph.

    Instances are never mutated; every change produces a new instance.
    """

    case_id: str
    version: int
    nodes: Mapping[str, ArgNode]
    edges: tuple[Relationship, ...] = ()
    spi_attachments: Mapping[str, str] = field(default_factory=dict)
    acknowledged_spis: frozenset[str] = frozenset()
    history: tuple[VersionChange, ...] = ()

    def node(self, node_id: str) -> ArgNode:
        """Get node by id.

        :param node_id: node id
        :type node_id: str
        :return: node
        :rtype: ArgNode
        :raises UnknownNode: if the id does not exist
        """
        try:
            return self.nodes[node_id]
        except KeyError as exc:
            raise UnknownNode(f"Unknown node '{node_id}' in case '{self.case_id}'") from exc

    @property
    def top(self) -> Optional[ArgNode]:
        """Get the top claim.

        :return: first node tagged as top, None if there is none
        :rtype: Optional[ArgNode]
        """
        return next((self.nodes[i] for i in sorted(self.nodes) if self.nodes[i].is_top), None)

    @property
    def node_ids(self) -> list[str]:
        """Node ids in lexicographic order.

        :return: sorted node ids
        :rtype: list[str]
        """
        return sorted(self.nodes)

    def claims(self) -> list[ArgNode]:
        """Claim nodes in lexicographic id order.

        :return: claims
        :rtype: list[ArgNode]
        """
        return [self.nodes[i] for i in self.node_ids if self.nodes[i].kind is NodeKind.CLAIM]

    def outgoing(self, node_id: str) -> list[Relationship]:
        """Edges leaving the node, ordered by destination then relationship kind.

        :param node_id: node id
        :type node_id: str
        :return: outgoing edges
        :rtype: list[Relationship]
        """
        return sorted((e for e in self.edges if e.src == node_id), key=lambda e: e.sort_key)

    def parents(self, node_id: str) -> list[str]:
        """Nodes supported by the node.

        :param node_id: node id
        :type node_id: str
        :return: sorted ids of supported nodes
        :rtype: list[str]
        """
        return sorted(
            {e.dst for e in self.edges if e.src == node_id and e.rel is RelationKind.SUPPORTS}
        )

    def children(self, node_id: str) -> list[str]:
        """Nodes supporting the node.

        :param node_id: node id
        :type node_id: str
        :return: sorted ids of supporting nodes
        :rtype: list[str]
        """
        return sorted(
            {e.src for e in self.edges if e.dst == node_id and e.rel is RelationKind.SUPPORTS}
        )

    def attached_spis(self, node_id: str) -> list[str]:
        """SPIs attached to the node.

        :param node_id: node id
        :type node_id: str
        :return: sorted SPI ids
        :rtype: list[str]
        """
        return sorted(spi for spi, claim in self.spi_attachments.items() if claim == node_id)

    def tagged_with_artifact(self, artifact: str) -> list[str]:
        """Nodes referencing a development artifact.

        :param artifact: artifact reference
        :type artifact: str
        :return: sorted node ids
        :rtype: list[str]
        """
        return [i for i in self.node_ids if artifact in self.nodes[i].artifacts]

    def effective_breaches(self, breached: Iterable[str]) -> frozenset[str]:
        """Drop breaches that a recovery acknowledged.

        :param breached: ids of breached SPIs
        :type breached: Iterable[str]
        :return: ids of breached and not acknowledged SPIs
        :rtype: frozenset[str]
        """
        return frozenset(breached) - self.acknowledged_spis

    def with_statuses(self, statuses: Mapping[str, NodeStatus]) -> SafetyCase:
        """Copy of the case with node statuses replaced, version unchanged.

        :param statuses: new status per node id; nodes not listed keep theirs
        :type statuses: Mapping[str, NodeStatus]
        :return: new case
        :rtype: SafetyCase
        """
        nodes = {
            node_id: replace(node, status=statuses.get(node_id, node.status))
            for node_id, node in self.nodes.items()
        }
        return replace(self, nodes=nodes)

    def statuses(self) -> dict[str, NodeStatus]:
        """Current status of every node.

        :return: status per node id
        :rtype: dict[str, NodeStatus]
        """
        return {node_id: self.nodes[node_id].status for node_id in self.node_ids}


def ancestors(case: SafetyCase, node_id: str) -> list[str]:
    """Get every node the given node supports, directly or transitively.

    The result is topologically ordered, supporters before supported nodes, so it
    ends at the top claim. Ties are broken by node id.

    :param case: safety case
    :type case: SafetyCase
    :param node_id: node id
    :type node_id: str
    :return: ordered ancestor ids, never containing node_id itself
    :rtype: list[str]
    """
    case.node(node_id)

    reached: set[str] = set()
    to_visit = case.parents(node_id)
    while to_visit:
        current = to_visit.pop()
        if current in reached or current == node_id:
            continue
        reached.add(current)
        to_visit.extend(case.parents(current))

    # Kahn's algorithm restricted to the reached subgraph
    in_degree = {n: sum(1 for c in case.children(n) if c in reached) for n in reached}
    ready = [n for n, degree in in_degree.items() if degree == 0]
    heapq.heapify(ready)
    ordered: list[str] = []
    while ready:
        current = heapq.heappop(ready)
        ordered.append(current)
        for parent in case.parents(current):
            if parent not in in_degree:
                continue
            in_degree[parent] -= 1
            if in_degree[parent] == 0:
                heapq.heappush(ready, parent)

    logger.debug("ancestors of %s: %s", node_id, ordered)
    return ordered
