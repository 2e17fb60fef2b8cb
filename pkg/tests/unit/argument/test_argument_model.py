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

import pytest

from dscms.argument import (
    NodeKind,
    NodeStatus,
    PropagationPolicy,
    RelationKind,
    ancestors,
    default_policy,
)
from dscms.exceptions import UnknownNode
from tests.unit.utils import chain_case, edge, make_case, node


@pytest.mark.parametrize(
    "status, rank",
    [
        (NodeStatus.VALID, 0),
        (NodeStatus.STALE, 0),
        (NodeStatus.UNDER_REVIEW, 1),
        (NodeStatus.INVALIDATED, 2),
    ],
)
def test_node_status_rank(status, rank):
    """Test the propagation order of node statuses."""
    assert status.rank == rank


@pytest.mark.parametrize(
    "rel, src_kind, exp_policy",
    [
        (RelationKind.SUPPORTS, NodeKind.EVIDENCE, PropagationPolicy.INVALIDATE),
        (RelationKind.SUPPORTS, NodeKind.CLAIM, PropagationPolicy.FLAG),
        (RelationKind.SUPPORTS, NodeKind.STRATEGY, PropagationPolicy.FLAG),
        (RelationKind.SUPPORTS, None, PropagationPolicy.FLAG),
        (RelationKind.CHALLENGES, NodeKind.DEFEATER, PropagationPolicy.INVALIDATE),
        (RelationKind.CHALLENGES, None, PropagationPolicy.INVALIDATE),
        (RelationKind.IN_CONTEXT_OF, NodeKind.CONTEXT, PropagationPolicy.FLAG),
        (RelationKind.IN_CONTEXT_OF, NodeKind.EVIDENCE, PropagationPolicy.FLAG),
    ],
)
def test_default_policy(rel, src_kind, exp_policy):
    """Test policy of edges without an explicit policy."""
    assert default_policy(rel, src_kind) is exp_policy


def test_node_tags():
    """Test top and artifact tags of a node."""
    top = node("C0", NodeKind.CLAIM, "top", "artifact:suite", "artifact:report", "other")

    assert top.is_top
    assert top.artifacts == frozenset({"suite", "report"})
    assert not node("C1").is_top
    assert node("C1").artifacts == frozenset()


def test_node_to_dict():
    """Test node record has sorted tags and the status value."""
    record = node("C1", NodeKind.CLAIM, "b", "a", status=NodeStatus.STALE).to_dict()

    assert record == {
        "id": "C1",
        "kind": "claim",
        "text": "",
        "tags": ["a", "b"],
        "status": "stale",
    }


def test_relationship_label_and_record():
    """Test edge label and record."""
    relationship = edge("C1", "C0", policy=PropagationPolicy.SPI_GATED)

    assert relationship.label == "C1 -supports-> C0"
    assert relationship.to_dict() == {
        "from": "C1",
        "to": "C0",
        "rel": "supports",
        "policy": "spi-gated",
    }


def test_case_navigation():
    """Test lookups on the safety case."""
    case = chain_case()

    assert case.top.id == "C0"
    assert case.node("C2").kind is NodeKind.CLAIM
    assert [claim.id for claim in case.claims()] == ["C0", "C1", "C2", "C3"]
    assert case.parents("C2") == ["C1"]
    assert case.children("C1") == ["C2", "C3"]
    assert case.children("C0") == ["C1"]
    assert case.attached_spis("C2") == ["C2-SPI-1"]
    assert case.tagged_with_artifact("suite") == ["C2"]
    assert case.tagged_with_artifact("missing") == []
    assert [e.dst for e in case.outgoing("D1")] == ["E1"]


def test_case_unknown_node():
    """Test looking up a node that does not exist."""
    with pytest.raises(UnknownNode, match="Unknown node 'C9'"):
        chain_case().node("C9")


def test_case_without_top():
    """Test a case without top claim."""
    assert make_case([node("C1")]).top is None


def test_effective_breaches():
    """Test acknowledged breaches are dropped."""
    case = make_case([node("C0", NodeKind.CLAIM, "top")], acknowledged_spis=frozenset({"S1"}))

    assert case.effective_breaches(["S1", "S2"]) == frozenset({"S2"})


def test_with_statuses_keeps_version():
    """Test replacing statuses gives a new case of the same version."""
    case = chain_case()

    updated = case.with_statuses({"C1": NodeStatus.INVALIDATED})

    assert updated.version == case.version
    assert updated.node("C1").status is NodeStatus.INVALIDATED
    assert updated.node("C2").status is NodeStatus.VALID
    assert case.node("C1").status is NodeStatus.VALID
    assert updated.statuses()["C1"] is NodeStatus.INVALIDATED


@pytest.mark.parametrize(
    "node_id, exp_ancestors",
    [
        ("C0", []),
        ("C1", ["C0"]),
        ("C2", ["C1", "C0"]),
        ("E1", ["C2", "C1", "C0"]),
        # challenges and in-context-of edges are not followed
        ("D1", []),
        ("X1", []),
    ],
)
def test_ancestors(node_id, exp_ancestors):
    """Test ancestors are topologically ordered and end at the top claim."""
    assert ancestors(chain_case(), node_id) == exp_ancestors


def test_ancestors_diamond():
    """Test ancestors of a node reaching the top along two paths."""
    case = make_case(
        [node("T", NodeKind.CLAIM, "top"), node("B"), node("C"), node("A")],
        [edge("A", "B"), edge("A", "C"), edge("B", "T"), edge("C", "T")],
    )

    assert ancestors(case, "A") == ["B", "C", "T"]


def test_ancestors_bundled_case(bundled_case):
    """Test ancestors of a deep claim of the bundled case."""
    exp_ancestors = ["C7.x", "C6.x", "C4.1", "C3.1", "C2.1", "C1.1", "C0"]

    assert ancestors(bundled_case, "C8.2") == exp_ancestors


def test_ancestors_unknown_node():
    """Test ancestors of a node that does not exist."""
    with pytest.raises(UnknownNode):
        ancestors(chain_case(), "missing")
