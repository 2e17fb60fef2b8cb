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
from copy import deepcopy

import pytest

from dscms.argument import NodeKind, NodeStatus, PropagationPolicy, VersionChange
from dscms.argument.parser import case_to_dict, load_case, parse_case, serialize_case
from dscms.argument.validation import validate_structure, validate_traceability
from dscms.exceptions import CaseParseError

BASE = {
    "case_id": "small",
    "version": 1,
    "nodes": [
        {"id": "C0", "kind": "claim", "tags": ["top"]},
        {"id": "C1", "kind": "claim"},
        {"id": "E1", "kind": "evidence"},
        {"id": "D1", "kind": "defeater"},
    ],
    "edges": [
        {"from": "C1", "to": "C0", "rel": "supports"},
        {"from": "E1", "to": "C1", "rel": "supports"},
        {"from": "D1", "to": "E1", "rel": "challenges"},
    ],
    "spi_attachments": [{"spi_id": "C1-SPI-1", "claim_id": "C1"}],
}


def document(**changes):
    """Copy of the base document with top-level fields replaced."""
    data = deepcopy(BASE)
    data.update(changes)
    return data


def error_codes(exc_info):
    return {violation.code for violation in exc_info.value.errors}


def test_bundled_case_is_valid(bundled_case, bundled_catalog):
    """Test the bundled case parses and validates with zero violations."""
    assert bundled_case.case_id == "cyber-inability"
    assert bundled_case.version == 1
    assert len(bundled_case.nodes) == 33
    assert len(bundled_case.claims()) == 26
    assert len(bundled_case.spi_attachments) == 161
    assert bundled_case.top.id == "C0"
    assert validate_structure(bundled_case) == []
    assert validate_traceability(bundled_case, bundled_catalog) == []


def test_bundled_case_default_policies(bundled_case):
    """Test edges without a policy in the bundled case get the default one."""
    policies = {(e.src, e.dst): e.policy for e in bundled_case.edges}

    assert policies[("E8.2", "C8.x")] is PropagationPolicy.INVALIDATE
    assert policies[("D8.1", "E8.2")] is PropagationPolicy.INVALIDATE
    assert policies[("S1", "C1.1")] is PropagationPolicy.FLAG
    assert policies[("C2.1", "C1.1")] is PropagationPolicy.SPI_GATED


def test_parse_case_from_yaml_text():
    """Test parsing a YAML case document."""
    text = """
    case_id: yaml-case
    nodes:
      - {id: C0, kind: claim, tags: [top], status: under-review}
      - {id: C1, kind: claim, text: "supporting claim"}
    edges:
      - {from: C1, to: C0, rel: supports, policy: invalidate}
    acknowledged_spis: [C1-SPI-1]
    """
    case = parse_case(text.replace("\n    ", "\n"))

    assert case.case_id == "yaml-case"
    assert case.version == 1
    assert case.node("C0").status is NodeStatus.UNDER_REVIEW
    assert case.node("C1").text == "supporting claim"
    assert case.node("C1").kind is NodeKind.CLAIM
    assert case.acknowledged_spis == frozenset({"C1-SPI-1"})
    assert case.spi_attachments == {}


def extra_node(**fields):
    return {"nodes": BASE["nodes"] + [fields]}


def extra_edge(**fields):
    return {"edges": BASE["edges"] + [{"rel": "supports", **fields}]}


@pytest.mark.parametrize(
    "changes, exp_code",
    [
        ({"case_id": ""}, "missing-field"),
        ({"version": 0}, "bad-version"),
        ({"version": True}, "bad-version"),
        ({"version": "2"}, "bad-version"),
        ({"nodes": {"C0": "claim"}}, "bad-format"),
        ({"edges": {"C1": "C0"}}, "bad-format"),
        (extra_node(kind="claim"), "missing-field"),
        (extra_node(id="C1", kind="claim"), "duplicate-id"),
        (extra_node(id="G1", kind="goal"), "unknown-kind"),
        (extra_node(id="C2", kind="claim", status="broken"), "unknown-status"),
        (extra_edge(**{"from": "C1"}), "missing-field"),
        (extra_edge(**{"from": "C1", "to": "C0", "rel": "refutes"}), "unknown-relationship"),
        (extra_edge(**{"from": "E1", "to": "C0", "policy": "maybe"}), "unknown-policy"),
        (extra_edge(**{"from": "C1", "to": "C9"}), "dangling-edge"),
        ({"spi_attachments": [{"spi_id": "C1-SPI-1"}]}, "missing-field"),
        ({"spi_attachments": BASE["spi_attachments"] * 2}, "duplicate-id"),
        ({"spi_attachments": [{"spi_id": "S", "claim_id": "E1"}]}, "bad-spi-attachment"),
    ],
)
def test_parse_case_rejected(changes, exp_code):
    """Test every rejected case document reports its violation code."""
    with pytest.raises(CaseParseError) as exc_info:
        parse_case(document(**changes))

    assert exp_code in error_codes(exc_info)


@pytest.mark.parametrize(
    "changes, exp_violation",
    [
        (extra_node(id="C2", kind="claim", tags=5), ("bad-format", "C2")),
        (extra_node(id="C2", kind="claim", tags="abc"), ("bad-format", "C2")),
        (extra_node(id="C2", kind="claim", tags=["top", 3]), ("bad-format", "C2")),
        ({"acknowledged_spis": "C1-SPI-1"}, ("bad-format", "acknowledged_spis")),
        ({"spi_attachments": 5}, ("bad-format", "spi_attachments")),
        ({"history": 5}, ("bad-format", "history")),
        ({"history": ["v2"]}, ("bad-format", "history[0]")),
        ({"history": [{"actions": []}]}, ("bad-version", "history[0]")),
        ({"history": [{"version": "2"}]}, ("bad-version", "history[0]")),
        ({"history": [{"version": 2, "actions": "reinstate"}]}, ("bad-format", "history[0]")),
        ({"history": [{"version": 2, "actions": [1]}]}, ("bad-format", "history[0]")),
    ],
)
def test_parse_case_wrong_field_types(changes, exp_violation):
    """Test fields of the wrong type are reported where they occur."""
    with pytest.raises(CaseParseError) as exc_info:
        parse_case(document(**changes))

    violations = [(v.code, v.element) for v in exc_info.value.errors]
    assert exp_violation in violations


@pytest.mark.parametrize("text", ["- a\n- b", "just text", "case_id: [unclosed"])
def test_parse_case_bad_format(text):
    """Test a document that is not a YAML mapping."""
    with pytest.raises(CaseParseError) as exc_info:
        parse_case(text)

    assert error_codes(exc_info) == {"bad-format"}


def test_parse_case_reports_every_violation():
    """Test parsing is all-or-nothing and reports every problem together."""
    nodes = BASE["nodes"] + [{"id": "C1", "kind": "claim"}, {"id": "G1", "kind": "goal"}]

    with pytest.raises(CaseParseError, match="Case document rejected") as exc_info:
        parse_case(document(nodes=nodes, version=-1))

    assert error_codes(exc_info) == {"duplicate-id", "unknown-kind", "bad-version"}
    assert len(exc_info.value.to_record()["items"]) == 3


def test_serialize_case_is_stable(bundled_case):
    """Test serialization is deterministic and parses back to the same document."""
    text = serialize_case(bundled_case)

    assert serialize_case(parse_case(text)) == text
    assert case_to_dict(parse_case(text)) == case_to_dict(bundled_case)


def test_case_to_dict_ordering():
    """Test the document mapping orders nodes, edges and attachments."""
    case = parse_case(document())

    data = case_to_dict(case)

    assert [n["id"] for n in data["nodes"]] == ["C0", "C1", "D1", "E1"]
    assert [(e["from"], e["to"]) for e in data["edges"]] == [
        ("C1", "C0"),
        ("D1", "E1"),
        ("E1", "C1"),
    ]
    assert data["spi_attachments"] == [{"spi_id": "C1-SPI-1", "claim_id": "C1"}]
    assert data["history"] == []


def test_history_survives_serialization():
    """Test version history and acknowledgements are kept in the document."""
    history = [{"version": 2, "actions": [{"action": "reinstate", "node_id": "C1"}]}]
    case = parse_case(document(version=2, history=history, acknowledged_spis=["C1-SPI-1"]))

    reparsed = parse_case(serialize_case(case))

    assert reparsed.history == (
        VersionChange(version=2, actions=({"action": "reinstate", "node_id": "C1"},)),
    )
    assert reparsed.acknowledged_spis == frozenset({"C1-SPI-1"})


def test_load_case(tmp_path):
    """Test loading a case document from a file."""
    path = tmp_path / "case.yaml"
    path.write_text(serialize_case(parse_case(document())), encoding="utf-8")

    case = load_case(path)

    assert case.case_id == "small"
    assert case.top.id == "C0"
