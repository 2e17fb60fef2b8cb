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
"""Module to provide helper for writing unit tests."""
import random
from dataclasses import replace
from datetime import datetime, timedelta, timezone
from typing import Any, Iterable, Optional

from dscms.argument import (
    ArgNode,
    NodeKind,
    NodeStatus,
    PropagationPolicy,
    RelationKind,
    Relationship,
    SafetyCase,
    default_policy,
)
from dscms.consistency import ChangeScenario
from dscms.ingestion import Observation
from dscms.spi import (
    Aggregation,
    Comparator,
    EvidenceSource,
    SpiCatalog,
    SpiDef,
    SpiKind,
    SpiStatus,
    ThresholdSpec,
    Unit,
)

NOW = datetime(2025, 3, 1, tzinfo=timezone.utc)
LOADED_AT = datetime(2025, 1, 1, tzinfo=timezone.utc)


def ts(day: float, base: datetime = NOW) -> datetime:
    """Timestamp a number of days before base."""
    return base - timedelta(days=day)


def node(node_id: str, kind: NodeKind = NodeKind.CLAIM, *tags: str, **kwargs: Any) -> ArgNode:
    """Build an argument node."""
    return ArgNode(id=node_id, kind=kind, tags=frozenset(tags), **kwargs)


def edge(
    src: str,
    dst: str,
    rel: RelationKind = RelationKind.SUPPORTS,
    policy: Optional[PropagationPolicy] = None,
) -> Relationship:
    """Build a relationship, with the flag policy when none is given."""
    return Relationship(src, dst, rel, policy or PropagationPolicy.FLAG)


def make_case(
    nodes: Iterable[ArgNode],
    edges: Iterable[Relationship] = (),
    attachments: Optional[dict[str, str]] = None,
    **kwargs: Any,
) -> SafetyCase:
    """Build a safety case."""
    return SafetyCase(
        case_id="test-case",
        version=kwargs.pop("version", 1),
        nodes={n.id: n for n in nodes},
        edges=tuple(edges),
        spi_attachments=attachments or {},
        **kwargs,
    )


def chain_case() -> SafetyCase:
    """Top claim C0 supported by C1 (invalidate) supported by C2 (spi-gated) and C3 (flag).

    Evidence E1 supports C2 and defeater D1 challenges E1.
    """
    return make_case(
        [
            node("C0", NodeKind.CLAIM, "top", "capability-uplift-indicator"),
            node("C1", NodeKind.CLAIM, "systemic-threat-indicator"),
            node("C2", NodeKind.CLAIM, "process-indicator", "artifact:suite"),
            node("C3", NodeKind.CLAIM, "process-indicator"),
            node("E1", NodeKind.EVIDENCE),
            node("D1", NodeKind.DEFEATER, "artifact:detector"),
            node("X1", NodeKind.CONTEXT, "artifact:deployment"),
        ],
        [
            edge("C1", "C0", policy=PropagationPolicy.INVALIDATE),
            edge("C2", "C1", policy=PropagationPolicy.SPI_GATED),
            edge("C3", "C1", policy=PropagationPolicy.FLAG),
            edge("E1", "C2", policy=PropagationPolicy.INVALIDATE),
            edge("D1", "E1", RelationKind.CHALLENGES, PropagationPolicy.INVALIDATE),
            edge("X1", "C0", RelationKind.IN_CONTEXT_OF),
        ],
        {"C1-SPI-1": "C1", "C2-SPI-1": "C2", "C3-SPI-1": "C3"},
    )


def make_spi(spi_id: str = "C1-SPI-1", claim: str = "C1", **kwargs: Any) -> SpiDef:
    """Build an SPI counting events over 30 days with a threshold of 5."""
    fields: dict[str, Any] = {
        "title": f"{spi_id} title",
        "unit": Unit.COUNT,
        "kind": SpiKind.LAGGING,
        "evidence_source": EvidenceSource.INCIDENTS,
        "aggregation": Aggregation.COUNT_WINDOW,
        "window_days": 30,
        "comparator": Comparator.GTE,
        "threshold": ThresholdSpec(5),
        "update_frequency_days": 30,
    }
    fields.update(kwargs)
    return SpiDef(id=spi_id, claim=claim, **fields)


def catalog_for(case: SafetyCase, loaded_at: datetime = LOADED_AT) -> SpiCatalog:
    """Catalog with one default SPI for every attachment of the case."""
    return SpiCatalog(
        [make_spi(spi_id, claim) for spi_id, claim in case.spi_attachments.items()], loaded_at
    )


def obs(
    spi: str, when: datetime, value: float = 1, source: EvidenceSource = EvidenceSource.INCIDENTS
) -> Observation:
    """Build an observation."""
    return Observation(spi=spi, ts=when, value=value, source=source)


def spi_status(
    spi: str,
    breached: bool = False,
    value: Optional[float] = None,
    stale: bool = False,
    unit: Unit = Unit.COUNT,
) -> SpiStatus:
    """Build an SPI status evaluated at NOW."""
    return SpiStatus(
        spi=spi,
        value=value,
        breached=breached,
        stale=stale,
        evaluated_at=NOW,
        contributing_observation_count=0,
        unit=unit,
    )


def random_case(
    rng: random.Random, size: int = 12
) -> tuple[SafetyCase, SpiCatalog, ChangeScenario, list[SpiStatus]]:
    """Random structurally valid case with a catalog, a scenario and SPI statuses.

    Claims only support claims with a lower index, so the supports graph is acyclic and
    every claim reaches the top claim C0.
    """
    policies = list(PropagationPolicy)
    artifacts = ["artifact:a", "artifact:b", "artifact:c"]
    nodes = [node("C0", NodeKind.CLAIM, "top")]
    edges: dict[tuple[str, str, str], Relationship] = {}

    def add(src: str, dst: str, rel: RelationKind, policy: PropagationPolicy) -> None:
        edges.setdefault((src, dst, rel.value), Relationship(src, dst, rel, policy))

    for index in range(1, size):
        tags = [rng.choice(artifacts)] if rng.random() < 0.2 else []
        nodes.append(node(f"C{index}", NodeKind.CLAIM, *tags))
        for parent in rng.sample(range(index), k=min(index, rng.randint(1, 2))):
            add(f"C{index}", f"C{parent}", RelationKind.SUPPORTS, rng.choice(policies))

    for index in range(rng.randint(0, 3)):
        target = f"C{rng.randrange(size)}"
        nodes.append(node(f"E{index}", NodeKind.EVIDENCE, rng.choice(artifacts)))
        policy = default_policy(RelationKind.SUPPORTS, NodeKind.EVIDENCE)
        add(f"E{index}", target, RelationKind.SUPPORTS, rng.choice([policy, *policies]))
        if rng.random() < 0.5:
            nodes.append(node(f"D{index}", NodeKind.DEFEATER, rng.choice(artifacts)))
            add(f"D{index}", f"E{index}", RelationKind.CHALLENGES, rng.choice(policies))

    if rng.random() < 0.5:
        nodes.append(node("X0", NodeKind.CONTEXT, rng.choice(artifacts)))
        add("X0", f"C{rng.randrange(size)}", RelationKind.IN_CONTEXT_OF, rng.choice(policies))

    attachments = {
        f"C{index}-SPI-{k}": f"C{index}"
        for index in range(size)
        for k in range(1, rng.randint(0, 2) + 1)
    }
    acknowledged = frozenset(spi for spi in attachments if rng.random() < 0.1)
    case = make_case(nodes, edges.values(), attachments, acknowledged_spis=acknowledged)
    catalog = catalog_for(case)

    breached = {spi for spi in attachments if rng.random() < 0.3}
    statuses = [spi_status(spi, spi in breached) for spi in sorted(attachments)]
    scenario_breaches = frozenset(spi for spi in breached if rng.random() < 0.7)
    used = sorted({a.removeprefix("artifact:") for n in nodes for a in n.tags if ":" in a})
    changed = frozenset(a for a in used if rng.random() < 0.3)
    if not scenario_breaches and not changed:
        if breached:
            scenario_breaches = frozenset([sorted(breached)[0]])
        elif used:
            changed = frozenset(used[:1])
        else:
            nodes[1] = replace(nodes[1], tags=frozenset({"artifact:a"}))
            case = make_case(nodes, edges.values(), attachments, acknowledged_spis=acknowledged)
            changed = frozenset({"a"})

    return case, catalog, ChangeScenario(scenario_breaches, changed), statuses


def statuses_of(case: SafetyCase) -> dict[str, NodeStatus]:
    """Non-valid node statuses of a case."""
    return {
        node_id: status
        for node_id, status in case.statuses().items()
        if status is not NodeStatus.VALID
    }
