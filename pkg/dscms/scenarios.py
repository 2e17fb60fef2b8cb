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

"""Bundled change scenarios used for simulation and war-gaming drills."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path
from typing import Any, Optional

import yaml

from dscms.consistency.recovery import RecoveryDocument, parse_recovery_document
from dscms.exceptions import UnknownScenario
from dscms.ingestion import Observation
from dscms.ingestion.feeds import load_observations
from dscms.utils import BUNDLED_DATA, parse_timestamp

logger = logging.getLogger(__name__)

SCENARIOS_DIR = BUNDLED_DATA / "scenarios"


@dataclass(frozen=True)
class ScenarioExpectation:
    """Outcome a scenario is expected to produce."""

    breached_spis: frozenset[str] = frozenset()
    invalidated: frozenset[str] = frozenset()
    under_review: frozenset[str] = frozenset()
    categories: frozenset[str] = frozenset()
    severity: str = "none"
    requires_argument_rebuild: bool = False


@dataclass(frozen=True)
class Scenario:  # pylint: disable=too-many-instance-attributes
    """Bundled change scenario."""

    name: str
    title: str
    trigger: datetime
    observations: tuple[Observation, ...]
    expected: ScenarioExpectation
    recovery: Optional[RecoveryDocument] = None
    recovery_clean: Optional[bool] = None
    raw: dict[str, Any] = field(default_factory=dict, compare=False, repr=False)


def available_scenarios(directory: Path = SCENARIOS_DIR) -> list[str]:
    """Names of the bundled scenarios.

    :param directory: scenario directory, defaults to the bundled one
    :type directory: Path
    :return: sorted scenario names
    :rtype: list[str]
    """
    return sorted(path.stem for path in Path(directory).glob("*.yaml"))


def load_scenario(name: str, directory: Path = SCENARIOS_DIR) -> Scenario:
    """Load a bundled scenario with its observations.

    :param name: scenario name, e.g. 'scenario-1'
    :type name: str
    :param directory: scenario directory, defaults to the bundled one
    :type directory: Path
    :return: scenario
    :rtype: Scenario
    :raises UnknownScenario: if there is no such scenario
    """
    path = Path(directory) / f"{name}.yaml"
    if not path.is_file():
        raise UnknownScenario(
            f"Unknown scenario '{name}', available: {', '.join(available_scenarios(directory))}"
        )

    data = yaml.safe_load(path.read_text(encoding="utf-8"))
    parsed = load_observations(path.parent / data["observations"])
    expected = data.get("expected") or {}
    recovery = data.get("recovery")
    scenario = Scenario(
        name=str(data.get("name", name)),
        title=str(data.get("title", "")),
        trigger=parse_timestamp(data["trigger"]),
        observations=tuple(parsed.observations),
        expected=ScenarioExpectation(
            breached_spis=frozenset(expected.get("breached_spis") or []),
            invalidated=frozenset(expected.get("invalidated") or []),
            under_review=frozenset(expected.get("under_review") or []),
            categories=frozenset(expected.get("categories") or []),
            severity=str(expected.get("severity", "none")),
            requires_argument_rebuild=bool(expected.get("requires_argument_rebuild")),
        ),
        recovery=parse_recovery_document(recovery) if recovery else None,
        recovery_clean=recovery.get("clean") if recovery else None,
        raw=data,
    )
    logger.debug(
        "loaded %s with %d observation(s), trigger %s",
        scenario.name,
        len(scenario.observations),
        scenario.trigger.isoformat(),
    )
    return scenario
