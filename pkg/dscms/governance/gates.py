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

"""Lifecycle decision gates over the safety case."""
from __future__ import annotations

import logging
from pathlib import Path
from typing import Iterable, Mapping, Optional

import yaml

from dscms.argument import NodeStatus, SafetyCase
from dscms.exceptions import UnknownGate, WorkspaceError
from dscms.governance import GateDef, GateResult
from dscms.spi import SpiStatus
from dscms.utils import BUNDLED_DATA

logger = logging.getLogger(__name__)

DEFAULT_GATES = BUNDLED_DATA / "gates.yaml"
BLOCKING_STATUSES = (NodeStatus.INVALIDATED, NodeStatus.UNDER_REVIEW)


def load_gates(path: Optional[Path] = None) -> dict[str, GateDef]:
    """Load gate configuration.

    :param path: gates file, defaults to the bundled configuration
    :type path: Optional[Path]
    :return: gates by id
    :rtype: dict[str, GateDef]
    :raises WorkspaceError: if the file is not a valid gate configuration
    """
    path = Path(path or DEFAULT_GATES)
    try:
        data = yaml.safe_load(path.read_text(encoding="utf-8"))
        gates = {
            str(record["id"]): GateDef(
                id=str(record["id"]),
                stage=str(record["stage"]),
                description=str(record.get("description", "")),
            )
            for record in data["gates"]
        }
    except (OSError, yaml.YAMLError, KeyError, TypeError) as exc:
        raise WorkspaceError(f"Invalid gate configuration '{path}': {exc}") from exc

    logger.debug("loaded gates %s from %s", sorted(gates), path)
    return gates


def gate_blockers(
    case: SafetyCase, statuses: Iterable[SpiStatus], open_recoveries: Iterable[str]
) -> tuple[str, ...]:
    """Everything that currently blocks lifecycle progression.

    :param case: safety case, annotated by the last check
    :type case: SafetyCase
    :param statuses: current SPI statuses
    :type statuses: Iterable[SpiStatus]
    :param open_recoveries: open recovery item ids
    :type open_recoveries: Iterable[str]
    :return: blocking claim ids, stale SPI ids and open recovery ids, each group sorted
    :rtype: tuple[str, ...]
    """
    claims = [claim.id for claim in case.claims() if claim.status in BLOCKING_STATUSES]
    stale = sorted(status.spi for status in statuses if status.stale)
    return tuple(claims + stale + sorted(open_recoveries))


def evaluate_gate(
    gate: str,
    case: SafetyCase,
    statuses: Iterable[SpiStatus],
    open_recoveries: Iterable[str],
    gates: Optional[Mapping[str, GateDef]] = None,
) -> GateResult:
    """Evaluate a decision gate.

    :param gate: gate id
    :type gate: str
    :param case: safety case, annotated by the last check
    :type case: SafetyCase
    :param statuses: current SPI statuses
    :type statuses: Iterable[SpiStatus]
    :param open_recoveries: open recovery item ids
    :type open_recoveries: Iterable[str]
    :param gates: gate configuration, defaults to the bundled one
    :type gates: Optional[Mapping[str, GateDef]]
    :return: gate result
    :rtype: GateResult
    :raises UnknownGate: if the gate is not configured
    """
    gates = load_gates() if gates is None else gates
    if gate not in gates:
        raise UnknownGate(f"Unknown gate '{gate}', configured gates: {', '.join(sorted(gates))}")

    result = GateResult(
        gate=gate,
        blockers=gate_blockers(case, statuses, open_recoveries),
        stage=gates[gate].stage,
    )
    logger.info(
        "gate %s (%s): %s", gate, result.stage, "passed" if result.passed else "blocked"
    )
    return result


def evaluate_gates(
    case: SafetyCase,
    statuses: Iterable[SpiStatus],
    open_recoveries: Iterable[str],
    gates: Optional[Mapping[str, GateDef]] = None,
) -> list[GateResult]:
    """Evaluate every configured gate.

    :param case: safety case, annotated by the last check
    :type case: SafetyCase
    :param statuses: current SPI statuses
    :type statuses: Iterable[SpiStatus]
    :param open_recoveries: open recovery item ids
    :type open_recoveries: Iterable[str]
    :param gates: gate configuration, defaults to the bundled one
    :type gates: Optional[Mapping[str, GateDef]]
    :return: gate results ordered by gate id
    :rtype: list[GateResult]
    """
    gates = load_gates() if gates is None else gates
    statuses, open_recoveries = list(statuses), list(open_recoveries)
    return [
        evaluate_gate(gate, case, statuses, open_recoveries, gates) for gate in sorted(gates)
    ]
