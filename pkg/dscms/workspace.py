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

"""Crash-safe persistence of the workspace state.

Each persist writes a new snapshot generation to a temporary file and renames it
into place, so a reader sees either the previous or the new complete snapshot.
Snapshots carry a digest of their body; a generation failing verification is
skipped in favour of the one before it.
"""
from __future__ import annotations

import hashlib
import json
import logging
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

from dscms.argument import SafetyCase
from dscms.argument.parser import case_to_dict, parse_case
from dscms.consistency import ImpactReport
from dscms.exceptions import SnapshotDigestMismatch, SnapshotError, WorkspaceError
from dscms.governance import Alert
from dscms.spi import SpiCatalog, SpiStatus
from dscms.spi.catalog import catalog_from_dict, catalog_to_dict
from dscms.utils import SNAPSHOT_GENERATIONS, canonical_json, write_atomic

logger = logging.getLogger(__name__)

SNAPSHOT_DIR = "snapshots"
OBSERVATIONS_FILE = "observations.jsonl"
AUDIT_FILE = "audit.jsonl"
SNAPSHOT_PATTERN = re.compile(r"^snapshot-(\d{6})\.json$")


@dataclass(frozen=True)
class WorkspaceSnapshot:  # pylint: disable=too-many-instance-attributes
    """Consistent state of the workspace for one case version."""

    case: SafetyCase
    catalog: SpiCatalog
    observation_count: int = 0
    statuses: tuple[SpiStatus, ...] = ()
    impact: Optional[ImpactReport] = None
    alerts: tuple[Alert, ...] = ()
    open_recoveries: tuple[str, ...] = ()
    audit_head: str = ""
    recovery_counter: int = field(default=0)

    def to_dict(self) -> dict[str, Any]:
        """Serialize the snapshot.

        :return: snapshot body
        :rtype: dict[str, Any]
        """
        return {
            "case": case_to_dict(self.case),
            "catalog": catalog_to_dict(self.catalog),
            "observation_count": self.observation_count,
            "statuses": [status.to_dict() for status in self.statuses],
            "impact": self.impact.to_dict() if self.impact else None,
            "alerts": [alert.to_dict() for alert in self.alerts],
            "open_recoveries": list(self.open_recoveries),
            "audit_head": self.audit_head,
            "recovery_counter": self.recovery_counter,
        }

    @classmethod
    def from_dict(cls, body: dict[str, Any]) -> WorkspaceSnapshot:
        """Load snapshot from its serialized form.

        :param body: snapshot body
        :type body: dict[str, Any]
        :return: snapshot
        :rtype: WorkspaceSnapshot
        """
        return cls(
            case=parse_case(body["case"]),
            catalog=catalog_from_dict(body["catalog"]),
            observation_count=int(body["observation_count"]),
            statuses=tuple(SpiStatus.from_dict(record) for record in body["statuses"]),
            impact=ImpactReport.from_dict(body["impact"]) if body.get("impact") else None,
            alerts=tuple(Alert.from_dict(record) for record in body["alerts"]),
            open_recoveries=tuple(body["open_recoveries"]),
            audit_head=str(body["audit_head"]),
            recovery_counter=int(body.get("recovery_counter", 0)),
        )


def _digest(body: dict[str, Any]) -> str:
    return hashlib.sha256(canonical_json(body).encode("utf-8")).hexdigest()


class Workspace:
    """Directory holding snapshots, the observation store and the audit log."""

    def __init__(self, path: Path, generations: int = SNAPSHOT_GENERATIONS) -> None:
        """Open the workspace directory, creating it when missing.

        :param path: workspace directory
        :type path: Path
        :param generations: number of snapshot generations kept
        :type generations: int
        :raises WorkspaceError: if the directory cannot be created
        """
        self.path = Path(path)
        self.keep = max(1, generations)
        try:
            self.snapshot_dir.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise WorkspaceError(f"Cannot use workspace '{self.path}': {exc}") from exc

    def __repr__(self) -> str:
        """Representation of the workspace.

        :return: workspace path
        :rtype: str
        """
        return f"Workspace({self.path})"

    @property
    def snapshot_dir(self) -> Path:
        """Directory of snapshot generations.

        :return: path
        :rtype: Path
        """
        return self.path / SNAPSHOT_DIR

    @property
    def observations_path(self) -> Path:
        """Observation store file.

        :return: path
        :rtype: Path
        """
        return self.path / OBSERVATIONS_FILE

    @property
    def audit_path(self) -> Path:
        """Audit log file.

        :return: path
        :rtype: Path
        """
        return self.path / AUDIT_FILE

    def generations(self) -> list[int]:
        """Snapshot generations on disk.

        :return: generation numbers, oldest first
        :rtype: list[int]
        """
        found = []
        for file in self.snapshot_dir.iterdir():
            if match := SNAPSHOT_PATTERN.match(file.name):
                found.append(int(match.group(1)))

        return sorted(found)

    def _generation_path(self, generation: int) -> Path:
        return self.snapshot_dir / f"snapshot-{generation:06d}.json"

    @property
    def empty(self) -> bool:
        """Whether no snapshot was ever persisted.

        :return: True if there is no snapshot
        :rtype: bool
        """
        return not self.generations()

    def persist(self, snapshot: WorkspaceSnapshot) -> int:
        """Write the snapshot as a new generation.

        :param snapshot: workspace snapshot
        :type snapshot: WorkspaceSnapshot
        :return: generation number written
        :rtype: int
        """
        existing = self.generations()
        generation = existing[-1] + 1 if existing else 1
        body = snapshot.to_dict()
        document = {"generation": generation, "digest": _digest(body), "body": body}

        text = json.dumps(document, sort_keys=True, indent=1)
        write_atomic(self._generation_path(generation), text)

        for old in (existing + [generation])[: -self.keep]:
            self._generation_path(old).unlink(missing_ok=True)

        logger.debug("persisted %s generation %d", self, generation)
        return generation

    def load_generation(self, generation: int) -> WorkspaceSnapshot:
        """Load one snapshot generation.

        :param generation: generation number
        :type generation: int
        :return: snapshot
        :rtype: WorkspaceSnapshot
        :raises SnapshotDigestMismatch: if the file is torn or its digest does not match
        """
        path = self._generation_path(generation)
        try:
            document = json.loads(path.read_text(encoding="utf-8"))
            body = document["body"]
        except (OSError, ValueError, KeyError, TypeError) as exc:
            raise SnapshotDigestMismatch(generation, "unreadable") from exc

        if document.get("digest") != _digest(body):
            raise SnapshotDigestMismatch(generation)

        try:
            return WorkspaceSnapshot.from_dict(body)
        except Exception as exc:  # pylint: disable=broad-exception-caught
            raise SnapshotDigestMismatch(generation, str(exc)) from exc

    def load(self) -> WorkspaceSnapshot:
        """Load the newest intact snapshot.

        :return: snapshot
        :rtype: WorkspaceSnapshot
        :raises SnapshotError: if no generation can be loaded
        """
        for generation in reversed(self.generations()):
            try:
                snapshot = self.load_generation(generation)
            except SnapshotDigestMismatch as exc:
                logger.warning("%s, falling back to the previous generation", exc)
                continue

            logger.debug("loaded %s generation %d", self, generation)
            return snapshot

        raise SnapshotError(f"No loadable snapshot in '{self.snapshot_dir}'")


def persist(workspace: Workspace, snapshot: WorkspaceSnapshot) -> int:
    """Persist a snapshot to the workspace.

    :param workspace: workspace
    :type workspace: Workspace
    :param snapshot: workspace snapshot
    :type snapshot: WorkspaceSnapshot
    :return: generation number written
    :rtype: int
    """
    return workspace.persist(snapshot)


def load(workspace: Workspace) -> WorkspaceSnapshot:
    """Load the newest intact snapshot of the workspace.

    :param workspace: workspace
    :type workspace: Workspace
    :return: snapshot
    :rtype: WorkspaceSnapshot
    """
    return workspace.load()
