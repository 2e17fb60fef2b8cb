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
import json
import logging

import pytest

from dscms.argument import NodeStatus
from dscms.consistency import ImpactReport
from dscms.exceptions import SnapshotDigestMismatch, SnapshotError, WorkspaceError
from dscms.governance import InsightCategory, Severity
from dscms.governance.routing import route
from dscms.workspace import Workspace, WorkspaceSnapshot, load, persist
from tests.unit.utils import catalog_for, chain_case, spi_status


def make_snapshot(**kwargs):
    case = chain_case()
    return WorkspaceSnapshot(case=case, catalog=catalog_for(case), **kwargs)


def busy_snapshot():
    case = chain_case().with_statuses({"C1": NodeStatus.INVALIDATED})
    return WorkspaceSnapshot(
        case=case,
        catalog=catalog_for(case),
        observation_count=4,
        statuses=(spi_status("C1-SPI-1", breached=True, value=9),),
        impact=ImpactReport(
            None,
            1,
            direct=frozenset({"C1"}),
            transitions={"C1": (NodeStatus.VALID, NodeStatus.INVALIDATED)},
        ),
        alerts=(route(Severity.HIGH_MEDIUM, [InsightCategory.SYSTEMIC_IMPACT], 1),),
        open_recoveries=("recovery-1-1",),
        audit_head="ab" * 32,
        recovery_counter=1,
    )


def test_workspace_layout(tmp_path):
    """Test a new workspace directory is created empty."""
    workspace = Workspace(tmp_path / "ws")

    assert workspace.snapshot_dir.is_dir()
    assert workspace.empty
    assert workspace.observations_path == tmp_path / "ws" / "observations.jsonl"
    assert workspace.audit_path == tmp_path / "ws" / "audit.jsonl"
    assert repr(workspace) == f"Workspace({tmp_path / 'ws'})"


def test_workspace_unusable(tmp_path):
    """Test a workspace path that is a file is refused."""
    path = tmp_path / "file"
    path.write_text("", encoding="utf-8")

    with pytest.raises(WorkspaceError, match="Cannot use workspace"):
        Workspace(path)


def test_persist_and_load(tmp_path):
    """Test the newest snapshot is loaded back with every field."""
    workspace = Workspace(tmp_path)
    snapshot = busy_snapshot()

    assert persist(workspace, make_snapshot()) == 1
    assert persist(workspace, snapshot) == 2

    loaded = load(workspace)
    assert loaded.to_dict() == snapshot.to_dict()
    assert loaded.alerts == snapshot.alerts
    assert loaded.impact == snapshot.impact
    assert loaded.case.node("C1").status is NodeStatus.INVALIDATED


def test_persist_keeps_generations(tmp_path):
    """Test only the newest generations are kept."""
    workspace = Workspace(tmp_path, generations=2)

    for count in range(4):
        workspace.persist(make_snapshot(observation_count=count))

    assert workspace.generations() == [3, 4]
    assert workspace.load().observation_count == 3
    assert not list(workspace.snapshot_dir.glob("*.tmp"))


def tear(path):
    path.write_text(path.read_text(encoding="utf-8")[:50], encoding="utf-8")


def tamper(path):
    text = path.read_text(encoding="utf-8")
    forged = text.replace('"observation_count": 1', '"observation_count": 7')
    path.write_text(forged, encoding="utf-8")


@pytest.mark.parametrize("corrupt", [tear, tamper])
def test_load_falls_back_to_previous_generation(tmp_path, caplog, corrupt):
    """Test a torn or tampered newest snapshot is skipped."""
    workspace = Workspace(tmp_path)
    workspace.persist(make_snapshot(observation_count=0))
    workspace.persist(make_snapshot(observation_count=1))
    corrupt(workspace.snapshot_dir / "snapshot-000002.json")

    with caplog.at_level(logging.WARNING):
        snapshot = workspace.load()

    assert snapshot.observation_count == 0
    assert "Snapshot generation 2 failed digest verification" in caplog.text


def test_load_generation_mismatch(tmp_path):
    """Test a snapshot whose digest does not match its body."""
    workspace = Workspace(tmp_path)
    workspace.persist(make_snapshot())
    path = workspace.snapshot_dir / "snapshot-000001.json"
    document = json.loads(path.read_text(encoding="utf-8"))
    document["body"]["audit_head"] = "forged"
    path.write_text(json.dumps(document), encoding="utf-8")

    with pytest.raises(SnapshotDigestMismatch) as exc_info:
        workspace.load_generation(1)

    assert exc_info.value.generation == 1


def test_load_without_snapshot(tmp_path):
    """Test loading fails when no generation is loadable."""
    workspace = Workspace(tmp_path)
    (workspace.snapshot_dir / "snapshot-000001.json").write_text("{", encoding="utf-8")
    (workspace.snapshot_dir / "notes.txt").write_text("", encoding="utf-8")

    assert workspace.generations() == [1]
    with pytest.raises(SnapshotError, match="No loadable snapshot"):
        workspace.load()
