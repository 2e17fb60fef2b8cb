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

"""Monitoring loop over one workspace: ingest, check, alert, recover and revalidate.

Every state-changing operation appends exactly one ingest, check or recovery
record, followed by one alert record per alert it emits and one gate record for the
gate evaluation it ran, and then persists a new workspace snapshot. Operations
are synchronous; callers sharing a monitor between tasks must serialize mutations
(see :mod:`dscms.service.writer`).
"""
from __future__ import annotations

import logging
import tempfile
from contextlib import contextmanager
from dataclasses import dataclass, replace
from datetime import datetime
from pathlib import Path
from typing import Any, Callable, Iterable, Iterator, Mapping, Optional, Union

from dscms.argument import SafetyCase
from dscms.argument.parser import load_case
from dscms.argument.validation import validate_structure
from dscms.consistency import ImpactReport, RevalidationReport
from dscms.consistency.engine import run_check
from dscms.consistency.recovery import RecoveryDocument, apply_recovery
from dscms.exceptions import StaleCaseVersion, ValidationFailed
from dscms.governance import Alert, GateDef, GateResult, Role
from dscms.governance.audit import SYSTEM_ACTOR, AuditEvent, AuditLog
from dscms.governance.gates import evaluate_gates, load_gates
from dscms.governance.report import governance_report
from dscms.governance.routing import classify, route
from dscms.ingestion import IngestReceipt, Observation, ObservationStore, ingest
from dscms.scenarios import Scenario
from dscms.spi import BreachEvent, SpiStatus
from dscms.spi.catalog import load_catalog
from dscms.utils import AUDIT_HASH, BUNDLED_DATA, format_timestamp, utcnow
from dscms.workspace import Workspace, WorkspaceSnapshot

logger = logging.getLogger(__name__)

BUNDLED_CASE = BUNDLED_DATA / "case" / "cyber-inability.yaml"
BUNDLED_CATALOG = BUNDLED_DATA / "catalog"

Actor = Union[Role, str]
AuditEntry = tuple[AuditEvent, dict[str, Any]]
Listener = Callable[[str, dict[str, Any]], None]


@dataclass(frozen=True)
class CheckOutcome:  # pylint: disable=too-many-instance-attributes
    """Result of one consistency check run by the monitor."""

    report: ImpactReport
    statuses: tuple[SpiStatus, ...]
    breaches: tuple[BreachEvent, ...] = ()
    alert: Optional[Alert] = None
    gates: tuple[GateResult, ...] = ()
    opened_recoveries: tuple[str, ...] = ()

    @property
    def emitted_alert(self) -> Optional[Alert]:
        """Alert emitted by this check; repeating the active alert emits nothing.

        :return: new alert or None
        :rtype: Optional[Alert]
        """
        return self.alert if self.opened_recoveries else None

    def to_dict(self) -> dict[str, Any]:
        """Serialize the outcome.

        :return: outcome record
        :rtype: dict[str, Any]
        """
        return {
            "impact": self.report.to_dict(),
            "breaches": [event.to_dict() for event in self.breaches],
            "alert": self.alert.to_dict() if self.alert else None,
            "gates": [gate.to_dict() for gate in self.gates],
            "opened_recoveries": list(self.opened_recoveries),
        }


@dataclass(frozen=True)
class IngestOutcome:
    """Receipt of an ingest and the check it triggered, if any."""

    receipt: IngestReceipt
    check: Optional[CheckOutcome] = None
    scenario: Optional[str] = None

    def to_dict(self) -> dict[str, Any]:
        """Serialize the outcome.

        :return: outcome record
        :rtype: dict[str, Any]
        """
        record: dict[str, Any] = {"receipt": self.receipt.to_dict()}
        if self.scenario is not None:
            record["scenario"] = self.scenario
        record["check"] = self.check.to_dict() if self.check else None
        return record


@dataclass(frozen=True)
class RevalidationOutcome:
    """Revalidation report with the recovery items it closed."""

    revalidation: RevalidationReport
    closed_recoveries: tuple[str, ...] = ()
    gates: tuple[GateResult, ...] = ()

    def to_dict(self) -> dict[str, Any]:
        """Serialize the outcome.

        :return: outcome record
        :rtype: dict[str, Any]
        """
        record = self.revalidation.to_dict()
        record["closed_recoveries"] = list(self.closed_recoveries)
        record["gates"] = [gate.to_dict() for gate in self.gates]
        return record


def _check_summary(outcome: CheckOutcome) -> dict[str, Any]:
    return {
        "case_version": outcome.report.case_version,
        "breached_spis": sorted(e.spi for e in outcome.breaches),
        "invalidated": outcome.report.invalidated,
        "under_review": outcome.report.under_review,
        "severity": outcome.alert.severity.value if outcome.alert else "none",
        "opened_recoveries": list(outcome.opened_recoveries),
    }


def _alert_record(alert: Alert, report: ImpactReport, recoveries: Iterable[str]) -> AuditEntry:
    payload = alert.to_dict()
    payload["invalidated"] = report.invalidated
    payload["under_review"] = report.under_review
    payload["recoveries"] = list(recoveries)
    return AuditEvent.ALERT, payload


def _gate_record(case_version: int, gates: Iterable[GateResult]) -> AuditEntry:
    return AuditEvent.GATE, {
        "case_version": case_version,
        "results": [gate.to_dict() for gate in gates],
    }


def _decision_records(outcome: CheckOutcome) -> list[AuditEntry]:
    records = []
    if alert := outcome.emitted_alert:
        records.append(_alert_record(alert, outcome.report, outcome.opened_recoveries))
    records.append(_gate_record(outcome.report.case_version, outcome.gates))
    return records


class Monitor:
    """Owner of one workspace and the only place its state changes."""

    def __init__(
        self,
        workspace: Workspace,
        snapshot: WorkspaceSnapshot,
        gates: Optional[Mapping[str, GateDef]] = None,
    ) -> None:
        """Create monitor over an already loaded snapshot.

        :param workspace: workspace
        :type workspace: Workspace
        :param snapshot: current snapshot of the workspace
        :type snapshot: WorkspaceSnapshot
        :param gates: gate configuration, defaults to the bundled one
        :type gates: Optional[Mapping[str, GateDef]]
        """
        self.workspace = workspace
        self.gate_defs = load_gates() if gates is None else dict(gates)
        self.audit = AuditLog(workspace.audit_path, AUDIT_HASH)
        self.store = ObservationStore.open(
            workspace.observations_path, limit=snapshot.observation_count
        )
        self._snapshot = snapshot
        self.listeners: list[Listener] = []

    def __repr__(self) -> str:
        """Representation of the monitor.

        :return: case id, version and workspace
        :rtype: str
        """
        return f"Monitor({self.case.case_id} v{self.case.version}, {self.workspace.path})"

    @classmethod
    def open(
        cls,
        path: Path,
        case_path: Optional[Path] = None,
        catalog_path: Optional[Path] = None,
        gates_path: Optional[Path] = None,
    ) -> Monitor:
        """Open the workspace, bootstrapping it from a case and catalog when empty.

        :param path: workspace directory
        :type path: Path
        :param case_path: case document for a new workspace, defaults to the bundled one
        :type case_path: Optional[Path]
        :param catalog_path: SPI catalog for a new workspace, defaults to the bundled one
        :type catalog_path: Optional[Path]
        :param gates_path: gate configuration file, defaults to the bundled one
        :type gates_path: Optional[Path]
        :return: monitor
        :rtype: Monitor
        :raises ValidationFailed: if a new workspace's case is structurally invalid
        """
        workspace = Workspace(path)
        gates = load_gates(gates_path)
        if not workspace.empty:
            return cls(workspace, workspace.load(), gates)

        case = load_case(case_path or BUNDLED_CASE)
        if violations := validate_structure(case):
            raise ValidationFailed(
                f"Case {case.case_id} is invalid: " + "; ".join(map(str, violations))
            )

        catalog = load_catalog(catalog_path or BUNDLED_CATALOG)
        workspace.observations_path.unlink(missing_ok=True)
        snapshot = WorkspaceSnapshot(case=case, catalog=catalog)
        monitor = cls(workspace, snapshot, gates)
        monitor._snapshot = replace(snapshot, audit_head=monitor.audit.head)
        workspace.persist(monitor._snapshot)
        logger.info("Initialized workspace '%s' with %s", workspace.path, case.case_id)
        return monitor

    @property
    def snapshot(self) -> WorkspaceSnapshot:
        """Current immutable snapshot.

        :return: snapshot
        :rtype: WorkspaceSnapshot
        """
        return self._snapshot

    @property
    def case(self) -> SafetyCase:
        """Current case version.

        :return: safety case
        :rtype: SafetyCase
        """
        return self._snapshot.case

    def subscribe(self, listener: Listener) -> None:
        """Register a callback receiving (kind, record) for every emitted event.

        :param listener: event callback
        :type listener: Listener
        """
        self.listeners.append(listener)

    def _emit(self, kind: str, record: dict[str, Any]) -> None:
        for listener in self.listeners:
            listener(kind, record)

    @contextmanager
    def _transaction(self) -> Iterator[None]:
        """Drop observations not covered by a snapshot when an operation fails."""
        try:
            yield
        except Exception:
            self.store = ObservationStore.open(
                self.workspace.observations_path, limit=self._snapshot.observation_count
            )
            raise

    def _commit(
        self,
        snapshot: WorkspaceSnapshot,
        event: AuditEvent,
        payload: dict[str, Any],
        actor: Actor,
        decisions: Iterable[AuditEntry] = (),
    ) -> None:
        self.audit.append(event, payload, actor)
        for decision, details in decisions:
            self.audit.append(decision, details, SYSTEM_ACTOR)
        self._snapshot = replace(
            snapshot, observation_count=len(self.store), audit_head=self.audit.head
        )
        self.workspace.persist(self._snapshot)

    def gates(self) -> list[GateResult]:
        """Evaluate every configured gate on the current snapshot.

        :return: gate results
        :rtype: list[GateResult]
        """
        snapshot = self._snapshot
        return evaluate_gates(
            snapshot.case, snapshot.statuses, snapshot.open_recoveries, self.gate_defs
        )

    def _run_check(
        self, now: datetime, changed_artifacts: Iterable[str] = ()
    ) -> tuple[WorkspaceSnapshot, CheckOutcome]:
        snapshot = self._snapshot
        result = run_check(
            snapshot.case,
            snapshot.catalog,
            self.store,
            now,
            {status.spi: status for status in snapshot.statuses},
            changed_artifacts,
        )
        categories, severity = classify(result.report, result.case)
        alert = route(severity, categories, result.case.version, result.report.reference)

        opened: tuple[str, ...] = ()
        counter = snapshot.recovery_counter
        if alert is not None and alert not in snapshot.alerts:
            counter += 1
            opened = (f"recovery-{result.case.version}-{counter}",)

        updated = replace(
            snapshot,
            case=result.case,
            statuses=tuple(result.statuses),
            impact=result.report,
            alerts=(alert,) if alert else (),
            open_recoveries=snapshot.open_recoveries + opened,
            recovery_counter=counter,
        )
        gates = evaluate_gates(
            updated.case, updated.statuses, updated.open_recoveries, self.gate_defs
        )
        outcome = CheckOutcome(
            report=result.report,
            statuses=tuple(result.statuses),
            breaches=tuple(result.events),
            alert=alert,
            gates=tuple(gates),
            opened_recoveries=opened,
        )
        return updated, outcome

    def _emit_check(self, outcome: CheckOutcome) -> None:
        for breach in outcome.breaches:
            self._emit("breach", breach.to_dict())
        if alert := outcome.emitted_alert:
            self._emit("alert", alert.to_dict())
        self._emit("check", _check_summary(outcome))
        for gate in outcome.gates:
            self._emit("gate", gate.to_dict())

    def check(
        self,
        now: Optional[datetime] = None,
        changed_artifacts: Iterable[str] = (),
        actor: Actor = SYSTEM_ACTOR,
    ) -> CheckOutcome:
        """Evaluate every SPI and check the case against the breaches.

        :param now: evaluation time, defaults to now
        :type now: Optional[datetime]
        :param changed_artifacts: changed artifact references, defaults to ()
        :type changed_artifacts: Iterable[str]
        :param actor: role requesting the check, defaults to 'system'
        :type actor: Actor
        :return: check outcome
        :rtype: CheckOutcome
        """
        now = now or utcnow()
        changed_artifacts = sorted(changed_artifacts)
        updated, outcome = self._run_check(now, changed_artifacts)
        payload = {"at": format_timestamp(now), "changed_artifacts": changed_artifacts}
        payload.update(_check_summary(outcome))
        self._commit(updated, AuditEvent.CHECK, payload, actor, _decision_records(outcome))
        self._emit_check(outcome)
        return outcome

    def ingest(
        self,
        observations: Iterable[Observation],
        now: Optional[datetime] = None,
        actor: Actor = SYSTEM_ACTOR,
    ) -> IngestOutcome:
        """Append observations and check the case when any of them is new.

        :param observations: observations
        :type observations: Iterable[Observation]
        :param now: evaluation time of the triggered check, defaults to now
        :type now: Optional[datetime]
        :param actor: role submitting the observations, defaults to 'system'
        :type actor: Actor
        :return: ingest receipt and triggered check
        :rtype: IngestOutcome
        """
        now = now or utcnow()
        with self._transaction():
            receipt = ingest(self.store, observations, self._snapshot.catalog)
            updated, outcome = self._snapshot, None
            if receipt.evaluation_trigger:
                updated, outcome = self._run_check(now)

            payload: dict[str, Any] = {"at": format_timestamp(now), **receipt.to_dict()}
            payload["check"] = _check_summary(outcome) if outcome else None
            decisions = _decision_records(outcome) if outcome else []
            self._commit(updated, AuditEvent.INGEST, payload, actor, decisions)

        if outcome is not None:
            self._emit_check(outcome)
        return IngestOutcome(receipt, outcome)

    def simulate(self, scenario: Scenario, actor: Actor = SYSTEM_ACTOR) -> IngestOutcome:
        """Replay a scenario: ingest its observations, then check at its trigger time.

        :param scenario: change scenario fixture
        :type scenario: Scenario
        :param actor: role injecting the scenario, defaults to 'system'
        :type actor: Actor
        :return: ingest receipt and check outcome
        :rtype: IngestOutcome
        """
        logger.info("Simulating %s: %s", scenario.name, scenario.title)
        with self._transaction():
            receipt = ingest(self.store, scenario.observations, self._snapshot.catalog)
            updated, outcome = self._run_check(scenario.trigger)
            payload = {
                "scenario": scenario.name,
                "at": format_timestamp(scenario.trigger),
                **receipt.to_dict(),
                "check": _check_summary(outcome),
            }
            self._commit(updated, AuditEvent.INGEST, payload, actor, _decision_records(outcome))

        self._emit_check(outcome)
        return IngestOutcome(receipt, outcome, scenario.name)

    def recover(self, document: RecoveryDocument, actor: Actor = SYSTEM_ACTOR) -> SafetyCase:
        """Apply a batch of recovery actions as a new case version.

        :param document: recovery actions and the case version they were drafted against
        :type document: RecoveryDocument
        :param actor: role applying the recovery, defaults to 'system'
        :type actor: Actor
        :return: new case version
        :rtype: SafetyCase
        :raises StaleCaseVersion: if the cited base version is not the current one
        """
        snapshot = self._snapshot
        if document.base_version is not None and document.base_version != snapshot.case.version:
            raise StaleCaseVersion(document.base_version, snapshot.case.version)

        case, catalog = apply_recovery(snapshot.case, document.actions, snapshot.catalog)
        payload = {
            "from_version": snapshot.case.version,
            "to_version": case.version,
            "actions": list(case.history[-1].actions),
        }
        # the impact report belongs to the superseded version until revalidation
        updated = replace(snapshot, case=case, catalog=catalog, impact=None)
        gates = evaluate_gates(
            updated.case, updated.statuses, updated.open_recoveries, self.gate_defs
        )
        decisions = [_gate_record(case.version, gates)]
        self._commit(updated, AuditEvent.RECOVERY, payload, actor, decisions)
        self._emit("recovery", payload)
        for gate in gates:
            self._emit("gate", gate.to_dict())
        return case

    def revalidate(
        self, now: Optional[datetime] = None, actor: Actor = SYSTEM_ACTOR
    ) -> RevalidationOutcome:
        """Re-run the consistency check; a clean outcome closes every open recovery item.

        :param now: evaluation time, defaults to now
        :type now: Optional[datetime]
        :param actor: role requesting the revalidation, defaults to 'system'
        :type actor: Actor
        :return: revalidation outcome
        :rtype: RevalidationOutcome
        """
        now = now or utcnow()
        snapshot = self._snapshot
        result = run_check(
            snapshot.case,
            snapshot.catalog,
            self.store,
            now,
            {status.spi: status for status in snapshot.statuses},
        )
        revalidation = RevalidationReport(clean=result.report.empty, residual=result.report)
        closed = snapshot.open_recoveries if revalidation.clean else ()
        alerts = snapshot.alerts
        if revalidation.clean:
            alerts = ()

        updated = replace(
            snapshot,
            case=result.case,
            statuses=tuple(result.statuses),
            impact=result.report,
            alerts=alerts,
            open_recoveries=() if revalidation.clean else snapshot.open_recoveries,
        )
        gates = evaluate_gates(
            updated.case, updated.statuses, updated.open_recoveries, self.gate_defs
        )
        outcome = RevalidationOutcome(revalidation, closed, tuple(gates))
        payload = {
            "at": format_timestamp(now),
            "revalidation": True,
            "case_version": result.case.version,
            "clean": revalidation.clean,
            "residual": result.report.invalidated + result.report.under_review,
            "closed_recoveries": list(closed),
        }
        decisions = [_gate_record(result.case.version, gates)]
        self._commit(updated, AuditEvent.CHECK, payload, actor, decisions)
        logger.info(
            "revalidation of %s v%d: %s",
            result.case.case_id,
            result.case.version,
            "clean" if revalidation.clean else "residual impact remains",
        )
        self._emit("revalidate", payload)
        for gate in gates:
            self._emit("gate", gate.to_dict())
        return outcome

    def report(self) -> dict[str, Any]:
        """Governance report of the current snapshot.

        :return: report document
        :rtype: dict[str, Any]
        """
        snapshot = self._snapshot
        return governance_report(
            snapshot.case,
            snapshot.statuses,
            snapshot.alerts,
            self.gates(),
            snapshot.impact,
            snapshot.catalog,
            snapshot.open_recoveries,
        )


def simulate_isolated(
    scenario: Scenario,
    case_path: Optional[Path] = None,
    catalog_path: Optional[Path] = None,
) -> tuple[IngestOutcome, dict[str, Any]]:
    """Replay a scenario in a scratch workspace that is removed afterwards.

    :param scenario: change scenario fixture
    :type scenario: Scenario
    :param case_path: case document, defaults to the bundled one
    :type case_path: Optional[Path]
    :param catalog_path: SPI catalog, defaults to the bundled one
    :type catalog_path: Optional[Path]
    :return: simulation outcome and the governance report after it
    :rtype: tuple[IngestOutcome, dict[str, Any]]
    """
    with tempfile.TemporaryDirectory(prefix="dscms-") as scratch:
        monitor = Monitor.open(Path(scratch), case_path, catalog_path)
        outcome = monitor.simulate(scenario)
        return outcome, monitor.report()
