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

"""HTTP interface of the monitor.

Read endpoints serve the current immutable snapshot. Mutating endpoints go through
the single :class:`WorkspaceWriter`, so state changes are applied one at a time.
"""

import asyncio
import logging
from contextlib import asynccontextmanager
from itertools import islice
from pathlib import Path
from typing import Any, AsyncIterator, Callable, Optional

from fastapi import Depends, FastAPI, Header, HTTPException, Query, Request
from fastapi.responses import HTMLResponse, JSONResponse
from sse_starlette.sse import EventSourceResponse

from dscms.argument.parser import case_to_dict
from dscms.consistency import ImpactReport
from dscms.consistency.recovery import parse_recovery_document
from dscms.exceptions import (
    AuditLogError,
    DSCMSException,
    SnapshotError,
    StaleCaseVersion,
    UnknownScenario,
    WorkspaceError,
)
from dscms.governance import Role
from dscms.governance.audit import verify_chain
from dscms.governance.report import spi_record
from dscms.ingestion import Observation
from dscms.monitor import Monitor
from dscms.scenarios import available_scenarios, load_scenario
from dscms.service.auth import Scope, TokenConfig
from dscms.service.broker import EventBroker
from dscms.service.models import (
    ObservationBatch,
    RecoveryRequest,
    RevalidateRequest,
    ScenarioRequest,
)
from dscms.service.writer import WorkspaceWriter
from dscms.utils import parse_timestamp

logger = logging.getLogger(__name__)

STATIC_DIR = Path(__file__).parent / "static"
STREAM_TIMEOUT = 15.0
ERROR_STATUS: tuple[tuple[type[DSCMSException], int], ...] = (
    (StaleCaseVersion, 409),
    (UnknownScenario, 404),
    (SnapshotError, 500),
    (WorkspaceError, 500),
    (AuditLogError, 500),
)


def error_status(exc: DSCMSException) -> int:
    """HTTP status of a DSCMS error; anything not listed is an unprocessable request.

    :param exc: error
    :type exc: DSCMSException
    :return: HTTP status code
    :rtype: int
    """
    for kind, status in ERROR_STATUS:
        if isinstance(exc, kind):
            return status

    return 422


def bearer_token(authorization: Optional[str]) -> Optional[str]:
    """Token of an 'Authorization: Bearer <token>' header.

    :param authorization: header value
    :type authorization: Optional[str]
    :return: token, None if the header is missing or uses another scheme
    :rtype: Optional[str]
    """
    scheme, _, value = (authorization or "").partition(" ")
    if scheme.lower() != "bearer":
        return None

    return value.strip() or None


def _timestamp(value: Optional[str]) -> Any:
    if value is None:
        return None
    try:
        return parse_timestamp(value)
    except ValueError as exc:
        raise HTTPException(status_code=422, detail=f"invalid timestamp: {exc}") from exc


def create_app(  # pylint: disable=too-many-locals,too-many-statements
    monitor: Monitor, tokens: TokenConfig, broker: Optional[EventBroker] = None
) -> FastAPI:
    """Build the service around a monitor.

    :param monitor: monitor owning the workspace
    :type monitor: Monitor
    :param tokens: token configuration
    :type tokens: TokenConfig
    :param broker: event broker, defaults to a new one
    :type broker: Optional[EventBroker]
    :return: application
    :rtype: FastAPI
    """
    broker = broker or EventBroker()
    writer = WorkspaceWriter(monitor)
    monitor.subscribe(broker.publish)

    @asynccontextmanager
    async def lifespan(_: FastAPI) -> AsyncIterator[None]:
        writer.start()
        yield
        await writer.stop()

    app = FastAPI(title="Dynamic Safety Case Management System", lifespan=lifespan)
    app.state.monitor = monitor
    app.state.broker = broker
    app.state.writer = writer

    def requires(scope: Scope, query_token: bool = False) -> Any:
        def dependency(request: Request) -> Role:
            token = bearer_token(request.headers.get("Authorization"))
            if token is None and query_token:
                token = request.query_params.get("token")
            role = tokens.role_for(token)
            if role is None:
                raise HTTPException(
                    status_code=401,
                    detail="missing or invalid token",
                    headers={"WWW-Authenticate": "Bearer"},
                )
            if not tokens.allows(role, scope):
                logger.warning("%s refused scope %s", role.value, scope.value)
                raise HTTPException(
                    status_code=403, detail=f"role {role.value} lacks scope {scope.value}"
                )
            return role

        return Depends(dependency)

    @app.exception_handler(DSCMSException)
    async def dscms_error(_: Request, exc: DSCMSException) -> JSONResponse:
        status = error_status(exc)
        logger.log(logging.ERROR if status >= 500 else logging.INFO, "%s: %s", status, exc)
        return JSONResponse(status_code=status, content={"detail": exc.to_record()})

    async def mutate(func: Callable[..., Any], *args: Any) -> Any:
        return await writer.submit(func, *args)

    @app.get("/", response_class=HTMLResponse, include_in_schema=False)
    async def index() -> HTMLResponse:
        return HTMLResponse((STATIC_DIR / "index.html").read_text(encoding="utf-8"))

    @app.get("/whoami")
    async def whoami(role: Role = requires(Scope.READ)) -> dict[str, Any]:
        return {
            "role": role.value,
            "scopes": sorted(scope.value for scope in tokens.scopes.get(role, ())),
            "scenarios": available_scenarios(),
        }

    @app.get("/case")
    async def get_case(_: Role = requires(Scope.READ)) -> dict[str, Any]:
        return case_to_dict(monitor.snapshot.case)

    @app.get("/status")
    async def get_status(_: Role = requires(Scope.READ)) -> dict[str, Any]:
        snapshot = monitor.snapshot
        return {
            "case_id": snapshot.case.case_id,
            "case_version": snapshot.case.version,
            "nodes": {node.id: node.status.value for node in snapshot.case.nodes.values()},
            "statuses": [spi_record(status, snapshot.catalog) for status in snapshot.statuses],
            "alerts": [alert.to_dict() for alert in snapshot.alerts],
            "open_recoveries": list(snapshot.open_recoveries),
            "gates": [gate.to_dict() for gate in monitor.gates()],
        }

    @app.get("/impact")
    async def get_impact(_: Role = requires(Scope.READ)) -> dict[str, Any]:
        snapshot = monitor.snapshot
        impact = snapshot.impact or ImpactReport(scenario=None, case_version=snapshot.case.version)
        return impact.to_dict()

    @app.get("/report")
    async def get_report(_: Role = requires(Scope.READ)) -> dict[str, Any]:
        return monitor.report()

    @app.get("/audit")
    async def get_audit(
        _: Role = requires(Scope.AUDIT), limit: int = Query(100, ge=0)
    ) -> dict[str, Any]:
        verification = verify_chain(monitor.audit)
        # only the records before the first bad one are parsed
        intact = None if verification.ok else verification.first_bad_index
        records = [r.to_dict() for r in islice(monitor.audit.records(), intact)]
        return {
            "algorithm": monitor.audit.algorithm,
            "head": monitor.audit.head,
            "length": len(monitor.audit),
            "verified": verification.ok,
            "first_bad_index": verification.first_bad_index,
            "reason": verification.reason,
            "records": records[-limit:] if limit else [],
        }

    @app.post("/observations")
    async def post_observations(
        batch: ObservationBatch, role: Role = requires(Scope.INGEST)
    ) -> dict[str, Any]:
        try:
            observations = [Observation.from_dict(obs.model_dump()) for obs in batch.observations]
        except (ValueError, KeyError) as exc:
            raise HTTPException(status_code=422, detail=f"invalid observation: {exc}") from exc
        outcome = await mutate(monitor.ingest, observations, _timestamp(batch.at), role)
        return outcome.to_dict()

    @app.post("/scenario")
    async def post_scenario(
        request: ScenarioRequest, role: Role = requires(Scope.INGEST)
    ) -> dict[str, Any]:
        scenario = load_scenario(request.name)
        outcome = await mutate(monitor.simulate, scenario, role)
        return outcome.to_dict()

    @app.post("/recovery")
    async def post_recovery(
        request: RecoveryRequest, role: Role = requires(Scope.RECOVER)
    ) -> dict[str, Any]:
        document = parse_recovery_document(request.model_dump())
        case = await mutate(monitor.recover, document, role)
        return {"case_version": case.version, "case": case_to_dict(case)}

    @app.post("/revalidate")
    async def post_revalidate(
        request: Optional[RevalidateRequest] = None, role: Role = requires(Scope.REVALIDATE)
    ) -> dict[str, Any]:
        at = _timestamp(request.at if request else None)
        outcome = await mutate(monitor.revalidate, at, role)
        return outcome.to_dict()

    @app.get("/events/history")
    async def get_event_history(
        _: Role = requires(Scope.READ, query_token=True), after: Optional[int] = Query(None)
    ) -> dict[str, Any]:
        return {
            "events": [
                {"seq": e.seq, "kind": e.kind, "ts": e.ts, "data": e.data}
                for e in broker.since(after)
            ]
        }

    @app.get("/events")
    async def get_events(
        request: Request,
        _: Role = requires(Scope.READ, query_token=True),
        last_event_id: Optional[str] = Header(None),
    ) -> EventSourceResponse:
        last = int(last_event_id) if last_event_id and last_event_id.isdigit() else None
        queue = broker.subscribe()
        backlog = broker.since(last)

        async def stream() -> AsyncIterator[dict[str, str]]:
            seen = last or 0
            try:
                for event in backlog:
                    seen = event.seq
                    yield event.to_sse()
                while not await request.is_disconnected():
                    try:
                        event = await asyncio.wait_for(queue.get(), timeout=STREAM_TIMEOUT)
                    except asyncio.TimeoutError:
                        continue
                    if event.seq > seen:
                        seen = event.seq
                        yield event.to_sse()
            finally:
                broker.unsubscribe(queue)

        return EventSourceResponse(stream())

    logger.info("service created for %r", monitor)
    return app
