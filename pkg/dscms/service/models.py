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

"""Request payloads of the service."""
from typing import Any, Optional

from pydantic import BaseModel, Field


class ObservationIn(BaseModel):
    """Observation record as in an observation file."""

    ts: str = Field(..., description="ISO-8601 timestamp")
    spi: str = Field(..., min_length=1)
    value: float
    source: str
    meta: dict[str, Any] = Field(default_factory=dict)


class ObservationBatch(BaseModel):
    """Observations to ingest and the time of the triggered check."""

    observations: list[ObservationIn] = Field(default_factory=list)
    at: Optional[str] = Field(None, description="Evaluation time, defaults to now")


class ScenarioRequest(BaseModel):
    """Bundled scenario to inject."""

    name: str = Field(..., description="Scenario name, e.g. scenario-1")


class RecoveryRequest(BaseModel):
    """Recovery actions drafted against a case version."""

    base_version: int = Field(..., ge=1, description="Case version the actions were drafted on")
    actions: list[dict[str, Any]] = Field(..., min_length=1)


class RevalidateRequest(BaseModel):
    at: Optional[str] = None
