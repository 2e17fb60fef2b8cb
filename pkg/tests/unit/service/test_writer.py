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
import asyncio
from unittest.mock import MagicMock

import pytest

from dscms.service.writer import WorkspaceWriter


@pytest.mark.asyncio
async def test_submit_runs_in_order():
    """Test submitted operations run one at a time in submission order."""
    calls = []

    def operation(index):
        calls.append(index)
        return index * 2

    writer = WorkspaceWriter(MagicMock())

    results = await asyncio.gather(*(writer.submit(operation, index) for index in range(5)))

    assert results == [0, 2, 4, 6, 8]
    assert calls == [0, 1, 2, 3, 4]
    assert writer.running
    await writer.stop()
    assert not writer.running


@pytest.mark.asyncio
async def test_submit_raises_operation_error():
    """Test an operation's error reaches its caller and the writer keeps running."""

    def failing():
        raise ValueError("rejected")

    writer = WorkspaceWriter(MagicMock())

    with pytest.raises(ValueError, match="rejected"):
        await writer.submit(failing)

    assert await writer.submit(lambda: "next") == "next"
    await writer.stop()


@pytest.mark.asyncio
async def test_start_is_idempotent():
    """Test starting a running writer keeps its task."""
    writer = WorkspaceWriter(MagicMock())
    writer.start()
    task = writer._task

    writer.start()

    assert writer._task is task
    await writer.stop()
    await writer.stop()
