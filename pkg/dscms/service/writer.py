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

"""Single writer task owning the monitor."""
from __future__ import annotations

import asyncio
import logging
from typing import Any, Callable, Optional

from dscms.monitor import Monitor

logger = logging.getLogger(__name__)

Command = tuple[Callable[..., Any], tuple[Any, ...], "asyncio.Future[Any]"]


class WorkspaceWriter:
    """Serializes every state change of a monitor through one queue."""

    def __init__(self, monitor: Monitor) -> None:
        """Create writer for a monitor.

        :param monitor: monitor owning the workspace
        :type monitor: Monitor
        """
        self.monitor = monitor
        self._queue: Optional[asyncio.Queue[Command]] = None
        self._task: Optional[asyncio.Task[None]] = None
        self._loop: Optional[asyncio.AbstractEventLoop] = None

    @property
    def running(self) -> bool:
        """Whether the writer task is running.

        :return: True if running
        :rtype: bool
        """
        return self._task is not None and not self._task.done()

    def start(self) -> None:
        """Start the writer task on the running loop."""
        if self.running:
            return

        self._queue = asyncio.Queue()
        self._loop = asyncio.get_running_loop()
        self._task = self._loop.create_task(self._run(self._queue))
        logger.debug("workspace writer started for %r", self.monitor)

    async def stop(self) -> None:
        """Cancel the writer task and wait for it."""
        if self._task is None:
            return

        self._task.cancel()
        try:
            await self._task
        except asyncio.CancelledError:
            pass
        self._task = None
        logger.debug("workspace writer stopped")

    async def _run(self, queue: asyncio.Queue[Command]) -> None:
        while True:
            func, args, future = await queue.get()
            try:
                result = func(*args)
            except Exception as exc:  # pylint: disable=broad-exception-caught
                if not future.cancelled():
                    future.set_exception(exc)
            else:
                if not future.cancelled():
                    future.set_result(result)
            finally:
                queue.task_done()

    async def submit(self, func: Callable[..., Any], *args: Any) -> Any:
        """Run a monitor operation in the writer task and wait for its result.

        :param func: monitor operation
        :type func: Callable[..., Any]
        :param args: operation arguments
        :type args: Any
        :return: operation result
        :rtype: Any
        """
        # a writer bound to another loop is abandoned with that loop
        if self._loop is not asyncio.get_running_loop():
            self._task = None
        if not self.running or self._queue is None:
            self.start()

        future: asyncio.Future[Any] = asyncio.get_running_loop().create_future()
        await self._queue.put((func, args, future))  # type: ignore[union-attr]
        return await future
