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

"""Fan-out of monitor events to event-stream subscribers."""
from __future__ import annotations

import asyncio
import json
import logging
from collections import deque
from dataclasses import dataclass
from typing import Any, Optional

from dscms.utils import EVENT_HISTORY, format_timestamp, utcnow

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Event:
    """Immutable event record with its stream sequence id."""

    seq: int
    kind: str
    ts: str
    data: dict[str, Any]

    def to_sse(self) -> dict[str, str]:
        """Server-sent event fields.

        :return: id, event and data fields
        :rtype: dict[str, str]
        """
        payload = {"seq": self.seq, "kind": self.kind, "ts": self.ts, "data": self.data}
        return {"id": str(self.seq), "event": self.kind, "data": json.dumps(payload)}


class EventBroker:
    """Keeps a bounded event history and pushes new events to subscriber queues."""

    def __init__(self, history: int = EVENT_HISTORY) -> None:
        """Create broker.

        :param history: number of events kept for replay
        :type history: int
        """
        self._history: deque[Event] = deque(maxlen=max(1, history))
        self._subscribers: set[asyncio.Queue[Event]] = set()
        self._seq = 0

    def publish(self, kind: str, data: dict[str, Any]) -> Event:
        """Record an event and push it to every subscriber.

        :param kind: event kind
        :type kind: str
        :param data: event record
        :type data: dict[str, Any]
        :return: published event
        :rtype: Event
        """
        self._seq += 1
        event = Event(self._seq, kind, format_timestamp(utcnow()), data)
        self._history.append(event)
        for queue in self._subscribers:
            queue.put_nowait(event)

        logger.debug("event #%d %s to %d subscriber(s)", event.seq, kind, len(self._subscribers))
        return event

    def since(self, last_id: Optional[int]) -> list[Event]:
        """Events of the history newer than a sequence id.

        :param last_id: last sequence id seen by the client, None for the whole history
        :type last_id: Optional[int]
        :return: events in sequence order
        :rtype: list[Event]
        """
        return [event for event in self._history if last_id is None or event.seq > last_id]

    def subscribe(self) -> asyncio.Queue[Event]:
        """Register a subscriber queue.

        :return: queue receiving every later event
        :rtype: asyncio.Queue[Event]
        """
        queue: asyncio.Queue[Event] = asyncio.Queue()
        self._subscribers.add(queue)
        return queue

    def unsubscribe(self, queue: asyncio.Queue[Event]) -> None:
        """Remove a subscriber queue.

        :param queue: queue returned by :meth:`subscribe`
        :type queue: asyncio.Queue[Event]
        """
        self._subscribers.discard(queue)
