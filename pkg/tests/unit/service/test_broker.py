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

import pytest

from dscms.service.broker import Event, EventBroker


def test_event_to_sse():
    """Test the server-sent event fields."""
    event = Event(3, "breach", "2025-03-01T00:00:00Z", {"spi": "S"})

    fields = event.to_sse()

    assert fields["id"] == "3"
    assert fields["event"] == "breach"
    assert json.loads(fields["data"]) == {
        "seq": 3,
        "kind": "breach",
        "ts": "2025-03-01T00:00:00Z",
        "data": {"spi": "S"},
    }


def test_publish_numbers_events():
    """Test events are numbered in publication order."""
    broker = EventBroker()

    first = broker.publish("check", {})
    second = broker.publish("gate", {"gate": "G1"})

    assert (first.seq, second.seq) == (1, 2)
    assert broker.since(None) == [first, second]
    assert broker.since(1) == [second]
    assert broker.since(2) == []


def test_history_is_bounded():
    """Test only the most recent events are kept for replay."""
    broker = EventBroker(history=2)

    for index in range(5):
        broker.publish("check", {"index": index})

    assert [event.seq for event in broker.since(None)] == [4, 5]


@pytest.mark.asyncio
async def test_subscribers_receive_events():
    """Test subscribers receive every event published after subscribing."""
    broker = EventBroker()
    broker.publish("check", {"index": 0})
    queue = broker.subscribe()

    event = broker.publish("check", {"index": 1})
    broker.unsubscribe(queue)
    broker.publish("check", {"index": 2})

    assert queue.qsize() == 1
    assert await queue.get() == event
