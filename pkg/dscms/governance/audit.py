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

"""Append-only, hash-chained audit log.

The log is a JSON-lines file. The first line is a header naming the digest
algorithm; every following line is one record. A record's ``prev_digest`` is the
``digest`` of the record before it, and the first record links to the digest of
the header line, so editing the header breaks the chain as well.
"""
from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass, replace
from datetime import datetime
from enum import Enum
from pathlib import Path
from typing import Any, Iterator, Mapping, Optional, Union

from dscms.exceptions import AuditLogError
from dscms.governance import Role
from dscms.utils import AUDIT_HASH, canonical_json, format_timestamp, parse_timestamp, utcnow

logger = logging.getLogger(__name__)

SYSTEM_ACTOR = "system"


class AuditEvent(str, Enum):
    """Kinds of audited events.

    State changes are audited as ingest, check or recovery. Every alert they emit
    and every gate evaluation they run gets a record of its own.
    """

    ALERT = "alert"
    GATE = "gate"
    RECOVERY = "recovery"
    INGEST = "ingest"
    CHECK = "check"


@dataclass(frozen=True)
class AuditRecord:  # pylint: disable=too-many-instance-attributes
    """One link of the audit chain."""

    seq: int
    ts: datetime
    actor: str
    event: AuditEvent
    payload: Mapping[str, Any]
    payload_digest: str
    prev_digest: str
    digest: str

    def body(self) -> dict[str, Any]:
        """Fields covered by the record digest.

        :return: record without its own digest
        :rtype: dict[str, Any]
        """
        return {
            "seq": self.seq,
            "ts": format_timestamp(self.ts),
            "actor": self.actor,
            "event": self.event.value,
            "payload": dict(self.payload),
            "payload_digest": self.payload_digest,
            "prev_digest": self.prev_digest,
        }

    def to_dict(self) -> dict[str, Any]:
        """Serialize the record.

        :return: record as written to the log
        :rtype: dict[str, Any]
        """
        return {**self.body(), "digest": self.digest}

    @classmethod
    def from_dict(cls, record: Mapping[str, Any]) -> AuditRecord:
        """Load record from a log line.

        :param record: parsed log line
        :type record: Mapping[str, Any]
        :return: audit record
        :rtype: AuditRecord
        """
        return cls(
            seq=int(record["seq"]),
            ts=parse_timestamp(record["ts"]),
            actor=str(record["actor"]),
            event=AuditEvent(record["event"]),
            payload=record["payload"],
            payload_digest=str(record["payload_digest"]),
            prev_digest=str(record["prev_digest"]),
            digest=str(record["digest"]),
        )


@dataclass(frozen=True)
class ChainVerification:
    """Outcome of verifying the audit chain."""

    ok: bool
    first_bad_index: Optional[int] = None
    reason: str = ""

    def __bool__(self) -> bool:
        """Truth value of the verification.

        :return: True if the chain is intact
        :rtype: bool
        """
        return self.ok


def _hexdigest(algorithm: str, text: str) -> str:
    return hashlib.new(algorithm, text.encode("utf-8")).hexdigest()


def check_algorithm(algorithm: str) -> str:
    """Make sure hashlib provides the algorithm.

    :param algorithm: hashlib algorithm name
    :type algorithm: str
    :return: the algorithm name
    :rtype: str
    :raises AuditLogError: if the algorithm is unknown
    """
    try:
        digest_size = hashlib.new(algorithm).digest_size
    except (ValueError, TypeError) as exc:
        raise AuditLogError(f"Unknown audit hash algorithm '{algorithm}'") from exc
    # variable-length digests such as shake_128 need an explicit length
    if not digest_size:
        raise AuditLogError(f"Unknown audit hash algorithm '{algorithm}'")
    return algorithm


def genesis_digest(algorithm: str, header: str) -> str:
    """Digest the first record links to.

    :param algorithm: hashlib algorithm name
    :type algorithm: str
    :param header: header line of the log, without the line break
    :type header: str
    :return: digest of the header line
    :rtype: str
    """
    return _hexdigest(algorithm, header)


def read_header(path: Path) -> tuple[str, str]:
    """Read the algorithm and the raw header line of a log file.

    :param path: log file
    :type path: Path
    :return: algorithm and header line
    :rtype: tuple[str, str]
    :raises AuditLogError: if the header is unreadable or names an unknown algorithm
    """
    with path.open(encoding="utf-8", errors="replace") as log:
        first = log.readline().rstrip("\n")
    try:
        header = json.loads(first)["header"]
        algorithm, created = header["algorithm"], header["created"]
    except (ValueError, KeyError, TypeError) as exc:
        raise AuditLogError(f"Audit log '{path}' has no valid header") from exc
    if not isinstance(algorithm, str) or not isinstance(created, str):
        raise AuditLogError(f"Audit log '{path}' has no valid header")

    return check_algorithm(algorithm), first


class AuditLog:
    """Single-writer audit log backed by a JSON-lines file."""

    def __init__(self, path: Path, algorithm: Optional[str] = None) -> None:
        """Open or create the audit log.

        The algorithm of an existing log is read from its header; the one given
        here is only used for new logs.

        :param path: log file
        :type path: Path
        :param algorithm: hashlib algorithm for new logs, defaults to DSCMS_AUDIT_HASH
        :type algorithm: Optional[str]
        :raises AuditLogError: if the algorithm is unknown or the header is unreadable
        """
        self.path = Path(path)
        if self.path.exists() and self.path.stat().st_size > 0:
            self.algorithm, header = read_header(self.path)
        else:
            self.algorithm = check_algorithm(algorithm or AUDIT_HASH)
            self.path.parent.mkdir(parents=True, exist_ok=True)
            created = format_timestamp(utcnow())
            header = canonical_json({"header": {"algorithm": self.algorithm, "created": created}})
            self.path.write_text(header + "\n", encoding="utf-8")
            logger.debug("created audit log %s using %s", self.path, self.algorithm)

        self.genesis = genesis_digest(self.algorithm, header)
        self._seq, self._head = 0, self.genesis
        last = ""
        for line in self.raw_lines():
            self._seq += 1
            last = line
        if self._seq:
            try:
                self._head = str(json.loads(last)["digest"])
            except (ValueError, KeyError, TypeError):
                logger.warning("audit log %s ends with an unreadable record", self.path)
                self._head = ""

    def raw_lines(self) -> Iterator[str]:
        """Iterate over the raw record lines, skipping the header.

        :return: record lines
        :rtype: Iterator[str]
        """
        with self.path.open(encoding="utf-8", errors="replace") as log:
            log.readline()
            for line in log:
                if line.strip():
                    yield line

    def records(self) -> Iterator[AuditRecord]:
        """Iterate over the records of the log.

        :return: records in append order
        :rtype: Iterator[AuditRecord]
        :raises AuditLogError: if a line cannot be parsed
        """
        for index, line in enumerate(self.raw_lines()):
            try:
                yield AuditRecord.from_dict(json.loads(line))
            except (ValueError, KeyError, TypeError) as exc:
                raise AuditLogError(f"Unreadable audit record at index {index}") from exc

    def __len__(self) -> int:
        """Get number of records.

        :return: number of records
        :rtype: int
        """
        return self._seq

    @property
    def head(self) -> str:
        """Digest of the newest record.

        :return: head digest, the genesis value for an empty log
        :rtype: str
        """
        return self._head

    def append(
        self,
        event: AuditEvent,
        payload: Mapping[str, Any],
        actor: Union[Role, str] = SYSTEM_ACTOR,
        ts: Optional[datetime] = None,
    ) -> AuditRecord:
        """Append a record to the chain.

        :param event: audited event kind
        :type event: AuditEvent
        :param payload: JSON-serializable event details
        :type payload: Mapping[str, Any]
        :param actor: role or 'system', defaults to 'system'
        :type actor: Union[Role, str]
        :param ts: record time, defaults to now
        :type ts: Optional[datetime]
        :return: appended record
        :rtype: AuditRecord
        """
        payload = json.loads(canonical_json(payload))
        unsigned = AuditRecord(
            seq=self._seq,
            ts=parse_timestamp(ts or utcnow()),
            actor=actor.value if isinstance(actor, Role) else str(actor),
            event=AuditEvent(event),
            payload=payload,
            payload_digest=_hexdigest(self.algorithm, canonical_json(payload)),
            prev_digest=self._head,
            digest="",
        )
        record = replace(
            unsigned, digest=_hexdigest(self.algorithm, canonical_json(unsigned.body()))
        )
        with self.path.open("a", encoding="utf-8") as log:
            log.write(canonical_json(record.to_dict()) + "\n")

        self._seq += 1
        self._head = record.digest
        logger.debug("audit #%d %s by %s", record.seq, record.event.value, record.actor)
        return record


def append_audit(
    log: AuditLog,
    event: AuditEvent,
    payload: Mapping[str, Any],
    actor: Union[Role, str] = SYSTEM_ACTOR,
    ts: Optional[datetime] = None,
) -> AuditRecord:
    """Append a record to the audit log.

    :param log: audit log
    :type log: AuditLog
    :param event: audited event kind
    :type event: AuditEvent
    :param payload: JSON-serializable event details
    :type payload: Mapping[str, Any]
    :param actor: role or 'system', defaults to 'system'
    :type actor: Union[Role, str]
    :param ts: record time, defaults to now
    :type ts: Optional[datetime]
    :return: appended record
    :rtype: AuditRecord
    """
    return log.append(event, payload, actor, ts)


def verify_chain(log: Union[AuditLog, Path]) -> ChainVerification:
    """Verify every link of the audit chain.

    The header is read again from disk, so an open log whose file was edited
    since it was opened is verified against what is actually stored.

    :param log: audit log or path to its file
    :type log: Union[AuditLog, Path]
    :return: verification outcome with the index of the first bad record
    :rtype: ChainVerification
    """
    path = log.path if isinstance(log, AuditLog) else Path(log)
    if not path.exists() or path.stat().st_size == 0:
        return ChainVerification(True)
    try:
        algorithm, header = read_header(path)
    except AuditLogError as exc:
        logger.debug("%s", exc)
        return ChainVerification(False, 0, "invalid header")

    reader = log if isinstance(log, AuditLog) else AuditLog(path)
    prev = genesis_digest(algorithm, header)
    for index, line in enumerate(reader.raw_lines()):
        try:
            record = AuditRecord.from_dict(json.loads(line))
        except (ValueError, KeyError, TypeError):
            return ChainVerification(False, index, "unreadable record")

        if record.seq != index:
            return ChainVerification(False, index, "sequence gap")
        if record.prev_digest != prev:
            return ChainVerification(False, index, "broken link")
        if record.payload_digest != _hexdigest(algorithm, canonical_json(record.payload)):
            return ChainVerification(False, index, "payload digest mismatch")
        if record.digest != _hexdigest(algorithm, canonical_json(record.body())):
            return ChainVerification(False, index, "record digest mismatch")
        prev = record.digest

    return ChainVerification(True)
