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
import hashlib
import json

import pytest

from dscms.exceptions import AuditLogError
from dscms.governance import Role
from dscms.governance.audit import (
    AuditEvent,
    AuditLog,
    ChainVerification,
    append_audit,
    check_algorithm,
    genesis_digest,
    verify_chain,
)
from tests.unit.utils import NOW, ts


def filled_log(path, records=3):
    log = AuditLog(path, "sha256")
    for index in range(records):
        append_audit(log, AuditEvent.INGEST, {"accepted": index}, ts=ts(records - index))

    return log


def rewrite(path, index, change):
    """Apply change to the record at index, keeping the header line."""
    lines = path.read_text(encoding="utf-8").splitlines()
    record = json.loads(lines[index + 1])
    change(record)
    lines[index + 1] = json.dumps(record, sort_keys=True)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def header_line(path):
    return path.read_text(encoding="utf-8").splitlines()[0]


def test_genesis_digest(tmp_path):
    """Test the genesis digest is the digest of the header line."""
    path = tmp_path / "audit.jsonl"
    log = AuditLog(path, "sha512")

    assert log.genesis == hashlib.sha512(header_line(path).encode("utf-8")).hexdigest()
    assert genesis_digest("sha256", "{}") == hashlib.sha256(b"{}").hexdigest()


@pytest.mark.parametrize("algorithm", ["md5", "sha256", "sha3_256", "blake2b"])
def test_check_algorithm(algorithm):
    """Test hashlib algorithms with a fixed digest size are accepted."""
    assert check_algorithm(algorithm) == algorithm


@pytest.mark.parametrize("algorithm", ["sha257", "rot13", "shake_128"])
def test_check_algorithm_unknown(algorithm):
    """Test unknown and variable-length algorithms are refused."""
    with pytest.raises(AuditLogError, match=f"Unknown audit hash algorithm '{algorithm}'"):
        check_algorithm(algorithm)


def test_new_log(tmp_path):
    """Test a new log is created with its header."""
    path = tmp_path / "audit" / "audit.jsonl"

    log = AuditLog(path, "sha512")

    header = json.loads(path.read_text(encoding="utf-8").splitlines()[0])
    assert header["header"]["algorithm"] == "sha512"
    assert len(log) == 0
    assert log.head == log.genesis
    assert verify_chain(log)


def test_unknown_algorithm(tmp_path):
    """Test a new log with an unknown algorithm is refused."""
    with pytest.raises(AuditLogError, match="Unknown audit hash algorithm 'rot13'"):
        AuditLog(tmp_path / "audit.jsonl", "rot13")


def test_invalid_header(tmp_path):
    """Test a log without a header is refused."""
    path = tmp_path / "audit.jsonl"
    path.write_text('{"seq": 0}\n', encoding="utf-8")

    with pytest.raises(AuditLogError, match="has no valid header"):
        AuditLog(path)


def test_append(tmp_path):
    """Test records are chained to the previous digest."""
    log = AuditLog(tmp_path / "audit.jsonl", "sha256")

    first = append_audit(log, AuditEvent.CHECK, {"b": 1, "a": [1, 2]}, ts=NOW)
    second = log.append(AuditEvent.RECOVERY, {}, actor=Role.SAFETY_TEAM, ts=NOW)

    assert (first.seq, second.seq) == (0, 1)
    assert first.prev_digest == log.genesis
    assert second.prev_digest == first.digest
    assert first.actor == "system"
    assert second.actor == "safety_team"
    assert log.head == second.digest
    assert len(log) == 2
    assert list(log.records()) == [first, second]


def test_reopen_keeps_chain(tmp_path):
    """Test a reopened log continues the chain with the header's algorithm."""
    path = tmp_path / "audit.jsonl"
    log = filled_log(path)

    reopened = AuditLog(path, "sha512")
    record = reopened.append(AuditEvent.GATE, {"gates": []}, ts=NOW)

    assert reopened.algorithm == "sha256"
    assert record.seq == 3
    assert record.prev_digest == log.head
    assert verify_chain(path)


def test_verify_chain(tmp_path):
    """Test an untouched chain verifies."""
    path = tmp_path / "audit.jsonl"
    filled_log(path, records=5)

    assert verify_chain(path) == ChainVerification(True)


@pytest.mark.parametrize(
    "index, change, exp_reason",
    [
        (1, lambda record: record["payload"].update(accepted=99), "payload digest mismatch"),
        (2, lambda record: record.update(actor="intruder"), "record digest mismatch"),
        (1, lambda record: record.update(seq=7), "sequence gap"),
        (2, lambda record: record.update(prev_digest="0" * 64), "broken link"),
        (0, lambda record: record.pop("digest"), "unreadable record"),
    ],
)
def test_verify_chain_detects_tampering(tmp_path, index, change, exp_reason):
    """Test a tampered record is reported with its index."""
    path = tmp_path / "audit.jsonl"
    filled_log(path)
    rewrite(path, index, change)

    verification = verify_chain(path)

    assert not verification
    assert verification.first_bad_index == index
    assert verification.reason == exp_reason


def test_verify_chain_detects_removed_record(tmp_path):
    """Test removing a record breaks the chain at its position."""
    path = tmp_path / "audit.jsonl"
    filled_log(path)
    lines = path.read_text(encoding="utf-8").splitlines()
    path.write_text("\n".join(lines[:2] + lines[3:]) + "\n", encoding="utf-8")

    verification = verify_chain(path)

    assert verification.first_bad_index == 1
    assert verification.reason == "sequence gap"


def test_verify_chain_detects_consistent_payload_rewrite(tmp_path):
    """Test a record rewritten with matching digests still breaks the next link."""
    path = tmp_path / "audit.jsonl"
    filled_log(path)
    forged = AuditLog(tmp_path / "forged.jsonl", "sha256")
    forged.append(AuditEvent.INGEST, {"accepted": 99}, ts=ts(3))
    forged_line = forged.path.read_text(encoding="utf-8").splitlines()[1]
    lines = path.read_text(encoding="utf-8").splitlines()
    lines[1] = forged_line
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")

    verification = verify_chain(path)

    assert verification.first_bad_index == 1
    assert verification.reason == "broken link"


def test_records_unreadable(tmp_path):
    """Test reading an unreadable record fails with its index."""
    path = tmp_path / "audit.jsonl"
    filled_log(path, records=1)
    with path.open("a", encoding="utf-8") as log:
        log.write("not json\n")

    with pytest.raises(AuditLogError, match="Unreadable audit record at index 1"):
        list(AuditLog(path).records())


def rewrite_header(path, old, new):
    lines = path.read_text(encoding="utf-8").splitlines()
    assert old in lines[0]
    lines[0] = lines[0].replace(old, new, 1)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


@pytest.mark.parametrize("old, new", [('"created":"20', '"created":"19'), ("sha256", "sha512")])
def test_verify_chain_detects_header_tampering(tmp_path, old, new):
    """Test an edited header breaks the link of the first record."""
    path = tmp_path / "audit.jsonl"
    log = filled_log(path)
    rewrite_header(path, old, new)

    assert verify_chain(path) == ChainVerification(False, 0, "broken link")
    assert verify_chain(log) == ChainVerification(False, 0, "broken link")


def test_verify_chain_unknown_header_algorithm(tmp_path):
    """Test a header naming an unknown algorithm is a failed verification."""
    path = tmp_path / "audit.jsonl"
    filled_log(path)
    rewrite_header(path, "sha256", "sha257")

    assert verify_chain(path) == ChainVerification(False, 0, "invalid header")
    with pytest.raises(AuditLogError, match="Unknown audit hash algorithm 'sha257'"):
        AuditLog(path)


def test_verify_chain_missing_log(tmp_path):
    """Test a log that does not exist yet verifies as empty."""
    assert verify_chain(tmp_path / "audit.jsonl")
    assert not (tmp_path / "audit.jsonl").exists()
