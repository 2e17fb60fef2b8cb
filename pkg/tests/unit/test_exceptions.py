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

from dscms.argument.validation import Violation
from dscms.exceptions import (
    CaseParseError,
    DSCMSException,
    ObservationParseError,
    RecoveryRejected,
    SnapshotDigestMismatch,
    StaleCaseVersion,
)


def test_exception_record():
    """Test the machine-readable record of an error."""
    assert DSCMSException("broken").to_record() == {"error": "DSCMSException", "message": "broken"}


def test_case_parse_error():
    """Test every violation is part of the message and the record."""
    violations = [Violation("missing-top"), Violation("self-loop", "C1")]

    error = CaseParseError(violations)

    assert str(error) == "Case document rejected: missing-top; self-loop: C1"
    assert error.errors == violations
    assert error.to_record()["items"] == ["missing-top", "self-loop: C1"]


def test_recovery_rejected():
    """Test rejected recoveries keep their violations."""
    violation = Violation("unknown-node", "C9", "no node 'C9'")

    error = RecoveryRejected([violation])

    assert error.violations == [violation]
    assert str(error) == "Recovery actions rejected: unknown-node: C9"


def test_error_list_without_items():
    """Test an error list without items is just its message."""
    error = ObservationParseError("No valid observation in 'obs.jsonl'", [])

    assert str(error) == "No valid observation in 'obs.jsonl'"
    assert error.to_record()["items"] == []


def test_stale_case_version():
    """Test the stale version message names both versions."""
    error = StaleCaseVersion(cited=1, current=3)

    assert (error.cited, error.current) == (1, 3)
    assert str(error) == "Recovery cites case version 1, current version is 3"


def test_snapshot_digest_mismatch():
    """Test the snapshot message with and without reason."""
    assert str(SnapshotDigestMismatch(2)) == "Snapshot generation 2 failed digest verification"
    assert str(SnapshotDigestMismatch(2, "unreadable")).endswith("verification (unreadable)")
