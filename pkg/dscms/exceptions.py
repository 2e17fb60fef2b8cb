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
"""Module of exceptions that dynamic-safety-case-manager may raise."""
from typing import Any, Iterable, Optional


class DSCMSException(Exception):
    """Default DSCMS exception."""

    def to_record(self) -> dict[str, Any]:
        """Machine-readable form of the error.

        :return: Record with the error class name and message.
        :rtype: dict[str, Any]
        """
        return {"error": self.__class__.__name__, "message": str(self)}


class _ErrorListException(DSCMSException):
    """Exception carrying a list of itemised problems."""

    def __init__(self, message: str, items: Iterable[Any]) -> None:
        """Create exception with the list of problems.

        :param message: summary message
        :type message: str
        :param items: itemised problems, each convertible to str
        :type items: Iterable[Any]
        """
        self.items = list(items)
        details = "; ".join(str(item) for item in self.items)
        super().__init__(f"{message}: {details}" if details else message)

    def to_record(self) -> dict[str, Any]:
        """Machine-readable form of the error including every item.

        :return: Record with the error class name, message and items.
        :rtype: dict[str, Any]
        """
        record = super().to_record()
        record["items"] = [str(item) for item in self.items]
        return record


class CaseParseError(_ErrorListException):
    """Exception raised when a case document is rejected."""

    def __init__(self, errors: Iterable[Any]) -> None:
        """Create case parse error.

        :param errors: violations found in the document
        :type errors: Iterable[Any]
        """
        super().__init__("Case document rejected", errors)

    @property
    def errors(self) -> list[Any]:
        """Violations found in the document.

        :return: list of violations
        :rtype: list[Any]
        """
        return self.items


class UnknownNode(DSCMSException):
    """Exception raised when a node id does not exist in the case."""


class CatalogError(_ErrorListException):
    """Exception raised when an SPI catalog document is rejected."""


class UnknownSpi(DSCMSException):
    """Exception raised when an SPI id does not exist in the catalog."""


class PrioritizationError(DSCMSException):
    """Exception raised when a prioritization dimension is out of range."""


class InvalidChangeScenario(DSCMSException):
    """Exception raised when a change scenario carries neither breaches nor artifacts."""


class UnknownArtifact(DSCMSException):
    """Exception raised when a changed artifact is not referenced by any node."""


class RecoveryRejected(_ErrorListException):
    """Exception raised when a batch of recovery actions is rejected as a whole."""

    def __init__(self, violations: Iterable[Any]) -> None:
        """Create recovery rejected exception.

        :param violations: problems that caused the rejection
        :type violations: Iterable[Any]
        """
        super().__init__("Recovery actions rejected", violations)

    @property
    def violations(self) -> list[Any]:
        """Problems that caused the rejection.

        :return: list of violations
        :rtype: list[Any]
        """
        return self.items


class StaleCaseVersion(DSCMSException):
    """Exception raised when a recovery cites a case version that is no longer current."""

    def __init__(self, cited: int, current: int) -> None:
        """Create stale case version exception.

        :param cited: case version cited by the client
        :type cited: int
        :param current: current case version
        :type current: int
        """
        self.cited = cited
        self.current = current
        super().__init__(f"Recovery cites case version {cited}, current version is {current}")


class UnknownGate(DSCMSException):
    """Exception raised when a decision gate id is not configured."""


class FeedMappingError(_ErrorListException):
    """Exception raised when feed mappings do not match the catalog."""


class ObservationParseError(_ErrorListException):
    """Exception raised when observations submitted as a batch are malformed."""


class AuditLogError(DSCMSException):
    """Exception raised when the audit log cannot be opened or written."""


class SnapshotError(DSCMSException):
    """Exception raised when no workspace snapshot can be loaded."""


class SnapshotDigestMismatch(SnapshotError):
    """Exception raised when a snapshot's content does not match its recorded digest."""

    def __init__(self, generation: int, reason: Optional[str] = None) -> None:
        """Create snapshot digest mismatch exception.

        :param generation: snapshot generation number
        :type generation: int
        :param reason: additional details, defaults to None
        :type reason: Optional[str], optional
        """
        self.generation = generation
        message = f"Snapshot generation {generation} failed digest verification"
        super().__init__(f"{message} ({reason})" if reason else message)


class WorkspaceError(DSCMSException):
    """Exception raised when the workspace directory is unusable."""


class UnknownScenario(DSCMSException):
    """Exception raised when a bundled scenario does not exist."""


class ValidationFailed(DSCMSException):
    """Exception raised when validation found violations or warnings."""


class TokenFileError(DSCMSException):
    """Exception raised when the service token file is invalid."""
