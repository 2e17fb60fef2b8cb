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

"""Bearer token authentication and role scopes.

Token file format::

    tokens:
      s3cr3t-rso: responsible_scaling_officer
      s3cr3t-ops: safety_team
    scopes:                 # optional, replaces the defaults of listed roles
      safety_team: [read, ingest, revalidate, recover]
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Mapping, Optional, Union

import yaml

from dscms.exceptions import TokenFileError
from dscms.governance import Role

logger = logging.getLogger(__name__)


class Scope(str, Enum):
    """Permission granted to a role."""

    READ = "read"
    AUDIT = "audit"
    INGEST = "ingest"
    RECOVER = "recover"
    REVALIDATE = "revalidate"


DEFAULT_SCOPES: dict[Role, frozenset[Scope]] = {
    Role.RESPONSIBLE_SCALING_OFFICER: frozenset(Scope),
    Role.EXECUTIVE_LEADERSHIP: frozenset({Scope.READ, Scope.AUDIT, Scope.REVALIDATE}),
    Role.SAFETY_TEAM: frozenset({Scope.READ, Scope.INGEST, Scope.REVALIDATE}),
    Role.EXTERNAL_OVERSIGHT: frozenset({Scope.READ, Scope.AUDIT}),
}


@dataclass(frozen=True)
class TokenConfig:
    """Tokens and the scopes of their roles."""

    tokens: Mapping[str, Role]
    scopes: Mapping[Role, frozenset[Scope]] = field(default_factory=lambda: dict(DEFAULT_SCOPES))

    def role_for(self, token: Optional[str]) -> Optional[Role]:
        """Role of a token.

        :param token: bearer token
        :type token: Optional[str]
        :return: role, None for a missing or unknown token
        :rtype: Optional[Role]
        """
        return self.tokens.get(token) if token else None

    def allows(self, role: Role, scope: Scope) -> bool:
        """Whether the role holds the scope.

        :param role: role
        :type role: Role
        :param scope: scope
        :type scope: Scope
        :return: True if allowed
        :rtype: bool
        """
        return scope in self.scopes.get(role, frozenset())


def parse_tokens(document: Union[str, Mapping[str, Any]]) -> TokenConfig:
    """Parse a token document.

    :param document: YAML text or an already loaded mapping
    :type document: Union[str, Mapping[str, Any]]
    :return: token configuration
    :rtype: TokenConfig
    :raises TokenFileError: if the document is malformed or names unknown roles or scopes
    """
    try:
        data = yaml.safe_load(document) if isinstance(document, str) else document
    except yaml.YAMLError as exc:
        raise TokenFileError(f"Token file is not valid YAML: {exc}") from exc

    if not isinstance(data, Mapping) or not isinstance(data.get("tokens"), Mapping):
        raise TokenFileError("Token file requires a 'tokens' mapping of token to role")

    try:
        tokens = {str(token): Role(role) for token, role in data["tokens"].items()}
        scopes = dict(DEFAULT_SCOPES)
        for role, granted in (data.get("scopes") or {}).items():
            scopes[Role(role)] = frozenset(Scope(scope) for scope in granted)
    except (ValueError, TypeError, AttributeError) as exc:
        raise TokenFileError(f"Invalid token file: {exc}") from exc

    if not tokens:
        raise TokenFileError("Token file defines no tokens")

    return TokenConfig(tokens, scopes)


def load_tokens(path: Path) -> TokenConfig:
    """Load token configuration from a file.

    :param path: token file
    :type path: Path
    :return: token configuration
    :rtype: TokenConfig
    :raises TokenFileError: if the file cannot be read or is invalid
    """
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise TokenFileError(f"Cannot read token file '{path}': {exc}") from exc

    config = parse_tokens(text)
    logger.info("Loaded %d token(s) from '%s'", len(config.tokens), path)
    return config
