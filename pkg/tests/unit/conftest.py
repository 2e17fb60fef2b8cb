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

from unittest.mock import MagicMock, patch

import pytest

from dscms.argument.parser import load_case
from dscms.commands import CLIargs
from dscms.monitor import BUNDLED_CASE, BUNDLED_CATALOG, Monitor
from dscms.spi.catalog import load_catalog
from tests.unit.utils import LOADED_AT


@pytest.fixture(scope="session", autouse=True)
def dscms_data(tmp_path_factory):
    dscms_test = tmp_path_factory.mktemp("dscms_test")
    with patch("dscms.utils.DSCMS_DATA", dscms_test):
        yield


@pytest.fixture
def cli_args() -> MagicMock:
    """Magic Mock of the DSCMS CLIargs.

    :return: MagicMock of the DSCMS CLIargs got from the cli.
    :rtype: MagicMock
    """
    # spec_set needs an instantiated class to be strict with the fields.
    return MagicMock(spec_set=CLIargs(command="check"))()


@pytest.fixture(scope="session")
def bundled_case():
    """Bundled cyber inability case."""
    return load_case(BUNDLED_CASE)


@pytest.fixture(scope="session")
def bundled_catalog():
    """Bundled SPI catalog with a fixed load time."""
    return load_catalog(BUNDLED_CATALOG, LOADED_AT)


@pytest.fixture
def monitor(tmp_path):
    """Monitor over a new workspace bootstrapped from the bundled fixtures."""
    return Monitor.open(tmp_path / "workspace")
