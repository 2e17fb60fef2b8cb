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
import runpy
from unittest import mock


@mock.patch("dscms.cli.entrypoint")
def test_execution(mock_entrypoint):
    runpy.run_path("dscms/__main__.py", run_name="__main__")
    mock_entrypoint.assert_called_once_with()
