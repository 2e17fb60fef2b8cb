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

"""Web service and dashboard over a monitored workspace."""
import logging

import uvicorn

from dscms.monitor import Monitor
from dscms.service.app import create_app
from dscms.service.auth import TokenConfig

logger = logging.getLogger(__name__)


async def serve(monitor: Monitor, tokens: TokenConfig, host: str, port: int) -> None:
    """Run the service until it is stopped.

    :param monitor: monitor owning the workspace
    :type monitor: Monitor
    :param tokens: token configuration
    :type tokens: TokenConfig
    :param host: listen host
    :type host: str
    :param port: listen port
    :type port: int
    """
    config = uvicorn.Config(
        create_app(monitor, tokens), host=host, port=port, log_config=None, access_log=False
    )
    logger.info("Listening on %s:%d", host, port)
    await uvicorn.Server(config).serve()


__all__ = ["create_app", "serve"]
