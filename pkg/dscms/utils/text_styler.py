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

"""Terminal text styling for prompts and command summaries."""

from colorama import Fore, Style


def _styled(text: str, *styles: str) -> str:
    return Style.RESET_ALL + "".join(styles) + text + Style.RESET_ALL


def bold(text: str) -> str:
    """Bold text, used for prompt choices.

    :param text: text to format.
    :type text: str
    :return: text formatted.
    :rtype: str
    """
    return _styled(text, Style.BRIGHT)


def normal(text: str) -> str:
    """Reset styling around the text.

    :param text: text to format.
    :type text: str
    :return: text formatted.
    :rtype: str
    """
    return _styled(text)


def passed(text: str) -> str:
    """Green text for a verification that passed."""
    return _styled(text, Fore.GREEN)


def failed(text: str) -> str:
    """Bold red text for a violation or a broken chain."""
    return _styled(text, Style.BRIGHT, Fore.RED)
