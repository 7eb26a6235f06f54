"""
Subcommand registry.

Every module in this package except `base` exports `command = XCommand`; the
registry maps each command's name and aliases to its class.
"""

import importlib
import logging
import pkgutil
from functools import lru_cache
from pathlib import Path
from typing import Dict, List, Optional, Type

from ..errors import ConfigError
from .base import BaseCommand

logger = logging.getLogger(__name__)


@lru_cache(maxsize=None)
def _registry() -> Dict[str, Type[BaseCommand]]:
    table: Dict[str, Type[BaseCommand]] = {}
    for info in sorted(pkgutil.iter_modules([str(Path(__file__).parent)]), key=lambda m: m.name):
        if info.name == "base":
            continue
        module = importlib.import_module(f".{info.name}", package=__name__)
        cmd_class = getattr(module, "command", None)
        if cmd_class is None:
            logger.debug(f"Module {info.name} exports no command")
            continue
        for key in (cmd_class.name, *cmd_class.aliases):
            if key in table and table[key] is not cmd_class:
                raise ConfigError(
                    f"Command name '{key}' is claimed by both {table[key].__name__} and {cmd_class.__name__}",
                    {"name": key},
                )
            table[key] = cmd_class
    logger.debug(f"Registered {len(table)} command names")
    return table


def get_command(name: str) -> Optional[Type[BaseCommand]]:
    """Command class for a name or alias, or None."""
    return _registry().get(name)


def list_commands() -> Dict[str, str]:
    """Primary command names mapped to their one-line descriptions."""
    return {cls.name: cls.description for cls in _registry().values()}


def get_command_names() -> List[str]:
    return sorted(list_commands())
