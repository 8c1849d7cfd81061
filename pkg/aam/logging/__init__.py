"""
Logging setup for AAM.

Library modules obtain loggers through get_logger(); the CLI calls
setup_logging() once so that records are rendered by rich on stderr and
never interleave with CSV written to stdout.

Key functionality:
- setup_logging: Install a RichHandler on the "aam" logger tree
- get_logger: Namespaced logger under "aam"
- console: Shared themed stderr console for human summaries
"""

import logging
from typing import Optional, Union

from rich.console import Console
from rich.logging import RichHandler
from rich.theme import Theme

from aam.utils.config import Settings, load_settings

aam_theme = Theme({
    "info": "cyan",
    "warning": "yellow",
    "error": "bold red",
    "success": "bold green",
    "metric": "bold blue",
    "step": "bold magenta",
})

# Summaries and logs go to stderr; stdout is reserved for CSV
console = Console(stderr=True, theme=aam_theme)

_ROOT = "aam"
_configured = False


def setup_logging(
    level: Optional[Union[str, int]] = None, settings: Optional[Settings] = None
) -> logging.Logger:
    """
    Configure the "aam" logger with a rich handler.

    Args:
        level: Log level name or number; wins over settings
        settings: Source of the default level (Settings.log_level). Loaded
            through load_settings(), .env included, when omitted

    Returns:
        The configured root "aam" logger
    """
    global _configured

    if level is None:
        level = (settings or load_settings()).log_level
    if isinstance(level, str):
        level = logging.getLevelName(level.upper())
        if not isinstance(level, int):
            level = logging.WARNING

    logger = logging.getLogger(_ROOT)
    logger.setLevel(level)

    if not _configured:
        handler = RichHandler(console=console, show_path=False, rich_tracebacks=True)
        handler.setFormatter(logging.Formatter("%(name)s: %(message)s"))
        logger.addHandler(handler)
        logger.propagate = False
        _configured = True

    return logger


def get_logger(name: str) -> logging.Logger:
    """
    Get a logger below the "aam" namespace.

    Args:
        name: Usually __name__ of the calling module

    Returns:
        A stdlib logger
    """
    if not name.startswith(_ROOT):
        name = f"{_ROOT}.{name}"
    return logging.getLogger(name)
