import logging

from rich.console import Console
from rich.logging import RichHandler

_configured = False


def configure_logging(level: str = "WARNING") -> None:
    """
    Sends the `src.pcpe` and `api` loggers to stderr through Rich.
    Calling it again only changes the level.
    """

    global _configured
    for name in ("src.pcpe", "api"):
        logger = logging.getLogger(name)
        logger.setLevel(level)
        if not _configured:
            logger.addHandler(
                RichHandler(console=Console(stderr=True), show_path=False)
            )
    _configured = True
