import logging

from rich.console import Console
from rich.logging import RichHandler

LEVELS = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}


def configure_logging(level: str = "info") -> None:
    """Route the package loggers through a rich handler on stderr."""
    handler = RichHandler(console=Console(stderr=True), show_path=False, rich_tracebacks=True)
    root = logging.getLogger("corpuscle_lab")
    root.handlers.clear()
    root.addHandler(handler)
    root.setLevel(LEVELS.get(level.lower(), logging.INFO))
    root.propagate = False
