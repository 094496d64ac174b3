"""
Objective: Logging setup. Results go to stdout, logs to stderr through rich.
"""

import logging

from rich.console import Console
from rich.logging import RichHandler

LOG_FORMAT = "%(name)s: %(message)s"


def setup_logging(verbosity: int = 0):
	level = logging.WARNING
	if verbosity == 1:
		level = logging.INFO
	elif verbosity >= 2:
		level = logging.DEBUG

	handler = RichHandler(console=Console(stderr=True), show_path=False, rich_tracebacks=False)
	handler.setFormatter(logging.Formatter(LOG_FORMAT))

	root = logging.getLogger("utils")
	root.handlers = [handler]
	root.setLevel(level)
	root.propagate = False
	return root
