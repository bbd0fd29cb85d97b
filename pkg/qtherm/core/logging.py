"""
Logging configuration for qtherm.

Log records go to stderr so that stdout stays free for command results
(JSON, output paths). A run can additionally mirror its log into a file.
"""
import logging
import sys
from pathlib import Path
from typing import Optional, TextIO, Union

DEFAULT_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(filename)s:%(lineno)d - %(message)s"


def setup_logging(log_level: str = "INFO", log_format: Optional[str] = None,
                  stream: Optional[TextIO] = None, log_file: Optional[Union[str, Path]] = None) -> None:
    """
    Configure the root logger.

    Args:
        log_level: Logging level (DEBUG, INFO, WARNING, ERROR, CRITICAL)
        log_format: Custom log format string
        stream: Console stream, stderr by default
        log_file: Optional file that receives the same records
    """
    handlers = [logging.StreamHandler(stream if stream is not None else sys.stderr)]
    if log_file is not None:
        path = Path(log_file)
        path.parent.mkdir(parents=True, exist_ok=True)
        handlers.append(logging.FileHandler(path, encoding="utf-8"))

    logging.basicConfig(
        level=getattr(logging, log_level.upper()),
        format=log_format or DEFAULT_FORMAT,
        handlers=handlers,
        force=True,
    )

    # numerical libraries are chatty at DEBUG
    logging.getLogger("numexpr").setLevel(logging.WARNING)
    logging.getLogger("matplotlib").setLevel(logging.WARNING)

    logging.getLogger(__name__).debug(f"Logging configured with level: {log_level}")
