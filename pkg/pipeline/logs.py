"""Console + file logging for the command line tools.

Library modules only call `logging.getLogger(__name__)`; handlers are installed
here once, by the CLI. Timestamps only go to the log file.
"""
import logging
from pathlib import Path
from typing import Optional

from colorama import Fore, Style, just_fix_windows_console

_LEVEL_COLOURS = {
    logging.DEBUG: Style.DIM,
    logging.INFO: "",
    logging.WARNING: Fore.YELLOW,
    logging.ERROR: Fore.RED,
    logging.CRITICAL: Fore.RED + Style.BRIGHT,
}


class ConsoleFormatter(logging.Formatter):
    def format(self, record: logging.LogRecord) -> str:
        msg = super().format(record)
        colour = _LEVEL_COLOURS.get(record.levelno, "")
        if not colour:
            return msg
        return f"{colour}{msg}{Style.RESET_ALL}"


def setup_logging(verbose: bool = False, log_file: Optional[str] = None) -> None:
    just_fix_windows_console()
    root = logging.getLogger()
    # replace only the handlers a previous call installed
    for handler in [h for h in root.handlers if getattr(h, "_freqgcn", False)]:
        root.removeHandler(handler)
        handler.close()
    root.setLevel(logging.DEBUG)

    console = logging.StreamHandler()
    console.setLevel(logging.DEBUG if verbose else logging.INFO)
    console.setFormatter(ConsoleFormatter("%(message)s"))
    console._freqgcn = True
    root.addHandler(console)

    if log_file:
        Path(log_file).parent.mkdir(parents=True, exist_ok=True)
        fh = logging.FileHandler(log_file, encoding="utf-8")
        fh.setLevel(logging.DEBUG)
        fh.setFormatter(logging.Formatter("%(asctime)s %(levelname)s %(name)s %(message)s"))
        fh._freqgcn = True
        root.addHandler(fh)
