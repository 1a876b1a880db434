from __future__ import annotations

import logging
import os

from .options import COLOR_MODES

ANSI_COLORS = {
    "red": "\033[31m",
    "yellow": "\033[33m",
    "cyan": "\033[36m",
}
ANSI_RESET = "\033[0m"
LEVEL_STYLE = {
    logging.DEBUG: ("D", "cyan"),
    logging.INFO: ("I", "cyan"),
    logging.WARNING: ("hint", "yellow"),
    logging.ERROR: ("E", "red"),
    logging.CRITICAL: ("E", "red"),
}


def should_use_color(stream, color_mode: str) -> bool:
    if color_mode not in COLOR_MODES:
        return False
    if color_mode == "never":
        return False
    if color_mode == "always":
        return True
    if os.getenv("NO_COLOR") is not None:
        return False
    if os.getenv("TERM") == "dumb":
        return False
    isatty = getattr(stream, "isatty", None)
    return bool(isatty and isatty())


def style(text: str, *, color: str, stream, color_mode: str) -> str:
    if not should_use_color(stream, color_mode):
        return text
    code = ANSI_COLORS.get(color)
    if code is None:
        return text
    return f"{code}{text}{ANSI_RESET}"


class DiagnosticFormatter(logging.Formatter):
    """Renders records as `E: ...`, `hint: ...` or `I: ...` lines."""

    def __init__(self, stream, color_mode: str = "auto"):
        super().__init__()
        self.stream = stream
        self.color_mode = color_mode

    def format(self, record: logging.LogRecord) -> str:
        prefix, color = LEVEL_STYLE.get(record.levelno, ("I", "cyan"))
        return style(f"{prefix}: {record.getMessage()}", color=color, stream=self.stream, color_mode=self.color_mode)


def hint_for_error(message: str) -> str | None:
    text = message.lower()

    if "unknown config key" in text:
        return "config files are strict; check the key spelling against the README config reference"
    if "unknown kernel kind" in text:
        return "kernel kinds: Matern52, SquaredExponential"
    if "unknown likelihood kind" in text:
        return "likelihood kinds: Gaussian, Bernoulli (or leave it unset to infer from the labels)"
    if "unknown acquisition" in text:
        return "acquisition kinds: EI, SuccessProb, ProductEISuccess"
    if "unknown problem" in text:
        return "problems: banana, csv (with problem.path), noisy-branin-disk"
    if "not valid json" in text:
        return "the config file must be a single json object"
    if "-1/+1 convention" in text:
        return "recode labels as 0/1 before loading"
    if "header must be" in text:
        return "csv files start with a header like x1,x2,y"
    if "cholesky failed" in text or "not positive" in text:
        return "try a larger model.jitter, fewer inducing points, or longer lengthscales"
    if "unknown command" in text:
        return "commands: fit, stream, bo, bench-conditioning (see --help)"
    if "unknown option" in text or "missing value for" in text:
        return "run dualcond --help for the list of flags"
    if "dimension mismatch" in text:
        return "model.lengthscales needs one entry per input column (or a single shared value)"
    return None
