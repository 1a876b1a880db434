from __future__ import annotations

from dataclasses import dataclass

COMMANDS = ("fit", "stream", "bo", "bench-conditioning")
COLOR_MODES = {"auto", "always", "never"}
VALUE_FLAGS = ("--config", "--seed", "--out", "--batch-size", "--iterations", "--color")


@dataclass(frozen=True)
class CLIOptions:
    command: str | None = None
    config_path: str | None = None
    seed: int | None = None
    out: str | None = None
    batch_size: int | None = None
    iterations: int | None = None
    color_mode: str = "auto"
    verbose: bool = False
    show_version: bool = False


def _int_value(flag: str, raw: str, *, minimum: int) -> int:
    try:
        value = int(raw)
    except ValueError:
        raise ValueError(f"{flag} expects an integer (got {raw!r})") from None
    if value < minimum:
        raise ValueError(f"{flag} must be at least {minimum} (got {value})")
    return value


def parse_options(args: list[str], *, help_text: str) -> CLIOptions:
    values: dict[str, str] = {}
    command = None
    verbose = False
    show_version = False
    idx = 0
    while idx < len(args):
        arg = args[idx]
        if arg in {"-h", "--help"}:
            print(help_text)
            raise SystemExit(0)
        if arg in {"-V", "--version"}:
            show_version = True
            idx += 1
            continue
        if arg in {"-v", "--verbose"}:
            verbose = True
            idx += 1
            continue
        flag, sep, inline = arg.partition("=")
        if flag in VALUE_FLAGS:
            if sep:
                values[flag] = inline
                idx += 1
                continue
            if idx + 1 >= len(args):
                raise ValueError(f"missing value for {flag}")
            values[flag] = args[idx + 1]
            idx += 2
            continue
        if arg.startswith("-"):
            raise ValueError(f"unknown option: {arg}")
        if command is not None:
            raise ValueError(f"unexpected argument: {arg}")
        if arg not in COMMANDS:
            raise ValueError(f"unknown command: {arg}")
        command = arg
        idx += 1

    color_mode = values.get("--color", "auto")
    if color_mode not in COLOR_MODES:
        raise ValueError(f"unknown color mode: {color_mode}")
    return CLIOptions(
        command=command,
        config_path=values.get("--config"),
        seed=_int_value("--seed", values["--seed"], minimum=0) if "--seed" in values else None,
        out=values.get("--out"),
        batch_size=_int_value("--batch-size", values["--batch-size"], minimum=1) if "--batch-size" in values else None,
        iterations=_int_value("--iterations", values["--iterations"], minimum=0) if "--iterations" in values else None,
        color_mode=color_mode,
        verbose=verbose,
        show_version=show_version,
    )
