"""Shared helpers for component entrypoints.

Components are plain processes: parameters and data-port paths arrive in
CLAIMED_* environment variables, success is exit code 0, and any failure
message goes to stderr with a non-zero exit.
"""

from __future__ import annotations

import os
import sys
from pathlib import Path


def _env(prefix: str, name: str) -> str:
    return f"{prefix}{name.upper().replace('-', '_')}"


def param(name: str, default: str | None = None) -> str:
    value = os.environ.get(_env("CLAIMED_PARAM_", name), default)
    if value is None:
        die(f"missing required parameter {name!r}")
    return value


def input_path(name: str) -> Path:
    value = os.environ.get(_env("CLAIMED_INPUT_", name))
    if value is None:
        die(f"missing input port {name!r}")
    return Path(value)


def output_path(name: str) -> Path:
    value = os.environ.get(_env("CLAIMED_OUTPUT_", name))
    if value is None:
        die(f"missing output port {name!r}")
    return Path(value)


def scratch() -> Path:
    return Path(os.environ.get("CLAIMED_SCRATCH", "."))


def die(message: str, code: int = 1):
    print(message, file=sys.stderr)
    sys.exit(code)


def run(main):
    """Entry wrapper: domain errors become a clean message + exit 1."""
    from ..errors import TrustPipeError

    try:
        main()
    except TrustPipeError as e:
        die(str(e))
