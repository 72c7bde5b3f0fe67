"""
Executable resolution for child-process boundaries: explicit path first, then PATH.
"""

from __future__ import annotations

import os
import shlex
import shutil
from collections.abc import Sequence
from pathlib import Path

from .errors import SpawnError


def split_command(command: str | Sequence[str]) -> list[str]:
    """Shell-style split for strings; sequences are copied as-is."""
    argv = shlex.split(command) if isinstance(command, str) else [str(a) for a in command]
    if not argv:
        raise SpawnError("empty command", argv)
    return argv


def resolve_command(command: str | Sequence[str]) -> list[str]:
    """
    Return ``argv`` with its program replaced by a runnable path.

    Raises:
        SpawnError: the program is neither an executable path nor on PATH.
    """
    argv = split_command(command)
    program = argv[0]
    if os.sep in program or (os.altsep and os.altsep in program):
        candidate = Path(program)
        if candidate.is_file() and os.access(candidate, os.X_OK):
            return [str(candidate), *argv[1:]]
        raise SpawnError(f"{program}: not an executable file", argv)
    found = shutil.which(program)
    if not found:
        raise SpawnError(f"{program}: not found on PATH", argv)
    return [found, *argv[1:]]
