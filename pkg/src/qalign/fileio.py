"""Atomic writes and the tab-separated formats read by the CLI."""

from __future__ import annotations

import os
import tempfile
from pathlib import Path

from .errors import FormatError


def atomic_write_bytes(path, data: bytes) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except FileNotFoundError:
            pass
        raise


def atomic_write_text(path, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))


def read_tsv(path, ncols: int, what: str = "records") -> list[list[str]]:
    """Read a headerless TSV with exactly ``ncols`` columns; blank lines skipped."""
    rows = []
    with open(path, encoding="utf-8", newline="") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\r\n")
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) != ncols:
                raise FormatError(f"{path}:{lineno}: expected {ncols} tab-separated {what} columns, got {len(parts)}")
            rows.append(parts)
    return rows


def parse_float(token: str, where: str) -> float:
    try:
        return float(token)
    except ValueError:
        raise FormatError(f"{where}: not a number: {token!r}") from None
