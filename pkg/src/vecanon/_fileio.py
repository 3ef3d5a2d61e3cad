"""Shared text-file plumbing: atomic writes, round-trip float formatting, key=value parsing."""

from __future__ import annotations

import os
import tempfile
from pathlib import Path
from typing import Iterable, Iterator

FORMAT_VERSION = 1


class FormatError(ValueError):
    """A data file violates its on-disk format. Carries the file path and line number."""

    def __init__(self, message: str, path: str | os.PathLike | None = None,
                 line_no: int | None = None):
        self.path = str(path) if path is not None else None
        self.line_no = line_no
        loc = ""
        if self.path is not None:
            loc = self.path
            if line_no is not None:
                loc += f":{line_no}"
            loc += ": "
        super().__init__(loc + message)


def fmt_float(x: float) -> str:
    """Shortest decimal representation that round-trips exactly through float()."""
    return repr(float(x))


def fmt_vector(values) -> str:
    return ",".join(fmt_float(v) for v in values)


def parse_float(token: str, path=None, line_no=None) -> float:
    try:
        return float(token)
    except ValueError:
        raise FormatError(f"not a decimal float: {token!r}", path, line_no) from None


def atomic_write_text(path: str | os.PathLike, text: str) -> None:
    """Write via a temp file in the target directory followed by an atomic rename."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or Path("."), prefix=path.name + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def content_lines(path: str | os.PathLike) -> Iterator[tuple[int, str]]:
    """Yield (1-based line number, line) for non-blank, non-comment lines."""
    with open(path, encoding="utf-8") as fh:
        for i, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n").rstrip("\r")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            yield i, line


def parse_kv_file(path: str | os.PathLike) -> list[tuple[int, str, str]]:
    """Parse a flat ``key = value`` file into (line_no, key, value) triples.

    Repeated keys are preserved in order; interpretation is up to the caller.
    """
    triples = []
    for line_no, line in content_lines(path):
        if "=" not in line:
            raise FormatError("expected 'key = value'", path, line_no)
        key, _, value = line.partition("=")
        triples.append((line_no, key.strip(), value.strip()))
    return triples


def comment_block(comments: Iterable[str]) -> list[str]:
    """Normalize provenance comments to '# '-prefixed lines."""
    out = []
    for c in comments:
        c = str(c)
        out.append(c if c.startswith("#") else "# " + c)
    return out
