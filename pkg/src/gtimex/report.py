"""Delimited output with a provenance header, written atomically."""

from __future__ import annotations

import csv
import io
import json
import os
import tempfile
from pathlib import Path

import numpy as np

from . import __version__

__all__ = ["config_header", "format_value", "csv_text", "write_atomic", "write_csv", "summary_text"]


def config_header(config=None, extra: dict | None = None) -> list[str]:
    """``# key: value`` lines describing the resolved configuration."""
    lines = [f"gtimex {__version__}"]
    if config is not None:
        for key, value in config.to_dict().items():
            lines.append(f"{key}: {json.dumps(value)}")
    for key, value in (extra or {}).items():
        lines.append(f"{key}: {json.dumps(value, default=str)}")
    return lines


def format_value(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def csv_text(columns, rows, header_lines=()) -> str:
    buf = io.StringIO()
    for line in header_lines:
        buf.write(f"# {line}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([format_value(v) for v in row])
    return buf.getvalue()


def write_atomic(path, text: str) -> Path:
    """Write through a temporary file in the target directory, then rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def write_csv(path, columns, rows, header_lines=()) -> Path:
    return write_atomic(path, csv_text(columns, rows, header_lines))


def summary_text(title: str, header_lines, body_lines) -> str:
    text = [title, "=" * len(title), ""]
    text += [f"# {line}" for line in header_lines]
    text += [""] + list(body_lines) + [""]
    return "\n".join(text)
