"""Deterministic CSV/JSON emission with atomic writes."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import os
import tempfile
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "array_checksum",
    "dumps_json",
    "format_value",
    "csv_text",
    "read_csv",
    "write_text_atomic",
]


def format_value(v) -> str:
    """Render a scalar for CSV: integers verbatim, floats with 17 significant
    digits (round-trips every IEEE double)."""
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return format(v, ".17g")
    return str(v)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else repr(v)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def dumps_json(obj) -> str:
    """JSON with sorted keys; non-finite floats become strings."""
    return json.dumps(_jsonable(obj), sort_keys=True, indent=2) + "\n"


def csv_text(
    header: Sequence[str], rows: Iterable[Sequence], comment: str | None = None
) -> str:
    buf = io.StringIO()
    if comment is not None:
        buf.write("# " + comment + "\n")
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(header)
    for row in rows:
        w.writerow([format_value(v) for v in row])
    return buf.getvalue()


def read_csv(path) -> tuple[dict | None, list[str], list[list[str]]]:
    """Read a CSV written by :func:`csv_text`. Returns (header JSON or None,
    column names, rows as strings)."""
    text = Path(path).read_text()
    meta = None
    if text.startswith("# "):
        first, text = text.split("\n", 1)
        try:
            meta = json.loads(first[2:])
        except json.JSONDecodeError:
            meta = None
    rows = list(csv.reader(io.StringIO(text)))
    return meta, rows[0], rows[1:]


def write_text_atomic(path, text: str) -> Path:
    """Write to a temporary file in the target directory, then rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".tmp-", suffix=path.suffix)
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def array_checksum(*arrays) -> str:
    h = hashlib.sha256()
    for a in arrays:
        a = np.ascontiguousarray(a)
        h.update(str(a.dtype).encode())
        h.update(str(a.shape).encode())
        h.update(a.tobytes())
    return h.hexdigest()
