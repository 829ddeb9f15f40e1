"""CSV formatting and atomic file output shared by the models and the CLI."""

from __future__ import annotations

import csv
import io
import json
import os
import tempfile

import numpy as np

DEFAULT_PRECISION = 9


def fmt(x, precision: int = DEFAULT_PRECISION) -> str:
    """Locale-independent number formatting: integers verbatim, floats to ``precision`` significant digits."""
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, str):
        return x
    return f"{float(x):.{precision}g}"


def write_csv(header, rows, precision: int = DEFAULT_PRECISION) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(x, precision) for x in row])
    return buf.getvalue()


def to_json(obj, precision: int = DEFAULT_PRECISION) -> str:
    """Stable JSON with floats rounded to ``precision`` significant digits."""

    def conv(v):
        if isinstance(v, dict):
            return {k: conv(x) for k, x in v.items()}
        if isinstance(v, (list, tuple)):
            return [conv(x) for x in v]
        if isinstance(v, (float, np.floating)):
            return float(f"{float(v):.{precision}g}")
        if isinstance(v, np.integer):
            return int(v)
        return v

    return json.dumps(conv(obj), indent=2, sort_keys=True) + "\n"


def atomic_write(path, text: str):
    """Write via a temp file in the same directory and rename over ``path``."""
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=".part")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
