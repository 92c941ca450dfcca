"""Report and CSV emission: atomic writes, shortest round-trip floats."""

from __future__ import annotations

import json
import os
import tempfile


def write_atomic(path, text: str) -> None:
    """Write-temp-then-rename so partial files never appear."""
    path = os.fspath(path)
    d = os.path.dirname(path) or "."
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp_", text=True)
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def kv_text(d: dict) -> str:
    return "\n".join(f"{k} = {v!r}" for k, v in d.items()) + "\n"


def csv_text(header: list, rows: list) -> str:
    import numpy as np

    lines = [",".join(header)]
    for row in rows:
        cells = []
        for x in row:
            if isinstance(x, (float, np.floating)):
                cells.append(repr(float(x)))
            else:
                cells.append(str(x))
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


def write_json(path, obj) -> None:
    write_atomic(path, json.dumps(obj, indent=2, sort_keys=True) + "\n")
