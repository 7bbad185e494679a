"""Plain-text output files: '#'-prefixed header lines + comma-separated rows.

All grid/time-series products use the same self-describing format so that
runs can be diffed and re-read without custom tooling.
"""

from __future__ import annotations

import hashlib
import json
import os
import tempfile
from typing import Mapping, Sequence

import numpy as np


def digest(obj) -> str:
    """Stable sha256 hex digest of a JSON-serializable object."""
    blob = json.dumps(obj, sort_keys=True, default=repr).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def params_digest(params) -> str:
    from dataclasses import asdict
    return digest(asdict(params))


def write_table(path, header: Mapping[str, object],
                columns: Sequence[str], data: np.ndarray) -> None:
    """Write header key/value lines and a CSV body atomically."""
    data = np.atleast_2d(np.asarray(data))
    if data.shape[1] != len(columns):
        raise ValueError(f"{data.shape[1]} data columns for {len(columns)} names")
    dirname = os.path.dirname(os.path.abspath(path))
    os.makedirs(dirname, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=dirname, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            for key, value in header.items():
                fh.write(f"# {key} = {value}\n")
            fh.write("# columns = " + ",".join(columns) + "\n")
            for row in data:
                fh.write(",".join(f"{v:.17g}" for v in row) + "\n")
        os.replace(tmp, path)
    finally:
        if os.path.exists(tmp):
            os.unlink(tmp)


def read_table(path) -> tuple[dict, list[str], np.ndarray]:
    """Inverse of write_table; returns (header, columns, data)."""
    header: dict[str, str] = {}
    columns: list[str] = []
    rows = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                key, _, value = line[1:].partition("=")
                key = key.strip()
                value = value.strip()
                if key == "columns":
                    columns = value.split(",")
                else:
                    header[key] = value
            else:
                rows.append([float(v) for v in line.split(",")])
    return header, columns, np.asarray(rows)
