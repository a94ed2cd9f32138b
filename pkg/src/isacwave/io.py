"""Waveform files and CSV output.

A ``.cwf`` file is: magic ``b"CWF1"``, a little-endian ``uint32`` header
length, a UTF-8 JSON header (grid dimensions plus free-form metadata), a
``uint64`` sample count and that many little-endian ``complex128`` values.
"""

from __future__ import annotations

import csv
import json
import struct
from pathlib import Path

import numpy as np

from .operators import GridConfig

CWF_MAGIC = b"CWF1"
CSV_SCHEMAS = {
    "trace": ("iter", "objective", "comm_term", "radar_term", "lagrangian", "res_y", "res_v"),
    "lbfgs": ("iter", "objective"),
}
SCHEMA_VERSION = 1


def save_cwf(path, s, grid: GridConfig | None = None, **meta) -> Path:
    path = Path(path)
    s = np.ascontiguousarray(s, dtype="<c16").reshape(-1)
    header = {"meta": meta}
    if grid is not None:
        if s.size != grid.time_len and s.size != grid.freq_len * grid.os_rate:
            raise ValueError(f"{s.size} samples do not fit the grid")
        header["grid"] = {"n_tx": grid.n_tx, "n_sub": grid.n_sub, "n_cp": grid.n_cp, "os_rate": grid.os_rate}
    blob = json.dumps(header, sort_keys=True, default=_json_default).encode()
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        fh.write(CWF_MAGIC)
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        fh.write(struct.pack("<Q", s.size))
        fh.write(s.tobytes())
    return path


def load_cwf(path) -> tuple[np.ndarray, GridConfig | None, dict]:
    """Returns ``(samples, grid or None, meta)``."""
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:4] != CWF_MAGIC:
        raise ValueError(f"{path}: not a waveform file")
    (hlen,) = struct.unpack_from("<I", data, 4)
    header = json.loads(data[8 : 8 + hlen].decode())
    (n,) = struct.unpack_from("<Q", data, 8 + hlen)
    start = 16 + hlen
    if len(data) - start != 16 * n:
        raise ValueError(f"{path}: truncated ({len(data) - start} bytes for {n} samples)")
    s = np.frombuffer(data, dtype="<c16", count=n, offset=start).astype(complex)
    grid = GridConfig(**header["grid"]) if "grid" in header else None
    return s, grid, header.get("meta", {})


def _json_default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _fmt(value):
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return value


def write_csv(path, rows, columns, schema: str) -> Path:
    """Write rows (dicts) with a ``#schema`` comment line above the header."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        fh.write(f"#schema={schema}/{SCHEMA_VERSION}\n")
        w = csv.DictWriter(fh, fieldnames=list(columns), lineterminator="\r\n", extrasaction="raise")
        w.writeheader()
        for row in rows:
            w.writerow({k: _fmt(row.get(k, "")) for k in columns})
    return path


def read_csv(path) -> tuple[str, list[dict]]:
    with open(path, newline="") as fh:
        first = fh.readline().strip()
        if not first.startswith("#schema="):
            raise ValueError(f"{path}: missing schema line")
        return first[len("#schema="):], list(csv.DictReader(fh))


def write_trace(path, trace) -> Path:
    return write_csv(path, trace.rows(), CSV_SCHEMAS["trace"], "trace")
