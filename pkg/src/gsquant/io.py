"""GSQ1 binary arrays and small-array JSON export.

Layout: 8-byte magic ``GSQARR01``, little-endian ``u32 d``, ``u32 n`` per
axis, ``f64 L`` per axis, then interleaved ``f64`` (re, im) pairs in
row-major order.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .grid import Grid, SampledFunction

MAGIC = b"GSQARR01"
JSON_MAX_VALUES = 1 << 16


def to_bytes(f: SampledFunction) -> bytes:
    g = f.grid
    head = MAGIC + struct.pack(f"<I{g.d}I{g.d}d", g.d, *g.n, *g.L)
    body = np.ascontiguousarray(f.values, dtype="<c16").tobytes()
    return head + body


def from_bytes(buf: bytes, label: str = "") -> SampledFunction:
    if buf[:8] != MAGIC:
        raise ValueError("not a GSQ1 array (bad magic)")
    off = 8
    (d,) = struct.unpack_from("<I", buf, off)
    off += 4
    if d < 1 or d > 8:
        raise ValueError(f"unsupported dimension {d}")
    n = struct.unpack_from(f"<{d}I", buf, off)
    off += 4 * d
    L = struct.unpack_from(f"<{d}d", buf, off)
    off += 8 * d
    grid = Grid(tuple(n), tuple(L))
    expected = 16 * grid.size
    if len(buf) - off != expected:
        raise ValueError(f"payload has {len(buf) - off} bytes, expected {expected}")
    vals = np.frombuffer(buf, dtype="<c16", offset=off).reshape(grid.shape)
    return SampledFunction(grid, vals.astype(complex), label)


def write_gsq1(path, f: SampledFunction) -> None:
    Path(path).write_bytes(to_bytes(f))


def read_gsq1(path, label: str = "") -> SampledFunction:
    return from_bytes(Path(path).read_bytes(), label)


def to_json_dict(f: SampledFunction) -> dict:
    if f.grid.size > JSON_MAX_VALUES:
        raise ValueError(f"array of {f.grid.size} values is too large for JSON export")
    flat = f.values.ravel()
    return {
        "format": "GSQ1-json",
        "label": f.label,
        "n": list(f.grid.n),
        "L": list(f.grid.L),
        "re": flat.real.tolist(),
        "im": flat.imag.tolist(),
    }


def from_json_dict(obj: dict) -> SampledFunction:
    grid = Grid(tuple(int(v) for v in obj["n"]), tuple(float(v) for v in obj["L"]))
    vals = np.asarray(obj["re"], dtype=float) + 1j * np.asarray(obj["im"], dtype=float)
    return SampledFunction(grid, vals, obj.get("label", ""))


def dumps(f: SampledFunction) -> str:
    return json.dumps(to_json_dict(f), sort_keys=True)


def loads(text: str) -> SampledFunction:
    return from_json_dict(json.loads(text))
