"""Minimal PGM (P2 ascii / P5 binary) reader and writer, bit depth <= 16."""

from __future__ import annotations

import re
from pathlib import Path

import numpy as np


class PgmError(ValueError):
    pass


def _tokens(data: bytes):
    # header tokens, skipping '#' comments to end of line
    pos = 0
    while pos < len(data):
        ch = data[pos : pos + 1]
        if ch.isspace():
            pos += 1
        elif ch == b"#":
            nl = data.find(b"\n", pos)
            pos = len(data) if nl < 0 else nl + 1
        else:
            m = re.match(rb"[^\s#]+", data[pos:])
            yield m.group(0), pos + m.end()
            pos += m.end()


def decode(data: bytes) -> tuple[np.ndarray, int]:
    """Parse PGM bytes; returns (array uint16 of shape (H, W), maxval)."""
    toks = _tokens(data)
    try:
        magic, _ = next(toks)
    except StopIteration:
        raise PgmError("empty file")
    if magic not in (b"P2", b"P5"):
        raise PgmError(f"not a PGM file (magic {magic!r})")
    try:
        (w, _), (h, _), (maxval, end) = [next(toks) for _ in range(3)]
        width, height, maxval = int(w), int(h), int(maxval)
    except (StopIteration, ValueError):
        raise PgmError("truncated or malformed PGM header")
    if width < 1 or height < 1 or not (0 < maxval < 65536):
        raise PgmError(f"bad PGM dimensions {width}x{height} maxval {maxval}")

    count = width * height
    if magic == b"P5":
        # exactly one whitespace byte after maxval, then raw samples
        raw = data[end + 1 :]
        itemsize = 2 if maxval > 255 else 1
        if len(raw) < count * itemsize:
            raise PgmError("truncated P5 pixel data")
        dt = ">u2" if itemsize == 2 else "u1"
        arr = np.frombuffer(raw[: count * itemsize], dtype=dt).astype(np.uint16)
    else:
        vals = []
        for tok, _ in toks:
            vals.append(int(tok))
            if len(vals) == count:
                break
        if len(vals) != count:
            raise PgmError("truncated P2 pixel data")
        arr = np.asarray(vals, dtype=np.uint16)
    if arr.max(initial=0) > maxval:
        raise PgmError("sample exceeds declared maxval")
    return arr.reshape(height, width), maxval


def encode(arr: np.ndarray, maxval: int, binary: bool = True) -> bytes:
    arr = np.asarray(arr)
    if arr.ndim != 2:
        raise PgmError("PGM arrays must be 2-D")
    if not (0 < maxval < 65536):
        raise PgmError("maxval must be in [1, 65535]")
    if arr.min(initial=0) < 0 or arr.max(initial=0) > maxval:
        raise PgmError("samples must lie in [0, maxval]")
    h, w = arr.shape
    header = f"{'P5' if binary else 'P2'}\n{w} {h}\n{maxval}\n".encode()
    if binary:
        dt = ">u2" if maxval > 255 else "u1"
        return header + arr.astype(dt).tobytes()
    body = "\n".join(" ".join(str(int(v)) for v in row) for row in arr)
    return header + body.encode() + b"\n"


def read(path) -> tuple[np.ndarray, int]:
    return decode(Path(path).read_bytes())


def write(path, arr: np.ndarray, maxval: int, binary: bool = True) -> None:
    Path(path).write_bytes(encode(arr, maxval, binary))
