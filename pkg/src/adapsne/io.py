"""Dataset readers and writers: comma-separated text and the ``rawmat`` binary.

rawmat layout (little-endian)::

    b"ADSN"  u32 version=1  u64 N  u64 D  N*D float32, row-major
"""

import csv
import math
import struct
from pathlib import Path

import numpy as np

from .affinity import Dataset
from .errors import DataError, ValidationError

MAGIC = b"ADSN"
VERSION = 1
HEADER = struct.Struct("<4sIQQ")


def _is_number(tok):
    try:
        float(tok)
    except ValueError:
        return False
    return True


def read_csv(path):
    rows = []
    width = None
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise DataError(f"cannot open {path}: {exc}") from exc
    with fh:
        for lineno, rec in enumerate(csv.reader(fh), start=1):
            if not rec or all(not t.strip() for t in rec):
                continue
            if lineno == 1 and not _is_number(rec[0].strip()):
                continue  # header
            if width is None:
                width = len(rec)
            elif len(rec) != width:
                raise DataError(f"{path}: line {lineno} has {len(rec)} fields, expected {width}")
            try:
                vals = [float(t) for t in rec]
            except ValueError as exc:
                raise DataError(f"{path}: line {lineno}: {exc}") from None
            if not all(math.isfinite(v) for v in vals):
                raise DataError(f"{path}: line {lineno} holds a non-finite value")
            rows.append(vals)
    if not rows:
        raise DataError(f"{path}: no samples")
    return np.array(rows, dtype=np.float64)


def read_rawmat(path):
    try:
        buf = Path(path).read_bytes()
    except OSError as exc:
        raise DataError(f"cannot open {path}: {exc}") from exc
    if len(buf) < HEADER.size:
        raise DataError(f"{path}: truncated header at byte offset {len(buf)} (need {HEADER.size})")
    magic, version, n, d = HEADER.unpack_from(buf)
    if magic != MAGIC:
        raise DataError(f"{path}: bad magic {magic!r} at byte offset 0")
    if version != VERSION:
        raise DataError(f"{path}: unsupported version {version} at byte offset 4")
    need = HEADER.size + 4 * n * d
    if len(buf) < need:
        # offset of the first missing float32
        missing = HEADER.size + 4 * ((len(buf) - HEADER.size) // 4)
        raise DataError(f"{path}: truncated payload at byte offset {missing}, expected {need} bytes for N={n}, D={d}")
    if len(buf) > need:
        raise DataError(f"{path}: {len(buf) - need} trailing bytes after byte offset {need}")
    x = np.frombuffer(buf, dtype="<f4", count=n * d, offset=HEADER.size).reshape(n, d)
    bad = ~np.isfinite(x).all(axis=1)
    if bad.any():
        r = int(np.flatnonzero(bad)[0])
        c = int(np.flatnonzero(~np.isfinite(x[r]))[0])
        raise DataError(f"{path}: non-finite value at byte offset {HEADER.size + 4 * (r * d + c)}")
    return x.astype(np.float64)


def write_rawmat(path, features):
    x = np.asarray(features.features if isinstance(features, Dataset) else features)
    if x.ndim != 2:
        raise ValidationError("rawmat holds a 2-D matrix")
    n, d = x.shape
    with open(path, "wb") as fh:
        fh.write(HEADER.pack(MAGIC, VERSION, n, d))
        fh.write(np.ascontiguousarray(x, dtype="<f4").tobytes())


def sniff_format(path):
    with open(path, "rb") as fh:
        head = fh.read(4)
    return "rawmat" if head == MAGIC else "csv"


def load_dataset(path, format=None):
    """Read ``path`` as ``csv`` or ``rawmat`` (sniffed from the magic when None)."""
    try:
        fmt = format or sniff_format(path)
    except OSError as exc:
        raise DataError(f"cannot open {path}: {exc}") from exc
    if fmt == "csv":
        x = read_csv(path)
    elif fmt == "rawmat":
        x = read_rawmat(path)
    else:
        raise ValidationError(f"unknown data format {fmt!r}")
    try:
        return Dataset(x)
    except ValidationError as exc:
        raise DataError(f"{path}: {exc}") from exc
