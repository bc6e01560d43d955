"""Reading and writing matrices and vectors as CSV or the binary column-major format.

Binary layout: the 8-byte magic ``b"SDMAT\\x00\\x01\\x00"``, two little-endian
uint64 dimensions (rows, cols), then rows * cols little-endian float64 values
in column-major order.
"""

import json
import math
import struct
from pathlib import Path

import numpy as np

from .errors import InputIOError

MAGIC = b"SDMAT\x00\x01\x00"
_HEADER = struct.Struct("<8sQQ")


def write_binary(path, A):
    A = np.asarray(A, dtype="<f8")
    if A.ndim == 1:
        A = A[:, None]
    if A.ndim != 2:
        raise InputIOError("only 1-D or 2-D arrays can be written")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, A.shape[0], A.shape[1]))
        fh.write(np.asfortranarray(A).tobytes(order="F"))


def read_binary(path):
    try:
        raw = Path(path).read_bytes()
    except OSError as exc:
        raise InputIOError(f"cannot read {path}: {exc}") from exc
    if len(raw) < _HEADER.size:
        raise InputIOError(f"{path}: file too short for a matrix header")
    magic, rows, cols = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise InputIOError(f"{path}: bad magic bytes {magic!r}")
    expected = _HEADER.size + 8 * rows * cols
    if len(raw) != expected:
        raise InputIOError(f"{path}: expected {expected} bytes for a {rows}x{cols} matrix, found {len(raw)}")
    data = np.frombuffer(raw, dtype="<f8", offset=_HEADER.size)
    # C order so downstream BLAS reductions match the CSV path bit for bit
    return np.ascontiguousarray(data.reshape((rows, cols), order="F"), dtype=np.float64)


def read_csv(path, header=False):
    try:
        A = np.loadtxt(path, delimiter=",", skiprows=1 if header else 0, dtype=np.float64, ndmin=2)
    except (OSError, ValueError) as exc:
        raise InputIOError(f"cannot read CSV {path}: {exc}") from exc
    return A


def format_rows(A, int_cols=()):
    """CSV lines with shortest round-trip floats; ``int_cols`` are written as integers."""
    A = np.asarray(A, dtype=np.float64)
    if A.ndim == 1:
        A = A[:, None]
    ints = set(int_cols)
    return [",".join(str(int(v)) if j in ints else repr(float(v)) for j, v in enumerate(row))
            for row in A]


def write_csv(path, A, header=None, int_cols=()):
    with open(path, "w") as fh:
        if header:
            fh.write(",".join(header) + "\n")
        for line in format_rows(A, int_cols):
            fh.write(line + "\n")


def _is_binary(path):
    try:
        with open(path, "rb") as fh:
            return fh.read(8) == MAGIC
    except OSError as exc:
        raise InputIOError(f"cannot open {path}: {exc}") from exc


def load_matrix(path, header=False):
    """Load a 2-D matrix from CSV or the binary format (detected by magic)."""
    if _is_binary(path):
        return read_binary(path)
    return read_csv(path, header)


def load_vector(path, header=False):
    A = load_matrix(path, header)
    if A.ndim == 2 and 1 in A.shape:
        return A.ravel()
    raise InputIOError(f"{path}: expected a single row or column, got shape {A.shape}")


def save_matrix(path, A, fmt=None):
    fmt = fmt or ("binary" if str(path).endswith((".bin", ".sdm")) else "csv")
    if fmt == "binary":
        write_binary(path, A)
    else:
        write_csv(path, A)


def to_jsonable(obj):
    """Convert numpy values recursively; NaN and infinities become ``None``."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        return f if math.isfinite(f) else None
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def dumps(obj):
    return json.dumps(to_jsonable(obj), indent=2, sort_keys=True)
