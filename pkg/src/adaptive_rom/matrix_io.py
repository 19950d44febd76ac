"""Matrix and JSON persistence for adaptive-rom.

Binary matrix container layout (all little-endian):

    bytes 0-7    magic b"AROMMAT1"
    bytes 8-15   rows, unsigned 64-bit
    bytes 16-23  cols, unsigned 64-bit
    bytes 24-    rows*cols float64 values in row-major order
"""

import hashlib
import json
import math
import struct
from pathlib import Path
from typing import Any

import numpy as np

from .errors import InvalidInputError

MAGIC = b"AROMMAT1"
_HEADER = struct.Struct("<8sQQ")


def write_matrix(path: Path, matrix: np.ndarray) -> Path:
    """
    Write a dense matrix to the binary container.

    Args:
        path: Destination file
        matrix: 1-D (stored as a column) or 2-D array

    Returns:
        The written path
    """
    data = np.asarray(matrix, dtype="<f8")
    if data.ndim == 1:
        data = data.reshape(-1, 1)
    if data.ndim != 2:
        raise InvalidInputError(f"write_matrix needs a 2-D array, got {data.ndim}-D")
    if not np.all(np.isfinite(data)):
        raise InvalidInputError(f"refusing to store non-finite entries in {path}")

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    temp_file = path.with_suffix(path.suffix + ".tmp")
    with open(temp_file, "wb") as f:
        f.write(_HEADER.pack(MAGIC, data.shape[0], data.shape[1]))
        f.write(np.ascontiguousarray(data).tobytes(order="C"))
    temp_file.replace(path)
    return path


def read_matrix(path: Path) -> np.ndarray:
    """
    Read a matrix written by write_matrix.

    Args:
        path: Container file

    Returns:
        float64 array of the stored shape

    Raises:
        InvalidInputError: Bad magic or truncated payload
    """
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise InvalidInputError(f"{path}: file too short for a matrix header")
    magic, rows, cols = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise InvalidInputError(f"{path}: not a matrix container (magic {magic!r})")
    expected = rows * cols * 8
    payload = raw[_HEADER.size :]
    if len(payload) != expected:
        raise InvalidInputError(
            f"{path}: payload has {len(payload)} bytes, header promises {expected}"
        )
    return np.frombuffer(payload, dtype="<f8").reshape(rows, cols).astype(float)


def export_csv(path: Path, matrix: np.ndarray, header: list[str] | None = None) -> Path:
    """
    Export a matrix as CSV for inspection.

    Args:
        path: Destination file
        matrix: 1-D or 2-D array
        header: Optional column names

    Returns:
        The written path
    """
    data = np.asarray(matrix, dtype=float)
    if data.ndim == 1:
        data = data.reshape(-1, 1)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    np.savetxt(
        path,
        data,
        delimiter=",",
        fmt="%.17g",
        header=",".join(header) if header else "",
        comments="",
    )
    return path


def compute_checksum(file_path: Path, algorithm: str = "sha256") -> str:
    """
    Compute checksum of a file.

    Args:
        file_path: Path to file
        algorithm: Hash algorithm (default: sha256)

    Returns:
        Checksum string in format "algorithm:hexdigest"
    """
    hasher = hashlib.new(algorithm)
    with open(file_path, "rb") as f:
        while chunk := f.read(8192):
            hasher.update(chunk)
    return f"{algorithm}:{hasher.hexdigest()}"


def checksum_text(text: str, algorithm: str = "sha256") -> str:
    """Checksum of a string in the same "algorithm:hexdigest" format."""
    return f"{algorithm}:{hashlib.new(algorithm, text.encode()).hexdigest()}"


def _finite_or_null(value: Any) -> Any:
    """Replace NaN and ±inf, at any depth, by None."""
    if isinstance(value, dict):
        return {key: _finite_or_null(item) for key, item in value.items()}
    if isinstance(value, list | tuple):
        return [_finite_or_null(item) for item in value]
    if isinstance(value, float | np.floating) and not math.isfinite(value):
        return None
    return value


def write_json_atomic(path: Path, data: dict[str, Any]) -> Path:
    """
    Write JSON through a temporary file and an atomic rename.

    Non-finite floats become null so the file stays strict JSON.

    Args:
        path: Destination file
        data: JSON-serialisable mapping

    Returns:
        The written path
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    temp_file = path.with_suffix(".tmp")
    with open(temp_file, "w") as f:
        json.dump(_finite_or_null(data), f, indent=2, allow_nan=False)
        f.write("\n")
    temp_file.replace(path)
    return path


def read_json(path: Path) -> dict[str, Any]:
    with open(path) as f:
        return json.load(f)
