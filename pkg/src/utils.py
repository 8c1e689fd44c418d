"""Utility functions for twochan."""

import csv
import hashlib
import json
import os
import tempfile
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np


def generate_cache_key(namespace: str, *arrays: np.ndarray, **kwargs) -> str:
    """Generate a cache key from a namespace, arrays and parameters.

    Args:
        namespace: Kind of cached computation
        *arrays: Matrices whose exact contents identify the computation
        **kwargs: Additional JSON-serializable parameters to include in key

    Returns:
        SHA256 hash string
    """
    digest = hashlib.sha256()
    digest.update(namespace.encode())
    for array in arrays:
        arr = np.ascontiguousarray(array, dtype=float)
        digest.update(str(arr.shape).encode())
        digest.update(arr.tobytes())
    digest.update(json.dumps(kwargs, sort_keys=True, default=str).encode())
    return digest.hexdigest()[:32]


def fmt6(value: Any) -> str:
    """Format a number with 6 significant digits for console output."""
    if value is None:
        return "-"
    if isinstance(value, (int, np.integer)) and not isinstance(value, bool):
        return str(value)
    try:
        return f"{float(value):.6g}"
    except (TypeError, ValueError):
        return str(value)


def symmetrize(matrix: np.ndarray) -> np.ndarray:
    """Return (M + Mᵀ)/2."""
    return 0.5 * (matrix + matrix.T)


def min_eigenvalue(matrix: np.ndarray) -> float:
    """Smallest eigenvalue of the symmetric part of a matrix."""
    if matrix.size == 0:
        return float("inf")
    return float(np.linalg.eigvalsh(symmetrize(matrix))[0])


def atomic_write_text(path: Path, content: str) -> Path:
    """Write text through a temporary file and rename it into place."""
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as f:
            f.write(content)
        os.replace(tmp_name, path)
    except BaseException:
        Path(tmp_name).unlink(missing_ok=True)
        raise
    return path


def load_json_file(path: Path) -> dict[str, Any]:
    """Load JSON from file.

    Args:
        path: Path to JSON file

    Returns:
        Parsed JSON data

    Raises:
        FileNotFoundError: If file doesn't exist
        json.JSONDecodeError: If JSON is invalid
    """
    with open(path, "r", encoding="utf-8") as f:
        return json.load(f)


def save_json_file(data: dict[str, Any], path: Path) -> Path:
    """Save data to JSON file.

    Args:
        data: Data to save
        path: Output path

    Returns:
        Path to saved file
    """
    return atomic_write_text(path, json.dumps(data, indent=2, default=_json_default) + "\n")


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> Path:
    """Write a CSV file with a header; every row must match the header width."""
    path.parent.mkdir(parents=True, exist_ok=True)
    width = len(header)
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(header)
        for row in rows:
            row = list(row)
            if len(row) != width:
                raise ValueError(f"CSV row has {len(row)} fields, header has {width}")
            writer.writerow([_csv_cell(v) for v in row])
    return path


def _csv_cell(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def _json_default(value: Any) -> Any:
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, Path):
        return str(value)
    return str(value)
