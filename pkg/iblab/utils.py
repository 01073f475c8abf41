import hashlib
import math
from collections.abc import Mapping
from pathlib import Path
from typing import Any

import numpy as np

SIGNIFICANT_DIGITS = 10


def parse_beta_grid(text: str, log_spacing: bool = False) -> list[float]:
    """Parse an inclusive grid "a:b:n" into n values from a to b.

    Args:
        text: The grid, e.g. "1:10:10".
        log_spacing: Space the values evenly in log β instead of β.

    Raises:
        ValueError: When the grid is malformed.
    """
    parts = text.split(":")
    if len(parts) != 3:
        raise ValueError(f"Grid must look like 'a:b:n', got '{text}'.")
    try:
        start, stop, count = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError:
        raise ValueError(f"Grid must look like 'a:b:n', got '{text}'.") from None
    if count < 1:
        raise ValueError(f"Grid count must be at least 1, got {count}.")
    if stop < start:
        raise ValueError(f"Grid end {stop} is below its start {start}.")
    if count == 1:
        return [start]
    if log_spacing:
        if start <= 0:
            raise ValueError("A log-spaced grid needs a positive start.")
        values = np.geomspace(start, stop, count)
    else:
        values = np.linspace(start, stop, count)
    return [float(v) for v in values]


def parse_edge_grid(text: str, log_spacing: bool = False) -> tuple[str, list[float]]:
    """Parse "T->Y=a:b:n" into the edge and its grid."""
    edge, sep, grid = text.partition("=")
    if not sep or "->" not in edge:
        raise ValueError(f"Edge grid must look like 'U->V=a:b:n', got '{text}'.")
    return edge.strip(), parse_beta_grid(grid, log_spacing)


def file_digest(filepath: str | Path) -> str:
    """Return the sha256 hex digest of a file."""
    return hashlib.sha256(Path(filepath).read_bytes()).hexdigest()


def text_digest(text: str) -> str:
    return hashlib.sha256(text.encode("utf8")).hexdigest()


def round_sig(value: float, digits: int = SIGNIFICANT_DIGITS) -> float:
    """Round a float to `digits` significant digits; non-finite values pass through."""
    if not math.isfinite(value) or value == 0:
        return value
    return float(f"{value:.{digits}g}")


def rounded(obj: Any) -> Any:
    """Recursively round every float of a JSON-like object."""
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (float, np.floating)):
        # JSON has no literal for inf or nan.
        return round_sig(float(obj)) if math.isfinite(obj) else None
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, Mapping):
        return {str(k): rounded(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [rounded(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return rounded(obj.tolist())
    return obj
