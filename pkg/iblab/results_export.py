import json
import os
import tempfile
from pathlib import Path
from typing import Any

import pandas as pd

from iblab import utils
from iblab.decomposition import DecompositionReport


def csv_text(df: pd.DataFrame) -> str:
    """Render a result table as CSV with 10 significant digits."""
    return df.to_csv(index=False, float_format="%.10g", lineterminator="\n")


def json_text(data: dict[str, Any]) -> str:
    """Render a JSON document with sorted keys and rounded floats."""
    return json.dumps(utils.rounded(data), indent=2, sort_keys=True) + "\n"


def write_text(text: str, filepath: str | Path) -> Path:
    """Write text atomically.

    The text goes to a temporary file in the destination directory, which is
    then moved over `filepath`.

    Args:
        text: Content to write.
        filepath: Destination path.

    Returns:
        The destination path.
    """
    filepath = Path(filepath)
    fd, tmp = tempfile.mkstemp(dir=filepath.parent, prefix=f".{filepath.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf8", newline="\n") as f:
            f.write(text)
        os.replace(tmp, filepath)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise
    return filepath


def write_csv(df: pd.DataFrame, filepath: str | Path) -> Path:
    """Write a result table to a CSV file."""
    return write_text(csv_text(df), filepath)


def write_json(data: dict[str, Any], filepath: str | Path) -> Path:
    """Write a JSON document to a file."""
    return write_text(json_text(data), filepath)


def comparison_frame(report: DecompositionReport) -> pd.DataFrame:
    """The IB and DVIB sides of the I(T;Y) comparison as a table.

    The IB side sums the bound term (which already carries H(Y)) and both
    gap terms; the DVIB side is the bound term alone. Their difference is the
    T-X-Y violation.
    """
    ib_side = report.bound_term + report.cmi + report.clautum
    dvib_side = report.bound_term
    rows = [
        ("E log P(Y|T) + H(Y)", report.bound_term, report.bound_term),
        ("I(Y;T|X)", report.cmi, 0.0),
        ("L(Y;T|X)", report.clautum, 0.0),
        ("Optimised term for I(T;Y)", ib_side, dvib_side),
    ]
    df = pd.DataFrame(rows, columns=["term", "IB", "DVIB"])
    df.attrs["difference"] = ib_side - dvib_side
    return df


def render_comparison(report: DecompositionReport) -> str:
    """Render the IB versus DVIB comparison as a text table."""
    df = comparison_frame(report)
    body = df.to_string(index=False, float_format=lambda v: f"{v:.10g}")
    return (
        f"{body}\n"
        f"difference (IB - DVIB): {df.attrs['difference']:.10g}\n"
        f"I(T;Y) exact: {report.i_ty_exact:.10g}\n"
    )
