"""
Common Utility Functions
Formatting, output and hashing helpers shared across all modules
"""

import hashlib
import json
import math
import os
from fractions import Fraction
from typing import Any, Dict, List, Optional

import pandas as pd

SCHEMA_HEADER = "# ab-shift-lab schema v1"


def format_value(value: Any) -> str:
    """
    Format a number without losing precision.

    Args:
        value: Fraction, int, float or anything printable

    Returns:
        str: `p/q` for rationals, `p` for integers, repr precision for floats
    """
    if isinstance(value, Fraction):
        if value.denominator == 1:
            return str(value.numerator)
        return f"{value.numerator}/{value.denominator}"
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, float):
        if math.isinf(value) or math.isnan(value):
            return str(value)
        return repr(value)
    return str(value)


def jsonable(value: Any) -> Any:
    """
    Convert nested results into JSON-serializable values.

    Args:
        value: Result object (dicts, lists, tuples, numpy scalars, Fractions)

    Returns:
        JSON-compatible structure
    """
    if isinstance(value, Fraction):
        return format_value(value)
    if isinstance(value, dict):
        return {str(k): jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple, set, frozenset)):
        items = sorted(value) if isinstance(value, (set, frozenset)) else value
        return [jsonable(v) for v in items]
    if hasattr(value, "tolist"):
        return value.tolist()
    if isinstance(value, float) and (math.isinf(value) or math.isnan(value)):
        return str(value)
    return value


def to_json(data: Any) -> str:
    """Deterministic JSON rendering (sorted keys, 2-space indent)"""
    return json.dumps(jsonable(data), sort_keys=True, indent=2)


def render_table(rows: List[Dict[str, Any]], fmt: str,
                 columns: Optional[List[str]] = None) -> str:
    """
    Render result rows as csv, json or text.

    Args:
        rows: One dict per row
        fmt: Output format (csv, json, text)
        columns: Column order; defaults to first-row key order

    Returns:
        str: Rendered table
    """
    if fmt == "json":
        return to_json(rows)

    if columns is None:
        columns = list(rows[0].keys()) if rows else []
    frame = pd.DataFrame(
        [{c: format_value(row.get(c, "")) for c in columns} for row in rows],
        columns=columns,
    )
    if fmt == "csv":
        return SCHEMA_HEADER + "\n" + frame.to_csv(index=False, lineterminator="\n")
    if frame.empty:
        return "(no rows)\n"
    return frame.to_string(index=False) + "\n"


def write_output(text: str, out: Optional[str] = None) -> None:
    """
    Write rendered output to a file or stdout.

    Args:
        text: Rendered output
        out: Destination path; stdout when None
    """
    if not text.endswith("\n"):
        text += "\n"
    if out is None:
        print(text, end="")
        return
    directory = os.path.dirname(out)
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(out, "w") as f:
        f.write(text)


def generate_cache_key(*args) -> str:
    """
    Generate a stable cache key from arguments.

    Args:
        *args: Arguments to hash

    Returns:
        str: Cache key
    """
    key_string = "_".join(format_value(arg) for arg in args)
    return hashlib.sha256(key_string.encode()).hexdigest()
