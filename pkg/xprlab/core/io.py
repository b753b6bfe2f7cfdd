import csv
import json
from pathlib import Path
from typing import Any, Sequence

from xprlab.bignum import big
from xprlab.core.errors import LengthError, UsageError


def load_json_arg(value: str) -> Any:
    """Parse a flag value that is either inline JSON or a path to a JSON file."""
    text = value.strip()
    if text[:1] in "[{":
        try:
            return json.loads(text)
        except json.JSONDecodeError as e:
            raise UsageError(f"invalid inline JSON: {e}") from e
    path = Path(value)
    if not path.exists():
        raise UsageError(f"no such file: {value}")
    with open(path, "r") as f:
        return json.load(f)


def load_xy_csv(path: str | Path, bits: int | None = None) -> tuple[list, list]:
    """Columns ``x`` and ``y`` of a data file, as BigReals."""
    with open(path, "r", newline="") as f:
        rows = list(csv.DictReader(f))
    if not rows or "x" not in rows[0] or "y" not in rows[0]:
        raise UsageError(f"{path} needs a header with columns x and y")
    return [big(row["x"], bits) for row in rows], [big(row["y"], bits) for row in rows]


def parse_list(value: str, bits: int | None = None) -> list:
    """``"0,0.3,0.7"`` -> BigReals."""
    return [big(v, bits) for v in value.split(",") if v.strip()]


def write_json(data: Any, path: str | Path) -> None:
    with open(path, "w") as f:
        json.dump(data, f, indent=2)


def emit_plot_data(series: Sequence[tuple[str, Sequence[Any]]], path: str | Path) -> None:
    """Write named columns as a CSV with a header row.

    An empty series writes a header-only file.
    """
    lengths = {len(column) for _, column in series}
    if len(lengths) > 1:
        raise LengthError(f"columns differ in length: {sorted(lengths)}")
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow([name for name, _ in series])
        for row in zip(*(column for _, column in series)):
            writer.writerow([_cell(v) for v in row])


def _cell(value: Any) -> Any:
    if hasattr(value, "_mpf_"):
        return str(value)
    return value
