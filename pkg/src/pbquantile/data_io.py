"""Reading outcome samples and writing reports."""

from __future__ import annotations

import contextlib
import csv
import io
import json
import math
import re
import sys
from dataclasses import dataclass, field
from typing import IO, Iterator, Literal, Optional, Union

import numpy as np

Format = Literal["lines", "csv"]

_DECIMAL = re.compile(r"[+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?")


class SampleParseError(ValueError):
    """Raised when input rows cannot be turned into finite floats."""

    def __init__(self, message: str, bad_lines: Optional[list[int]] = None) -> None:
        self.bad_lines = list(bad_lines or [])
        if self.bad_lines:
            shown = ", ".join(str(n) for n in self.bad_lines[:20])
            more = "" if len(self.bad_lines) <= 20 else f" (+{len(self.bad_lines) - 20} more)"
            message = f"{message}: line(s) {shown}{more}"
        super().__init__(message)


@dataclass(frozen=True)
class InputSpec:
    path: str
    format: Format = "lines"
    csv_column: Union[str, int, None] = None
    csv_header: bool = True

    def __post_init__(self) -> None:
        if self.format not in ("lines", "csv"):
            raise ValueError(f"unknown input format {self.format!r}")
        if (self.format == "csv") != (self.csv_column is not None):
            raise ValueError("csv_column is required for csv input and only for csv input")
        if isinstance(self.csv_column, str) and not self.csv_header:
            raise ValueError("a named csv column needs a header row")


@dataclass
class ReadResult:
    values: np.ndarray
    rejected_lines: list[int] = field(default_factory=list)
    blank_lines: int = 0


def parse_float(token: str) -> Optional[float]:
    """Locale-independent finite float, or ``None``."""
    token = token.strip()
    if not _DECIMAL.fullmatch(token):
        return None
    value = float(token)
    return value if math.isfinite(value) else None


@contextlib.contextmanager
def _open_text(path: str) -> Iterator[IO[str]]:
    if path == "-":
        yield io.TextIOWrapper(sys.stdin.buffer, encoding="utf-8", newline="")
        return
    try:
        fh = open(path, "r", encoding="utf-8", newline="")
    except OSError as exc:
        raise OSError(f"cannot read {path}: {exc.strerror or exc}") from exc
    with fh:
        yield fh


def _iter_lines(fh: IO[str]) -> Iterator[tuple[int, str]]:
    for lineno, line in enumerate(fh, start=1):
        yield lineno, line.rstrip("\r\n")


def _iter_csv(fh: IO[str], column: Union[str, int], header: bool) -> Iterator[tuple[int, str]]:
    reader = csv.reader(fh, strict=True)
    col: Optional[int] = column if isinstance(column, int) else None
    try:
        for row in reader:
            lineno = reader.line_num
            if header and lineno == 1:
                if isinstance(column, str):
                    names = [c.strip() for c in row]
                    if column not in names:
                        raise SampleParseError(f"csv column {column!r} not in header {names}")
                    col = names.index(column)
                continue
            if not row or all(not c.strip() for c in row):
                yield lineno, ""
                continue
            assert col is not None
            yield lineno, (row[col] if col < len(row) else None)
    except csv.Error as exc:
        raise SampleParseError(f"malformed csv near line {reader.line_num}: {exc}") from exc


def read_sample(spec: InputSpec, *, strict: bool = True) -> ReadResult:
    """Parse one column of finite floats in a single pass.

    Blank lines are skipped. Any other row that does not hold a finite
    number (including ``nan``/``inf``) is rejected; with ``strict`` the call
    raises :class:`SampleParseError` listing the rejected line numbers,
    otherwise they are reported in :attr:`ReadResult.rejected_lines`.
    """
    values: list[float] = []
    rejected: list[int] = []
    blank = 0
    with _open_text(spec.path) as fh:
        if spec.format == "lines":
            rows = _iter_lines(fh)
        else:
            rows = _iter_csv(fh, spec.csv_column, spec.csv_header)
        for lineno, token in rows:
            if token is not None and not token.strip():
                blank += 1
                continue
            value = parse_float(token) if token is not None else None
            if value is None:
                rejected.append(lineno)
            else:
                values.append(value)
    if rejected and strict:
        raise SampleParseError(f"{spec.path}: could not parse a finite number", rejected)
    if not values:
        raise SampleParseError(f"{spec.path}: no valid values")
    return ReadResult(np.array(values, dtype=np.float64), rejected, blank)


def write_sample(values, dest: Union[str, IO[str]]) -> None:
    """One shortest round-trip decimal per line."""
    text = "".join(f"{float(v)!r}\n" for v in values)
    _write_text(text, dest)


def _to_plain(obj):
    if isinstance(obj, dict):
        return {str(k): _to_plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_to_plain(v) for v in obj]
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return _to_plain(obj.tolist())
    return obj


def to_json(report) -> str:
    payload = report.to_dict() if hasattr(report, "to_dict") else report
    return json.dumps(_to_plain(payload), sort_keys=True, indent=2, allow_nan=False) + "\n"


def format_table(headers: list[str], rows: list[list]) -> str:
    """Right-aligned columns with a dashed rule under the header."""
    cells = [[str(h) for h in headers]] + [[str(c) for c in row] for row in rows]
    widths = [max(len(r[i]) for r in cells) for i in range(len(headers))]
    lines = ["  ".join(c.rjust(w) for c, w in zip(r, widths)) for r in cells]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"


def to_table(report) -> str:
    return format_table(*report.table())


def _write_text(text: str, dest: Union[str, IO[str], None]) -> None:
    if dest is None or dest == "-":
        sys.stdout.write(text)
        sys.stdout.flush()
    elif isinstance(dest, str):
        try:
            with open(dest, "w", encoding="utf-8", newline="\n") as fh:
                fh.write(text)
        except OSError as exc:
            raise OSError(f"cannot write {dest}: {exc.strerror or exc}") from exc
    else:
        dest.write(text)


def write_report(report, format: str = "json", destination: Union[str, IO[str], None] = "-") -> None:
    if format == "json":
        text = to_json(report)
    elif format == "table":
        text = to_table(report)
    else:
        raise ValueError(f"unknown report format {format!r}")
    _write_text(text, destination)
