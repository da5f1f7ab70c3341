"""Per-step CSV logs with a fixed column schema."""

from __future__ import annotations

import csv
import math
from dataclasses import astuple, dataclass, fields
from pathlib import Path
from typing import Iterable

COLUMNS = ("t", "x1", "v1", "x2", "v2", "z1", "z2", "xh1", "vh1", "xh2", "vh2",
           "offset", "u", "recovery", "detach_state")
DETACH_STATES = ("attached", "separating", "detached")


class LogFormatError(ValueError):
    pass


@dataclass(frozen=True)
class LogRecord:
    """One control step. SI units throughout."""

    t: float
    x1: float
    v1: float
    x2: float
    v2: float
    z1: float
    z2: float
    xh1: float
    vh1: float
    xh2: float
    vh2: float
    offset: float
    u: float
    recovery: int
    detach_state: str


assert tuple(f.name for f in fields(LogRecord)) == COLUMNS


def _fmt(value) -> str:
    if isinstance(value, str):
        return value
    if isinstance(value, (int,)) and not isinstance(value, bool):
        return str(value)
    # repr is the shortest string that round-trips the float exactly
    return repr(float(value))


def write_log(records: Iterable[LogRecord], path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(COLUMNS)
        for rec in records:
            writer.writerow([_fmt(v) for v in astuple(rec)])
    return path


def read_log(path) -> list[LogRecord]:
    path = Path(path)
    out = []
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header) != COLUMNS:
            raise LogFormatError(f"{path}:1: expected header {','.join(COLUMNS)}, got {header}")
        last_t = -math.inf
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(COLUMNS):
                raise LogFormatError(f"{path}:{lineno}: expected {len(COLUMNS)} fields, got {len(row)}")
            values = []
            for name, raw in zip(COLUMNS, row):
                try:
                    if name == "recovery":
                        values.append(int(raw))
                    elif name == "detach_state":
                        if raw not in DETACH_STATES:
                            raise ValueError(raw)
                        values.append(raw)
                    else:
                        values.append(float(raw))
                except ValueError:
                    raise LogFormatError(f"{path}:{lineno}: bad value {raw!r} in column {name!r}") from None
            rec = LogRecord(*values)
            if rec.t < last_t:
                raise LogFormatError(f"{path}:{lineno}: time goes backwards")
            last_t = rec.t
            out.append(rec)
    return out
