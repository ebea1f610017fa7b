"""Reading and writing series files and JSON sidecars."""
from __future__ import annotations

import json
import math
import os

import numpy as np


class SeriesFormatError(ValueError):
    """Malformed series input; the message names the offending line."""


def _split(line, delim):
    return [tok.strip() for tok in (line.split(delim) if delim else line.split())]


def parse_series(text: str, column: str | int | None = None, source: str = "<input>") -> np.ndarray:
    """Parse single-column numeric text or delimited text with a header row.

    Blank rows, NaN values and non-numeric cells are rejected with their
    1-based line numbers.  ``column`` selects a named or 0-based column when
    the input has more than one.
    """
    lines = text.splitlines()
    body = [(i + 1, ln) for i, ln in enumerate(lines) if not ln.lstrip().startswith("#")]
    while body and not body[-1][1].strip():
        body.pop()
    if not body:
        raise SeriesFormatError(f"{source}: no data")
    delim = "," if any("," in ln for _, ln in body) else None
    first = _split(body[0][1], delim)
    header = None
    try:
        [float(tok) for tok in first]
    except ValueError:
        header = first
        body = body[1:]
    ncol = len(header) if header else len(first)
    if column is None:
        if ncol != 1:
            names = header if header else list(range(ncol))
            raise SeriesFormatError(f"{source}: {ncol} columns; choose one of {names} with a column option")
        idx = 0
    elif isinstance(column, int) or str(column).isdigit():
        idx = int(column)
    else:
        if header is None or column not in header:
            raise SeriesFormatError(f"{source}: no column named {column!r}")
        idx = header.index(column)
    if idx >= ncol:
        raise SeriesFormatError(f"{source}: column index {idx} out of range")
    values, problems = [], []
    for lineno, ln in body:
        if not ln.strip():
            problems.append(f"line {lineno}: blank row")
            continue
        toks = _split(ln, delim)
        if len(toks) != ncol:
            problems.append(f"line {lineno}: expected {ncol} fields, found {len(toks)}")
            continue
        try:
            val = float(toks[idx])
        except ValueError:
            problems.append(f"line {lineno}: not a number: {toks[idx]!r}")
            continue
        if not math.isfinite(val):
            problems.append(f"line {lineno}: non-finite value {toks[idx]!r}")
            continue
        values.append(val)
    if problems:
        shown = "; ".join(problems[:10])
        more = f" (and {len(problems) - 10} more)" if len(problems) > 10 else ""
        raise SeriesFormatError(f"{source}: {shown}{more}")
    return np.array(values)


def read_series(path, column=None) -> np.ndarray:
    with open(path) as fh:
        return parse_series(fh.read(), column, source=str(path))


def format_series(z, header: str | None = "z") -> str:
    rows = "".join(f"{v:.17g}\n" for v in np.asarray(z, float))
    return (header + "\n" if header else "") + rows


def write_text(path, text: str):
    d = os.path.dirname(os.fspath(path))
    if d:
        os.makedirs(d, exist_ok=True)
    with open(path, "w", newline="\n") as fh:
        fh.write(text)


def dumps_json(obj) -> str:
    """Deterministic JSON: sorted keys, exact float repr, numpy scalars and arrays unwrapped."""
    def default(o):
        if isinstance(o, np.generic):
            return o.item()
        if isinstance(o, np.ndarray):
            return o.tolist()
        raise TypeError(f"cannot serialize {type(o)}")

    return json.dumps(obj, sort_keys=True, indent=2, default=default) + "\n"


def write_json(path, obj):
    write_text(path, dumps_json(obj))
