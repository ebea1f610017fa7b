"""Bundled data."""
from __future__ import annotations

import io
from importlib.resources import files

import numpy as np


def load_faithful(column: str = "waiting") -> np.ndarray:
    """Old Faithful geyser data (272 eruptions), one column as a float array.

    ``waiting`` is the time in minutes to the next eruption; ``eruptions`` is
    the eruption duration in minutes.
    """
    text = (files("dpmarkov") / "data" / "faithful.csv").read_text()
    names = text.splitlines()[0].split(",")
    if column not in names:
        raise ValueError(f"unknown column {column!r}; choose from {names}")
    return np.loadtxt(io.StringIO(text), delimiter=",", skiprows=1, usecols=names.index(column))
