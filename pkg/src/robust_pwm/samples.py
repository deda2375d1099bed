"""Observation samples and their on-disk formats."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .exceptions import DataError

INLIER = "inlier"
OUTLIER = "outlier"


@dataclass(frozen=True)
class ObservationSample:
    """An ordered batch of finite real observations.

    ``tags`` optionally records per-value provenance (``"inlier"`` or
    ``"outlier"``). Arrays are stored read-only.
    """

    values: np.ndarray
    tags: np.ndarray | None = field(default=None)

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64).reshape(-1)
        if values.size == 0:
            raise DataError("sample is empty")
        if not np.all(np.isfinite(values)):
            bad = int(np.flatnonzero(~np.isfinite(values))[0])
            raise DataError(f"non-finite value at position {bad}")
        values.flags.writeable = False
        object.__setattr__(self, "values", values)
        if self.tags is not None:
            tags = np.array(self.tags, dtype=object).reshape(-1)
            if tags.shape != values.shape:
                raise ValueError("tags must match values in length")
            if not set(tags.tolist()) <= {INLIER, OUTLIER}:
                raise ValueError("tags must be 'inlier' or 'outlier'")
            tags.flags.writeable = False
            object.__setattr__(self, "tags", tags)

    def __len__(self):
        return self.values.size

    @property
    def n(self):
        return self.values.size

    @property
    def outlier_mask(self):
        if self.tags is None:
            return np.zeros(self.n, dtype=bool)
        return self.tags == OUTLIER

    def affine(self, a, b):
        """Return ``a * X + b`` with the same tags."""
        return ObservationSample(a * self.values + b, self.tags)


def parse_sample(text, source="<input>"):
    """Parse a one-column CSV (header ``value``) or newline-separated floats.

    Blank lines are skipped. Any unparsable or non-finite entry raises
    :class:`DataError` carrying its 1-based line number.
    """
    lines = text.splitlines()
    first = next((i for i, ln in enumerate(lines) if ln.strip()), None)
    if first is None:
        raise DataError(f"{source}: no observations")
    start = first
    header = lines[first].strip().lstrip("﻿")
    if header.lower() == "value":
        start = first + 1
    elif "," in header:
        raise DataError(f"{source}: expected a single column with header 'value'", first + 1)

    values = []
    reader = csv.reader(io.StringIO("\n".join(lines[start:])))
    for offset, row in enumerate(reader):
        lineno = start + offset + 1
        if not row or not "".join(row).strip():
            continue
        if len(row) != 1:
            raise DataError(f"{source}: expected one column, got {len(row)}", lineno)
        token = row[0].strip()
        try:
            x = float(token)
        except ValueError:
            raise DataError(f"{source}: cannot parse {token!r} as a number", lineno) from None
        if not math.isfinite(x):
            raise DataError(f"{source}: non-finite value {token!r}", lineno)
        values.append(x)
    if not values:
        raise DataError(f"{source}: no observations")
    return ObservationSample(np.asarray(values))


def read_sample(path):
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc.strerror}") from exc
    return parse_sample(text, source=str(path))


def write_sample(sample, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["value"])
        for x in sample.values:
            writer.writerow([repr(float(x))])
