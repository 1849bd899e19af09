"""Column-oriented numeric tables with declared analysis roles.

A Dataset is a small immutable bundle of equal-length float64 columns plus a
RoleSpec that says which column is the group indicator, the outcome, the
mediator, and which columns are baseline or intermediate covariates. All
ingestion errors are raised eagerly; estimators downstream can assume clean,
finite, fully-numeric data with both groups present.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

__all__ = ["DataError", "RoleSpec", "Dataset", "load_csv", "write_csv", "group_means"]


class DataError(ValueError):
    """Raised for file, parsing, and role/shape problems in input data."""


@dataclass(frozen=True)
class RoleSpec:
    """Names the analysis role of each column.

    group is a binary (0/1) indicator, 1 marking the group whose disparity
    is decomposed. baseline covariates precede the group in the assumed
    ordering (not affected by it); intermediate covariates sit between
    group and mediator.
    """

    group: str
    outcome: str
    mediator: str
    baseline: tuple[str, ...] = ()
    intermediate: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "baseline", tuple(self.baseline))
        object.__setattr__(self, "intermediate", tuple(self.intermediate))
        names = self.all_roles()
        for name in names:
            if not isinstance(name, str) or not name:
                raise DataError(f"role names must be non-empty strings, got {name!r}")
        seen: set[str] = set()
        for name in names:
            if name in seen:
                raise DataError(f"column {name!r} assigned more than one role")
            seen.add(name)

    def all_roles(self) -> tuple[str, ...]:
        return (self.group, self.outcome, self.mediator) + self.baseline + self.intermediate

    @property
    def covariates(self) -> tuple[str, ...]:
        """Intermediate then baseline covariates, the order used in reports."""
        return self.intermediate + self.baseline


@dataclass(frozen=True, eq=False)
class Dataset:
    """Immutable table of float64 columns with a RoleSpec.

    Construction validates everything the estimators rely on: the role
    columns exist, every value is finite, the group column is exactly 0/1,
    and both groups are non-empty. Column insertion order is preserved.
    """

    columns: dict[str, np.ndarray]
    roles: RoleSpec
    n: int = field(init=False)

    def __post_init__(self) -> None:
        if not self.columns:
            raise DataError("dataset has no columns")
        clean: dict[str, np.ndarray] = {}
        n = None
        for name, values in self.columns.items():
            arr = np.ascontiguousarray(values, dtype=np.float64)
            if arr.ndim != 1:
                raise DataError(f"column {name!r} is not one-dimensional")
            if n is None:
                n = arr.size
            elif arr.size != n:
                raise DataError(
                    f"column {name!r} has length {arr.size}, expected {n}"
                )
            if not np.isfinite(arr).all():
                raise DataError(f"column {name!r} contains missing or non-finite values")
            arr.setflags(write=False)
            clean[name] = arr
        assert n is not None
        if n == 0:
            raise DataError("dataset has no rows")
        for name in self.roles.all_roles():
            if name not in clean:
                raise DataError(f"role column {name!r} not found in data")
        g = clean[self.roles.group]
        if not np.isin(g, (0.0, 1.0)).all():
            bad = g[~np.isin(g, (0.0, 1.0))][0]
            raise DataError(
                f"group column {self.roles.group!r} must contain only 0 and 1, found {bad!r}"
            )
        if not (g == 0.0).any() or not (g == 1.0).any():
            missing = 1 if (g == 0.0).any() else 0
            raise DataError(f"group {missing} has no rows")
        object.__setattr__(self, "columns", clean)
        object.__setattr__(self, "n", n)

    def column(self, name: str) -> np.ndarray:
        try:
            return self.columns[name]
        except KeyError:
            raise DataError(f"no column named {name!r}") from None

    def group_mask(self, value: int) -> np.ndarray:
        return self.columns[self.roles.group] == float(value)

    def group_size(self, value: int) -> int:
        return int(self.group_mask(value).sum())

    def take(self, indices: np.ndarray) -> "Dataset":
        """Row subset/resample by integer indices (validated like any Dataset)."""
        idx = np.asarray(indices, dtype=np.intp)
        return Dataset({k: v[idx] for k, v in self.columns.items()}, self.roles)


def load_csv(path: str, roles: RoleSpec) -> Dataset:
    """Read a headered CSV into a Dataset.

    The first row is the header. Every cell must parse as a finite real
    number; empty, non-numeric, and non-finite cells raise DataError with
    the 1-based file row (header is row 1) and the column name.
    """
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise DataError(f"cannot read {path!r}: {exc.strerror or exc}") from exc
    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path!r} is empty") from None
        header = [h.strip() for h in header]
        if len(set(header)) != len(header):
            dupe = next(h for h in header if header.count(h) > 1)
            raise DataError(f"duplicate column {dupe!r} in header")
        for name in roles.all_roles():
            if name not in header:
                raise DataError(f"role column {name!r} not found in header of {path!r}")
        data: list[list[float]] = [[] for _ in header]
        for rownum, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise DataError(
                    f"row {rownum}: expected {len(header)} cells, found {len(row)}"
                )
            for name, col, cell in zip(header, data, row):
                text = cell.strip()
                if not text:
                    raise DataError(f"row {rownum}, column {name!r}: empty cell")
                try:
                    value = float(text)
                except ValueError:
                    raise DataError(
                        f"row {rownum}, column {name!r}: non-numeric value {cell!r}"
                    ) from None
                if not math.isfinite(value):
                    raise DataError(
                        f"row {rownum}, column {name!r}: non-finite value {cell!r}"
                    )
                col.append(value)
    if not data[0]:
        raise DataError(f"{path!r} has a header but no data rows")
    return Dataset({name: np.array(col) for name, col in zip(header, data)}, roles)


def write_csv(data: Dataset, path: str) -> None:
    """Write a Dataset back to CSV; floats use shortest round-trip repr."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        names = list(data.columns)
        writer.writerow(names)
        cols = [data.columns[n] for n in names]
        for i in range(data.n):
            writer.writerow([repr(float(c[i])) for c in cols])


def group_means(data: Dataset) -> dict[int, dict[str, float]]:
    """Per-group mean of every column, keyed by group value then column name."""
    out: dict[int, dict[str, float]] = {}
    for g in (0, 1):
        mask = data.group_mask(g)
        out[g] = {name: float(col[mask].mean()) for name, col in data.columns.items()}
    return out
