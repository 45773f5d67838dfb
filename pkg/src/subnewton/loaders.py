"""Dataset loaders: LIBSVM text format and headered numeric CSV.

Both loaders reject malformed input with errors that name the offending
line (and column where it makes sense) instead of crashing downstream.
"""

import csv

import numpy as np

from .problem import Dataset


class ParseError(ValueError):
    """Malformed input file; message carries the file location."""


def _map_binary_labels(y: np.ndarray, path: str) -> np.ndarray:
    """Map labels onto {-1,+1} for logistic losses: 0 and -1 become -1."""
    values = set(np.unique(y).tolist())
    if not values <= {-1.0, 0.0, 1.0}:
        raise ParseError(
            f"{path}: labels {sorted(values)} are not binary; cannot map to -1/+1"
        )
    return np.where(y > 0.0, 1.0, -1.0)


def load_libsvm(path: str, map_labels: bool = False) -> Dataset:
    """Load a LIBSVM-format text file ("label idx:val ...", 1-based indices).

    The feature dimension is the maximum index seen.  With
    ``map_labels=True`` (logistic use), 0/-1 labels become -1 and
    positive labels +1.
    """
    labels: list[float] = []
    rows: list[dict[int, float]] = []
    d = 0
    with open(path, "r") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            try:
                labels.append(float(parts[0]))
            except ValueError:
                raise ParseError(
                    f"{path}:{lineno}: bad label {parts[0]!r}"
                ) from None
            entries: dict[int, float] = {}
            for tok in parts[1:]:
                idx, sep, val = tok.partition(":")
                if not sep:
                    raise ParseError(
                        f"{path}:{lineno}: expected idx:val, got {tok!r}"
                    )
                try:
                    j = int(idx)
                    x = float(val)
                except ValueError:
                    raise ParseError(
                        f"{path}:{lineno}: bad feature entry {tok!r}"
                    ) from None
                if j < 1:
                    raise ParseError(
                        f"{path}:{lineno}: feature indices are 1-based, got {j}"
                    )
                entries[j] = x
                d = max(d, j)
            rows.append(entries)
    if not rows:
        raise ParseError(f"{path}: no data lines")
    X = np.zeros((len(rows), d))
    for i, entries in enumerate(rows):
        for j, x in entries.items():
            X[i, j - 1] = x
    y = np.asarray(labels)
    if map_labels:
        y = _map_binary_labels(y, path)
    return Dataset(features=X, responses=y)


def load_csv(path: str, label_column: int = 0) -> Dataset:
    """Load a rectangular numeric CSV with a header row.

    The given column is extracted as the response; the rest become
    features in their original order.
    """
    with open(path, "r", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(f"{path}: empty file") from None
        width = len(header)
        if not 0 <= label_column < width:
            raise ParseError(
                f"{path}: label_column {label_column} out of range for "
                f"{width} columns"
            )
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != width:
                raise ParseError(
                    f"{path}:{lineno}: expected {width} cells, got {len(row)}"
                )
            try:
                rows.append([float(c) for c in row])
            except ValueError:
                bad = next(c for c in row if not _is_float(c))
                raise ParseError(
                    f"{path}:{lineno}: non-numeric cell {bad!r}"
                ) from None
    if not rows:
        raise ParseError(f"{path}: no data rows")
    M = np.asarray(rows)
    y = M[:, label_column]
    X = np.delete(M, label_column, axis=1)
    return Dataset(features=X, responses=y)


def _is_float(cell: str) -> bool:
    try:
        float(cell)
        return True
    except ValueError:
        return False


def write_csv(path: str, dataset: Dataset, label_column: int = 0) -> None:
    """Write a Dataset back to headered CSV (label in the given column)."""
    n, d = dataset.features.shape
    header = [f"x{j}" for j in range(d)]
    header.insert(label_column, "y")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for i in range(n):
            row = [repr(float(v)) for v in dataset.features[i]]
            row.insert(label_column, repr(float(dataset.responses[i])))
            writer.writerow(row)


def write_libsvm(path: str, dataset: Dataset) -> None:
    """Write a Dataset in LIBSVM text format (all entries, 1-based)."""
    with open(path, "w") as fh:
        for i in range(dataset.n):
            cells = [repr(float(dataset.responses[i]))]
            cells += [
                f"{j + 1}:{float(dataset.features[i, j])!r}" for j in range(dataset.d)
            ]
            fh.write(" ".join(cells) + "\n")
