"""CSV dataset format: feature columns ``x_1..x_d`` plus a 1-based integer
label column ``y``.  A header row is required.  Feature-only matrices use
the same convention without the label column.
"""

from __future__ import annotations

import numpy as np


def _float_repr(v):
    return f"{v:.17g}"


def save_dataset(path, X, y):
    """Write features and labels with the required header row."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=int)
    if X.ndim != 2 or len(X) != len(y):
        raise ValueError("X must be (n, d) with one label per row")
    header = [f"x_{j + 1}" for j in range(X.shape[1])] + ["y"]
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row, label in zip(X, y):
            fh.write(",".join(_float_repr(v) for v in row) + f",{label}\n")


def save_matrix(path, X):
    """Write a feature matrix (no label column)."""
    X = np.asarray(X, dtype=float)
    header = [f"x_{j + 1}" for j in range(X.shape[1])]
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in X:
            fh.write(",".join(_float_repr(v) for v in row) + "\n")


def load_dataset(path):
    """Read a dataset CSV; returns ``(X, y)`` with ``y`` possibly ``None``.

    The header must be ``x_1,...,x_d`` optionally followed by ``y``.
    """
    with open(path) as fh:
        header = fh.readline().strip()
        if not header:
            raise ValueError(f"{path}: missing header row")
        cols = header.split(",")
        has_labels = cols[-1] == "y"
        d = len(cols) - 1 if has_labels else len(cols)
        expected = [f"x_{j + 1}" for j in range(d)]
        if cols[:d] != expected:
            raise ValueError(
                f"{path}: header must be x_1..x_{d}[,y], got {header!r}"
            )
        body = np.loadtxt(fh, delimiter=",", ndmin=2)
    if body.shape[1] != len(cols):
        raise ValueError(f"{path}: row width does not match header")
    if has_labels:
        X = body[:, :-1]
        y = body[:, -1]
        if not np.all(y == np.round(y)) or np.any(y < 1):
            raise ValueError(f"{path}: labels must be 1-based integers")
        return X, y.astype(int)
    return body, None
