"""Labeled/collocation containers and their CSV formats.

Labeled CSV header: ``x1..xd, u1..udo`` followed, when gradients are present,
by ``g<k><i>`` for output ``k`` and input ``i`` (both 1-based).
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np


def _fmt(v: float) -> str:
    return repr(float(v))


@dataclass
class LabeledDataset:
    inputs: np.ndarray
    outputs: np.ndarray
    gradients: Optional[np.ndarray] = None

    def __post_init__(self):
        self.inputs = np.atleast_2d(np.asarray(self.inputs, dtype=np.float64))
        n = self.inputs.shape[0]
        self.outputs = np.asarray(self.outputs, dtype=np.float64).reshape(n, -1)
        if self.gradients is not None:
            self.gradients = np.asarray(self.gradients, dtype=np.float64).reshape(
                n, self.outputs.shape[1], self.inputs.shape[1]
            )
        if not (np.isfinite(self.inputs).all() and np.isfinite(self.outputs).all()):
            raise ValueError("dataset contains non-finite values")

    def __len__(self) -> int:
        return self.inputs.shape[0]

    @property
    def d(self) -> int:
        return self.inputs.shape[1]

    @property
    def d_o(self) -> int:
        return self.outputs.shape[1]

    def header(self):
        h = [f"x{i + 1}" for i in range(self.d)] + [f"u{k + 1}" for k in range(self.d_o)]
        if self.gradients is not None:
            h += [f"g{k + 1}{i + 1}" for k in range(self.d_o) for i in range(self.d)]
        return h

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(self.header())
            for r in range(len(self)):
                row = [*self.inputs[r], *self.outputs[r]]
                if self.gradients is not None:
                    row += list(self.gradients[r].ravel())
                w.writerow([_fmt(v) for v in row])

    @classmethod
    def from_csv(cls, path) -> "LabeledDataset":
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        header, body = rows[0], np.array(rows[1:], dtype=np.float64).reshape(len(rows) - 1, len(rows[0]))
        d = sum(h.startswith("x") for h in header)
        d_o = sum(h.startswith("u") for h in header)
        grads = None
        if any(h.startswith("g") for h in header):
            grads = body[:, d + d_o:].reshape(-1, d_o, d)
        return cls(body[:, :d], body[:, d:d + d_o], grads)


@dataclass
class CollocationSet:
    inputs: np.ndarray

    def __post_init__(self):
        self.inputs = np.asarray(self.inputs, dtype=np.float64)
        if self.inputs.ndim != 2:
            raise ValueError("collocation inputs must be an (M, d) array")
        if not np.isfinite(self.inputs).all():
            raise ValueError("collocation set contains non-finite values")

    def __len__(self) -> int:
        return self.inputs.shape[0]

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow([f"x{i + 1}" for i in range(self.inputs.shape[1])])
            for row in self.inputs:
                w.writerow([_fmt(v) for v in row])

    @classmethod
    def from_csv(cls, path) -> "CollocationSet":
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        d = len(rows[0])
        return cls(np.array(rows[1:], dtype=np.float64).reshape(-1, d))


def write_grid_csv(path, t, x, u) -> None:
    """Space-time field as ``(t, x, u)`` triples, t-major."""
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "x", "u"])
        for i, ti in enumerate(t):
            for j, xj in enumerate(x):
                w.writerow([_fmt(ti), _fmt(xj), _fmt(u[i, j])])


def read_grid_csv(path):
    data = np.loadtxt(path, delimiter=",", skiprows=1)
    t = np.unique(data[:, 0])
    x = np.unique(data[:, 1])
    return t, x, data[:, 2].reshape(len(t), len(x))
