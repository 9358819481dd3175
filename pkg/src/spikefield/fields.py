"""Profiles and trajectories discretized on the midpoint grid of [0, 1]."""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np


def midpoint_nodes(m: int) -> np.ndarray:
    """Nodes (k + 1/2) / m, k = 0..m-1."""
    return (np.arange(m) + 0.5) / m


@dataclass
class GridField:
    """A function on [0, 1] sampled at the m midpoint nodes.

    Norms are those of L2(I) and L-infinity under the piecewise view of the
    sample vector: the squared L2 norm is the mean of squares.
    """

    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 1:
            raise ValueError("field values must be a 1-d array")

    @property
    def m(self) -> int:
        return self.values.size

    @property
    def nodes(self) -> np.ndarray:
        return midpoint_nodes(self.m)

    @classmethod
    def from_callable(cls, fn, m: int) -> "GridField":
        return cls(np.asarray(fn(midpoint_nodes(m)), dtype=float))

    @classmethod
    def constant(cls, value: float, m: int) -> "GridField":
        return cls(np.full(m, float(value)))

    def l2(self) -> float:
        return float(np.sqrt(np.mean(self.values ** 2)))

    def linf(self) -> float:
        return float(np.max(np.abs(self.values)))

    def dist_l2(self, other: "GridField") -> float:
        return GridField(self.values - np.asarray(other.values)).l2()

    def dist_linf(self, other: "GridField") -> float:
        return float(np.max(np.abs(self.values - np.asarray(other.values))))

    def resample(self, q: int) -> np.ndarray:
        """Values at the q midpoint nodes by linear interpolation.

        Constant extension beyond the outermost nodes keeps the resampled
        profile well defined near 0 and 1.
        """
        return np.interp(midpoint_nodes(q), self.nodes, self.values)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["node", "value"])
            for k, v in enumerate(self.values):
                w.writerow([k, repr(float(v))])

    @classmethod
    def from_csv(cls, path) -> "GridField":
        vals = []
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        for row in rows[1:]:
            if row:
                vals.append(float(row[1]))
        return cls(np.asarray(vals))


@dataclass
class GridTrajectory:
    """Time-indexed grid fields: times (n,) and values (n, m)."""

    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape[0] != self.times.size:
            raise ValueError("one field row per sample time required")

    @property
    def m(self) -> int:
        return self.values.shape[1]

    def field(self, k: int) -> GridField:
        return GridField(self.values[k])

    def final(self) -> GridField:
        return GridField(self.values[-1])

    def dist_l2(self, target: GridField) -> np.ndarray:
        """L2 distance to a fixed profile at each sample time."""
        diff = self.values - np.asarray(target.values)[None, :]
        return np.sqrt(np.mean(diff ** 2, axis=1))

    def to_csv(self, path) -> None:
        m = self.m
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t"] + [f"node_{k}" for k in range(m)])
            for t, row in zip(self.times, self.values):
                w.writerow([repr(float(t))] + [repr(float(v)) for v in row])
