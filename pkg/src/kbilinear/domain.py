"""Axis-aligned boxes used for state and input domains."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np


class GridMax(NamedTuple):
    """A grid-maximized quantity together with the per-axis resolution used."""

    value: float
    resolution: int


def points_per_axis(resolution: int, dim: int) -> int:
    """Per-axis probe count for a nominal 1D ``resolution`` in ``dim`` dimensions.

    Tensor grids are coarsened so the total point count stays near
    ``resolution`` (never below 3 points per axis).
    """
    if dim == 1:
        return int(resolution)
    return max(3, int(round(resolution ** (1.0 / dim))))


@dataclass(frozen=True)
class Box:
    lo: tuple[float, ...]
    hi: tuple[float, ...]

    def __post_init__(self):
        lo = tuple(float(v) for v in np.atleast_1d(self.lo))
        hi = tuple(float(v) for v in np.atleast_1d(self.hi))
        if len(lo) != len(hi):
            raise ValueError("box bounds have different dimensions")
        if any(a >= b for a, b in zip(lo, hi)):
            raise ValueError(f"empty box: lo={lo}, hi={hi}")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @classmethod
    def interval(cls, lo: float, hi: float) -> "Box":
        return cls((lo,), (hi,))

    @property
    def dim(self) -> int:
        return len(self.lo)

    def contains_origin_interior(self) -> bool:
        return all(a < 0.0 < b for a, b in zip(self.lo, self.hi))

    def vertices(self) -> np.ndarray:
        return np.array(list(itertools.product(*zip(self.lo, self.hi))), dtype=float)

    def axes(self, per_axis: int) -> list[np.ndarray]:
        return [np.linspace(a, b, per_axis) for a, b in zip(self.lo, self.hi)]

    def grid(self, per_axis: int) -> np.ndarray:
        """Tensor grid with ``per_axis`` points per coordinate, shape (N, dim)."""
        mesh = np.meshgrid(*self.axes(per_axis), indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return rng.uniform(self.lo, self.hi, size=(size, self.dim))

    # exact extrema over the box
    def max_norm(self) -> float:
        return float(np.sqrt(sum(max(a * a, b * b) for a, b in zip(self.lo, self.hi))))

    def max_l1_norm(self) -> float:
        return float(sum(max(abs(a), abs(b)) for a, b in zip(self.lo, self.hi)))

    def max_abs_one_minus_sum(self) -> float:
        # |1 - sum(u)| is convex, so its maximum sits at a vertex
        return float(np.max(np.abs(1.0 - self.vertices().sum(axis=1))))

    def to_dict(self) -> dict:
        return {"lo": list(self.lo), "hi": list(self.hi)}

    @classmethod
    def from_dict(cls, data: dict) -> "Box":
        return cls(tuple(data["lo"]), tuple(data["hi"]))
