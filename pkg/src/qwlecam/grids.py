"""Piecewise-constant densities on a real interval."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["DensityGrid"]


@dataclass(frozen=True)
class DensityGrid:
    """A density that is constant on each cell ``(edges[i], edges[i+1]]``.

    Attributes
    ----------
    edges : ndarray, shape (n + 1,)
        Strictly increasing cell boundaries.
    density : ndarray, shape (n,)
        Density value on each cell.
    """

    edges: np.ndarray
    density: np.ndarray

    def __post_init__(self):
        e = np.asarray(self.edges, dtype=float)
        d = np.asarray(self.density, dtype=float)
        if e.ndim != 1 or d.shape != (e.size - 1,):
            raise ValueError("density must have one value per cell")
        if np.any(np.diff(e) <= 0):
            raise ValueError("edges must be strictly increasing")
        object.__setattr__(self, "edges", e)
        object.__setattr__(self, "density", d)

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.edges)

    @property
    def centers(self) -> np.ndarray:
        return 0.5 * (self.edges[:-1] + self.edges[1:])

    @property
    def masses(self) -> np.ndarray:
        return self.density * self.widths

    def total_mass(self) -> float:
        return float(self.masses.sum())

    def __call__(self, x) -> np.ndarray:
        """Evaluate the density; zero outside the grid."""
        x = np.asarray(x, dtype=float)
        i = np.searchsorted(self.edges, x, side="left") - 1
        inside = (i >= 0) & (i < self.density.size)
        out = np.zeros(x.shape)
        out[inside] = self.density[i[inside]]
        return out

    @classmethod
    def from_masses(cls, edges, masses) -> "DensityGrid":
        edges = np.asarray(edges, dtype=float)
        return cls(edges, np.asarray(masses, dtype=float) / np.diff(edges))
