"""One-dimensional probability measures: grid densities and particle ensembles.

Both carry unit total mass.  A grid density has a piecewise-linear CDF
(piecewise-constant density over equispaced cells); a particle ensemble has a
right-continuous step CDF.  These two shapes are the only measure
representations the solvers and the transport metrics exchange.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import erf

from .errors import MassNotNormalized, QuantileFailure


@dataclass
class DensityProfile:
    """Nonnegative density on equispaced cells of [x_min, x_max], unit mass."""

    x_min: float
    x_max: float
    rho: np.ndarray

    def __post_init__(self):
        self.rho = np.asarray(self.rho, dtype=float)
        if self.rho.ndim != 1 or self.rho.size < 1:
            raise ValueError("rho must be a 1-d array")
        if not self.x_max > self.x_min:
            raise ValueError("need x_max > x_min")
        if np.any(self.rho < 0) or not np.all(np.isfinite(self.rho)):
            raise MassNotNormalized("density has negative or non-finite entries")
        total = float(self.rho.sum() * self.dx)
        if abs(total - 1.0) > 1e-10:
            raise MassNotNormalized(f"total mass {total!r} != 1 within 1e-10")

    @property
    def nx(self) -> int:
        return self.rho.size

    @property
    def dx(self) -> float:
        return (self.x_max - self.x_min) / self.rho.size

    @property
    def edges(self) -> np.ndarray:
        return self.x_min + self.dx * np.arange(self.nx + 1)

    @property
    def centers(self) -> np.ndarray:
        return self.x_min + self.dx * (np.arange(self.nx) + 0.5)

    def _edge_cdf(self) -> np.ndarray:
        cum = np.concatenate(([0.0], np.cumsum(self.rho * self.dx)))
        cum /= cum[-1]
        return cum

    def cdf(self, x):
        """Piecewise-linear CDF evaluated at x (clamped outside the domain)."""
        return np.interp(x, self.edges, self._edge_cdf())

    def quantile(self, q, plateau: str = "inf"):
        """Generalized inverse CDF.

        ``plateau="inf"`` returns inf{x : F(x) >= q}; ``plateau="mid"``
        returns the midpoint of the flat stretch when q lands exactly on a
        plateau level (used by deterministic quantile sampling).
        """
        q_arr = np.atleast_1d(np.asarray(q, dtype=float))
        if np.any(~np.isfinite(q_arr)) or np.any(q_arr <= 0) or np.any(q_arr >= 1):
            raise QuantileFailure("quantile levels must lie in (0, 1)")
        cum = self._edge_cdf()
        edges = self.edges
        # first edge index with cum >= q; the preceding cell has positive
        # density by construction, so interpolation below is well defined
        j = np.searchsorted(cum, q_arr, side="left")
        j = np.clip(j, 1, self.nx)
        left = edges[j - 1]
        dcum = cum[j] - cum[j - 1]
        frac = np.where(dcum > 0, (q_arr - cum[j - 1]) / np.where(dcum > 0, dcum, 1.0), 0.0)
        x = left + frac * self.dx
        if plateau == "mid":
            jr = np.clip(np.searchsorted(cum, q_arr, side="right"), 1, self.nx + 1)
            flat = jr - 1 > j  # exact hit followed by zero-density cells
            if np.any(flat):
                x = np.where(flat, 0.5 * (edges[j] + edges[np.minimum(jr - 1, self.nx)]), x)
        elif plateau != "inf":
            raise ValueError("plateau must be 'inf' or 'mid'")
        if np.isscalar(q) or np.ndim(q) == 0:
            return float(x[0])
        return x

    @staticmethod
    def from_masses(x_min: float, x_max: float, masses: np.ndarray) -> "DensityProfile":
        """Build a profile from per-cell masses, normalizing to unit total."""
        masses = np.asarray(masses, dtype=float)
        total = masses.sum()
        if total <= 0 or not np.isfinite(total):
            raise MassNotNormalized("cell masses must have positive finite total")
        dx = (x_max - x_min) / masses.size
        return DensityProfile(x_min, x_max, masses / total / dx)

    @staticmethod
    def gaussian(mean: float, sigma: float, x_min: float, x_max: float, nx: int) -> "DensityProfile":
        """Gaussian truncated to [x_min, x_max], cell-averaged and renormalized."""
        if sigma <= 0:
            raise ValueError("sigma must be positive")
        edges = x_min + (x_max - x_min) / nx * np.arange(nx + 1)
        z = (edges - mean) / (sigma * np.sqrt(2.0))
        masses = 0.5 * np.diff(erf(z))
        return DensityProfile.from_masses(x_min, x_max, masses)

    @staticmethod
    def uniform(a: float, b: float, x_min: float, x_max: float, nx: int) -> "DensityProfile":
        """Uniform density on [a, b] represented on the [x_min, x_max] grid."""
        if not b > a:
            raise ValueError("need b > a")
        edges = x_min + (x_max - x_min) / nx * np.arange(nx + 1)
        masses = np.diff(np.clip((edges - a) / (b - a), 0.0, 1.0))
        return DensityProfile.from_masses(x_min, x_max, masses)


@dataclass
class ParticleEnsemble:
    """Weighted particles; velocities are optional (aggregation usage)."""

    positions: np.ndarray
    masses: np.ndarray
    velocities: np.ndarray | None = None
    t: float = 0.0

    def __post_init__(self):
        self.positions = np.asarray(self.positions, dtype=float)
        self.masses = np.asarray(self.masses, dtype=float)
        if self.velocities is not None:
            self.velocities = np.asarray(self.velocities, dtype=float)
            if self.velocities.shape != self.positions.shape:
                raise ValueError("velocities and positions must have equal length")
        if self.positions.shape != self.masses.shape or self.positions.ndim != 1:
            raise ValueError("positions and masses must be equal-length 1-d arrays")
        if not np.all(np.isfinite(self.positions)):
            raise ValueError("positions must be finite")
        if np.any(self.masses <= 0):
            raise MassNotNormalized("masses must be positive")
        total = float(self.masses.sum())
        if abs(total - 1.0) > 1e-12:
            raise MassNotNormalized(f"total mass {total!r} != 1 within 1e-12")

    @property
    def n(self) -> int:
        return self.positions.size

    def sorted_arrays(self):
        """Positions, masses (and velocities if present) sorted by position."""
        order = np.argsort(self.positions, kind="stable")
        if self.velocities is None:
            return self.positions[order], self.masses[order], None
        return self.positions[order], self.masses[order], self.velocities[order]

    def quantile(self, q):
        """Step-CDF generalized inverse: inf{x : F(x) >= q}."""
        q_arr = np.atleast_1d(np.asarray(q, dtype=float))
        if np.any(~np.isfinite(q_arr)) or np.any(q_arr <= 0) or np.any(q_arr >= 1):
            raise QuantileFailure("quantile levels must lie in (0, 1)")
        pos, mass, _ = self.sorted_arrays()
        cum = np.cumsum(mass)
        cum[-1] = max(cum[-1], 1.0)  # guard float undershoot at the top
        idx = np.searchsorted(cum, q_arr, side="left")
        x = pos[np.minimum(idx, pos.size - 1)]
        if np.isscalar(q) or np.ndim(q) == 0:
            return float(x[0])
        return x
