"""Weighted point clouds as empirical measures, plus coarse binning."""

from dataclasses import dataclass

import numpy as np

from .projective import ProjPoint, normalize_rows, unit_rows
from .rng import generator


@dataclass(frozen=True, eq=False)
class Cloud:
    """Empirical measure: normalized points with positive weights summing to 1."""

    coords: np.ndarray  # (n, dim+1), canonical representatives
    weights: np.ndarray  # (n,)

    def __post_init__(self):
        coords = np.asarray(self.coords, dtype=np.complex128)
        weights = np.asarray(self.weights, dtype=np.float64)
        if coords.ndim != 2 or weights.shape != (coords.shape[0],):
            raise ValueError("coords must be (n, dim+1) with matching weights")
        if np.any(weights <= 0):
            raise ValueError("weights must be positive")
        total = float(weights.sum())
        if abs(total - 1.0) > 1e-12:
            raise ValueError(f"weights sum to {total}, expected 1 +- 1e-12")
        object.__setattr__(self, "coords", coords)
        object.__setattr__(self, "weights", weights)

    @classmethod
    def from_coords(cls, coords: np.ndarray, weights=None) -> "Cloud":
        coords = normalize_rows(np.asarray(coords, dtype=np.complex128))
        n = coords.shape[0]
        if weights is None:
            weights = np.full(n, 1.0 / n)
        else:
            weights = np.asarray(weights, dtype=np.float64)
            weights = weights / weights.sum()
        return cls(coords, weights)

    @classmethod
    def from_points(cls, points: list[ProjPoint], weights=None) -> "Cloud":
        return cls.from_coords(np.stack([p.coords for p in points]), weights)

    @property
    def dim(self) -> int:
        return self.coords.shape[1] - 1

    def __len__(self) -> int:
        return self.coords.shape[0]

    def point(self, i: int) -> ProjPoint:
        return ProjPoint(self.coords[i])

    def subsample(self, n: int, seed: int = 0) -> "Cloud":
        rng = generator(seed)
        idx = rng.choice(len(self), size=min(n, len(self)), replace=False)
        return Cloud.from_coords(self.coords[idx], self.weights[idx])


class CoarseBins:
    """Fixed 16-cell partition of P^m for cheap weak-convergence diagnostics.

    Cells are quadrant x modulus-band of a generic projective ratio
    (p.u)/(p.v) for two fixed reference vectors u, v; deterministic per dim.
    """

    NCELLS = 16
    _BANDS = (0.5, 1.0, 2.0)

    def __init__(self, dim: int):
        rng = np.random.Generator(
            np.random.Philox(np.random.SeedSequence(0xC0FFEE + dim))
        )
        shape = (2, dim + 1)
        vecs = rng.normal(size=shape) + 1j * rng.normal(size=shape)
        self.u = vecs[0] / np.linalg.norm(vecs[0])
        self.v = vecs[1] / np.linalg.norm(vecs[1])
        self.dim = dim

    def assign(self, coords: np.ndarray) -> np.ndarray:
        a = np.asarray(coords, dtype=np.complex128)
        num = a @ self.u
        den = a @ self.v
        with np.errstate(divide="ignore", invalid="ignore"):
            xi = num / den
        quad = (np.real(xi) >= 0).astype(np.int64) * 2 + (np.imag(xi) >= 0)
        mod = np.abs(xi)
        band = np.searchsorted(self._BANDS, np.nan_to_num(mod, nan=np.inf))
        band = np.minimum(band, 3)
        cells = band * 4 + quad
        cells[~np.isfinite(xi)] = self.NCELLS - 1
        return cells

    def masses(self, cloud: Cloud) -> np.ndarray:
        cells = self.assign(cloud.coords)
        return np.bincount(cells, weights=cloud.weights, minlength=self.NCELLS)

    def masses_of(self, coords: np.ndarray, weights=None) -> np.ndarray:
        cells = self.assign(coords)
        if weights is None:
            weights = np.full(coords.shape[0], 1.0 / coords.shape[0])
        return np.bincount(cells, weights=weights, minlength=self.NCELLS)


def bin_discrepancy(masses_a: np.ndarray, masses_b: np.ndarray) -> float:
    """Mean absolute bin-mass difference over the fixed partition."""
    return float(np.mean(np.abs(masses_a - masses_b)))


@dataclass(frozen=True)
class BallRegion:
    """Metric ball region used for invariance and cylinder-set statistics."""

    center: np.ndarray  # unit-norm representative
    radius: float

    @classmethod
    def around(cls, p_coords: np.ndarray, radius: float) -> "BallRegion":
        c = np.asarray(p_coords, dtype=np.complex128)
        return cls(c / np.linalg.norm(c), float(radius))

    def contains(self, coords: np.ndarray) -> np.ndarray:
        u = unit_rows(np.atleast_2d(coords))
        ip = np.abs(u @ np.conjugate(self.center)) ** 2
        dist = np.sqrt(np.maximum(1.0 - ip, 0.0))
        return dist <= self.radius

    def mass(self, cloud: Cloud) -> float:
        return float(cloud.weights[self.contains(cloud.coords)].sum())


def random_ball_regions(
    cloud: Cloud, count: int, radius: float, seed: int
) -> list[BallRegion]:
    """Balls centered at randomly chosen cloud points (deterministic per seed)."""
    rng = generator(seed)
    idx = rng.integers(0, len(cloud), size=count)
    return [BallRegion.around(cloud.coords[i], radius) for i in idx]
