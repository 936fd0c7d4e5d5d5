"""Points of complex projective space and the metric everything else uses.

A point of P^m is stored as m+1 dense complex coordinates.  The canonical
representative scales the lowest-index coordinate of maximum modulus to
exactly 1, which makes deduplication and file round-trips deterministic.
Distances are chordal Fubini-Study sines, bounded by 1.
"""

from dataclasses import dataclass

import numpy as np

from .errors import (
    ChartSingular,
    DimensionMismatch,
    ProjectionUndefined,
    ZeroVector,
)

_ZERO_TOL = 1e-300  # below this every coordinate counts as underflowed


def _as_coords(values) -> np.ndarray:
    arr = np.array(values, dtype=np.complex128)
    if arr.ndim != 1 or arr.size < 2:
        raise ValueError("homogeneous coordinates need at least two entries")
    return arr


@dataclass(frozen=True, eq=False)
class ProjPoint:
    """A point of P^m held as m+1 homogeneous complex coordinates."""

    coords: np.ndarray

    def __post_init__(self):
        arr = _as_coords(self.coords)
        if float(np.max(np.abs(arr))) < _ZERO_TOL:
            raise ZeroVector("all homogeneous coordinates vanish")
        arr.setflags(write=False)
        object.__setattr__(self, "coords", arr)

    @property
    def dim(self) -> int:
        return self.coords.size - 1

    def __repr__(self):
        inside = ":".join(f"{c:.6g}" for c in self.coords)
        return f"[{inside}]"


@dataclass(frozen=True)
class ChartCoords:
    """Affine coordinates in the chart where one homogeneous slot equals 1."""

    chart_index: int
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(
            self, "values", np.asarray(self.values, dtype=np.complex128)
        )


def point(*coords) -> ProjPoint:
    """Convenience constructor: point(1, 1j, 0.5) -> [1 : i : 0.5]."""
    return ProjPoint(np.array(coords, dtype=np.complex128))


def normalize(p: ProjPoint) -> ProjPoint:
    """Canonical representative: first max-modulus coordinate scaled to 1.

    Idempotent, and scale-invariant up to floating-point rounding.

    Raises:
        ZeroVector: if every coordinate underflows to zero.
    """
    arr = p.coords
    pivot = int(np.argmax(np.abs(arr)))
    value = arr[pivot]
    if abs(value) < _ZERO_TOL:
        raise ZeroVector("cannot normalize the zero vector")
    return ProjPoint(arr / value)


def normalize_rows(a: np.ndarray) -> np.ndarray:
    """Row-wise canonical representatives for a batch of coordinate vectors."""
    a = np.asarray(a, dtype=np.complex128)
    pivots = np.argmax(np.abs(a), axis=-1)
    vals = np.take_along_axis(a, pivots[..., None], axis=-1)
    if np.any(np.abs(vals) < _ZERO_TOL):
        raise ZeroVector("a batch row is numerically zero")
    return a / vals


def unit_rows(a: np.ndarray) -> np.ndarray:
    """Rows rescaled to unit Euclidean norm (for distance computations)."""
    a = np.asarray(a, dtype=np.complex128)
    nrm = np.linalg.norm(a, axis=-1, keepdims=True)
    if np.any(nrm < _ZERO_TOL):
        raise ZeroVector("a batch row is numerically zero")
    return a / nrm


def fs_distance(p: ProjPoint, q: ProjPoint) -> float:
    """Chordal Fubini-Study distance sqrt(1 - |<p,q>|^2 / (|p|^2 |q|^2)).

    Computed as the norm of the component of q orthogonal to p, which stays
    accurate down to ~1e-15 for nearly equal points.  Always in [0, 1].
    """
    if p.coords.size != q.coords.size:
        raise DimensionMismatch(
            f"dim {p.dim} vs {q.dim}: points live on different spaces"
        )
    a = p.coords / np.linalg.norm(p.coords)
    b = q.coords / np.linalg.norm(q.coords)
    perp = b - np.vdot(a, b) * a
    return min(float(np.linalg.norm(perp)), 1.0)


def fs_distance_rows(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Row-wise chordal distance between two batches of unit-norm rows."""
    ip = np.sum(np.conjugate(a) * b, axis=-1)
    perp = b - ip[..., None] * a
    return np.minimum(np.linalg.norm(perp, axis=-1), 1.0)


def max_pairwise_distance(a: np.ndarray) -> float:
    """Diameter of a small batch of points under the chordal metric.

    Uses the orthogonal-component norm pairwise, which stays accurate for
    nearly coincident points (no 1 - |ip|^2 cancellation).
    """
    u = unit_rows(a)
    gram = u @ u.conj().T  # gram[j, i] = <u_j, u_i>
    worst = 0.0
    for i in range(u.shape[0]):
        perp = u - gram[:, i][:, None] * u[i][None, :]
        worst = max(worst, float(np.max(np.linalg.norm(perp, axis=1))))
    return min(worst, 1.0)


def projectively_equal(p: ProjPoint, q: ProjPoint, tol: float = 1e-9) -> bool:
    return fs_distance(p, q) <= tol


def embed_base(q: ProjPoint) -> ProjPoint:
    """Include a point of the base hyperplane P^(k-1) into P^k (last coord 0)."""
    return ProjPoint(np.append(q.coords, 0.0))


def project_base(p: ProjPoint) -> ProjPoint:
    """Drop the fiber coordinate; undefined at the fiber center [0:...:0:1]."""
    head = p.coords[:-1]
    if float(np.max(np.abs(head))) < 1e-12 * abs(p.coords[-1]):
        raise ProjectionUndefined("projection undefined at the fiber center")
    return ProjPoint(head)


def chart_coords(p: ProjPoint, chart_index: int | None = None) -> ChartCoords:
    """Affine coordinates of p in the chart of a chosen (or maximal) slot."""
    arr = p.coords
    if chart_index is None:
        chart_index = int(np.argmax(np.abs(arr)))
    pivot = arr[chart_index]
    if abs(pivot) < 1e-13 * float(np.max(np.abs(arr))):
        raise ChartSingular(f"coordinate {chart_index} vanishes at this point")
    values = np.delete(arr, chart_index) / pivot
    return ChartCoords(chart_index, values)


def from_chart(cc: ChartCoords) -> ProjPoint:
    """Rebuild the homogeneous point with 1 inserted at the chart slot."""
    return ProjPoint(np.insert(cc.values, cc.chart_index, 1.0))
