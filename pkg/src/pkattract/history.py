"""Truncated backward-orbit machinery: the computational natural extension.

A prehistory stores (x_0, x_-1, ..., x_-n) with f(x_-(i+1)) = x_-i.  The
product-topology metric is realized as a geometrically weighted sum of base
distances, bounded by 2; all guarantees carry an explicit 2^-n truncation
error since the infinite product is not representable.
"""

from dataclasses import dataclass

import numpy as np

from .errors import (
    DepthExhausted,
    IndexBeyondDepth,
    InvalidPrehistory,
    NotPeriodic,
)
from .projective import ProjPoint, fs_distance, normalize
from .rng import generator

BACKWARD_ORBIT_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class Prehistory:
    """A finite truncated backward orbit, newest entry first."""

    points: tuple

    def __post_init__(self):
        pts = tuple(self.points)
        if not pts:
            raise InvalidPrehistory("a prehistory needs at least one point")
        object.__setattr__(self, "points", pts)

    @property
    def depth(self) -> int:
        return len(self.points) - 1

    @property
    def head(self) -> ProjPoint:
        return self.points[0]

    def entry(self, i: int) -> ProjPoint:
        """x_{-i}; raises IndexBeyondDepth past the stored depth."""
        if i < 0 or i > self.depth:
            raise IndexBeyondDepth(f"index {i} beyond depth {self.depth}")
        return self.points[i]


def validate_prehistory(map_, hist: Prehistory, tol: float = BACKWARD_ORBIT_TOL):
    """Check f(x_-(i+1)) = x_-i along the whole list."""
    for i in range(hist.depth):
        img = map_.apply(hist.points[i + 1])
        if fs_distance(img, hist.points[i]) > tol:
            raise InvalidPrehistory(
                f"forward image of entry {i + 1} misses entry {i}"
            )


def history_distance(x: Prehistory, y: Prehistory) -> float:
    """Sum of 2^-i base distances over the common depth; bounded by 2.

    Unequal depths compare over the shorter one (truncation keeps the
    value symmetric); the ignored tail contributes at most 2^-n.
    """
    n = min(x.depth, y.depth)
    total = 0.0
    for i in range(n + 1):
        total += 2.0**-i * fs_distance(x.points[i], y.points[i])
    return total


def lift_map(map_, hist: Prehistory) -> Prehistory:
    """One forward step of the lifted map: prepend f(x_0), drop the tail.

    Depth is preserved, so repeated lifting consumes stored history.
    """
    validate_prehistory(map_, hist)
    new_head = map_.apply(hist.head)
    return Prehistory((new_head,) + hist.points[:-1])


def unlift(hist: Prehistory) -> Prehistory:
    """Inverse direction: drop the head, exposing the next-oldest entry."""
    if hist.depth == 0:
        raise DepthExhausted("cannot unlift a depth-0 prehistory")
    return Prehistory(hist.points[1:])


def sample_prehistory(
    map_, a0: ProjPoint, depth: int, seed: int | np.random.Generator = 0
) -> Prehistory:
    """Backward orbit from a0 with uniform (multiplicity-weighted) branches.

    Uniform branching realizes the history measure of the balanced measure,
    whose conditional law over preimages is uniform.
    """
    rng = seed if isinstance(seed, np.random.Generator) else generator(seed)
    pts = [normalize(a0)]
    current = pts[0].coords[None, :]
    for _ in range(depth):
        current = map_.preimage_step_batch(current, rng)
        pts.append(ProjPoint(current[0]))
    return Prehistory(tuple(pts))


def sample_prehistory_batch(
    map_, a0: np.ndarray, depth: int, rng: np.random.Generator
) -> np.ndarray:
    """(n, depth+1, ncoords) tensor of backward orbits, newest first."""
    current = np.asarray(a0, dtype=np.complex128)
    out = np.empty(
        (current.shape[0], depth + 1, current.shape[1]), dtype=np.complex128
    )
    out[:, 0] = current
    for i in range(depth):
        current = map_.preimage_step_batch(current, rng)
        out[:, i + 1] = current
    return out


def periodic_history(
    map_, x: ProjPoint, n: int, depth: int, tol: float = BACKWARD_ORBIT_TOL
) -> Prehistory:
    """The canonical periodic prehistory over an n-periodic point.

    Entry -j is the (n-j)-th forward image for 0 <= j < n, repeated with
    period n to the requested depth.

    Raises:
        NotPeriodic: if f^n(x) misses x beyond tol.
    """
    orbit = [normalize(x)]
    for _ in range(n):
        orbit.append(map_.apply(orbit[-1]))
    if fs_distance(orbit[0], orbit[-1]) > tol:
        raise NotPeriodic(f"f^{n}(x) is not x within {tol}")
    pts = tuple(orbit[(n - (j % n)) % n] for j in range(depth + 1))
    return Prehistory(pts)


@dataclass(frozen=True)
class CylinderSet:
    """Depth-j coordinate cylinder over a metric ball on the base space."""

    j: int
    center: ProjPoint
    radius: float

    def contains(self, hist: Prehistory) -> bool:
        if self.j > hist.depth:
            raise IndexBeyondDepth(
                f"cylinder index {self.j} beyond depth {hist.depth}"
            )
        return fs_distance(hist.points[self.j], self.center) <= self.radius


def cylinder_mass(samples: list[Prehistory], c: CylinderSet) -> float:
    """Fraction of sampled prehistories whose entry -j lies in the region."""
    if not samples:
        raise ValueError("no samples")
    hits = sum(1 for h in samples if c.contains(h))
    return hits / len(samples)
