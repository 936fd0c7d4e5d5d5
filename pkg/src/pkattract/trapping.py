"""Trapping region, attractor sampling, and the history semiconjugation.

The region U_rho = {|t| < rho * max(|z|,|w_j|)} maps strictly into itself
whenever 0 < 2|lam| < rho < sqrt(|lam|); the attractor is the nested
intersection of its forward images.  A truncated backward orbit on the base
hyperplane determines an attractor point by iterating the map forward from
the embedded deepest entry, with an error controlled by fiber contraction.
"""

from dataclasses import dataclass

import numpy as np

from .cloud import Cloud
from .errors import LambdaOutOfRange, TrapViolation
from .history import Prehistory, validate_prehistory
from .maps import BaseMap, Params, PerturbedMap
from .projective import (
    ProjPoint,
    embed_base,
    fs_distance,
    max_pairwise_distance,
    normalize,
    normalize_rows,
)
from .rng import generator, split_counts, substreams

DEFAULT_HISTORY_DEPTH = 40


def default_rho(lam: complex) -> float:
    """Geometric-mean choice rho = sqrt(2) |lam|^(3/4).

    Satisfies 2|lam| < rho < sqrt(|lam|) exactly when 0 < |lam| < 1/4.
    """
    mod = abs(lam)
    if mod == 0.0 or mod >= 0.25:
        raise LambdaOutOfRange("need 0 < |lam| < 1/4 for a valid trap radius")
    return float(np.sqrt(2.0) * mod**0.75)


def default_params(k: int, lam: complex) -> Params:
    return Params(k, lam, default_rho(lam))


def in_trap(params: Params, p: ProjPoint) -> tuple[bool, float]:
    """Trap membership plus the signed margin rho*maxnorm - |t|.

    Evaluated on the canonical representative, so the margin is well defined.
    """
    arr = normalize(p).coords
    maxnorm = float(np.max(np.abs(arr[:-1])))
    margin = params.rho * maxnorm - abs(arr[-1])
    return margin > 0.0, float(margin)


def in_trap_batch(params: Params, a: np.ndarray) -> np.ndarray:
    a = normalize_rows(a)
    maxnorm = np.max(np.abs(a[:, :-1]), axis=1)
    return np.abs(a[:, -1]) < params.rho * maxnorm


def trap_ratio_batch(a: np.ndarray) -> np.ndarray:
    """|t| / max(|z|,|w_j|) per row; scale-invariant."""
    a = np.asarray(a, dtype=np.complex128)
    return np.abs(a[:, -1]) / np.max(np.abs(a[:, :-1]), axis=1)


def sample_trap_batch(
    params: Params, n: int, rng: np.random.Generator
) -> np.ndarray:
    """Uniform covering sample of the trap: uniform chart polydisc on the
    base (all k base charts equally likely) and uniform fiber disc for t."""
    k = params.k
    chart = rng.integers(0, k, size=n)
    disc = _uniform_disc(rng, (n, k))
    base = np.empty((n, k), dtype=np.complex128)
    base[:] = disc
    base[np.arange(n), chart] = 1.0  # pivot slot; maxnorm is exactly 1
    t = params.rho * _uniform_disc(rng, (n,))
    return np.concatenate([base, t[:, None]], axis=1)


def _uniform_disc(rng: np.random.Generator, shape) -> np.ndarray:
    r = np.sqrt(rng.uniform(0.0, 1.0, size=shape))
    theta = rng.uniform(0.0, 2.0 * np.pi, size=shape)
    return r * np.exp(1j * theta)


@dataclass(frozen=True)
class TrapReport:
    """Outcome of the one-step forward trapping check."""

    samples: int
    max_image_ratio: float
    margin: float
    violations: int


def trap_forward_check(
    params: Params, n_samples: int, seed: int, workers: int = 1
) -> TrapReport:
    """Sample the trap, map once, and verify the proof's intermediate bound:
    every image ratio must stay below 2|lam| (itself below rho).

    Raises:
        TrapViolation: with a witness point if any sample escapes.
    """
    fmap = PerturbedMap(params)
    bound = 2.0 * abs(params.lam)
    worst = 0.0
    violations = 0
    witness = None
    for rng, count in zip(substreams(seed, workers), split_counts(n_samples, workers)):
        if count == 0:
            continue
        pts = sample_trap_batch(params, count, rng)
        img = fmap.apply_hom(pts)
        ratios = trap_ratio_batch(img)
        worst = max(worst, float(ratios.max()))
        bad = ratios >= bound
        if np.any(bad):
            violations += int(bad.sum())
            witness = pts[int(np.argmax(bad))]
    if violations:
        raise TrapViolation(
            f"{violations} samples exceeded the 2|lam| image bound; "
            f"witness {witness}"
        )
    return TrapReport(
        samples=n_samples,
        max_image_ratio=worst,
        margin=params.rho - worst,
        violations=0,
    )


def fiber_disc_batch(
    params: Params, a: ProjPoint, n_points: int
) -> np.ndarray:
    """Points of the trap fiber over a base point: the center plus a ring at
    90% of the trap radius.  Boundary samples approximate the diameter of a
    holomorphic disc image well."""
    base = normalize(a).coords
    maxnorm = float(np.max(np.abs(base)))
    angles = np.exp(2j * np.pi * np.arange(n_points - 1) / (n_points - 1))
    ts = np.concatenate([[0.0], 0.9 * params.rho * maxnorm * angles])
    out = np.tile(np.append(base, 0.0), (n_points, 1))
    out[:, -1] = ts
    return out


def fiber_contraction(
    params: Params, a: ProjPoint, n: int, n_points: int = 33
) -> list[float]:
    """Estimated diameters of the n successive images of the fiber over a.

    The sequence decreases geometrically once the orbit settles near the
    attractor; near a fixed base point the asymptotic ratio is the modulus
    of the fiber multiplier.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    fmap = PerturbedMap(params)
    pts = fiber_disc_batch(params, a, n_points)
    diams = []
    for _ in range(n):
        pts = fmap.apply_batch(pts)
        diams.append(max_pairwise_distance(pts))
    return diams


def contraction_depth(params: Params, tol: float = 1e-12) -> int:
    """A priori number of forward steps after which extra history depth
    cannot move the attractor point by more than tol (Schwarz bound with
    per-step factor 2|lam|/rho)."""
    factor = 2.0 * abs(params.lam) / params.rho
    steps = int(np.ceil(np.log(tol / 2.0) / np.log(factor))) + 1
    return max(steps, 1)


def attractor_point(
    params: Params,
    hist: Prehistory,
    return_error: bool = False,
    refine_tol: float | None = 1e-12,
):
    """Attractor point determined by a truncated backward orbit on the base.

    The depth-m approximation forward-iterates the embedded entry at depth m.
    By default the depth grows in steps of 5 until successive refinements
    differ by less than refine_tol (the nested-fiber Cauchy property); this
    both saves work and keeps the expanding base direction from amplifying
    roundoff over unnecessarily long orbits.  refine_tol=None forces the full
    stated depth.  The optional error bound is the last refinement gap.

    Raises:
        InvalidPrehistory: if the stored points are not a backward orbit.
    """
    validate_prehistory(BaseMap(params.k), hist)
    fmap = PerturbedMap(params)

    def at_depth(m: int) -> ProjPoint:
        return fmap.iterate(embed_base(hist.points[m]), m)

    if refine_tol is None or hist.depth <= 5:
        result = at_depth(hist.depth)
        if not return_error:
            return result
        if hist.depth == 0:
            return result, 1.0
        diams = fiber_contraction(params, hist.points[-1], hist.depth, n_points=17)
        return result, diams[-1]

    m = 5
    prev = at_depth(m)
    err = 1.0
    while m < hist.depth:
        m = min(m + 5, hist.depth)
        cur = at_depth(m)
        err = fs_distance(cur, prev)
        prev = cur
        if err < refine_tol:
            break
    return (prev, err) if return_error else prev


def attractor_point_batch(
    params: Params, deepest: np.ndarray, depth: int
) -> np.ndarray:
    """Vectorized form: forward-iterate embedded deepest base points."""
    n = deepest.shape[0]
    pts = np.concatenate(
        [deepest, np.zeros((n, 1), dtype=np.complex128)], axis=1
    )
    return PerturbedMap(params).iterate_batch(pts, depth)


def sample_attractor_forward(
    params: Params,
    burn_in: int,
    n_samples: int,
    seed: int,
    workers: int = 1,
    points_per_orbit: int = 64,
    starts: np.ndarray | None = None,
) -> Cloud:
    """Forward-orbit covering sample of the attractor, unit weights.

    Random trap starts are iterated burn_in times (>= 20 required for random
    starts), then successive orbit points are collected.  Explicit starts
    skip the burn-in floor; a fixed point yields a constant orbit.
    """
    fmap = PerturbedMap(params)
    if starts is None:
        if burn_in < 20:
            raise ValueError("burn_in must be >= 20 for random trap starts")
        chunks = []
        for rng, count in zip(
            substreams(seed, workers), split_counts(n_samples, workers)
        ):
            if count == 0:
                continue
            n_orbits = max(1, int(np.ceil(count / points_per_orbit)))
            pts = sample_trap_batch(params, n_orbits, rng)
            chunks.append(_collect_orbit_points(fmap, pts, burn_in, count))
        coords = np.concatenate(chunks, axis=0)
    else:
        pts = normalize_rows(np.atleast_2d(np.asarray(starts, dtype=np.complex128)))
        coords = _collect_orbit_points(fmap, pts, burn_in, n_samples)
    return Cloud.from_coords(coords)


def _collect_orbit_points(
    fmap: PerturbedMap, pts: np.ndarray, burn_in: int, count: int
) -> np.ndarray:
    pts = fmap.iterate_batch(pts, burn_in) if burn_in else normalize_rows(pts)
    rows = []
    total = 0
    while total < count:
        pts = fmap.apply_batch(pts)
        rows.append(pts.copy())
        total += pts.shape[0]
    return np.concatenate(rows, axis=0)[:count]
