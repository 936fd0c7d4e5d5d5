"""Green function evaluation and samplers for the invariant measures.

The escape-rate potential is accumulated with per-step rescaling so nothing
overflows; the base measure is sampled by independent uniform backward walks
from a fixed generic start, and the attractor measure by pushing truncated
histories through the semiconjugation.
"""

from dataclasses import dataclass

import numpy as np

from .cloud import Cloud, CoarseBins, bin_discrepancy
from .errors import TreeTooLarge, ZeroVector
from .maps import BaseMap, Params
from .projective import ProjPoint, normalize, normalize_rows
from .rng import generator, split_counts, substreams
from .trapping import attractor_point_batch, contraction_depth

DEFAULT_WALK_DEPTH = 30


def green_function(map_, lift, n_iter: int = 60) -> float:
    """Renormalized escape-rate potential of a homogeneous lift.

    Accumulates log|x0| + sum 2^-(m+1) log(|F(x_m)| / |x_m|^2) with every
    iterate rescaled to unit max modulus, so the value is overflow-free and
    exactly homogeneous: G(c x) = G(x) + log|c| by construction.  The
    truncation error decays like 2^-n_iter.
    """
    x = np.asarray(lift, dtype=np.complex128)
    if x.ndim != 1 or x.size != map_.ncoords:
        raise ValueError(f"lift must have {map_.ncoords} entries")
    top = float(np.max(np.abs(x)))
    if top < 1e-300:
        raise ZeroVector("zero lift")
    total = float(np.log(np.linalg.norm(x)))
    x = x / x[int(np.argmax(np.abs(x)))]
    for m in range(n_iter):
        y = map_.apply_hom(x)
        ratio = np.linalg.norm(y) / np.linalg.norm(x) ** 2
        total += 2.0 ** -(m + 1) * float(np.log(ratio))
        x = y / y[int(np.argmax(np.abs(y)))]
    return total


def generic_start(k: int) -> ProjPoint:
    """Fixed non-symmetric integer start [2:3:...:k+1] for backward walks.

    Chosen off the critical and post-critical coincidences of the very
    symmetric map; genericity is cross-checked by start independence.
    """
    return normalize(ProjPoint(np.arange(2, k + 2, dtype=np.complex128)))


def backward_walk_batch(
    k: int, start: ProjPoint, depth: int, n: int, rng: np.random.Generator
) -> np.ndarray:
    base = BaseMap(k)
    current = np.tile(normalize(start).coords, (n, 1))
    for _ in range(depth):
        current = base.preimage_step_batch(current, rng)
    return current


def sample_balanced_measure(
    k: int,
    depth: int,
    n_samples: int,
    seed: int,
    start: ProjPoint | None = None,
    workers: int = 1,
) -> Cloud:
    """Empirical balanced measure of the base map on P^(k-1).

    Independent uniform backward random walks of the given depth from a
    fixed generic start; endpoints carry equal weights.  Depth 0 returns the
    delta measure at the start itself.
    """
    start = generic_start(k) if start is None else normalize(start)
    chunks = []
    for rng, count in zip(substreams(seed, workers), split_counts(n_samples, workers)):
        if count:
            chunks.append(backward_walk_batch(k, start, depth, count, rng))
    return Cloud.from_coords(np.concatenate(chunks, axis=0))


def sample_attractor_measure(
    params: Params,
    depth: int,
    n_samples: int,
    seed: int,
    mu0_depth: int = DEFAULT_WALK_DEPTH,
    start: ProjPoint | None = None,
    workers: int = 1,
) -> Cloud:
    """Empirical attractor measure: histories pushed through the
    semiconjugation.

    Each sample extends a balanced-measure draw backward `depth` more steps
    and forward-iterates the embedded deepest entry.  The effective depth is
    capped once the a priori fiber-contraction bound drops below 1e-12.
    """
    start = generic_start(params.k) if start is None else normalize(start)
    eff_depth = min(depth, contraction_depth(params, 1e-12))
    chunks = []
    for rng, count in zip(substreams(seed, workers), split_counts(n_samples, workers)):
        if count == 0:
            continue
        deepest = backward_walk_batch(
            params.k, start, mu0_depth + eff_depth, count, rng
        )
        chunks.append(attractor_point_batch(params, deepest, eff_depth))
    return Cloud.from_coords(np.concatenate(chunks, axis=0))


def pushforward(map_, cloud: Cloud, n: int = 1) -> Cloud:
    coords = cloud.coords
    for _ in range(n):
        coords = map_.apply_batch(coords)
    return Cloud(coords, cloud.weights)


def project_cloud(cloud: Cloud) -> Cloud:
    """Push an attractor cloud down to the base hyperplane (drop fiber coord)."""
    return Cloud.from_coords(cloud.coords[:, :-1], cloud.weights)


def enumerate_preimage_tree(
    k: int, start: ProjPoint, depth: int, max_nodes: int = 100_000
) -> np.ndarray:
    """Exact full preimage tree leaves at the given depth, with multiplicity.

    Raises:
        TreeTooLarge: when 2^((k-1) depth) would exceed max_nodes.
    """
    if 2 ** ((k - 1) * depth) > max_nodes:
        raise TreeTooLarge(
            f"2^({k - 1}*{depth}) leaves exceed the {max_nodes} budget"
        )
    base = BaseMap(k)
    current = normalize(start).coords[None, :]
    for _ in range(depth):
        current = base.enumerate_tree_level(current)
    return current


@dataclass(frozen=True)
class PreimageDistributionReport:
    """Convergence diagnostics for backward equidistribution from one start."""

    depths: tuple
    pair_discrepancies: tuple  # between consecutive depths
    decreasing: bool
    exact: tuple  # which depths were enumerated exactly


def preimage_distribution_test(
    k: int,
    z: ProjPoint,
    depths,
    seed: int = 0,
    n_sampled: int = 100_000,
    max_nodes: int = 100_000,
) -> PreimageDistributionReport:
    """Coarse-bin discrepancy between preimage measures at successive depths.

    Depths small enough for full enumeration are exact; larger ones fall
    back to uniform backward sampling with the same bin statistics.
    """
    depths = tuple(sorted(depths))
    bins = CoarseBins(k - 1)
    masses = []
    exact_flags = []
    for d in depths:
        try:
            leaves = enumerate_preimage_tree(k, z, d, max_nodes=max_nodes)
            exact_flags.append(True)
        except TreeTooLarge:
            rng = generator(seed + d)
            leaves = backward_walk_batch(k, z, d, n_sampled, rng)
            exact_flags.append(False)
        masses.append(bins.masses_of(leaves))
    pairs = tuple(
        bin_discrepancy(masses[i], masses[i + 1]) for i in range(len(depths) - 1)
    )
    decreasing = all(pairs[i + 1] <= pairs[i] for i in range(len(pairs) - 1))
    return PreimageDistributionReport(
        depths=depths,
        pair_discrepancies=pairs,
        decreasing=decreasing,
        exact=tuple(exact_flags),
    )
