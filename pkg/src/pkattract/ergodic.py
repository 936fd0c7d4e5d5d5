"""Estimators for the dynamical quantities the theory pins down.

This module carries the statistical machinery: periodic point enumeration by
multi-start Newton search in affine charts, topological entropy from greedy
spanning sets under the orbit metric, local entropy from empirical Bowen-ball
masses, Lyapunov spectra from a QR-reorthonormalized chart-Jacobian cocycle,
mixing correlations, and a sensitive-dependence probe.  Everything is
deterministic under (seed, worker layout) and verified against closed-form
oracles in the test suite.
"""

from dataclasses import dataclass

import numpy as np

from .cloud import Cloud, CoarseBins, bin_discrepancy
from .errors import InsufficientData, NoConvergence, NotPeriodic
from .history import Prehistory
from .maps import BaseMap, Params, PerturbedMap, chart_jacobian_batch
from .projective import (
    ProjPoint,
    fs_distance,
    fs_distance_rows,
    normalize,
    normalize_rows,
    unit_rows,
)
from .rng import generator


# ---------------------------------------------------------------------------
# periodic points


@dataclass(frozen=True, eq=False)
class PeriodicSet:
    """Solutions of f^n(x) = x, forward-verified and deduplicated."""

    n: int
    points: list
    multiplicities: list
    residuals: list
    expected_count: int
    complete: bool

    def __len__(self):
        return len(self.points)

    def coords(self) -> np.ndarray:
        return np.stack([p.coords for p in self.points])


def expected_periodic_count(dim: int, degree: int, n: int) -> int:
    """Fixed-point count of the n-th iterate on P^dim (all points counted)."""
    return sum(degree ** (n * i) for i in range(dim + 1))


def periodic_points(
    map_,
    n: int,
    max_count: int = 4096,
    seed: int = 0,
    starts_factor: int = 8,
    newton_iters: int = 80,
    residual_tol: float = 1e-9,
    dedupe_tol: float = 1e-7,
) -> PeriodicSet:
    """Multi-start Newton enumeration of f^n fixed points in affine charts.

    Starts are drawn per chart in the unit-ish polydisc (which cover all of
    projective space), refined by damped Newton on the chart residual, then
    forward-verified projectively and deduplicated.  When fewer points than
    the theoretical count survive, the start budget is doubled a few times
    before the set is flagged incomplete (reported, not fatal).
    """
    expected = expected_periodic_count(map_.dim, map_.degree, n)
    if expected > max_count:
        raise InsufficientData(
            f"expected {expected} points exceeds max_count={max_count}"
        )
    rng = generator(seed)
    found: list[np.ndarray] = []
    # points of period d | n belong to the set but sit in tiny Newton basins
    # of the n-th iterate; enumerate them at their own period instead
    for d in range(1, n):
        if n % d == 0:
            sub = periodic_points(
                map_, d, max_count=max_count, seed=seed,
                starts_factor=starts_factor, newton_iters=newton_iters,
                residual_tol=residual_tol, dedupe_tol=dedupe_tol,
            )
            found.extend(p.coords for p in sub.points)
    found = _merge_periodic(map_, n, found, residual_tol, dedupe_tol)
    if map_.ncoords == 2 and hasattr(map_, "preimage_branch_batch"):
        # repelling cycles attract backward: fixed sign words converge to
        # exact cycle points wherever the branch composition is stable
        found = _merge_periodic(
            map_, n, found + _symbolic_candidates(map_, n), residual_tol, dedupe_tol
        )
    budget = starts_factor
    for _ in range(4):
        cand = _newton_periodic_candidates(map_, n, expected * budget, rng)
        found = _merge_periodic(map_, n, found + cand, residual_tol, dedupe_tol)
        if len(found) < expected and found:
            # periodic sets are forward invariant: recover missed orbit
            # mates by polishing the forward images of what was found
            closure = _orbit_closure_candidates(map_, n, found)
            found = _merge_periodic(
                map_, n, found + closure, residual_tol, dedupe_tol
            )
        if len(found) >= expected:
            break
        budget *= 2

    pts = [ProjPoint(c) for c in found]
    residuals = [
        fs_distance(map_.iterate(p, n), p) for p in pts
    ]
    return PeriodicSet(
        n=n,
        points=pts,
        multiplicities=[1] * len(pts),
        residuals=residuals,
        expected_count=expected,
        complete=len(pts) == expected,
    )


def _symbolic_candidates(map_, n, rounds: int = 40) -> list[np.ndarray]:
    nsym = 2**n
    bits = ((np.arange(nsym)[:, None] >> np.arange(n)[None, :]) & 1).astype(float)
    signs = 1.0 - 2.0 * bits
    pts = np.tile(
        normalize_rows(np.array([[0.3 + 0.2j, 1.0]])), (nsym, 1)
    )
    for _ in range(rounds):
        for j in range(n - 1, -1, -1):
            pts = map_.preimage_branch_batch(pts, signs[:, [j]])
    return list(pts)


def _newton_periodic_candidates(map_, n, n_starts, rng) -> list[np.ndarray]:
    """Batched finite-difference Newton from random starts in every chart."""
    m = map_.dim
    out = []
    per_chart = max(1, n_starts // map_.ncoords)
    for chart in range(map_.ncoords):
        r = np.sqrt(rng.uniform(0.0, 1.0, size=(per_chart, m))) * 1.8
        th = rng.uniform(0.0, 2 * np.pi, size=(per_chart, m))
        out.extend(_newton_refine(map_, n, chart, r * np.exp(1j * th)))
    return out


def _orbit_closure_candidates(map_, n, found) -> list[np.ndarray]:
    """Forward images of found points, re-polished as candidate roots."""
    pts = np.stack(found)
    images = []
    cur = pts
    for _ in range(n - 1):
        cur = normalize_rows(map_.apply_hom(cur))
        images.append(cur)
    if not images:
        return []
    rows = np.concatenate(images, axis=0)
    out = []
    charts = np.argmax(np.abs(rows), axis=1)
    for chart in range(map_.ncoords):
        sel = rows[charts == chart]
        if sel.shape[0] == 0:
            continue
        aff = np.delete(sel, chart, axis=1) / sel[:, [chart]]
        out.extend(_newton_refine(map_, n, chart, aff, iters=25))
    return out


def _newton_refine(map_, n, chart, x, iters=50) -> list[np.ndarray]:
    """Damped-free FD Newton on the chart residual of the n-th iterate."""
    m = map_.dim
    h = 1e-7

    def gfun(xv):
        pts = np.insert(xv, chart, 1.0, axis=1)
        for _ in range(n):
            pts = normalize_rows(map_.apply_hom(pts))
        pivot = pts[:, chart]
        with np.errstate(divide="ignore", invalid="ignore"):
            aff = np.delete(pts, chart, axis=1) / pivot[:, None]
        return aff - xv

    for _ in range(iters):
        g0 = gfun(x)
        resid = np.linalg.norm(g0, axis=1)
        active = np.isfinite(resid) & (resid > 1e-13 * (1 + np.abs(x).max(axis=1)))
        if not np.any(active):
            break
        xa = x[active]
        ga = g0[active]
        jac = np.empty((xa.shape[0], m, m), dtype=np.complex128)
        for j in range(m):
            xe = xa.copy()
            xe[:, j] += h
            jac[:, :, j] = (gfun(xe) - ga) / h
        dets = np.linalg.det(jac)
        jac[dets == 0] += np.eye(m) * 1e-30
        step = np.linalg.solve(jac, ga[:, :, None])[:, :, 0]
        step[~np.all(np.isfinite(step), axis=1)] = 0.0
        xa = xa - step
        xa[~np.all(np.isfinite(xa), axis=1)] = 0.0
        x = x.copy()
        x[active] = xa
    g0 = gfun(x)
    ok = np.all(np.isfinite(x), axis=1)
    ok &= np.all(np.isfinite(g0), axis=1)
    ok &= np.linalg.norm(g0, axis=1) < 1e-8 * (1 + np.linalg.norm(x, axis=1))
    return list(np.insert(x[ok], chart, 1.0, axis=1))


def _merge_periodic(map_, n, cand, residual_tol, dedupe_tol) -> list[np.ndarray]:
    if not cand:
        return []
    pts = normalize_rows(np.stack(cand))
    orb = pts
    for _ in range(n):
        orb = normalize_rows(map_.apply_hom(orb))
    res = fs_distance_rows(unit_rows(pts), unit_rows(orb))
    pts = pts[res <= residual_tol]
    if pts.shape[0] == 0:
        return []
    # coarse exact-duplicate collapse (Newton copies agree to ~1e-12) keeps
    # the pairwise pass small even with thousands of raw candidates
    view = np.round(
        np.concatenate([pts.real, pts.imag], axis=1) / 1e-8
    ).astype(np.int64)
    _, first_idx = np.unique(view, axis=0, return_index=True)
    pts = pts[np.sort(first_idx)]
    u = unit_rows(pts)
    keep: list[int] = []
    gram = u @ u.conj().T
    taken = np.zeros(pts.shape[0], dtype=bool)
    for i in range(pts.shape[0]):
        if taken[i]:
            continue
        keep.append(i)
        perp = u - gram[:, i][:, None] * u[i][None, :]
        taken |= np.linalg.norm(perp, axis=1) <= dedupe_tol
    return [pts[i] for i in keep]


def attractor_periodic_point(
    params: Params,
    base_point: ProjPoint,
    n: int,
    tol: float = 1e-10,
    max_blocks: int = 400,
) -> ProjPoint:
    """The unique attractor point of period dividing n over a periodic base point.

    Iterates the n-th map power on the fiber line, re-pinning the base part
    to the exact line each block so base-direction expansion cannot
    accumulate; fiber contraction makes the iteration a strict contraction.

    Raises:
        NotPeriodic: if the base point fails f^n(a) = a within 1e-9.
        NoConvergence: if the block iteration exhausts its budget.
    """
    base = BaseMap(params.k)
    a = normalize(base_point)
    if fs_distance(base.iterate(a, n), a) > 1e-9:
        raise NotPeriodic("base point is not n-periodic within 1e-9")
    fmap = PerturbedMap(params)
    b = a.coords
    piv = int(np.argmax(np.abs(b)))
    x = np.append(b, 0.0)
    prev = ProjPoint(x)
    for _ in range(max_blocks):
        y = x
        for _ in range(n):
            y = fmap.apply_hom(y)
            y = y / y[int(np.argmax(np.abs(y)))]
        scale = y[piv] / b[piv]
        x = np.append(b * scale, y[-1])
        cur = ProjPoint(x)
        if fs_distance(cur, prev) < 1e-15:
            resid = fs_distance(fmap.iterate(cur, n), cur)
            if resid < tol:
                return normalize(cur)
        prev = cur
    raise NoConvergence("fiber iteration did not settle within the budget")


# ---------------------------------------------------------------------------
# entropy estimators


def entropy_from_periodic_growth(counts) -> float:
    """Least-squares slope of log N_n against n.

    Raises:
        InsufficientData: with fewer than 3 count pairs.
    """
    counts = list(counts)
    if len(counts) < 3:
        raise InsufficientData("need at least 3 growth samples")
    ns = np.array([c[0] for c in counts], dtype=float)
    logs = np.log([float(c[1]) for c in counts])
    return float(np.polyfit(ns, logs, 1)[0])


def orbit_segments(map_, starts: np.ndarray, length: int) -> np.ndarray:
    """(N, length, ncoords) tensor of unit-norm orbit rows."""
    pts = normalize_rows(np.asarray(starts, dtype=np.complex128))
    out = np.empty((pts.shape[0], length, pts.shape[1]), dtype=np.complex128)
    for i in range(length):
        out[:, i] = unit_rows(pts)
        if i + 1 < length:
            pts = map_.apply_batch(pts)
    return out


def _bowen_distances(segments: np.ndarray, j: int, n: int) -> np.ndarray:
    """Orbit-metric distance from segment j to every segment, first n steps."""
    ip = np.abs(
        np.einsum("nc,snc->sn", np.conj(segments[j, :n]), segments[:, :n])
    )
    d = np.sqrt(np.maximum(1.0 - ip**2, 0.0))
    return d.max(axis=1)


@dataclass(frozen=True)
class SpanningReport:
    """Greedy spanning-set cardinalities and their growth slopes."""

    n_range: tuple
    eps_range: tuple
    counts: dict  # eps -> list of r_n
    slopes: dict  # eps -> slope of log r_n vs n


def spanning_entropy(segments: np.ndarray, n_range, eps_range) -> SpanningReport:
    """Topological entropy from greedy (n, eps)-spanning sets.

    Greedy covers are within a constant factor of optimal; the constant
    cancels in the slope of log r_n against n, reported per eps.

    Raises:
        InsufficientData: for fewer than two n values or too-short segments.
    """
    n_range = tuple(n_range)
    eps_range = tuple(eps_range)
    if len(n_range) < 2:
        raise InsufficientData("need at least two n values for a slope")
    if segments.shape[1] < max(n_range):
        raise InsufficientData("segments shorter than max(n_range)")
    counts: dict = {}
    slopes: dict = {}
    for eps in eps_range:
        r_list = []
        for n in n_range:
            uncovered = np.arange(segments.shape[0])
            centers = 0
            while uncovered.size:
                center = segments[uncovered[0], :n]
                centers += 1
                block = segments[uncovered, :n]
                ip = np.abs(np.einsum("nc,snc->sn", np.conj(center), block))
                d = np.sqrt(np.maximum(1.0 - ip**2, 0.0)).max(axis=1)
                uncovered = uncovered[d > eps]
            r_list.append(centers)
        counts[eps] = r_list
        slopes[eps] = float(
            np.polyfit(np.array(n_range, dtype=float), np.log(r_list), 1)[0]
        )
    return SpanningReport(n_range, eps_range, counts, slopes)


@dataclass(frozen=True)
class LocalEntropyEstimate:
    """Average Bowen-ball entropy over sampled centers."""

    value: float
    center_values: tuple
    empty_centers: int


def bowen_ball_entropy(
    cloud: Cloud, map_, n: int, eps: float, centers: int, seed: int = 0
) -> LocalEntropyEstimate:
    """-(1/n) log of empirical Bowen-ball mass, averaged over cloud centers.

    Ball masses are computed by orbit-wise maximum-distance filtering over
    the whole cloud; empty balls (possible only for off-cloud centers) are
    excluded and counted.
    """
    segments = orbit_segments(map_, cloud.coords, n)
    rng = generator(seed)
    idx = rng.integers(0, len(cloud), size=centers)
    vals = []
    empty = 0
    for j in idx:
        mass = float(cloud.weights[_bowen_distances(segments, int(j), n) <= eps].sum())
        if mass <= 0.0:
            empty += 1
            continue
        vals.append(-np.log(mass) / n)
    value = float(np.mean(vals)) if vals else float("nan")
    return LocalEntropyEstimate(value, tuple(vals), empty)


def bowen_ball_entropy_hat(
    histories: np.ndarray,
    map_,
    n: int,
    eps: float,
    centers: int,
    seed: int = 0,
    weights: np.ndarray | None = None,
) -> LocalEntropyEstimate:
    """Bowen-ball entropy in history space under the truncated product metric.

    ``histories`` is an (N, depth+1, ncoords) tensor, newest entry first.
    The orbit of a history under the lifted map is a sliding window over
    (forward orbit of the head) ++ (stored tail), so one extended tensor per
    sample suffices; the finite depth truncates the metric by at most
    2^-depth, negligible against eps.
    """
    nsamp, hist_len, nc = histories.shape
    depth = hist_len - 1
    heads = normalize_rows(histories[:, 0])
    ext = np.empty((nsamp, n - 1 + hist_len, nc), dtype=np.complex128)
    fwd = orbit_segments(map_, heads, n)  # fwd[:, i] = unit f^i(head)
    for i in range(n):
        ext[:, n - 1 - i] = fwd[:, i]
    ext[:, n:] = unit_rows(histories[:, 1:].reshape(-1, nc)).reshape(
        nsamp, depth, nc
    )
    w_hat = 2.0 ** -np.arange(hist_len)
    if weights is None:
        weights = np.full(nsamp, 1.0 / nsamp)

    rng = generator(seed)
    idx = rng.integers(0, nsamp, size=centers)
    vals = []
    empty = 0
    for j in idx:
        ip = np.abs(np.einsum("tc,stc->st", np.conj(ext[int(j)]), ext))
        d = np.sqrt(np.maximum(1.0 - ip**2, 0.0))  # (N, window)
        hat = np.empty((nsamp, n))
        for i in range(n):
            lo = n - 1 - i
            hat[:, i] = d[:, lo : lo + hist_len] @ w_hat
        mass = float(weights[hat.max(axis=1) <= eps].sum())
        if mass <= 0.0:
            empty += 1
            continue
        vals.append(-np.log(mass) / n)
    value = float(np.mean(vals)) if vals else float("nan")
    return LocalEntropyEstimate(value, tuple(vals), empty)


# ---------------------------------------------------------------------------
# Lyapunov spectrum


@dataclass(frozen=True)
class LyapunovReport:
    """Cocycle exponents in nats per iteration, largest first."""

    exponents: tuple
    standard_errors: tuple
    orbit_count: int
    orbit_length: int


def lyapunov_exponents(
    map_, starts: np.ndarray, orbit_length: int, seed: int = 0
) -> LyapunovReport:
    """Chart-Jacobian cocycle with per-step QR reorthonormalization.

    Charts follow the max-modulus coordinate of each orbit point, so the
    per-step matrices include every chart-transition factor and can never be
    singular; the frame is retriangularized each step because the exponent
    spread collapses unnormalized frames within a few iterations.
    """
    if orbit_length < 100:
        raise InsufficientData("orbit_length must be >= 100")
    x = normalize_rows(np.asarray(starts, dtype=np.complex128))
    b = x.shape[0]
    m = map_.dim
    q = np.tile(np.eye(m, dtype=np.complex128), (b, 1, 1))
    logs = np.zeros((b, m))
    for _ in range(orbit_length):
        mats, x = chart_jacobian_batch(map_, x)
        q, r = np.linalg.qr(mats @ q)
        diag = np.abs(np.einsum("bii->bi", r))
        logs += np.log(np.maximum(diag, 1e-300))
    per_orbit = logs / orbit_length
    per_orbit = -np.sort(-per_orbit, axis=1)
    mean = per_orbit.mean(axis=0)
    se = per_orbit.std(axis=0, ddof=1) / np.sqrt(b) if b > 1 else np.zeros(m)
    return LyapunovReport(
        exponents=tuple(float(v) for v in mean),
        standard_errors=tuple(float(v) for v in se),
        orbit_count=b,
        orbit_length=orbit_length,
    )


def lyapunov_exponents_from_histories(
    map_, histories: list[Prehistory], orbit_length: int
) -> LyapunovReport:
    """Exponents along lifted orbits: the lifted cocycle acts through the
    head of each history, so the base cocycle from the heads is evaluated."""
    heads = np.stack([h.head.coords for h in histories])
    return lyapunov_exponents(map_, heads, orbit_length)


# ---------------------------------------------------------------------------
# mixing, sensitivity, periodic distribution


class ChartBump:
    """Smooth bump of the chordal distance to a center; support radius r."""

    def __init__(self, center_coords: np.ndarray, radius: float = 0.3):
        c = np.asarray(center_coords, dtype=np.complex128)
        self.center = c / np.linalg.norm(c)
        self.radius = float(radius)

    def __call__(self, coords: np.ndarray) -> np.ndarray:
        u = unit_rows(coords)
        ip = np.abs(u @ np.conj(self.center)) ** 2
        d = np.sqrt(np.maximum(1.0 - ip, 0.0))
        s = d / self.radius
        out = np.zeros(coords.shape[0])
        inside = s < 1.0
        out[inside] = np.exp(1.0 - 1.0 / (1.0 - s[inside] ** 2))
        return out


def coordinate_modulus(index: int):
    """Observable |c_index| of the canonical representative (bounded by 1)."""

    def phi(coords: np.ndarray) -> np.ndarray:
        return np.abs(normalize_rows(coords)[:, index])

    return phi


def correlation(
    cloud: Cloud, map_, phi, psi, n: int
) -> tuple[float, float]:
    """Monte-Carlo mixing correlation <(phi o f^n) psi> - <phi><psi>.

    Returns the estimate and its standard error (cloud samples are
    independent draws, so the plug-in covariance error bar applies).
    """
    coords = cloud.coords
    fwd = coords
    for _ in range(n):
        fwd = map_.apply_batch(fwd)
    a = np.asarray(phi(fwd), dtype=float)
    b = np.asarray(psi(coords), dtype=float)
    w = cloud.weights
    mean_a = float(np.sum(w * a))
    mean_b = float(np.sum(w * b))
    prod = (a - mean_a) * (b - mean_b)
    value = float(np.sum(w * prod))
    se = float(np.sqrt(np.sum(w**2 * (prod - value) ** 2)))
    return value, se


@dataclass(frozen=True)
class SensitivityReport:
    """Orbit-separation statistics for nearby initial pairs."""

    fraction: float
    separation_times: np.ndarray  # histogram over steps 0..horizon
    threshold: float
    trials: int


def sensitivity_probe(
    map_,
    starts: np.ndarray,
    delta: float = 0.1,
    horizon: int = 50,
    seed: int = 0,
    threshold: float = 0.1,
) -> SensitivityReport:
    """Fraction of pairs at initial distance < delta/100 separating past the
    fixed threshold within the horizon, plus the separation-time histogram."""
    rng = generator(seed)
    x = unit_rows(normalize_rows(np.asarray(starts, dtype=np.complex128)))
    nsamp, nc = x.shape
    v = rng.normal(size=(nsamp, nc)) + 1j * rng.normal(size=(nsamp, nc))
    ip = np.sum(np.conj(x) * v, axis=1)
    perp = v - ip[:, None] * x
    perp /= np.linalg.norm(perp, axis=1)[:, None]
    y = x + (0.99 * delta / 100.0) * perp

    xs, ys = normalize_rows(x), normalize_rows(y)
    times = np.full(nsamp, -1, dtype=np.int64)
    for step in range(horizon + 1):
        d = _fs_rows_unit(unit_rows(xs), unit_rows(ys))
        newly = (times < 0) & (d > threshold)
        times[newly] = step
        if np.all(times >= 0):
            break
        xs = map_.apply_batch(xs)
        ys = map_.apply_batch(ys)
    separated = times >= 0
    hist = np.bincount(times[separated], minlength=horizon + 1)
    return SensitivityReport(
        fraction=float(separated.mean()),
        separation_times=hist,
        threshold=threshold,
        trials=nsamp,
    )


def _fs_rows_unit(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    ip = np.abs(np.sum(np.conj(a) * b, axis=1))
    return np.sqrt(np.maximum(1.0 - ip**2, 0.0))


@dataclass(frozen=True)
class DiscrepancyReport:
    """Coarse-bin gap between a periodic set and a measure cloud."""

    value: float
    complete: bool


def periodic_measure_discrepancy(pset: PeriodicSet, cloud: Cloud) -> DiscrepancyReport:
    """Mean absolute bin-mass gap between uniform-on-periodic-set and cloud.

    The completeness flag of the periodic set is propagated so callers can
    tell a genuine gap from an under-enumerated set.
    """
    bins = CoarseBins(cloud.dim)
    m_pset = bins.masses_of(pset.coords())
    m_cloud = bins.masses(cloud)
    return DiscrepancyReport(
        value=bin_discrepancy(m_pset, m_cloud), complete=pset.complete
    )
