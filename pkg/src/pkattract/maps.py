"""The quadratic map family and its closed-form algebra.

Three maps are implemented:

* ``BaseMap(k)``      -- the degree-2 self-map of the base hyperplane P^(k-1),
                         [z0:...:z_{k-1}] -> [(z0-2z1)^2:...:(z0-2z_{k-1})^2:z0^2];
* ``PerturbedMap(p)`` -- the family on P^k,
                         [z:w1:...:w_{k-1}:t] -> [(z-2w1)^2:...:(z-2w_{k-1})^2:z^2:t^2+lam z^2];
* ``FiberQuadratic``  -- z -> z^2 + lam on the fiber line, as a map of P^1.

All preimage solvers enumerate square-root branches explicitly after fixing
the leading coordinate to the principal root, which kills the projective sign
ambiguity and yields exactly deg^s candidates, duplicates only at critical
values (reported with multiplicities).
"""

import cmath
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    ChartSingular,
    IndeterminacyHit,
    LambdaOutOfRange,
    NotInSurface,
)
from .projective import (
    ProjPoint,
    embed_base,
    fs_distance,
    normalize,
    normalize_rows,
)


def fiber_fixed_point(lam: complex) -> complex:
    """The root t of t^2 - t + lam = 0 with the principal branch of the sqrt.

    For small |lam| this is the attracting fixed point of z -> z^2 + lam,
    of size ~ lam.  At lam = 1/4 it degenerates to the double root 1/2.
    """
    return (1.0 - cmath.sqrt(1.0 - 4.0 * lam)) / 2.0


@dataclass(frozen=True)
class Params:
    """Configuration of the perturbed map and its trapping region.

    The constructor enforces 0 < 2|lam| < rho < sqrt(|lam|), which is the
    regime where the neighborhood {|t| < rho * max(|z|,|w_j|)} maps strictly
    into itself.  Note the chain forces |lam| < 1/4.
    """

    k: int
    lam: complex
    rho: float

    def __post_init__(self):
        if int(self.k) != self.k or self.k < 2:
            raise ValueError("k must be an integer >= 2")
        object.__setattr__(self, "k", int(self.k))
        object.__setattr__(self, "lam", complex(self.lam))
        object.__setattr__(self, "rho", float(self.rho))
        mod = abs(self.lam)
        if mod == 0.0:
            raise LambdaOutOfRange("lam must be nonzero")
        if not (2.0 * mod < self.rho < mod**0.5):
            raise LambdaOutOfRange(
                f"need 2|lam| < rho < sqrt(|lam|), got lam={self.lam}, rho={self.rho}"
            )

    @property
    def t_fixed(self) -> complex:
        return fiber_fixed_point(self.lam)


def diagonal_fixed_point(params: Params) -> ProjPoint:
    """The fixed point [1:...:1:t] on the fixed line, t the fiber root."""
    return ProjPoint([1.0] * params.k + [params.t_fixed])


def diagonal_preimage_point(params: Params) -> ProjPoint:
    """[1:...:1:-t]; maps onto the fixed point in one step."""
    return ProjPoint([1.0] * params.k + [-params.t_fixed])


@dataclass(frozen=True)
class ChartJacobian:
    """Derivative of the affine chart realization of a map at one point."""

    base_chart: int
    image_chart: int
    matrix: np.ndarray


class _ProjectiveMap:
    """Shared machinery: apply/normalize, orbits, chart Jacobians."""

    ncoords: int  # homogeneous coordinates of domain = codomain
    degree = 2

    def apply_hom(self, a: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def jac_hom(self, a: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    @property
    def dim(self) -> int:
        return self.ncoords - 1

    def apply(self, p: ProjPoint) -> ProjPoint:
        out = self.apply_hom(p.coords)
        if float(np.max(np.abs(out))) == 0.0:
            raise IndeterminacyHit("holomorphic map produced a zero vector")
        return normalize(ProjPoint(out))

    def apply_batch(self, a: np.ndarray) -> np.ndarray:
        return normalize_rows(self.apply_hom(a))

    def iterate(self, p: ProjPoint, n: int) -> ProjPoint:
        for _ in range(n):
            p = self.apply(p)
        return p

    def iterate_batch(self, a: np.ndarray, n: int) -> np.ndarray:
        for _ in range(n):
            a = self.apply_batch(a)
        return a

    def orbit(self, p: ProjPoint, n: int) -> list[ProjPoint]:
        pts = [normalize(p)]
        for _ in range(n):
            pts.append(self.apply(pts[-1]))
        return pts


class BaseMap(_ProjectiveMap):
    """Self-map of the base hyperplane P^(k-1); topological degree 2^(k-1)."""

    def __init__(self, k: int):
        if k < 2:
            raise ValueError("k must be >= 2")
        self.k = k
        self.ncoords = k

    def apply_hom(self, a: np.ndarray) -> np.ndarray:
        a = np.asarray(a, dtype=np.complex128)
        z0 = a[..., 0]
        out = np.empty_like(a)
        out[..., : self.k - 1] = (z0[..., None] - 2.0 * a[..., 1:]) ** 2
        out[..., self.k - 1] = z0**2
        return out

    def jac_hom(self, a: np.ndarray) -> np.ndarray:
        a = np.asarray(a, dtype=np.complex128)
        k = self.k
        jac = np.zeros(a.shape[:-1] + (k, k), dtype=np.complex128)
        diff = a[..., 0, None] - 2.0 * a[..., 1:]
        jac[..., : k - 1, 0] = 2.0 * diff
        for j in range(k - 1):
            jac[..., j, j + 1] = -4.0 * diff[..., j]
        jac[..., k - 1, 0] = 2.0 * a[..., 0]
        return jac

    def enumerate_preimages_hom(self, c: np.ndarray) -> np.ndarray:
        """All 2^(k-1) branch candidates solving apply_hom(x) == c exactly.

        The leading coordinate is pinned to the principal root of c[k-1];
        flipping every remaining sign at once only negates the vector, so
        these candidates already represent every projective preimage.
        """
        c = np.asarray(c, dtype=np.complex128)
        k = self.k
        z0 = np.sqrt(c[k - 1])
        roots = np.sqrt(c[: k - 1])
        m = k - 1
        signs = _sign_patterns(m)
        cand = np.empty((2**m, k), dtype=np.complex128)
        cand[:, 0] = z0
        cand[:, 1:] = (z0 - signs * roots[None, :]) / 2.0
        return cand

    def preimages(
        self, target: ProjPoint, dedupe_tol: float = 1e-9
    ) -> list[tuple[ProjPoint, int]]:
        cand = self.enumerate_preimages_hom(normalize(target).coords)
        return _dedupe_with_multiplicity(cand, dedupe_tol)

    def preimage_branch_batch(self, c: np.ndarray, signs: np.ndarray) -> np.ndarray:
        """The preimage selected by explicit sign bits, one row at a time."""
        c = np.asarray(c, dtype=np.complex128)
        k = c.shape[1]
        z0 = np.sqrt(c[:, k - 1])
        roots = np.sqrt(c[:, : k - 1])
        out = np.empty_like(c)
        out[:, 0] = z0
        out[:, 1:] = (z0[:, None] - signs * roots) / 2.0
        return normalize_rows(out)

    def preimage_step_batch(
        self, c: np.ndarray, rng: np.random.Generator
    ) -> np.ndarray:
        """One uniformly chosen branch per row (multiplicity-weighted)."""
        c = np.asarray(c, dtype=np.complex128)
        n, k = c.shape
        signs = 1.0 - 2.0 * rng.integers(0, 2, size=(n, k - 1)).astype(np.float64)
        return self.preimage_branch_batch(c, signs)

    def enumerate_tree_level(self, c: np.ndarray) -> np.ndarray:
        """Expand every row into its full branch set; rows multiply by 2^(k-1)."""
        c = np.asarray(c, dtype=np.complex128)
        n, k = c.shape
        m = k - 1
        signs = _sign_patterns(m)  # (2^m, m)
        z0 = np.sqrt(c[:, k - 1])
        roots = np.sqrt(c[:, : k - 1])
        out = np.empty((n, 2**m, k), dtype=np.complex128)
        out[:, :, 0] = z0[:, None]
        out[:, :, 1:] = (z0[:, None, None] - signs[None, :, :] * roots[:, None, :]) / 2.0
        return normalize_rows(out.reshape(n * 2**m, k))


class PerturbedMap(_ProjectiveMap):
    """The family on P^k; topological degree 2^k."""

    def __init__(self, params: Params):
        self.params = params
        self.k = params.k
        self.lam = params.lam
        self.ncoords = params.k + 1

    def apply_hom(self, a: np.ndarray) -> np.ndarray:
        a = np.asarray(a, dtype=np.complex128)
        k = self.k
        z = a[..., 0]
        out = np.empty_like(a)
        out[..., : k - 1] = (z[..., None] - 2.0 * a[..., 1:k]) ** 2
        out[..., k - 1] = z**2
        out[..., k] = a[..., k] ** 2 + self.lam * z**2
        return out

    def jac_hom(self, a: np.ndarray) -> np.ndarray:
        a = np.asarray(a, dtype=np.complex128)
        k = self.k
        jac = np.zeros(a.shape[:-1] + (k + 1, k + 1), dtype=np.complex128)
        diff = a[..., 0, None] - 2.0 * a[..., 1:k]
        jac[..., : k - 1, 0] = 2.0 * diff
        for j in range(k - 1):
            jac[..., j, j + 1] = -4.0 * diff[..., j]
        jac[..., k - 1, 0] = 2.0 * a[..., 0]
        jac[..., k, 0] = 2.0 * self.lam * a[..., 0]
        jac[..., k, k] = 2.0 * a[..., k]
        return jac

    def enumerate_preimages_hom(self, c: np.ndarray) -> np.ndarray:
        """All 2^k branch candidates solving apply_hom(x) == c exactly."""
        c = np.asarray(c, dtype=np.complex128)
        k = self.k
        z = np.sqrt(c[k - 1])
        roots = np.sqrt(c[: k - 1])
        m = k - 1
        signs = _sign_patterns(m)
        t_root = np.sqrt(c[k] - self.lam * z**2)
        cand = np.empty((2 ** (k), k + 1), dtype=np.complex128)
        for tau_idx, tau in enumerate((1.0, -1.0)):
            block = slice(tau_idx * 2**m, (tau_idx + 1) * 2**m)
            cand[block, 0] = z
            cand[block, 1:k] = (z - signs * roots[None, :]) / 2.0
            cand[block, k] = tau * t_root
        return cand

    def preimages(
        self, target: ProjPoint, dedupe_tol: float = 1e-9
    ) -> list[tuple[ProjPoint, int]]:
        cand = self.enumerate_preimages_hom(normalize(target).coords)
        return _dedupe_with_multiplicity(cand, dedupe_tol)

    def base_map(self) -> BaseMap:
        return BaseMap(self.k)

    def fiber_map(self) -> "FiberQuadratic":
        return FiberQuadratic(self.lam)


class FiberQuadratic(_ProjectiveMap):
    """z -> z^2 + lam on the fiber line, homogenized as [t:u] -> [t^2+lam u^2 : u^2]."""

    ncoords = 2

    def __init__(self, lam: complex):
        self.lam = complex(lam)

    def apply_scalar(self, z: complex) -> complex:
        return z * z + self.lam

    def iterate_scalar(self, z: complex, n: int) -> complex:
        for _ in range(n):
            z = z * z + self.lam
        return z

    def derivative_scalar(self, z: complex) -> complex:
        return 2.0 * z

    def apply_hom(self, a: np.ndarray) -> np.ndarray:
        a = np.asarray(a, dtype=np.complex128)
        out = np.empty_like(a)
        out[..., 0] = a[..., 0] ** 2 + self.lam * a[..., 1] ** 2
        out[..., 1] = a[..., 1] ** 2
        return out

    def jac_hom(self, a: np.ndarray) -> np.ndarray:
        a = np.asarray(a, dtype=np.complex128)
        jac = np.zeros(a.shape[:-1] + (2, 2), dtype=np.complex128)
        jac[..., 0, 0] = 2.0 * a[..., 0]
        jac[..., 0, 1] = 2.0 * self.lam * a[..., 1]
        jac[..., 1, 1] = 2.0 * a[..., 1]
        return jac

    def preimage_branch_batch(self, c: np.ndarray, signs: np.ndarray) -> np.ndarray:
        c = np.asarray(c, dtype=np.complex128)
        u = np.sqrt(c[:, 1])
        t = signs[:, 0] * np.sqrt(c[:, 0] - self.lam * c[:, 1])
        return normalize_rows(np.stack([t, u], axis=1))

    def preimages_scalar(self, w: complex, depth: int) -> list[complex]:
        """All 2^depth solutions s of h^depth(s) = w, listed with multiplicity."""
        if depth < 1:
            raise ValueError("depth must be >= 1")
        level = [complex(w)]
        for _ in range(depth):
            nxt = []
            for v in level:
                r = cmath.sqrt(v - self.lam)
                nxt.extend((r, -r))
            level = nxt
        return level


def _sign_patterns(m: int) -> np.ndarray:
    """(2^m, m) array of +-1 patterns, lexicographic, +1 first."""
    if m == 0:
        return np.zeros((1, 0))
    bits = ((np.arange(2**m)[:, None] >> np.arange(m)[None, ::-1]) & 1).astype(
        np.float64
    )
    return 1.0 - 2.0 * bits


def _dedupe_with_multiplicity(
    cand: np.ndarray, tol: float
) -> list[tuple[ProjPoint, int]]:
    pts: list[tuple[ProjPoint, int]] = []
    for row in cand:
        p = normalize(ProjPoint(row))
        for i, (q, mult) in enumerate(pts):
            if fs_distance(p, q) <= tol:
                pts[i] = (q, mult + 1)
                break
        else:
            pts.append((p, 1))
    return pts


def apply_surface_map(params: Params, p: ProjPoint, tol: float = 1e-8) -> ProjPoint:
    """k-fold composition of the perturbed map, restricted to the surface
    where all middle coordinates agree (invariant under the k-th power).

    Raises:
        NotInSurface: if the equal-coordinates invariant fails beyond tol.
    """
    if not in_surface(p, tol):
        raise NotInSurface("middle coordinates differ beyond tolerance")
    return PerturbedMap(params).iterate(p, params.k)


def in_surface(p: ProjPoint, tol: float = 1e-8) -> bool:
    """Whether all middle coordinates w_1..w_{k-1} agree within tol (scale-free)."""
    arr = normalize(p).coords
    mids = arr[1:-1]
    if mids.size <= 1:
        return True
    spread = float(np.max(np.abs(mids - mids[0])))
    return spread <= tol


def surface_chart(p: ProjPoint) -> tuple[complex, complex]:
    """Chart (u, s) = (z/w, t/w) on the surface, w the common middle value."""
    arr = normalize(p).coords
    w = arr[1]
    if abs(w) < 1e-13:
        raise ChartSingular("surface chart undefined where the middle value is 0")
    return complex(arr[0] / w), complex(arr[-1] / w)


def on_fixed_line(p: ProjPoint, tol: float = 1e-8) -> bool:
    """Whether the first k coordinates all agree within tol (scale-free)."""
    arr = normalize(p).coords
    head = arr[:-1]
    spread = float(np.max(np.abs(head - head[0])))
    return spread <= tol


def jacobian_chart(
    m: _ProjectiveMap,
    p: ProjPoint,
    in_chart: int | None = None,
    out_chart: int | None = None,
) -> ChartJacobian:
    """Derivative of the affine chart realization of the map at p.

    Default charts pick the max-modulus coordinate of the point and of its
    image, which is the best-conditioned choice and can never be singular.
    Explicit charts raise ChartSingular when the pivot coordinate vanishes.
    """
    arr = normalize(p).coords
    if in_chart is None:
        in_chart = int(np.argmax(np.abs(arr)))
    if abs(arr[in_chart]) < 1e-13:
        raise ChartSingular(f"input chart {in_chart} vanishes at the point")
    lift = arr / arr[in_chart]

    val = m.apply_hom(lift)
    top = float(np.max(np.abs(val)))
    if top == 0.0:
        raise IndeterminacyHit("map image vanished")
    if out_chart is None:
        out_chart = int(np.argmax(np.abs(val)))
    if abs(val[out_chart]) < 1e-13 * top:
        raise ChartSingular(f"image chart {out_chart} vanishes")

    jac = m.jac_hom(lift)
    rows = [i for i in range(m.ncoords) if i != out_chart]
    cols = [j for j in range(m.ncoords) if j != in_chart]
    voc = val[out_chart]
    mat = np.empty((m.dim, m.dim), dtype=np.complex128)
    for r, i in enumerate(rows):
        for c, j in enumerate(cols):
            mat[r, c] = (jac[i, j] * voc - val[i] * jac[out_chart, j]) / voc**2
    return ChartJacobian(in_chart, out_chart, mat)


def chart_jacobian_batch(
    m: _ProjectiveMap, x: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Per-row chart Jacobians (max-modulus charts) and normalized images.

    Input rows must already be canonical representatives; the per-step chart
    transition scalars are part of the returned matrices, so products along
    an orbit form the correct derivative cocycle.
    """
    b, nc = x.shape
    d = nc - 1
    val = m.apply_hom(x)
    ocs = np.argmax(np.abs(val), axis=1)
    jac = m.jac_hom(x)

    idx = np.tile(np.arange(nc), (b, 1))
    ics = np.argmax(np.abs(x), axis=1)
    rows = idx[idx != ocs[:, None]].reshape(b, d)
    cols = idx[idx != ics[:, None]].reshape(b, d)

    bi = np.arange(b)
    a_rc = jac[bi[:, None, None], rows[:, :, None], cols[:, None, :]]
    val_r = val[bi[:, None], rows]
    a_oc = jac[bi[:, None], ocs[:, None], cols]
    voc = val[bi, ocs]
    mat = (
        a_rc * voc[:, None, None] - val_r[:, :, None] * a_oc[:, None, :]
    ) / (voc**2)[:, None, None]

    images = val / val[bi, ocs][:, None]
    return mat, images


_CRIT_ZERO = "z0=0"


def critical_set_membership(
    k: int, q: ProjPoint, tol: float = 1e-9
) -> list[str]:
    """Which components of the base map's critical set contain q within tol.

    Components are the hyperplane {z0=0} and {z0=2zj} for j=1..k-1; labels
    are "z0=0" and "z0=2z1", ..., empty list when q is regular.
    """
    arr = normalize(q).coords
    labels = []
    if abs(arr[0]) <= tol:
        labels.append(_CRIT_ZERO)
    for j in range(1, k):
        if abs(arr[0] - 2.0 * arr[j]) <= tol:
            labels.append(f"z0=2z{j}")
    return labels
