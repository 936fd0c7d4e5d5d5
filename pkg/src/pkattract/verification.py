"""Executable versions of the computational lemmas behind the attractor.

Each checker reduces a lemma to finitely many residuals or escape margins
computed from closed forms: the fixed-line system has exactly two surviving
case candidates plus a global sweep; preimage escape enumerates the nested
quadratic's backward branches; the degree checks count closed-form preimages
restricted to invariant sets; nonalgebraicity is witnessed by the smallest
singular value of a monomial evaluation matrix over a sampled invariant slice.

Residual thresholds scale with |lam|^3, and the arithmetic switches to
extended precision (>= 113-bit significand) for small |lam| or when the
PKATTRACT_PRECISION environment variable demands it.
"""

import cmath
import os
from dataclasses import dataclass, field

import mpmath
import numpy as np

from .errors import (
    DegenerateTarget,
    InsufficientSamples,
    LambdaOutOfRange,
    PrecisionInsufficient,
)
from .maps import (
    BaseMap,
    Params,
    PerturbedMap,
    diagonal_fixed_point,
    fiber_fixed_point,
    in_surface,
    jacobian_chart,
    on_fixed_line,
)
from .polynomials import Poly, poly_roots
from .projective import ProjPoint, fs_distance, normalize, normalize_rows
from .rng import generator
from .trapping import in_trap

ADVISORY_LAMBDA = 0.05  # validity domain mapped empirically, not guaranteed
EXTENDED_BITS = 160
DOUBLE_BITS = 53


@dataclass(frozen=True)
class LemmaReport:
    """Outcome of one executable lemma check."""

    lemma_id: str
    passed: bool
    min_residual: float
    witnesses: list
    precision_used: int
    advisory: bool = False
    details: dict = field(default_factory=dict)


def _resolve_precision(lam: complex, precision: str) -> str:
    if precision not in ("auto", "double", "extended"):
        raise ValueError("precision must be auto, double, or extended")
    env = os.environ.get("PKATTRACT_PRECISION", "").strip().lower()
    if precision == "auto":
        if env == "extended":
            return "extended"
        if env == "double":
            return "double"
        return "extended" if abs(lam) < 1e-3 else "double"
    return precision


def _noise_floor(extended: bool) -> float:
    return 1e-40 if extended else 1e-13


def residual_threshold(lam: complex) -> float:
    return abs(lam) ** 3 / 10.0


def _h_iter(z, lam, n):
    for _ in range(n):
        z = z * z + lam
    return z


def _t_fixed(lam, extended: bool):
    if extended:
        return (1 - mpmath.sqrt(1 - 4 * mpmath.mpc(lam))) / 2
    return fiber_fixed_point(lam)


def check_fixed_line(
    lam: complex, rho: float, k: int, precision: str = "auto"
) -> LemmaReport:
    """No affine line t = alpha z + beta inside the trap is fixed.

    Track (a), the proof's case analysis: matching the line equation at the
    three probe slices forces alpha + beta to be the attracting fiber root,
    leaving exactly the two candidates (alpha, beta) = (t, 0) and (-t, 2t);
    both must violate the third slice by a residual above |lam|^3/10.
    Track (b): a grid-plus-refinement sweep of max(|eq1|,|eq2|,|eq3|) over
    {|alpha| < rho, |beta| < 3 rho} must stay above the same threshold.

    Raises:
        LambdaOutOfRange: for lam = 0.
        PrecisionInsufficient: if residuals sit at the noise floor even in
            extended precision.
    """
    if lam == 0:
        raise LambdaOutOfRange("lam must be nonzero")
    Params(k, lam, rho)  # validates the trap inequalities
    mode = _resolve_precision(lam, precision)
    for attempt_mode in ([mode, "extended"] if mode == "double" else [mode]):
        extended = attempt_mode == "extended"
        with mpmath.workprec(EXTENDED_BITS if extended else DOUBLE_BITS):
            t = _t_fixed(lam, extended)
            lam_s = mpmath.mpc(lam) if extended else complex(lam)
            # case (t, 0): third slice reads h^(k-1)(beta^2/4) = alpha + beta
            res_a = abs(_h_iter(0 * lam_s, lam_s, k - 1) - t)
            # case (-t, 2t): beta^2/4 = t^2
            res_b = abs(_h_iter(t * t, lam_s, k - 1) - t)
            eq1_a = abs(_h_iter(t, lam_s, k) - t)
            eq1_b = abs(_h_iter(-t, lam_s, k) - t)
        case_min = float(min(res_a, res_b))
        if case_min >= 10.0 * _noise_floor(extended):
            break
    else:
        raise PrecisionInsufficient(
            "fixed-line residuals are at the arithmetic noise floor"
        )

    sweep_min, sweep_arg = _fixed_line_sweep(complex(lam), float(rho), k)
    thr = residual_threshold(lam)
    passed = case_min > thr and sweep_min > thr
    witnesses = [
        {"case": "beta=0", "alpha": _to_c(t), "beta": 0.0,
         "eq3_residual": float(res_a), "eq1_residual": float(eq1_a)},
        {"case": "beta=-2alpha", "alpha": _to_c(-t), "beta": _to_c(2 * t),
         "eq3_residual": float(res_b), "eq1_residual": float(eq1_b)},
        {"case": "sweep", "residual": sweep_min,
         "alpha": sweep_arg[0], "beta": sweep_arg[1]},
    ]
    return LemmaReport(
        lemma_id="fixed_line",
        passed=passed,
        min_residual=case_min,
        witnesses=witnesses,
        precision_used=EXTENDED_BITS if extended else DOUBLE_BITS,
        advisory=abs(lam) > ADVISORY_LAMBDA,
        details={
            "threshold": thr,
            "sweep_min_residual": sweep_min,
            "case_residuals": (float(res_a), float(res_b)),
        },
    )


def _to_c(x) -> complex:
    return complex(x)


def _fixed_line_system(alpha, beta, lam, k):
    s = alpha + beta
    eq1 = np.abs(_h_iter(alpha, lam, k) - s)
    eq2 = np.abs(_h_iter(s, lam, k) - s)
    eq3 = np.abs(_h_iter(beta * beta / 4.0, lam, k - 1) - s)
    return np.maximum(np.maximum(eq1, eq2), eq3)


def _fixed_line_sweep(lam: complex, rho: float, k: int):
    """Grid scan with local refinement; vectorized, deterministic."""

    def grid(radius, n_r=10, n_th=24):
        r = np.linspace(0.0, radius, n_r)
        th = np.linspace(0.0, 2 * np.pi, n_th, endpoint=False)
        return (r[:, None] * np.exp(1j * th)[None, :]).ravel()

    alphas = grid(rho * 0.999)
    betas = grid(3.0 * rho * 0.999)
    a_mesh = np.repeat(alphas, betas.size)
    b_mesh = np.tile(betas, alphas.size)
    vals = _fixed_line_system(a_mesh, b_mesh, lam, k)
    best = int(np.argmin(vals))
    a0, b0 = a_mesh[best], b_mesh[best]
    cell_a, cell_b = rho / 8.0, 3 * rho / 8.0
    for _ in range(4):
        da = (np.linspace(-1, 1, 9)[:, None] + 1j * np.linspace(-1, 1, 9)[None, :]).ravel()
        aa = a0 + cell_a * da
        bb = b0 + cell_b * da
        am = np.repeat(aa, bb.size)
        bm = np.tile(bb, aa.size)
        keep = (np.abs(am) < rho) & (np.abs(bm) < 3 * rho)
        am, bm = am[keep], bm[keep]
        v = _fixed_line_system(am, bm, lam, k)
        best = int(np.argmin(v))
        a0, b0 = am[best], bm[best]
        cell_a /= 4.0
        cell_b /= 4.0
    final = float(_fixed_line_system(np.array([a0]), np.array([b0]), lam, k)[0])
    return final, (complex(a0), complex(b0))


def check_preimage_escape(
    lam: complex, rho: float, k: int, precision: str = "auto"
) -> LemmaReport:
    """Backward branches of the nested fiber quadratic leave the trap.

    (a) roots of h^k(s) = t other than +-t must have |s| > rho;
    (b) roots of h^k(s) = -t (points [1:0:...:0:s]) must all have |s| > rho;
    (c) solutions of the degree-2^k boundary polynomial combined with the
        remaining fiber equation yield points [z:1:...:1:s] that must fail
        the trap test.
    A side report records |h^-j(-t)| / |lam|^(1/2^j) for j = 1..k, which the
    asymptotics place in [0.5, 2].
    """
    if lam == 0:
        raise LambdaOutOfRange("lam must be nonzero")
    params = Params(k, lam, rho)
    mode = _resolve_precision(lam, precision)
    extended = mode == "extended"
    with mpmath.workprec(EXTENDED_BITS if extended else DOUBLE_BITS):
        t = _t_fixed(lam, extended)
        lam_s = mpmath.mpc(lam) if extended else complex(lam)

        margins = []
        witnesses = []

        # (a) preimages of the fixed point on the line
        roots_a = _h_preimages(t, lam_s, k, extended)
        excluded = 0
        for s in roots_a:
            if abs(s - t) < 1e-9 or abs(s + t) < 1e-9:
                excluded += 1
                continue
            margins.append(float(abs(s)) - rho)
            witnesses.append({"part": "a", "s": _to_c(s), "margin": margins[-1]})

        # (b) straight fiber preimages of the pre-fixed point
        roots_b = _h_preimages(-t, lam_s, k, extended)
        for s in roots_b:
            margins.append(float(abs(s)) - rho)
            witnesses.append({"part": "b", "s": _to_c(s), "margin": margins[-1]})

        # magnitude asymptotics per backward level
        ratios = {}
        for j in range(1, k + 1):
            level = _h_preimages(-t, lam_s, j, extended)
            scale = abs(lam) ** (1.0 / 2.0**j)
            ratios[j] = sorted(float(abs(s)) / scale for s in level)

    # (c) boundary-polynomial branch, double precision (margins are O(rho))
    zeros_c = _boundary_polynomial_roots(k)
    tt = complex(t)
    for z in zeros_c:
        for u in _h_preimages(-tt, complex(lam), k - 1, False):
            s2 = u * (z - 2.0) ** 2 - complex(lam) * z * z
            s = cmath.sqrt(s2)
            pt = ProjPoint([z] + [1.0] * (k - 1) + [s])
            inside, margin = in_trap(params, pt)
            margins.append(-margin)  # escape margin: positive when outside
            witnesses.append(
                {"part": "c", "z": complex(z), "s": complex(s), "margin": -margin}
            )

    min_margin = float(min(margins))
    ratio_ok = all(0.5 <= r <= 2.0 for rs in ratios.values() for r in rs)
    passed = min_margin > 0.0 and excluded == 2
    return LemmaReport(
        lemma_id="preimage_escape",
        passed=passed,
        min_residual=min_margin,
        witnesses=witnesses,
        precision_used=EXTENDED_BITS if extended else DOUBLE_BITS,
        advisory=abs(lam) > ADVISORY_LAMBDA,
        details={
            "magnitude_ratios": ratios,
            "ratios_in_band": ratio_ok,
            "excluded_roots": excluded,
        },
    )


def _h_preimages(w, lam, depth, extended: bool):
    sqrt = mpmath.sqrt if extended else cmath.sqrt
    level = [w]
    for _ in range(depth):
        nxt = []
        for v in level:
            r = sqrt(v - lam)
            nxt.extend((r, -r))
        level = nxt
    return level


def _boundary_polynomial_roots(k: int) -> np.ndarray:
    """Roots of the case-(c) constraint: the z-slot of the k-fold surface map
    equals the middle slots, expanded as num^2 - den^2 of the nested rational."""
    num = Poly(np.array([4.0, -4.0, -1.0], dtype=np.complex128))  # (z-2)^2 - 2z^2
    den = Poly(np.array([4.0, -4.0, 1.0], dtype=np.complex128))  # (z-2)^2
    for _ in range(k - 2):
        new_num = den * den - Poly(2.0 * (num * num).coeffs)
        new_den = den * den
        scale = float(np.max(np.abs(new_den.coeffs)))
        num = Poly(new_num.coeffs / scale)
        den = Poly(new_den.coeffs / scale)
    eq = num * num - den * den
    return poly_roots(eq)


def check_fixed_point_spectrum(lam: complex, k: int) -> LemmaReport:
    """Spectrum of the chart derivative at the diagonal fixed point.

    One eigenvalue must equal twice the fiber root (within 1e-8) and all the
    others must have modulus within 10|lam| of 4; hyperbolicity additionally
    needs the fiber eigenvalue strictly inside the unit circle.
    """
    if abs(lam) >= ADVISORY_LAMBDA:
        raise LambdaOutOfRange("spectrum check calibrated for |lam| < 0.05")
    from .trapping import default_rho

    params = Params(k, lam, default_rho(lam))
    fmap = PerturbedMap(params)
    p = diagonal_fixed_point(params)
    jac = jacobian_chart(fmap, p)
    eigs = np.linalg.eigvals(jac.matrix)
    target = 2.0 * fiber_fixed_point(lam)
    i_fiber = int(np.argmin(np.abs(eigs - target)))
    fiber_resid = float(np.abs(eigs[i_fiber] - target))
    others = np.delete(eigs, i_fiber)
    mod_dev = float(np.max(np.abs(np.abs(others) - 4.0))) if others.size else 0.0
    margins = [1e-8 - fiber_resid, 10.0 * abs(lam) - mod_dev, 1.0 - abs(target)]
    return LemmaReport(
        lemma_id="fixed_point_spectrum",
        passed=all(m > 0 for m in margins),
        min_residual=float(min(margins)),
        witnesses=[{"eigenvalues": [complex(e) for e in eigs]}],
        precision_used=DOUBLE_BITS,
        details={
            "fiber_eigenvalue_residual": fiber_resid,
            "modulus_deviation": mod_dev,
        },
    )


INVARIANT_SETS = ("fixed_line", "base_hyperplane", "invariant_surface")


def topological_degree_check(
    params: Params, invariant_set_id: str, trials: int = 20, seed: int = 0
) -> LemmaReport:
    """Generic preimage counts on invariant algebraic sets match deg^dim.

    fixed_line: the map restricted to the fixed line has 2 preimages;
    base_hyperplane: the base map has 2^(k-1);
    invariant_surface: the k-th power restricted to the surface has (2^k)^2.
    Targets that hit critical values are redrawn.
    """
    if invariant_set_id not in INVARIANT_SETS:
        raise ValueError(f"unknown invariant set {invariant_set_id!r}")
    rng = generator(seed)
    k = params.k
    counts = []
    for _ in range(trials):
        for _attempt in range(20):
            try:
                counts.append(_degree_trial(params, invariant_set_id, rng))
                break
            except DegenerateTarget:
                continue
        else:
            raise DegenerateTarget("could not draw a generic target")
    expected = {
        "fixed_line": 2,
        "base_hyperplane": 2 ** (k - 1),
        "invariant_surface": (2**k) ** 2,
    }[invariant_set_id]
    worst = max(abs(c - expected) for c in counts)
    return LemmaReport(
        lemma_id=f"degree_{invariant_set_id}",
        passed=worst == 0,
        min_residual=0.5 - worst,
        witnesses=[{"counts": counts, "expected": expected}],
        precision_used=DOUBLE_BITS,
        details={"trials": trials},
    )


def _rand_disc(rng, radius=1.0):
    return radius * np.sqrt(rng.uniform()) * np.exp(2j * np.pi * rng.uniform())


def _degree_trial(params: Params, set_id: str, rng) -> int:
    k = params.k
    fmap = PerturbedMap(params)
    if set_id == "base_hyperplane":
        base = BaseMap(k)
        target = ProjPoint(
            np.array([1.0] + [_rand_disc(rng) for _ in range(k - 1)])
        )
        pre = base.preimages(target)
        if any(m > 1 for _, m in pre):
            raise DegenerateTarget("critical value")
        _forward_check(base, pre, target, 1)
        return sum(m for _, m in pre)
    if set_id == "fixed_line":
        tau = _rand_disc(rng, 0.5)
        target = ProjPoint([1.0] * k + [tau])
        pre = fmap.preimages(target)
        on_line = [(p, m) for p, m in pre if on_fixed_line(p, 1e-8)]
        if any(m > 1 for _, m in on_line):
            raise DegenerateTarget("critical value on the line")
        _forward_check(fmap, on_line, target, 1)
        return sum(m for _, m in on_line)
    # invariant_surface: preimages of the k-th power restricted to the surface
    u, s = _rand_disc(rng), _rand_disc(rng, 0.3)
    target = ProjPoint([u] + [1.0] * (k - 1) + [s])
    layer = [normalize(target).coords]
    for _ in range(k):
        nxt = []
        for c in layer:
            nxt.extend(fmap.enumerate_preimages_hom(c))
        layer = [normalize_rows(np.atleast_2d(c))[0] for c in nxt]
    pts = [ProjPoint(c) for c in layer]
    on_surf = [p for p in pts if in_surface(p, 1e-8)]
    count = 0
    seen: list[ProjPoint] = []
    for p in on_surf:
        if fs_distance(fmap.iterate(p, k), target) > 1e-8:
            raise DegenerateTarget("forward check failed; target too special")
        if any(fs_distance(p, q) < 1e-9 for q in seen):
            raise DegenerateTarget("critical value on the surface")
        seen.append(p)
        count += 1
    return count


def _forward_check(map_, pre, target, n):
    for p, _m in pre:
        if fs_distance(map_.iterate(p, n), target) > 1e-10:
            raise DegenerateTarget("forward check failed")


@dataclass(frozen=True)
class CriticalOrbitReport:
    """How fast critical material locks onto the diagonal cycle."""

    lock_in_steps: dict
    max_diagonal_residual: float
    intersection_final_distance: float
    control_min_distance: float


def critical_orbit_trace(
    k: int, samples: int = 32, iters: int = 12, seed: int = 0
) -> CriticalOrbitReport:
    """Iterate random points of each critical component of the base map.

    Components land on the union of diagonals within 2-3 steps and then cycle
    among them; intersections of critical and diagonal hyperplanes iterate to
    the totally symmetric repelling fixed point.  A random control point must
    not lock on within 3 steps.
    """
    if k < 3:
        raise ValueError("the diagonal cycle needs k >= 3")
    base = BaseMap(k)
    rng = generator(seed)

    def diag_proxy(a: np.ndarray) -> np.ndarray:
        a = normalize_rows(a)
        best = np.full(a.shape[0], np.inf)
        for i in range(k):
            for j in range(i + 1, k):
                best = np.minimum(best, np.abs(a[:, i] - a[:, j]))
        return best

    lock_in = {}
    worst_resid = 0.0
    for comp in range(k):  # comp 0: {z0=0}; comp j: {z0=2zj}
        pts = np.array(
            [[_rand_disc(rng, 1.5) for _ in range(k)] for _ in range(samples)]
        )
        if comp == 0:
            pts[:, 0] = 0.0
        else:
            pts[:, comp] = 1.0
            pts[:, 0] = 2.0
        locked_at = np.full(samples, iters, dtype=int)
        locked = np.zeros(samples, dtype=bool)
        cur = normalize_rows(pts)
        for step in range(1, iters + 1):
            cur = base.apply_batch(cur)
            prox = diag_proxy(cur)
            hit = prox < 1e-10
            locked_at[hit & ~locked] = step
            locked |= hit
            if step >= 3:
                worst_resid = max(worst_resid, float(prox[locked].max(initial=0.0)))
        label = "z0=0" if comp == 0 else f"z0=2z{comp}"
        lock_in[label] = int(locked_at.max())

    # intersections of critical and diagonal hyperplanes drive to [1:...:1]
    inter = []
    for j in range(1, k):
        row = np.full(k, 1.0 + 0j)
        row[0] = 2.0  # {z0=2zj} with zj = 1 and the rest equal
        inter.append(row)
    row = np.full(k, 1.0 + 0j)
    row[0] = 0.0
    inter.append(row)  # {z0=0} meeting the diagonal of the others
    cur = normalize_rows(np.array(inter))
    ones = np.ones(k, dtype=np.complex128) / np.sqrt(k)
    for _ in range(iters):
        cur = base.apply_batch(cur)
    u = cur / np.linalg.norm(cur, axis=1)[:, None]
    ip = np.abs(u @ np.conj(ones)) ** 2
    inter_final = float(np.max(np.sqrt(np.maximum(1.0 - ip, 0.0))))

    control = np.array([[_rand_disc(rng, 1.5) + 0.1 for _ in range(k)]])
    cmin = np.inf
    cur = normalize_rows(control)
    for _ in range(3):
        cur = base.apply_batch(cur)
        cmin = min(cmin, float(diag_proxy(cur)[0]))

    return CriticalOrbitReport(
        lock_in_steps=lock_in,
        max_diagonal_residual=worst_resid,
        intersection_final_distance=inter_final,
        control_min_distance=float(cmin),
    )


def algebraicity_residual(
    chart_points: np.ndarray, max_degree: int
) -> list[tuple[int, float]]:
    """Smallest relative singular value of the monomial evaluation matrix.

    A value below ~1e-8 at degree D witnesses that the sampled points lie on
    an algebraic curve of degree <= D; the attractor slice stays far above.

    Raises:
        InsufficientSamples: if fewer than 10x the monomial count.
    """
    pts = np.asarray(chart_points, dtype=np.complex128)
    need = 10 * (max_degree + 1) * (max_degree + 2) // 2
    if pts.shape[0] < need:
        raise InsufficientSamples(f"need >= {need} points for degree {max_degree}")
    u, s = pts[:, 0], pts[:, 1]
    out = []
    for deg in range(1, max_degree + 1):
        cols = []
        for total in range(deg + 1):
            for i in range(total + 1):
                cols.append((u ** (total - i)) * (s**i))
        mat = np.stack(cols, axis=1)
        mat = mat / np.linalg.norm(mat, axis=0)[None, :]
        sv = np.linalg.svd(mat, compute_uv=False)
        out.append((deg, float(sv[-1] / sv[0])))
    return out


def sample_surface_slice(
    params: Params, n_samples: int, seed: int, burn_in: int = 30
) -> np.ndarray:
    """(n, 2) chart coordinates (z/w, t/w) of surface-attractor orbit points.

    Orbits of the k-th map power started inside the trap on the invariant
    surface; the k-th power preserves the surface, so the collected points
    sample its attractor slice.
    """
    rng = generator(seed)
    fmap = PerturbedMap(params)
    k = params.k
    n_orbits = max(8, n_samples // 64)
    u0 = np.array([_rand_disc(rng) for _ in range(n_orbits)])
    s0 = np.array([_rand_disc(rng) for _ in range(n_orbits)])
    pts = np.ones((n_orbits, k + 1), dtype=np.complex128)
    pts[:, 0] = u0
    pts[:, -1] = s0 * params.rho * 0.9 * np.maximum(np.abs(u0), 1.0)
    pts = fmap.iterate_batch(pts, burn_in * k)
    rows = []
    total = 0
    while total < n_samples:
        pts = fmap.iterate_batch(pts, k)
        # re-pin the middle coordinates: the surface is invariant under the
        # k-th power but not attracting, so roundoff drift must not compound
        pts[:, 1:k] = pts[:, 1:k].mean(axis=1)[:, None]
        good = np.abs(pts[:, 1]) > 1e-9
        sel = pts[good]
        rows.append(np.stack([sel[:, 0] / sel[:, 1], sel[:, -1] / sel[:, 1]], axis=1))
        total += int(good.sum())
    return np.concatenate(rows, axis=0)[:n_samples]
