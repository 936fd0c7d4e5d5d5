"""Dense univariate complex polynomials and a simultaneous root finder."""

from dataclasses import dataclass

import numpy as np

from .errors import NoConvergence

@dataclass(frozen=True, eq=False)
class Poly:
    """Dense polynomial, coefficients lowest degree first.

    Exact-zero leading coefficients are trimmed; small ones are kept, since
    the nested-map polynomials legitimately span hundreds of orders of
    magnitude.
    """

    coeffs: np.ndarray

    def __post_init__(self):
        c = np.atleast_1d(np.asarray(self.coeffs, dtype=np.complex128))
        nz = np.nonzero(c)[0]
        c = c[: int(nz[-1]) + 1] if nz.size else c[:1]
        object.__setattr__(self, "coeffs", c)

    @property
    def degree(self) -> int:
        return self.coeffs.size - 1

    def __call__(self, x):
        x = np.asarray(x, dtype=np.complex128)
        acc = np.zeros_like(x)
        for c in self.coeffs[::-1]:
            acc = acc * x + c
        return acc if acc.ndim else complex(acc)

    def derivative(self) -> "Poly":
        if self.degree == 0:
            return Poly(np.zeros(1))
        n = np.arange(1, self.coeffs.size)
        return Poly(self.coeffs[1:] * n)

    def __mul__(self, other: "Poly") -> "Poly":
        return Poly(np.convolve(self.coeffs, other.coeffs))

    def __add__(self, other: "Poly") -> "Poly":
        n = max(self.coeffs.size, other.coeffs.size)
        a = np.zeros(n, dtype=np.complex128)
        a[: self.coeffs.size] = self.coeffs
        a[: other.coeffs.size] += other.coeffs
        return Poly(a)

    def __sub__(self, other: "Poly") -> "Poly":
        return self + Poly(-other.coeffs)

    def scaled(self) -> "Poly":
        return Poly(self.coeffs / np.max(np.abs(self.coeffs)))

    @classmethod
    def from_roots(cls, roots) -> "Poly":
        c = np.array([1.0 + 0j])
        for r in roots:
            c = np.convolve(c, np.array([-r, 1.0 + 0j]))
        return cls(c)

    @classmethod
    def x(cls) -> "Poly":
        return cls(np.array([0.0, 1.0 + 0j]))

    @classmethod
    def const(cls, value) -> "Poly":
        return cls(np.array([value], dtype=np.complex128))


def poly_roots(
    p: Poly, max_sweeps: int = 600, tol: float = 1e-13
) -> np.ndarray:
    """All roots with multiplicity via Aberth-Ehrlich simultaneous iteration.

    Roots at the origin are deflated exactly; the rest start on a circle at
    the geometric-mean modulus estimate.  Outside the unit disc the Newton
    ratio is evaluated through the reversed polynomial at 1/x, so nothing
    overflows at high degree.  Clustered copies of a multiple root converge
    to the usual eps^(1/m) blur and are all returned.

    Raises:
        NoConvergence: if roots have not stabilized within the sweep budget.
    """
    c = p.scaled().coeffs
    if c.size < 2:
        raise ValueError("degree must be >= 1")
    nz = np.nonzero(np.abs(c) > 0)[0]
    n_zero_roots = int(nz[0])
    c = c[n_zero_roots:]
    deg = c.size - 1
    if deg == 0:
        return np.zeros(n_zero_roots, dtype=np.complex128)

    radius = float(np.clip((np.abs(c[0]) / np.abs(c[-1])) ** (1.0 / deg), 0.3, 3.0))
    angles = 2.0 * np.pi * np.arange(deg) / deg + 0.4
    roots = radius * np.exp(1j * angles) * (1.0 + 0.05 * np.cos(7 * angles))

    for _ in range(max_sweeps):
        newton, backward = _newton_ratio(c, roots)
        diff = roots[:, None] - roots[None, :]
        np.fill_diagonal(diff, np.inf)
        rep = np.sum(1.0 / diff, axis=1)
        denom = 1.0 - newton * rep
        step = newton / np.where(np.abs(denom) < 1e-300, 1e-300, denom)
        # tiny Aberth step, or a multiple-root cluster (backward error at
        # rounding level while steps stall at the eps^(1/m) blur radius)
        done = (np.abs(step) < tol * (1.0 + np.abs(roots))) | (
            (backward < 1e-15) & (np.abs(step) < 1e-5 * (1.0 + np.abs(roots)))
        )
        roots = np.where(done, roots, roots - step)
        if bool(np.all(done)):
            break

    # plain Newton polish; wide-range coefficients can stall the collective
    # sweep just above the step tolerance without hurting final accuracy
    for _ in range(6):
        newton, _ = _newton_ratio(c, roots)
        newton = np.where(np.isfinite(newton), newton, 0.0)
        roots = roots - newton
    newton, backward = _newton_ratio(c, roots)
    settled = (np.abs(newton) < 1e-6 * (1.0 + np.abs(roots))) | (backward < 1e-13)
    if not bool(np.all(settled)):
        raise NoConvergence("Aberth iteration exhausted its sweep budget")

    return np.concatenate([np.zeros(n_zero_roots, dtype=np.complex128), roots])


def _newton_ratio(c: np.ndarray, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """p(x)/p'(x) and the relative backward error, overflow-free.

    For |x| > 1 uses p(x) = x^deg q(1/x) with q the reversed coefficients:
    p'/p = deg/x - q'(u)/(q(u) x^2), u = 1/x.
    """
    deg = c.size - 1
    newton = np.empty_like(x)
    backward = np.empty(x.shape, dtype=np.float64)

    inner = np.abs(x) <= 1.0
    if np.any(inner):
        xi = x[inner]
        pv = _horner(c, xi)
        dv = _horner(Poly(c).derivative().coeffs, xi)
        scale = _horner(np.abs(c).astype(np.complex128), np.abs(xi).astype(np.complex128)).real
        backward[inner] = np.abs(pv) / np.maximum(scale, 1e-300)
        dv = np.where(np.abs(dv) < 1e-300, 1e-300, dv)
        newton[inner] = pv / dv
    if np.any(~inner):
        xo = x[~inner]
        u = 1.0 / xo
        q = c[::-1]
        qv = _horner(q, u)
        qdv = _horner(Poly(q).derivative().coeffs, u)
        scale = _horner(np.abs(q).astype(np.complex128), np.abs(u).astype(np.complex128)).real
        backward[~inner] = np.abs(qv) / np.maximum(scale, 1e-300)
        qv = np.where(np.abs(qv) < 1e-300, 1e-300, qv)
        ratio = deg / xo - qdv / (qv * xo * xo)  # p'/p
        ratio = np.where(np.abs(ratio) < 1e-300, 1e-300, ratio)
        newton[~inner] = 1.0 / ratio
    return newton, backward


def _horner(coeffs: np.ndarray, x: np.ndarray) -> np.ndarray:
    acc = np.zeros_like(x)
    for c in coeffs[::-1]:
        acc = acc * x + c
    return acc


def nested_quadratic_poly(lam: complex, n: int) -> Poly:
    """The n-fold composition of x -> x^2 + lam, expanded in x (degree 2^n)."""
    p = Poly(np.array([lam, 0.0, 1.0], dtype=np.complex128))
    for _ in range(n - 1):
        p = p * p + Poly.const(lam)
    return p


def _int_mul(a: list, b: list) -> list:
    out = [0] * (len(a) + len(b) - 1)
    for i, ai in enumerate(a):
        if ai:
            for j, bj in enumerate(b):
                if bj:
                    out[i + j] += ai * bj
    return out


def _int_sub(a: list, b: list) -> list:
    out = [0] * max(len(a), len(b))
    for i, v in enumerate(a):
        out[i] += v
    for i, v in enumerate(b):
        out[i] -= v
    while len(out) > 1 and out[-1] == 0:
        out.pop()
    return out


def cycle_polynomial_exact(n: int) -> list:
    """Integer coefficients of the line fixed-point polynomial x D_n - N_n.

    The chart map x -> 1/(1-2x)^2 is iterated as an exact rational pair
    (N, D) with N' = D^2 and D' = (D - 2N)^2, so nothing rounds; the result
    has degree 2^n + 1 and coefficients spanning hundreds of digits by n=10.
    """
    num, den = [1], [1, -4, 4]
    for _ in range(n - 1):
        new_num = _int_mul(den, den)
        inner = _int_sub(den, [2 * v for v in num])
        num, den = new_num, _int_mul(inner, inner)
    return _int_sub([0] + den, num)


def cycle_count_oracle(n: int) -> tuple[int, bool]:
    """(degree, squarefree) of the exact fixed-point polynomial.

    The degree counts line fixed points of the n-th iterate with
    multiplicity (the chart's infinity is never periodic); squarefreeness
    over the rationals is certified by gcd(p, p') = 1 over a prime field,
    which can only overestimate the true gcd degree when the leading
    coefficients survive the reduction (checked).
    """
    coeffs = cycle_polynomial_exact(n)
    degree = len(coeffs) - 1
    q = (1 << 61) - 1  # Mersenne prime, comfortably above any small factor
    a = [v % q for v in coeffs]
    b = [(i * v) % q for i, v in enumerate(coeffs)][1:]
    if a[-1] % q == 0 or b[-1] % q == 0:
        raise NoConvergence("leading coefficient vanished mod the test prime")
    gcd_deg = _gf_gcd_degree(a, b, q)
    return degree, gcd_deg == 0


def _gf_gcd_degree(a: list, b: list, q: int) -> int:
    def trim(v):
        while len(v) > 1 and v[-1] == 0:
            v.pop()
        return v

    a, b = trim(list(a)), trim(list(b))
    while len(b) > 1 or b[0] != 0:
        inv = pow(b[-1], q - 2, q)
        while len(a) >= len(b):
            factor = (a[-1] * inv) % q
            shift = len(a) - len(b)
            for i, bv in enumerate(b):
                a[i + shift] = (a[i + shift] - factor * bv) % q
            a = trim(a)
            if len(a) == 1 and a[0] == 0:
                break
        a, b = b, a
        b = trim(b)
        if len(b) == 1 and b[0] == 0:
            break
    return len(a) - 1


def base_cycle_polynomial(n: int) -> Poly:
    """Float version of the fixed-point polynomial, scaled to unit max coeff.

    Valid for n <= 9; beyond that the exact coefficients span more than
    double precision's exponent range and only cycle_count_oracle applies.
    """
    coeffs = cycle_polynomial_exact(n)
    top = max(abs(v) for v in coeffs)
    vals = np.array([v / top for v in coeffs], dtype=np.float64)
    if not np.all(np.isfinite(vals)) or any(
        v != 0 and f == 0.0 for v, f in zip(coeffs, vals)
    ):
        raise NoConvergence(f"n={n} coefficients exceed double exponent range")
    return Poly(vals.astype(np.complex128))
