"""Scalar special functions and eigenvalue-pair weight densities.

The analytic route rewrites every determinant-ratio average as integrals of
eigenvalue pairs against a joint weight with two branches: pairs of real
points, and complex-conjugate pairs.  This module provides the scalar
building blocks: complete/incomplete Beta functions, the conjugate-pair
factor ``Q``, the reduced densities ``g_real_weight`` / ``g_complex_weight``
on the two manifolds (the delta functions collapsed analytically — they are
never discretized), generalized binomials, a truncated Gauss hypergeometric
series, and the one-dimensional ``r`` and pointwise ``s`` functions entering
the third kernel.

Conventions fixed here and relied on everywhere: ``sgn(0) = 0`` (coincident
points carry zero weight), and the conjugate-pair phase ``|z2-z1|/(z2-z1)``
collapses to ``i*sgn(Im z)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import special

from .quad import QuadConfig, integrate_1d, integrate_1d_pv


@dataclass(frozen=True)
class PairWeightParams:
    """Exponents of the pair weight: matrix size ``n`` (even) and the
    induced-ensemble exponents ``mu``, ``nu`` (both 0 for the main results)."""

    n: int
    mu: float = 0.0
    nu: float = 0.0

    def __post_init__(self):
        if self.n < 2 or self.n % 2:
            raise ValueError(f"n must be even and >= 2, got {self.n}")
        if self.mu < 0 or self.nu < 0:
            raise ValueError("mu and nu must be nonnegative")

    @property
    def half_power(self) -> float:
        """The exponent (n/2 + mu + nu + 1/2) of the pair weight."""
        return 0.5 * self.n + self.mu + self.nu + 0.5


@dataclass(frozen=True)
class Vector2C:
    """One coefficient vector v(p) = (a(p), b(p))."""

    a: complex
    b: complex

    def __post_init__(self):
        if self.a == 0 and self.b == 0:
            raise ValueError("coefficient vector must be nonzero")

    def as_tuple(self) -> tuple[complex, complex]:
        return (self.a, self.b)


def _ab(v) -> tuple[complex, complex]:
    """Accept Vector2C or any (a, b) pair."""
    if isinstance(v, Vector2C):
        return v.a, v.b
    a, b = v
    return complex(a), complex(b)


def sgn(x) -> np.ndarray:
    """Sign with sgn(0) = 0."""
    return np.sign(x)


def beta_complete(a: float, b: float) -> float:
    """B(a, b) = Gamma(a)Gamma(b)/Gamma(a+b), via log-Gamma."""
    if a <= 0 or b <= 0:
        raise ValueError(f"beta_complete requires positive arguments, got ({a}, {b})")
    return float(np.exp(special.gammaln(a) + special.gammaln(b)
                        - special.gammaln(a + b)))


def beta_inc_upper(x, a: float, b: float, complement=None):
    """Upper-tail incomplete Beta: int_x^1 t^{a-1}(1-t)^{b-1} dt.

    ``complement`` may supply 1-x directly when the caller has it in a
    cancellation-free form (the conjugate-pair factor does).
    """
    if a <= 0 or b <= 0:
        raise ValueError("beta parameters must be positive")
    if complement is None:
        x = np.asarray(x, dtype=float)
        if np.any(x < -1e-15) or np.any(x > 1 + 1e-15):
            raise ValueError("beta_inc_upper argument must lie in [0, 1]")
        complement = 1.0 - np.clip(x, 0.0, 1.0)
    complement = np.clip(np.asarray(complement, dtype=float), 0.0, 1.0)
    out = beta_complete(a, b) * special.betainc(b, a, complement)
    return float(out) if out.ndim == 0 else out


def q_factor(z, params: PairWeightParams):
    """Conjugate-pair factor Q(z, z*): upper-tail Beta at 4y^2/(|1+z^2|^2+4y^2).

    Finite for all z; vanishes at z = +-i (where the weight's denominator
    also vanishes — consumers near that point use ``q_over_m``).
    """
    z = np.asarray(z, dtype=complex)
    x, y = z.real, z.imag
    m2 = (1.0 + x * x - y * y) ** 2 + 4.0 * x * x * y * y
    comp = m2 / (m2 + 4.0 * y * y)
    out = beta_inc_upper(None, 0.5, params.half_power, complement=comp)
    return float(out) if np.ndim(out) == 0 else out


def q_over_m(x, y, n: int, mu: float = 0.0, nu: float = 0.0):
    """The ratio Q(z,z*) / |1+z^2|^{2*half_power} with its removable limit.

    Both factors vanish at z = +-i; within |1+z^2| < 2e-8 of those points
    (an exclusion disc of radius about 1e-8) the finite limit
    (1/(m^2+4y^2))^h / h is used, which joins the exact value to relative
    accuracy ~1e-16 at the disc edge.
    """
    params = PairWeightParams(n, mu, nu)
    h = params.half_power
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    m2 = (1.0 + x * x - y * y) ** 2 + 4.0 * x * x * y * y
    denom = m2 + 4.0 * y * y
    near = m2 < 4e-16
    m2_safe = np.where(near, 1.0, m2)
    comp = np.where(near, 0.5, m2 / denom)
    q = beta_complete(0.5, h) * special.betainc(h, 0.5, comp)
    regular = q / m2_safe ** h
    limit = (1.0 / denom) ** h / h
    out = np.where(near, limit, regular)
    return float(out) if out.ndim == 0 else out


def g_real_weight(x1, x2, params: PairWeightParams):
    """Density of the pair weight on the real-real manifold.

    (x1 x2)^{2 nu} * sgn(x2-x1) * B(1/2, h) / [(1+x1^2)(1+x2^2)]^h
    with h = n/2 + mu + nu + 1/2; antisymmetric, zero at coincident points.
    """
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    h = params.half_power
    out = (beta_complete(0.5, h) * np.sign(x2 - x1)
           / ((1.0 + x1 * x1) * (1.0 + x2 * x2)) ** h)
    if params.nu != 0.0:
        out = out * (x1 * x2) ** (2.0 * params.nu)
    return float(out) if np.ndim(out) == 0 else out


def g_complex_weight(x, y, params: PairWeightParams):
    """Density of the pair weight on the conjugate-pair manifold z = x+iy.

    After collapsing the two delta functions the pair (z, z*) carries
    i*sgn(y) * 2 * (z z*)^{2 nu} * Q(z,z*) / |1+z^2|^{2h} per d^2z.
    Purely imaginary for nu = 0; odd under y -> -y.
    """
    y_arr = np.asarray(y, dtype=float)
    if np.any(y_arr == 0.0):
        raise ValueError("g_complex_weight is defined off the real axis only "
                         "(y = 0 pairs belong to g_real_weight)")
    x = np.asarray(x, dtype=float)
    out = 2j * np.sign(y_arr) * q_over_m(x, y_arr, params.n, params.mu, params.nu)
    if params.nu != 0.0:
        out = out * (x * x + y_arr * y_arr) ** (2.0 * params.nu)
    return complex(out) if np.ndim(out) == 0 else out


def gen_binom(alpha: float, k: int) -> float:
    """Generalized binomial coefficient: alpha(alpha-1)...(alpha-k+1)/k!."""
    if k < 0:
        raise ValueError("gen_binom requires k >= 0")
    return float(special.binom(alpha, k))


def hyp2f1_series(a: float, b: float, c: float, x: complex,
                  rel_tol: float = 1e-12, max_terms: int = 100000) -> complex:
    """Gauss hypergeometric 2F1 by direct power series, |x| < 1 only."""
    if abs(x) >= 1.0:
        raise ValueError("hyp2f1_series requires |x| < 1")
    if c <= 0 and float(c).is_integer():
        raise ValueError("c must not be a nonpositive integer")
    total = 1.0 + 0.0j
    term = 1.0 + 0.0j
    for k in range(max_terms):
        term = term * (a + k) * (b + k) / ((c + k) * (k + 1)) * x
        total += term
        if abs(term) <= rel_tol * max(abs(total), 1.0):
            return complex(total)
    raise ArithmeticError("hyp2f1_series did not converge")


def r_func(x: float, v, params: PairWeightParams,
           quad_cfg: QuadConfig | None = None) -> complex:
    """The function r(x, v) of the third kernel:

    B(1/2, h) * int dx' sgn(x'-x) / ((a+b x') [(1+x^2)(1+x'^2)]^h).

    When the pole x' = -a/b is real, the inner integral is a principal
    value.  Log-divergent only when the pole coincides with the sign
    breakpoint x itself (rejected).
    """
    quad_cfg = quad_cfg or QuadConfig()
    a, b = _ab(v)
    h = params.half_power
    x = float(x)

    def integrand(t):
        return 1.0 / ((a + b * t) * (1.0 + t * t) ** h)

    pole = None
    if b != 0:
        t0 = -a / b
        if abs(t0.imag) < 1e-14 * (1.0 + abs(t0.real)):
            pole = t0.real
    if pole is not None and abs(pole - x) < 1e-12 * (1.0 + abs(x)):
        raise ValueError(
            f"r_func is log-divergent: pole {pole} coincides with x = {x}")

    if pole is not None and pole > x:
        upper = integrate_1d_pv(integrand, pole, x, np.inf, quad_cfg)
    else:
        upper = integrate_1d(integrand, x, np.inf, quad_cfg)
    if pole is not None and pole < x:
        lower = integrate_1d_pv(integrand, pole, -np.inf, x, quad_cfg)
    else:
        lower = integrate_1d(integrand, -np.inf, x, quad_cfg)

    prefactor = beta_complete(0.5, h) / (1.0 + x * x) ** h
    return prefactor * (upper.value - lower.value)


def s_func(z, v, params: PairWeightParams):
    """The pointwise function s(z, z*, v) of the third kernel:

    2i sgn(Im z) Q(z,z*) / ((a + b z*) |1+z^2|^{2h}).

    Zero on the real axis (sgn(0) = 0).  A scalar z exactly on the pole
    a + b z* = 0 raises; quadrature callers route patches around the pole.
    """
    a, b = _ab(v)
    z = np.asarray(z, dtype=complex)
    den = a + b * np.conj(z)
    if z.ndim == 0 and den == 0:
        raise ValueError(f"s_func pole: a + b*conj(z) = 0 at z = {complex(z)}")
    out = (2j * np.sign(z.imag)
           * q_over_m(z.real, z.imag, params.n, params.mu, params.nu) / den)
    return complex(out) if out.ndim == 0 else out
