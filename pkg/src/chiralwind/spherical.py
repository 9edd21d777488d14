"""Densities and statistics of the real (induced) spherical ensemble.

The ensemble of Y = K1^{-1} K2 with Gaussian (optionally determinant-
deformed) K1, K2 provides an independent verification channel: its matrix
and joint eigenvalue densities are known in closed form, its averaged
characteristic polynomial is the bare monomial x^n, and the expected number
of real eigenvalues has a simple large-n law.  All Gamma prefactors are
assembled in log space.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import special

from .ensembles import _log_det_floor
from .oracle import MCEstimate, batch_estimate
from .pfassembly import norm_constant, vandermonde
from .quad import QuadConfig, integrate_box, integrate_halfplane
from .specfun import (
    PairWeightParams,
    beta_complete,
    g_complex_weight,
    g_real_weight,
    q_over_m,
)

__all__ = [
    "EigenConfig",
    "classify_real",
    "matrix_density_eval",
    "joint_density_eval",
    "total_probability_n2",
    "char_poly_mc",
    "real_count_stats",
]

# scale-aware threshold below which an eigenvalue's imaginary part is
# attributed to solver noise (noise grows with |z|)
REAL_CLASSIFY_TOL = 1e-8


@dataclass(frozen=True)
class EigenConfig:
    """An eigenvalue configuration on the reduced manifolds.

    The n eigenvalues are partitioned into real values and conjugate pairs;
    each pair is stored once as (x, y) with y > 0 and stands for x +- iy.
    The density never infers this pairing from raw complex lists — callers
    must state which manifold each eigenvalue lives on.
    """

    reals: tuple[float, ...]
    pairs: tuple[tuple[float, float], ...]
    n: int

    def __post_init__(self):
        reals = tuple(float(x) for x in self.reals)
        pairs = tuple((float(x), float(y)) for x, y in self.pairs)
        object.__setattr__(self, "reals", reals)
        object.__setattr__(self, "pairs", pairs)
        object.__setattr__(self, "n", int(self.n))
        if not all(np.isfinite(reals)) or not all(
                np.isfinite(x) and np.isfinite(y) for x, y in pairs):
            raise ValueError("eigenvalues must be finite")
        if any(y <= 0.0 for _, y in pairs):
            raise ValueError("conjugate pairs must have y > 0")
        if self.n % 2 != 0 or self.n < 2:
            raise ValueError(f"n must be even and >= 2, got {self.n}")
        if len(reals) + 2 * len(pairs) != self.n:
            raise ValueError(
                f"{len(reals)} reals + 2*{len(pairs)} paired != n = {self.n}")

    def eigenvalues(self) -> np.ndarray:
        """The full length-n complex eigenvalue list, pairs expanded."""
        out = [complex(x) for x in self.reals]
        for x, y in self.pairs:
            out.extend((complex(x, y), complex(x, -y)))
        return np.asarray(out)


def classify_real(z) -> np.ndarray:
    """Boolean mask of eigenvalues classified as real (scale-aware)."""
    z = np.asarray(z, dtype=complex)
    return np.abs(z.imag) < REAL_CLASSIFY_TOL * (1.0 + np.abs(z))


def matrix_density_eval(y, mu: float = 0.0, nu: float = 0.0) -> float:
    """Matrix probability density of the real induced spherical ensemble.

    pi^{-n^2/2} prod_j Gamma(j/2) Gamma(mu+nu+(n+j)/2) /
    (Gamma(nu+j/2) Gamma(mu+j/2)) * det^{2 nu} Y / det^{n+mu+nu}(1 + Y Y^T),
    evaluated in log space.  Zero (not an error) when nu > 0 and Y is
    singular.
    """
    y = np.asarray(y, dtype=float)
    if y.ndim != 2 or y.shape[0] != y.shape[1]:
        raise ValueError(f"Y must be square, got shape {y.shape}")
    n = y.shape[0]
    log_val = -n * n / 2.0 * np.log(np.pi)
    for j in range(1, n + 1):
        log_val += (special.gammaln(j / 2.0)
                    + special.gammaln(mu + nu + (n + j) / 2.0)
                    - special.gammaln(nu + j / 2.0)
                    - special.gammaln(mu + j / 2.0))
    if nu != 0.0:
        sign, logdet = np.linalg.slogdet(y)
        if sign == 0 or not np.isfinite(logdet):
            return 0.0
        log_val += 2.0 * nu * logdet
    _, logm = np.linalg.slogdet(np.eye(n) + y @ y.T)
    log_val -= (n + mu + nu) * logm
    return float(np.exp(log_val))


def joint_density_eval(cfg: EigenConfig, mu: float = 0.0,
                       nu: float = 0.0) -> float:
    """Joint eigenvalue density C * Delta_n(z) * prod_j g(z_{2j-1}, z_{2j}).

    Real eigenvalues are consumed as consecutive pairs in their given
    order, conjugate pairs as (x+iy, x-iy); the phases of the Vandermonde
    factor and of the conjugate-pair weights cancel, and a residual
    imaginary part above 1e-8 of the magnitude signals an assembly bug.
    """
    params = PairWeightParams(cfg.n, mu, nu)
    val = norm_constant(cfg.n, mu, nu) * vandermonde(cfg.eigenvalues())
    reals = cfg.reals
    for j in range(0, len(reals), 2):
        val *= g_real_weight(reals[j], reals[j + 1], params)
    for x, y in cfg.pairs:
        val *= g_complex_weight(x, y, params)
    if abs(val.imag) > 1e-8 * abs(val):
        raise ArithmeticError(
            f"phase cancellation failed: residual imag {val.imag:.3e} "
            f"on magnitude {abs(val):.3e}")
    return float(val.real)


def total_probability_n2(mu: float = 0.0, nu: float = 0.0,
                         quad_cfg: QuadConfig | None = None) -> float:
    """Total integral of the n = 2 joint density over both manifolds.

    The real-real sector is integrated under x = tan(theta) (the weight
    times the jacobian is a trigonometric polynomial) on the ordered
    triangle mapped to the unit square by a Duffy substitution, then
    doubled; the conjugate-pair sector is the upper half plane, doubled for
    the mirror ordering.  Equals 1 for every admissible (mu, nu).
    """
    cfg = quad_cfg or QuadConfig()
    params = PairWeightParams(2, mu, nu)
    h = params.half_power
    cos_pow = 2.0 * h - 3.0 - 2.0 * nu

    def real_tri(xi, eta):
        th2 = -np.pi / 2.0 + np.pi * xi
        th1 = -np.pi / 2.0 + np.pi * xi * eta
        val = (np.sin(th2 - th1)
               * (np.cos(th1) * np.cos(th2)) ** cos_pow
               * np.pi ** 2 * xi)
        if nu != 0.0:
            val = val * (np.sin(th1) * np.sin(th2)) ** (2.0 * nu)
        return val

    real_part = integrate_box(real_tri, 0.0, 1.0, 0.0, 1.0, cfg)

    def cplx(x, y):
        val = 4.0 * y * q_over_m(x, y, 2, mu, nu)
        if nu != 0.0:
            val = val * (x * x + y * y) ** (2.0 * nu)
        return val

    cplx_part = integrate_halfplane(cplx, cfg)
    if not (real_part.converged and cplx_part.converged):
        raise RuntimeError("normalization quadrature did not converge")
    total = 2.0 * (beta_complete(0.5, h) * real_part.value + cplx_part.value)
    return float((norm_constant(2, mu, nu) * total).real)


def char_poly_mc(x: complex, n: int, samples: int, rng: np.random.Generator,
                 n_batches: int = 32, chunk: int = 20_000) -> MCEstimate:
    """Median-of-means Monte Carlo estimate of <det(x - Y)> over Y draws.

    Y = K1^{-1} K2 is drawn in vectorized chunks with the same singularity
    guard as the one-at-a-time sampler; guarded draws are skipped and
    counted.  The average is the monomial x^n.
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")
    n = int(n)
    x = complex(x)
    kept: list[np.ndarray] = []
    skipped = 0
    remaining = int(samples)
    eye = np.eye(n)
    while remaining > 0:
        m = min(chunk, remaining)
        remaining -= m
        k1 = rng.standard_normal((m, n, n))
        k2 = rng.standard_normal((m, n, n))
        sign, logmag = np.linalg.slogdet(k1)
        good = (sign != 0) & np.isfinite(logmag) & (logmag > _log_det_floor(k1))
        ymat = np.linalg.solve(k1[good], k2[good])
        kept.append(np.linalg.det(x * eye - ymat))
        skipped += int(m - good.sum())
    values = np.concatenate(kept)
    warning = ""
    if skipped > 1e-3 * samples:
        warning = f"unstable estimate: {skipped}/{samples} draws skipped"
    return batch_estimate(values, n_batches, "mom", skipped=skipped,
                          warning=warning)


def real_count_stats(n: int, samples: int, rng: np.random.Generator,
                     n_batches: int = 32, chunk: int = 2000) -> MCEstimate:
    """Mean and standard error of the number of real eigenvalues of Y.

    Eigenvalues come from vectorized spherical draws; the count per draw
    uses the scale-aware classification.  The large-n expectation is
    sqrt(pi n / 2).
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")
    n = int(n)
    counts: list[np.ndarray] = []
    skipped = 0
    remaining = int(samples)
    while remaining > 0:
        m = min(chunk, remaining)
        remaining -= m
        k1 = rng.standard_normal((m, n, n))
        k2 = rng.standard_normal((m, n, n))
        sign, logmag = np.linalg.slogdet(k1)
        good = (sign != 0) & np.isfinite(logmag) & (logmag > _log_det_floor(k1))
        eigs = np.linalg.eigvals(np.linalg.solve(k1[good], k2[good]))
        counts.append(classify_real(eigs).sum(axis=1).astype(float))
        skipped += int(m - good.sum())
    values = np.concatenate(counts)
    return batch_estimate(values, n_batches, "mean", skipped=skipped)
