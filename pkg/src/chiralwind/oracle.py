"""Monte Carlo estimators for determinant averages and comparison reports.

Averages of determinant ratios have heavy-tailed sample distributions
(the denominators can come arbitrarily close to zero), so the default
estimator is median-of-means over >= 32 batches; numerator-only averages
may use the plain batched mean.  Every estimate carries its sample and
batch counts, the estimation scheme, and skip accounting, so comparisons
against analytic values are fully reproducible.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .ensembles import MatrixField, _log_det_floor

__all__ = [
    "MCEstimate",
    "Report",
    "batch_estimate",
    "mc_ratio_estimate",
    "compare",
    "validate_suite",
]

# stderr of a median relative to the mean for near-normal batch means
_MEDIAN_INFLATION = float(np.sqrt(np.pi / 2.0))

# absolute tolerance floor used by compare() for values pinned near exact numbers
PASS_ABS_FLOOR = 1e-3


@dataclass(frozen=True)
class MCEstimate:
    """A Monte Carlo estimate with full bookkeeping.

    scheme is "mean" (plain batched mean) or "mom" (median-of-means);
    n_batches always divides n_samples (excess samples are dropped).
    skipped counts samples rejected by the singularity guard, and warning
    carries the unstable-estimate flag when the skip fraction is large.
    """

    mean: complex
    stderr: float
    n_samples: int
    n_batches: int
    scheme: str
    skipped: int = 0
    warning: str = ""

    def __post_init__(self):
        if self.scheme not in ("mean", "mom"):
            raise ValueError(f"scheme must be 'mean' or 'mom', got {self.scheme!r}")
        if self.stderr < 0:
            raise ValueError("stderr must be >= 0")
        if self.n_batches < 1 or self.n_samples % self.n_batches != 0:
            raise ValueError("n_batches must be >= 1 and divide n_samples")


@dataclass(frozen=True)
class Report:
    """Statistical comparison of an analytic value against an MC estimate."""

    label: str
    analytic: complex
    err_est: float
    mc: MCEstimate
    abs_diff: float
    sigma_combined: float
    passed: bool

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "analytic": {"re": float(np.real(self.analytic)), "im": float(np.imag(self.analytic))},
            "err_est": self.err_est,
            "mc": {
                "mean": {"re": float(np.real(self.mc.mean)), "im": float(np.imag(self.mc.mean))},
                "stderr": self.mc.stderr,
                "n_samples": self.mc.n_samples,
                "n_batches": self.mc.n_batches,
                "scheme": self.mc.scheme,
                "skipped": self.mc.skipped,
                "warning": self.mc.warning,
            },
            "abs_diff": self.abs_diff,
            "sigma_combined": self.sigma_combined,
            "pass": self.passed,
        }


def batch_estimate(
    values: np.ndarray,
    n_batches: int,
    scheme: str,
    skipped: int = 0,
    warning: str = "",
) -> MCEstimate:
    """Batched estimate of the mean of a 1-d sample array.

    "mean": mean of batch means with the usual standard error.
    "mom": componentwise median of batch means; the standard error is
    inflated by sqrt(pi/2), the asymptotic penalty of a median.
    """
    values = np.asarray(values).ravel()
    if values.size == 0:
        raise ValueError("no samples left to estimate from")
    n_batches = int(min(n_batches, values.size))
    n_used = (values.size // n_batches) * n_batches
    batches = values[:n_used].reshape(n_batches, -1).mean(axis=1)
    var = 0.0
    if n_batches > 1:
        var = batches.real.var(ddof=1) + batches.imag.var(ddof=1)
    base_err = float(np.sqrt(var / n_batches))
    if scheme == "mom":
        mean = complex(np.median(batches.real), np.median(batches.imag))
        stderr = _MEDIAN_INFLATION * base_err
    elif scheme == "mean":
        mean = complex(batches.mean())
        stderr = base_err
    else:
        raise ValueError(f"scheme must be 'mean' or 'mom', got {scheme!r}")
    return MCEstimate(
        mean=mean,
        stderr=stderr,
        n_samples=n_used,
        n_batches=n_batches,
        scheme=scheme,
        skipped=skipped,
        warning=warning,
    )


def _field_matrices(field: MatrixField, k1: np.ndarray, k2: np.ndarray, p: float) -> np.ndarray:
    """K(p) for a stack of realizations: k1, k2 have shape (m, n, n)."""
    a = complex(field.coeffs.a(p))
    b = complex(field.coeffs.b(p))
    return a * k1 + b * k2


def mc_ratio_estimate(
    field: MatrixField,
    q: list[float],
    p: list[float],
    samples: int,
    rng: np.random.Generator,
    scheme: str = "mom",
    n_batches: int = 32,
    chunk: int = 20_000,
    det_floor: float | None = None,
) -> MCEstimate:
    """Monte Carlo estimate of < prod_j det K(p_j) / prod_m det K(q_m) >.

    Samples with a numerically singular denominator factor are skipped and
    counted; a skip fraction above 0.1% is reported in the warning field.
    det_floor adds an absolute magnitude floor on denominator determinants
    on top of the scale-aware threshold (used to exercise skip accounting).
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")
    # identical momenta shared by numerator and denominator cancel exactly
    # per sample (det K / det K of the same matrix), so peel them off first;
    # q = p then gives literally 1 with zero spread
    q = [float(x) for x in q]
    p_reduced: list[float] = []
    q_reduced = list(q)
    for pj in (float(x) for x in p):
        if pj in q_reduced:
            q_reduced.remove(pj)
        else:
            p_reduced.append(pj)
    p, q = p_reduced, q_reduced
    n = field.n
    kept: list[np.ndarray] = []
    skipped = 0
    remaining = int(samples)
    while remaining > 0:
        m = min(chunk, remaining)
        remaining -= m
        k1 = rng.standard_normal((m, n, n))
        k2 = rng.standard_normal((m, n, n))
        values = np.ones(m, dtype=complex)
        ok = np.ones(m, dtype=bool)
        for pj in p:
            values *= np.linalg.det(_field_matrices(field, k1, k2, pj))
        for qm in q:
            mats = _field_matrices(field, k1, k2, qm)
            sign, logmag = np.linalg.slogdet(mats)
            floor = _log_det_floor(mats)
            if det_floor is not None:
                floor = np.maximum(floor, np.log(det_floor))
            good = (sign != 0) & np.isfinite(logmag) & (logmag > floor)
            ok &= good
            # divide by the direct determinant (slogdet is only the guard) so
            # that q = p cancels bit-exactly to 1
            dets = np.where(good, np.linalg.det(mats), 1.0)
            values /= dets
        kept.append(values[ok])
        skipped += int(m - ok.sum())
    all_values = np.concatenate(kept)
    if all_values.size == 0:
        raise RuntimeError("all samples were skipped by the singularity guard")
    warning = ""
    if skipped > 0.001 * samples:
        warning = f"unstable estimate: {skipped}/{samples} samples skipped"
    return batch_estimate(all_values, n_batches, scheme, skipped=skipped, warning=warning)


def compare(
    analytic: complex,
    err_est: float,
    mc: MCEstimate,
    label: str = "",
    abs_floor: float = PASS_ABS_FLOOR,
) -> Report:
    """Pass/fail report: |analytic - mc| <= max(3 sigma_combined, abs_floor)."""
    abs_diff = float(abs(complex(analytic) - complex(mc.mean)))
    sigma = float(np.hypot(float(err_est), mc.stderr))
    passed = abs_diff <= max(3.0 * sigma, abs_floor)
    return Report(
        label=label,
        analytic=complex(analytic),
        err_est=float(err_est),
        mc=mc,
        abs_diff=abs_diff,
        sigma_combined=sigma,
        passed=passed,
    )


def validate_suite(master_seed: int = 20260814, budget_scale: float = 1.0) -> list[Report]:
    """Cross-validation suite: every analytic claim against an MC or quadrature oracle.

    Delegates to the validation module (imported lazily to keep this module
    free of heavy dependencies); returns one Report per claim.
    """
    from . import validation

    return validation.run_suite(master_seed=master_seed, budget_scale=budget_scale)
