"""Winding numbers, winding-density statistics, and spectral flows.

The winding number of a realization is extracted from the phase of
det K(p) tracked with unwrapping around the Brillouin zone: eigenvalues
of K(p) may permute over a period, so the determinant is the only safe
invariant object to follow.  The winding number density

    w(p) = tr K(p)^{-1} K'(p)  (the logarithmic derivative of det K(p))

feeds both the density correlators and a consistency check on the phase
route: W = (1/2 pi i) * closed-contour integral of w.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import IO

import numpy as np

from .ensembles import FieldRealization, MatrixField, _log_det_floor, sample_realization
from .oracle import MCEstimate, batch_estimate

__all__ = [
    "NearSingularError",
    "ResolutionError",
    "FlowData",
    "WindingResult",
    "WindingHistogram",
    "winding_density",
    "winding_density_grid",
    "winding_number",
    "flow_trace",
    "write_flow_csv",
    "winding_histogram",
    "corr_mc",
]


class NearSingularError(RuntimeError):
    """det K(p) is numerically too small: an eigenvalue is crossing the contour."""


class ResolutionError(RuntimeError):
    """The momentum grid is too coarse to resolve the total phase winding."""


@dataclass(frozen=True)
class WindingResult:
    """An accepted winding number and the un-rounded phase sum / 2 pi."""

    w_value: int
    raw: float


@dataclass(frozen=True)
class WindingHistogram:
    """Counts of winding numbers plus the number of rejected realizations."""

    counts: dict[int, int]
    rejected: int

    @property
    def total(self) -> int:
        return sum(self.counts.values())


@dataclass(frozen=True)
class FlowData:
    """Determinant track and spectra of H(p) and K(p) on a momentum grid."""

    grid: np.ndarray          # (g,) momenta in [0, 2 pi]
    h_eigs: np.ndarray        # (g, 2n) ascending real eigenvalues of H(p)
    k_eigs: np.ndarray        # (g, n) complex eigenvalues of K(p), sorted
    det_track: np.ndarray     # (g,) complex det K(p)

    def __post_init__(self):
        scale = 1.0 + np.max(np.abs(self.h_eigs))
        if not np.allclose(self.h_eigs, -self.h_eigs[:, ::-1], atol=1e-8 * scale):
            raise ValueError("H(p) spectrum is not symmetric under E -> -E")
        prods = np.prod(self.k_eigs, axis=1)
        if not np.allclose(prods, self.det_track, rtol=1e-8, atol=1e-8 * np.abs(self.det_track).max()):
            raise ValueError("product of K eigenvalues does not match det track")


def _stack_eval(field: MatrixField, real: FieldRealization, ps: np.ndarray, deriv: bool = False):
    """K(p) (or K'(p)) for every p in ps, shape (len(ps), n, n)."""
    if deriv:
        a = np.asarray(field.coeffs.da(ps), dtype=complex)
        b = np.asarray(field.coeffs.db(ps), dtype=complex)
    else:
        a = np.asarray(field.coeffs.a(ps), dtype=complex)
        b = np.asarray(field.coeffs.b(ps), dtype=complex)
    return a[:, None, None] * real.k1 + b[:, None, None] * real.k2


def _det_signs(mats: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Unit-modulus phases and log magnitudes of det, with singularity guard."""
    sign, logmag = np.linalg.slogdet(mats)
    floors = _log_det_floor(mats)
    bad = (sign == 0) | ~np.isfinite(logmag) | (logmag <= floors)
    if np.any(bad):
        raise NearSingularError("det K(p) below the near-singular threshold on the grid")
    return sign, logmag


def winding_density_grid(field: MatrixField, real: FieldRealization, ps) -> np.ndarray:
    """w(p) = tr K(p)^{-1} K'(p) for every p in ps (vectorized)."""
    ps = np.atleast_1d(np.asarray(ps, dtype=float))
    mats = _stack_eval(field, real, ps)
    _det_signs(mats)  # singularity guard
    derivs = _stack_eval(field, real, ps, deriv=True)
    solved = np.linalg.solve(mats, derivs)
    return np.einsum("gii->g", solved)


def winding_density(field: MatrixField, real: FieldRealization, p: float) -> complex:
    """Winding number density at one momentum; near-singular K(p) raises."""
    if real.n != field.n:
        raise ValueError(f"realization dimension {real.n} does not match field dimension {field.n}")
    return complex(winding_density_grid(field, real, [float(p)])[0])


# the largest per-step phase increment accepted before the unwrapping is
# considered at risk of aliasing (a true step > pi is undetectable)
_MAX_PHASE_STEP = 2.5


def _phase_sum(field: MatrixField, real: FieldRealization, grid_size: int) -> tuple[float, float]:
    ps = np.linspace(0.0, 2.0 * np.pi, grid_size + 1)
    sign, _ = _det_signs(_stack_eval(field, real, ps))
    steps = np.angle(sign[1:] / sign[:-1])
    return float(steps.sum() / (2.0 * np.pi)), float(np.max(np.abs(steps)))


def winding_number(field: MatrixField, real: FieldRealization, grid_size: int) -> WindingResult:
    """Winding number of det K(p) via phase unwrapping on a uniform grid.

    Retries once on a 4x finer grid when the accepted-resolution criteria
    fail (raw phase sum too far from an integer, or a single phase step
    large enough to risk aliasing); raises ResolutionError after that.
    """
    if real.n != field.n:
        raise ValueError(f"realization dimension {real.n} does not match field dimension {field.n}")
    grid_size = int(grid_size)
    if grid_size < 16:
        raise ValueError(f"grid_size must be >= 16, got {grid_size}")
    for g in (grid_size, 4 * grid_size):
        raw, max_step = _phase_sum(field, real, g)
        w = int(round(raw))
        if abs(raw - w) <= 1e-3 and max_step <= _MAX_PHASE_STEP:
            return WindingResult(w_value=w, raw=raw)
    raise ResolutionError(
        f"phase winding unresolved at grid {4 * grid_size}: raw={raw}, max step={max_step:.3f}"
    )


def flow_trace(field: MatrixField, real: FieldRealization, grid_size: int) -> FlowData:
    """Spectral flow of H(p) = [[0, K], [K^dagger, 0]] and the det K(p) track.

    The grid has grid_size + 1 points (both endpoints of [0, 2 pi] included).
    """
    if real.n != field.n:
        raise ValueError(f"realization dimension {real.n} does not match field dimension {field.n}")
    if grid_size < 2:
        raise ValueError(f"grid_size must be >= 2, got {grid_size}")
    n = field.n
    ps = np.linspace(0.0, 2.0 * np.pi, int(grid_size) + 1)
    mats = _stack_eval(field, real, ps)
    sign, logmag = np.linalg.slogdet(mats)
    det_track = sign * np.exp(logmag)
    h_eigs = np.empty((len(ps), 2 * n))
    k_eigs = np.empty((len(ps), n), dtype=complex)
    zero = np.zeros((n, n), dtype=complex)
    for j, k in enumerate(mats):
        h = np.block([[zero, k], [k.conj().T, zero]])
        h_eigs[j] = np.linalg.eigvalsh(h)
        k_eigs[j] = np.sort_complex(np.linalg.eigvals(k))
    return FlowData(grid=ps, h_eigs=h_eigs, k_eigs=k_eigs, det_track=det_track)


def write_flow_csv(flow: FlowData, dest: str | IO[str], comments: list[str] | None = None) -> None:
    """Serialize a FlowData to CSV.

    Columns: p, reDet, imDet, h_eig_1..h_eig_2N, then the K(p) eigenvalues
    interleaved as reK_eig_1, imK_eig_1, .., reK_eig_N, imK_eig_N.  Numbers
    use the shortest round-trip decimal representation.  Optional comment
    lines (prefixed '# ') carry provenance.
    """
    two_n = flow.h_eigs.shape[1]
    n = flow.k_eigs.shape[1]
    header = ["p", "reDet", "imDet"]
    header += [f"h_eig_{i}" for i in range(1, two_n + 1)]
    for i in range(1, n + 1):
        header += [f"reK_eig_{i}", f"imK_eig_{i}"]

    def emit(fh: IO[str]) -> None:
        for line in comments or []:
            fh.write(f"# {line}\n")
        fh.write(",".join(header) + "\n")
        for j in range(len(flow.grid)):
            row = [flow.grid[j], flow.det_track[j].real, flow.det_track[j].imag]
            row += list(flow.h_eigs[j])
            for z in flow.k_eigs[j]:
                row += [z.real, z.imag]
            fh.write(",".join(repr(float(x)) for x in row) + "\n")

    if isinstance(dest, str):
        with open(dest, "w", encoding="utf-8") as fh:
            emit(fh)
    else:
        emit(dest)


def winding_histogram(
    field: MatrixField,
    samples: int,
    grid_size: int,
    rng: np.random.Generator,
) -> WindingHistogram:
    """Empirical winding-number distribution over independent realizations.

    Realizations whose winding cannot be resolved (or that hit a
    near-singular grid point) are rejected and counted, never silently
    dropped.
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")
    counts: dict[int, int] = {}
    rejected = 0
    for _ in range(int(samples)):
        real = sample_realization(field, rng)
        try:
            result = winding_number(field, real, grid_size)
        except (NearSingularError, ResolutionError):
            rejected += 1
            continue
        counts[result.w_value] = counts.get(result.w_value, 0) + 1
    return WindingHistogram(counts=counts, rejected=rejected)


def corr_mc(
    field: MatrixField,
    momenta: list[float],
    samples: int,
    rng: np.random.Generator,
    scheme: str = "mom",
    n_batches: int = 32,
    chunk: int = 4096,
    det_floor: float | None = None,
    realization: FieldRealization | None = None,
) -> MCEstimate:
    """Monte Carlo estimate of the k-point density correlator < w(p_1) .. w(p_k) >.

    Samples where any momentum hits a near-singular determinant are skipped
    and counted (skip-and-count policy); more than 1% skips sets the
    unstable-estimate warning.  An injected fixed realization replaces the
    Ginibre sampling (used by deterministic tests).
    """
    momenta = [float(p) for p in momenta]
    if not momenta:
        raise ValueError("momenta must be non-empty")
    if samples < 1:
        raise ValueError("samples must be >= 1")
    n = field.n
    eye = np.eye(n, dtype=complex)
    kept: list[np.ndarray] = []
    skipped = 0
    remaining = int(samples)
    while remaining > 0:
        m = min(chunk, remaining)
        remaining -= m
        if realization is not None:
            if realization.n != n:
                raise ValueError("injected realization has the wrong dimension")
            k1 = np.broadcast_to(realization.k1, (m, n, n))
            k2 = np.broadcast_to(realization.k2, (m, n, n))
        else:
            k1 = rng.standard_normal((m, n, n))
            k2 = rng.standard_normal((m, n, n))
        prod = np.ones(m, dtype=complex)
        ok = np.ones(m, dtype=bool)
        for p in momenta:
            a = complex(field.coeffs.a(p))
            b = complex(field.coeffs.b(p))
            da = complex(field.coeffs.da(p))
            db = complex(field.coeffs.db(p))
            mats = a * k1 + b * k2
            derivs = da * k1 + db * k2
            sign, logmag = np.linalg.slogdet(mats)
            floor = _log_det_floor(mats)
            if det_floor is not None:
                floor = np.maximum(floor, np.log(det_floor))
            good = (sign != 0) & np.isfinite(logmag) & (logmag > floor)
            ok &= good
            safe = np.where(good[:, None, None], mats, eye)
            prod *= np.einsum("gii->g", np.linalg.solve(safe, derivs))
        kept.append(prod[ok])
        skipped += int(m - ok.sum())
    values = np.concatenate(kept)
    if values.size == 0:
        raise RuntimeError("all samples were skipped by the singularity guard")
    warning = ""
    if skipped > 0.01 * samples:
        warning = f"unstable estimate: {skipped}/{samples} samples skipped"
    return batch_estimate(values, n_batches, scheme, skipped=skipped, warning=warning)
