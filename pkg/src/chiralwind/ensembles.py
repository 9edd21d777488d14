"""Gaussian random-matrix ensembles and parametric matrix fields.

The two building blocks of every computation in this package live here:
real Ginibre matrices (square matrices with i.i.d. standard normal
entries) and the two-coefficient matrix field

    K(p) = a(p) * K1 + b(p) * K2,

where ``v(p) = (a(p), b(p))`` is a pair of (generally complex) coefficient
functions with real Fourier coefficients, so that ``v(-p) = conj(v(p))``
and K(p) is real at p = 0 and p = pi.  The quotient Y = K1^{-1} K2 of two
independent Ginibre matrices (the real spherical ensemble) is sampled
here as well.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "rng_stream",
    "sample_ginibre",
    "TrigCoeffs",
    "FourierCoeffs",
    "MatrixField",
    "FieldRealization",
    "sample_realization",
    "field_eval",
    "field_deriv",
    "sample_spherical",
]


def rng_stream(master_seed: int, *key: int) -> np.random.Generator:
    """Independent random stream derived from a master seed and task indices.

    Streams with distinct ``key`` tuples are statistically independent, so
    parallel tasks can be seeded as ``rng_stream(seed, task_index)`` and a
    run is reproducible from the master seed alone.
    """
    ss = np.random.SeedSequence(int(master_seed), spawn_key=tuple(int(k) for k in key))
    return np.random.default_rng(ss)


def sample_ginibre(n: int, rng: np.random.Generator) -> np.ndarray:
    """One n-by-n real Ginibre matrix: i.i.d. N(0, 1) entries."""
    n = int(n)
    if n < 1:
        raise ValueError(f"matrix dimension must be >= 1, got {n}")
    return rng.standard_normal((n, n))


class TrigCoeffs:
    """Coefficient pair a(p) = cos p, b(p) = i sin p.

    This is the minimal field with winding: det K(p) winds N times for
    K1 = K2 = 1.  v(p) lies on the complexified unit circle,
    v^T(p) v(q) = cos(p + q).
    """

    def a(self, p):
        return np.cos(p) + 0j

    def b(self, p):
        return 1j * np.sin(p)

    def da(self, p):
        return -np.sin(p) + 0j

    def db(self, p):
        return 1j * np.cos(p)

    def to_spec(self) -> dict:
        return {"type": "trig"}

    def __repr__(self) -> str:
        return "TrigCoeffs()"

    def __eq__(self, other) -> bool:
        return isinstance(other, TrigCoeffs)

    def __hash__(self) -> int:
        return hash("TrigCoeffs")


def _fourier_sum(coeffs: tuple[float, ...], p, deriv: bool) -> np.ndarray | complex:
    """Evaluate sum_j c_j e^{i(j-1)p} (or its p-derivative) vectorized in p."""
    c = np.asarray(coeffs, dtype=float)
    j = np.arange(len(c))
    w = c * (1j * j) if deriv else c.astype(complex)
    p_arr = np.asarray(p, dtype=float)
    phases = np.exp(1j * np.multiply.outer(p_arr, j))
    out = phases @ w
    if np.ndim(p) == 0:
        return complex(out)
    return out


@dataclass(frozen=True)
class FourierCoeffs:
    """Real trigonometric-polynomial coefficients.

    a(p) = sum_j a_coeffs[j-1] e^{i(j-1)p} and likewise b(p).  Real
    coefficients enforce the time-reversal constraint v(-p) = conj(v(p)).
    """

    a_coeffs: tuple[float, ...]
    b_coeffs: tuple[float, ...]

    def __post_init__(self):
        for name in ("a_coeffs", "b_coeffs"):
            vals = tuple(float(x) for x in getattr(self, name))
            if len(vals) == 0:
                raise ValueError(f"{name} must be non-empty")
            if not all(np.isfinite(vals)):
                raise ValueError(f"{name} must be finite")
            object.__setattr__(self, name, vals)

    def a(self, p):
        return _fourier_sum(self.a_coeffs, p, deriv=False)

    def b(self, p):
        return _fourier_sum(self.b_coeffs, p, deriv=False)

    def da(self, p):
        return _fourier_sum(self.a_coeffs, p, deriv=True)

    def db(self, p):
        return _fourier_sum(self.b_coeffs, p, deriv=True)

    def to_spec(self) -> dict:
        return {"type": "fourier", "a": list(self.a_coeffs), "b": list(self.b_coeffs)}


_VALIDATION_GRID = 1024


@dataclass(frozen=True)
class MatrixField:
    """A parametric field K(p) = a(p) K1 + b(p) K2 of even block dimension n."""

    n: int
    coeffs: TrigCoeffs | FourierCoeffs

    def __post_init__(self):
        n = int(self.n)
        object.__setattr__(self, "n", n)
        if n < 2 or n % 2 != 0:
            raise ValueError(f"block dimension must be even and >= 2, got {n}")
        p = np.linspace(0.0, 2.0 * np.pi, _VALIDATION_GRID, endpoint=False)
        norms = np.abs(self.coeffs.a(p)) ** 2 + np.abs(self.coeffs.b(p)) ** 2
        if norms.min() <= 1e-12 * (1.0 + norms.max()):
            raise ValueError("coefficient vector v(p) vanishes on the validation grid")

    def v(self, p) -> tuple[complex, complex]:
        """Coefficient vector v(p) = (a(p), b(p))."""
        return (self.coeffs.a(p), self.coeffs.b(p))

    def dv(self, p) -> tuple[complex, complex]:
        """Derivative v'(p) = (a'(p), b'(p))."""
        return (self.coeffs.da(p), self.coeffs.db(p))

    @classmethod
    def from_spec(cls, spec: dict) -> "MatrixField":
        """Build a field from its dict form, e.g. {"n": 4, "coeffs": {"type": "trig"}}."""
        try:
            n = spec["n"]
            cdict = spec["coeffs"]
            ctype = cdict["type"]
        except (KeyError, TypeError) as exc:
            raise ValueError(f"malformed field spec: {spec!r}") from exc
        if ctype == "trig":
            coeffs: TrigCoeffs | FourierCoeffs = TrigCoeffs()
        elif ctype == "fourier":
            try:
                coeffs = FourierCoeffs(tuple(cdict["a"]), tuple(cdict["b"]))
            except KeyError as exc:
                raise ValueError(f"fourier spec needs 'a' and 'b' lists: {cdict!r}") from exc
        else:
            raise ValueError(f"unknown coefficient type {ctype!r}")
        return cls(n=n, coeffs=coeffs)

    def to_spec(self) -> dict:
        return {"n": self.n, "coeffs": self.coeffs.to_spec()}


@dataclass(frozen=True)
class FieldRealization:
    """One draw (K1, K2) of the two Ginibre matrices behind a field."""

    k1: np.ndarray
    k2: np.ndarray

    def __post_init__(self):
        k1 = np.asarray(self.k1, dtype=float)
        k2 = np.asarray(self.k2, dtype=float)
        if k1.ndim != 2 or k1.shape[0] != k1.shape[1]:
            raise ValueError(f"k1 must be square, got shape {k1.shape}")
        if k2.shape != k1.shape:
            raise ValueError(f"k1/k2 shape mismatch: {k1.shape} vs {k2.shape}")
        if not (np.all(np.isfinite(k1)) and np.all(np.isfinite(k2))):
            raise ValueError("realization entries must be finite")
        object.__setattr__(self, "k1", k1)
        object.__setattr__(self, "k2", k2)

    @property
    def n(self) -> int:
        return self.k1.shape[0]


def sample_realization(field: MatrixField, rng: np.random.Generator) -> FieldRealization:
    """Independent Ginibre pair sized for the given field."""
    return FieldRealization(sample_ginibre(field.n, rng), sample_ginibre(field.n, rng))


def _check_dims(field: MatrixField, real: FieldRealization) -> None:
    if real.n != field.n:
        raise ValueError(f"realization dimension {real.n} does not match field dimension {field.n}")


def field_eval(field: MatrixField, real: FieldRealization, p: float) -> np.ndarray:
    """K(p) = a(p) K1 + b(p) K2 as a complex matrix."""
    _check_dims(field, real)
    a = complex(field.coeffs.a(p))
    b = complex(field.coeffs.b(p))
    return a * real.k1 + b * real.k2


def field_deriv(field: MatrixField, real: FieldRealization, p: float) -> np.ndarray:
    """Exact p-derivative K'(p) = a'(p) K1 + b'(p) K2."""
    _check_dims(field, real)
    da = complex(field.coeffs.da(p))
    db = complex(field.coeffs.db(p))
    return da * real.k1 + db * real.k2


def _log_det_floor(k: np.ndarray) -> float | np.ndarray:
    """log of the scale-aware singularity threshold 1e-12 * prod(row norms).

    Works on a single matrix or a stack; a matrix whose log|det| falls below
    this is treated as numerically singular.
    """
    row_norms = np.linalg.norm(k, axis=-1)
    with np.errstate(divide="ignore"):
        return np.log(1e-12) + np.sum(np.log(row_norms), axis=-1)


def sample_spherical(n: int, rng: np.random.Generator, max_retries: int = 100) -> np.ndarray:
    """One draw Y = K1^{-1} K2 of the real spherical ensemble.

    Draws are redone (bounded retry count) in the measure-zero event that
    K1 is numerically singular; resampling does not bias the ensemble.
    """
    n = int(n)
    if n < 1:
        raise ValueError(f"matrix dimension must be >= 1, got {n}")
    for _ in range(max_retries):
        k1 = sample_ginibre(n, rng)
        k2 = sample_ginibre(n, rng)
        sign, logdet = np.linalg.slogdet(k1)
        if sign != 0 and np.isfinite(logdet) and logdet > _log_det_floor(k1):
            return np.linalg.solve(k1, k2)
    raise RuntimeError(f"no invertible K1 found after {max_retries} attempts")
