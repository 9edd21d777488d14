"""Command-line front end: configuration, subcommands, CSV/JSON emission.

One TOML file (plus flag overrides) configures a run; every emitted file
embeds the full configuration and the library version, and re-running a
command with an identical configuration reproduces the output bit for bit.
Exit codes: 0 success / all checks passed, 1 numerical failure, 2
configuration error.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib  # type: ignore[no-redef]

from . import __version__
from .ensembles import MatrixField, rng_stream, sample_realization
from .kernels import KernelContext
from .oracle import compare, mc_ratio_estimate, validate_suite
from .pfassembly import z_generating
from .quad import QuadConfig
from .spherical import char_poly_mc, real_count_stats
from .winding import (
    NearSingularError,
    ResolutionError,
    flow_trace,
    winding_number,
    write_flow_csv,
)

EXIT_OK = 0
EXIT_NUMERICAL = 1
EXIT_CONFIG = 2

_CONFIG_KEYS = ("n", "coeffs", "seed", "samples", "grid", "rel_tol",
                "abs_tol", "out")


class ConfigError(ValueError):
    """Invalid run configuration (exit code 2)."""


@dataclass(frozen=True)
class RunConfig:
    """Complete configuration of one run; embedded in every output file."""

    n: int = 4
    coeffs: dict = field(default_factory=lambda: {"type": "trig"})
    seed: int = 20260814
    samples: int = 1000
    grid: int = 256
    rel_tol: float = 1e-8
    abs_tol: float = 1e-12
    out: str = "."

    def __post_init__(self):
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "seed", int(self.seed))
        object.__setattr__(self, "samples", int(self.samples))
        object.__setattr__(self, "grid", int(self.grid))
        object.__setattr__(self, "rel_tol", float(self.rel_tol))
        object.__setattr__(self, "abs_tol", float(self.abs_tol))
        if self.n < 2 or self.n % 2 != 0:
            raise ConfigError(
                f"n must be an even integer >= 2 (the chiral blocks exist "
                f"only for even block dimension), got {self.n}")
        if not 0 <= self.seed < 2 ** 64:
            raise ConfigError(f"seed must fit in 64 bits, got {self.seed}")
        if self.samples < 1:
            raise ConfigError(f"samples must be >= 1, got {self.samples}")
        if self.grid < 16:
            raise ConfigError(f"grid must be >= 16, got {self.grid}")
        if self.rel_tol <= 0.0 or self.abs_tol <= 0.0:
            raise ConfigError("quadrature tolerances must be positive")
        if not isinstance(self.coeffs, dict):
            raise ConfigError(f"coeffs must be a table, got {self.coeffs!r}")

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "coeffs": self.coeffs,
            "seed": self.seed,
            "samples": self.samples,
            "grid": self.grid,
            "rel_tol": self.rel_tol,
            "abs_tol": self.abs_tol,
            "out": self.out,
        }

    def matrix_field(self) -> MatrixField:
        try:
            return MatrixField.from_spec({"n": self.n, "coeffs": self.coeffs})
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def quad_config(self) -> QuadConfig:
        return QuadConfig(rel_tol=self.rel_tol, abs_tol=self.abs_tol)

    def kernel_context(self) -> KernelContext:
        return KernelContext(self.n, self.quad_config())


def _load_config(args: argparse.Namespace) -> RunConfig:
    data: dict = {}
    if getattr(args, "config", None):
        try:
            raw = Path(args.config).read_bytes()
        except OSError as exc:
            raise ConfigError(f"cannot read config file: {exc}") from exc
        try:
            data = tomllib.loads(raw.decode("utf-8"))
        except (UnicodeDecodeError, tomllib.TOMLDecodeError) as exc:
            raise ConfigError(f"malformed TOML in {args.config}: {exc}") from exc
        unknown = sorted(set(data) - set(_CONFIG_KEYS))
        if unknown:
            raise ConfigError(
                f"unknown config keys {unknown}; valid keys: {list(_CONFIG_KEYS)}")
    for key in ("n", "seed", "samples", "grid", "out"):
        value = getattr(args, key, None)
        if value is not None:
            data[key] = value
    try:
        return RunConfig(**data)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def _provenance(cfg: RunConfig) -> dict:
    return {"version": __version__, "config": cfg.to_dict()}


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n",
                    encoding="utf-8")


def _out_dir(cfg: RunConfig) -> Path:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_flow(cfg: RunConfig, args: argparse.Namespace) -> int:
    field_ = cfg.matrix_field()
    real = sample_realization(field_, rng_stream(cfg.seed, 1))
    flow = flow_trace(field_, real, cfg.grid)
    dest = _out_dir(cfg) / "flow.csv"
    comments = [f"version: {__version__}",
                "config: " + json.dumps(cfg.to_dict(), sort_keys=True)]
    write_flow_csv(flow, str(dest), comments=comments)
    print(f"wrote {dest} ({cfg.grid + 1} rows)")
    return EXIT_OK


def cmd_winding(cfg: RunConfig, args: argparse.Namespace) -> int:
    field_ = cfg.matrix_field()
    rng = rng_stream(cfg.seed, 2)
    w_values: list[int] = []
    rejected = 0
    for _ in range(cfg.samples):
        real = sample_realization(field_, rng)
        try:
            w_values.append(winding_number(field_, real, cfg.grid).w_value)
        except (NearSingularError, ResolutionError):
            rejected += 1
    counts: dict[int, int] = {}
    for w in w_values:
        counts[w] = counts.get(w, 0) + 1
    dest = _out_dir(cfg) / "winding.json"
    payload = _provenance(cfg) | {
        "counts": {str(k): counts[k] for k in sorted(counts)},
        "rejected": rejected,
        "total": len(w_values),
        "w_values": w_values,
    }
    _write_json(dest, payload)
    summary = ", ".join(f"W={k}: {counts[k]}" for k in sorted(counts))
    print(f"wrote {dest} ({summary}; rejected {rejected})")
    return EXIT_OK


def cmd_z(cfg: RunConfig, args: argparse.Namespace) -> int:
    field_ = cfg.matrix_field()
    ctx = cfg.kernel_context()
    res = z_generating(field_, list(args.q), list(args.p), ctx,
                       route=args.route)
    est = mc_ratio_estimate(field_, list(args.q), list(args.p), cfg.samples,
                            rng_stream(cfg.seed, 3), scheme=args.scheme)
    report = compare(res.value, res.err_est, est,
                     label=f"Z k={len(args.q)} analytic vs MC")
    dest = _out_dir(cfg) / "z.json"
    payload = _provenance(cfg) | {
        "route": args.route,
        "scheme": args.scheme,
        "analytic": res.to_dict(),
        "report": report.to_dict(),
    }
    _write_json(dest, payload)
    flag = "PASS" if report.passed else "FAIL"
    print(f"[{flag}] {report.label}: analytic={res.value:.8g} "
          f"mc={est.mean:.8g} |diff|={report.abs_diff:.3g} "
          f"3sigma={3.0 * report.sigma_combined:.3g} -> {dest}")
    return EXIT_OK if report.passed else EXIT_NUMERICAL


def cmd_spherical(cfg: RunConfig, args: argparse.Namespace) -> int:
    count = real_count_stats(cfg.n, cfg.samples, rng_stream(cfg.seed, 4))
    asym = float(np.sqrt(np.pi * cfg.n / 2.0))
    x = 2.0
    poly = char_poly_mc(x, cfg.n, cfg.samples, rng_stream(cfg.seed, 5))
    dest = _out_dir(cfg) / "spherical.json"
    payload = _provenance(cfg) | {
        "real_count": {
            "mean": float(count.mean.real),
            "stderr": count.stderr,
            "n_samples": count.n_samples,
            "asymptotic": asym,
        },
        "char_poly": {
            "x": x,
            "mean": {"re": float(poly.mean.real), "im": float(poly.mean.imag)},
            "stderr": poly.stderr,
            "n_samples": poly.n_samples,
            "skipped": poly.skipped,
            "target": float(x) ** cfg.n,
        },
    }
    _write_json(dest, payload)
    print(f"wrote {dest} (mean real count {count.mean.real:.4f} vs "
          f"asymptotic {asym:.4f}; <det({x:g}-Y)> = {poly.mean.real:.5g} "
          f"+- {poly.stderr:.2g} vs {float(x) ** cfg.n:g})")
    return EXIT_OK


def cmd_validate(cfg: RunConfig, args: argparse.Namespace) -> int:
    reports = validate_suite(master_seed=cfg.seed,
                             budget_scale=args.budget_scale)
    all_pass = all(r.passed for r in reports)
    dest = _out_dir(cfg) / "validate.json"
    payload = _provenance(cfg) | {
        "budget_scale": args.budget_scale,
        "all_pass": all_pass,
        "reports": [r.to_dict() for r in reports],
    }
    _write_json(dest, payload)
    for r in reports:
        flag = "PASS" if r.passed else "FAIL"
        print(f"[{flag}] {r.label}: |diff|={r.abs_diff:.3g} "
              f"3sigma={3.0 * r.sigma_combined:.3g}")
    n_pass = sum(r.passed for r in reports)
    print(f"{n_pass}/{len(reports)} checks passed -> {dest}")
    return EXIT_OK if all_pass else EXIT_NUMERICAL


# ---------------------------------------------------------------------------
# argument parsing and dispatch
# ---------------------------------------------------------------------------


def _add_common(sp: argparse.ArgumentParser) -> None:
    sp.add_argument("--config", help="TOML configuration file")
    sp.add_argument("--seed", type=int, help="master seed (64-bit)")
    sp.add_argument("--samples", type=int, help="Monte Carlo sample count")
    sp.add_argument("--grid", type=int, help="momentum grid size (>= 16)")
    sp.add_argument("--n", type=int, help="even block dimension")
    sp.add_argument("--out", help="output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="chiralwind",
        description="Winding-number statistics of chiral random matrix "
                    "fields: Monte Carlo ensembles and Pfaffian kernel "
                    "quadrature, cross-validated.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_flow = sub.add_parser(
        "flow", help="spectral flow of H(p) and the det K(p) track -> flow.csv")
    _add_common(p_flow)
    p_flow.set_defaults(func=cmd_flow)

    p_wind = sub.add_parser(
        "winding", help="winding-number histogram over realizations -> winding.json")
    _add_common(p_wind)
    p_wind.set_defaults(func=cmd_winding)

    p_z = sub.add_parser(
        "z", help="determinant-ratio generating function, analytic vs MC -> z.json")
    _add_common(p_z)
    p_z.add_argument("--q", type=float, nargs="+", default=[1.1],
                     help="denominator momenta")
    p_z.add_argument("--p", type=float, nargs="+", default=[0.3],
                     help="numerator momenta")
    p_z.add_argument("--route", choices=("reduced", "alternative"),
                     default="reduced", help="third-kernel evaluation route")
    p_z.add_argument("--scheme", choices=("mom", "mean"), default="mom",
                     help="Monte Carlo estimator")
    p_z.set_defaults(func=cmd_z)

    p_sph = sub.add_parser(
        "spherical", help="spherical-ensemble statistics -> spherical.json")
    _add_common(p_sph)
    p_sph.set_defaults(func=cmd_spherical)

    p_val = sub.add_parser(
        "validate", help="run the cross-validation suite -> validate.json")
    _add_common(p_val)
    p_val.add_argument("--budget-scale", type=float, default=1.0,
                       help="scale all Monte Carlo budgets (e.g. 0.02 for a "
                            "fast smoke run)")
    p_val.set_defaults(func=cmd_validate)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _load_config(args)
        return args.func(cfg, args)
    except ValueError as exc:
        # configuration and input-domain errors (degenerate momenta included)
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (RuntimeError, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    raise SystemExit(main())
