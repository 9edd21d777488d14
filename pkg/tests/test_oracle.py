"""Tests for the Monte Carlo estimators and comparison reports."""
from __future__ import annotations

import numpy as np
import pytest

from chiralwind.ensembles import MatrixField, TrigCoeffs, rng_stream
from chiralwind.oracle import MCEstimate, batch_estimate, compare, mc_ratio_estimate


def trig_field(n: int = 4) -> MatrixField:
    return MatrixField(n=n, coeffs=TrigCoeffs())


def test_mcestimate_validation():
    with pytest.raises(ValueError):
        MCEstimate(mean=0, stderr=-1.0, n_samples=10, n_batches=2, scheme="mean")
    with pytest.raises(ValueError):
        MCEstimate(mean=0, stderr=0.0, n_samples=10, n_batches=3, scheme="mean")
    with pytest.raises(ValueError):
        MCEstimate(mean=0, stderr=0.0, n_samples=10, n_batches=2, scheme="bogus")


def test_median_of_means_matches_mean_on_gaussian():
    rng = rng_stream(50)
    values = rng.standard_normal(100_000)
    mom = batch_estimate(values, 32, "mom")
    mean = batch_estimate(values, 32, "mean")
    assert abs(mom.mean - mean.mean) < mean.stderr
    assert mom.stderr > mean.stderr  # sqrt(pi/2) inflation
    assert mom.n_samples == mean.n_samples == 100_000  # 32 divides 1e5 already
    trimmed = batch_estimate(values[:99_999], 32, "mean")
    assert trimmed.n_samples == 99_968  # trimmed to a multiple of 32


def test_batch_estimate_known_distribution():
    rng = rng_stream(51)
    values = 3.0 + rng.standard_normal(64_000)
    est = batch_estimate(values, 32, "mean")
    assert abs(est.mean - 3.0) < 4.0 * est.stderr
    assert np.isclose(est.stderr, 1.0 / np.sqrt(64_000), rtol=0.5)


def test_ratio_estimate_q_equals_p_is_exactly_one():
    field = trig_field()
    est = mc_ratio_estimate(field, [0.7], [0.7], 1000, rng_stream(52))
    assert est.mean == 1.0 + 0.0j
    assert est.stderr == 0.0
    assert est.skipped == 0


def test_det_squared_equals_factorial():
    # <det^2 K1> = N!: numerator-only average, plain mean
    field = trig_field(4)
    est = mc_ratio_estimate(field, [], [0.0, 0.0], 100_000, rng_stream(53), scheme="mean")
    assert abs(est.mean - 24.0) < 3.0 * est.stderr


def test_two_determinant_average_closed_form():
    # <det K(p1) det K(p2)> / <det^2 K1> = [v(p1)^T v(p2)]^N = cos(p1+p2)^N
    field = trig_field(4)
    p1, p2 = 0.4, 0.3
    rng = rng_stream(54)
    num = mc_ratio_estimate(field, [], [p1, p2], 200_000, rng, scheme="mean")
    den = mc_ratio_estimate(field, [], [0.0, 0.0], 200_000, rng, scheme="mean")
    ratio = num.mean / den.mean
    sigma = abs(ratio) * np.hypot(num.stderr / abs(num.mean), den.stderr / abs(den.mean))
    target = np.cos(p1 + p2) ** 4
    assert abs(ratio - target) < 3.0 * sigma


def test_skip_accounting_matches_injected_fraction():
    field = trig_field(4)
    q = [0.4]
    floor = 3.0
    seed = 55
    est = mc_ratio_estimate(field, q, [0.9], 5000, rng_stream(seed), det_floor=floor)
    # independent recount with the identical stream and chunking
    rng = rng_stream(seed)
    k1 = rng.standard_normal((5000, 4, 4))
    k2 = rng.standard_normal((5000, 4, 4))
    a = complex(field.coeffs.a(q[0]))
    b = complex(field.coeffs.b(q[0]))
    dets = np.linalg.det(a * k1 + b * k2)
    expected_skips = int(np.sum(np.abs(dets) <= floor))
    assert est.skipped == expected_skips
    assert expected_skips > 5  # the floor actually bites
    assert "unstable" in est.warning
    assert est.n_samples + est.skipped <= 5000


def test_ratio_estimate_reproducible():
    field = trig_field()
    e1 = mc_ratio_estimate(field, [1.1], [0.3], 2000, rng_stream(56))
    e2 = mc_ratio_estimate(field, [1.1], [0.3], 2000, rng_stream(56))
    assert e1 == e2


def test_compare_pass_fail():
    mc = MCEstimate(mean=1.0, stderr=0.1, n_samples=100, n_batches=10, scheme="mean")
    identical = compare(1.0, 0.0, mc)
    assert identical.passed
    assert identical.abs_diff == 0.0
    two_sigma = compare(1.2, 0.0, mc)
    assert two_sigma.passed
    ten_sigma = compare(2.0, 0.0, mc)
    assert not ten_sigma.passed
    assert ten_sigma.sigma_combined == pytest.approx(0.1)


def test_compare_absolute_floor():
    mc = MCEstimate(mean=1.0, stderr=0.0, n_samples=10, n_batches=1, scheme="mean")
    # tiny deviations below the absolute floor pass even at zero sigma
    assert compare(1.0005, 0.0, mc).passed
    assert not compare(1.01, 0.0, mc).passed


def test_report_to_dict():
    mc = MCEstimate(mean=2.0 + 1.0j, stderr=0.2, n_samples=100, n_batches=10, scheme="mom")
    report = compare(2.0 + 1.1j, 0.05, mc, label="demo")
    d = report.to_dict()
    assert d["label"] == "demo"
    assert d["pass"] is True
    assert d["mc"]["scheme"] == "mom"
    assert d["analytic"] == {"re": 2.0, "im": 1.1}
