"""Tests for the cross-validation suite runner."""

from __future__ import annotations

import numpy as np
import pytest

from chiralwind import validation
from chiralwind.oracle import Report, validate_suite

SMOKE = 0.02


@pytest.fixture(scope="module")
def smoke_reports():
    return validate_suite(budget_scale=SMOKE)


def test_suite_shape(smoke_reports):
    assert len(smoke_reports) >= 12
    assert all(isinstance(r, Report) for r in smoke_reports)
    labels = [r.label for r in smoke_reports]
    assert len(set(labels)) == len(labels)


def test_suite_all_pass_at_smoke_budget(smoke_reports):
    bad = [r.label for r in smoke_reports if not r.passed]
    assert not bad, f"failing checks: {bad}"


def test_suite_deterministic(smoke_reports):
    again = validate_suite(budget_scale=SMOKE)
    assert [r.to_dict() for r in again] == [r.to_dict() for r in smoke_reports]


def test_suite_seed_sensitive(smoke_reports):
    other = validate_suite(master_seed=7, budget_scale=SMOKE)
    assert any(o.mc.mean != s.mc.mean for o, s in zip(other, smoke_reports))


def test_mc_budgets_scale(smoke_reports):
    # the shrunk budget must actually reach the Monte Carlo checks
    by_label = {r.label: r for r in smoke_reports}
    z = by_label["generating function k=1 vs Monte Carlo"]
    assert z.mc.n_samples <= 4096
    assert z.mc.stderr > 0


def test_bad_budget_scale():
    with pytest.raises(ValueError):
        validation.run_suite(budget_scale=0.0)


def test_broken_check_becomes_failed_report(monkeypatch):
    def boom(label, rng, budget, ctx4, trig4):
        raise RuntimeError("synthetic breakage")

    monkeypatch.setattr(validation, "_check_pfaffian", boom)
    reports = validation.run_suite(budget_scale=SMOKE)
    broken = [r for r in reports if "synthetic breakage" in r.mc.warning]
    assert len(broken) == 1
    assert not broken[0].passed
    assert broken[0].label == "Pfaffian identities"
    # the rest of the suite still ran
    assert sum(r.passed for r in reports) == len(reports) - 1


def test_quadrature_checks_tight(smoke_reports):
    # deterministic identities hold far below their floors even in smoke mode
    by_label = {r.label: r for r in smoke_reports}
    assert by_label["moment Pfaffian ratio N=4 -> 3/(2 pi)"].abs_diff < 1e-9
    assert by_label["joint-density normalization N=2 -> 1"].abs_diff < 1e-8
    assert by_label["real-sector integral vs quadrature, 20 draws"].abs_diff < 1e-10
    assert by_label["reciprocal-pairing determinant identity, 100 draws"].abs_diff < 1e-11
    assert by_label["Pfaffian identities"].abs_diff < 1e-12


def test_winding_checks_present(smoke_reports):
    by_label = {r.label: r for r in smoke_reports}
    assert by_label["winding numbers integer"].abs_diff < 1e-6
    assert by_label["winding numbers even"].abs_diff == 0.0
    assert by_label["winding density real part integrates to zero"].abs_diff < 1e-6
