import numpy as np
import pytest

from chiralwind.quad import (
    QuadConfig,
    QuadResult,
    integrate_1d,
    integrate_1d_pv,
    integrate_box,
    integrate_halfplane,
    integrate_product,
)


def test_polynomial_exact_on_single_panel():
    res = integrate_1d(lambda x: x ** 3, 0.0, 1.0)
    assert abs(res.value - 0.25) < 1e-14
    assert res.converged
    assert res.evaluations == 15


def test_gaussian_doubly_infinite():
    res = integrate_1d(lambda x: np.exp(-x * x), -np.inf, np.inf)
    assert abs(res.value - np.sqrt(np.pi)) < 1e-10
    assert res.converged


def test_gamma_semi_infinite():
    res = integrate_1d(lambda x: x ** 3 * np.exp(-x), 0.0, np.inf)
    assert abs(res.value - 6.0) < 1e-9


def test_left_half_line():
    res = integrate_1d(lambda x: np.exp(x), -np.inf, 0.0)
    assert abs(res.value - 1.0) < 1e-10


def test_complex_integrand():
    res = integrate_1d(lambda x: np.exp(1j * x), 0.0, 1.0)
    expected = np.sin(1.0) + 1j * (1.0 - np.cos(1.0))
    assert abs(res.value - expected) < 1e-13


def test_vector_integrand_shares_subdivision():
    def f(x):
        return np.stack([np.sin(x), np.cos(x)], axis=-1)

    res = integrate_1d(f, 0.0, np.pi / 2)
    assert np.allclose(res.value, [1.0, 1.0], atol=1e-12)


def test_error_estimate_bounds_true_error():
    for k in (1.0, 5.0, 17.0):
        res = integrate_1d(lambda x, k=k: np.exp(k * x), 0.0, 1.0)
        truth = (np.exp(k) - 1.0) / k
        assert abs(res.value - truth) <= max(res.err_est, 1e-13 * truth)


def test_error_estimate_upper_bound_rate():
    # err_est should bound the true error in at least 95% of a closed-form
    # suite (exponentials of varying stiffness plus shifted power laws)
    wins = 0
    cases = 0
    for k in np.linspace(0.5, 25.0, 50):
        res = integrate_1d(lambda x, k=k: np.exp(k * x), 0.0, 1.0)
        truth = (np.exp(k) - 1.0) / k
        wins += abs(res.value - truth) <= res.err_est + 1e-15 * truth
        cases += 1
    for p in np.linspace(1.5, 6.0, 50):
        res = integrate_1d(lambda x, p=p: (1.0 + x) ** -p, 0.0, np.inf)
        truth = 1.0 / (p - 1.0)
        wins += abs(res.value - truth) <= res.err_est + 1e-15
        cases += 1
    assert wins >= 0.95 * cases


def test_rational_moments_closed_form():
    res = integrate_1d(lambda x: x * x / (1.0 + x * x) ** 4, -np.inf, np.inf)
    assert abs(res.value - np.pi / 16.0) < 1e-10
    res = integrate_1d(lambda x: (1.0 + x * x) ** -2.5, -np.inf, np.inf)
    assert abs(res.value - 4.0 / 3.0) < 1e-10


def test_linearity():
    f = lambda x: np.exp(-x * x)
    g = lambda x: 1.0 / (1.0 + x * x) ** 2
    rf = integrate_1d(f, -np.inf, np.inf)
    rg = integrate_1d(g, -np.inf, np.inf)
    rc = integrate_1d(lambda x: 2.0 * f(x) - 3.0 * g(x), -np.inf, np.inf)
    assert abs(rc.value - (2.0 * rf.value - 3.0 * rg.value)) \
        <= 2.0 * rf.err_est + 3.0 * rg.err_est + rc.err_est + 1e-12


def test_unconverged_flag():
    cfg = QuadConfig(max_subdiv=3, rel_tol=1e-14)
    res = integrate_1d(lambda x: np.abs(x) ** -0.9, 1e-300, 1.0, cfg)
    assert not res.converged


def test_determinism_bit_identical():
    def f(x):
        return np.exp(-x * x) * np.cos(3.0 * x)

    r1 = integrate_1d(f, -np.inf, np.inf)
    r2 = integrate_1d(f, -np.inf, np.inf)
    assert r1.value == r2.value
    assert r1.err_est == r2.err_est
    assert r1.evaluations == r2.evaluations


def test_pv_simple_pole():
    # PV int_{-1}^{2} dx/x = ln 2
    res = integrate_1d_pv(lambda x: 1.0 / x, 0.0, -1.0, 2.0)
    assert abs(res.value - np.log(2.0)) < 1e-10


def test_pv_odd_integrand():
    res = integrate_1d_pv(lambda x: 1.0 / x, 0.0, -1.0, 1.0)
    assert abs(res.value) < 1e-12


def test_pv_infinite_range():
    # PV int dx / ((x-a)(1+x^2)) = -pi a/(1+a^2); a=1 gives -pi/2
    for a, expected in [(0.5, -np.pi * 0.5 / 1.25), (1.0, -np.pi / 2.0)]:
        res = integrate_1d_pv(lambda x: 1.0 / ((x - a) * (1.0 + x * x)),
                              a, -np.inf, np.inf)
        assert abs(res.value - expected) < 1e-9


def test_pv_pole_must_be_interior():
    with pytest.raises(ValueError):
        integrate_1d_pv(lambda x: 1.0 / x, 2.0, 0.0, 1.0)


def test_box_polynomial():
    res = integrate_box(lambda x, y: x * x * y, 0.0, 2.0, 0.0, 3.0)
    assert abs(res.value - 12.0) < 1e-12


def test_box_vector_valued():
    def f(x, y):
        return np.stack([x * y, np.exp(-x - y)], axis=-1)

    res = integrate_box(f, 0.0, 1.0, 0.0, 1.0)
    expected = [0.25, (1.0 - np.exp(-1.0)) ** 2]
    assert np.allclose(res.value, expected, atol=1e-10)


def test_halfplane_gaussian():
    res = integrate_halfplane(lambda x, y: np.exp(-x * x - y * y))
    assert abs(res.value - np.pi / 2.0) < 1e-8
    assert res.converged


def test_halfplane_algebraic_decay():
    # polar closed form: pi * int_0^inf r(1+r^2)^{-3} dr = pi/4
    res = integrate_halfplane(lambda x, y: (1.0 + x * x + y * y) ** -3)
    assert abs(res.value - np.pi / 4.0) < 1e-9


def test_halfplane_boundary_pole():
    # int_{y>0} exp(-|z-x0|^2)/|z-x0| = pi^{3/2}/2 (polar closed form)
    x0 = 0.4

    def f(x, y):
        r = np.hypot(x - x0, y)
        return np.exp(-r * r) / r

    res = integrate_halfplane(f, poles=[x0 + 0.0j])
    assert abs(res.value - np.pi ** 1.5 / 2.0) < 1e-7


def test_halfplane_interior_pole_closed_form():
    # compactly supported: (1-r^2)^3 / r on the unit disc around z0,
    # entirely inside y > 0: integral = 2 pi * 16/35
    z0 = 0.2 + 1.5j

    def f(x, y):
        r = np.hypot(x - np.real(z0), y - np.imag(z0))
        out = np.zeros_like(r)
        inside = r < 1.0
        rr = r[inside]
        out[inside] = (1.0 - rr * rr) ** 3 / rr
        return out

    res = integrate_halfplane(f, poles=[z0])
    assert abs(res.value - 32.0 * np.pi / 35.0) < 1e-7


def test_halfplane_pole_patch_agrees_with_unpatched():
    z0 = 0.3 + 0.8j

    def f(x, y):
        r = np.hypot(x - np.real(z0), y - np.imag(z0))
        return np.exp(-x * x - y * y) / np.maximum(r, 1e-300)

    patched = integrate_halfplane(f, poles=[z0])
    plain = integrate_halfplane(f)
    assert abs(patched.value - plain.value) < 2e-6
    assert patched.converged


def test_product_three_axes():
    res = integrate_product(lambda x, y, z: x * y * z,
                            [(0.0, 1.0), (0.0, 1.0), (0.0, 1.0)])
    assert abs(res.value - 0.125) < 1e-9


def test_product_single_axis_matches_1d():
    direct = integrate_1d(lambda x: np.exp(-x * x), -np.inf, np.inf)
    nested = integrate_product(lambda x: np.exp(-x * x), [(-np.inf, np.inf)])
    assert nested.value == direct.value


def test_product_separable_gaussian_4d():
    lim = (-5.5, 5.5)
    res = integrate_product(
        lambda x1, x2, x3, x4: np.exp(-(x1 ** 2 + x2 ** 2 + x3 ** 2 + x4 ** 2)),
        [lim, lim, lim, lim],
        QuadConfig(rel_tol=1e-6, abs_tol=1e-9),
    )
    assert abs(res.value - np.pi ** 2) < 1e-7


def test_product_two_axes_matches_halfplane_style():
    res_box = integrate_product(
        lambda x, y: np.exp(-x * x - y * y), [(-7.0, 7.0), (0.0, 7.0)])
    assert abs(res_box.value - np.pi / 2.0) < 1e-9


def test_product_rejects_too_many_axes():
    with pytest.raises(ValueError):
        integrate_product(lambda *a: 1.0, [(0, 1)] * 5)


def test_result_addition():
    a = QuadResult(1.0 + 0j, 1e-10, 15, True)
    b = QuadResult(2.0 + 0j, 2e-10, 30, False)
    c = a + b
    assert c.value == 3.0 + 0j
    assert c.evaluations == 45
    assert not c.converged


def test_box_infinite_plane_gaussian():
    res = integrate_box(lambda x, y: np.exp(-x * x - y * y),
                        -np.inf, np.inf, -np.inf, np.inf)
    assert res.converged
    assert abs(res.value - np.pi) < 1e-7


def test_box_semi_infinite_quadrant():
    res = integrate_box(lambda x, y: np.exp(-x - y), 0.0, np.inf, 0.0, np.inf)
    assert res.converged
    assert abs(res.value - 1.0) < 1e-8


def test_box_mixed_finite_infinite():
    res = integrate_box(lambda x, y: np.exp(x) * np.ones_like(y),
                        -np.inf, 0.0, 0.0, 1.0)
    assert res.converged
    assert abs(res.value - 1.0) < 1e-9
