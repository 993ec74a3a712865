import numpy as np
import pytest

from semiwave import potentials as pots
from semiwave.errors import MissingDecayMetadata, UnsupportedOrder


def test_quartic_taylor_at_one():
    q = pots.quartic_well()
    t = q.taylor_coeffs([1.0], 4)
    # D^3 V / 3! = 24 * 0.1 * x / 6 at x = 1
    assert t[(3,)] == pytest.approx(0.4, abs=1e-14)
    assert t[(4,)] == pytest.approx(0.1, abs=1e-14)
    assert t[(0,)] == pytest.approx(0.6, abs=1e-14)


def test_harmonic_taylor_vanishes_above_two():
    h = pots.harmonic()
    for a in (0.0, 0.7, -2.3):
        t = h.taylor_coeffs([a], 8)
        for k in range(3, 9):
            assert t[(k,)] == 0.0


def test_gaussian_taylor_series():
    g = pots.GaussianSum(1, [1.0], [[0.0]], [[1.0]])
    t = g.taylor_coeffs([0.0], 8)
    # exp(-x^2) = sum (-1)^k x^{2k} / k!
    assert t[(6,)] == pytest.approx(-1.0 / 6.0, rel=1e-13)
    assert t[(4,)] == pytest.approx(0.5, rel=1e-13)
    assert t[(1,)] == pytest.approx(0.0, abs=1e-15)


def test_gaussian_high_order_accuracy():
    # coefficient of x^(2k) at the center is (-1)^k / k!
    g = pots.GaussianSum(1, [1.0], [[0.0]], [[1.0]])
    t = g.taylor_coeffs([0.0], 30)
    for k in (10, 15):
        want = (-1.0) ** k / float(np.prod(np.arange(1, k + 1, dtype=float)))
        assert t[(2 * k,)] == pytest.approx(want, rel=1e-12)


def test_unsupported_order_guard():
    g = pots.GaussianSum(1, [1.0], [[0.0]], [[1.0]])
    with pytest.raises(UnsupportedOrder):
        g.taylor_coeffs([0.0], 500)


def test_gradient_hessian_share_taylor_path():
    g = pots.GaussianSum(2, [1.3], [[0.1, -0.2]], [[0.8, 1.1]])
    a = np.array([0.4, -0.3])
    t = g.taylor_coeffs(a, 2)
    grad = g.gradient(a)
    hess = g.hessian(a)
    assert grad[0] == t[(1, 0)]
    assert grad[1] == t[(0, 1)]
    assert hess[0, 0] == 2.0 * t[(2, 0)]
    assert hess[0, 1] == t[(1, 1)]
    assert hess[1, 1] == 2.0 * t[(0, 2)]


def test_finite_difference_cross_check():
    g = pots.GaussianSum(1, [2.0], [[0.3]], [[1.2]])
    a = np.array([0.9])
    grad = g.gradient(a)[0]
    hess = g.hessian(a)[0, 0]
    errs_g, errs_h = [], []
    for h in (2e-3, 1e-3):
        errs_g.append(abs((float(g.value(a + h)) - float(g.value(a - h))) / (2 * h) - grad))
        errs_h.append(abs((float(g.value(a + h)) - 2 * float(g.value(a))
                           + float(g.value(a - h))) / h**2 - hess))
    assert np.log2(errs_g[0] / errs_g[1]) > 1.9
    assert np.log2(errs_h[0] / errs_h[1]) > 1.9


def test_taylor_polynomial_reproduces_values():
    g = pots.GaussianSum(1, [1.0], [[0.0]], [[1.0]])
    a = np.array([0.4])
    t = g.taylor_coeffs(a, 4)
    errs = []
    for h in (0.1, 0.05):
        pred = sum(c * h ** m[0] for m, c in t.items())
        errs.append(abs(float(g.value(a + h)) - pred))
    # degree-4 polynomial leaves an O(h^5) remainder
    assert np.log2(errs[0] / errs[1]) > 4.5


def test_decay_check_zero_potential():
    assert pots.decay_check(pots.free_potential(), 5.0, n_samples=21) == 0.0


def test_decay_check_gaussian_certificate():
    g = pots.GaussianSum(1, [1.0], [[0.0]], [[1.0]],
                         decay=pots.DecayMetadata(2.0, 4.0, 4.0))
    assert pots.decay_check(g, 10.0, n_samples=401) <= 1.0


def test_decay_check_default_barrier():
    gb = pots.gaussian_barrier(height=4.0, width=1.0)
    assert pots.decay_check(gb, 10.0, n_samples=201) <= 1.0


def test_polynomials_never_satisfy_decay():
    with pytest.raises(MissingDecayMetadata):
        pots.decay_check(pots.quartic_well(), 5.0)
    with pytest.raises(ValueError):
        pots.Polynomial(1, {(2,): 0.5}, decay=pots.DecayMetadata(2.0, 1.0, 1.0))


def test_double_well_shape():
    dw = pots.double_well()
    x = np.array([0.0, 1.0, -1.0, 2.0])
    assert np.allclose(dw.value(x), (x**2 - 1.0) ** 2 / 4.0)
    assert dw.hessian(np.array([0.0]))[0, 0] == pytest.approx(-1.0)


def test_bounded_below_estimate():
    assert pots.bounded_below_estimate(pots.double_well(), 3.0) >= 0.0
    assert pots.bounded_below_estimate(pots.harmonic(), 2.0) == pytest.approx(0.0, abs=1e-4)
