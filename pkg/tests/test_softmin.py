import math

import mpmath as mp
import numpy as np
import pytest

from ergcbf.softmin import SoftminResult, softmin, softmin_value

SEED = 2201


def softmin_mp(values, beta, dps=50):
    """High-precision reference, evaluated without any shift trick."""
    with mp.workdps(dps):
        total = mp.fsum(mp.e ** (-beta * mp.mpf(repr(v))) for v in values)
        return float(-mp.log(total) / beta)


def test_single_element_is_exact():
    # log(1) = 0: one input comes back unchanged, bitwise
    for v in (0.0, -3.25, 700.0, -700.0, 1e-12):
        assert softmin([v], 100.0).value == v


@pytest.mark.parametrize("beta", [1.0, 10.0, 100.0])
def test_matches_high_precision_reference(beta):
    rng = np.random.default_rng(SEED)
    for _ in range(200):
        n = int(rng.integers(1, 9))
        s = rng.uniform(-20.0, 20.0, n)
        got = softmin(s, beta).value
        want = softmin_mp(s, beta)
        assert got == pytest.approx(want, rel=1e-13, abs=1e-13)


def test_frozen_values():
    assert softmin([0.1, 0.3], 100.0).value == pytest.approx(
        0.09999999997938846, abs=1e-15
    )
    assert softmin([1.0, 2.0, 3.0], 1.0).value == pytest.approx(
        0.5923940355556197, abs=1e-15
    )
    assert softmin([-5.0, 2.0], 10.0).value == pytest.approx(-5.0, abs=1e-15)


def test_tie_reduces_to_min_minus_log_n():
    # equal inputs: value = a - log(n)/beta, weights uniform
    for n in (2, 3, 7):
        res = softmin(np.full(n, 1.5), 100.0)
        assert res.value == pytest.approx(1.5 - math.log(n) / 100.0, abs=1e-15)
        assert np.allclose(res.weights, 1.0 / n, atol=1e-15)


@pytest.mark.parametrize("beta", [1.0, 10.0, 100.0])
def test_sandwich_bounds(beta):
    rng = np.random.default_rng(SEED + 1)
    for _ in range(500):
        n = int(rng.integers(1, 9))
        s = rng.uniform(-700.0, 700.0, n)
        val = softmin(s, beta).value
        assert math.isfinite(val)
        assert val <= s.min()
        assert val >= s.min() - math.log(n) / beta


def test_extreme_inputs_stay_finite():
    for s in ([-700.0, -700.0], [700.0, 700.0], [-700.0, 700.0], [700.0, -700.0]):
        res = softmin(s, 100.0)
        assert math.isfinite(res.value)
        assert math.isfinite(res.weights.sum())


def test_weights_are_convex_combination():
    rng = np.random.default_rng(SEED + 2)
    for _ in range(300):
        n = int(rng.integers(1, 9))
        res = softmin(rng.uniform(-700.0, 700.0, n), 100.0)
        assert np.all(res.weights >= 0.0)
        assert abs(res.weights.sum() - 1.0) <= 1e-12


def test_weights_are_the_gradient():
    rng = np.random.default_rng(SEED + 3)
    h = 1e-6
    for beta in (1.0, 10.0, 100.0):
        for _ in range(50):
            s = rng.uniform(-2.0, 2.0, 4)
            w = softmin(s, beta).weights
            for j in range(4):
                sp, sm = s.copy(), s.copy()
                sp[j] += h
                sm[j] -= h
                fd = (softmin_value(sp, beta) - softmin_value(sm, beta)) / (2 * h)
                assert fd == pytest.approx(w[j], abs=1e-8)


def test_shift_equivariance():
    # softmin(s + c) = softmin(s) + c
    rng = np.random.default_rng(SEED + 4)
    s = rng.uniform(-1.0, 1.0, 5)
    base = softmin(s, 100.0).value
    for c in (-3.0, 0.25, 10.0):
        assert softmin(s + c, 100.0).value == pytest.approx(base + c, abs=1e-12)


def test_sharper_beta_is_tighter():
    rng = np.random.default_rng(SEED + 5)
    for _ in range(100):
        s = rng.uniform(-5.0, 5.0, 4)
        v1 = softmin(s, 1.0).value
        v10 = softmin(s, 10.0).value
        v100 = softmin(s, 100.0).value
        assert v1 <= v10 + 1e-15 <= v100 + 2e-15
        assert v100 <= s.min()


def test_result_type():
    res = softmin([1.0, 2.0], 5.0)
    assert isinstance(res, SoftminResult)
    assert isinstance(res.value, float)
    assert res.weights.shape == (2,)


def test_rejects_bad_inputs():
    with pytest.raises(ValueError):
        softmin([], 1.0)
    with pytest.raises(ValueError):
        softmin([[1.0, 2.0]], 1.0)
    with pytest.raises(ValueError):
        softmin([1.0, float("nan")], 1.0)
    with pytest.raises(ValueError):
        softmin([1.0, float("inf")], 1.0)
    with pytest.raises(ValueError):
        softmin([1.0], 0.0)
    with pytest.raises(ValueError):
        softmin([1.0], -5.0)
    with pytest.raises(ValueError):
        softmin([1.0], float("inf"))
