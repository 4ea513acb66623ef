import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hermite_bench.exfloat import (
    TwoFloat,
    add_arrays,
    div_arrays,
    ex_abs,
    ex_add,
    ex_div,
    ex_from_wide,
    ex_mul,
    ex_neg,
    ex_sqrt,
    ex_sub,
    ex_to_wide,
    join_array,
    mul_arrays,
    split_array,
    sqrt_arrays,
)

N_SAMPLES = 100_000


def random_wide(rng, n, lo_exp=-30, hi_exp=30):
    sign = rng.choice([-1.0, 1.0], n)
    return sign * rng.uniform(1.0, 2.0, n) * 2.0 ** rng.integers(lo_exp, hi_exp, n)


def normalized(h, l):
    return np.all(np.float32(h.astype(np.float64) + l.astype(np.float64)) == h)


def test_from_wide_trivial():
    a = ex_from_wide(1.0)
    assert (a.hi, a.lo) == (1.0, 0.0)
    b = ex_from_wide(1.0 + 2.0**-30)
    assert (b.hi, b.lo) == (1.0, 2.0**-30)


def test_pi_round_trip():
    assert abs(ex_to_wide(ex_from_wide(math.pi)) - math.pi) <= 2.0**-44 * math.pi


def test_to_wide_trivial():
    assert ex_to_wide(TwoFloat(1.0, 0.0)) == 1.0
    assert ex_to_wide(TwoFloat(1.0, 2.0**-30)) == 1.0 + 2.0**-30


@pytest.mark.parametrize("bad", [math.inf, -math.inf, math.nan])
def test_from_wide_rejects_non_finite(bad):
    with pytest.raises(ValueError):
        ex_from_wide(bad)


@pytest.mark.parametrize("bad", [1e39, -1e39, 1e-40])
def test_from_wide_rejects_out_of_range(bad):
    with pytest.raises(OverflowError):
        ex_from_wide(bad)


def test_round_trip_48_bit_values():
    rng = np.random.default_rng(7)
    mant = rng.integers(2**47, 2**48, N_SAMPLES).astype(np.float64)
    x = rng.choice([-1.0, 1.0], N_SAMPLES) * mant * 2.0 ** rng.integers(-80, 30, N_SAMPLES)
    h, l = split_array(x)
    assert np.array_equal(join_array(h, l), x)
    for v in x[:200]:
        assert ex_to_wide(ex_from_wide(v)) == v


def test_add_trivial():
    one = TwoFloat(1.0)
    assert ex_add(one, TwoFloat(-1.0)) == TwoFloat(0.0, 0.0)
    assert ex_to_wide(ex_add(one, TwoFloat(2.0**-30))) == 1.0 + 2.0**-30


def test_mul_trivial():
    assert ex_mul(TwoFloat(2.0), TwoFloat(3.0)) == TwoFloat(6.0)
    a = ex_from_wide(math.e)
    assert ex_mul(a, TwoFloat(1.0)) == a


def test_div_sqrt_trivial():
    assert ex_div(TwoFloat(6.0), TwoFloat(3.0)) == TwoFloat(2.0)
    assert ex_sqrt(TwoFloat(4.0)) == TwoFloat(2.0)
    assert ex_sqrt(TwoFloat(0.0)) == TwoFloat(0.0)


def test_domain_errors():
    with pytest.raises(ZeroDivisionError):
        ex_div(TwoFloat(1.0), TwoFloat(0.0))
    with pytest.raises(ValueError):
        ex_sqrt(TwoFloat(-1.0))
    big = ex_from_wide(3e38)
    with pytest.raises(OverflowError):
        ex_add(big, big)
    with pytest.raises(OverflowError):
        ex_mul(big, big)


def test_neg_abs_compare():
    a = ex_from_wide(-math.pi)
    assert ex_neg(a) == ex_abs(a) == ex_from_wide(math.pi)
    assert a < ex_abs(a)
    assert ex_from_wide(1.0) < ex_from_wide(1.0 + 2.0**-40)
    assert ex_sub(a, a) == TwoFloat(0.0, 0.0)


def test_operator_sugar():
    a = ex_from_wide(1.5)
    assert ex_to_wide(a + 1) == 2.5
    assert ex_to_wide(2 * a) == 3.0
    assert ex_to_wide(3 / a) == 2.0
    assert ex_to_wide(1 - a) == -0.5
    assert float(-a) == -1.5


class TestBulkAccuracy:
    """Relative error against binary64 arithmetic on the exact binary64 images."""

    rng = np.random.default_rng(20240611)
    ah, al = split_array(random_wide(rng, N_SAMPLES))
    bh, bl = split_array(random_wide(rng, N_SAMPLES))
    A = join_array(ah, al)
    B = join_array(bh, bl)

    def test_inputs_normalized(self):
        assert normalized(self.ah, self.al) and normalized(self.bh, self.bl)

    def test_add(self):
        h, l = add_arrays(self.ah, self.al, self.bh, self.bl)
        ref = self.A + self.B
        ok = np.abs(ref) >= 2.0**-20 * np.maximum(np.abs(self.A), np.abs(self.B))
        assert ok.sum() > 0.9 * N_SAMPLES
        err = np.abs(join_array(h, l) - ref)[ok] / np.abs(ref)[ok]
        assert err.max() <= 2.0**-44
        assert normalized(h, l)

    def test_mul(self):
        h, l = mul_arrays(self.ah, self.al, self.bh, self.bl)
        ref = self.A * self.B
        assert (np.abs(join_array(h, l) - ref) / np.abs(ref)).max() <= 2.0**-44
        assert normalized(h, l)

    def test_div(self):
        h, l = div_arrays(self.ah, self.al, self.bh, self.bl)
        ref = self.A / self.B
        assert (np.abs(join_array(h, l) - ref) / np.abs(ref)).max() <= 2.0**-43
        assert normalized(h, l)

    def test_sqrt(self):
        h, l = sqrt_arrays(np.abs(self.ah), np.sign(self.ah) * self.al)
        ref = np.sqrt(np.abs(self.A))
        assert (np.abs(join_array(h, l) - ref) / ref).max() <= 2.0**-43
        assert normalized(h, l)

    def test_commutative_bitwise(self):
        h1, l1 = add_arrays(self.ah, self.al, self.bh, self.bl)
        h2, l2 = add_arrays(self.bh, self.bl, self.ah, self.al)
        assert np.array_equal(h1, h2) and np.array_equal(l1, l2)
        h1, l1 = mul_arrays(self.ah, self.al, self.bh, self.bl)
        h2, l2 = mul_arrays(self.bh, self.bl, self.ah, self.al)
        assert np.array_equal(h1, h2) and np.array_equal(l1, l2)


wide = st.floats(min_value=1e-15, max_value=1e15).flatmap(
    lambda m: st.sampled_from([m, -m])
)


@settings(max_examples=300, deadline=None)
@given(wide, wide)
def test_results_stay_normalized(x, y):
    a, b = ex_from_wide(x), ex_from_wide(y)
    for r in (ex_add(a, b), ex_sub(a, b), ex_mul(a, b), ex_div(a, b), ex_sqrt(ex_abs(a))):
        assert r.is_normalized()
        assert np.isfinite(r.hi) and np.isfinite(r.lo)


@settings(max_examples=300, deadline=None)
@given(wide, wide)
def test_scalar_commutativity(x, y):
    a, b = ex_from_wide(x), ex_from_wide(y)
    assert ex_add(a, b) == ex_add(b, a)
    assert ex_mul(a, b) == ex_mul(b, a)


@settings(max_examples=300, deadline=None)
@given(wide)
def test_representable_round_trip(x):
    a = ex_from_wide(x)
    assert ex_from_wide(ex_to_wide(a)) == a
