"""Emulated extended precision ("EX") built from pairs of binary32 values.

A value is stored as the unevaluated sum ``hi + lo`` of two float32 numbers
with ``|lo| <= ulp(hi) / 2``, giving roughly 48 significand bits at the
binary32 exponent range.  All arithmetic is composed from error-free
transformations (Knuth two-sum, Dekker split/two-product) evaluated purely in
float32, so the same code runs on hardware without native binary64.

The scalar primitives (``ds_*``) are numba-compiled and operate on
``(hi, lo)`` tuples; the force kernel calls them directly.  :class:`TwoFloat`
and the ``ex_*`` functions are the checked Python-facing API.

Accuracy is only claimed while ``hi`` stays a normal binary32 number.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

__all__ = [
    "TwoFloat",
    "ex_from_wide",
    "ex_to_wide",
    "ex_add",
    "ex_sub",
    "ex_mul",
    "ex_div",
    "ex_sqrt",
    "ex_neg",
    "ex_abs",
    "split_array",
    "join_array",
    "add_arrays",
    "mul_arrays",
    "div_arrays",
    "sqrt_arrays",
]

F32_MAX = float(np.finfo(np.float32).max)
F32_TINY = float(np.finfo(np.float32).tiny)

# 2**12 + 1 splits a 24-bit significand into two 12-bit halves.
_SPLITTER = np.float32(4097.0)
_ZERO = np.float32(0.0)


# ---------------------------------------------------------------------------
# error-free transformations (float32 only)
# ---------------------------------------------------------------------------

@njit(cache=True, error_model="numpy")
def two_sum(a, b):
    s = a + b
    bb = s - a
    e = (a - (s - bb)) + (b - bb)
    return s, e


@njit(cache=True, error_model="numpy")
def fast_two_sum(a, b):
    # requires |a| >= |b| (or a == 0)
    s = a + b
    e = b - (s - a)
    return s, e


@njit(cache=True, error_model="numpy")
def split(a):
    t = _SPLITTER * a
    hi = t - (t - a)
    return hi, a - hi


@njit(cache=True, error_model="numpy")
def two_prod(a, b):
    p = a * b
    ah, al = split(a)
    bh, bl = split(b)
    e = ((ah * bh - p) + ah * bl + al * bh) + al * bl
    return p, e


# ---------------------------------------------------------------------------
# double-single arithmetic on (hi, lo) pairs
# ---------------------------------------------------------------------------

@njit(cache=True, error_model="numpy")
def ds_add(ah, al, bh, bl):
    s, e = two_sum(ah, bh)
    t, f = two_sum(al, bl)
    e = e + t
    s, e = fast_two_sum(s, e)
    e = e + f
    return fast_two_sum(s, e)


@njit(cache=True, error_model="numpy")
def ds_sub(ah, al, bh, bl):
    return ds_add(ah, al, -bh, -bl)


@njit(cache=True, error_model="numpy")
def ds_mul(ah, al, bh, bl):
    p, e = two_prod(ah, bh)
    e = e + (ah * bl + al * bh)
    return fast_two_sum(p, e)


@njit(cache=True, error_model="numpy")
def ds_mul_f(ah, al, b):
    """Multiply a pair by a plain float32."""
    p, e = two_prod(ah, b)
    e = e + al * b
    return fast_two_sum(p, e)


@njit(cache=True, error_model="numpy")
def ds_div(ah, al, bh, bl):
    q1 = ah / bh
    ph, pl = ds_mul_f(bh, bl, q1)
    rh, rl = ds_sub(ah, al, ph, pl)
    q2 = rh / bh
    ph, pl = ds_mul_f(bh, bl, q2)
    rh, rl = ds_sub(rh, rl, ph, pl)
    q3 = rh / bh
    q1, q2 = fast_two_sum(q1, q2)
    return ds_add(q1, q2, q3, _ZERO)


@njit(cache=True, error_model="numpy")
def ds_sqrt(ah, al):
    if ah <= 0:
        return _ZERO, _ZERO
    x = np.sqrt(ah)
    p, e = two_prod(x, x)
    rh, rl = ds_sub(ah, al, p, e)
    return fast_two_sum(x, rh / (x + x))


# ---------------------------------------------------------------------------
# bulk array versions, used by tests and by the kernel's import/export path
# ---------------------------------------------------------------------------

@njit(cache=True, error_model="numpy")
def add_arrays(ah, al, bh, bl):
    n = ah.shape[0]
    rh = np.empty(n, np.float32)
    rl = np.empty(n, np.float32)
    for k in range(n):
        rh[k], rl[k] = ds_add(ah[k], al[k], bh[k], bl[k])
    return rh, rl


@njit(cache=True, error_model="numpy")
def mul_arrays(ah, al, bh, bl):
    n = ah.shape[0]
    rh = np.empty(n, np.float32)
    rl = np.empty(n, np.float32)
    for k in range(n):
        rh[k], rl[k] = ds_mul(ah[k], al[k], bh[k], bl[k])
    return rh, rl


@njit(cache=True, error_model="numpy")
def div_arrays(ah, al, bh, bl):
    n = ah.shape[0]
    rh = np.empty(n, np.float32)
    rl = np.empty(n, np.float32)
    for k in range(n):
        rh[k], rl[k] = ds_div(ah[k], al[k], bh[k], bl[k])
    return rh, rl


@njit(cache=True, error_model="numpy")
def sqrt_arrays(ah, al):
    n = ah.shape[0]
    rh = np.empty(n, np.float32)
    rl = np.empty(n, np.float32)
    for k in range(n):
        rh[k], rl[k] = ds_sqrt(ah[k], al[k])
    return rh, rl


def split_array(x):
    """Convert a float64 array to ``(hi, lo)`` float32 arrays.

    Raises OverflowError if any nonzero magnitude leaves the normal binary32
    range, ValueError on NaN or infinity.
    """
    x = np.asarray(x, dtype=np.float64)
    if not np.all(np.isfinite(x)):
        raise ValueError("cannot convert non-finite values to EX")
    mag = np.abs(x)
    if np.any(mag > F32_MAX) or np.any((mag > 0) & (mag < F32_TINY)):
        raise OverflowError("value outside the binary32 normal range")
    hi = x.astype(np.float32)
    lo = (x - hi.astype(np.float64)).astype(np.float32)
    return hi, lo


def join_array(hi, lo):
    return np.asarray(hi, np.float64) + np.asarray(lo, np.float64)


# ---------------------------------------------------------------------------
# scalar API
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TwoFloat:
    """An EX scalar: the exact real number ``hi + lo``."""

    hi: np.float32
    lo: np.float32 = np.float32(0.0)

    def __post_init__(self):
        object.__setattr__(self, "hi", np.float32(self.hi))
        object.__setattr__(self, "lo", np.float32(self.lo))

    def __float__(self):
        return ex_to_wide(self)

    def __add__(self, other):
        return ex_add(self, _coerce(other))

    __radd__ = __add__

    def __sub__(self, other):
        return ex_sub(self, _coerce(other))

    def __rsub__(self, other):
        return ex_sub(_coerce(other), self)

    def __mul__(self, other):
        return ex_mul(self, _coerce(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        return ex_div(self, _coerce(other))

    def __rtruediv__(self, other):
        return ex_div(_coerce(other), self)

    def __neg__(self):
        return ex_neg(self)

    def __abs__(self):
        return ex_abs(self)

    # Non-overlapping pairs order lexicographically.
    def _key(self):
        return (float(self.hi), float(self.lo))

    def __lt__(self, other):
        return self._key() < _coerce(other)._key()

    def __le__(self, other):
        return self._key() <= _coerce(other)._key()

    def __gt__(self, other):
        return self._key() > _coerce(other)._key()

    def __ge__(self, other):
        return self._key() >= _coerce(other)._key()

    def is_normalized(self):
        """True when ``hi`` is the binary32 rounding of ``hi + lo``."""
        return np.float32(float(self.hi) + float(self.lo)) == self.hi


def _coerce(x):
    if isinstance(x, TwoFloat):
        return x
    return ex_from_wide(float(x))


def _checked(h, l):
    if not (np.isfinite(h) and np.isfinite(l)):
        raise OverflowError("EX result overflowed the binary32 range")
    return TwoFloat(h, l)


def ex_from_wide(x: float) -> TwoFloat:
    x = float(x)
    if x != x or x in (float("inf"), float("-inf")):
        raise ValueError(f"cannot convert {x!r} to EX")
    mag = abs(x)
    if mag > F32_MAX or 0 < mag < F32_TINY:
        raise OverflowError(f"{x!r} is outside the binary32 normal range")
    hi = np.float32(x)
    if not np.isfinite(hi):
        raise OverflowError(f"{x!r} rounds to infinity in binary32")
    return TwoFloat(hi, np.float32(x - float(hi)))


def ex_to_wide(a: TwoFloat) -> float:
    return float(a.hi) + float(a.lo)


def ex_add(a: TwoFloat, b: TwoFloat) -> TwoFloat:
    return _checked(*ds_add(a.hi, a.lo, b.hi, b.lo))


def ex_sub(a: TwoFloat, b: TwoFloat) -> TwoFloat:
    return _checked(*ds_sub(a.hi, a.lo, b.hi, b.lo))


def ex_mul(a: TwoFloat, b: TwoFloat) -> TwoFloat:
    return _checked(*ds_mul(a.hi, a.lo, b.hi, b.lo))


def ex_div(a: TwoFloat, b: TwoFloat) -> TwoFloat:
    if b.hi == 0:
        raise ZeroDivisionError("EX division by zero")
    return _checked(*ds_div(a.hi, a.lo, b.hi, b.lo))


def ex_sqrt(a: TwoFloat) -> TwoFloat:
    if a.hi < 0:
        raise ValueError("square root of a negative EX value")
    return _checked(*ds_sqrt(a.hi, a.lo))


def ex_neg(a: TwoFloat) -> TwoFloat:
    return TwoFloat(-a.hi, -a.lo)


def ex_abs(a: TwoFloat) -> TwoFloat:
    return ex_neg(a) if a.hi < 0 else a
