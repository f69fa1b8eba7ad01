"""Exact dyadic rationals m * 2**e with directed rounding.

These are the ideal scalars of the whole artifact: every certified constant
(R, Q, Delta, box corners, orbit approximations) is a Dyadic, and every
rounding step is explicit and platform independent.
"""

from __future__ import annotations

from math import isqrt


class Dyadic:
    """Arbitrary-precision dyadic rational, canonical form (odd or zero mantissa)."""

    __slots__ = ("m", "e")

    def __init__(self, m: int, e: int = 0):
        if m == 0:
            self.m = 0
            self.e = 0
        else:
            # strip factors of two from the mantissa
            t = (m & -m).bit_length() - 1
            if t:
                m >>= t
                e += t
            self.m = m
            self.e = e

    # -- construction ------------------------------------------------------

    @classmethod
    def from_int(cls, n: int) -> "Dyadic":
        return cls(n, 0)

    @classmethod
    def from_float(cls, x: float) -> "Dyadic":
        """Exact conversion; every finite double is a dyadic rational."""
        num, den = float(x).as_integer_ratio()
        return cls(num, -(den.bit_length() - 1))

    @classmethod
    def from_pair(cls, pair) -> "Dyadic":
        m, e = pair
        if not isinstance(m, int) or not isinstance(e, int):
            raise ValueError("dyadic pair must be two integers")
        return cls(m, e)

    def as_pair(self) -> tuple[int, int]:
        return (self.m, self.e)

    # -- queries -----------------------------------------------------------

    def is_zero(self) -> bool:
        return self.m == 0

    def sign(self) -> int:
        return (self.m > 0) - (self.m < 0)

    def bit_length(self) -> int:
        return abs(self.m).bit_length()

    def __float__(self) -> float:
        m, e = self.m, self.e
        # keep mantissa within double range before ldexp
        b = abs(m).bit_length()
        if b > 64:
            m >>= b - 64
            e += b - 64
        import math

        try:
            return math.ldexp(m, e)
        except OverflowError:
            return float("inf") if m > 0 else float("-inf")

    def __repr__(self) -> str:
        return f"Dyadic({self.m}, {self.e})"

    def __str__(self) -> str:
        return f"{self.m}*2^{self.e}" if self.e else str(self.m)

    # -- arithmetic (exact) --------------------------------------------------

    def __neg__(self) -> "Dyadic":
        return Dyadic(-self.m, self.e)

    def __abs__(self) -> "Dyadic":
        return Dyadic(abs(self.m), self.e)

    def __add__(self, other: "Dyadic") -> "Dyadic":
        a, b = self, other
        if a.m == 0:
            return b
        if b.m == 0:
            return a
        if a.e >= b.e:
            return Dyadic((a.m << (a.e - b.e)) + b.m, b.e)
        return Dyadic(a.m + (b.m << (b.e - a.e)), a.e)

    def __sub__(self, other: "Dyadic") -> "Dyadic":
        return self + (-other)

    def __mul__(self, other: "Dyadic") -> "Dyadic":
        return Dyadic(self.m * other.m, self.e + other.e)

    def scale2(self, k: int) -> "Dyadic":
        """Exact multiplication by 2**k."""
        if self.m == 0:
            return self
        return Dyadic(self.m, self.e + k)

    # -- comparisons ---------------------------------------------------------

    def _cmp(self, other: "Dyadic") -> int:
        a, b = self, other
        sa, sb = a.sign(), b.sign()
        if sa != sb:
            return (sa > sb) - (sa < sb)
        if a.e >= b.e:
            am, bm = a.m << (a.e - b.e), b.m
        else:
            am, bm = a.m, b.m << (b.e - a.e)
        return (am > bm) - (am < bm)

    def __eq__(self, other) -> bool:
        return isinstance(other, Dyadic) and self.m == other.m and self.e == other.e

    def __hash__(self) -> int:
        return hash((self.m, self.e))

    def __lt__(self, other):
        return self._cmp(other) < 0

    def __le__(self, other):
        return self._cmp(other) <= 0

    def __gt__(self, other):
        return self._cmp(other) > 0

    def __ge__(self, other):
        return self._cmp(other) >= 0

    # -- directed rounding to `prec` significant bits -------------------------

    def round_down(self, prec: int) -> "Dyadic":
        """Round toward -infinity."""
        if self.m == 0:
            return self
        bits = abs(self.m).bit_length()
        if bits <= prec:
            return self
        shift = bits - prec
        return Dyadic(self.m >> shift, self.e + shift)

    def round_up(self, prec: int) -> "Dyadic":
        """Round toward +infinity."""
        if self.m == 0:
            return self
        bits = abs(self.m).bit_length()
        if bits <= prec:
            return self
        shift = bits - prec
        return Dyadic(-((-self.m) >> shift), self.e + shift)


ZERO = Dyadic(0)
ONE = Dyadic(1)
TWO = Dyadic(2)
HALF = Dyadic(1, -1)


def dy_min(a: Dyadic, b: Dyadic) -> Dyadic:
    return a if a <= b else b


def dy_max(a: Dyadic, b: Dyadic) -> Dyadic:
    return a if a >= b else b


def div_dyadic(a: Dyadic, b: Dyadic, prec: int, mode: str) -> Dyadic:
    """a / b rounded to `prec` significant bits; mode is 'down' or 'up'."""
    if b.m == 0:
        raise ZeroDivisionError("dyadic division by zero")
    if a.m == 0:
        return ZERO
    sign = a.sign() * b.sign()
    am, bm = abs(a.m), abs(b.m)
    k = prec + bm.bit_length() - am.bit_length() + 2
    if k < 0:
        k = 0
    q, r = divmod(am << k, bm)
    e = a.e - b.e - k
    # q*2^e <= |a/b| < (q+1)*2^e
    if sign > 0:
        if mode == "down":
            return Dyadic(q, e).round_down(prec)
        return Dyadic(q + (1 if r else 0), e).round_up(prec)
    if mode == "down":
        return Dyadic(-(q + (1 if r else 0)), e).round_down(prec)
    return Dyadic(-q, e).round_up(prec)


def sqrt_dyadic(x: Dyadic, prec: int, mode: str) -> Dyadic:
    """Square root of a nonnegative dyadic, rounded to `prec` bits."""
    if x.m < 0:
        raise ValueError("sqrt of negative dyadic")
    if x.m == 0:
        return ZERO
    k = max(2 * prec + 2 - x.m.bit_length(), 0)
    if (x.e - k) % 2:
        k += 1
    n = x.m << k
    t = isqrt(n)
    e2 = (x.e - k) // 2
    if mode == "down":
        return Dyadic(t, e2).round_down(prec)
    if t * t != n:
        t += 1
    return Dyadic(t, e2).round_up(prec)


def floor_div(num: Dyadic, den: Dyadic) -> int:
    """floor(num/den) as an exact integer; den > 0."""
    assert den.m > 0
    s = num.e - den.e
    if s >= 0:
        return (num.m << s) // den.m
    return num.m // (den.m << -s)


def ceil_div(num: Dyadic, den: Dyadic) -> int:
    """ceil(num/den) as an exact integer; den > 0."""
    return -floor_div(-num, den)
