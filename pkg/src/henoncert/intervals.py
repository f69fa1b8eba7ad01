"""Outward-rounded interval arithmetic over R, C and C^2 on dyadic endpoints.

Every operation returns an enclosure of the exact set-valued result; when the
global precision cap is exceeded, endpoints are rounded outward.  All values
are immutable and all operations pure.
"""

from __future__ import annotations

from contextlib import contextmanager

from .dyadic import Dyadic, ZERO, dy_max, dy_min, div_dyadic, sqrt_dyadic

DEFAULT_PRECISION = 80
_prec = DEFAULT_PRECISION


def get_precision() -> int:
    return _prec


@contextmanager
def precision(bits: int):
    """Temporarily set the outward-rounding precision cap (significant bits)."""
    global _prec
    old = _prec
    _prec = bits
    try:
        yield
    finally:
        _prec = old


class DivisionByIntervalContainingZero(ArithmeticError):
    pass


class RealInterval:
    """Closed interval [lo, hi] with dyadic endpoints."""

    __slots__ = ("lo", "hi")

    def __init__(self, lo: Dyadic, hi: Dyadic):
        if lo > hi:
            raise ValueError(f"empty interval: {lo} > {hi}")
        self.lo = lo
        self.hi = hi

    @staticmethod
    def _mk(lo: Dyadic, hi: Dyadic) -> "RealInterval":
        """Internal constructor for endpoints already known to be ordered."""
        iv = RealInterval.__new__(RealInterval)
        iv.lo = lo
        iv.hi = hi
        return iv

    @classmethod
    def point(cls, d: Dyadic) -> "RealInterval":
        return cls(d, d)

    @classmethod
    def from_int(cls, n: int) -> "RealInterval":
        d = Dyadic(n)
        return cls(d, d)

    @classmethod
    def from_floats(cls, lo: float, hi: float) -> "RealInterval":
        return cls(Dyadic.from_float(lo), Dyadic.from_float(hi))

    def _round(self) -> "RealInterval":
        p = _prec
        lo, hi = self.lo, self.hi
        if lo.bit_length() <= p and hi.bit_length() <= p:
            return self
        return RealInterval._mk(lo.round_down(p), hi.round_up(p))

    # -- arithmetic ----------------------------------------------------------

    def __add__(self, o: "RealInterval") -> "RealInterval":
        return RealInterval._mk(self.lo + o.lo, self.hi + o.hi)._round()

    def __sub__(self, o: "RealInterval") -> "RealInterval":
        return RealInterval._mk(self.lo - o.hi, self.hi - o.lo)._round()

    def __neg__(self) -> "RealInterval":
        return RealInterval._mk(-self.hi, -self.lo)

    def __mul__(self, o: "RealInterval") -> "RealInterval":
        # sign-cased endpoint selection: at most two exact products except in
        # the mixed/mixed case
        a, b = self.lo, self.hi
        c, d = o.lo, o.hi
        if a.m >= 0:
            if c.m >= 0:
                lo, hi = a * c, b * d
            elif d.m <= 0:
                lo, hi = b * c, a * d
            else:
                lo, hi = b * c, b * d
        elif b.m <= 0:
            if c.m >= 0:
                lo, hi = a * d, b * c
            elif d.m <= 0:
                lo, hi = b * d, a * c
            else:
                lo, hi = a * d, a * c
        else:
            if c.m >= 0:
                lo, hi = a * d, b * d
            elif d.m <= 0:
                lo, hi = b * c, a * c
            else:
                lo = dy_min(a * d, b * c)
                hi = dy_max(a * c, b * d)
        return RealInterval._mk(lo, hi)._round()

    def __truediv__(self, o: "RealInterval") -> "RealInterval":
        if o.lo.sign() <= 0 <= o.hi.sign():
            raise DivisionByIntervalContainingZero(f"0 in divisor [{o.lo}, {o.hi}]")
        p = _prec
        c1 = div_dyadic(self.lo, o.lo, p, "down")
        c2 = div_dyadic(self.lo, o.hi, p, "down")
        c3 = div_dyadic(self.hi, o.lo, p, "up")
        c4 = div_dyadic(self.hi, o.hi, p, "up")
        lo = dy_min(dy_min(c1, c2), dy_min(div_dyadic(self.hi, o.lo, p, "down"),
                                           div_dyadic(self.hi, o.hi, p, "down")))
        hi = dy_max(dy_max(c3, c4), dy_max(div_dyadic(self.lo, o.lo, p, "up"),
                                           div_dyadic(self.lo, o.hi, p, "up")))
        return RealInterval(lo, hi)

    def sq(self) -> "RealInterval":
        """Enclosure of {x^2}; tighter than self*self when 0 is inside."""
        a, b = self.lo, self.hi
        if a.sign() >= 0:
            return RealInterval._mk(a * a, b * b)._round()
        if b.sign() <= 0:
            return RealInterval._mk(b * b, a * a)._round()
        return RealInterval._mk(ZERO, dy_max(a * a, b * b))._round()

    def sqrt(self) -> "RealInterval":
        if self.lo.sign() < 0:
            raise ValueError("sqrt of interval with negative lower endpoint")
        p = _prec
        return RealInterval(sqrt_dyadic(self.lo, p, "down"), sqrt_dyadic(self.hi, p, "up"))

    def abs_enclosure(self) -> "RealInterval":
        a, b = self.lo, self.hi
        if a.sign() >= 0:
            return self
        if b.sign() <= 0:
            return RealInterval(-b, -a)
        return RealInterval(ZERO, dy_max(-a, b))

    def scale2(self, k: int) -> "RealInterval":
        return RealInterval(self.lo.scale2(k), self.hi.scale2(k))

    # -- set operations --------------------------------------------------------

    def contains(self, d: Dyadic) -> bool:
        return self.lo <= d <= self.hi

    def contains_zero(self) -> bool:
        return self.lo.sign() <= 0 <= self.hi.sign()

    def subset_of(self, o: "RealInterval") -> bool:
        return o.lo <= self.lo and self.hi <= o.hi

    def strictly_inside(self, o: "RealInterval") -> bool:
        return o.lo < self.lo and self.hi < o.hi

    def intersect(self, o: "RealInterval"):
        lo = dy_max(self.lo, o.lo)
        hi = dy_min(self.hi, o.hi)
        if lo > hi:
            return None
        return RealInterval(lo, hi)

    def hull(self, o: "RealInterval") -> "RealInterval":
        return RealInterval(dy_min(self.lo, o.lo), dy_max(self.hi, o.hi))

    # -- metrics -----------------------------------------------------------------

    def midpoint(self) -> Dyadic:
        return (self.lo + self.hi).scale2(-1).round_down(_prec)

    def diameter(self) -> Dyadic:
        return self.hi - self.lo

    def mag(self) -> Dyadic:
        """Upper bound of |x| over the interval."""
        return dy_max(abs(self.lo), abs(self.hi))

    def mig(self) -> Dyadic:
        """Lower bound of |x| over the interval."""
        if self.contains_zero():
            return ZERO
        return dy_min(abs(self.lo), abs(self.hi))

    def is_point(self) -> bool:
        return self.lo == self.hi

    def __repr__(self):
        return f"[{float(self.lo)!r}, {float(self.hi)!r}]"


R_ZERO = RealInterval.point(ZERO)
R_ONE = RealInterval.from_int(1)


class ComplexRect(object):
    """Axis-aligned rectangle re + i*im enclosing a set of complex numbers."""

    __slots__ = ("re", "im")

    def __init__(self, re: RealInterval, im: RealInterval):
        self.re = re
        self.im = im

    @classmethod
    def point(cls, re: Dyadic, im: Dyadic) -> "ComplexRect":
        return cls(RealInterval.point(re), RealInterval.point(im))

    @classmethod
    def from_complex(cls, z: complex) -> "ComplexRect":
        return cls.point(Dyadic.from_float(z.real), Dyadic.from_float(z.imag))

    @classmethod
    def from_int(cls, n: int) -> "ComplexRect":
        return cls(RealInterval.from_int(n), R_ZERO)

    def __add__(self, o: "ComplexRect") -> "ComplexRect":
        return ComplexRect(self.re + o.re, self.im + o.im)

    def __sub__(self, o: "ComplexRect") -> "ComplexRect":
        return ComplexRect(self.re - o.re, self.im - o.im)

    def __neg__(self) -> "ComplexRect":
        return ComplexRect(-self.re, -self.im)

    def __mul__(self, o: "ComplexRect") -> "ComplexRect":
        a, b, c, d = self.re, self.im, o.re, o.im
        return ComplexRect(a * c - b * d, a * d + b * c)

    def __truediv__(self, o: "ComplexRect") -> "ComplexRect":
        # multiply by conjugate, divide by |o|^2
        n2 = o.norm_sq()
        if n2.contains_zero():
            raise DivisionByIntervalContainingZero("0 in complex divisor rectangle")
        num = self * o.conj()
        return ComplexRect(num.re / n2, num.im / n2)

    def conj(self) -> "ComplexRect":
        return ComplexRect(self.re, -self.im)

    def norm_sq(self) -> RealInterval:
        return self.re.sq() + self.im.sq()

    def abs_enclosure(self) -> RealInterval:
        return self.norm_sq().sqrt()

    def scale2(self, k: int) -> "ComplexRect":
        return ComplexRect(self.re.scale2(k), self.im.scale2(k))

    def contains_zero(self) -> bool:
        return self.re.contains_zero() and self.im.contains_zero()

    def subset_of(self, o: "ComplexRect") -> bool:
        return self.re.subset_of(o.re) and self.im.subset_of(o.im)

    def strictly_inside(self, o: "ComplexRect") -> bool:
        return self.re.strictly_inside(o.re) and self.im.strictly_inside(o.im)

    def intersect(self, o: "ComplexRect"):
        re = self.re.intersect(o.re)
        if re is None:
            return None
        im = self.im.intersect(o.im)
        if im is None:
            return None
        return ComplexRect(re, im)

    def hull(self, o: "ComplexRect") -> "ComplexRect":
        return ComplexRect(self.re.hull(o.re), self.im.hull(o.im))

    def midpoint(self) -> tuple[Dyadic, Dyadic]:
        return (self.re.midpoint(), self.im.midpoint())

    def mid_complex(self) -> complex:
        return complex(float(self.re.midpoint()), float(self.im.midpoint()))

    def diameter(self) -> Dyadic:
        return dy_max(self.re.diameter(), self.im.diameter())

    def is_point(self) -> bool:
        return self.re.is_point() and self.im.is_point()

    def __repr__(self):
        return f"ComplexRect({self.re!r}, {self.im!r})"


C_ZERO = ComplexRect(R_ZERO, R_ZERO)
C_ONE = ComplexRect(R_ONE, R_ZERO)


class BoxC2:
    """A box in C^2 = R^4: a pair of complex rectangles (z, w)."""

    __slots__ = ("z", "w")

    def __init__(self, z: ComplexRect, w: ComplexRect):
        self.z = z
        self.w = w

    @classmethod
    def point(cls, z: complex, w: complex) -> "BoxC2":
        return cls(ComplexRect.from_complex(z), ComplexRect.from_complex(w))

    def coords(self) -> tuple[RealInterval, RealInterval, RealInterval, RealInterval]:
        return (self.z.re, self.z.im, self.w.re, self.w.im)

    def subset_of(self, o: "BoxC2") -> bool:
        return self.z.subset_of(o.z) and self.w.subset_of(o.w)

    def intersect(self, o: "BoxC2"):
        z = self.z.intersect(o.z)
        if z is None:
            return None
        w = self.w.intersect(o.w)
        if w is None:
            return None
        return BoxC2(z, w)

    def hull(self, o: "BoxC2") -> "BoxC2":
        return BoxC2(self.z.hull(o.z), self.w.hull(o.w))

    def diameter_linf(self) -> Dyadic:
        return dy_max(self.z.diameter(), self.w.diameter())

    def midpoint(self):
        return (self.z.midpoint(), self.w.midpoint())

    def __repr__(self):
        return f"BoxC2({self.z!r}, {self.w!r})"


def norm_linf_enclosure(b: BoxC2) -> RealInterval:
    """Enclosure of the L-infinity norm max{|Re|,|Im|} over a box in C^2."""
    mags = [c.abs_enclosure() for c in b.coords()]
    lo = mags[0].lo
    hi = mags[0].hi
    for m in mags[1:]:
        lo = dy_max(lo, m.lo)
        hi = dy_max(hi, m.hi)
    return RealInterval(lo, hi)


def euclid_norm_enclosure(v: tuple[ComplexRect, ComplexRect]) -> RealInterval:
    """Enclosure of the Euclidean (tangent-space) norm of a vector rectangle."""
    s = v[0].norm_sq() + v[1].norm_sq()
    return s.sqrt()


class MatrixRect:
    """2x2 complex matrix enclosure [[a, b], [c, d]]."""

    __slots__ = ("a", "b", "c", "d")

    def __init__(self, a: ComplexRect, b: ComplexRect, c: ComplexRect, d: ComplexRect):
        self.a = a
        self.b = b
        self.c = c
        self.d = d

    @classmethod
    def identity(cls) -> "MatrixRect":
        return cls(C_ONE, C_ZERO, C_ZERO, C_ONE)

    def __mul__(self, o: "MatrixRect") -> "MatrixRect":
        return MatrixRect(
            self.a * o.a + self.b * o.c,
            self.a * o.b + self.b * o.d,
            self.c * o.a + self.d * o.c,
            self.c * o.b + self.d * o.d,
        )

    def apply(self, v: tuple[ComplexRect, ComplexRect]) -> tuple[ComplexRect, ComplexRect]:
        return (self.a * v[0] + self.b * v[1], self.c * v[0] + self.d * v[1])

    def det(self) -> ComplexRect:
        return self.a * self.d - self.b * self.c

    def inverse(self) -> "MatrixRect":
        det = self.det()
        if det.contains_zero():
            raise DivisionByIntervalContainingZero("0 in determinant rectangle")
        return MatrixRect(self.d / det, -self.b / det, -self.c / det, self.a / det)

    def op_norm_upper(self) -> Dyadic:
        """Upper bound of the Euclidean operator norm (via the Frobenius norm)."""
        s = (self.a.norm_sq() + self.b.norm_sq() + self.c.norm_sq() + self.d.norm_sq())
        return s.sqrt().hi

    def entries(self):
        return (self.a, self.b, self.c, self.d)

    def __repr__(self):
        return f"MatrixRect({self.a!r}, {self.b!r}, {self.c!r}, {self.d!r})"
