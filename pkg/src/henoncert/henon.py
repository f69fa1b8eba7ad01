"""Compositions of generalized Henon maps (p(z) - a*w, z) on C^2.

Rigorous evaluation, inverse, first/second derivatives, the filtration radius
R with R(f) inside V_R = [-R, R]^4, and the dynamical degree.  Coefficients
are stored as complex rectangles; exact maps use degenerate rectangles, the
parameter sweep inflates them.
"""

from __future__ import annotations

from .dyadic import Dyadic, ZERO, ONE, dy_max, div_dyadic
from .intervals import (
    BoxC2,
    C_ONE,
    C_ZERO,
    ComplexRect,
    MatrixRect,
    RealInterval,
    R_ZERO,
    get_precision,
)


class PrecisionExhausted(ArithmeticError):
    """Enclosure diameter exceeded the caller-set budget."""


class MonicPoly:
    """Monic complex polynomial of degree >= 2; coeffs[j] multiplies z^j."""

    __slots__ = ("degree", "coeffs")

    def __init__(self, degree: int, coeffs: list[ComplexRect]):
        if degree < 2:
            raise ValueError("polynomial degree must be >= 2")
        if len(coeffs) != degree:
            raise ValueError("need exactly `degree` coefficients (leading 1 implicit)")
        self.degree = degree
        self.coeffs = list(coeffs)

    def eval_rect(self, z: ComplexRect) -> ComplexRect:
        acc = C_ONE
        for j in range(self.degree - 1, -1, -1):
            acc = acc * z + self.coeffs[j]
        return acc

    def deriv_rect(self, z: ComplexRect) -> ComplexRect:
        acc = ComplexRect.from_int(self.degree)
        for j in range(self.degree - 1, 0, -1):
            acc = acc * z + self.coeffs[j] * ComplexRect.from_int(j)
        return acc

    def second_deriv_mag_upper(self, z: ComplexRect) -> Dyadic:
        """Upper bound of |p''| over the rectangle z, by the triangle inequality:
        sum_j j(j-1)|c_j| |z|^{j-2} + d(d-1)|z|^{d-2}."""
        zmag = z.abs_enclosure().hi
        total = ZERO
        pw = ONE  # |z|^{j-2} built up from j = 2
        for j in range(2, self.degree):
            cmag = c_abs_upper(self.coeffs[j])
            total = total + Dyadic(j * (j - 1)) * cmag * pw
            pw = pw * zmag
        total = total + Dyadic(self.degree * (self.degree - 1)) * pw
        return total.round_up(get_precision())

    def eval_float(self, z: complex) -> complex:
        acc = 1.0 + 0.0j
        for j in range(self.degree - 1, -1, -1):
            acc = acc * z + self.coeffs[j].mid_complex()
        return acc

    def deriv_float(self, z: complex) -> complex:
        acc = complex(self.degree)
        for j in range(self.degree - 1, 0, -1):
            acc = acc * z + j * self.coeffs[j].mid_complex()
        return acc

    def is_exact(self) -> bool:
        return all(c.is_point() for c in self.coeffs)


def c_abs_upper(c: ComplexRect) -> Dyadic:
    return c.abs_enclosure().hi


class HenonFactor:
    """One generalized Henon factor (z, w) -> (p(z) - a*w, z) with a != 0."""

    __slots__ = ("p", "a")

    def __init__(self, p: MonicPoly, a: ComplexRect):
        if a.contains_zero():
            raise ValueError("Jacobian parameter a must exclude 0")
        self.p = p
        self.a = a

    # forward: (z, w) -> (p(z) - a w, z)
    def fwd(self, x: BoxC2) -> BoxC2:
        return BoxC2(self.p.eval_rect(x.z) - self.a * x.w, x.z)

    # inverse: (z, w) -> (w, (p(w) - z) / a)
    def inv(self, x: BoxC2) -> BoxC2:
        return BoxC2(x.w, (self.p.eval_rect(x.w) - x.z) / self.a)

    def jac_fwd(self, x: BoxC2) -> MatrixRect:
        return MatrixRect(self.p.deriv_rect(x.z), -self.a, C_ONE, C_ZERO)

    def jac_inv(self, x: BoxC2) -> MatrixRect:
        pa = self.p.deriv_rect(x.w) / self.a
        return MatrixRect(C_ZERO, C_ONE, -(C_ONE / self.a), pa)

    def fwd_float(self, z: complex, w: complex) -> tuple[complex, complex]:
        return (self.p.eval_float(z) - self.a.mid_complex() * w, z)

    def inv_float(self, z: complex, w: complex) -> tuple[complex, complex]:
        return (w, (self.p.eval_float(w) - z) / self.a.mid_complex())


class PolyDiffeo:
    """A composition of Henon factors, applied first-to-last."""

    __slots__ = ("factors",)

    def __init__(self, factors: list[HenonFactor]):
        if not factors:
            raise ValueError("need at least one factor")
        self.factors = list(factors)

    def is_exact(self) -> bool:
        return all(f.p.is_exact() and f.a.is_point() for f in self.factors)

    def jacobian_det(self) -> ComplexRect:
        """det D f, constant in x: each factor contributes det = a exactly
        (det [[p'(z), -a], [1, 0]] = a), so the composition's determinant is
        the product of the Jacobian parameters."""
        det = self.factors[0].a
        for fac in self.factors[1:]:
            det = det * fac.a
        return det

    # -- evaluation -----------------------------------------------------------

    def eval(self, x: BoxC2, direction: str = "forward") -> BoxC2:
        if direction == "forward":
            for fac in self.factors:
                x = fac.fwd(x)
            return x
        if direction == "inverse":
            for fac in reversed(self.factors):
                x = fac.inv(x)
            return x
        raise ValueError(f"bad direction {direction!r}")

    def eval_float(self, z: complex, w: complex, direction: str = "forward"):
        if direction == "forward":
            for fac in self.factors:
                z, w = fac.fwd_float(z, w)
        else:
            for fac in reversed(self.factors):
                z, w = fac.inv_float(z, w)
        return z, w

    def jacobian(self, x: BoxC2, direction: str = "forward") -> MatrixRect:
        if direction == "forward":
            jac = self.factors[0].jac_fwd(x)
            y = self.factors[0].fwd(x)
            for fac in self.factors[1:]:
                jac = fac.jac_fwd(y) * jac
                y = fac.fwd(y)
            return jac
        if direction == "inverse":
            fac = self.factors[-1]
            jac = fac.jac_inv(x)
            y = fac.inv(x)
            for fac in reversed(self.factors[:-1]):
                jac = fac.jac_inv(y) * jac
                y = fac.inv(y)
            return jac
        raise ValueError(f"bad direction {direction!r}")

    def jacobian_float(self, z: complex, w: complex, direction: str = "forward"):
        """2x2 complex float Jacobian, for Newton polishing only."""
        m = ((1.0 + 0j, 0j), (0j, 1.0 + 0j))
        facs = self.factors if direction == "forward" else list(reversed(self.factors))
        for fac in facs:
            if direction == "forward":
                dp = fac.p.deriv_float(z)
                a = fac.a.mid_complex()
                step = ((dp, -a), (1.0 + 0j, 0j))
                z, w = fac.fwd_float(z, w)
            else:
                a = fac.a.mid_complex()
                dp = fac.p.deriv_float(w)
                step = ((0j, 1.0 + 0j), (-1.0 / a, dp / a))
                z, w = fac.inv_float(z, w)
            m = (
                (step[0][0] * m[0][0] + step[0][1] * m[1][0],
                 step[0][0] * m[0][1] + step[0][1] * m[1][1]),
                (step[1][0] * m[0][0] + step[1][1] * m[1][0],
                 step[1][0] * m[0][1] + step[1][1] * m[1][1]),
            )
        return m

    def iterate_jacobian(self, x0: BoxC2, m: int, direction: str = "forward",
                         diameter_budget: Dyadic | None = None) -> MatrixRect:
        """Enclosure of D f^{+-m} at x0 via the chain rule along the orbit."""
        if m < 1:
            raise ValueError("m must be >= 1")
        jac = self.jacobian(x0, direction)
        y = self.eval(x0, direction)
        for _ in range(m - 1):
            jac = self.jacobian(y, direction) * jac
            y = self.eval(y, direction)
            if diameter_budget is not None:
                d = ZERO
                for entry in jac.entries():
                    d = dy_max(d, entry.diameter())
                if d > diameter_budget:
                    raise PrecisionExhausted("Jacobian enclosure diameter over budget")
        return jac

    # -- invariants -----------------------------------------------------------

    def dynamical_degree(self) -> int:
        d = 1
        for fac in self.factors:
            d *= fac.p.degree
        return d

    def jacobian_constant(self) -> ComplexRect:
        """Enclosure of the constant Jacobian determinant (product of the a's)."""
        acc = self.factors[0].a
        for fac in self.factors[1:]:
            acc = acc * fac.a
        return acc

    # -- filtration radius ------------------------------------------------------

    def check_filtration_radius(self, R: Dyadic) -> bool:
        """Rigorously verify that V_R = [-R, R]^4 traps all bounded orbits.

        Per factor we require |p(z)| >= c*r for all |z| = r >= R, with
        c = max(2 + |a|, 1 + 2|a|) (forward and backward escape).  The lower
        bound |p(z)| >= r^d (1 - sum_j |c_j| R^{j-d}) makes the inequality
        monotone in r, so checking r = R suffices.
        """
        if R.sign() <= 0:
            return False
        prec = get_precision()
        for fac in self.factors:
            d = fac.p.degree
            amag = c_abs_upper(fac.a)
            c_req = dy_max(Dyadic(2) + amag, ONE + amag.scale2(1))
            # sigma = sum_j |c_j| / R^{d-j}, rounded up
            sigma = ZERO
            rpow = R  # R^{d-j} built from j = d-1 downward
            for j in range(d - 1, -1, -1):
                cmag = c_abs_upper(fac.p.coeffs[j])
                if not cmag.is_zero():
                    sigma = sigma + div_dyadic(cmag, rpow, prec, "up")
                rpow = rpow * R
            if sigma >= ONE:
                return False
            # need R^{d-1} (1 - sigma) >= c_req, evaluated rounded down
            lhs = ONE
            for _ in range(d - 1):
                lhs = (lhs * R).round_down(prec)
            lhs = (lhs * (ONE - sigma)).round_down(prec)
            if lhs < c_req:
                return False
        return True

    def filtration_radius(self) -> Dyadic:
        """Smallest R on the 1/8-grid passing check_filtration_radius."""
        step = Dyadic(1, -3)
        hi = 1
        while not self.check_filtration_radius(Dyadic(hi, -3)):
            hi *= 2
            if hi > 1 << 60:  # cannot happen for monic degree >= 2
                raise RuntimeError("filtration radius search diverged")
        lo = hi // 2  # fails (or 0)
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if self.check_filtration_radius(Dyadic(mid, -3)):
                hi = mid
            else:
                lo = mid
        return Dyadic(hi, -3)

    def v_box(self, R: Dyadic) -> BoxC2:
        iv = RealInterval(-R, R)
        cr = ComplexRect(iv, iv)
        return BoxC2(cr, cr)

    # -- second derivative bound --------------------------------------------------

    def second_derivative_bound(self, R: Dyadic, m: int) -> Dyadic:
        """Dyadic M2 >= sup of ||D^2 f^m|| over V_{2R} (covers doubled boxes).

        Interval evaluation of the chain/product rule for second derivatives,
        factor by factor and iterate by iterate:
          M2(g o h) <= M2_g * M1_h^2 + M1_g * M2_h.
        """
        if m < 1:
            raise ValueError("m must be >= 1")
        box = self.v_box(R.scale2(1))
        m1_tot: Dyadic | None = None
        m2_tot: Dyadic | None = None
        for _ in range(m):
            for fac in self.factors:
                j = fac.jac_fwd(box)
                m1_f = j.op_norm_upper()
                m2_f = fac.p.second_deriv_mag_upper(box.z)
                if m1_tot is None:
                    m1_tot, m2_tot = m1_f, m2_f
                else:
                    m2_tot = m2_f * m1_tot * m1_tot + m1_f * m2_tot
                    m1_tot = m1_f * m1_tot
                box = fac.fwd(box)
        prec = get_precision()
        return m2_tot.round_up(prec)


def quadratic_henon(a, c) -> PolyDiffeo:
    """The classical complex Henon map H_{a,c}(z, w) = (z^2 + c - a w, z)."""
    a_rect = _as_rect(a)
    c_rect = _as_rect(c)
    p = MonicPoly(2, [c_rect, ComplexRect(R_ZERO, R_ZERO)])
    return PolyDiffeo([HenonFactor(p, a_rect)])


def _as_rect(v) -> ComplexRect:
    if isinstance(v, ComplexRect):
        return v
    if isinstance(v, Dyadic):
        return ComplexRect.point(v, ZERO)
    if isinstance(v, (int, float)):
        return ComplexRect.point(Dyadic.from_float(float(v)), ZERO)
    if isinstance(v, complex):
        return ComplexRect.from_complex(v)
    raise TypeError(f"cannot interpret {v!r} as a complex coefficient")
