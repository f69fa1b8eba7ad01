"""Certified enumeration and classification of periodic orbits.

Enumeration walks the box chain recurrent model: every closed walk of length
m <= maxPeriod is a candidate itinerary; interval constraint propagation
around the cycle (X_i <- X_i intersect f(X_{i-1}) intersect f^{-1}(X_{i+1}))
contracts candidates, a float Newton polish supplies a center, and a
Krawczyk operator on the multiple-shooting orbit system

    F_i(x) = f(x_i) - x_{i+1 mod m} = 0

certifies existence (K(X) inside X) and uniqueness (||I - Y DF(X)||_inf < 1)
without the conditioning blowup of f^m.  Orbits are de-duplicated by cyclic
shift and reported with their prime period.
"""

from __future__ import annotations

import math

from .dyadic import Dyadic, ZERO, dy_max
from .intervals import (
    BoxC2,
    ComplexRect,
    RealInterval,
    get_precision,
)
from .henon import PolyDiffeo
from .boxmodel import ChainModel, GridSpec, build_model, full_grid, refine


class Inconclusive(Exception):
    """Subdivision floor reached without certifying or excluding an orbit."""

    def __init__(self, box, period):
        super().__init__(f"inconclusive candidate of period {period}")
        self.box = box
        self.period = period


class Undetermined(Exception):
    """Eigenvalue norm enclosure straddles 1 after the retry budget."""


class EigenData:
    """Eigenvalue enclosures of D f^{period}; eigenvectors when saddle."""

    __slots__ = ("lam_u", "lam_s", "vec_u", "vec_s", "separated")

    def __init__(self, lam_u, lam_s, vec_u=None, vec_s=None, separated=True):
        self.lam_u = lam_u
        self.lam_s = lam_s
        self.vec_u = vec_u
        self.vec_s = vec_s
        self.separated = separated


class PeriodicOrbit:
    """A certified periodic orbit; points are exact dyadic approximations."""

    __slots__ = ("period", "points", "enclosures", "precision", "eigen", "klass")

    def __init__(self, period, points, enclosures, precision):
        self.period = period          # prime period
        self.points = points          # list of (zre, zim, wre, wim) Dyadics
        self.enclosures = enclosures  # list of BoxC2, one certified orbit point each
        self.precision = precision    # Dyadic bound on |listed - true|
        self.eigen = None
        self.klass = "undetermined"

    def float_points(self):
        return [(complex(float(p[0]), float(p[1])), complex(float(p[2]), float(p[3])))
                for p in self.points]

    def sort_key(self):
        p = self.points[0]
        return (self.period, float(p[0]), float(p[1]), float(p[2]), float(p[3]))


# -- small dense complex linear algebra (pure Python, deterministic) -----------

def _solve_complex(A, b):
    """Gaussian elimination with partial pivoting; A: n x n, b: n (floats)."""
    n = len(A)
    M = [row[:] + [b[i]] for i, row in enumerate(A)]
    for col in range(n):
        piv = max(range(col, n), key=lambda r: abs(M[r][col]))
        if abs(M[piv][col]) < 1e-300:
            raise ZeroDivisionError("singular float system")
        if piv != col:
            M[col], M[piv] = M[piv], M[col]
        inv = 1.0 / M[col][col]
        for r in range(col + 1, n):
            fac = M[r][col] * inv
            if fac != 0:
                for c in range(col, n + 1):
                    M[r][c] -= fac * M[col][c]
    x = [0j] * n
    for r in range(n - 1, -1, -1):
        s = M[r][n]
        for c in range(r + 1, n):
            s -= M[r][c] * x[c]
        x[r] = s / M[r][r]
    return x


def _invert_complex(A):
    n = len(A)
    cols = []
    for j in range(n):
        e = [0j] * n
        e[j] = 1.0 + 0j
        cols.append(_solve_complex(A, e))
    return [[cols[j][i] for j in range(n)] for i in range(n)]


# -- float Newton on the orbit system -------------------------------------------

def _orbit_jacobian_float(f: PolyDiffeo, pts):
    m = len(pts)
    n = 2 * m
    J = [[0j] * n for _ in range(n)]
    for i in range(m):
        z, w = pts[i]
        jf = f.jacobian_float(z, w)
        J[2 * i][2 * i] += jf[0][0]
        J[2 * i][2 * i + 1] += jf[0][1]
        J[2 * i + 1][2 * i] += jf[1][0]
        J[2 * i + 1][2 * i + 1] += jf[1][1]
        k = (2 * i + 2) % n
        J[2 * i][k] -= 1.0
        J[2 * i + 1][k + 1] -= 1.0
    return J


def _newton_orbit(f: PolyDiffeo, pts, iters=60, tol=1e-12):
    """Polish an approximate orbit; returns the polished points or None."""
    pts = list(pts)
    m = len(pts)
    for _ in range(iters):
        G = []
        for i in range(m):
            fz, fw = f.eval_float(*pts[i])
            z1, w1 = pts[(i + 1) % m]
            G.append(fz - z1)
            G.append(fw - w1)
        try:
            delta = _solve_complex(_orbit_jacobian_float(f, pts), G)
        except ZeroDivisionError:
            return None
        step = max(abs(d) for d in delta)
        pts = [(pts[i][0] - delta[2 * i], pts[i][1] - delta[2 * i + 1])
               for i in range(m)]
        if step < tol:
            return pts
        if step > 1e6 or any(abs(z) > 1e8 for z, w in pts):
            return None
    return None


# -- Krawczyk on the orbit system ----------------------------------------------

def _rect_point(z: complex) -> ComplexRect:
    return ComplexRect.from_complex(z)


def _krawczyk_orbit(f: PolyDiffeo, X, y=None):
    """One Krawczyk step on the orbit system over the boxes X.

    X: list of m BoxC2.  y: optional float orbit (clamped into X); defaults
    to midpoints.  Returns (status, Xnew, norm_C) with status in
    {"contained", "empty", "partial"}; "contained" certifies existence in
    Xnew and, when norm_C < 1, uniqueness in X.
    """
    m = len(X)
    n = 2 * m

    # center y as exact dyadics, clamped into X coordinatewise
    def clamp(d: Dyadic, iv: RealInterval) -> Dyadic:
        if d < iv.lo:
            return iv.lo
        if d > iv.hi:
            return iv.hi
        return d

    yc = []
    for i in range(m):
        b = X[i]
        if y is None:
            zr, zi = b.z.midpoint()
            wr, wi = b.w.midpoint()
        else:
            z, w = y[i]
            zr, zi = Dyadic.from_float(z.real), Dyadic.from_float(z.imag)
            wr, wi = Dyadic.from_float(w.real), Dyadic.from_float(w.imag)
        yc.append((clamp(zr, b.z.re), clamp(zi, b.z.im),
                   clamp(wr, b.w.re), clamp(wi, b.w.im)))

    y_float = [(complex(float(p[0]), float(p[1])), complex(float(p[2]), float(p[3])))
               for p in yc]
    try:
        Yf = _invert_complex(_orbit_jacobian_float(f, y_float))
    except ZeroDivisionError:
        return ("partial", X, None)
    Y = [[_rect_point(v) for v in row] for row in Yf]

    # rigorous residual F(y) and block Jacobians A_i = Df(X_i)
    Fy = []
    A = []
    for i in range(m):
        p = yc[i]
        pb = BoxC2(ComplexRect.point(p[0], p[1]), ComplexRect.point(p[2], p[3]))
        img = f.eval(pb)
        q = yc[(i + 1) % m]
        Fy.append(img.z - ComplexRect.point(q[0], q[1]))
        Fy.append(img.w - ComplexRect.point(q[2], q[3]))
        A.append(f.jacobian(X[i]))

    # C = I - Y * DF(X), exploiting the block-cyclic sparsity of DF
    one = ComplexRect.from_int(1)
    C = [[None] * n for _ in range(n)]
    for r in range(n):
        Yr = Y[r]
        for j in range(m):
            Aj = A[j]
            y0 = Yr[2 * j]
            y1 = Yr[2 * j + 1]
            prev = (j - 1) % m
            v0 = y0 * Aj.a + y1 * Aj.c - Yr[2 * prev]
            v1 = y0 * Aj.b + y1 * Aj.d - Yr[2 * prev + 1]
            if r == 2 * j:
                v0 = v0 - one
            elif r == 2 * j + 1:
                v1 = v1 - one
            C[r][2 * j] = -v0
            C[r][2 * j + 1] = -v1

    norm_c = ZERO
    for r in range(n):
        row_sum = ZERO
        for cidx in range(n):
            row_sum = row_sum + C[r][cidx].abs_enclosure().hi
        norm_c = dy_max(norm_c, row_sum)

    # d = X - y as a flat vector of rects
    d = []
    for i in range(m):
        b = X[i]
        p = yc[i]
        d.append(b.z - ComplexRect.point(p[0], p[1]))
        d.append(b.w - ComplexRect.point(p[2], p[3]))

    # K = y - Y F(y) + C d
    Xnew = []
    contained = True
    empty = False
    for i in range(m):
        comps = []
        for t in (0, 1):
            r = 2 * i + t
            acc = None
            for cidx in range(n):
                term = Y[r][cidx] * Fy[cidx]
                acc = term if acc is None else acc + term
            corr = None
            for cidx in range(n):
                term = C[r][cidx] * d[cidx]
                corr = term if corr is None else corr + term
            p = yc[i]
            center = ComplexRect.point(p[0], p[1]) if t == 0 else ComplexRect.point(p[2], p[3])
            comps.append(center - acc + corr)
        Kz, Kw = comps
        bx = X[i]
        if not (Kz.subset_of(bx.z) and Kw.subset_of(bx.w)):
            contained = False
        iz = Kz.intersect(bx.z)
        iw = Kw.intersect(bx.w)
        if iz is None or iw is None:
            empty = True
            break
        Xnew.append(BoxC2(iz, iw))
    if empty:
        return ("empty", None, norm_c)
    if contained:
        return ("contained", Xnew, norm_c)
    return ("partial", Xnew, norm_c)


# -- constraint propagation around the cycle -------------------------------------

def _propagate(f: PolyDiffeo, X, max_sweeps=80):
    """Cyclic forward/backward interval constraint propagation.

    Returns the contracted enclosures, or None if some intersection is empty
    (no orbit with this itinerary).
    """
    m = len(X)
    X = list(X)
    prev_diam = None
    for _ in range(max_sweeps):
        for i in range(m):
            img = f.eval(X[i])
            j = (i + 1) % m
            inter = X[j].intersect(img)
            if inter is None:
                return None
            X[j] = inter
        for i in range(m - 1, -1, -1):
            j = (i + 1) % m
            pre = f.eval(X[j], "inverse")
            inter = X[i].intersect(pre)
            if inter is None:
                return None
            X[i] = inter
        diam = ZERO
        for b in X:
            diam = dy_max(diam, b.diameter_linf())
        # stall: improvement below 1/16 per sweep
        if prev_diam is not None and diam.scale2(4) > prev_diam.scale2(4) - prev_diam:
            break
        prev_diam = diam
    return X


def _subdivide_tube(engine: _FloatEngine, tube):
    """Split every tube box at its coordinate midpoints and re-link the
    cyclically consistent child itineraries (full-dimensional interior steps,
    closed closure step, exactly as in the global walk enumeration)."""
    m = len(tube)
    kids = []
    for b in tube:
        parts = []
        for lo, hi in b:
            mid = (lo + hi) / 2
            parts.append(((lo, mid), (mid, hi)))
        boxes = []
        for i0 in (0, 1):
            for i1 in (0, 1):
                for i2 in (0, 1):
                    for i3 in (0, 1):
                        boxes.append((parts[0][i0], parts[1][i1],
                                      parts[2][i2], parts[3][i3]))
        kids.append(boxes)
    out = []
    for c0 in kids[0]:
        stack = [(1, (c0,), engine.fwd(c0))]
        while stack:
            i, chain, img = stack.pop()
            if i == m:
                if _fbox_intersect(img, c0) is not None:
                    out.append(list(chain))
                continue
            for cand in kids[i]:
                inter = _fbox_intersect_fulldim(img, cand)
                if inter is not None:
                    stack.append((i + 1, chain + (inter,), engine.fwd(inter)))
    return out


def _resolve_tube(f: PolyDiffeo, engine: _FloatEngine, side: float, tube,
                  precision: Dyadic, regions: dict, state: dict, rdepth=0,
                  y=None):
    """Completely account for every periodic orbit inside a cyclic tube.

    Strategy, in order: contract by cyclic float propagation (discarding
    provably empty tubes); run a direct Krawczyk step on a slightly inflated
    copy (orbits on grid planes sit on every tube's boundary, and the
    inflation -- which can only add orbits, later de-duplicated -- makes
    strict containment possible); absorb the tube into the resolved region of
    its float-Newton polish (_resolve_region certifies at most one orbit
    there); otherwise subdivide and recurse.  Interval propagation alone
    cannot contract cell-wide tubes of strongly dissipative maps (images are
    wider than cells in every coordinate), but subdivided tubes shrink
    geometrically onto their orbit, so the recursion terminates after a few
    levels.  The Krawczyk norm bound grows roughly linearly in the tube
    width, so each attempt's norm_c calibrates, per period, the largest width
    still worth attempting (state[m]); the first attempt at each period is
    unconditional.
    """
    tube = _propagate_float(engine, list(tube))
    if tube is None:
        return []
    m = len(tube)
    out = []
    maxw = max(hi - lo for b in tube for lo, hi in b)
    wmax = state.get(m)
    if wmax is None or maxw <= wmax:
        pad = max(maxw / 64, float(precision) / 16)
        Xt = [tuple(_w(lo - pad, hi + pad) for lo, hi in b) for b in tube]
        status, Xk, norm_c = _fkrawczyk_orbit(f, engine, Xt, y)
        if norm_c is not None and norm_c > 0:
            state[m] = maxw * 0.8 / norm_c
        if status == "empty":
            return out
        if status == "contained" and norm_c is not None and norm_c < 1:
            orbit = _tighten_float(f, engine, Xk, precision, m)
            if orbit is not None:
                out.append(orbit)
                return out
    if y is None:
        mids = [(complex((b[0][0] + b[0][1]) / 2, (b[1][0] + b[1][1]) / 2),
                 complex((b[2][0] + b[2][1]) / 2, (b[3][0] + b[3][1]) / 2))
                for b in tube]
        y = _newton_orbit(f, mids, iters=30)
    if y is not None:
        pts = [(round(z.real, 6), round(z.imag, 6), round(w.real, 6), round(w.imag, 6))
               for z, w in y]
        rp = min(range(m), key=lambda i: pts[i:] + pts[:i])
        pkey = (m, tuple(pts[rp:] + pts[:rp]))
        tube = tube[rp:] + tube[:rp]
        y = y[rp:] + y[:rp]
        if pkey in regions:
            reg = regions[pkey]
        else:
            reg, recs = _resolve_region(f, engine, y, precision, side)
            regions[pkey] = reg
            if recs:
                out.extend(recs)  # emitted once, when the region is created
        if reg is not None and all(_fbox_subset(b, w) for b, w in zip(tube, reg)):
            return out
    if rdepth >= 10:
        raise Inconclusive(_fbox_to_rect(tube[0]), m)
    for sub in _subdivide_tube(engine, tube):
        out.extend(_resolve_tube(f, engine, side, sub, precision, regions,
                                 state, rdepth + 1))
    return out


def _tighten(f: PolyDiffeo, X, precision: Dyadic, period):
    """Iterate the Krawczyk/propagation contraction until the enclosure
    half-diameter is below the requested precision."""
    for _ in range(40):
        diam = ZERO
        for b in X:
            diam = dy_max(diam, b.diameter_linf())
        if diam <= precision:  # half-diameter <= precision/2 < precision
            pts = []
            for b in X:
                zr, zi = b.z.midpoint()
                wr, wi = b.w.midpoint()
                pts.append((zr, zi, wr, wi))
            return PeriodicOrbit(period, pts, X, diam)
        Xp = _propagate(f, X, max_sweeps=4)
        if Xp is None:
            return None
        status, Xk, _ = _krawczyk_orbit(f, Xp)
        if status == "empty":
            return None
        X = Xk if Xk is not None else Xp
    return None


# -- float interval fast path -----------------------------------------------------
#
# Candidate enumeration explores vastly more itineraries than survive, so the
# walk propagation runs on double-precision interval arithmetic with an
# outward widening of 1e-13 (relative) per primitive, which strictly dominates
# the <= 1 ulp (~2.2e-16 relative) rounding error of each double operation.
# Every float enclosure is therefore a superset of the exact one: discarding
# an empty float intersection is sound, and surviving tubes are re-certified
# with exact dyadic arithmetic.  Intervals are (lo, hi) float pairs; a point
# of C^2 is a 4-tuple of intervals (z.re, z.im, w.re, w.im).

_INF = float("inf")


def _fl(d: Dyadic) -> float:
    return math.nextafter(float(d), -_INF)


def _fh(d: Dyadic) -> float:
    return math.nextafter(float(d), _INF)


def _w(lo: float, hi: float):
    s = 1e-13 * max(abs(lo), abs(hi)) + 1e-300
    return (lo - s, hi + s)


def _iadd(a, b):
    return _w(a[0] + b[0], a[1] + b[1])


def _isub(a, b):
    return _w(a[0] - b[1], a[1] - b[0])


def _imul(a, b):
    p0 = a[0] * b[0]
    p1 = a[0] * b[1]
    p2 = a[1] * b[0]
    p3 = a[1] * b[1]
    return _w(min(p0, p1, p2, p3), max(p0, p1, p2, p3))


def _cadd(u, v):
    return (_iadd(u[0], v[0]), _iadd(u[1], v[1]))


def _csub(u, v):
    return (_isub(u[0], v[0]), _isub(u[1], v[1]))


def _cmul(u, v):
    # flat inlining of (ac - bd, ad + bc); a single widening per output
    # endpoint still dominates the <= 3 chained double roundings
    a, b = u
    c, d = v
    p0 = a[0] * c[0]; p1 = a[0] * c[1]; p2 = a[1] * c[0]; p3 = a[1] * c[1]
    ac_lo = min(p0, p1, p2, p3); ac_hi = max(p0, p1, p2, p3)
    p0 = b[0] * d[0]; p1 = b[0] * d[1]; p2 = b[1] * d[0]; p3 = b[1] * d[1]
    bd_lo = min(p0, p1, p2, p3); bd_hi = max(p0, p1, p2, p3)
    p0 = a[0] * d[0]; p1 = a[0] * d[1]; p2 = a[1] * d[0]; p3 = a[1] * d[1]
    ad_lo = min(p0, p1, p2, p3); ad_hi = max(p0, p1, p2, p3)
    p0 = b[0] * c[0]; p1 = b[0] * c[1]; p2 = b[1] * c[0]; p3 = b[1] * c[1]
    bc_lo = min(p0, p1, p2, p3); bc_hi = max(p0, p1, p2, p3)
    re_lo = ac_lo - bd_hi; re_hi = ac_hi - bd_lo
    im_lo = ad_lo + bc_lo; im_hi = ad_hi + bc_hi
    sr = 1e-13 * max(abs(re_lo), abs(re_hi)) + 1e-300
    si = 1e-13 * max(abs(im_lo), abs(im_hi)) + 1e-300
    return ((re_lo - sr, re_hi + sr), (im_lo - si, im_hi + si))


def _cpmul(a: float, b: float, v):
    """(a + bi) * v for a plain complex point times an interval rect."""
    (rlo, rhi), (ilo, ihi) = v
    if a >= 0:
        ar_lo, ar_hi = a * rlo, a * rhi
        ai_lo, ai_hi = a * ilo, a * ihi
    else:
        ar_lo, ar_hi = a * rhi, a * rlo
        ai_lo, ai_hi = a * ihi, a * ilo
    if b >= 0:
        br_lo, br_hi = b * rlo, b * rhi
        bi_lo, bi_hi = b * ilo, b * ihi
    else:
        br_lo, br_hi = b * rhi, b * rlo
        bi_lo, bi_hi = b * ihi, b * ilo
    re_lo = ar_lo - bi_hi; re_hi = ar_hi - bi_lo
    im_lo = ai_lo + br_lo; im_hi = ai_hi + br_hi
    sr = 1e-13 * max(abs(re_lo), abs(re_hi)) + 1e-300
    si = 1e-13 * max(abs(im_lo), abs(im_hi)) + 1e-300
    return ((re_lo - sr, re_hi + sr), (im_lo - si, im_hi + si))


def _cpt(re: float, im: float):
    return ((re, re), (im, im))


def _cmag_hi(v) -> float:
    """Upper bound on |v| over the rect (corner magnitude plus slack)."""
    (rlo, rhi), (ilo, ihi) = v
    return math.hypot(max(abs(rlo), abs(rhi)), max(abs(ilo), abs(ihi))) * (1 + 1e-13)


_C_ZERO = ((0.0, 0.0), (0.0, 0.0))
_C_ONE = ((1.0, 1.0), (0.0, 0.0))


class _FloatEngine:
    """Widened-float forward/inverse evaluator for a PolyDiffeo."""

    __slots__ = ("facs",)

    def __init__(self, f: PolyDiffeo):
        one = ComplexRect.from_int(1)
        self.facs = []
        for fac in f.factors:
            coeffs = [self._crect(c) for c in fac.p.coeffs]
            a = self._crect(fac.a)
            inv_a = self._crect(one / fac.a)  # rigorous 1/a, then outward floats
            # derivative of the monic p: d z^{d-1} + sum_{j>=1} j c_j z^{j-1};
            # the j * c_j products are exact dyadic before the float conversion
            d = fac.p.degree
            dcoeffs = [self._crect(fac.p.coeffs[j] * ComplexRect.from_int(j))
                       for j in range(1, d)]
            lead = _cpt(float(d), 0.0)
            self.facs.append((d, coeffs, a, inv_a, dcoeffs, lead))

    @staticmethod
    def _crect(c: ComplexRect):
        return ((_fl(c.re.lo), _fh(c.re.hi)), (_fl(c.im.lo), _fh(c.im.hi)))

    @staticmethod
    def _poly(deg, coeffs, z):
        acc = _cadd(z, coeffs[deg - 1])  # monic: the leading Horner step is z + c_{d-1}
        for j in range(deg - 2, -1, -1):
            acc = _cadd(_cmul(acc, z), coeffs[j])
        return acc

    def fwd(self, b):
        z = (b[0], b[1])
        w = (b[2], b[3])
        for deg, coeffs, a, _, _, _ in self.facs:
            z, w = _csub(self._poly(deg, coeffs, z), _cmul(a, w)), z
        return (z[0], z[1], w[0], w[1])

    def inv(self, b):
        z = (b[0], b[1])
        w = (b[2], b[3])
        for deg, coeffs, _, inv_a, _, _ in reversed(self.facs):
            z, w = w, _cmul(_csub(self._poly(deg, coeffs, w), z), inv_a)
        return (z[0], z[1], w[0], w[1])

    def jac(self, b):
        """2x2 interval Jacobian of the composition over the box b, as
        ((m00, m01), (m10, m11)) rects, via the chain rule through the
        intermediate images."""
        z = (b[0], b[1])
        w = (b[2], b[3])
        M = None
        for deg, coeffs, a, _, dcoeffs, lead in self.facs:
            if deg == 1:
                dp = _C_ONE
            else:
                dp = lead
                for j in range(deg - 2, -1, -1):
                    dp = _cadd(_cmul(dp, z), dcoeffs[j])
            na = ((-a[0][1], -a[0][0]), (-a[1][1], -a[1][0]))
            if M is None:
                M = ((dp, na), (_C_ONE, _C_ZERO))
            else:
                (m00, m01), (m10, m11) = M
                M = ((_cadd(_cmul(dp, m00), _cmul(na, m10)),
                      _cadd(_cmul(dp, m01), _cmul(na, m11))),
                     (m00, m01))
            z, w = _csub(self._poly(deg, coeffs, z), _cmul(a, w)), z
        return M


def _fbox_intersect(u, v):
    """Closed intersection of two float boxes; None if empty."""
    out = []
    for (alo, ahi), (blo, bhi) in zip(u, v):
        lo = alo if alo > blo else blo
        hi = ahi if ahi < bhi else bhi
        if lo > hi:
            return None
        out.append((lo, hi))
    return tuple(out)


_DIM_TOL = 1e-9  # full-dimensionality floor: far above the accumulated
# widening slack (~1e-11 for coordinates of size R), far below the width of
# any orbit-carrying tube at the grid scales in use; without it the widening
# turns exact face contacts into positive-width slivers and the sliver
# explosion the full-dimensional test exists to prevent returns.


def _fbox_intersect_fulldim(u, v):
    """Intersection with width > _DIM_TOL in every coordinate."""
    out = []
    for (alo, ahi), (blo, bhi) in zip(u, v):
        lo = alo if alo > blo else blo
        hi = ahi if ahi < bhi else bhi
        if hi - lo <= _DIM_TOL:
            return None
        out.append((lo, hi))
    return tuple(out)


def _fbox_of(b: BoxC2):
    return ((_fl(b.z.re.lo), _fh(b.z.re.hi)), (_fl(b.z.im.lo), _fh(b.z.im.hi)),
            (_fl(b.w.re.lo), _fh(b.w.re.hi)), (_fl(b.w.im.lo), _fh(b.w.im.hi)))


def _fbox_to_rect(b) -> BoxC2:
    ivs = [RealInterval(Dyadic.from_float(lo), Dyadic.from_float(hi)) for lo, hi in b]
    return BoxC2(ComplexRect(ivs[0], ivs[1]), ComplexRect(ivs[2], ivs[3]))


def _propagate_float(engine: _FloatEngine, X, max_sweeps=16):
    """Cyclic constraint propagation on float boxes; None if provably empty.

    A sweep only counts as progress when some coordinate shrinks by more
    than 2% of its width; sub-ulp endpoint shaves would otherwise keep the
    sweep loop running to max_sweeps with no real contraction.  Stopping
    early is sound (the result is a superset either way).
    """
    m = len(X)
    X = list(X)
    for _ in range(max_sweeps):
        changed = False
        for i in range(m):
            j = (i + 1) % m
            old = X[j]
            inter = _fbox_intersect(old, engine.fwd(X[i]))
            if inter is None:
                return None
            if inter != old:
                X[j] = inter
                if not changed:
                    for (olo, ohi), (nlo, nhi) in zip(old, inter):
                        if (nlo - olo) + (ohi - nhi) > 0.02 * (ohi - olo) + 1e-14:
                            changed = True
                            break
        for i in range(m - 1, -1, -1):
            j = (i + 1) % m
            old = X[i]
            inter = _fbox_intersect(old, engine.inv(X[j]))
            if inter is None:
                return None
            if inter != old:
                X[i] = inter
                if not changed:
                    for (olo, ohi), (nlo, nhi) in zip(old, inter):
                        if (nlo - olo) + (ohi - nhi) > 0.02 * (ohi - olo) + 1e-14:
                            changed = True
                            break
        if not changed:
            break
    return X


def _fbox_subset(u, v) -> bool:
    for (alo, ahi), (blo, bhi) in zip(u, v):
        if alo < blo or ahi > bhi:
            return False
    return True


def _fkrawczyk_orbit(f: PolyDiffeo, engine: _FloatEngine, X, y=None):
    """One Krawczyk step on the orbit system over float boxes X.

    Same contract as _krawczyk_orbit.  The widened-float enclosures are
    supersets of their exact counterparts, so "empty", "contained" and a
    norm_c bound below 1 remain rigorous conclusions.
    """
    m = len(X)
    n = 2 * m
    yc = []
    for i, b in enumerate(X):
        if y is None:
            yc.append(((b[0][0] + b[0][1]) / 2, (b[1][0] + b[1][1]) / 2,
                       (b[2][0] + b[2][1]) / 2, (b[3][0] + b[3][1]) / 2))
        else:
            z, w = y[i]
            yc.append((min(max(z.real, b[0][0]), b[0][1]),
                       min(max(z.imag, b[1][0]), b[1][1]),
                       min(max(w.real, b[2][0]), b[2][1]),
                       min(max(w.imag, b[3][0]), b[3][1])))
    y_pts = [(complex(p[0], p[1]), complex(p[2], p[3])) for p in yc]
    try:
        Y = _invert_complex(_orbit_jacobian_float(f, y_pts))
    except ZeroDivisionError:
        return ("partial", X, None)

    # rigorous residual F(y) and block Jacobians A_i = Df(X_i)
    Fy = []
    A = []
    for i in range(m):
        p = yc[i]
        img = engine.fwd(((p[0], p[0]), (p[1], p[1]), (p[2], p[2]), (p[3], p[3])))
        q = yc[(i + 1) % m]
        Fy.append(_csub((img[0], img[1]), _cpt(q[0], q[1])))
        Fy.append(_csub((img[2], img[3]), _cpt(q[2], q[3])))
        A.append(engine.jac(X[i]))

    # C = I - Y * DF(X), exploiting the block-cyclic sparsity of DF
    C = [[None] * n for _ in range(n)]
    for r in range(n):
        Yr = Y[r]
        for j in range(m):
            (a00, a01), (a10, a11) = A[j]
            y0 = Yr[2 * j]
            y1 = Yr[2 * j + 1]
            prev = (j - 1) % m
            yp0 = Yr[2 * prev]
            yp1 = Yr[2 * prev + 1]
            v0 = _csub(_cadd(_cpmul(y0.real, y0.imag, a00),
                             _cpmul(y1.real, y1.imag, a10)),
                       _cpt(yp0.real, yp0.imag))
            v1 = _csub(_cadd(_cpmul(y0.real, y0.imag, a01),
                             _cpmul(y1.real, y1.imag, a11)),
                       _cpt(yp1.real, yp1.imag))
            if r == 2 * j:
                v0 = _csub(v0, _C_ONE)
            elif r == 2 * j + 1:
                v1 = _csub(v1, _C_ONE)
            C[r][2 * j] = ((-v0[0][1], -v0[0][0]), (-v0[1][1], -v0[1][0]))
            C[r][2 * j + 1] = ((-v1[0][1], -v1[0][0]), (-v1[1][1], -v1[1][0]))

    norm_c = 0.0
    for r in range(n):
        s = 0.0
        for cc in C[r]:
            s += _cmag_hi(cc)
        if s > norm_c:
            norm_c = s
    norm_c *= 1 + 1e-10  # dominates the float summation error of the row sums

    # d = X - y as a flat vector of rects
    d = []
    for b, p in zip(X, yc):
        d.append((_isub(b[0], (p[0], p[0])), _isub(b[1], (p[1], p[1]))))
        d.append((_isub(b[2], (p[2], p[2])), _isub(b[3], (p[3], p[3]))))

    # K = y - Y F(y) + C d
    Xnew = []
    contained = True
    for i in range(m):
        p = yc[i]
        comps = []
        for t in (0, 1):
            r = 2 * i + t
            Yr = Y[r]
            Cr = C[r]
            acc = None
            for cidx in range(n):
                yv = Yr[cidx]
                term = _cpmul(yv.real, yv.imag, Fy[cidx])
                acc = term if acc is None else _cadd(acc, term)
            corr = None
            for cidx in range(n):
                term = _cmul(Cr[cidx], d[cidx])
                corr = term if corr is None else _cadd(corr, term)
            center = _cpt(p[0], p[1]) if t == 0 else _cpt(p[2], p[3])
            comps.append(_cadd(_csub(center, acc), corr))
        Kz, Kw = comps
        kb = (Kz[0], Kz[1], Kw[0], Kw[1])
        bx = X[i]
        if not _fbox_subset(kb, bx):
            contained = False
        inter = _fbox_intersect(kb, bx)
        if inter is None:
            return ("empty", None, norm_c)
        Xnew.append(inter)
    if contained:
        return ("contained", Xnew, norm_c)
    return ("partial", Xnew, norm_c)


def _tighten_float(f: PolyDiffeo, engine: _FloatEngine, X, precision: Dyadic,
                   period):
    """Iterate the float Krawczyk contraction until the enclosure diameter is
    below the requested precision; falls back to the exact-dyadic contraction
    when the float widening floor (~1e-10) stalls above the target."""
    prec_f = float(precision)
    prev = _INF
    for _ in range(40):
        maxw = max(hi - lo for b in X for lo, hi in b)
        if maxw <= prec_f:
            pts = []
            encl = []
            diam = ZERO
            for b in X:
                rect = _fbox_to_rect(b)
                encl.append(rect)
                zr, zi = rect.z.midpoint()
                wr, wi = rect.w.midpoint()
                pts.append((zr, zi, wr, wi))
                diam = dy_max(diam, rect.diameter_linf())
            if diam <= precision:
                return PeriodicOrbit(period, pts, encl, diam)
            break  # float width check was optimistic: use the exact path
        if maxw > 0.9 * prev:
            break  # stalled above the target precision
        prev = maxw
        Xp = _propagate_float(engine, X, max_sweeps=2)
        if Xp is None:
            return None
        status, Xk, _ = _fkrawczyk_orbit(f, engine, Xp)
        if status == "empty":
            return None
        X = Xk if Xk is not None else Xp
    return _tighten(f, [_fbox_to_rect(b) for b in X], precision, period)


def _region_boxes(y, r: float):
    """Tube of half-width r around the float orbit y: outward boxes for the
    Krawczyk step, plus an inner copy for subset tests."""
    out, inner = [], []
    for z, w in y:
        vals = (z.real, z.imag, w.real, w.imag)
        out.append(tuple((math.nextafter(v - r, -_INF), math.nextafter(v + r, _INF))
                         for v in vals))
        inner.append(tuple((math.nextafter(v - r, _INF), math.nextafter(v + r, -_INF))
                           for v in vals))
    return out, inner


def _resolve_region(f: PolyDiffeo, engine: _FloatEngine, y, precision: Dyadic,
                    side: float):
    """Krawczyk on a small tube centered at the polished orbit y.

    Returns (region, records).  A non-None region comes with norm_C < 1 on
    the tube, hence at most one orbit inside it (mean value: two zeros x1,x2
    of the orbit system would satisfy |x1-x2| <= norm_C |x1-x2|), and either
    exactly the returned certified orbit or provably none; any candidate tube
    contained in the region is therefore fully resolved.
    """
    r = side / 4
    for _ in range(3):
        tube, inner = _region_boxes(y, r)
        status, Xk, norm_c = _fkrawczyk_orbit(f, engine, tube, y)
        if status == "empty":
            return inner, []
        if status == "contained" and norm_c is not None and norm_c < 1:
            orbit = _tighten_float(f, engine, Xk, precision, len(y))
            if orbit is not None:
                return inner, [orbit]
        r /= 4
    return None, None


def _reach_within(adj, max_period: int):
    """adjbits[v] and within[t][v]: bitmasks of nodes reachable from v by an
    edge / by a path of length in [1, t]."""
    n = len(adj)
    adjbits = [0] * n
    for v, ts in enumerate(adj):
        b = 0
        for t in ts:
            b |= 1 << t
        adjbits[v] = b
    within = [[0] * n, adjbits]
    for _ in range(2, max_period + 1):
        prev = within[-1]
        nxt = [0] * n
        for v, ts in enumerate(adj):
            b = adjbits[v]
            for t in ts:
                b |= prev[t]
            nxt[v] = b
        within.append(nxt)
    return adjbits, within


# -- itinerary enumeration --------------------------------------------------------

def _closed_walk_candidates(f: PolyDiffeo, model: ChainModel, max_period: int):
    """DFS over the box graph yielding propagated enclosures per closed walk.

    Rotation duplicates are suppressed by requiring the start position to be
    minimal along the walk (ties allowed; de-duplication catches the rest).
    Enclosures travel as widened float boxes (see the float fast path above);
    branches from which the start box is combinatorially unreachable in the
    remaining steps are pruned with precomputed reachability bitmasks.

    Interior steps require full-dimensional intersections: the image
    enclosure of a full-dimensional box has positive width in every
    coordinate, so for every true orbit there is a choice of cells making
    every step full-dimensional; zero-width face-contact slivers, which
    otherwise diffuse along grid planes and blow up the walk count, carry no
    orbit that is not also found through a full-dimensional itinerary.  The
    closure step keeps the closed (degenerate allowed) test.
    """
    if model.edges is None:
        raise ValueError("model must retain edges for periodic enumeration")
    spec = model.spec
    engine = _FloatEngine(f)
    geo = [_fbox_of(spec.box_geometry(spec.decode(code))) for code in model.codes]
    adj = model.edges
    adjbits, within = _reach_within(adj, max_period)
    nboxes = len(model.codes)
    for s in range(nboxes):
        if not (within[max_period][s] >> s) & 1:
            continue  # s lies on no cycle of length <= max_period
        start_geo = geo[s]
        # stack entries: (pos, enclosure chain); enclosure chain[i] subset of box
        stack = [(s, (start_geo,))]
        while stack:
            pos, chain = stack.pop()
            depth = len(chain)
            img = engine.fwd(chain[-1])
            # attempt closure at this depth
            if (adjbits[pos] >> s) & 1 and _fbox_intersect(img, start_geo) is not None:
                yield (depth, chain)
            if depth >= max_period:
                continue
            rem = max_period - depth  # walk lengths still reachable from a child
            for nxt in reversed(adj[pos]):
                if nxt < s:
                    continue
                if not (within[rem][nxt] >> s) & 1:
                    continue  # cannot close the walk in time
                inter = _fbox_intersect_fulldim(img, geo[nxt])
                if inter is not None:
                    stack.append((nxt, chain + (inter,)))


def default_model(f: PolyDiffeo, R: Dyadic | None = None, threads: int = 1,
                  max_side: Dyadic | None = None) -> ChainModel:
    """Chain model at the coarsest level whose box side is <= 1/8."""
    if R is None:
        R = f.filtration_radius()
    if max_side is None:
        max_side = Dyadic(1, -3)
    level = 1
    while GridSpec(R, level).side > max_side:
        level += 1
    start = min(level, 4)
    spec = GridSpec(R, start)
    model = build_model(f, spec, full_grid(spec), threads)
    while model.spec.level < level:
        model = refine(model, f, threads)
    return model


def _orbit_rotations(pts):
    m = len(pts)
    return [pts[i:] + pts[:i] for i in range(m)]


def _points_close(p, q, tol: float) -> bool:
    return all(abs(float(a) - float(b)) <= tol for a, b in zip(p, q))


def _prime_period(pts, tol: float) -> int:
    m = len(pts)
    for q in range(1, m):
        if m % q:
            continue
        if all(_points_close(pts[i], pts[(i + q) % m], tol) for i in range(m)):
            return q
    return m


def _dedupe(orbits, tol: float):
    """Drop repeated orbits; the orbit centroid is rotation invariant, so the
    quadratic rotation comparison only runs on centroid-close pairs."""
    kept: list[PeriodicOrbit] = []
    seen: dict[int, list] = {}
    for orb in orbits:
        m = orb.period
        cen = [sum(float(p[k]) for p in orb.points) / m for k in range(4)]
        dup = False
        for other, ocen in seen.get(m, ()):
            if any(abs(a - b) > 2 * tol for a, b in zip(cen, ocen)):
                continue
            for rot in _orbit_rotations(other.points):
                if all(_points_close(p, q, tol) for p, q in zip(orb.points, rot)):
                    dup = True
                    break
            if dup:
                break
        if not dup:
            kept.append(orb)
            seen.setdefault(m, []).append((orb, cen))
    return kept


def enumerate_periodic(f: PolyDiffeo, max_period: int, precision: Dyadic,
                       model: ChainModel | None = None, threads: int = 1):
    """All periodic orbits of period <= max_period in V_R, certified.

    Returns PeriodicOrbit records with prime periods, sorted by
    (period, first point); orbits of non-prime period <= max_period are
    represented by their prime-period record.
    """
    if max_period < 1:
        raise ValueError("max_period must be >= 1")
    if model is None:
        model = default_model(f, threads=threads)

    engine = _FloatEngine(f)
    side_f = float(model.spec.side)

    # Stream every closed walk through a cheap sound pre-screen (cyclic float
    # propagation kills almost all spurious itineraries before any dyadic
    # arithmetic runs).  Surviving tubes are massively duplicated: a real
    # map's real orbits lie exactly on grid planes and are re-found through
    # every adjacent cell choice.  Tubes are grouped by the canonical
    # rotation of their float-Newton polish into a per-group hull, and each
    # hull is resolved once (_resolve_tube); resolving the hull accounts for
    # every member tube.
    groups: dict = {}    # polish key -> [hull tube, polished orbit]
    order: list = []     # polish keys in first-appearance order
    fastmap: dict = {}   # midpoint-cell key -> (polish key, rotation delta)
    loners: list = []    # tubes whose float Newton fails

    def merge(hull, rot):
        for i, b in enumerate(rot):
            hull[i] = tuple((lo if lo < h[0] else h[0], hi if hi > h[1] else h[1])
                            for (lo, hi), h in zip(b, hull[i]))

    for wdepth, chain in _closed_walk_candidates(f, model, max_period):
        contracted = _propagate_float(engine, list(chain))
        if contracted is None:
            continue
        m = len(contracted)
        mids4 = [((b[0][0] + b[0][1]) / 2, (b[1][0] + b[1][1]) / 2,
                  (b[2][0] + b[2][1]) / 2, (b[3][0] + b[3][1]) / 2)
                 for b in contracted]
        # fast duplicate path: nearest-grid-node key of the tube midpoints
        cells = [tuple(round(v / side_f) for v in p) for p in mids4]
        rf = min(range(m), key=lambda i: cells[i:] + cells[:i])
        fkey = (m,) + tuple(cells[rf:] + cells[:rf])
        hit = fastmap.get(fkey)
        if hit is not None:
            pkey, dlt = hit
            g = groups.get(pkey)
            if g is not None:
                s = (rf + dlt) % m
                merge(g[0], contracted[s:] + contracted[:s])
                continue
        # full path: float Newton polish and canonical rotation
        mids = [(complex(p[0], p[1]), complex(p[2], p[3])) for p in mids4]
        y = _newton_orbit(f, mids, iters=30)
        if y is None:
            loners.append(contracted)
            continue
        pts = [(round(z.real, 6), round(z.imag, 6), round(w.real, 6), round(w.imag, 6))
               for z, w in y]
        rp = min(range(m), key=lambda i: pts[i:] + pts[:i])
        pkey = (m, tuple(pts[rp:] + pts[:rp]))
        rot = contracted[rp:] + contracted[:rp]
        fastmap.setdefault(fkey, (pkey, (rp - rf) % m))
        g = groups.get(pkey)
        if g is None:
            groups[pkey] = [list(rot), y[rp:] + y[:rp]]
            order.append(pkey)
        else:
            merge(g[0], rot)

    regions: dict = {}
    state: dict = {}
    raw_records: list = []
    for pkey in order:
        hull, y = groups[pkey]
        raw_records.extend(_resolve_tube(f, engine, side_f, hull, precision,
                                         regions, state, 0, y))
    for tube in loners:
        raw_records.extend(_resolve_tube(f, engine, side_f, tube, precision,
                                         regions, state))

    tol = float(precision) * 8 + 1e-13
    raw = []
    for orb in raw_records:
        q = _prime_period(orb.points, tol)
        if q != orb.period:
            orb = PeriodicOrbit(q, orb.points[:q], orb.enclosures[:q], orb.precision)
        # canonical rotation: lexicographically smallest first point
        rots = list(range(orb.period))
        rots.sort(key=lambda i: tuple(float(v) for v in orb.points[i]))
        i = rots[0]
        if i:
            orb = PeriodicOrbit(orb.period, orb.points[i:] + orb.points[:i],
                                orb.enclosures[i:] + orb.enclosures[:i],
                                orb.precision)
        raw.append(orb)
    raw.sort(key=PeriodicOrbit.sort_key)
    return _dedupe(raw, tol)


# -- classification ----------------------------------------------------------------

def _orbit_product_jacobian(f: PolyDiffeo, orbit: PeriodicOrbit, shift=0):
    """Enclosure of D f^{period} at orbit point `shift` via the chain rule."""
    m = orbit.period
    jac = None
    for k in range(m):
        i = (shift + k) % m
        step = f.jacobian(orbit.enclosures[i])
        jac = step if jac is None else step * jac
    return jac


def _interval_newton_eigen(t: ComplexRect, d: ComplexRect, lam0: complex):
    """Certify a root of lambda^2 - t lambda + d near lam0 by interval Newton."""
    delta = max(1e-14, abs(lam0) * 1e-12)
    for _ in range(60):
        lo = ComplexRect(
            RealInterval.from_floats(lam0.real - delta, lam0.real + delta),
            RealInterval.from_floats(lam0.imag - delta, lam0.imag + delta))
        mid = ComplexRect.from_complex(lam0)
        # N = lam0 - p(lam0) / p'(L)
        p_mid = mid * mid - t * mid + d
        dp = lo.scale2(1) - t
        if dp.contains_zero():
            delta *= 4
            if delta > max(1e3, abs(lam0) / 4):
                return None
            continue
        N = mid - p_mid / dp
        if N.strictly_inside(lo):
            # tighten a few times
            enc = N
            for _ in range(3):
                c = ComplexRect.point(*enc.midpoint())
                p_c = c * c - t * c + d
                dp2 = enc.scale2(1) - t
                if dp2.contains_zero():
                    break
                N2 = c - p_c / dp2
                nxt = N2.intersect(enc)
                if nxt is None:
                    break
                enc = nxt
            return enc
        delta *= 4
        if delta > max(1e3, abs(lam0) / 4):
            return None
    return None


def _schur_cohn_stable(t: ComplexRect, d: ComplexRect) -> bool:
    """True if both roots of lambda^2 - t lambda + d certifiably lie in the
    open unit disk: |d| < 1 and |t - conj(t) d| < 1 - |d|^2."""
    d2 = d.norm_sq()
    if not (d2.hi < Dyadic(1)):
        return False
    v = t - t.conj() * d
    lhs = v.abs_enclosure().hi
    rhs = (Dyadic(1) - d2.hi)
    return lhs < rhs


def _unit_eigenvector(Mj, lam: ComplexRect):
    """Certified unit eigenvector enclosure for eigenvalue enclosure lam.

    Uses (b, lam - a) or (lam - d, c), whichever is better conditioned, then
    normalizes rigorously and fixes the phase so the largest-magnitude
    component has real positive midpoint.
    """
    cand1 = (Mj.b, lam - Mj.a)
    cand2 = (lam - Mj.d, Mj.c)
    n1 = abs(cand1[0].mid_complex()) + abs(cand1[1].mid_complex())
    n2 = abs(cand2[0].mid_complex()) + abs(cand2[1].mid_complex())
    v = cand1 if n1 >= n2 else cand2
    # approximate phase alignment on the dominant component
    c0, c1 = v[0].mid_complex(), v[1].mid_complex()
    dom = c0 if abs(c0) >= abs(c1) else c1
    if abs(dom) == 0:
        return None
    phase = dom / abs(dom)
    rot = ComplexRect.from_complex((1.0 / phase))
    v = (v[0] * rot, v[1] * rot)
    nrm = (v[0].norm_sq() + v[1].norm_sq()).sqrt()
    if nrm.contains_zero():
        return None
    ninv = ComplexRect(RealInterval.from_int(1) / nrm, RealInterval.point(ZERO))
    return (v[0] * ninv, v[1] * ninv)


def classify(orbit: PeriodicOrbit, f: PolyDiffeo, budget: int = 3) -> PeriodicOrbit:
    """Fill orbit.klass and orbit.eigen; certified saddle/attracting split.

    Tightens the orbit enclosure between attempts; raises Undetermined when
    the budget is exhausted with an eigenvalue norm enclosure straddling 1.
    """
    one = Dyadic(1)
    for attempt in range(budget):
        M = _orbit_product_jacobian(f, orbit)
        t = M.a + M.d
        d = M.det()
        if hasattr(f, "jacobian_det"):
            # det D f^p is the p-th power of the (constant) factor product;
            # the entrywise M.det() cancels catastrophically on wide boxes
            step = f.jacobian_det()
            exact = step
            for _ in range(orbit.period - 1):
                exact = exact * step
            d = exact.intersect(d) or exact
        tm = t.mid_complex()
        dm = d.mid_complex()
        disc = (tm * tm - 4 * dm) ** 0.5
        r1 = (tm + disc) / 2
        r2 = (tm - disc) / 2
        if abs(r1) < abs(r2):
            r1, r2 = r2, r1
        if r1 != 0:
            r2 = dm / r1  # stable small root; the difference form cancels
        e1 = _interval_newton_eigen(t, d, r1)
        e2 = _interval_newton_eigen(t, d, r2)
        if e1 is not None and e2 is not None:
            a1 = e1.abs_enclosure()
            a2 = e2.abs_enclosure()
            if a1.lo > one and a2.hi < one:
                vu = _unit_eigenvector(M, e1)
                vs = _unit_eigenvector(M, e2)
                if vu is not None and vs is not None:
                    orbit.eigen = EigenData(e1, e2, vu, vs, separated=True)
                    orbit.klass = "saddle"
                    return orbit
            if a1.hi < one and a2.hi < one:
                orbit.eigen = EigenData(e1, e2, separated=True)
                orbit.klass = "attracting"
                return orbit
            if a1.lo > one and a2.lo > one:
                orbit.eigen = EigenData(e1, e2, separated=True)
                orbit.klass = "repelling"
                return orbit
        # possibly non-separated roots: attracting via Schur-Cohn
        if _schur_cohn_stable(t, d):
            unit = ComplexRect(RealInterval.from_floats(-1.0, 1.0),
                               RealInterval.from_floats(-1.0, 1.0))
            orbit.eigen = EigenData(unit, unit, separated=False)
            orbit.klass = "attracting"
            return orbit
        # tighten the orbit enclosure and retry
        X = _propagate(f, orbit.enclosures, max_sweeps=8)
        if X is not None:
            st, Xk, _ = _krawczyk_orbit(f, X)
            if Xk is not None:
                orbit.enclosures = Xk
    raise Undetermined(f"period-{orbit.period} orbit: eigenvalue norms not separated")


def frames_along_orbit(f: PolyDiffeo, orbit: PeriodicOrbit):
    """Unit stable/unstable direction enclosures at every orbit point.

    The cyclic shifts of the orbit's product Jacobian are similar matrices
    with identical eigenvalues, so each point gets its directions from its
    own shifted product and the certified eigenvalue enclosures at point 0.
    Independent per-point extraction keeps the enclosure width at the
    product-Jacobian level; propagating one eigenvector along the orbit
    would instead compound the normalization error exponentially in the
    period.
    """
    if orbit.klass != "saddle" or orbit.eigen is None:
        raise ValueError("frames require a certified saddle orbit")
    eig = orbit.eigen
    out = [(eig.vec_u, eig.vec_s)]
    for i in range(1, orbit.period):
        Mi = _orbit_product_jacobian(f, orbit, shift=i)
        vu = _unit_eigenvector(Mi, eig.lam_u)
        vs = _unit_eigenvector(Mi, eig.lam_s)
        if vu is None or vs is None:
            raise Undetermined(
                f"period-{orbit.period} orbit: no eigenvector enclosure "
                f"at point {i}")
        out.append((vu, vs))
    return out


# -- re-certification and serialization ----------------------------------------

def tighten_orbit(f: PolyDiffeo, orbit: PeriodicOrbit, precision: Dyadic):
    """Re-certify an already certified orbit at a finer precision.

    Starts the contraction from the existing enclosures, so this is much
    cheaper than re-enumeration; classification data carries over unchanged
    (eigenvalue enclosures computed at the coarser precision stay valid).
    """
    if orbit.precision <= precision:
        return orbit
    engine = _FloatEngine(f)
    X = [_fbox_of(b) for b in orbit.enclosures]
    out = _tighten_float(f, engine, X, precision, orbit.period)
    if out is None:
        raise Inconclusive(orbit.enclosures[0], orbit.period)
    out.eigen = orbit.eigen
    out.klass = orbit.klass
    return out


def _rect_pairs(c: ComplexRect) -> list:
    return [list(c.re.lo.as_pair()), list(c.re.hi.as_pair()),
            list(c.im.lo.as_pair()), list(c.im.hi.as_pair())]


def _rect_from_pairs(obj) -> ComplexRect:
    vals = [Dyadic.from_pair(p) for p in obj]
    return ComplexRect(RealInterval(vals[0], vals[1]), RealInterval(vals[2], vals[3]))


def orbit_to_doc(orbit: PeriodicOrbit) -> dict:
    doc = {
        "period": orbit.period,
        "precision": list(orbit.precision.as_pair()),
        "points": [[list(d.as_pair()) for d in p] for p in orbit.points],
        "enclosures": [_rect_pairs(b.z) + _rect_pairs(b.w) for b in orbit.enclosures],
        "class": orbit.klass,
    }
    if orbit.eigen is not None:
        doc["eigen"] = {
            "lam_u": _rect_pairs(orbit.eigen.lam_u),
            "lam_s": _rect_pairs(orbit.eigen.lam_s),
            "separated": orbit.eigen.separated,
        }
    return doc


def orbit_from_doc(doc) -> PeriodicOrbit:
    points = [tuple(Dyadic.from_pair(q) for q in p) for p in doc["points"]]
    encl = [BoxC2(_rect_from_pairs(e[:4]), _rect_from_pairs(e[4:]))
            for e in doc["enclosures"]]
    orbit = PeriodicOrbit(doc["period"], points, encl, Dyadic.from_pair(doc["precision"]))
    orbit.klass = doc.get("class", "undetermined")
    ed = doc.get("eigen")
    if ed is not None:
        orbit.eigen = EigenData(_rect_from_pairs(ed["lam_u"]),
                                _rect_from_pairs(ed["lam_s"]),
                                separated=ed.get("separated", True))
    return orbit
