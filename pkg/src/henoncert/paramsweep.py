"""Sweep of the parameter space of degree-d Henon maps for certified
hyperbolic balls.

A parameter point of degree d is the coefficient vector (a_0, ..., a_{d-2}, a)
of the map (z, w) -> (p(z) - a w, z) with p(z) = z^d + a_{d-2} z^{d-2} + ...
+ a_0 (the z^{d-1} coefficient is normalized away).  The sweep walks dyadic
grids of increasing resolution and window size, runs the hyperbolicity
certifier on each unvisited, uncovered cell, and -- on success -- inflates
every coefficient into a rectangle to certify an entire L-infinity ball of
parameters at once.  Emitted balls and visited cells are appended to a
checksummed log so an interrupted sweep resumes deterministically.
"""

from __future__ import annotations

import itertools
import json
import os
import struct
import zlib

from .dyadic import Dyadic, ZERO, dy_max, dy_min, floor_div
from .intervals import (
    BoxC2,
    ComplexRect,
    DivisionByIntervalContainingZero,
    RealInterval,
)
from .henon import HenonFactor, MonicPoly, PolyDiffeo
from .mapfile import map_hash
from .periodic import (
    PeriodicOrbit,
    Undetermined,
    _krawczyk_orbit,
    classify,
)
from .certify import (
    BudgetExhausted,
    ConeFrame,
    DegenerateLowerBound,
    HypCertificate,
    NonPositiveGamma,
    compute_delta,
    compute_gamma,
    compute_Q,
    dump_certificate,
    orbit_frame_table,
    run_certifier,
    witness_holds,
)
from .juliaset import compute_n_prime


class ZeroRadius(ArithmeticError):
    """Even the smallest robustness probe failed; no ball can be emitted."""


class CorruptLog(ValueError):
    """Sweep log failed a checksum; .valid_bytes is the last good prefix."""

    def __init__(self, message: str, valid_bytes: int):
        super().__init__(message)
        self.valid_bytes = valid_bytes


# -- parameter points and balls ------------------------------------------------

class ParamPoint:
    """One exact dyadic parameter of degree d: (a_0..a_{d-2}, a), a != 0."""

    __slots__ = ("degree", "coeffs", "a")

    def __init__(self, degree: int, coeffs, a):
        if degree < 2:
            raise ValueError("degree must be >= 2")
        coeffs = tuple((re, im) for re, im in coeffs)
        if len(coeffs) != degree - 1:
            raise ValueError("need d-1 polynomial coefficients a_0..a_{d-2}")
        self.degree = degree
        self.coeffs = coeffs
        self.a = (a[0], a[1])

    def reals(self):
        """Flat tuple of the 2d real coordinates (re/im interleaved)."""
        out = []
        for re, im in self.coeffs:
            out.extend((re, im))
        out.extend(self.a)
        return tuple(out)

    @classmethod
    def from_reals(cls, degree: int, reals) -> "ParamPoint":
        reals = tuple(reals)
        if len(reals) != 2 * degree:
            raise ValueError("need 2d real coordinates")
        coeffs = [(reals[2 * j], reals[2 * j + 1]) for j in range(degree - 1)]
        return cls(degree, coeffs, (reals[-2], reals[-1]))

    def a_is_zero(self) -> bool:
        return self.a[0].is_zero() and self.a[1].is_zero()

    def a_linf(self) -> Dyadic:
        """L-infinity distance from a to 0 (radius bound for a != 0 balls)."""
        return dy_max(abs(self.a[0]), abs(self.a[1]))

    def to_map(self) -> PolyDiffeo:
        if self.a_is_zero():
            raise ValueError("a = 0 is not a Henon map")
        rects = [ComplexRect.point(re, im) for re, im in self.coeffs]
        rects.append(ComplexRect.point(ZERO, ZERO))  # no z^{d-1} term
        p = MonicPoly(self.degree, rects)
        return PolyDiffeo([HenonFactor(p, ComplexRect.point(*self.a))])

    def key(self):
        return (self.degree,) + self.reals()

    def __eq__(self, other):
        return isinstance(other, ParamPoint) and self.key() == other.key()

    def __hash__(self):
        return hash(self.key())

    def __repr__(self):
        cs = ", ".join(f"({float(re)}, {float(im)})" for re, im in self.coeffs)
        return (f"ParamPoint(d={self.degree}, coeffs=[{cs}], "
                f"a=({float(self.a[0])}, {float(self.a[1])}))")


class HypBall:
    """Closed L-infinity ball of certified hyperbolic parameters."""

    __slots__ = ("center", "radius", "cert_ref", "cert")

    def __init__(self, center: ParamPoint, radius: Dyadic, cert_ref: str,
                 cert: HypCertificate | None = None):
        if radius.sign() <= 0:
            raise ValueError("ball radius must be positive")
        if not radius < center.a_linf():
            raise ValueError("ball must exclude a = 0")
        self.center = center
        self.radius = radius
        self.cert_ref = cert_ref
        self.cert = cert

    def contains(self, point: ParamPoint) -> bool:
        if point.degree != self.center.degree:
            return False
        return all(abs(x - c) <= self.radius
                   for x, c in zip(point.reals(), self.center.reals()))


class Stage:
    """One sweep stage: a dyadic grid over an L-infinity parameter window.

    Defaults follow the escalation schedule: spacing 2^{-s}, window radius
    2^s around the origin, certifier cap N_max = s.  `max_cells` bounds the
    number of grid cells charged against this stage (the sweep as a whole
    does not terminate otherwise); `max_n` caps the subdivision depth of
    each certification attempt (None derives it from N_max).
    """

    __slots__ = ("s", "spacing", "center", "radius", "N_max", "max_n",
                 "max_cells", "phase_samples")

    def __init__(self, s: int, center=None, radius: Dyadic | None = None,
                 N_max: int | None = None, max_n: int | None = None,
                 max_cells: int | None = None, phase_samples: int = 0):
        if s < 1:
            raise ValueError("stage index must be >= 1")
        self.s = s
        self.spacing = Dyadic(1, -s)
        self.center = None if center is None else tuple(center)
        self.radius = Dyadic(1, s) if radius is None else radius
        self.N_max = s if N_max is None else N_max
        self.max_n = max_n
        self.max_cells = max_cells
        self.phase_samples = phase_samples


def default_stages(count: int):
    return [Stage(s) for s in range(1, count + 1)]


def _snap(x: Dyadic, spacing: Dyadic) -> Dyadic:
    return Dyadic(floor_div(x, spacing)) * spacing


def _stage_cells(stage: Stage, degree: int):
    """Grid cells of a stage, center-out by L-infinity shell, lexicographic
    within a shell.  The window center is snapped down onto the grid."""
    dims = 2 * degree
    center = stage.center or (ZERO,) * dims
    center = tuple(_snap(c, stage.spacing) for c in center)
    shells = floor_div(stage.radius, stage.spacing)
    for shell in range(shells + 1):
        for off in itertools.product(range(-shell, shell + 1), repeat=dims):
            if max(abs(k) for k in off) != shell and shell > 0:
                continue
            coords = tuple(c + stage.spacing * Dyadic(k)
                           for c, k in zip(center, off))
            yield ParamPoint.from_reals(degree, coords)


# -- inflated-coefficient re-verification --------------------------------------

def _widen_rect(c: ComplexRect, r: Dyadic) -> ComplexRect:
    return ComplexRect(RealInterval(c.re.lo - r, c.re.hi + r),
                       RealInterval(c.im.lo - r, c.im.hi + r))


def _widen_box(b: BoxC2, r: Dyadic) -> BoxC2:
    return BoxC2(_widen_rect(b.z, r), _widen_rect(b.w, r))


def inflate_map(f: PolyDiffeo, r: Dyadic) -> PolyDiffeo:
    """Replace every coefficient rectangle by its radius-r L-infinity
    inflation; raises ValueError when the inflated a touches 0."""
    if r.sign() < 0:
        raise ValueError("inflation radius must be >= 0")
    if r.is_zero():
        return f
    factors = []
    for fac in f.factors:
        p = MonicPoly(fac.p.degree, [_widen_rect(c, r) for c in fac.p.coeffs])
        factors.append(HenonFactor(p, _widen_rect(fac.a, r)))
    return PolyDiffeo(factors)


_KRAWCZYK_PADS = (4, 16, 64)
_KRAWCZYK_STEPS = 6


def _recertify_orbit(fr: PolyDiffeo, orbit: PeriodicOrbit,
                     r: Dyadic) -> PeriodicOrbit | None:
    """Re-enclose one certified orbit under the inflated map.

    Pads the point enclosures (parameter motion moves the orbit) and runs
    the exact multiple-shooting Krawczyk contraction until it certifies
    containment; returns None when no pad succeeds.
    """
    base = dy_max(r, orbit.precision)
    for pad in _KRAWCZYK_PADS:
        w = base * Dyadic(pad)
        X = [_widen_box(b, w) for b in orbit.enclosures]
        for _ in range(_KRAWCZYK_STEPS):
            status, Xn, _ = _krawczyk_orbit(fr, X)
            if status == "contained":
                # keep contracting toward the parameter-family hull: the
                # first contained step is still about as wide as the pad
                for _ in range(_KRAWCZYK_STEPS):
                    prev = max(b.diameter_linf() for b in Xn)
                    st2, X2, _ = _krawczyk_orbit(fr, Xn)
                    if st2 != "contained" or X2 is None:
                        break
                    Xn = X2
                    if not max(b.diameter_linf() for b in Xn) < prev.scale2(-1):
                        break
                return PeriodicOrbit(orbit.period, orbit.points, Xn,
                                     _enclosure_precision(orbit, Xn))
            if status == "empty" or Xn is None:
                break
            X = Xn
    return None


def _enclosure_precision(orbit: PeriodicOrbit, boxes) -> Dyadic:
    prec = orbit.precision
    for b in boxes:
        prec = dy_max(prec, b.diameter_linf())
    return prec


def check_ball(f: PolyDiffeo, cert: HypCertificate, r: Dyadic,
               R: Dyadic | None = None, phase_samples: int = 0):
    """Re-run certificate verification with every coefficient inflated by r.

    Re-encloses and re-classifies the saddle orbits, re-derives the frames,
    and re-checks the witness inequalities, gamma > 0, the Q/Delta bounds
    and the halting inequality 2^{-N} < Delta, all with parameter-interval
    arithmetic.  Returns (ok, reason); r = 0 reproduces the point check.
    """
    if cert.status != "certified":
        raise ValueError("check_ball needs a certified certificate")
    try:
        fr = inflate_map(f, r)
    except ValueError:
        return False, "inflated a touches 0"
    if R is None:
        R = fr.filtration_radius()
    elif not fr.check_filtration_radius(R):
        return False, "filtration radius fails under inflation"
    saddles = []
    for orbit in cert.orbits:
        nu = _recertify_orbit(fr, orbit, r)
        if nu is None:
            return False, f"period-{orbit.period} orbit not re-enclosed"
        try:
            classify(nu, fr)
        except Undetermined:
            return False, f"period-{orbit.period} orbit not classified"
        if nu.klass != "saddle":
            return False, f"period-{orbit.period} orbit no longer a saddle"
        saddles.append(nu)
    try:
        frames = orbit_frame_table(fr, saddles)
    except (DivisionByIntervalContainingZero, Undetermined):
        return False, "frame enclosures degenerate under inflation"
    witness = cert.witness
    if not witness_holds(saddles, frames, fr, witness):
        return False, "witness inequalities fail"
    shadow = HypCertificate(cert.N, cert.n, cert.k, witness, cert.rho,
                            ZERO, ZERO, ZERO, None, "not-yet", cert.spec,
                            saddles, frames, cert.boxes)
    try:
        gamma = compute_gamma(saddles, frames, witness, cert.rho, fr,
                              phase_samples)
    except (NonPositiveGamma, DivisionByIntervalContainingZero):
        return False, "gamma lower bound not positive"
    try:
        _, Q = compute_Q(fr, R, witness.m, shadow.frames, cert.spec)
    except DegenerateLowerBound:
        return False, "expansion lower bound mu degenerate"
    delta = compute_delta(Q, gamma, witness.lam, 2 * cert.N)
    if delta is not None and not Dyadic(1, -cert.N) < delta:
        return False, "halting inequality 2^-N < Delta fails"
    return True, "ok"


_PROBE_EXPS = range(5, 21)  # bisection grid 2^-5 .. 2^-20


def robustness_radius(f: PolyDiffeo, cert: HypCertificate,
                      R: Dyadic | None = None,
                      phase_samples: int = 0) -> Dyadic:
    """Largest radius on the probe grid whose inflated check passes.

    Probes descend through powers of two, so by enclosure monotonicity the
    first success is the largest passing grid radius.  The result is kept
    strictly below |a| so the emitted ball excludes a = 0.
    """
    amax = ZERO
    for fac in f.factors:
        lo = dy_min(abs(fac.a.re.lo), abs(fac.a.re.hi))
        if fac.a.re.lo.sign() != fac.a.re.hi.sign():
            lo = ZERO
        hi = dy_min(abs(fac.a.im.lo), abs(fac.a.im.hi))
        if fac.a.im.lo.sign() != fac.a.im.hi.sign():
            hi = ZERO
        m = dy_max(lo, hi)
        amax = m if amax.is_zero() else dy_min(amax, m)
    for exp in _PROBE_EXPS:
        r = Dyadic(1, -exp)
        if not r < amax:
            continue
        ok, _ = check_ball(f, cert, r, R, phase_samples)
        if ok:
            return r
    raise ZeroRadius("no probe radius passed the inflated re-verification")


# -- persistent, resumable sweep -----------------------------------------------

_LOG_MAGIC = b"HNSW\x01"


class SweepState:
    """Visited cells (key -> largest N tried) and emitted balls."""

    __slots__ = ("visited", "balls")

    def __init__(self):
        self.visited = {}
        self.balls = []

    def covered(self, point: ParamPoint) -> bool:
        return any(b.contains(point) for b in self.balls)


def _pairs(reals):
    return [list(x.as_pair()) for x in reals]


def _from_pairs(obj):
    return tuple(Dyadic.from_pair(p) for p in obj)


def _append_record(fh, doc) -> None:
    payload = json.dumps(doc, separators=(",", ":")).encode()
    fh.write(struct.pack("<II", len(payload), zlib.crc32(payload)))
    fh.write(payload)
    fh.flush()
    os.fsync(fh.fileno())


def load_log(path: str) -> SweepState:
    """Rebuild sweep state from a log; missing or empty file is a fresh
    state, any malformed suffix raises CorruptLog with the valid prefix."""
    state = SweepState()
    if not os.path.exists(path):
        return state
    with open(path, "rb") as fh:
        data = fh.read()
    if not data:
        return state
    if not data.startswith(_LOG_MAGIC):
        raise CorruptLog("bad log magic", 0)
    pos = len(_LOG_MAGIC)
    while pos < len(data):
        if pos + 8 > len(data):
            raise CorruptLog("truncated record header", pos)
        length, crc = struct.unpack_from("<II", data, pos)
        payload = data[pos + 8: pos + 8 + length]
        if len(payload) != length or zlib.crc32(payload) != crc:
            raise CorruptLog("record checksum mismatch", pos)
        try:
            doc = json.loads(payload)
        except ValueError:
            raise CorruptLog("record is not valid JSON", pos) from None
        _apply_record(state, doc)
        pos += 8 + length
    return state


def recover_log(path: str) -> SweepState:
    """Resume from the last valid prefix, truncating the corrupt suffix."""
    try:
        return load_log(path)
    except CorruptLog as exc:
        with open(path, "rb+") as fh:
            fh.truncate(exc.valid_bytes)
        return load_log(path)


def _apply_record(state: SweepState, doc) -> None:
    if doc.get("t") != "cell":
        raise CorruptLog("unknown record type", 0)
    degree = doc["d"]
    point = ParamPoint.from_reals(degree, _from_pairs(doc["x"]))
    state.visited[point.key()] = max(state.visited.get(point.key(), 0),
                                     doc["N"])
    if doc.get("ball") is not None:
        b = doc["ball"]
        state.balls.append(HypBall(point, Dyadic.from_pair(b["r"]),
                                   b["ref"]))


def _cell_doc(point: ParamPoint, N: int, ball: HypBall | None) -> dict:
    doc = {"t": "cell", "d": point.degree, "x": _pairs(point.reals()),
           "N": N, "ball": None}
    if ball is not None:
        doc["ball"] = {"r": list(ball.radius.as_pair()), "ref": ball.cert_ref}
    return doc


def sweep(degree: int, stages, log: str | None = None,
          out_dir: str | None = None, threads: int = 1):
    """Generator of HypBall over the stage schedule.

    Skips cells already covered by an emitted ball or already tried at this
    stage's N budget; every other cell (except a = 0) is charged against
    the stage's `max_cells`, which makes an interrupted-and-resumed run
    emit the same stream as an uninterrupted one.
    """
    if degree < 2:
        raise ValueError("degree must be >= 2")
    state = load_log(log) if log else SweepState()
    fh = None
    if log:
        fresh = not os.path.exists(log) or os.path.getsize(log) == 0
        fh = open(log, "ab")
        if fresh:
            fh.write(_LOG_MAGIC)
            fh.flush()
    try:
        for stage in stages:
            charged = 0
            for point in _stage_cells(stage, degree):
                if stage.max_cells is not None and charged >= stage.max_cells:
                    break
                if point.a_is_zero():
                    continue
                key = point.key()
                if state.visited.get(key, 0) >= stage.N_max:
                    charged += 1
                    continue
                if state.covered(point):
                    continue
                charged += 1
                ball = _try_cell(point, stage, state, out_dir, threads)
                state.visited[key] = stage.N_max
                if fh is not None:
                    _append_record(fh, _cell_doc(point, stage.N_max, ball))
                if ball is not None:
                    state.balls.append(ball)
                    yield ball
    finally:
        if fh is not None:
            fh.close()


def _try_cell(point: ParamPoint, stage: Stage, state: SweepState,
              out_dir: str | None, threads: int) -> HypBall | None:
    f = point.to_map()
    R = f.filtration_radius()
    max_n = stage.max_n
    if max_n is None:
        max_n = compute_n_prime(stage.N_max, R) + 6
    try:
        cert = run_certifier(f, max_N=stage.N_max, threads=threads,
                             phase_samples=stage.phase_samples, max_n=max_n)
    except BudgetExhausted:
        return None
    try:
        r = robustness_radius(f, cert, R, stage.phase_samples)
    except ZeroRadius:
        return None
    clipped = False
    while not r < point.a_linf():
        r = r.scale2(-1)
        clipped = True
    if r.sign() <= 0:
        return None
    if clipped:
        ok, _ = check_ball(f, cert, r, R, stage.phase_samples)
        if not ok:
            return None
    ref = f"ball-{len(state.balls)}"
    if out_dir is not None:
        path = os.path.join(out_dir, f"{ref}.cert.json")
        dump_certificate(cert, map_hash(f), path)
        ref = path
    return HypBall(point, r, ref, cert)
