"""Hyperbolicity certification: expansion witness, cone field, gamma/Q/Delta.

The certifier wraps the 2^N-approximation loop (juliaset): for each N it
searches an expansion witness (m, lambda) on the certified saddle orbits,
builds cone frames with weighting rho_lambda on every doubled box of the
saddle region Xi'_N, and computes the three constants of the perturbation
argument -- gamma (certified slack between image directions and the image
cone boundary), Q (Lipschitz constant of the normalized derivative) and
Delta (the perturbation budget).  Certification succeeds when 2^{-N} <
Delta as an exact dyadic inequality: the cone field then extends from the
periodic points to the whole box neighbourhood, which is the hyperbolicity
certificate.

All constants are dyadic, every inequality is exact, and every soft
failure (no witness, gamma not positive, degenerate norm lower bound)
routes back to "increment N".  verify_certificate re-checks a finished
certificate independently: the dyadic inequalities exactly, and the cone
invariance/expansion claims by seeded Monte-Carlo sampling with interval
arithmetic (using the backward derivative chain, a code path the certifier
does not use).
"""

from __future__ import annotations

import cmath
import json
import random

from .dyadic import Dyadic, ZERO, ONE, TWO, dy_min, dy_max, div_dyadic, \
    floor_div, sqrt_dyadic
from .intervals import (
    BoxC2,
    ComplexRect,
    DivisionByIntervalContainingZero,
    MatrixRect,
    RealInterval,
    euclid_norm_enclosure,
    get_precision,
)
from .henon import PolyDiffeo
from .boxmodel import GridSpec
from .periodic import PeriodicOrbit, Undetermined, frames_along_orbit, orbit_from_doc, \
    orbit_to_doc, _rect_pairs, _rect_from_pairs
from .juliaset import BudgetExhausted, Session, run_julia


class WitnessExhausted(BudgetExhausted):
    """No expansion witness up to the current m cap (soft: escalate N)."""


class NonPositiveGamma(ArithmeticError):
    """The certified lower bound for gamma fails to clear 0 (soft)."""


class DegenerateLowerBound(ArithmeticError):
    """The norm lower bound mu touches 0 (soft)."""


class FrameUnavailable(RuntimeError):
    """A Xi'_N box contains no certified saddle point (soft)."""


class VerificationFailure(RuntimeError):
    """An independent certificate re-check found a concrete violation."""


# -- domain types --------------------------------------------------------------

class ExpansionWitness:
    """Iterate m and rate lambda with ||Df^m e^u|| >= 1+lambda and
    ||Df^{-m} e^s|| >= 1+lambda at every certified saddle orbit point."""

    __slots__ = ("m", "lam")

    def __init__(self, m: int, lam: Dyadic):
        self.m = m
        self.lam = lam

    def __repr__(self):
        return f"ExpansionWitness(m={self.m}, lambda={float(self.lam)})"


class ConeFrame:
    """Stable/unstable direction enclosures anchoring the cones of one box."""

    __slots__ = ("code", "x", "eu", "es", "rho")

    def __init__(self, code: int, x, eu, es, rho: Dyadic):
        self.code = code
        self.x = x
        self.eu = eu
        self.es = es
        self.rho = rho


class HypCertificate:
    """All constants of a (possibly finished) certification attempt.

    Frames are stored structurally: per saddle orbit the unit direction
    enclosures at every point, and per Xi'_N box the (orbit, point) whose
    frame the box inherits.  `frames` materializes the per-box ConeFrame
    view required by the certificate semantics.
    """

    __slots__ = ("N", "n", "k", "witness", "rho", "gamma", "Q", "M2", "delta",
                 "status", "spec", "orbits", "orbit_frames", "boxes")

    def __init__(self, N, n, k, witness, rho, gamma, Q, M2, delta, status,
                 spec, orbits, orbit_frames, boxes):
        self.N = N
        self.n = n
        self.k = k
        self.witness = witness
        self.rho = rho
        self.gamma = gamma
        self.Q = Q
        self.M2 = M2
        self.delta = delta            # None is the +infinity sentinel (Q = 0)
        self.status = status          # "certified" or "not-yet"
        self.spec = spec              # GridSpec of level k
        self.orbits = orbits          # saddle orbits carrying the frames
        self.orbit_frames = orbit_frames  # per orbit: [(eu, es)] per point
        self.boxes = boxes            # per Xi'_N box: (code, orbit_i, point_i)

    @property
    def frames(self):
        return [ConeFrame(code, self.orbits[oi].points[pi],
                          self.orbit_frames[oi][pi][0],
                          self.orbit_frames[oi][pi][1], self.rho)
                for code, oi, pi in self.boxes]


# -- small vector helpers ------------------------------------------------------

def _vscale(v, s: ComplexRect):
    return (v[0] * s, v[1] * s)


def _vadd(v, w):
    return (v[0] + w[0], v[1] + w[1])


def _inner(v, w):
    """Hermitian inner product sum v_i conj(w_i)."""
    return v[0] * w[0].conj() + v[1] * w[1].conj()


def _rho_rect(rho: Dyadic) -> ComplexRect:
    return ComplexRect.point(rho, ZERO)


# -- Step 2: expansion witness -------------------------------------------------

_LAMBDA_MIN_EXP = 12  # schedule floor 2^{-12}


def orbit_frame_table(f: PolyDiffeo, saddles):
    """Per-orbit unit direction enclosures, shared by witness/gamma/frames."""
    return [frames_along_orbit(f, o) for o in saddles]


def _cyclic_products(jacs, m: int):
    """D f^m enclosures at every orbit point from the per-point jacobians."""
    p = len(jacs)
    out = []
    for i in range(p):
        M = jacs[i]
        for j in range(1, m):
            M = jacs[(i + j) % p] * M
        out.append(M)
    return out


def witness_holds(saddles, frames, f: PolyDiffeo,
                  witness: ExpansionWitness) -> bool:
    """Certified re-check of both witness inequalities at every orbit point
    (used by the parameter-ball re-verification)."""
    thresh = ONE + witness.lam
    m = witness.m
    for o, fr in zip(saddles, frames):
        p = o.period
        prods = _cyclic_products([f.jacobian(b) for b in o.enclosures], m)
        for i in range(p):
            if not euclid_norm_enclosure(prods[i].apply(fr[i][0])).lo >= thresh:
                return False
            try:
                inv = prods[(i - m) % p].inverse()
            except DivisionByIntervalContainingZero:
                return False
            if not euclid_norm_enclosure(inv.apply(fr[i][1])).lo >= thresh:
                return False
    return True


def find_witness(saddles, frames, f: PolyDiffeo,
                 m_max: int = 8) -> ExpansionWitness:
    """Smallest m (ties broken by the largest lambda in {2^{-1}, 2^{-2}, ...})
    with certified ||D_x f^m(e^u_x)|| >= 1+lambda and
    ||D_x f^{-m}(e^s_x)|| >= 1+lambda at every saddle orbit point.

    The backward derivative is the matrix inverse enclosure of the forward
    cyclic product: D_{x_i} f^{-m} = (D_{x_{i-m}} f^m)^{-1}.
    """
    if not saddles:
        raise WitnessExhausted("no certified saddle orbits to witness")
    jac_table = [[f.jacobian(b) for b in o.enclosures] for o in saddles]
    prods = [list(jacs) for jacs in jac_table]  # D f^m at each point, m = 1
    for m in range(1, m_max + 1):
        lower = None  # certified min expansion over all points and both sides
        try:
            for o, fr, jacs, pr in zip(saddles, frames, jac_table, prods):
                p = o.period
                for i in range(p):
                    lo_u = euclid_norm_enclosure(pr[i].apply(fr[i][0])).lo
                    inv = pr[(i - m) % p].inverse()
                    lo_s = euclid_norm_enclosure(inv.apply(fr[i][1])).lo
                    for lo in (lo_u, lo_s):
                        lower = lo if lower is None else dy_min(lower, lo)
        except DivisionByIntervalContainingZero:
            lower = None  # determinant enclosure degenerate at this m
        if lower is not None:
            for kexp in range(1, _LAMBDA_MIN_EXP + 1):
                lam = Dyadic(1, -kexp)
                if ONE + lam <= lower:
                    return ExpansionWitness(m, lam)
        if m < m_max:  # extend the cyclic products by one iterate
            for o, jacs, pr in zip(saddles, jac_table, prods):
                p = o.period
                for i in range(p):
                    pr[i] = jacs[(i + m) % p] * pr[i]
    raise WitnessExhausted(f"no expansion witness up to m={m_max}")


# -- Step 3: weighting constant and per-box frames -----------------------------

def rho_of_lambda(lam: Dyadic) -> Dyadic:
    """rho_lambda = (1+lambda)/(1+lambda/2) - 1 = lambda/(2+lambda), rounded
    down (narrower cones keep the preservation/expansion proofs valid)."""
    if lam.sign() <= 0:
        raise ValueError("lambda must be positive")
    return div_dyadic(lam, TWO + lam, get_precision(), "down")


def build_frames(result, saddles, frames, rho: Dyadic):
    """One (code, orbit, point) frame assignment per Xi'_N box.

    Each box inherits the frame of the first saddle point (orbit order,
    then point order) inside its doubled geometry; any choice of cone at a
    multiply-covered point is admissible.
    """
    spec = result.spec
    boxes = []
    for code in result.xi_prime_codes():
        double = spec.double_geometry(spec.decode(code))
        chosen = None
        for oi, o in enumerate(saddles):
            for pi, pt in enumerate(o.points):
                if (double.z.re.contains(pt[0]) and double.z.im.contains(pt[1])
                        and double.w.re.contains(pt[2])
                        and double.w.im.contains(pt[3])):
                    chosen = (code, oi, pi)
                    break
            if chosen is not None:
                break
        if chosen is None:
            raise FrameUnavailable(f"box {code} holds no certified saddle point")
        boxes.append(chosen)
    return boxes


# -- Step 4: gamma -------------------------------------------------------------

def _circle_points(P: int):
    """>= P phase enclosures spread over the circle (thin rectangles)."""
    prec = get_precision()
    one = RealInterval.from_int(1)
    pts = []
    for j in range(P):
        num, den = Dyadic(2 * j - P), Dyadic(P)
        t = RealInterval(div_dyadic(num, den, prec, "down"),
                         div_dyadic(num, den, prec, "up"))
        t2 = t.sq()
        d = one + t2
        p = ComplexRect((one - t2) / d, t.scale2(1) / d)
        pts.append(p)
        pts.append(-p)
    return pts


_PHASE_MAX_DEPTH = 9  # finest boundary subdivision: 2 * 2^9 circle pieces


def _min_d2_to_boundary(v, main_img, other_img, rho: Dyadic,
                        target: Dyadic) -> Dyadic:
    """Certified lower bound of the squared distance from the direction of v
    to the phase circle of boundary unit vectors main + e^{i theta} rho other
    (minimum over the boundary phase and the global phase).

    The global phase is eliminated exactly: min over phi of
    ||v/||v|| - e^{i phi} u/||u||||^2 = 2 - 2 |<v, u>| / (||v|| ||u||).
    The boundary phase circle is enclosed by the rational parametrization
    t -> ((1-t^2)/(1+t^2), 2t/(1+t^2)), t in [-1, 1], for the right half
    and its negation for the left, branch-and-bound subdivided in t: pieces
    whose bound clears `target` are not refined further (Delta only ever
    uses min{gamma, lambda/4}, so slack above the target is irrelevant).
    """
    nv = euclid_norm_enclosure(v)
    scaled = _vscale(other_img, _rho_rect(rho))
    one = RealInterval.from_int(1)
    two = RealInterval.from_int(2)
    best = None
    stack = [(Dyadic(-1), Dyadic(1), sign, 0) for sign in (1, -1)]
    while stack:
        tlo, thi, sign, depth = stack.pop()
        t = RealInterval(tlo, thi)
        t2 = t.sq()
        den = one + t2
        ph = ComplexRect((one - t2) / den, t.scale2(1) / den)
        if sign < 0:
            ph = -ph
        u = _vadd(main_img, _vscale(scaled, ph))
        denom = nv * euclid_norm_enclosure(u)
        if denom.lo.sign() <= 0:
            raise NonPositiveGamma("degenerate norm in gamma denominator")
        q = _inner(v, u).abs_enclosure() / denom
        lo = (two - q.scale2(1)).lo
        if lo < target and depth < _PHASE_MAX_DEPTH:
            mid = (tlo + thi).scale2(-1)
            stack.append((tlo, mid, sign, depth + 1))
            stack.append((mid, thi, sign, depth + 1))
            continue
        best = lo if best is None else dy_min(best, lo)
    return best


def compute_gamma(saddles, frames, witness: ExpansionWitness, rho: Dyadic,
                  f: PolyDiffeo, phase_samples: int = 0) -> Dyadic:
    """Certified positive lower bound of min_x gamma(x) over both cone
    families: the distance from the normalized image of the boundary
    representative b_x = (e^u + rho e^s)/||.|| under D f^m to the boundary
    phase circle of the image cone (and the stable/f^{-m} mirror).

    phase_samples > 0 additionally probes that many source boundary phases
    e^{i theta} rho e^s (the default single representative follows the
    linearity of D f^m).
    """
    m = witness.m
    rr = _rho_rect(rho)
    quarter = witness.lam.scale2(-2)
    target = quarter * quarter  # refine only below (lambda/4)^2
    src_phases = [ComplexRect.from_int(1)]
    if phase_samples > 0:
        src_phases += _circle_points(phase_samples)
    min_d2 = None
    for o, fr in zip(saddles, frames):
        p = o.period
        jacs = [f.jacobian(b) for b in o.enclosures]
        prods = []
        for i in range(p):
            M = jacs[i]
            for j in range(1, m):
                M = jacs[(i + j) % p] * M
            prods.append(M)
        for i in range(p):
            eu, es = fr[i]
            eu_f, es_f = fr[(i + m) % p]
            eu_b, es_b = fr[(i - m) % p]
            try:
                inv = prods[(i - m) % p].inverse()
            except DivisionByIntervalContainingZero:
                raise NonPositiveGamma("backward derivative enclosure degenerate")
            for ph in src_phases:
                bu = _vadd(eu, _vscale(es, rr * ph))
                bs = _vadd(es, _vscale(eu, rr * ph))
                for v, main, other in (
                        (prods[i].apply(bu), eu_f, es_f),
                        (inv.apply(bs), es_b, eu_b)):
                    d2 = _min_d2_to_boundary(v, main, other, rho, target)
                    if d2.sign() <= 0:
                        raise NonPositiveGamma(
                            "image direction not certifiably inside the cone")
                    min_d2 = d2 if min_d2 is None else dy_min(min_d2, d2)
    if min_d2 is None or min_d2.sign() <= 0:
        raise NonPositiveGamma("no saddle points to bound gamma")
    return sqrt_dyadic(min_d2, get_precision(), "down")


# -- Step 5: Q and Delta -------------------------------------------------------

def compute_Q(f: PolyDiffeo, R: Dyadic, m: int, cert_frames,
              spec: GridSpec):
    """(M2, Q) with ||D_x f^m(b)/||.|| - D_y f^m(b)/||.|||| <= Q ||x - y||.

    M2 bounds the second derivative of f^m over V_{2R} (covers doubled
    boxes); mu is the certified minimum of ||D_y f^m(b_x)|| over each
    doubled box with its unit boundary representative; Q = max(M2, 2 M2/mu)
    makes both the normalized and the unnormalized perturbation inequality
    valid.
    """
    M2 = f.second_derivative_bound(R, m)
    prec = get_precision()
    mu = None
    for frame in cert_frames:
        box = spec.double_geometry(spec.decode(frame.code))
        J = f.iterate_jacobian(box, m)
        b = _vadd(frame.eu, _vscale(frame.es, _rho_rect(frame.rho)))
        num = euclid_norm_enclosure(J.apply(b)).lo
        den = euclid_norm_enclosure(b).hi
        if num.sign() <= 0 or den.sign() <= 0:
            raise DegenerateLowerBound(
                f"norm lower bound touches 0 on box {frame.code}")
        mu_box = div_dyadic(num, den, prec, "down")
        mu = mu_box if mu is None else dy_min(mu, mu_box)
    if mu is None or mu.sign() <= 0:
        raise DegenerateLowerBound("no boxes to bound mu")
    Q = dy_max(M2, div_dyadic(M2.scale2(1), mu, prec, "up"))
    return M2, Q


def compute_delta(Q: Dyadic, gamma: Dyadic, lam: Dyadic,
                  prec_exp: int) -> Dyadic | None:
    """Largest multiple of 2^{-prec_exp} strictly below
    (1/Q) min{gamma, lambda/4}; None is the +infinity sentinel for Q = 0."""
    if Q.sign() < 0:
        raise ValueError("Q must be nonnegative")
    if Q.is_zero():
        return None
    target = dy_min(gamma, lam.scale2(-2))
    k = floor_div(target.scale2(prec_exp), Q)
    if Dyadic(k) * Q == target.scale2(prec_exp):
        k -= 1  # exact quotient: strictness requires the next grid point down
    return Dyadic(k, -prec_exp)


# -- Steps 1-6: the certifier loop ---------------------------------------------

_M_CAP_BASE = 2  # witness iterate cap at N = 1; doubles with N


def run_certifier(f: PolyDiffeo, max_N: int | None = None,
                  session: Session | None = None, threads: int = 1,
                  phase_samples: int = 0,
                  max_n: int | None = None) -> HypCertificate:
    """The hyperbolicity semi-algorithm; halts iff f|J is hyperbolic.

    For N = 1, 2, ...: run the 2^N-approximation (Step 1), search the
    expansion witness on its saddle orbits (Step 2), frame every Xi'_N box
    (Step 3), compute gamma, Q and Delta (Steps 4-5) and halt when
    2^{-N} < Delta holds exactly with Delta computed at precision 2^{-2N}
    (Step 6).  Every soft failure escalates N; BudgetExhausted is raised
    only for caller-imposed caps (max_N, max_n).
    """
    if session is None:
        session = Session(f, threads=threads)
    N = 1
    while True:
        if max_N is not None and N > max_N:
            raise BudgetExhausted(f"no certificate up to N={max_N}")
        result = run_julia(f, N, max_n=max_n, session=session, threads=threads)
        try:
            saddles = [o for o in result.orbits if o.klass == "saddle"]
            frames = orbit_frame_table(f, saddles)
            witness = find_witness(saddles, frames, f,
                                   m_max=_M_CAP_BASE << (N - 1))
            rho = rho_of_lambda(witness.lam)
            boxes = build_frames(result, saddles, frames, rho)
            cert = HypCertificate(N, result.n, result.k, witness, rho,
                                  ZERO, ZERO, ZERO, None, "not-yet",
                                  result.spec, saddles, frames, boxes)
            cert.gamma = compute_gamma(saddles, frames, witness, rho, f,
                                       phase_samples)
            cert.M2, cert.Q = compute_Q(f, session.R, witness.m, cert.frames,
                                        result.spec)
            cert.delta = compute_delta(cert.Q, cert.gamma, witness.lam, 2 * N)
        except (WitnessExhausted, NonPositiveGamma, DegenerateLowerBound,
                FrameUnavailable, Undetermined):
            N += 1
            continue
        if cert.delta is None or Dyadic(1, -N) < cert.delta:
            cert.status = "certified"
            return cert
        N += 1


# -- independent verification --------------------------------------------------

def _sample_in(iv: RealInterval, rng: random.Random) -> Dyadic:
    """A dyadic point in [lo, hi], exactly (no rounding can escape)."""
    u = Dyadic.from_float(rng.random())
    return iv.lo + u * (iv.hi - iv.lo)


def _decompose(w, eu, es):
    """Interval coordinates (alpha, beta) of w in the frame w = alpha eu +
    beta es, by Cramer's rule."""
    det = eu[0] * es[1] - es[0] * eu[1]
    alpha = (w[0] * es[1] - es[0] * w[1]) / det
    beta = (eu[0] * w[1] - w[0] * eu[1]) / det
    return alpha, beta


def verify_certificate(cert: HypCertificate, f: PolyDiffeo, samples: int,
                       seed: int = 0) -> dict:
    """Independent re-check of a certified output.

    (i) exact dyadic re-derivation of the rho formula and the Delta/halting
    inequalities; (ii) seeded Monte-Carlo: points y in doubled certified
    boxes and unit vectors v in the cone there must satisfy certified cone
    invariance and expansion by 1+lambda/4 under D_y f^{+-m}.  The backward
    derivative uses the inverse-map jacobian chain, which the certifier
    never exercises.  Raises VerificationFailure on the first violation.
    """
    if cert.status != "certified":
        raise ValueError("certificate is not certified")
    lam, m = cert.witness.lam, cert.witness.m

    # (i) exact dyadic re-derivations
    if rho_of_lambda(lam) != cert.rho:
        raise VerificationFailure("rho does not match rho_of_lambda(lambda)")
    if not (cert.rho.sign() > 0 and cert.rho < ONE):
        raise VerificationFailure("rho outside (0, 1): cones not disjoint")
    if cert.delta is None:
        if not cert.Q.is_zero():
            raise VerificationFailure("infinite Delta with nonzero Q")
    else:
        qd = cert.Q * cert.delta
        if not (qd < cert.gamma):
            raise VerificationFailure("Q Delta < gamma fails exactly")
        if not (qd < lam.scale2(-2)):
            raise VerificationFailure("Q Delta < lambda/4 fails exactly")
        if not (Dyadic(1, -cert.N) < cert.delta):
            raise VerificationFailure("2^{-N} < Delta fails exactly")
    codes = [code for code, _, _ in cert.boxes]
    if len(set(codes)) != len(codes):
        raise VerificationFailure("a box carries more than one frame")

    # (ii) Monte-Carlo cone invariance and expansion
    rng = random.Random(seed)
    factor = ONE + lam.scale2(-2)  # 1 + lambda/4
    shrink = 1.0 - 1e-9            # keeps sampled vectors inside the open cone
    for s in range(samples):
        code, oi, pi = cert.boxes[rng.randrange(len(cert.boxes))]
        orbit = cert.orbits[oi]
        per = orbit.period
        eu, es = cert.orbit_frames[oi][pi]
        box = cert.spec.double_geometry(cert.spec.decode(code))
        y = BoxC2(
            ComplexRect(RealInterval.point(_sample_in(box.z.re, rng)),
                        RealInterval.point(_sample_in(box.z.im, rng))),
            ComplexRect(RealInterval.point(_sample_in(box.w.re, rng)),
                        RealInterval.point(_sample_in(box.w.im, rng))))
        stable = rng.randrange(2) == 1
        main, other = (es, eu) if stable else (eu, es)
        # exact dyadic vector strictly inside the cone, built from the frame
        # midpoints and a random admissible component ratio
        t = rng.random() * float(cert.rho) * shrink
        glob = cmath.exp(2j * cmath.pi * rng.random())
        coeff = t * cmath.exp(2j * cmath.pi * rng.random())
        v = tuple(
            ComplexRect.from_complex(glob * (a.mid_complex()
                                             + coeff * b.mid_complex()))
            for a, b in zip(main, other))
        direction = "inverse" if stable else "forward"
        J = f.iterate_jacobian(y, m, direction=direction)
        w = J.apply(v)
        # expansion by at least 1 + lambda/4
        if not (euclid_norm_enclosure(w).lo
                >= factor * euclid_norm_enclosure(v).hi):
            raise VerificationFailure(
                f"sample {s}: expansion below 1+lambda/4 on box {code}")
        # invariance: w must lie in the cone at the image orbit point
        qi = (pi - m) % per if stable else (pi + m) % per
        eu_i, es_i = cert.orbit_frames[oi][qi]
        try:
            alpha, beta = _decompose(w, eu_i, es_i)
        except DivisionByIntervalContainingZero:
            raise VerificationFailure(
                f"sample {s}: image frame decomposition degenerate")
        big, small = (alpha, beta) if stable else (beta, alpha)
        if not (big.abs_enclosure().hi
                <= cert.rho * small.abs_enclosure().lo):
            raise VerificationFailure(
                f"sample {s}: image vector escapes the cone on box {code}")
    return {"samples": samples, "violations": 0, "status": "ok"}


# -- certificate files ---------------------------------------------------------

CERT_FORMAT = "henoncert-certificate"
CERT_VERSION = 1


def _vec_pairs(v):
    return [_rect_pairs(v[0]), _rect_pairs(v[1])]


def _vec_from_pairs(obj):
    return (_rect_from_pairs(obj[0]), _rect_from_pairs(obj[1]))


def dump_certificate(cert: HypCertificate, map_hash: str, path: str) -> None:
    doc = {
        "format": CERT_FORMAT,
        "version": CERT_VERSION,
        "map_hash": map_hash,
        "status": cert.status,
        "N": cert.N,
        "n": cert.n,
        "k": cert.k,
        "m": cert.witness.m,
        "lambda": list(cert.witness.lam.as_pair()),
        "rho": list(cert.rho.as_pair()),
        "gamma": list(cert.gamma.as_pair()),
        "Q": list(cert.Q.as_pair()),
        "M2": list(cert.M2.as_pair()),
        "delta": None if cert.delta is None else list(cert.delta.as_pair()),
        "R": list(cert.spec.R.as_pair()),
        "level": cert.spec.level,
        "orbits": [orbit_to_doc(o) for o in cert.orbits],
        "frames": [[[_vec_pairs(eu), _vec_pairs(es)] for eu, es in fr]
                   for fr in cert.orbit_frames],
        "boxes": [[list(cert.spec.decode(code)), oi, pi]
                  for code, oi, pi in cert.boxes],
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, separators=(",", ":"))
        fh.write("\n")


def load_certificate(path: str):
    """Returns (HypCertificate, map_hash)."""
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("format") != CERT_FORMAT or doc.get("version") != CERT_VERSION:
        raise ValueError(f"{path}: not a version-{CERT_VERSION} certificate")
    spec = GridSpec(Dyadic.from_pair(doc["R"]), doc["level"])
    orbits = [orbit_from_doc(od) for od in doc["orbits"]]
    frames = [[(_vec_from_pairs(p[0]), _vec_from_pairs(p[1])) for p in fr]
              for fr in doc["frames"]]
    boxes = [(spec.encode(tuple(b)), oi, pi) for b, oi, pi in doc["boxes"]]
    witness = ExpansionWitness(doc["m"], Dyadic.from_pair(doc["lambda"]))
    delta = None if doc["delta"] is None else Dyadic.from_pair(doc["delta"])
    cert = HypCertificate(doc["N"], doc["n"], doc["k"], witness,
                          Dyadic.from_pair(doc["rho"]),
                          Dyadic.from_pair(doc["gamma"]),
                          Dyadic.from_pair(doc["Q"]),
                          Dyadic.from_pair(doc["M2"]),
                          delta, doc["status"], spec, orbits, frames, boxes)
    return cert, doc["map_hash"]


def summarize_certificate(cert: HypCertificate) -> str:
    """Human-readable one-paragraph summary for the CLI."""
    delta = "inf" if cert.delta is None else f"{float(cert.delta):.6g}"
    lines = [
        f"status     : {cert.status}",
        f"N, n, k    : {cert.N}, {cert.n}, {cert.k}",
        f"witness    : m = {cert.witness.m}, lambda = {float(cert.witness.lam):.6g}",
        f"rho        : {float(cert.rho):.6g}",
        f"gamma      : {float(cert.gamma):.6g}",
        f"M2, Q      : {float(cert.M2):.6g}, {float(cert.Q):.6g}",
        f"Delta      : {delta}  (2^-N = {2.0 ** -cert.N:.6g})",
        f"boxes      : {len(cert.boxes)} certified (doubled, side "
        f"{float(cert.spec.side) * 2:.6g})",
        f"orbits     : {len(cert.orbits)} saddle orbits, periods <= "
        f"{max((o.period for o in cert.orbits), default=0)}",
    ]
    return "\n".join(lines)
