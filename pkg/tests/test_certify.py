import math
import random

import pytest

from henoncert.dyadic import Dyadic, ZERO, ONE
from henoncert.henon import quadratic_henon
from henoncert.intervals import BoxC2, ComplexRect, MatrixRect, RealInterval
from henoncert.boxmodel import GridSpec
from henoncert.periodic import PeriodicOrbit
from henoncert.juliaset import Session, run_julia
from henoncert.certify import (
    ExpansionWitness,
    HypCertificate,
    VerificationFailure,
    WitnessExhausted,
    _decompose,
    build_frames,
    compute_delta,
    compute_gamma,
    compute_Q,
    dump_certificate,
    find_witness,
    load_certificate,
    orbit_frame_table,
    rho_of_lambda,
    run_certifier,  # noqa: F401  (exercised by the acceptance suite)
    verify_certificate,
)
from henoncert.mapfile import map_hash


def horseshoe():
    return quadratic_henon(Dyadic(1, -4), Dyadic(-6))


@pytest.fixture(scope="module")
def horseshoe_pipeline():
    """One N=1 approximation with all certification constants computed."""
    f = horseshoe()
    session = Session(f)
    res = run_julia(f, 1, max_n=20, session=session)
    saddles = [o for o in res.orbits if o.klass == "saddle"]
    frames = orbit_frame_table(f, saddles)
    witness = find_witness(saddles, frames, f, m_max=4)
    rho = rho_of_lambda(witness.lam)
    boxes = build_frames(res, saddles, frames, rho)
    gamma = compute_gamma(saddles, frames, witness, rho, f)
    cert = HypCertificate(res.N, res.n, res.k, witness, rho, gamma,
                          ZERO, ZERO, None, "not-yet", res.spec,
                          saddles, frames, boxes)
    cert.M2, cert.Q = compute_Q(f, session.R, witness.m, cert.frames,
                                res.spec)
    return f, session, res, cert


# -- stubs: exactly diagonal saddle models -------------------------------------

def _diag_matrix(lu: complex, ls: complex) -> MatrixRect:
    return MatrixRect(ComplexRect.from_complex(lu), ComplexRect.from_int(0),
                      ComplexRect.from_int(0), ComplexRect.from_complex(ls))


class DiagMap:
    """Constant-derivative stub: D f = diag(lu, ls) everywhere."""

    def __init__(self, lu, ls, m2=ZERO):
        self.lu = lu
        self.ls = ls
        self.m2 = m2

    def jacobian(self, box, direction="forward"):
        if direction == "forward":
            return _diag_matrix(self.lu, self.ls)
        return _diag_matrix(1 / self.lu, 1 / self.ls)

    def iterate_jacobian(self, box, m, direction="forward"):
        j = self.jacobian(box, direction)
        out = j
        for _ in range(m - 1):
            out = j * out
        return out

    def second_derivative_bound(self, R, m):
        return self.m2


def _fixed_saddle():
    """A period-1 'orbit' at the origin with axis frames."""
    zero = Dyadic(0)
    pt = (zero, zero, zero, zero)
    box = BoxC2(ComplexRect.point(zero, zero), ComplexRect.point(zero, zero))
    o = PeriodicOrbit(1, [pt], [box], Dyadic(1, -30))
    o.klass = "saddle"
    eu = (ComplexRect.from_int(1), ComplexRect.from_int(0))
    es = (ComplexRect.from_int(0), ComplexRect.from_int(1))
    return o, [[(eu, es)]]


def _stub_certificate(Q=ZERO, M2=ZERO, gamma=Dyadic(1, -2), N=5):
    """A fully valid certificate for the diag(2, 1/2) model."""
    lam = Dyadic(1, -1)
    rho = rho_of_lambda(lam)
    o, frames = _fixed_saddle()
    spec = GridSpec(Dyadic(1), 2)
    code = spec.encode((2, 2, 2, 2))  # central box: contains the origin
    delta = compute_delta(Q, gamma, lam, 2 * N)
    cert = HypCertificate(N, 8, 5, ExpansionWitness(1, lam), rho, gamma,
                          Q, M2, delta, "certified", spec, [o], frames,
                          [(code, 0, 0)])
    return cert


# -- Step 2: witness -----------------------------------------------------------

def test_witness_diagonal_models():
    o, frames = _fixed_saddle()
    # multipliers 2 and 1/2: m=1 works and the schedule caps lambda at 1/2
    w = find_witness([o], frames, DiagMap(2, 0.5), m_max=4)
    assert (w.m, w.lam) == (1, Dyadic(1, -1))
    # weak expansion 1.1: m=1 already admits lambda = 1/16 on the schedule
    w = find_witness([o], frames, DiagMap(1.1, 1 / 1.1), m_max=4)
    assert (w.m, w.lam) == (1, Dyadic(1, -4))
    # expansion below the schedule floor: budget exhaustion is soft
    with pytest.raises(WitnessExhausted):
        find_witness([o], frames, DiagMap(1.00001, 1 / 1.00001), m_max=2)


def test_witness_horseshoe(horseshoe_pipeline):
    f, _, res, cert = horseshoe_pipeline
    w = cert.witness
    assert (w.m, w.lam) == (1, Dyadic(1, -1))
    # re-check the defining inequalities at every saddle orbit point
    thresh = ONE + w.lam
    from henoncert.intervals import euclid_norm_enclosure
    for o, fr in zip(cert.orbits, cert.orbit_frames):
        for i in range(o.period):
            J = f.jacobian(o.enclosures[i])
            assert euclid_norm_enclosure(J.apply(fr[i][0])).lo >= thresh
            Jb = f.jacobian(o.enclosures[i], "inverse")
            assert euclid_norm_enclosure(Jb.apply(fr[i][1])).lo >= thresh


# -- Step 3: rho and cone disjointness -----------------------------------------

def test_rho_exact_values():
    assert rho_of_lambda(Dyadic(2)) == Dyadic(1, -1)
    assert rho_of_lambda(Dyadic(6)) == Dyadic(3, -2)


def test_rho_monotone_rounded_down():
    prev = None
    for k in range(-6, 7):  # lambda = 2^k increasing
        lam = Dyadic(1, k)
        rho = rho_of_lambda(lam)
        assert ZERO < rho < ONE
        # rounded down: rho * (2 + lambda) <= lambda exactly
        assert rho * (Dyadic(2) + lam) <= lam
        if prev is not None:
            assert rho > prev  # monotone toward 1
        prev = rho
    with pytest.raises(ValueError):
        rho_of_lambda(ZERO)


def test_cone_disjointness():
    # |beta| <= rho|alpha| and |alpha| <= rho|beta| with rho < 1 force 0
    rng = random.Random(11)
    for _ in range(200):
        rho = rng.uniform(0.01, 0.99)
        a, b = rng.uniform(-2, 2), rng.uniform(-2, 2)
        if abs(b) <= rho * abs(a) and abs(a) <= rho * abs(b):
            assert a == 0 and b == 0


def test_scaling_invariance_of_membership():
    # scaling frame vectors by a common complex scalar keeps the
    # projection-norm ratio, hence cone membership, unchanged
    eu = (ComplexRect.from_complex(1 + 0.5j), ComplexRect.from_complex(0.25j))
    es = (ComplexRect.from_complex(0.1 + 0j), ComplexRect.from_complex(1 - 0.3j))
    w = (ComplexRect.from_complex(0.7 - 0.2j), ComplexRect.from_complex(0.4j))
    c = ComplexRect.from_complex(0.3 - 1.7j)
    a1, b1 = _decompose(w, eu, es)
    a2, b2 = _decompose(w, (eu[0] * c, eu[1] * c), (es[0] * c, es[1] * c))
    r1 = b1.abs_enclosure() / a1.abs_enclosure()
    r2 = b2.abs_enclosure() / a2.abs_enclosure()
    assert r1.intersect(r2) is not None  # identical ratio up to rounding


# -- Step 4: gamma -------------------------------------------------------------

def test_gamma_diagonal_model():
    o, frames = _fixed_saddle()
    f = DiagMap(2, 0.5)
    w = find_witness([o], frames, f, m_max=2)
    rho = rho_of_lambda(w.lam)
    g = compute_gamma([o], frames, w, rho, f)
    # image of b = (1, rho)/||.|| is strictly inside the cone; the bound
    # saturates at lambda/4 (the only value Delta uses)
    assert float(g) >= float(w.lam.scale2(-2))


def test_gamma_horseshoe_clears_quarter_lambda(horseshoe_pipeline):
    _, _, _, cert = horseshoe_pipeline
    assert cert.gamma >= cert.witness.lam.scale2(-2)


def test_gamma_phase_samples_only_shrink(horseshoe_pipeline):
    f, _, _, cert = horseshoe_pipeline
    sub = cert.orbits[:2]
    frames = cert.orbit_frames[:2]
    g0 = compute_gamma(sub, frames, cert.witness, cert.rho, f)
    g8 = compute_gamma(sub, frames, cert.witness, cert.rho, f,
                       phase_samples=8)
    assert g8 <= g0


# -- Step 5: Q and Delta -------------------------------------------------------

def test_normalization_inequality_oracle():
    # ||a/||a|| - b/||b|||| <= 2 ||a-b|| / ||a|| on random vector pairs
    rng = random.Random(5)
    for _ in range(10 ** 4):
        a = [complex(rng.gauss(0, 1), rng.gauss(0, 1)) for _ in range(2)]
        d = [complex(rng.gauss(0, 0.3), rng.gauss(0, 0.3)) for _ in range(2)]
        b = [x + y for x, y in zip(a, d)]
        na = math.sqrt(sum(abs(x) ** 2 for x in a))
        nb = math.sqrt(sum(abs(x) ** 2 for x in b))
        if na < 1e-9 or nb < 1e-9:
            continue
        lhs = math.sqrt(sum(abs(x / na - y / nb) ** 2 for x, y in zip(a, b)))
        rhs = 2 * math.sqrt(sum(abs(x) ** 2 for x in d)) / na
        assert lhs <= rhs + 1e-12


def test_m2_monotone_in_m():
    f = horseshoe()
    R = f.filtration_radius()
    bounds = [f.second_derivative_bound(R, m) for m in (1, 2, 3)]
    assert bounds[0] <= bounds[1] <= bounds[2]


def test_q_zero_for_linear_stub():
    cert = _stub_certificate()
    f = DiagMap(2, 0.5, m2=ZERO)
    M2, Q = compute_Q(f, Dyadic(1), 1, cert.frames, cert.spec)
    assert M2.is_zero() and Q.is_zero()
    assert compute_delta(Q, Dyadic(1), Dyadic(1), 10) is None


def test_q_horseshoe(horseshoe_pipeline):
    _, _, _, cert = horseshoe_pipeline
    # single quadratic factor: M2 = sup |p''| = 2 exactly
    assert cert.M2 == Dyadic(2)
    assert cert.Q >= cert.M2


def test_delta_examples():
    # Q=1, gamma=1/2, lambda=1: just below 1/4
    assert compute_delta(Dyadic(1), Dyadic(1, -1), Dyadic(1), 8) == \
        Dyadic(1, -2) - Dyadic(1, -8)
    # Q=4, gamma=1, lambda=8: (1/4) min{1, 2} = 1/4
    assert compute_delta(Dyadic(4), Dyadic(1), Dyadic(8), 8) == \
        Dyadic(1, -2) - Dyadic(1, -8)
    # inexact quotient: largest grid point strictly below 1/12 resp. 1/24
    d3 = compute_delta(Dyadic(3), Dyadic(5, -3), Dyadic(1), 8)
    d6 = compute_delta(Dyadic(6), Dyadic(5, -3), Dyadic(1), 8)
    assert d3 == Dyadic(21, -8) and d6 == Dyadic(10, -8)
    assert float(d3) < 1 / 12 < float(d3) + 2 ** -8


# -- certificate files and verification ----------------------------------------

def test_certificate_roundtrip(tmp_path, horseshoe_pipeline):
    f, _, _, cert = horseshoe_pipeline
    path = str(tmp_path / "cert.json")
    dump_certificate(cert, map_hash(f), path)
    back, h = load_certificate(path)
    assert h == map_hash(f)
    assert (back.N, back.n, back.k) == (cert.N, cert.n, cert.k)
    assert back.witness.m == cert.witness.m
    assert back.witness.lam == cert.witness.lam
    assert (back.rho, back.gamma, back.Q, back.M2) == \
        (cert.rho, cert.gamma, cert.Q, cert.M2)
    assert back.delta is None and cert.delta is None
    assert back.boxes == cert.boxes
    fr0, fr1 = back.frames[0], cert.frames[0]
    assert fr0.code == fr1.code and fr0.x == fr1.x
    assert fr0.eu[0].re.lo == fr1.eu[0].re.lo


def test_verify_valid_stub_certificate():
    cert = _stub_certificate()
    rep = verify_certificate(cert, DiagMap(2, 0.5), 500, seed=2)
    assert rep["violations"] == 0 and rep["status"] == "ok"


def test_verify_fault_injection_lambda():
    cert = _stub_certificate()
    cert.witness.lam = cert.witness.lam.scale2(1)  # doubled by hand
    with pytest.raises(VerificationFailure):
        verify_certificate(cert, DiagMap(2, 0.5), 100, seed=2)


def test_verify_fault_injection_delta():
    cert = _stub_certificate(Q=Dyadic(2), M2=Dyadic(2))
    assert cert.delta is not None
    rep = verify_certificate(cert, DiagMap(2, 0.5), 200, seed=4)
    assert rep["violations"] == 0
    cert.delta = Dyadic(1)  # breaks Q Delta < gamma
    with pytest.raises(VerificationFailure):
        verify_certificate(cert, DiagMap(2, 0.5), 100, seed=4)


def test_verify_detects_cone_violation():
    cert = _stub_certificate()
    # a map that swaps the axes cannot preserve the cone field
    with pytest.raises(VerificationFailure):
        verify_certificate(cert, DiagMap(0.5, 2), 200, seed=6)


def test_verify_requires_certified_status(horseshoe_pipeline):
    _, _, _, cert = horseshoe_pipeline
    with pytest.raises(ValueError):
        verify_certificate(cert, horseshoe(), 10)
