import math

import pytest

from henoncert.dyadic import Dyadic
from henoncert.henon import quadratic_henon
from henoncert.boxmodel import ChainModel, GridSpec
from henoncert.juliaset import (
    BudgetExhausted,
    Session,
    _type_components,
    compute_n_prime,
    detect_disconnected,
    dump_approximation,
    halting_test,
    load_approximation,
    run_julia,
)
from henoncert.mapfile import map_hash
from henoncert.periodic import enumerate_periodic, classify


def horseshoe():
    return quadratic_henon(Dyadic(1, -4), Dyadic(-6))


def fig1():
    return quadratic_henon(Dyadic.from_float(0.15), Dyadic(-19, -4))


@pytest.fixture(scope="module")
def horseshoe_runs():
    f = horseshoe()
    session = Session(f)
    r1 = run_julia(f, 1, max_n=20, session=session)
    r2 = run_julia(f, 2, max_n=20, session=session)
    return f, session, r1, r2


def test_n_prime_examples():
    assert compute_n_prime(3, Dyadic.from_float(1.9)) == 6
    assert compute_n_prime(0, Dyadic(1)) == 3


def test_n_prime_monotone_and_bounds():
    for R in (Dyadic(1, -1), Dyadic(1), Dyadic.from_float(1.9), Dyadic(4)):
        prev = 0
        for N in range(12):
            n = compute_n_prime(N, R)
            assert n >= prev
            # defining inequality and minimality
            assert Dyadic(1, n) > R.scale2(N + 2) and R.scale2(n) > Dyadic(2)
            assert not (Dyadic(1, n - 1) > R.scale2(N + 2)
                        and R.scale2(n - 1) > Dyadic(2))
            prev = n
    with pytest.raises(ValueError):
        compute_n_prime(1, Dyadic(0))


def test_halting_vacuous_and_corner():
    spec = GridSpec(Dyadic(1), 2)
    empty = ChainModel(spec, [], [], 0)
    assert halting_test(empty, [])
    code = spec.encode((1, 1, 1, 1))
    one = ChainModel(spec, [code], [0], 1)
    # exact corner of the box: closed containment counts
    corner = spec.box_geometry((1, 1, 1, 1))
    p = (corner.z.re.lo, corner.z.im.lo, corner.w.re.lo, corner.w.im.lo)
    assert halting_test(one, [p])
    off = (corner.z.re.lo - spec.side, corner.z.im.lo, corner.w.re.lo,
           corner.w.im.lo)
    assert not halting_test(one, [off])


def test_horseshoe_result_structure(horseshoe_runs):
    f, session, r1, r2 = horseshoe_runs
    for res in (r1, r2):
        assert res.k >= compute_n_prime(res.N, session.R)
        assert res.k <= res.n
        # doubled box side 4R/2^k < 2^{-N}
        assert float(res.spec.side) * 2 < 2.0 ** -res.N
        # the horseshoe chain recurrent set is the Julia set: saddles only
        assert all(c == "saddle" for c in res.comp_class)
        assert res.xi_prime_codes() == res.xi_codes()
        assert res.attracting_codes() == []
        assert all(o.klass == "saddle" for o in res.orbits)


def test_every_box_holds_a_certified_point(horseshoe_runs):
    _, _, r1, _ = horseshoe_runs
    pts = [p for o in r1.orbits for p in o.points]
    assert halting_test(r1.model, pts)


def test_orbit_points_inside_xi_prime(horseshoe_runs):
    _, _, r1, _ = horseshoe_runs
    boxes = r1.xi_prime_boxes()
    for o in r1.orbits:
        for p in o.points:
            assert any(b.z.re.contains(p[0]) and b.z.im.contains(p[1])
                       and b.w.re.contains(p[2]) and b.w.im.contains(p[3])
                       for b in boxes)


def test_sandwich_between_successive_N(horseshoe_runs):
    _, _, r1, r2 = horseshoe_runs
    # every doubled box of the N=2 cover lies within 2^{-1} of the N=1 union
    slack = 2.0 ** -r1.N
    coarse = [r1.doubled_box(c) for c in r1.xi_codes()]
    for code in r2.xi_codes():
        b = r2.doubled_box(code)
        c_z = (float(b.z.re.lo + b.z.re.hi) / 2, float(b.z.im.lo + b.z.im.hi) / 2,
               float(b.w.re.lo + b.w.re.hi) / 2, float(b.w.im.lo + b.w.im.hi) / 2)
        def dist(cb):
            lo = (float(cb.z.re.lo), float(cb.z.im.lo),
                  float(cb.w.re.lo), float(cb.w.im.lo))
            hi = (float(cb.z.re.hi), float(cb.z.im.hi),
                  float(cb.w.re.hi), float(cb.w.im.hi))
            return max(max(l - v, v - h, 0.0) for v, l, h in zip(c_z, lo, hi))
        assert min(dist(cb) for cb in coarse) <= slack


def test_detect_disconnected_small_cases():
    spec = GridSpec(Dyadic(4), 4)
    base = (4, 4, 4, 4)
    # |delta| = 2 in one coordinate: doubled boxes still share a face
    touching = [spec.encode(base), spec.encode((6, 4, 4, 4))]
    status, comps = detect_disconnected(spec, touching)
    assert status == "inconclusive" and len(comps) == 1
    # |delta| = 3: a full empty cell between the doubled boxes
    apart = [spec.encode(base), spec.encode((7, 4, 4, 4))]
    status, comps = detect_disconnected(spec, apart)
    assert status == "disconnected" and len(comps) == 2
    assert comps[0][0] < comps[1][0]


def test_horseshoe_disconnected(horseshoe_runs):
    _, _, r1, _ = horseshoe_runs
    status, comps = detect_disconnected(r1.spec, r1.xi_prime_codes())
    assert status == "disconnected"
    assert len(comps) >= 2
    assert sorted(c for comp in comps for c in comp) == r1.xi_prime_codes()


def test_budget_exhausted():
    f = horseshoe()
    with pytest.raises(BudgetExhausted):
        run_julia(f, 1, max_n=6)


def test_result_file_roundtrip(tmp_path, horseshoe_runs):
    f, _, r1, _ = horseshoe_runs
    path = str(tmp_path / "approx.json")
    dump_approximation(r1, map_hash(f), path)
    r, h = load_approximation(path)
    assert h == map_hash(f)
    assert (r.N, r.n, r.k, r.ell) == (r1.N, r1.n, r1.k, r1.ell)
    assert r.model.codes == list(r1.model.codes)
    assert r.comp_class == r1.comp_class
    assert [o.period for o in r.orbits] == [o.period for o in r1.orbits]
    assert r.orbits[0].points == r1.orbits[0].points
    assert r.orbits[0].klass == r1.orbits[0].klass


def test_component_typing_attracting_and_saddle():
    f = fig1()
    orbits = [classify(o, f) for o in enumerate_periodic(f, 2, Dyadic(1, -16))]
    assert {o.klass for o in orbits} == {"saddle", "attracting"}
    sink = next(o for o in orbits if o.klass == "attracting")
    saddle = next(o for o in orbits if o.klass == "saddle")
    spec = GridSpec(f.filtration_radius(), 6)
    comp_boxes = []
    for o in (sink, saddle):
        p = o.points[0]
        idx = (spec.point_index_range(p[0])[0], spec.point_index_range(p[1])[0],
               spec.point_index_range(p[2])[0], spec.point_index_range(p[3])[0])
        comp_boxes.append(spec.encode(idx))
    codes = sorted(set(comp_boxes))
    model = ChainModel(spec, codes, list(range(len(codes))), len(codes))
    comp_class, comp_orbit = _type_components(model, orbits)
    assert set(comp_class) == {"attracting", "saddle"}


def test_session_precision_tightening():
    f = horseshoe()
    s = Session(f)
    s.model(6)
    coarse = s.periodic_points(3, Dyadic(1, -14))
    wide = max(float(o.precision) for o in coarse)
    fine = s.periodic_points(3, Dyadic(1, -30))
    tight = max(float(o.precision) for o in fine)
    assert tight <= 2.0 ** -30 < wide
    assert [o.period for o in coarse] == [o.period for o in fine]
    assert [o.klass for o in fine] == [o.klass for o in coarse]
