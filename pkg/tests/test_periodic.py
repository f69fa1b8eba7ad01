import cmath
import random
from collections import Counter

import pytest

from henoncert.dyadic import Dyadic
from henoncert.henon import HenonFactor, MonicPoly, PolyDiffeo, quadratic_henon
from henoncert.intervals import ComplexRect
from henoncert.boxmodel import GridSpec, build_model, full_grid, refine
from henoncert.periodic import (
    Undetermined,
    classify,
    default_model,
    enumerate_periodic,
    frames_along_orbit,
)

PREC = Dyadic(1, -16)


def fig1():
    return quadratic_henon(Dyadic.from_float(0.15), Dyadic(-19, -4))


def horseshoe():
    return quadratic_henon(Dyadic(1, -4), Dyadic(-6))


def fixed_point_roots(a: complex, c: complex):
    """Fixed points solve z^2 - (1+a) z + c = 0 (with w = z)."""
    disc = cmath.sqrt((1 + a) ** 2 - 4 * c)
    return [((1 + a) + disc) / 2, ((1 + a) - disc) / 2]


@pytest.fixture(scope="module")
def horseshoe_orbits():
    f = horseshoe()
    return f, enumerate_periodic(f, 5, PREC)


@pytest.fixture(scope="module")
def fig1_orbits():
    f = fig1()
    return f, enumerate_periodic(f, 4, PREC)


def test_fixed_points_match_formula():
    rng = random.Random(7)
    cases = [(0.15 + 0j, -1.1875 + 0j), (1 / 16 + 0j, -6 + 0j)]
    for _ in range(5):
        cases.append((complex(rng.uniform(-0.5, 0.5), rng.uniform(-0.3, 0.3)),
                      complex(rng.uniform(-2, 2), rng.uniform(-0.5, 0.5))))
    for a, c in cases:
        f = quadratic_henon(a, c)
        orbits = enumerate_periodic(f, 1, PREC)
        roots = fixed_point_roots(a, c)
        if abs(roots[0] - roots[1]) < 1e-6:
            continue  # skip near-degenerate draws
        assert len(orbits) == 2
        got = sorted((complex(float(p[0][0]), float(p[0][1]))
                      for p in (o.points for o in orbits)),
                     key=lambda z: (z.real, z.imag))
        want = sorted(roots, key=lambda z: (z.real, z.imag))
        for g, w in zip(got, want):
            assert abs(g - w) <= 2 * float(PREC)


def test_horseshoe_orbit_counts(horseshoe_orbits):
    f, orbits = horseshoe_orbits
    counts = Counter(o.period for o in orbits)
    # full 2-shift: the prime orbit counts of the shift on 2 symbols
    assert dict(counts) == {1: 2, 2: 1, 3: 2, 4: 3, 5: 6}


def test_nonprime_periods_deduplicated():
    f = horseshoe()
    orbits = enumerate_periodic(f, 2, PREC)
    counts = Counter(o.period for o in orbits)
    # fixed points reappear as period-2 candidates but must collapse to
    # their prime-period records
    assert dict(counts) == {1: 2, 2: 1}


def test_enclosures_certify_orbit(horseshoe_orbits):
    f, orbits = horseshoe_orbits
    for o in orbits:
        assert o.precision <= PREC
        m = o.period
        for i, box in enumerate(o.enclosures):
            img = f.eval(box)
            nxt = o.enclosures[(i + 1) % m]
            # the true orbit point maps into the next enclosure, so the
            # image enclosure must meet it
            assert img.intersect(nxt) is not None


def test_horseshoe_all_saddles(horseshoe_orbits):
    f, orbits = horseshoe_orbits
    am = ComplexRect.point(Dyadic(1, -4), Dyadic(0))
    for o in orbits:
        classify(o, f)
        assert o.klass == "saddle"
        assert float(o.eigen.lam_u.abs_enclosure().lo) > 1
        assert float(o.eigen.lam_s.abs_enclosure().hi) < 1
        # det D f^m = a^m for a single factor: the eigenvalue product
        # enclosure must contain it
        prod = o.eigen.lam_u * o.eigen.lam_s
        target = ComplexRect.from_int(1)
        for _ in range(o.period):
            target = target * am
        zr, zi = target.midpoint()
        assert prod.re.lo <= zr <= prod.re.hi
        assert prod.im.lo <= zi <= prod.im.hi


def test_fig1_sink_and_saddles(fig1_orbits):
    f, orbits = fig1_orbits
    klasses = {}
    for o in orbits:
        classify(o, f)
        klasses.setdefault(o.period, []).append(o.klass)
    assert klasses[2] == ["attracting"]
    assert all(k == "saddle" for k in klasses[1])
    assert all(k == "saddle" for k in klasses[3] + klasses[4])


def test_frames_unit_and_invariant(horseshoe_orbits):
    f, orbits = horseshoe_orbits
    o = next(o for o in orbits if o.period == 3)
    classify(o, f)
    frames = frames_along_orbit(f, o)
    assert len(frames) == o.period
    for vu, vs in frames:
        for v in (vu, vs):
            n2 = v[0].norm_sq() + v[1].norm_sq()
            assert float(n2.lo) <= 1 <= float(n2.hi)
    # Df maps the unstable line at point i onto the one at point i+1
    for i in range(o.period):
        J = f.jacobian(o.enclosures[i])
        vu, _ = frames[i]
        wu, _ = frames[(i + 1) % o.period]
        img = J.apply(vu)
        # collinearity: cross term img x wu must enclose 0
        cross = img[0] * wu[1] - img[1] * wu[0]
        assert cross.contains_zero()


def test_complex_parameters():
    f = quadratic_henon(0.2 + 0.1j, -1.2 + 0.3j)
    orbits = enumerate_periodic(f, 3, PREC)
    counts = Counter(o.period for o in orbits)
    # d^m point counts for dynamical degree 2
    assert dict(counts) == {1: 2, 2: 1, 3: 2}


def test_two_factor_composition():
    crect = ComplexRect.from_complex
    g = PolyDiffeo([
        HenonFactor(MonicPoly(2, [crect(-1.5 + 0j), crect(0j)]), crect(0.125 + 0j)),
        HenonFactor(MonicPoly(2, [crect(-1.1 + 0.2j), crect(0.1 + 0j)]), crect(0.25j)),
    ])
    spec = GridSpec(g.filtration_radius(), 3)
    model = build_model(g, spec, full_grid(spec))
    model = refine(model, g)
    model = refine(model, g)
    orbits = enumerate_periodic(g, 2, PREC, model=model)
    counts = Counter(o.period for o in orbits)
    # dynamical degree 4: d fixed points, (d^2 - d)/2 prime 2-cycles
    assert dict(counts) == {1: 4, 2: 6}


def test_default_model_side():
    f = horseshoe()
    m = default_model(f)
    assert float(m.spec.side) <= 0.125
    assert float(m.spec.side) > 0.125 / 2


def test_determinism_across_threads():
    f = fig1()
    results = []
    for threads in (1, 4):
        orbits = enumerate_periodic(f, 3, PREC, threads=threads)
        results.append([(o.period, o.points) for o in orbits])
    assert results[0] == results[1]


def test_invalid_period():
    with pytest.raises(ValueError):
        enumerate_periodic(horseshoe(), 0, PREC)
