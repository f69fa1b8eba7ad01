import struct
import types
import zlib

import pytest

from henoncert.dyadic import Dyadic, ZERO, ONE
from henoncert.henon import quadratic_henon
from henoncert.periodic import classify, enumerate_periodic
import henoncert.paramsweep as paramsweep
from henoncert.paramsweep import (
    CorruptLog,
    HypBall,
    ParamPoint,
    Stage,
    SweepState,
    _cell_doc,
    _recertify_orbit,
    _stage_cells,
    check_ball,
    default_stages,
    inflate_map,
    load_log,
    recover_log,
    sweep,
)

HALF = Dyadic(1, -1)
QUARTER = Dyadic(1, -2)


def horseshoe():
    return quadratic_henon(Dyadic(1, -4), Dyadic(-6))


def horseshoe_point():
    return ParamPoint(2, [(Dyadic(-6), ZERO)], (Dyadic(1, -4), ZERO))


# -- parameter points ----------------------------------------------------------

class TestParamPoint:
    def test_reals_roundtrip(self):
        p = ParamPoint(3, [(ONE, HALF), (Dyadic(-2), ZERO)], (QUARTER, ONE))
        assert ParamPoint.from_reals(3, p.reals()) == p
        assert len(p.reals()) == 6

    def test_to_map_coefficient_layout(self):
        p = ParamPoint(3, [(ONE, HALF), (Dyadic(-2), ZERO)], (QUARTER, ZERO))
        f = p.to_map()
        (fac,) = f.factors
        assert fac.p.degree == 3
        # z^0 and z^1 coefficients as given, z^{d-1} normalized to 0
        assert fac.p.coeffs[0].re.lo == ONE and fac.p.coeffs[0].im.lo == HALF
        assert fac.p.coeffs[1].re.lo == Dyadic(-2)
        assert fac.p.coeffs[2].re.lo.is_zero()
        assert fac.p.coeffs[2].im.hi.is_zero()
        assert fac.a.re.lo == QUARTER

    def test_quadratic_matches_quadratic_henon(self):
        f = horseshoe_point().to_map()
        g = horseshoe()
        assert f.factors[0].p.coeffs[0].re.lo == g.factors[0].p.coeffs[0].re.lo
        assert f.factors[0].a.re.lo == g.factors[0].a.re.lo

    def test_a_zero_rejected_by_to_map(self):
        p = ParamPoint(2, [(ONE, ZERO)], (ZERO, ZERO))
        assert p.a_is_zero()
        with pytest.raises(ValueError):
            p.to_map()

    def test_a_linf(self):
        p = ParamPoint(2, [(ZERO, ZERO)], (QUARTER, Dyadic(-1, -1)))
        assert p.a_linf() == HALF

    def test_key_hash_equality(self):
        p = ParamPoint(2, [(ONE, ZERO)], (HALF, ZERO))
        q = ParamPoint(2, [(Dyadic(2, -1), ZERO)], (Dyadic(1, -1), ZERO))
        r = ParamPoint(2, [(ONE, ZERO)], (QUARTER, ZERO))
        assert p == q  # dyadic normalization: 2*2^-1 == 1, 1*2^-1 == 1/2
        assert hash(p) == hash(q)
        assert ParamPoint.from_reals(2, p.reals()) == p
        assert p != r

    def test_bad_shapes(self):
        with pytest.raises(ValueError):
            ParamPoint(1, [], (ONE, ZERO))
        with pytest.raises(ValueError):
            ParamPoint(2, [(ONE, ZERO), (ONE, ZERO)], (ONE, ZERO))
        with pytest.raises(ValueError):
            ParamPoint.from_reals(2, (ONE, ZERO))


# -- balls ---------------------------------------------------------------------

class TestHypBall:
    def test_contains_closed_linf(self):
        c = ParamPoint(2, [(ZERO, ZERO)], (ONE, ZERO))
        b = HypBall(c, QUARTER, "ref")
        on_face = ParamPoint(2, [(QUARTER, ZERO)], (ONE, ZERO))
        outside = ParamPoint(2, [(QUARTER + QUARTER, ZERO)], (ONE, ZERO))
        assert b.contains(c)
        assert b.contains(on_face)
        assert not b.contains(outside)

    def test_degree_mismatch(self):
        c = ParamPoint(2, [(ZERO, ZERO)], (ONE, ZERO))
        b = HypBall(c, QUARTER, "ref")
        other = ParamPoint(3, [(ZERO, ZERO), (ZERO, ZERO)], (ONE, ZERO))
        assert not b.contains(other)

    def test_must_exclude_a_zero(self):
        c = ParamPoint(2, [(ZERO, ZERO)], (QUARTER, ZERO))
        with pytest.raises(ValueError):
            HypBall(c, QUARTER, "ref")  # radius reaches a = 0
        with pytest.raises(ValueError):
            HypBall(c, ZERO, "ref")
        HypBall(c, Dyadic(1, -3), "ref")


# -- stages and cell enumeration -----------------------------------------------

class TestStage:
    def test_defaults_follow_schedule(self):
        st = Stage(3)
        assert st.spacing == Dyadic(1, -3)
        assert st.radius == Dyadic(8)
        assert st.N_max == 3
        assert default_stages(2)[1].s == 2

    def test_invalid_index(self):
        with pytest.raises(ValueError):
            Stage(0)


class TestStageCells:
    def test_single_cell_when_radius_below_spacing(self):
        center = (Dyadic(-6), ZERO, Dyadic(1, -4), ZERO)
        st = Stage(4, center=center, radius=Dyadic(1, -5))
        cells = list(_stage_cells(st, 2))
        assert cells == [ParamPoint.from_reals(2, center)]

    def test_center_out_shells(self):
        st = Stage(1, radius=HALF)
        cells = list(_stage_cells(st, 2))
        assert cells[0] == ParamPoint.from_reals(2, (ZERO,) * 4)
        assert len(cells) == 3 ** 4  # shell 0 plus the full shell 1
        assert len(set(c.key() for c in cells)) == len(cells)
        for c in cells[1:]:
            assert max(abs(x) for x in c.reals()) == HALF

    def test_lexicographic_within_shell(self):
        st = Stage(1, radius=HALF)
        cells = list(_stage_cells(st, 2))
        first_shell = cells[1].reals()
        assert first_shell == (-HALF, -HALF, -HALF, -HALF)

    def test_center_snapped_to_grid(self):
        off_grid = (Dyadic(3, -3), ZERO, ONE, ZERO)  # 3/8 not on 1/2-grid
        st = Stage(1, center=off_grid, radius=Dyadic(1, -2))
        cells = list(_stage_cells(st, 2))
        # 3/8 snaps down to 0 on the 1/2-grid
        assert cells == [ParamPoint.from_reals(2, (ZERO, ZERO, ONE, ZERO))]


# -- coefficient inflation -----------------------------------------------------

class TestInflateMap:
    def test_zero_radius_is_identity(self):
        f = horseshoe()
        assert inflate_map(f, ZERO) is f

    def test_widens_every_coefficient(self):
        f = horseshoe()
        r = Dyadic(1, -6)
        g = inflate_map(f, r)
        c0, a0 = f.factors[0].p.coeffs[0], f.factors[0].a
        c1, a1 = g.factors[0].p.coeffs[0], g.factors[0].a
        assert c1.re.lo == c0.re.lo - r and c1.re.hi == c0.re.hi + r
        assert c1.im.lo == c0.im.lo - r and c1.im.hi == c0.im.hi + r
        assert a1.re.lo == a0.re.lo - r and a1.re.hi == a0.re.hi + r

    def test_a_touching_zero_rejected(self):
        f = horseshoe()  # a = 1/16
        with pytest.raises(ValueError):
            inflate_map(f, Dyadic(1, -4))
        inflate_map(f, Dyadic(1, -5))  # strictly inside still fine

    def test_negative_radius_rejected(self):
        with pytest.raises(ValueError):
            inflate_map(horseshoe(), Dyadic(-1, -8))

    def test_filtration_radius_survives_small_inflation(self):
        f = horseshoe()
        R = f.filtration_radius()
        g = inflate_map(f, Dyadic(1, -6))
        assert g.check_filtration_radius(R)


# -- parametric orbit re-certification -----------------------------------------

@pytest.fixture(scope="module")
def horseshoe_orbits():
    f = horseshoe()
    orbits = enumerate_periodic(f, 2, Dyadic(1, -20))
    return f, [classify(o, f) for o in orbits]


class TestRecertifyOrbit:
    def test_inflated_enclosure_contains_point_orbit(self, horseshoe_orbits):
        f, orbits = horseshoe_orbits
        r = Dyadic(1, -8)
        fr = inflate_map(f, r)
        for orbit in orbits:
            nu = _recertify_orbit(fr, orbit, r)
            assert nu is not None
            assert nu.period == orbit.period
            # the point-parameter orbit is one member of the family
            for old, new in zip(orbit.enclosures, nu.enclosures):
                assert new.z.intersect(old.z) is not None
                assert new.w.intersect(old.w) is not None

    def test_still_saddles_under_inflation(self, horseshoe_orbits):
        f, orbits = horseshoe_orbits
        r = Dyadic(1, -8)
        fr = inflate_map(f, r)
        for orbit in orbits:
            nu = classify(_recertify_orbit(fr, orbit, r), fr)
            assert nu.klass == "saddle"

    def test_zero_inflation_reproduces_orbit(self, horseshoe_orbits):
        f, orbits = horseshoe_orbits
        nu = _recertify_orbit(f, orbits[0], ZERO)
        assert nu is not None
        assert nu.precision <= orbits[0].precision.scale2(4)


# -- check_ball guard paths ----------------------------------------------------

class TestCheckBallGuards:
    def test_requires_certified_status(self):
        cert = types.SimpleNamespace(status="not-yet")
        with pytest.raises(ValueError):
            check_ball(horseshoe(), cert, ZERO)

    def test_inflation_swallowing_a_fails_fast(self):
        cert = types.SimpleNamespace(status="certified")
        ok, why = check_ball(horseshoe(), cert, QUARTER)
        assert not ok
        assert "a touches 0" in why


# -- persistent log ------------------------------------------------------------

def _write_log(path, docs):
    with open(path, "wb") as fh:
        fh.write(paramsweep._LOG_MAGIC)
        for doc in docs:
            paramsweep._append_record(fh, doc)


class TestLog:
    def test_missing_and_empty_are_fresh(self, tmp_path):
        missing = tmp_path / "none.log"
        assert load_log(str(missing)).visited == {}
        empty = tmp_path / "empty.log"
        empty.write_bytes(b"")
        st = load_log(str(empty))
        assert st.visited == {} and st.balls == []

    def test_roundtrip(self, tmp_path):
        p = horseshoe_point()
        ball = HypBall(p, Dyadic(1, -6), "cert-0")
        docs = [_cell_doc(p, 2, None), _cell_doc(p, 3, ball)]
        path = tmp_path / "sweep.log"
        _write_log(str(path), docs)
        st = load_log(str(path))
        assert st.visited == {p.key(): 3}
        assert len(st.balls) == 1
        assert st.balls[0].center == p
        assert st.balls[0].radius == Dyadic(1, -6)
        assert st.balls[0].cert_ref == "cert-0"
        assert st.covered(p)

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "sweep.log"
        path.write_bytes(b"XXXX\x01rest")
        with pytest.raises(CorruptLog) as exc:
            load_log(str(path))
        assert exc.value.valid_bytes == 0

    def test_truncated_record_detected(self, tmp_path):
        p = horseshoe_point()
        path = tmp_path / "sweep.log"
        _write_log(str(path), [_cell_doc(p, 1, None), _cell_doc(p, 2, None)])
        data = path.read_bytes()
        path.write_bytes(data[:-3])
        with pytest.raises(CorruptLog) as exc:
            load_log(str(path))
        assert 0 < exc.value.valid_bytes < len(data)

    def test_checksum_flip_detected(self, tmp_path):
        p = horseshoe_point()
        path = tmp_path / "sweep.log"
        _write_log(str(path), [_cell_doc(p, 1, None)])
        data = bytearray(path.read_bytes())
        data[-1] ^= 0x01
        path.write_bytes(bytes(data))
        with pytest.raises(CorruptLog):
            load_log(str(path))

    def test_recover_truncates_to_valid_prefix(self, tmp_path):
        p = horseshoe_point()
        path = tmp_path / "sweep.log"
        _write_log(str(path), [_cell_doc(p, 1, None), _cell_doc(p, 2, None)])
        path.write_bytes(path.read_bytes()[:-3])
        st = recover_log(str(path))
        # the truncated second record is dropped; the first survives
        assert st.visited == {p.key(): 1}
        load_log(str(path))  # log is clean again after recovery

    def test_record_format_is_length_crc_prefixed(self, tmp_path):
        p = horseshoe_point()
        path = tmp_path / "sweep.log"
        _write_log(str(path), [_cell_doc(p, 1, None)])
        data = path.read_bytes()
        off = len(paramsweep._LOG_MAGIC)
        length, crc = struct.unpack_from("<II", data, off)
        payload = data[off + 8: off + 8 + length]
        assert zlib.crc32(payload) == crc
        assert len(data) == off + 8 + length


# -- sweep plumbing (certification stubbed out) --------------------------------

def _stub_try_cell(emit_at, radius, calls):
    def stub(point, stage, state, out_dir, threads):
        calls.append(point.key())
        if point.key() == emit_at.key():
            return HypBall(point, radius, f"stub-{len(state.balls)}")
        return None
    return stub


class TestSweepPlumbing:
    def _stage(self):
        # 3^4 = 81 cells at spacing 1/2; 9 of them have a = 0
        return Stage(1, radius=HALF)

    def test_a_zero_cells_never_attempted(self, monkeypatch):
        calls = []
        emit = ParamPoint.from_reals(2, (ZERO, ZERO, HALF, ZERO))
        monkeypatch.setattr(paramsweep, "_try_cell",
                            _stub_try_cell(emit, QUARTER, calls))
        balls = list(sweep(2, [self._stage()]))
        assert len(balls) == 1 and balls[0].center == emit
        assert len(calls) == 81 - 9
        for key in calls:
            assert not ParamPoint.from_reals(2, key[1:]).a_is_zero()

    def test_covered_cells_skipped(self, monkeypatch):
        calls = []
        emit = ParamPoint.from_reals(2, (ZERO, ZERO, HALF, ZERO))
        monkeypatch.setattr(paramsweep, "_try_cell",
                            _stub_try_cell(emit, QUARTER, calls))
        st1 = self._stage()
        # stage 2 window sits inside the emitted ball
        st2 = Stage(2, center=emit.reals(), radius=QUARTER)
        list(sweep(2, [st1, st2]))
        # every stage-2 cell lies within 1/4 of the ball center: all covered,
        # so only the 72 stage-1 attempts happen
        assert len(calls) == 72

    def test_max_cells_budget(self, monkeypatch):
        calls = []
        emit = ParamPoint.from_reals(2, (HALF, HALF, HALF, HALF))
        monkeypatch.setattr(paramsweep, "_try_cell",
                            _stub_try_cell(emit, QUARTER, calls))
        st = self._stage()
        st.max_cells = 10
        list(sweep(2, [st]))
        assert len(calls) == 10

    def test_log_resume_skips_visited(self, monkeypatch, tmp_path):
        log = str(tmp_path / "sweep.log")
        calls1, calls2 = [], []
        emit = ParamPoint.from_reals(2, (ZERO, ZERO, HALF, ZERO))
        monkeypatch.setattr(paramsweep, "_try_cell",
                            _stub_try_cell(emit, QUARTER, calls1))
        balls1 = list(sweep(2, [self._stage()], log=log))
        monkeypatch.setattr(paramsweep, "_try_cell",
                            _stub_try_cell(emit, QUARTER, calls2))
        balls2 = list(sweep(2, [self._stage()], log=log))
        assert len(balls1) == 1 and balls2 == []
        assert calls1 and calls2 == []  # everything already visited

    def test_interrupted_resume_matches_uninterrupted(self, monkeypatch,
                                                      tmp_path):
        emit = ParamPoint.from_reals(2, (ZERO, ZERO, HALF, ZERO))
        stages = lambda: [self._stage(), Stage(2, center=emit.reals(),
                                               radius=HALF, max_cells=30)]

        full_calls = []
        monkeypatch.setattr(paramsweep, "_try_cell",
                            _stub_try_cell(emit, QUARTER, full_calls))
        full_balls = [(b.center.key(), b.radius) for b in sweep(2, stages())]

        log = str(tmp_path / "sweep.log")
        part_calls = []
        monkeypatch.setattr(paramsweep, "_try_cell",
                            _stub_try_cell(emit, QUARTER, part_calls))
        gen = sweep(2, stages(), log=log)
        got = [next(gen)]  # interrupt right after the first emission
        gen.close()

        resumed_calls = []
        monkeypatch.setattr(paramsweep, "_try_cell",
                            _stub_try_cell(emit, QUARTER, resumed_calls))
        resumed = [(b.center.key(), b.radius)
                   for b in sweep(2, stages(), log=log)]
        combined = [(got[0].center.key(), got[0].radius)] + resumed
        assert combined == full_balls
        assert part_calls + resumed_calls == full_calls

    def test_retry_at_larger_budget(self, monkeypatch, tmp_path):
        log = str(tmp_path / "sweep.log")
        center = (Dyadic(-6), ZERO, ONE, ZERO)
        cell = ParamPoint.from_reals(2, center)
        calls = []
        monkeypatch.setattr(
            paramsweep, "_try_cell",
            _stub_try_cell(ParamPoint.from_reals(2, (ONE,) * 4), QUARTER,
                           calls))
        tiny = lambda s: Stage(s, center=center, radius=Dyadic(1, -8))
        list(sweep(2, [tiny(1)], log=log))
        assert calls == [cell.key()]
        list(sweep(2, [tiny(1)], log=log))
        assert calls == [cell.key()]  # same budget: skipped
        list(sweep(2, [tiny(2)], log=log))
        assert calls == [cell.key()] * 2  # larger N budget: retried
