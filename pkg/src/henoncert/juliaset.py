"""2^N-approximations of the chain recurrent set and of the Julia set.

The driver couples two certified computations: the box chain recurrent
model (boxmodel) is refined level by level, and periodic orbits of growing
period are enumerated and classified (periodic).  Once every retained
level-k box contains a certified periodic point, the doubled level-k boxes
form a 2^{-N}-approximation Xi_N of the chain recurrent set; the union of
the saddle-type components approximates the Julia set.

Two facts make the loop affordable:

  * Levels are cached and *back-propagated*: a box whose children have all
    been pruned at the next level contains no chain recurrent point and is
    removed, and the level is re-pruned to its cycles.  This removes the
    bulk of the spurious coarse boxes, which is exactly what the halting
    test is waiting for.
  * Orbits are cached across the n-loop (and across calls sharing a
    Session): raising the period bound only adds new periods, and
    tightening the precision re-certifies the cached enclosures instead of
    re-enumerating.
"""

from __future__ import annotations

import json

from .dyadic import Dyadic
from .intervals import BoxC2
from .henon import PolyDiffeo
from .boxmodel import (
    ChainModel,
    GridSpec,
    build_model,
    child_codes,
    full_grid,
    prune_and_decompose,
    refine,
)
from .periodic import (
    PeriodicOrbit,
    classify,
    enumerate_periodic,
    orbit_from_doc,
    orbit_to_doc,
    tighten_orbit,
)


class BudgetExhausted(RuntimeError):
    """The n-loop hit its caller-imposed cap before the halting test passed."""


def compute_n_prime(N: int, R: Dyadic) -> int:
    """Smallest n' with 2^{n'} > max{2^{N+2} R, 2/R}, by exact comparison.

    2^{n'} > 2/R is tested as R 2^{n'} > 2 to stay in dyadic arithmetic.
    """
    if R.sign() <= 0:
        raise ValueError("R must be positive")
    two = Dyadic(2)
    n = 1
    while not (Dyadic(1, n) > R.scale2(N + 2) and R.scale2(n) > two):
        n += 1
    return n


def _point_positions(model: ChainModel, point):
    """Positions of every retained closed box containing the exact point."""
    spec = model.spec
    r0 = spec.point_index_range(point[0])
    r1 = spec.point_index_range(point[1])
    r2 = spec.point_index_range(point[2])
    r3 = spec.point_index_range(point[3])
    for i0 in r0:
        for i1 in r1:
            for i2 in r2:
                for i3 in r3:
                    pos = model.position(spec.encode((i0, i1, i2, i3)))
                    if pos >= 0:
                        yield pos


def halting_test(model: ChainModel, points) -> bool:
    """True iff every retained box contains one of the approximate periodic
    points (closed containment, exact dyadic comparisons)."""
    covered = set()
    total = len(model.codes)
    for p in points:
        covered.update(_point_positions(model, p))
        if len(covered) == total:
            return True
    return len(covered) == total


# -- level cache with back-propagation -----------------------------------------

_BASE_LEVEL = 3
_ENUM_LEVEL = 9  # enumeration walks this level's model once it exists


def _parent_code(code: int, child_count: int, count: int) -> int:
    code, i3 = divmod(code, child_count)
    code, i2 = divmod(code, child_count)
    i0, i1 = divmod(code, child_count)
    return (((i0 // 2) * count + i1 // 2) * count + i2 // 2) * count + i3 // 2


def _restrict(model: ChainModel, keep: set) -> ChainModel:
    """Model induced on a subset of its boxes, re-pruned to its cycles."""
    codes = model.codes
    keep_pos = [i for i, c in enumerate(codes) if c in keep]
    pos_map = {p: i for i, p in enumerate(keep_pos)}
    new_codes = [codes[p] for p in keep_pos]
    new_adj = [[pos_map[w] for w in model.edges[p] if w in pos_map]
               for p in keep_pos]
    return prune_and_decompose(model.spec, new_codes, new_adj)


class Session:
    """Cached model levels and periodic orbits shared across runs.

    All cached levels are kept mutually consistent: a box survives at level
    L only if a retained child covers it at level L+1 (no child means no
    chain recurrent point inside) and its own parent survives at L-1, and
    each level is re-pruned to its cycles after every removal.  True
    periodic points are never removed: their boxes form cycles at every
    level and always keep the child that contains the point.
    """

    def __init__(self, f: PolyDiffeo, R: Dyadic | None = None, threads: int = 1):
        self.f = f
        self.R = R if R is not None else f.filtration_radius()
        self.threads = threads
        self.models: dict[int, ChainModel] = {}
        self.orbits: list[PeriodicOrbit] | None = None
        self.orbit_ell = 0
        self.orbit_precision: Dyadic | None = None

    # -- models ----------------------------------------------------------------

    def model(self, level: int) -> ChainModel:
        if level < 1:
            raise ValueError("grid level must be >= 1")
        base = min(_BASE_LEVEL, level)
        if not self.models:
            spec = GridSpec(self.R, base)
            self.models[base] = build_model(self.f, spec, full_grid(spec),
                                            self.threads)
        while max(self.models) < level:
            top = max(self.models)
            self.models[top + 1] = refine(self.models[top], self.f, self.threads)
            self._back_propagate()
        return self.models[level]

    def _back_propagate(self) -> None:
        levels = sorted(self.models)
        while True:
            changed = False
            for lvl in reversed(levels[:-1]):  # parents need a retained child
                child = self.models[lvl + 1]
                cur = self.models[lvl]
                parents = {_parent_code(c, child.spec.count, cur.spec.count)
                           for c in child.codes}
                keep = set(cur.codes) & parents
                if len(keep) < len(cur.codes):
                    self.models[lvl] = _restrict(cur, keep)
                    changed = True
            for lvl in levels[1:]:  # children need a surviving parent
                cur = self.models[lvl]
                parent = self.models[lvl - 1]
                pset = set(parent.codes)
                keep = {c for c in cur.codes
                        if _parent_code(c, cur.spec.count, parent.spec.count) in pset}
                if len(keep) < len(cur.codes):
                    self.models[lvl] = _restrict(cur, keep)
                    changed = True
            if not changed:
                return

    # -- orbits ----------------------------------------------------------------

    def periodic_points(self, ell: int, precision: Dyadic):
        """Classified orbits of period <= ell at the given precision."""
        if self.orbits is None or ell > self.orbit_ell:
            model = self.models[min(max(self.models), _ENUM_LEVEL)]
            orbits = enumerate_periodic(self.f, ell, precision, model=model,
                                        threads=self.threads)
            orbits = [classify(o, self.f) for o in orbits]
            self.orbits = orbits
            self.orbit_ell = ell
            self.orbit_precision = precision
        elif precision < self.orbit_precision:
            self.orbits = [tighten_orbit(self.f, o, precision)
                           for o in self.orbits]
            self.orbit_precision = precision
        return [o for o in self.orbits if o.period <= ell]


# -- the n-loop ----------------------------------------------------------------

# The default period schedule is adaptive: the enumerated period grows by
# one whenever the newly built level's box count exceeds 6 * 3^ell.  Both
# loop resources escalate together, each at its own exponential rate
# (enumeration cost ~3x per period, refinement cost ~ box count), and the
# trigger depends only on the deterministic box count, never on timing.
_ELL_COUNT_FACTOR = 6


class ApproximationResult:
    """A halted run: doubled level-k boxes covering the chain recurrent set.

    The boxes are stored undoubled (an index list plus the convention that
    geometry is doubled); xi_prime_codes/attracting_codes partition them by
    the class of the certified orbit that types each component.
    """

    def __init__(self, N, n, k, ell, model: ChainModel, comp_class, comp_orbit,
                 orbits):
        self.N = N
        self.n = n
        self.k = k
        self.ell = ell
        self.model = model
        self.comp_class = comp_class  # per component: "saddle" or not
        self.comp_orbit = comp_orbit  # per component: index into orbits
        self.orbits = orbits          # the 𝒫_n used, classified

    @property
    def spec(self) -> GridSpec:
        return self.model.spec

    def xi_codes(self):
        return list(self.model.codes)

    def _codes_where(self, want_saddle: bool):
        return [c for c, cid in zip(self.model.codes, self.model.comp_ids)
                if (self.comp_class[cid] == "saddle") == want_saddle]

    def xi_prime_codes(self):
        """Boxes of the saddle components (approximates the Julia set)."""
        return self._codes_where(True)

    def attracting_codes(self):
        """Boxes of the non-saddle components (the attracting cycles)."""
        return self._codes_where(False)

    def doubled_box(self, code: int) -> BoxC2:
        return self.spec.double_geometry(self.spec.decode(code))

    def xi_prime_boxes(self):
        return [self.doubled_box(c) for c in self.xi_prime_codes()]


def _type_components(model: ChainModel, orbits):
    """Class and orbit index per component, via the lexicographically
    smallest box of the component and the lowest-period orbit with a point
    in its doubled box."""
    spec = model.spec
    first_code = {}
    for code, cid in zip(model.codes, model.comp_ids):
        if cid not in first_code:  # codes are sorted: first hit is smallest
            first_code[cid] = code
    comp_class = []
    comp_orbit = []
    for cid in range(model.ncomp):
        double = spec.double_geometry(spec.decode(first_code[cid]))
        chosen = None
        for i, o in enumerate(orbits):  # sorted by (period, first point)
            if any(_point_in_box(p, double) for p in o.points):
                chosen = i
                break
        if chosen is None:
            # cannot happen after a passed halting test (the undoubled box
            # already contains a point); guard for direct callers
            raise ValueError("component without a certified periodic point")
        comp_class.append(orbits[chosen].klass)
        comp_orbit.append(chosen)
    return comp_class, comp_orbit


def _point_in_box(p, box: BoxC2) -> bool:
    return (box.z.re.contains(p[0]) and box.z.im.contains(p[1])
            and box.w.re.contains(p[2]) and box.w.im.contains(p[3]))


def run_julia(f: PolyDiffeo, N: int, max_n: int | None = None,
              session: Session | None = None, threads: int = 1,
              ell_schedule=None) -> ApproximationResult:
    """The 2^N-approximation loop; a semi-algorithm.

    Escalates n (model depth, orbit precision 2^{-2n}) and the enumerated
    period ell_n until every retained box at some level k in [n', n]
    contains a certified periodic point; the doubled level-k boxes are then
    returned with their components typed by certified orbits.  Raises
    BudgetExhausted when max_n is exceeded.

    ell_schedule, when given, is a callable (n_prime, n) -> period bound
    replacing the adaptive box-count default.
    """
    if session is None:
        session = Session(f, threads=threads)
    n_prime = compute_n_prime(N, session.R)
    n = n_prime
    ell = n_prime
    while True:
        if max_n is not None and n > max_n:
            raise BudgetExhausted(
                f"no halting up to n={max_n} (N={N}, n'={n_prime})")
        model_n = session.model(n)
        if ell_schedule is not None:
            ell = ell_schedule(n_prime, n)
        elif len(model_n.codes) > _ELL_COUNT_FACTOR * 3 ** ell:
            ell += 1
        orbits = session.periodic_points(ell, Dyadic(1, -2 * n))
        points = [p for o in orbits for p in o.points]
        for k in range(n_prime, n + 1):
            model = session.models[k]
            if halting_test(model, points):
                comp_class, comp_orbit = _type_components(model, orbits)
                return ApproximationResult(N, n, k, ell, model, comp_class,
                                           comp_orbit, orbits)
        n += 1


# -- disconnectivity -----------------------------------------------------------

def detect_disconnected(spec: GridSpec, codes):
    """Flood-fill of the overlap graph of the closed doubled boxes.

    Two doubled boxes overlap iff their undoubled indices differ by at most
    2 in every coordinate (the double of cell i spans [i-1/2, i+3/2] cell
    widths).  Returns ("disconnected", components) with the partition into
    >= 2 components (each a sorted code list, ordered by smallest member),
    or ("inconclusive", [all codes]) when the union is connected.
    """
    codes = sorted(codes)
    remaining = set(codes)
    components = []
    for seed in codes:
        if seed not in remaining:
            continue
        comp = []
        stack = [seed]
        remaining.discard(seed)
        while stack:
            code = stack.pop()
            comp.append(code)
            idx = spec.decode(code)
            ranges = [range(max(0, i - 2), min(spec.count, i + 3)) for i in idx]
            for j0 in ranges[0]:
                for j1 in ranges[1]:
                    for j2 in ranges[2]:
                        for j3 in ranges[3]:
                            nb = spec.encode((j0, j1, j2, j3))
                            if nb in remaining:
                                remaining.discard(nb)
                                stack.append(nb)
        components.append(sorted(comp))
    if len(components) >= 2:
        return "disconnected", components
    return "inconclusive", components


# -- result files --------------------------------------------------------------

RESULT_FORMAT = "henoncert-julia-approx"
RESULT_VERSION = 1


def dump_approximation(result: ApproximationResult, map_hash: str,
                       path: str) -> None:
    doc = {
        "format": RESULT_FORMAT,
        "version": RESULT_VERSION,
        "map_hash": map_hash,
        "N": result.N,
        "n": result.n,
        "k": result.k,
        "ell": result.ell,
        "R": list(result.spec.R.as_pair()),
        "level": result.spec.level,
        "boxes": [list(result.spec.decode(c)) for c in result.model.codes],
        "component": list(result.model.comp_ids),
        "component_class": list(result.comp_class),
        "component_orbit": list(result.comp_orbit),
        "orbits": [orbit_to_doc(o) for o in result.orbits],
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, separators=(",", ":"))
        fh.write("\n")


def load_approximation(path: str):
    """Returns (ApproximationResult, map_hash); the model carries no edges."""
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("format") != RESULT_FORMAT or doc.get("version") != RESULT_VERSION:
        raise ValueError(f"{path}: not a version-{RESULT_VERSION} result file")
    spec = GridSpec(Dyadic.from_pair(doc["R"]), doc["level"])
    codes = [spec.encode(tuple(b)) for b in doc["boxes"]]
    comp_ids = list(doc["component"])
    ncomp = max(comp_ids) + 1 if comp_ids else 0
    model = ChainModel(spec, codes, comp_ids, ncomp)
    orbits = [orbit_from_doc(od) for od in doc["orbits"]]
    result = ApproximationResult(doc["N"], doc["n"], doc["k"], doc["ell"],
                                 model, list(doc["component_class"]),
                                 list(doc["component_orbit"]), orbits)
    return result, doc["map_hash"]
