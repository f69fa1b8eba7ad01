"""Box chain recurrent models on leveled grids over V_R = [-R, R]^4.

A ChainModel is the combinatorial outer approximation of the chain recurrent
set: a (2^n)^4 grid, an edge (k -> j) whenever the rigorous image enclosure
f(B_k) meets B_j (closed overlap, superset of the true edge set), pruned to
the boxes lying on directed cycles (nontrivial strongly connected components
plus self-loops).  Refinement bisects each of the 4 real sides.

Boxes are encoded as single integers ((i0*c + i1)*c + i2)*c + i3 with
c = 2^level; deep levels reach millions of boxes and the encoding keeps the
graphs and component arrays compact.
"""

from __future__ import annotations

import hashlib
import json
from bisect import bisect_left
from concurrent.futures import ThreadPoolExecutor

from .dyadic import Dyadic, ceil_div, floor_div
from .intervals import BoxC2, ComplexRect, RealInterval
from .henon import HenonFactor, PolyDiffeo

Index = tuple[int, int, int, int]


def parallel_map(fn, items, threads: int):
    """Order-preserving chunked map; results identical for any thread count."""
    items = list(items)
    if threads <= 1 or len(items) < 2:
        return [fn(x) for x in items]
    chunk = (len(items) + threads - 1) // threads
    chunks = [items[i:i + chunk] for i in range(0, len(items), chunk)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        parts = list(pool.map(lambda c: [fn(x) for x in c], chunks))
    out = []
    for part in parts:
        out.extend(part)
    return out


class GridSpec:
    """Level-n grid of (2^n)^4 closed boxes exactly tiling [-R, R]^4."""

    __slots__ = ("R", "level", "side", "count")

    def __init__(self, R: Dyadic, level: int):
        if level < 1:
            raise ValueError("grid level must be >= 1")
        if R.sign() <= 0:
            raise ValueError("R must be positive")
        self.R = R
        self.level = level
        self.side = R.scale2(1 - level)  # 2R / 2^n, exactly dyadic
        self.count = 1 << level

    # -- index encoding -------------------------------------------------------

    def encode(self, idx: Index) -> int:
        c = self.count
        return ((idx[0] * c + idx[1]) * c + idx[2]) * c + idx[3]

    def decode(self, code: int) -> Index:
        c = self.count
        code, i3 = divmod(code, c)
        code, i2 = divmod(code, c)
        i0, i1 = divmod(code, c)
        return (i0, i1, i2, i3)

    # -- geometry ---------------------------------------------------------------

    def coord_interval(self, j: int) -> RealInterval:
        lo = -self.R + self.side * Dyadic(j)
        return RealInterval(lo, lo + self.side)

    def box_geometry(self, idx: Index) -> BoxC2:
        c = [self.coord_interval(j) for j in idx]
        return BoxC2(ComplexRect(c[0], c[1]), ComplexRect(c[2], c[3]))

    def double_geometry(self, idx: Index) -> BoxC2:
        """The doubled box 2B: same center, twice the side length."""
        h = self.side.scale2(-1)
        ivs = []
        for j in idx:
            base = self.coord_interval(j)
            ivs.append(RealInterval(base.lo - h, base.hi + h))
        return BoxC2(ComplexRect(ivs[0], ivs[1]), ComplexRect(ivs[2], ivs[3]))

    def index_range(self, iv: RealInterval) -> range:
        """Indices of grid cells whose closed coordinate interval meets [lo, hi]."""
        j_min = ceil_div(iv.lo + self.R, self.side) - 1
        j_max = floor_div(iv.hi + self.R, self.side)
        if j_min < 0:
            j_min = 0
        if j_max >= self.count:
            j_max = self.count - 1
        if j_min > j_max:
            return range(0)
        return range(j_min, j_max + 1)

    def point_index_range(self, d: Dyadic) -> range:
        """Indices of closed cells containing the exact dyadic coordinate d."""
        return self.index_range(RealInterval.point(d))

    def box_targets(self, img: BoxC2):
        """All grid indices whose closed box meets the image enclosure."""
        r0 = self.index_range(img.z.re)
        r1 = self.index_range(img.z.im)
        r2 = self.index_range(img.w.re)
        r3 = self.index_range(img.w.im)
        for i0 in r0:
            for i1 in r1:
                for i2 in r2:
                    for i3 in r3:
                        yield (i0, i1, i2, i3)


def _build_adj_single_factor(f: PolyDiffeo, spec: GridSpec, codes, threads: int):
    """Positional adjacency lists for a single Henon factor.

    The z'-part p(z) - a*w splits over the index pairs (i0, i1) and (i2, i3),
    so those enclosures are cached per pair; the w'-part equals the source
    z-rectangle exactly, so its targets are the face neighbors i0+-1 x i1+-1.
    """
    fac = f.factors[0]
    c = spec.count
    cc = c * c
    R = spec.R
    side = spec.side
    pos = {code: i for i, code in enumerate(codes)}

    # group retained boxes: zc -> set of wc present
    present: dict[int, set[int]] = {}
    for code in codes:
        zc, wc = divmod(code, cc)
        s = present.get(zc)
        if s is None:
            present[zc] = {wc}
        else:
            s.add(wc)

    # per distinct z-pair: endpoints of p(z) with +R folded in, and the
    # face-neighbor w'-candidate codes
    p_data: dict[int, tuple] = {}
    for zc in present:
        i0, i1 = divmod(zc, c)
        z = ComplexRect(spec.coord_interval(i0), spec.coord_interval(i1))
        pz = fac.p.eval_rect(z)
        wcands = tuple(t2 * c + t3
                       for t2 in range(max(i0 - 1, 0), min(i0 + 2, c))
                       for t3 in range(max(i1 - 1, 0), min(i1 + 2, c)))
        p_data[zc] = (pz.re.lo + R, pz.re.hi + R, pz.im.lo + R, pz.im.hi + R, wcands)

    # per distinct w-pair: endpoints of a*w
    aw_data: dict[int, tuple] = {}
    for code in codes:
        wc = code % cc
        if wc not in aw_data:
            i2, i3 = divmod(wc, c)
            w = ComplexRect(spec.coord_interval(i2), spec.coord_interval(i3))
            aw = fac.a * w
            aw_data[wc] = (aw.re.lo, aw.re.hi, aw.im.lo, aw.im.hi)

    count_m1 = c - 1

    def targets_of(code: int):
        zc, wc = divmod(code, cc)
        relo, rehi, imlo, imhi, wcands = p_data[zc]
        arelo, arehi, aimlo, aimhi = aw_data[wc]
        t0_lo = ceil_div(relo - arehi, side) - 1
        t0_hi = floor_div(rehi - arelo, side)
        t1_lo = ceil_div(imlo - aimhi, side) - 1
        t1_hi = floor_div(imhi - aimlo, side)
        if t0_lo < 0:
            t0_lo = 0
        if t0_hi > count_m1:
            t0_hi = count_m1
        if t1_lo < 0:
            t1_lo = 0
        if t1_hi > count_m1:
            t1_hi = count_m1
        out = []
        get = present.get
        for t0 in range(t0_lo, t0_hi + 1):
            base0 = t0 * c
            for t1 in range(t1_lo, t1_hi + 1):
                s = get(base0 + t1)
                if s:
                    zbase = (base0 + t1) * cc
                    for w2 in wcands:
                        if w2 in s:
                            out.append(pos[zbase + w2])
        return out

    return parallel_map(targets_of, codes, threads)


def _build_adj_oneshot(f, spec: GridSpec, codes, threads: int):
    """Adjacency via a single whole-composition image per box (any object
    with the PolyDiffeo eval interface)."""
    pos = {code: i for i, code in enumerate(codes)}

    def targets_of(code: int):
        img = f.eval(spec.box_geometry(spec.decode(code)))
        out = []
        for t in spec.box_targets(img):
            p = pos.get(spec.encode(t))
            if p is not None:
                out.append(p)
        return out

    return parallel_map(targets_of, codes, threads)


def _build_adj_chained(f: PolyDiffeo, spec: GridSpec, codes, threads: int):
    """Adjacency for multi-factor compositions, one factor at a time.

    The one-shot image of a grid box under a composition compounds every
    factor's expansion (wrapping effect) and meets a number of boxes growing
    with the product of the factor expansions.  Covering each intermediate
    image by lattice cells of the grid side and applying the next factor
    cell-by-cell keeps the relation close to the true transition relation.
    Intermediate covers live on the unbounded integer lattice anchored at -R
    (intermediate images may leave V_R); only the final targets are clipped
    to the grid.  Every per-cell computation is memoized per factor.
    """
    pos = {code: i for i, code in enumerate(codes)}
    R = spec.R
    side = spec.side
    count = spec.count
    nfac = len(f.factors)

    iv_memo: dict[int, RealInterval] = {}

    def lattice_iv(j: int) -> RealInterval:
        iv = iv_memo.get(j)
        if iv is None:
            lo = -R + side * Dyadic(j)
            iv = RealInterval(lo, lo + side)
            iv_memo[j] = iv
        return iv

    pz_memo: list[dict] = [dict() for _ in range(nfac)]
    aw_memo: list[dict] = [dict() for _ in range(nfac)]
    trans_memo: list[dict] = [dict() for _ in range(nfac)]

    def step_targets(k: int, cell, last: bool):
        """Lattice cells meeting factor k's image of `cell`; the w' = z pair
        is copied exactly, so its cover is the z-pair face neighborhood."""
        fac = f.factors[k]
        zc = (cell[0], cell[1])
        wc = (cell[2], cell[3])
        pz = pz_memo[k].get(zc)
        if pz is None:
            pz = fac.p.eval_rect(ComplexRect(lattice_iv(cell[0]), lattice_iv(cell[1])))
            pz_memo[k][zc] = pz
        aw = aw_memo[k].get(wc)
        if aw is None:
            aw = fac.a * ComplexRect(lattice_iv(cell[2]), lattice_iv(cell[3]))
            aw_memo[k][wc] = aw
        t0_lo = ceil_div(pz.re.lo - aw.re.hi + R, side) - 1
        t0_hi = floor_div(pz.re.hi - aw.re.lo + R, side)
        t1_lo = ceil_div(pz.im.lo - aw.im.hi + R, side) - 1
        t1_hi = floor_div(pz.im.hi - aw.im.lo + R, side)
        w0_lo, w0_hi = cell[0] - 1, cell[0] + 1
        w1_lo, w1_hi = cell[1] - 1, cell[1] + 1
        if last:
            t0_lo = max(t0_lo, 0)
            t1_lo = max(t1_lo, 0)
            w0_lo = max(w0_lo, 0)
            w1_lo = max(w1_lo, 0)
            t0_hi = min(t0_hi, count - 1)
            t1_hi = min(t1_hi, count - 1)
            w0_hi = min(w0_hi, count - 1)
            w1_hi = min(w1_hi, count - 1)
        for t0 in range(t0_lo, t0_hi + 1):
            for t1 in range(t1_lo, t1_hi + 1):
                for t2 in range(w0_lo, w0_hi + 1):
                    for t3 in range(w1_lo, w1_hi + 1):
                        yield (t0, t1, t2, t3)

    def targets_of(code: int):
        frontier = {spec.decode(code)}
        for k in range(nfac - 1):
            memo = trans_memo[k]
            nxt = set()
            for cell in frontier:
                t = memo.get(cell)
                if t is None:
                    t = tuple(step_targets(k, cell, False))
                    memo[cell] = t
                nxt.update(t)
            frontier = nxt
        memo = trans_memo[nfac - 1]
        out: set[int] = set()
        for cell in frontier:
            t = memo.get(cell)
            if t is None:
                t = tuple(p for p in (pos.get(spec.encode(tc))
                                      for tc in step_targets(nfac - 1, cell, True))
                          if p is not None)
                memo[cell] = t
            out.update(t)
        return sorted(out)

    return parallel_map(targets_of, codes, threads)


def build_adjacency(f, spec: GridSpec, codes, threads: int = 1):
    """Positional adjacency (list of lists) over the sorted code list.

    Superset of the true transition relation {(k, j): f(B_k) meets B_j}
    restricted to the given boxes; closed overlap, faces count.
    """
    codes = sorted(codes)
    if len(f.factors) == 1:
        return codes, _build_adj_single_factor(f, spec, codes, threads)
    if all(isinstance(fac, HenonFactor) for fac in f.factors):
        return codes, _build_adj_chained(f, spec, codes, threads)
    return codes, _build_adj_oneshot(f, spec, codes, threads)


def tarjan_scc_positional(adj):
    """Iterative Tarjan on positional adjacency; returns comp id per node.

    Component ids are renumbered so that the component containing the
    smallest node position gets id 0, the next smallest unseen position id 1,
    and so on (deterministic, input-order based).
    """
    n = len(adj)
    UNSEEN = -1
    index = [UNSEEN] * n
    low = [0] * n
    on_stack = bytearray(n)
    stack: list[int] = []
    comp = [UNSEEN] * n
    ncomp = 0
    counter = 0
    for root in range(n):
        if index[root] != UNSEEN:
            continue
        work = [(root, 0)]
        index[root] = low[root] = counter
        counter += 1
        stack.append(root)
        on_stack[root] = 1
        while work:
            v, ei = work.pop()
            neighbors = adj[v]
            advanced = False
            while ei < len(neighbors):
                w = neighbors[ei]
                ei += 1
                if index[w] == UNSEEN:
                    work.append((v, ei))
                    index[w] = low[w] = counter
                    counter += 1
                    stack.append(w)
                    on_stack[w] = 1
                    work.append((w, 0))
                    advanced = True
                    break
                if on_stack[w] and low[v] > index[w]:
                    low[v] = index[w]
            if advanced:
                continue
            if low[v] == index[v]:
                while True:
                    w = stack.pop()
                    on_stack[w] = 0
                    comp[w] = ncomp
                    if w == v:
                        break
                ncomp += 1
            if work:
                u = work[-1][0]
                if low[u] > low[v]:
                    low[u] = low[v]
        # renumbering happens globally below
    # renumber components by smallest member position
    remap = [UNSEEN] * ncomp
    next_id = 0
    for v in range(n):
        if remap[comp[v]] == UNSEEN:
            remap[comp[v]] = next_id
            next_id += 1
        comp[v] = remap[comp[v]]
    return comp, ncomp


class ChainModel:
    """Immutable pruned box chain recurrent model at one grid level.

    codes: sorted int-encoded retained boxes; comp_ids aligned component ids
    (0-based, ordered by smallest member code); edges: positional adjacency
    among retained boxes, or None if dropped to save memory.
    """

    __slots__ = ("spec", "codes", "comp_ids", "ncomp", "edges")

    def __init__(self, spec: GridSpec, codes, comp_ids, ncomp, edges=None):
        self.spec = spec
        self.codes = codes
        self.comp_ids = comp_ids
        self.ncomp = ncomp
        self.edges = edges

    def position(self, code: int) -> int:
        i = bisect_left(self.codes, code)
        if i == len(self.codes) or self.codes[i] != code:
            return -1
        return i

    def component_of(self, code: int) -> int:
        i = self.position(code)
        return -1 if i < 0 else self.comp_ids[i]

    def component_codes(self, cid: int):
        return [c for c, k in zip(self.codes, self.comp_ids) if k == cid]

    def boxes(self):
        """Retained boxes as index 4-tuples (sorted)."""
        return [self.spec.decode(c) for c in self.codes]


def prune_and_decompose(spec: GridSpec, codes, adj, keep_edges: bool = True) -> ChainModel:
    """Keep exactly the boxes on directed cycles; decompose into SCCs."""
    comp, _ = tarjan_scc_positional(adj)
    n = len(codes)
    size = [0] * (max(comp) + 1 if n else 0)
    for cid in comp:
        size[cid] += 1
    keep = bytearray(n)
    for v in range(n):
        if size[comp[v]] > 1 or v in adj[v]:
            keep[v] = 1
    new_pos = [-1] * n
    kept_codes = []
    for v in range(n):
        if keep[v]:
            new_pos[v] = len(kept_codes)
            kept_codes.append(codes[v])
    kept_adj = None
    if keep_edges:
        kept_adj = [[new_pos[w] for w in adj[v] if keep[w]] for v in range(n) if keep[v]]
    # components restricted to kept boxes keep their SCC identity; renumber
    remap: dict[int, int] = {}
    comp_ids = []
    for v in range(n):
        if keep[v]:
            cid = comp[v]
            if cid not in remap:
                remap[cid] = len(remap)
            comp_ids.append(remap[cid])
    return ChainModel(spec, kept_codes, comp_ids, len(remap), kept_adj)


def build_model(f: PolyDiffeo, spec: GridSpec, boxes, threads: int = 1,
                keep_edges: bool = True) -> ChainModel:
    codes = [spec.encode(b) if isinstance(b, tuple) else b for b in boxes]
    codes, adj = build_adjacency(f, spec, codes, threads)
    return prune_and_decompose(spec, codes, adj, keep_edges)


def full_grid(spec: GridSpec):
    return list(range(spec.count ** 4))


def child_codes(model: ChainModel):
    """Codes of the 16 children (level + 1) of every retained box."""
    c = model.spec.count
    c2 = 2 * c
    out = []
    for code in model.codes:
        code, i3 = divmod(code, c)
        code, i2 = divmod(code, c)
        i0, i1 = divmod(code, c)
        base = ((2 * i0 * c2 + 2 * i1) * c2 + 2 * i2) * c2 + 2 * i3
        for b0 in (0, c2 * c2 * c2):
            for b1 in (0, c2 * c2):
                for b2 in (0, c2):
                    for b3 in (0, 1):
                        out.append(base + b0 + b1 + b2 + b3)
    return out


def refine(model: ChainModel, f: PolyDiffeo, threads: int = 1,
           keep_edges: bool = True) -> ChainModel:
    """Bisect every retained box into 16 children; rebuild and prune."""
    child_spec = GridSpec(model.spec.R, model.spec.level + 1)
    return build_model(f, child_spec, child_codes(model), threads, keep_edges)


# -- box-set files --------------------------------------------------------------

BOXSET_FORMAT = "henoncert-boxset"
BOXSET_VERSION = 1


def dump_boxset(model: ChainModel, map_hash: str, path: str) -> None:
    doc = {
        "format": BOXSET_FORMAT,
        "version": BOXSET_VERSION,
        "map_hash": map_hash,
        "R": list(model.spec.R.as_pair()),
        "level": model.spec.level,
        "boxes": [list(model.spec.decode(code)) for code in model.codes],
        "component": list(model.comp_ids),
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, separators=(",", ":"))
        fh.write("\n")


def load_boxset(path: str):
    """Returns (spec, sorted box index tuples, component ids, map_hash)."""
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("format") != BOXSET_FORMAT or doc.get("version") != BOXSET_VERSION:
        raise ValueError(f"{path}: not a version-{BOXSET_VERSION} box-set file")
    spec = GridSpec(Dyadic.from_pair(doc["R"]), doc["level"])
    boxes = [tuple(b) for b in doc["boxes"]]
    return spec, boxes, list(doc["component"]), doc["map_hash"]


def boxset_digest(model: ChainModel) -> str:
    """Content hash of (level, R, boxes, components), for determinism checks."""
    blob = json.dumps(
        [model.spec.level, list(model.spec.R.as_pair()),
         list(model.codes), list(model.comp_ids)],
        separators=(",", ":"))
    return hashlib.sha256(blob.encode("ascii")).hexdigest()
