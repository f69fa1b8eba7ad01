"""Deterministic raster projections of box covers and parameter-ball loci.

Rendering is presentation only: pixel placement uses float arithmetic, the
certified objects stay untouched.  Determinism still matters (the artifact
contract is byte-identical output for identical configs), so boxes are
painted in their stored order with a fixed palette and no anti-aliasing,
and every image embeds the configuration hash in a PNG text chunk.
"""

from __future__ import annotations

import hashlib
import json

from PIL import Image, ImageDraw, PngImagePlugin

from .dyadic import Dyadic
from .intervals import BoxC2


class InvalidPlane(ValueError):
    """The requested coordinate pair does not name a valid slice plane."""


# the four real coordinates of C^2
_BOX_COORDS = {"zre": 0, "zim": 1, "wre": 2, "wim": 3}

# fixed palette; component id selects cyclically, background stays white
_PALETTE = [
    (31, 119, 180), (214, 39, 40), (44, 160, 44), (255, 127, 14),
    (148, 103, 189), (140, 86, 75), (227, 119, 194), (127, 127, 127),
    (188, 189, 34), (23, 190, 207), (174, 199, 232), (255, 152, 150),
]

_BACKGROUND = (255, 255, 255)
_TEXT = "henoncert:config"


def palette_color(cid: int):
    return _PALETTE[cid % len(_PALETTE)]


def config_hash(doc) -> str:
    """Stable short hash of a configuration mapping."""
    blob = json.dumps(doc, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def _box_interval(box: BoxC2, coord: int):
    iv = (box.z.re, box.z.im, box.w.re, box.w.im)[coord]
    return float(iv.lo), float(iv.hi)


def _parse_plane(plane, names) -> tuple[int, int]:
    try:
        ix, iy = (names[p] if isinstance(p, str) else int(p) for p in plane)
    except (KeyError, TypeError, ValueError):
        raise InvalidPlane(f"bad plane {plane!r}; "
                           f"coordinates: {sorted(names)}") from None
    if ix == iy or not all(0 <= i < len(names) for i in (ix, iy)):
        raise InvalidPlane(f"plane must name two distinct coordinates, "
                           f"got {plane!r}")
    return ix, iy


def _paint(draw, rects, window, resolution):
    x0, x1, y0, y1 = (float(v) for v in window)
    if not (x1 > x0 and y1 > y0):
        raise ValueError("window must have positive extent")
    W, H = resolution
    sx = W / (x1 - x0)
    sy = H / (y1 - y0)
    for (rx0, rx1, ry0, ry1), color in rects:
        px0 = int((rx0 - x0) * sx)
        px1 = int((rx1 - x0) * sx)
        # image row 0 is the top of the window
        py0 = int((y1 - ry1) * sy)
        py1 = int((y1 - ry0) * sy)
        if px1 < 0 or px0 >= W or py1 < 0 or py0 >= H:
            continue
        draw.rectangle((max(px0, 0), max(py0, 0),
                        min(px1, W - 1), min(py1, H - 1)), fill=color)


def _finish(img, cfg_hash: str, path: str | None):
    if path is not None:
        meta = PngImagePlugin.PngInfo()
        meta.add_text(_TEXT, cfg_hash)
        img.save(path, format="PNG", pnginfo=meta)
    return img


def _legend_empty(draw, resolution):
    draw.text((8, 8), "empty box set", fill=(0, 0, 0))


def render_slice(boxes, comp_ids, plane, window, resolution,
                 cfg_hash: str = "", path: str | None = None):
    """Project boxes onto a coordinate plane and paint per component.

    boxes: BoxC2 list (already doubled if that is the convention of the
    source file); comp_ids: parallel component ids; plane: two of
    zre/zim/wre/wim (or indices); window: (xmin, xmax, ymin, ymax);
    resolution: (width, height).  An empty box set renders an empty canvas
    with a legend instead of failing.  Returns the PIL image; when `path`
    is given, writes a PNG embedding cfg_hash.
    """
    ix, iy = _parse_plane(plane, _BOX_COORDS)
    img = Image.new("RGB", tuple(resolution), _BACKGROUND)
    draw = ImageDraw.Draw(img)
    if not boxes:
        _legend_empty(draw, resolution)
        return _finish(img, cfg_hash, path)
    rects = []
    for box, cid in zip(boxes, comp_ids):
        rx = _box_interval(box, ix)
        ry = _box_interval(box, iy)
        rects.append(((rx[0], rx[1], ry[0], ry[1]), palette_color(cid)))
    _paint(draw, rects, window, resolution)
    return _finish(img, cfg_hash, path)


def default_window(R: Dyadic, pad: float = 0.0625):
    r = float(R) * (1.0 + pad)
    return (-r, r, -r, r)


def render_approximation(result, plane=("zre", "zim"), window=None,
                         resolution=(800, 800), cfg_hash: str = "",
                         path: str | None = None):
    """Slice of an ApproximationResult's doubled box cover."""
    if window is None:
        window = default_window(result.spec.R)
    boxes = [result.doubled_box(c) for c in result.model.codes]
    return render_slice(boxes, list(result.model.comp_ids), plane, window,
                        resolution, cfg_hash, path)


def param_coord_names(degree: int):
    """Real coordinate names of the degree-d parameter space."""
    names = {}
    for j in range(degree - 1):
        names[f"a{j}re"] = 2 * j
        names[f"a{j}im"] = 2 * j + 1
    names["are"] = 2 * degree - 2
    names["aim"] = 2 * degree - 1
    return names


def render_locus(balls, degree: int, plane=("a0re", "are"), window=None,
                 resolution=(800, 800), cfg_hash: str = "",
                 path: str | None = None):
    """Project emitted hyperbolic balls onto a real 2-parameter slice.

    Each ball paints the square center +- radius in the chosen coordinates
    (the projection of its L-infinity box); all balls share one palette
    entry per emission index.
    """
    names = param_coord_names(degree)
    ix, iy = _parse_plane(plane, names)
    img = Image.new("RGB", tuple(resolution), _BACKGROUND)
    draw = ImageDraw.Draw(img)
    if not balls:
        _legend_empty(draw, resolution)
        return _finish(img, cfg_hash, path)
    if window is None:
        lo_x = min(float(b.center.reals()[ix] - b.radius) for b in balls)
        hi_x = max(float(b.center.reals()[ix] + b.radius) for b in balls)
        lo_y = min(float(b.center.reals()[iy] - b.radius) for b in balls)
        hi_y = max(float(b.center.reals()[iy] + b.radius) for b in balls)
        pad_x = 0.125 * (hi_x - lo_x) or 0.125
        pad_y = 0.125 * (hi_y - lo_y) or 0.125
        window = (lo_x - pad_x, hi_x + pad_x, lo_y - pad_y, hi_y + pad_y)
    rects = []
    for i, b in enumerate(balls):
        cs = b.center.reals()
        r = float(b.radius)
        rects.append(((float(cs[ix]) - r, float(cs[ix]) + r,
                       float(cs[iy]) - r, float(cs[iy]) + r),
                      palette_color(i)))
    _paint(draw, rects, window, resolution)
    return _finish(img, cfg_hash, path)


def read_config_hash(path: str) -> str:
    """The config hash embedded in a PNG produced by this module."""
    with Image.open(path) as img:
        return img.info.get(_TEXT, "")
