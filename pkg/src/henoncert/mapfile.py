"""Map description files: JSON with dyadic [mantissa, exponent] pairs.

Schema (strictly validated):

    {
      "format": "henoncert-map",
      "version": 1,
      "factors": [
        {
          "degree": 2,
          "coeffs": [[re_pair, im_pair], ...],   # degrees 0..degree-1
          "a": [re_pair, im_pair]
        },
        ...
      ]
    }

where each *_pair is a two-integer list [mantissa, exponent].  Coefficients
may instead be four-pair lists [re_lo, re_hi, im_lo, im_hi] to describe a
rectangle (used by the parameter sweep); exact pairs are the common case.
"""

from __future__ import annotations

import hashlib
import json

from .dyadic import Dyadic
from .intervals import ComplexRect, RealInterval
from .henon import HenonFactor, MonicPoly, PolyDiffeo

FORMAT = "henoncert-map"
VERSION = 1


class InvalidMapFile(ValueError):
    """Raised for any schema or invariant violation, with a location anchor."""


def _pair(obj, where: str) -> Dyadic:
    if (not isinstance(obj, list) or len(obj) != 2
            or not all(isinstance(v, int) and not isinstance(v, bool) for v in obj)):
        raise InvalidMapFile(f"{where}: expected [mantissa, exponent] integer pair, got {obj!r}")
    return Dyadic(obj[0], obj[1])


def _rect(obj, where: str) -> ComplexRect:
    if not isinstance(obj, list):
        raise InvalidMapFile(f"{where}: expected a list of dyadic pairs, got {obj!r}")
    if len(obj) == 2:
        return ComplexRect.point(_pair(obj[0], where + "[0]"), _pair(obj[1], where + "[1]"))
    if len(obj) == 4:
        vals = [_pair(obj[k], f"{where}[{k}]") for k in range(4)]
        try:
            return ComplexRect(RealInterval(vals[0], vals[1]), RealInterval(vals[2], vals[3]))
        except ValueError as exc:
            raise InvalidMapFile(f"{where}: {exc}") from exc
    raise InvalidMapFile(f"{where}: expected 2 pairs (point) or 4 pairs (rectangle)")


def _rect_json(c: ComplexRect) -> list:
    if c.is_point():
        return [list(c.re.lo.as_pair()), list(c.im.lo.as_pair())]
    return [list(c.re.lo.as_pair()), list(c.re.hi.as_pair()),
            list(c.im.lo.as_pair()), list(c.im.hi.as_pair())]


def map_to_json(f: PolyDiffeo) -> dict:
    return {
        "format": FORMAT,
        "version": VERSION,
        "factors": [
            {
                "degree": fac.p.degree,
                "coeffs": [_rect_json(c) for c in fac.p.coeffs],
                "a": _rect_json(fac.a),
            }
            for fac in f.factors
        ],
    }


def map_from_json(doc) -> PolyDiffeo:
    if not isinstance(doc, dict):
        raise InvalidMapFile("top level: expected a JSON object")
    if doc.get("format") != FORMAT:
        raise InvalidMapFile(f"top level: format must be {FORMAT!r}, got {doc.get('format')!r}")
    if doc.get("version") != VERSION:
        raise InvalidMapFile(f"top level: unsupported version {doc.get('version')!r}")
    extra = set(doc) - {"format", "version", "factors"}
    if extra:
        raise InvalidMapFile(f"top level: unknown keys {sorted(extra)}")
    factors_doc = doc.get("factors")
    if not isinstance(factors_doc, list) or not factors_doc:
        raise InvalidMapFile("factors: expected a nonempty list")
    factors = []
    for i, fd in enumerate(factors_doc):
        where = f"factors[{i}]"
        if not isinstance(fd, dict):
            raise InvalidMapFile(f"{where}: expected an object")
        extra = set(fd) - {"degree", "coeffs", "a"}
        if extra:
            raise InvalidMapFile(f"{where}: unknown keys {sorted(extra)}")
        degree = fd.get("degree")
        if not isinstance(degree, int) or isinstance(degree, bool) or degree < 2:
            raise InvalidMapFile(f"{where}.degree: expected an integer >= 2, got {degree!r}")
        coeffs_doc = fd.get("coeffs")
        if not isinstance(coeffs_doc, list) or len(coeffs_doc) != degree:
            raise InvalidMapFile(f"{where}.coeffs: expected exactly {degree} coefficients")
        coeffs = [_rect(c, f"{where}.coeffs[{j}]") for j, c in enumerate(coeffs_doc)]
        a = _rect(fd.get("a"), f"{where}.a")
        if a.contains_zero():
            raise InvalidMapFile(f"{where}.a: must exclude 0")
        factors.append(HenonFactor(MonicPoly(degree, coeffs), a))
    return PolyDiffeo(factors)


def map_hash(f: PolyDiffeo) -> str:
    """SHA-256 of the canonical JSON serialization; keys every output artifact."""
    blob = json.dumps(map_to_json(f), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode("ascii")).hexdigest()


def dump_map(f: PolyDiffeo, path: str) -> None:
    with open(path, "w") as fh:
        json.dump(map_to_json(f), fh, indent=1)
        fh.write("\n")


def load_map(path: str) -> PolyDiffeo:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise InvalidMapFile(f"{path}:{exc.lineno}: not valid JSON ({exc.msg})") from exc
    try:
        return map_from_json(doc)
    except InvalidMapFile as exc:
        raise InvalidMapFile(f"{path}: {exc}") from exc
