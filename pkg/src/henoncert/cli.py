"""Command-line entry points.

Exit codes: 0 success, 2 budget exhausted (the semi-algorithm did not halt
within the configured budget), 3 invalid input, 4 internal verification
failure.  Every numeric value printed or written is a dyadic
[mantissa, exponent] pair; every artifact embeds the run configuration.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from . import __version__
from .dyadic import Dyadic
from .mapfile import InvalidMapFile, load_map, map_hash
from .juliaset import (
    BudgetExhausted,
    dump_approximation,
    load_approximation,
    run_julia,
)
from .certify import (
    VerificationFailure,
    dump_certificate,
    load_certificate,
    run_certifier,
    summarize_certificate,
    verify_certificate,
)
from .paramsweep import (
    CorruptLog,
    Stage,
    default_stages,
    load_log,
    recover_log,
    sweep,
)
from .render import (
    InvalidPlane,
    config_hash,
    render_approximation,
    render_locus,
)

EXIT_OK = 0
EXIT_BUDGET = 2
EXIT_INVALID = 3
EXIT_VERIFY = 4

ATTEMPT_FORMAT = "henoncert-certify-attempt"


class _UsageError(Exception):
    """Argument errors surfaced as exit code 3."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


class RunConfig:
    """The full command configuration, serialized into every artifact."""

    __slots__ = ("command", "params")

    def __init__(self, command: str, params: dict):
        self.command = command
        self.params = dict(params)

    @classmethod
    def from_args(cls, args) -> "RunConfig":
        params = {k: v for k, v in sorted(vars(args).items())
                  if k != "command" and not k.startswith("_")}
        return cls(args.command, params)

    def to_doc(self) -> dict:
        return {"command": self.command, "params": self.params,
                "tool_version": __version__}

    @classmethod
    def from_doc(cls, doc) -> "RunConfig":
        keys = set(doc)
        if keys - {"command", "params", "tool_version"}:
            raise ValueError(f"unknown run-config keys {sorted(keys)}")
        return cls(doc["command"], doc["params"])

    def hash(self) -> str:
        return config_hash(self.to_doc())


def _embed_config(path: str, config: RunConfig) -> None:
    """Insert the run config into a JSON artifact written by a dumper."""
    with open(path) as fh:
        doc = json.load(fh)
    doc["run_config"] = config.to_doc()
    with open(path, "w") as fh:
        json.dump(doc, fh, separators=(",", ":"))
        fh.write("\n")


def _parse_dyadic(text: str) -> Dyadic:
    """`m` (integer) or `m,e` meaning m * 2^e."""
    parts = text.split(",")
    try:
        if len(parts) == 1:
            return Dyadic(int(parts[0]))
        if len(parts) == 2:
            return Dyadic(int(parts[0]), int(parts[1]))
    except ValueError:
        pass
    raise _UsageError(f"bad dyadic {text!r}: expected `m` or `m,e`")


def _pair(d: Dyadic) -> list:
    return list(d.as_pair())


# -- commands ------------------------------------------------------------------

def _cmd_julia_approx(args, config: RunConfig) -> int:
    f = load_map(args.map)
    result = run_julia(f, args.N, max_n=args.max_n, threads=args.threads)
    dump_approximation(result, map_hash(f), args.out)
    _embed_config(args.out, config)
    print(json.dumps({"status": "halted", "N": result.N, "n": result.n,
                      "k": result.k, "boxes": len(result.model.codes),
                      "components": result.model.ncomp,
                      "out": args.out}))
    return EXIT_OK


def _cmd_certify_hyp(args, config: RunConfig) -> int:
    f = load_map(args.map)
    try:
        cert = run_certifier(f, max_N=args.max_N, threads=args.threads,
                             phase_samples=args.phase_samples,
                             max_n=args.max_n)
    except BudgetExhausted as exc:
        doc = {"format": ATTEMPT_FORMAT, "version": 1,
               "status": "budget-exhausted", "map_hash": map_hash(f),
               "max_N": args.max_N, "max_n": args.max_n,
               "reason": str(exc), "run_config": config.to_doc()}
        with open(args.out, "w") as fh:
            json.dump(doc, fh, separators=(",", ":"))
            fh.write("\n")
        print(f"budget exhausted: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    dump_certificate(cert, map_hash(f), args.out)
    _embed_config(args.out, config)
    print(summarize_certificate(cert))
    return EXIT_OK


def _cmd_verify_cert(args, config: RunConfig) -> int:
    f = load_map(args.map)
    cert, stored_hash = load_certificate(args.cert)
    if stored_hash != map_hash(f):
        print(f"certificate was issued for map {stored_hash}, "
              f"got {map_hash(f)}", file=sys.stderr)
        return EXIT_VERIFY
    try:
        report = verify_certificate(cert, f, args.samples, seed=args.seed)
    except VerificationFailure as exc:
        print(f"verification failed: {exc}", file=sys.stderr)
        return EXIT_VERIFY
    print(json.dumps(report))
    return EXIT_OK


def _cmd_param_sweep(args, config: RunConfig) -> int:
    if args.center is not None:
        center = tuple(_parse_dyadic(v) for v in args.center.split(":"))
        if len(center) != 2 * args.degree:
            raise _UsageError(f"--center needs {2 * args.degree} "
                              f"colon-separated dyadics")
        radius = _parse_dyadic(args.radius) if args.radius else None
        stages = [Stage(s, center=center, radius=radius,
                        max_cells=args.max_cells)
                  for s in range(args.first_stage,
                                 args.first_stage + args.stages)]
    else:
        stages = default_stages(args.stages)
        for st in stages:
            st.max_cells = args.max_cells
    if args.resume and args.recover:
        recover_log(args.resume)
    emitted = 0
    for ball in sweep(args.degree, stages, log=args.resume,
                      out_dir=args.out_dir, threads=args.threads):
        print(json.dumps({
            "ball": emitted,
            "center": [_pair(v) for v in ball.center.reals()],
            "radius": _pair(ball.radius),
            "certificate": ball.cert_ref,
        }))
        emitted += 1
        if args.max_balls is not None and emitted >= args.max_balls:
            break
    print(json.dumps({"status": "done", "balls": emitted}))
    return EXIT_OK


def _parse_window(text):
    if text is None:
        return None
    vals = text.split(":")
    if len(vals) != 4:
        raise _UsageError("--window needs xmin:xmax:ymin:ymax")
    try:
        return tuple(float(v) for v in vals)
    except ValueError:
        raise _UsageError(f"bad window {text!r}") from None


def _parse_resolution(text):
    try:
        w, h = text.split("x")
        w, h = int(w), int(h)
        if w > 0 and h > 0:
            return (w, h)
    except ValueError:
        pass
    raise _UsageError(f"bad resolution {text!r}: expected WxH")


def _cmd_render(args, config: RunConfig) -> int:
    result, _ = load_approximation(args.boxset)
    plane = tuple(args.plane.split(":"))
    render_approximation(result, plane=plane,
                         window=_parse_window(args.window),
                         resolution=_parse_resolution(args.resolution),
                         cfg_hash=config.hash(), path=args.out)
    print(json.dumps({"status": "rendered", "boxes":
                      len(result.model.codes), "out": args.out,
                      "config_hash": config.hash()}))
    return EXIT_OK


def _cmd_locus_render(args, config: RunConfig) -> int:
    state = recover_log(args.log) if args.recover else load_log(args.log)
    plane = tuple(args.plane.split(":"))
    render_locus(state.balls, args.degree, plane=plane,
                 window=_parse_window(args.window),
                 resolution=_parse_resolution(args.resolution),
                 cfg_hash=config.hash(), path=args.out)
    print(json.dumps({"status": "rendered", "balls": len(state.balls),
                      "out": args.out, "config_hash": config.hash()}))
    return EXIT_OK


# -- parser and dispatch -------------------------------------------------------

def _build_parser() -> _Parser:
    p = _Parser(prog="henoncert",
                description="Certified Julia set approximation and "
                            "hyperbolicity certificates for compositions "
                            "of generalized Henon maps.")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    ja = sub.add_parser("julia-approx",
                        help="run the 2^-N approximation semi-algorithm")
    ja.add_argument("--map", required=True, help="map file (JSON)")
    ja.add_argument("--N", required=True, type=int,
                    help="approximation quality 2^-N")
    ja.add_argument("--max-n", type=int, default=None, dest="max_n",
                    help="abort (exit 2) beyond this subdivision depth")
    ja.add_argument("--threads", type=int, default=1)
    ja.add_argument("--out", required=True, help="output box-set file")
    ja.set_defaults(_run=_cmd_julia_approx)

    ch = sub.add_parser("certify-hyp",
                        help="run the hyperbolicity certifier")
    ch.add_argument("--map", required=True)
    ch.add_argument("--max-N", type=int, default=None, dest="max_N",
                    help="abort (exit 2) beyond this certificate level")
    ch.add_argument("--max-n", type=int, default=None, dest="max_n")
    ch.add_argument("--phase-samples", type=int, default=0,
                    dest="phase_samples")
    ch.add_argument("--threads", type=int, default=1)
    ch.add_argument("--out", required=True, help="output certificate file")
    ch.set_defaults(_run=_cmd_certify_hyp)

    vc = sub.add_parser("verify-cert",
                        help="independently spot-check a certificate")
    vc.add_argument("--map", required=True)
    vc.add_argument("--cert", required=True)
    vc.add_argument("--samples", type=int, default=1000)
    vc.add_argument("--seed", type=int, default=0)
    vc.set_defaults(_run=_cmd_verify_cert)

    ps = sub.add_parser("param-sweep",
                        help="enumerate certified hyperbolic parameter balls")
    ps.add_argument("--degree", required=True, type=int)
    ps.add_argument("--stages", required=True, type=int,
                    help="number of grid stages to run")
    ps.add_argument("--first-stage", type=int, default=1, dest="first_stage")
    ps.add_argument("--center", default=None,
                    help="window center: 2d colon-separated dyadics (m or m,e)")
    ps.add_argument("--radius", default=None,
                    help="window radius as a dyadic (m or m,e)")
    ps.add_argument("--max-cells", type=int, default=None, dest="max_cells",
                    help="certification attempts charged per stage")
    ps.add_argument("--max-balls", type=int, default=None, dest="max_balls")
    ps.add_argument("--resume", default=None,
                    help="append-only sweep log to resume from")
    ps.add_argument("--recover", action="store_true",
                    help="truncate a corrupt log to its valid prefix")
    ps.add_argument("--out-dir", default=os.environ.get("HENONCERT_OUT"),
                    dest="out_dir", help="directory for ball certificates")
    ps.add_argument("--threads", type=int, default=1)
    ps.set_defaults(_run=_cmd_param_sweep)

    rd = sub.add_parser("render", help="raster slice of a box-set file")
    rd.add_argument("--boxset", required=True)
    rd.add_argument("--plane", default="zre:zim",
                    help="two of zre/zim/wre/wim, colon separated")
    rd.add_argument("--window", default=None, help="xmin:xmax:ymin:ymax")
    rd.add_argument("--resolution", default="800x800")
    rd.add_argument("--out", required=True, help="output PNG")
    rd.set_defaults(_run=_cmd_render)

    lr = sub.add_parser("locus-render",
                        help="raster slice of swept hyperbolic balls")
    lr.add_argument("--log", required=True, help="sweep log file")
    lr.add_argument("--degree", required=True, type=int)
    lr.add_argument("--plane", default="a0re:are",
                    help="two parameter coordinates, colon separated")
    lr.add_argument("--window", default=None)
    lr.add_argument("--resolution", default="800x800")
    lr.add_argument("--recover", action="store_true")
    lr.add_argument("--out", required=True, help="output PNG")
    lr.set_defaults(_run=_cmd_locus_render)
    return p


def dispatch(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except SystemExit as exc:  # --help / --version
        return EXIT_OK if exc.code in (0, None) else EXIT_INVALID
    config = RunConfig.from_args(args)
    try:
        return args._run(args, config)
    except BudgetExhausted as exc:
        print(f"budget exhausted: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except VerificationFailure as exc:
        print(f"verification failed: {exc}", file=sys.stderr)
        return EXIT_VERIFY
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (InvalidMapFile, InvalidPlane, CorruptLog) as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID


def main() -> None:
    sys.exit(dispatch())


if __name__ == "__main__":
    main()
