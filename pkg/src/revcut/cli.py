"""Command-line front end: ``revcut {analyze,phi-table,trace,cutlocus,verify}``.

Every float is written with 17 significant digits, so identical settings give
byte-identical output.  Settings come from an optional JSON config file and
are overridden by flags.

Exit codes: 0 ok, 1 internal or numerical error, 2 the profile fails the
hypotheses the command needs, 3 a checked property is violated.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import dataclass, field
from typing import Dict, Optional

import numpy as np

from . import cutlocus, geodesics, oracle, profile as prof, quadrature
from .errors import (AmbiguousClassificationError, RevcutError,
                     UnsupportedProfileError)

EXIT_OK, EXIT_ERROR, EXIT_HYPOTHESIS, EXIT_PROPERTY = 0, 1, 2, 3


@dataclass
class RunConfig:
    profile: str = "gauss"
    params: Dict[str, float] = field(default_factory=dict)
    t_max: float = prof.DEFAULT_T_MAX
    grid_n: int = prof.DEFAULT_GRID_N
    tol: float = quadrature.DEFAULT_TOL
    step: float = geodesics.DEFAULT_STEP
    s_max: float = 12.0
    fan: int = oracle.DEFAULT_FAN
    format: str = "json"

    def validate(self) -> None:
        if self.profile not in prof.GALLERY:
            raise ValueError(f"unknown profile {self.profile!r}")
        for name in ("t_max", "grid_n", "tol", "step", "s_max", "fan"):
            value = getattr(self, name)
            if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
                raise ValueError(f"{name} must be a positive number, got {value!r}")
        if self.format not in ("csv", "json"):
            raise ValueError(f"format must be csv or json, got {self.format!r}")

    def build_profile(self) -> prof.WarpingProfile:
        return prof.get_profile(self.profile, **self.params)

    def analysis(self, p: prof.WarpingProfile) -> prof.ProfileAnalysis:
        return prof.analyze(p, t_max=self.t_max, grid_n=int(self.grid_n))


# ---------------------------------------------------------------------------
# Output
# ---------------------------------------------------------------------------

def _encode(obj) -> str:
    if obj is None or isinstance(obj, (bool, np.bool_)):
        return json.dumps(None if obj is None else bool(obj))
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return format(x, ".17g") if math.isfinite(x) else "null"
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        return "{" + ", ".join(f"{json.dumps(str(k))}: {_encode(v)}" for k, v in obj.items()) + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        return "[" + ", ".join(_encode(v) for v in obj) + "]"
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def dumps(obj) -> str:
    """JSON with every float at 17 significant digits; non-finite floats become null."""
    return _encode(obj) + "\n"


def _emit(text: str, out: Optional[str]) -> None:
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def cmd_analyze(cfg: RunConfig, args) -> int:
    p = cfg.build_profile()
    an = cfg.analysis(p)
    body = {"profile": p.name, "params": p.param_dict()}
    body.update(an.to_dict())
    _emit(dumps(body), args.out)
    return EXIT_OK if an.in_main_class else EXIT_HYPOTHESIS


def cmd_phi_table(cfg: RunConfig, args) -> int:
    p = cfg.build_profile()
    an = cfg.analysis(p)
    lo, hi = quadrature.middle_band(an, 0.8)
    nu_min = lo if args.nu_min is None else args.nu_min
    nu_max = hi if args.nu_max is None else args.nu_max
    table = quadrature.build_phi_table(p, nu_min, nu_max, args.n, cfg.tol, analysis=an)
    _emit(table.to_csv() if cfg.format == "csv" else dumps(table.to_dict()), args.out)
    if table.partial:
        for msg in table.failures:
            print(f"revcut: {msg}", file=sys.stderr)
        return EXIT_ERROR
    return EXIT_OK if table.monotone else EXIT_PROPERTY


def cmd_trace(cfg: RunConfig, args) -> int:
    p = cfg.build_profile()
    nu = geodesics.clairaut_constant(p, args.t_start, args.eta)
    sign0 = -1 if math.sin(args.eta) < 0 else 1
    tr = geodesics.integrate(p, (args.t_start, args.theta_start), nu, sign0,
                             s_max=cfg.s_max, step=cfg.step)
    if cfg.format == "csv":
        text = tr.to_csv()
    else:
        text = dumps({
            "nu": tr.nu,
            "columns": ["s", "t", "theta", "dt_ds"],
            "rows": np.column_stack([tr.s, tr.t, tr.theta, tr.dt_ds]).tolist(),
            "turning_points": [list(x) for x in tr.turning_points],
        })
    _emit(text, args.out)
    return EXIT_OK


def _classify(cfg, args):
    p = cfg.build_profile()
    an = cfg.analysis(p)
    return p, cutlocus.classify(p, an, args.t_q, cfg.tol, strict=not args.allow_outside_class)


def cmd_cutlocus(cfg: RunConfig, args) -> int:
    _, desc = _classify(cfg, args)
    _emit(dumps(desc.to_dict()), args.out)
    return EXIT_OK


def cmd_verify(cfg: RunConfig, args) -> int:
    p, desc = _classify(cfg, args)
    rep, _ = oracle.verify(p, args.t_q, n_geodesics=int(cfg.fan), s_max=cfg.s_max,
                           step=cfg.step, tol_space=args.tol_space, prediction=desc)
    _emit(dumps(rep.to_dict()), args.out)
    return EXIT_OK if rep.ok else EXIT_PROPERTY


# ---------------------------------------------------------------------------
# Parsing
# ---------------------------------------------------------------------------

_FLAG_TO_FIELD = {"profile": "profile", "t_max": "t_max", "grid_n": "grid_n", "tol": "tol",
                  "step": "step", "smax": "s_max", "fan": "fan", "format": "format"}


def _param(text: str):
    key, sep, value = text.partition("=")
    if not sep or not key:
        raise argparse.ArgumentTypeError(f"expected k=v, got {text!r}")
    try:
        return key, float(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"parameter {key!r} needs a number, got {value!r}")


def _common() -> argparse.ArgumentParser:
    c = argparse.ArgumentParser(add_help=False)
    c.add_argument("--config", help="JSON file with RunConfig fields; flags take precedence")
    c.add_argument("--profile", choices=sorted(prof.GALLERY))
    c.add_argument("--param", action="append", type=_param, default=[], metavar="K=V",
                   help="profile parameter, repeatable")
    c.add_argument("--t-max", dest="t_max", type=float)
    c.add_argument("--grid-n", dest="grid_n", type=int)
    c.add_argument("--tol", type=float)
    c.add_argument("--step", type=float)
    c.add_argument("--smax", type=float)
    c.add_argument("--fan", type=int)
    c.add_argument("--format", choices=("csv", "json"))
    c.add_argument("--out", help="write here instead of stdout")
    return c


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="revcut", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    common = _common()

    sp = sub.add_parser("analyze", parents=[common], help="profile constants and hypothesis checks")
    sp.set_defaults(func=cmd_analyze)

    sp = sub.add_parser("phi-table", parents=[common], help="tabulate phi(nu) and l(nu)")
    sp.add_argument("--nu-min", type=float)
    sp.add_argument("--nu-max", type=float)
    sp.add_argument("-n", type=int, default=50)
    sp.set_defaults(func=cmd_phi_table)

    sp = sub.add_parser("trace", parents=[common], help="integrate one geodesic")
    sp.add_argument("--t-start", type=float, default=0.0)
    sp.add_argument("--theta-start", type=float, default=0.0)
    sp.add_argument("--eta", type=float, required=True,
                    help="initial angle to the parallel direction, radians")
    sp.set_defaults(func=cmd_trace, default_format="csv")

    for name, func, what in (("cutlocus", cmd_cutlocus, "closed-form cut locus of (t_q, 0)"),
                             ("verify", cmd_verify, "check the cut locus with a geodesic fan")):
        sp = sub.add_parser(name, parents=[common], help=what)
        sp.add_argument("--t-q", dest="t_q", type=float, required=True)
        sp.add_argument("--allow-outside-class", action="store_true",
                        help="waive a failed curvature-monotonicity check")
        if name == "verify":
            sp.add_argument("--tol-space", type=float, default=2e-2)
        sp.set_defaults(func=func)
    return parser


def load_config(args) -> RunConfig:
    cfg = RunConfig()
    if getattr(args, "default_format", None):
        cfg.format = args.default_format
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            raw = json.load(fh)
        unknown = set(raw) - set(RunConfig.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown config keys: {', '.join(sorted(unknown))}")
        for key, value in raw.items():
            setattr(cfg, key, dict(value) if key == "params" else value)
    for flag, name in _FLAG_TO_FIELD.items():
        value = getattr(args, flag, None)
        if value is not None:
            setattr(cfg, name, value)
    if args.param:
        cfg.params = {**cfg.params, **dict(args.param)}
    cfg.validate()
    return cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args)
        return args.func(cfg, args)
    except UnsupportedProfileError as exc:
        print(f"revcut: {exc}", file=sys.stderr)
        return EXIT_HYPOTHESIS
    except AmbiguousClassificationError as exc:
        print(f"revcut: {exc}", file=sys.stderr)
        for c in exc.candidates:
            print(f"revcut: candidate {c.kind.value}", file=sys.stderr)
        return EXIT_ERROR
    except (RevcutError, ValueError, OSError) as exc:
        print(f"revcut: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
