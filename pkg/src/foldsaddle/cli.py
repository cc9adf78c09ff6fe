"""Command-line front end.

Exit codes: 0 success, 1 usage or parameter error, 2 structural mismatch,
3 verification failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import __version__
from .classify import (
    StructuralMismatch,
    classify_case,
    compute_structure,
    detect_sigma_graph,
    scan,
    slice_mu,
    theorem_slice,
)
from .core import Tolerances, override_tolerances
from .errors import FoldSaddleError, NoBracketError
from .flow import advance, trajectory_events_json, trajectory_to_csv
from .normal_forms import (
    FamilyParams,
    make_system,
    spring_mass_preset,
    thresholds_M,
    y_fold_x,
)
from .return_map import return_map_to_csv, sample_return_map
from .svg import portrait_svg, scan_svg
from .verify import report_json, run_checks

__all__ = ["RunConfig", "build_parser", "resolve_config", "main"]

EXIT_OK, EXIT_USAGE, EXIT_MISMATCH, EXIT_VERIFY = 0, 1, 2, 3
COMMANDS = ("classify", "portrait", "scan", "return-map", "verify", "demo-spring")
_FORMATS = {
    "classify": ("json",),
    "portrait": ("svg",),
    "scan": ("csv", "json", "svg"),
    "return-map": ("csv",),
    "verify": ("json",),
    "demo-spring": ("csv", "json", "svg"),
}
_DEFAULTS = {
    "tau": "inv", "lambda": None, "beta": None, "mu": None,
    "lambda_range": None, "beta_range": None, "out": None, "format": None,
    "seed_grid": 6, "tol_override": {}, "theorem": None, "mu_rule": None,
    "workers": 1, "samples": 200, "t_max": 6.0,
    "a": 1.0, "b": 0.0, "c": 0.0, "A": 1.0, "start": None,
}


class UsageError(Exception):
    """Invalid command line or configuration."""


@dataclass
class RunConfig:
    """Fully resolved settings of one invocation."""

    command: str
    options: dict = field(default_factory=dict)

    def __getattr__(self, name):
        try:
            return self.__dict__["options"][name]
        except KeyError:
            raise AttributeError(name) from None

    def params(self) -> FamilyParams:
        missing = [k for k in ("lambda", "beta", "mu") if self.options.get(k) is None]
        if missing:
            raise UsageError(f"{self.command} needs --{' --'.join(missing)}")
        return FamilyParams(self.options["tau"], self.options["lambda"],
                            self.options["beta"], self.options["mu"])


# ---------------------------------------------------------------------------
# Parsing
# ---------------------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _range(text):
    parts = text.split(":")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError(f"expected a:b:n, got {text!r}")
    try:
        lo, hi, n = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a:b:n, got {text!r}") from None
    if n < 2 or not lo < hi:
        raise argparse.ArgumentTypeError(f"need a < b and n >= 2 in {text!r}")
    return [lo, hi, n]


def _tol_pair(text):
    key, sep, value = text.partition("=")
    if not sep or key not in Tolerances.names():
        raise argparse.ArgumentTypeError(
            f"expected k=v with k in {', '.join(Tolerances.names())}, got {text!r}")
    try:
        return key, float(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"tolerance {key} needs a number") from None


def _point(text):
    try:
        x, y = (float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected x,y, got {text!r}") from None
    return [x, y]


def build_parser() -> argparse.ArgumentParser:
    """Argument parser; every option defaults to ``None`` so that config
    files can fill in whatever the command line leaves out."""
    common = _Parser(add_help=False)
    common.add_argument("--config", help="JSON file mirroring RunConfig")
    common.add_argument("--tau", choices=("inv", "vis"), default=None)
    common.add_argument("--lambda", dest="lambda", type=float, default=None)
    common.add_argument("--beta", type=float, default=None)
    common.add_argument("--mu", type=float, default=None)
    common.add_argument("--lambda-range", type=_range, default=None, metavar="A:B:N")
    common.add_argument("--beta-range", type=_range, default=None, metavar="A:B:N")
    common.add_argument("--out", default=None, metavar="PATH")
    common.add_argument("--format", choices=("csv", "json", "svg"), default=None)
    common.add_argument("--seed-grid", type=int, default=None, metavar="N")
    common.add_argument("--tol-override", type=_tol_pair, action="append", default=None,
                        metavar="K=V")
    parser = _Parser(prog="foldsaddle", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"foldsaddle {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("classify", parents=[common], help="case label of one parameter point")
    sub.add_parser("portrait", parents=[common], help="SVG phase portrait")
    p = sub.add_parser("scan", parents=[common], help="(lambda, beta) case map")
    p.add_argument("--theorem", choices=("T1", "T2", "T3", "T4", "T5", "T6"), default=None)
    p.add_argument("--mu-rule", choices=("mu0_curve", "mu0_offset", "fixed"), default=None)
    p.add_argument("--workers", type=int, default=None)
    p = sub.add_parser("return-map", parents=[common], help="samples of the first return map")
    p.add_argument("--samples", type=int, default=None)
    sub.add_parser("verify", parents=[common], help="closed forms against computations")
    p = sub.add_parser("demo-spring", parents=[common], help="forced spring-mass oscillator")
    for name in ("a", "b", "c", "A"):
        p.add_argument(f"--{name}", dest=name, type=float, default=None)
    p.add_argument("--start", type=_point, default=None, metavar="X,Y")
    p.add_argument("--t-max", type=float, default=None)
    return parser


def _load_config(path):
    try:
        with open(path) as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from None
    if not isinstance(data, dict):
        raise UsageError("config must be a JSON object")
    flat = dict(data.get("params", {}))
    for k, v in data.items():
        if k in ("params", "output", "tolerances", "command"):
            continue
        flat[k.replace("-", "_")] = v
    out = data.get("output", {})
    if isinstance(out, dict):
        flat.update({k: v for k, v in (("out", out.get("path")), ("format", out.get("format")))
                     if v is not None})
    if "tolerances" in data:
        flat["tol_override"] = dict(data["tolerances"])
    return data.get("command"), flat


def resolve_config(argv) -> RunConfig:
    """Merge flags, the optional config file and defaults (in that order).

    Raises
    ------
    UsageError
    """
    argv = list(argv)
    # ranges may start with a minus sign, which argparse reads as a flag
    for k in range(len(argv) - 1):
        if argv[k] in ("--lambda-range", "--beta-range") and argv[k + 1].startswith("-"):
            argv[k:k + 2] = [f"{argv[k]}={argv[k + 1]}", ""]
    ns = build_parser().parse_args([a for a in argv if a != ""])
    flags = {k: v for k, v in vars(ns).items() if v is not None and k not in ("command", "config")}
    if "tol_override" in flags:
        flags["tol_override"] = dict(flags["tol_override"])
    from_file = {}
    if ns.config:
        command, from_file = _load_config(ns.config)
        if command is not None and command != ns.command:
            raise UsageError(f"config is for {command!r}, not {ns.command!r}")
    unknown = set(from_file) - set(_DEFAULTS)
    if unknown:
        raise UsageError(f"unknown config keys: {sorted(unknown)}")
    opts = dict(_DEFAULTS)
    opts.update(from_file)
    opts.update(flags)
    for key in ("lambda_range", "beta_range"):
        if opts[key] is not None and (len(opts[key]) != 3 or int(opts[key][2]) < 2):
            raise UsageError(f"{key} must be [a, b, n] with n >= 2")
    for key, _ in opts["tol_override"].items():
        if key not in Tolerances.names():
            raise UsageError(f"unknown tolerance {key!r}")
    fmt = opts["format"] or _FORMATS[ns.command][0]
    if fmt not in _FORMATS[ns.command]:
        raise UsageError(f"format {fmt!r} not available for {ns.command}")
    opts["format"] = fmt
    return RunConfig(ns.command, opts)


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def _emit(text: str, path: Optional[str]):
    if path is None:
        sys.stdout.write(text)
    else:
        with open(path, "w", newline="") as fh:
            fh.write(text)


def cmd_classify(cfg: RunConfig) -> int:
    p = cfg.params()
    try:
        label = classify_case(p)
    except StructuralMismatch as exc:
        body = {"error": "StructuralMismatch", "message": str(exc), "label": exc.label,
                "predicted": exc.predicted, "computed": exc.computed}
        _emit(json.dumps(body, indent=2, default=float) + "\n", cfg.out)
        return EXIT_MISMATCH
    body = {"params": p.to_dict(), **label.to_dict()}
    _emit(json.dumps(body, indent=2, default=float) + "\n", cfg.out)
    return EXIT_OK


def cmd_portrait(cfg: RunConfig) -> int:
    p = cfg.params()
    Z = make_system(p)
    _, pseudo, cycles = compute_structure(p)
    graph = detect_sigma_graph(p)
    text = portrait_svg(Z, seed_grid=cfg.seed_grid, cycles=cycles,
                        graph=None if graph is None else graph.polyline,
                        pseudo=pseudo, saddle=(0.0, -p.beta),
                        title=f"tau={p.tau} lambda={p.lam:.6g} beta={p.beta:.6g} mu={p.mu:.6g}")
    _emit(text, cfg.out)
    return EXIT_OK


def _scan_rule(cfg: RunConfig):
    if cfg.theorem is not None:
        return theorem_slice(cfg.theorem)
    tau = cfg.tau
    rule = cfg.mu_rule
    if rule is None:
        rule = "fixed" if cfg.mu is not None or tau == "vis" else "mu0_curve"
    if rule == "mu0_curve":
        return tau, "mu0_curve"
    if rule == "mu0_offset":
        return tau, ("mu0_offset", 0.2 if cfg.mu is None else cfg.mu)
    return tau, ("fixed", 0.0 if cfg.mu is None else cfg.mu)


def _threshold_curves(tau, rule, betas):
    """Closed-form threshold curves ``lambda(beta)`` for the scan overlay."""
    curves = {"lambda=-beta": np.column_stack([-betas, betas]),
              "lambda=beta": np.column_stack([betas, betas])}
    pos = betas[betas > 0]
    if pos.size:
        alphas = np.array([slice_mu(rule, b) - 1.0 for b in pos])
        curves["i1"] = np.column_stack([y_fold_x(alphas, pos), pos])
        if tau == "inv":
            m = np.array([thresholds_M(a, b) for a, b in zip(alphas, pos)])
            for k in range(3):
                curves[f"M{k}"] = np.column_stack([m[:, k], pos])
    return curves


def cmd_scan(cfg: RunConfig) -> int:
    tau, rule = _scan_rule(cfg)
    lr = cfg.lambda_range or [-0.95, 0.95, 21]
    default_beta = [0.05, 0.8, 21] if rule == "mu0_curve" else [-0.8, 0.8, 21]
    br = cfg.beta_range or default_beta
    res = scan(tau, rule, (lr[0], lr[1]), (br[0], br[1]), (int(lr[2]), int(br[2])),
               workers=cfg.workers)
    if cfg.format == "csv":
        text = res.to_csv()
    elif cfg.format == "json":
        text = res.to_json() + "\n"
    else:
        title = f"{tau} {rule if isinstance(rule, str) else rule[0] + '=' + str(rule[1])}"
        text = scan_svg(res, _threshold_curves(tau, rule, res.beta_grid), title=title)
    _emit(text, cfg.out)
    sys.stderr.write(f"distinct labels: {len(res.distinct_labels())} "
                     f"{' '.join(res.distinct_labels())}\n"
                     f"cells: {json.dumps(res.status_counts(), sort_keys=True)}\n")
    return EXIT_OK


def cmd_return_map(cfg: RunConfig) -> int:
    p = cfg.params()
    if p.tau != "inv" or not p.beta > 0:
        raise UsageError("return-map needs --tau inv and --beta > 0")
    xs, phi, dphi = sample_return_map(p, int(cfg.samples))
    _emit(return_map_to_csv(xs, phi, dphi), cfg.out)
    return EXIT_OK


def cmd_verify(cfg: RunConfig) -> int:
    checks = run_checks()
    _emit(report_json(checks) + "\n", cfg.out)
    return EXIT_OK if all(c.passed for c in checks) else EXIT_VERIFY


def cmd_demo_spring(cfg: RunConfig) -> int:
    Z = spring_mass_preset(cfg.a, cfg.b, cfg.c, cfg.A)
    if cfg.format == "svg":
        _emit(portrait_svg(Z, seed_grid=cfg.seed_grid, t_max=cfg.t_max, saddle=(0.0, 0.0),
                           title=f"spring-mass a={cfg.a:g} b={cfg.b:g} c={cfg.c:g} A={cfg.A:g}"),
              cfg.out)
        return EXIT_OK
    start = cfg.start or [-0.5, 0.5]
    traj = advance(Z, tuple(start), cfg.t_max)
    _emit(trajectory_to_csv(traj) if cfg.format == "csv" else trajectory_events_json(traj) + "\n",
          cfg.out)
    return EXIT_OK


_COMMANDS = {
    "classify": cmd_classify, "portrait": cmd_portrait, "scan": cmd_scan,
    "return-map": cmd_return_map, "verify": cmd_verify, "demo-spring": cmd_demo_spring,
}


def main(argv=None) -> int:
    """Entry point; returns the exit code."""
    argv = sys.argv[1:] if argv is None else argv
    try:
        cfg = resolve_config(argv)
        with override_tolerances(**cfg.tol_override):
            return _COMMANDS[cfg.command](cfg)
    except UsageError as exc:
        sys.stderr.write(f"foldsaddle: error: {exc}\n")
        return EXIT_USAGE
    except StructuralMismatch as exc:
        sys.stderr.write(f"foldsaddle: structural mismatch: {exc}\n")
        return EXIT_MISMATCH
    except (FoldSaddleError, NoBracketError) as exc:
        sys.stderr.write(f"foldsaddle: error: {exc}\n")
        return EXIT_USAGE
    except OSError as exc:
        sys.stderr.write(f"foldsaddle: I/O error: {exc}\n")
        return EXIT_USAGE
