"""Command-line interface over the library.

Subcommands: convolve, atom-scan, decompose, linearize, eigtest,
oracle, compare.  Measures come from JSON files in the canonical
format; complex numbers serialize as [re, im] pairs and matrices in
dense row-major order.  All randomness flows from one --seed so every
run is reproducible.  Exit codes: 0 success, 1 strict-mode residual
failure, 2 schema violation, 3 numerical non-convergence (diagnostic
JSON on stderr), 4 internal invariant breach.

Environment overrides: FREEATOMS_TOL and FREEATOMS_SEED replace the
defaults of --tol and --seed when those flags are not given.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import atoms as atoms_mod
from . import rmt
from .errors import ConvergenceError, FreeAtomsError, PreconditionError, SchemaError
from .linearize import linearize, verify_certificate
from .measure import SpectralMeasure
from .ncpoly import parse_poly
from .subord import FreeSumModel, sum_density

EXIT_OK = 0
EXIT_STRICT = 1
EXIT_SCHEMA = 2
EXIT_NOCONV = 3
EXIT_INVARIANT = 4

# residual ceilings enforced under --strict (scaled by the operating
# dimension where the identity is matrix-valued)
STRICT_LIMITS = {"i": 1e-6, "v": 1e-6, "vii": 1e-4, "iv": 1e-5}


@dataclass
class RunConfig:
    """Parsed invocation: one command plus its inputs and numerics."""

    command: str
    tol: float = 1e-12
    y0: float = 0.1
    ladder_depth: int = 16
    grid: tuple = (-3.0, 3.0, 201)
    seed: int = 0
    N: int = 2000
    trials: int = 8
    epsilon: float | None = None
    workers: int = 1
    strict: bool = False
    out: str | None = None
    fmt: str = "json"
    mu1_path: str | None = None
    mu2_path: str | None = None
    poly: str | None = None
    lam: float = 0.0
    b_spec: str | None = None
    a1_spec: str | None = None
    a2_spec: str | None = None
    y_eval: float = 1e-4
    candidates: list = field(default_factory=list)
    bins: int = 201

    def __post_init__(self):
        if self.tol <= 0:
            raise SchemaError("tol must be positive")
        if not (4 <= self.ladder_depth <= 40):
            raise SchemaError("ladder_depth must lie in [4, 40]")
        if self.grid[0] >= self.grid[1]:
            raise SchemaError("grid minimum must be below maximum")


def _load_measure(path):
    if path is None:
        raise SchemaError("a measure file is required")
    try:
        with open(path) as fh:
            data = json.load(fh)
    except FileNotFoundError as exc:
        raise SchemaError(f"measure file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise SchemaError(f"measure file {path} is not valid JSON: {exc}") from exc
    return SpectralMeasure.from_json_dict(data)


def _parse_matrix(spec_str, default=None):
    """Matrix from inline JSON or a file path; [re,im] pairs or plain reals."""
    if spec_str is None:
        return default
    text = spec_str
    if os.path.exists(spec_str):
        text = Path(spec_str).read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"cannot parse matrix {spec_str!r}: {exc}") from exc
    if isinstance(data, (int, float)):
        return np.array([[complex(data)]])

    def cell(v):
        if isinstance(v, (int, float)):
            return complex(v)
        if isinstance(v, list) and len(v) == 2:
            return complex(v[0], v[1])
        raise SchemaError(f"bad matrix cell {v!r}")

    try:
        return np.array([[cell(v) for v in row] for row in data])
    except (TypeError, SchemaError) as exc:
        raise SchemaError(f"bad matrix specification {spec_str!r}: {exc}") from exc


def _ladder(cfg):
    return atoms_mod.default_ladder(cfg.y0, cfg.ladder_depth)


def _grid_points(cfg):
    lo, hi, pts = cfg.grid
    return np.linspace(lo, hi, int(pts))


def _build_model(cfg):
    mu1 = _load_measure(cfg.mu1_path)
    mu2 = _load_measure(cfg.mu2_path)
    a1 = _parse_matrix(cfg.a1_spec, np.eye(1))
    a2 = _parse_matrix(cfg.a2_spec, np.eye(a1.shape[0]))
    return FreeSumModel(a1, a2, mu1, mu2)


def _emit(cfg, payload, csv_rows=None, csv_header=None):
    """Write the artifact to --out or stdout in the configured format."""
    if cfg.fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf)
        if csv_header:
            writer.writerow(csv_header)
        for row in csv_rows or []:
            writer.writerow(row)
        text = buf.getvalue()
    else:
        text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    if cfg.out:
        Path(cfg.out).write_text(text)
    else:
        sys.stdout.write(text)


def _strict_residual_failures(report):
    bad = []
    n = report.n
    for key, limit in STRICT_LIMITS.items():
        if key in report.residuals and report.residuals[key] > limit * n:
            bad.append((key, report.residuals[key], limit * n))
    return bad


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def _cmd_linearize(cfg):
    if not cfg.poly:
        raise SchemaError("linearize requires --poly")
    p = parse_poly(cfg.poly)
    pencil, cert = linearize(p)
    if not verify_certificate(p, cert):
        print("internal error: constructed certificate failed verification", file=sys.stderr)
        return EXIT_INVARIANT
    payload = pencil.to_json_dict()
    payload["certificate"] = cert.to_json_dict()
    payload["verified"] = True
    _emit(cfg, payload)
    return EXIT_OK


def _cmd_convolve(cfg):
    model = _build_model(cfg)
    xs = _grid_points(cfg)
    data = sum_density(model, xs, y_eval=cfg.y_eval, tol=cfg.tol)
    if cfg.strict and np.any(data[:, 1] < -1e-8):
        return EXIT_STRICT
    rows = [(f"{x:.12g}", f"{d:.12g}") for x, d in data]
    payload = {"grid": [float(x) for x in data[:, 0]],
               "density": [float(d) for d in data[:, 1]],
               "y_eval": cfg.y_eval}
    _emit(cfg, payload, csv_rows=rows, csv_header=("x", "density"))
    return EXIT_OK


def _cmd_decompose(cfg):
    model = _build_model(cfg)
    b = _parse_matrix(cfg.b_spec, np.zeros((model.n, model.n)))
    report = atoms_mod.decompose_atom(model, b, y_ladder=_ladder(cfg), tol=cfg.tol)
    _emit(cfg, report.to_json_dict())
    if cfg.strict and _strict_residual_failures(report):
        return EXIT_STRICT
    return EXIT_OK


def _cmd_atom_scan(cfg):
    model = _build_model(cfg)
    if model.n != 1:
        raise SchemaError("atom-scan expects the scalar case (1x1 coefficients)")
    cands = atoms_mod.sum_atom_candidates(model.mu1, model.mu2)
    locations = [c[0] for c in cands] + [float(x) for x in cfg.candidates]
    results = []
    for loc, predicted in cands + [(float(x), None) for x in cfg.candidates]:
        E, diag = atoms_mod.boundary_emass(model, np.array([[loc]]),
                                           y_ladder=_ladder(cfg), tol=cfg.tol)
        mass = float(E[0, 0].real)
        entry = {"location": loc, "predicted_mass": predicted, "measured_mass": mass}
        floor = 3.0 * diag.get("extrapolation_error", 0.0)
        if atoms_mod.is_invertible_expectation(E, floor=floor):
            rep = atoms_mod.decompose_atom(model, np.array([[loc]]),
                                           y_ladder=_ladder(cfg), tol=cfg.tol)
            entry["decomposition"] = rep.to_json_dict()
        results.append(entry)
    _emit(cfg, {"candidates": results, "locations_probed": locations})
    return EXIT_OK


def _cmd_eigtest(cfg):
    if not cfg.poly:
        raise SchemaError("eigtest requires --poly")
    p = parse_poly(cfg.poly)
    mu1 = _load_measure(cfg.mu1_path)
    mu2 = _load_measure(cfg.mu2_path)
    report = atoms_mod.eigenvalue_test(p, cfg.lam, mu1, mu2,
                                       y_ladder=_ladder(cfg), tol=cfg.tol)
    _emit(cfg, report.to_json_dict())
    if cfg.strict:
        if _strict_residual_failures(report):
            return EXIT_STRICT
        reg = report.regularization
        if reg is not None and reg.offset_distance > 1e-2:
            return EXIT_STRICT
    return EXIT_OK


def _oracle_spec(cfg, mu1, mu2):
    return rmt.EnsembleSpec(N=cfg.N, trials=cfg.trials, seed=cfg.seed, mu1=mu1, mu2=mu2)


def _cmd_oracle(cfg):
    mu1 = _load_measure(cfg.mu1_path)
    mu2 = _load_measure(cfg.mu2_path)
    spec = _oracle_spec(cfg, mu1, mu2)
    if cfg.poly:
        p = parse_poly(cfg.poly)
        rep = rmt.oracle_report(spec, poly=p, lam=cfg.lam,
                                locations=[cfg.lam] + [float(x) for x in cfg.candidates],
                                bins=cfg.bins, epsilon=cfg.epsilon, workers=cfg.workers)
    else:
        a1 = _parse_matrix(cfg.a1_spec, np.eye(1))
        a2 = _parse_matrix(cfg.a2_spec, np.eye(a1.shape[0]))
        model = FreeSumModel(a1, a2, mu1, mu2)
        b = _parse_matrix(cfg.b_spec, None)
        locations = [float(x) for x in cfg.candidates] or None
        rep = rmt.oracle_report(spec, model=model, b=b, locations=locations,
                                bins=cfg.bins, epsilon=cfg.epsilon, workers=cfg.workers)
    centers = 0.5 * (rep.bin_edges[:-1] + rep.bin_edges[1:])
    rows = [
        (f"{lo:.12g}", f"{hi:.12g}", f"{cm:.12g}", f"{cs:.12g}")
        for lo, hi, cm, cs in zip(rep.bin_edges[:-1], rep.bin_edges[1:],
                                  rep.counts_mean, rep.counts_std)
    ]
    _emit(cfg, rep.to_json_dict(), csv_rows=rows,
          csv_header=("bin_left", "bin_right", "count_mean", "count_std"))
    return EXIT_OK


def _cmd_compare(cfg):
    if not cfg.poly:
        raise SchemaError("compare requires --poly")
    p = parse_poly(cfg.poly)
    mu1 = _load_measure(cfg.mu1_path)
    mu2 = _load_measure(cfg.mu2_path)
    report = atoms_mod.eigenvalue_test(p, cfg.lam, mu1, mu2,
                                       y_ladder=_ladder(cfg), tol=cfg.tol)
    pipeline_mass = report.diagnostics["poly_kernel_trace"]
    spec = _oracle_spec(cfg, mu1, mu2)
    eps = cfg.epsilon if cfg.epsilon is not None else 1e-7
    orep = rmt.oracle_report(spec, poly=p, lam=cfg.lam, locations=[cfg.lam],
                             bins=cfg.bins, epsilon=eps, workers=cfg.workers)
    oracle_mass, se = orep.masses[float(cfg.lam)]
    tolerance = 2.0 / cfg.N + 3.0 * se
    agree = abs(pipeline_mass - oracle_mass) <= tolerance
    payload = {
        "lambda": cfg.lam,
        "pipeline_mass": pipeline_mass,
        "oracle_mass": oracle_mass,
        "oracle_stderr": se,
        "tolerance": tolerance,
        "agree": bool(agree),
        "epsilon": eps,
        "N": cfg.N,
        "trials": cfg.trials,
    }
    _emit(cfg, payload)
    if cfg.strict and not agree:
        return EXIT_STRICT
    return EXIT_OK


_COMMANDS = {
    "linearize": _cmd_linearize,
    "convolve": _cmd_convolve,
    "decompose": _cmd_decompose,
    "atom-scan": _cmd_atom_scan,
    "eigtest": _cmd_eigtest,
    "oracle": _cmd_oracle,
    "compare": _cmd_compare,
}


def run(config: RunConfig) -> int:
    """Execute one command; returns the exit status, writing artifacts."""
    handler = _COMMANDS.get(config.command)
    if handler is None:
        raise SchemaError(f"unknown command {config.command!r}")
    return handler(config)


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="freeatoms",
        description="spectral distributions and atoms of free sums and polynomials",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(sp, measures=True):
        sp.add_argument("--tol", type=float,
                        default=float(os.environ.get("FREEATOMS_TOL", 1e-12)))
        sp.add_argument("--y0", type=float, default=0.1)
        sp.add_argument("--ladder-depth", type=int, default=16)
        sp.add_argument("--seed", type=int,
                        default=int(os.environ.get("FREEATOMS_SEED", 0)))
        sp.add_argument("--out", default=None)
        sp.add_argument("--format", choices=("json", "csv"), default="json")
        sp.add_argument("--strict", action="store_true")
        sp.add_argument("--workers", type=int, default=1)
        if measures:
            sp.add_argument("--mu1", required=True)
            sp.add_argument("--mu2", required=True)

    sp = sub.add_parser("linearize", help="linearize a selfadjoint polynomial")
    common(sp, measures=False)
    sp.add_argument("--poly", required=True)

    sp = sub.add_parser("convolve", help="density of the free sum on a grid")
    common(sp)
    sp.add_argument("--grid", default="-3:3:201")
    sp.add_argument("--y-eval", type=float, default=1e-4)
    sp.add_argument("--a1", default=None)
    sp.add_argument("--a2", default=None)

    sp = sub.add_parser("decompose", help="atom decomposition at a location")
    common(sp)
    sp.add_argument("--b", default=None)
    sp.add_argument("--a1", default=None)
    sp.add_argument("--a2", default=None)

    sp = sub.add_parser("atom-scan", help="scan scalar atom candidates")
    common(sp)
    sp.add_argument("--candidates", default="")

    sp = sub.add_parser("eigtest", help="kernel trace of lambda - p(X1, X2)")
    common(sp)
    sp.add_argument("--poly", required=True)
    sp.add_argument("--lambda", dest="lam", type=float, default=0.0)

    sp = sub.add_parser("oracle", help="Monte Carlo spectral report")
    common(sp)
    sp.add_argument("--poly", default=None)
    sp.add_argument("--lambda", dest="lam", type=float, default=0.0)
    sp.add_argument("--a1", default=None)
    sp.add_argument("--a2", default=None)
    sp.add_argument("--b", default=None)
    sp.add_argument("--size", type=int, default=2000)
    sp.add_argument("--trials", type=int, default=8)
    sp.add_argument("--bins", type=int, default=201)
    sp.add_argument("--epsilon", type=float, default=None)
    sp.add_argument("--candidates", default="")

    sp = sub.add_parser("compare", help="pipeline vs oracle discrepancy table")
    common(sp)
    sp.add_argument("--poly", required=True)
    sp.add_argument("--lambda", dest="lam", type=float, default=0.0)
    sp.add_argument("--size", type=int, default=2000)
    sp.add_argument("--trials", type=int, default=8)
    sp.add_argument("--bins", type=int, default=201)
    sp.add_argument("--epsilon", type=float, default=None)
    return parser


def _parse_grid(text):
    try:
        lo, hi, pts = text.split(":")
        return (float(lo), float(hi), int(pts))
    except ValueError as exc:
        raise SchemaError(f"bad grid {text!r}, expected min:max:points") from exc


def _config_from_args(args) -> RunConfig:
    candidates = []
    if getattr(args, "candidates", ""):
        candidates = [float(x) for x in str(args.candidates).split(",") if x.strip()]
    return RunConfig(
        command=args.command,
        tol=args.tol,
        y0=args.y0,
        ladder_depth=args.ladder_depth,
        grid=_parse_grid(getattr(args, "grid", "-3:3:201")),
        seed=args.seed,
        N=getattr(args, "size", 2000),
        trials=getattr(args, "trials", 8),
        epsilon=getattr(args, "epsilon", None),
        workers=args.workers,
        strict=args.strict,
        out=args.out,
        fmt=args.format,
        mu1_path=getattr(args, "mu1", None),
        mu2_path=getattr(args, "mu2", None),
        poly=getattr(args, "poly", None),
        lam=getattr(args, "lam", 0.0),
        b_spec=getattr(args, "b", None),
        a1_spec=getattr(args, "a1", None),
        a2_spec=getattr(args, "a2", None),
        y_eval=getattr(args, "y_eval", 1e-4),
        candidates=candidates,
        bins=getattr(args, "bins", 201),
    )


# flags taking exactly one value that may begin with '-' (grids, inline
# matrices, candidate lists); merged to --flag=value so argparse does not
# mistake the value for an option
_VALUE_FLAGS = ("--grid", "--candidates", "--b", "--a1", "--a2")


def _normalize_argv(argv):
    out = []
    i = 0
    while i < len(argv):
        tok = argv[i]
        if tok in _VALUE_FLAGS and i + 1 < len(argv):
            out.append(f"{tok}={argv[i + 1]}")
            i += 2
        else:
            out.append(tok)
            i += 1
    return out


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(_normalize_argv(sys.argv[1:] if argv is None else list(argv)))
    try:
        config = _config_from_args(args)
        code = run(config)
    except SchemaError as exc:
        print(f"schema error: {exc}", file=sys.stderr)
        code = EXIT_SCHEMA
    except ValueError as exc:
        # bad polynomial text, malformed numbers and similar input trouble
        print(f"schema error: {exc}", file=sys.stderr)
        code = EXIT_SCHEMA
    except (ConvergenceError,) as exc:
        diag = {"error": str(exc), "details": getattr(exc, "details", {})}
        print(json.dumps(diag), file=sys.stderr)
        code = EXIT_NOCONV
    except PreconditionError as exc:
        print(f"precondition violated: {exc}", file=sys.stderr)
        code = EXIT_SCHEMA
    except FreeAtomsError as exc:
        print(f"internal invariant breach: {exc}", file=sys.stderr)
        code = EXIT_INVARIANT
    if argv is None:
        sys.exit(code)
    return code
