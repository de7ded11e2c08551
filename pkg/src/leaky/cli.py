"""Command-line front end: ``leaky <group> <command> [options]``.

Tables go out as CSV with a one-line ``# leaky-csv v1 ...`` header comment;
reports go out as JSON. Errors print a JSON object on stderr and exit with
2 (configuration), 3 (numerical failure) or 4 (truncation-incomplete result
under --strict).
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import counting, quasimode, verify
from .domain import PRESETS, DomainError, LeakyDomain, domain_from_config, preset_config
from .mollifier import Mollifier
from .specfun import QuadratureError, SeriesError, bessel_j1

CSV_VERSION = "v1"
EXIT_CONFIG, EXIT_NUMERIC, EXIT_STRICT = 2, 3, 4

NUMERICAL_ERRORS = (QuadratureError, SeriesError, counting.WeylError, counting.PoissonMismatch,
                    verify.SolverError, verify.CompletenessError, verify.SpectrumRangeError,
                    ArithmeticError, np.linalg.LinAlgError)


class ConfigError(ValueError):
    pass


class StrictError(RuntimeError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


@dataclass
class RunConfig:
    """Everything a subcommand needs besides its own flags."""
    family: dict
    mollifier_eps: float = 0.1
    quadrature_tol: float = 1e-10
    series_tol: float = 1e-8
    output: Optional[str] = None
    seed: int = 0
    strict: bool = False
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        for name in ("quadrature_tol", "series_tol"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name.replace('_', '-')} must be positive")

    def domain(self) -> LeakyDomain:
        if not self.family:
            raise ConfigError("give --preset or --family")
        return domain_from_config(self.family)

    def mollifier(self) -> Mollifier:
        return Mollifier(self.mollifier_eps)


# -- argument handling -------------------------------------------------------

def _common(p):
    g = p.add_argument_group("domain")
    g.add_argument("--preset", choices=sorted(PRESETS), help="named parameter family")
    g.add_argument("--family", help="family JSON (inline or a file path); overrides --preset")
    g.add_argument("-I", "--truncation", type=int, help="number of tail rectangles")
    for flag in ("sigma", "rho", "beta", "alpha-prime", "gamma", "mu-power"):
        g.add_argument(f"--{flag}", type=float)
    g.add_argument("--head-a1", type=float, help="head rectangle width")
    g.add_argument("--head-delta0", type=float, help="head rectangle height")
    g = p.add_argument_group("numerics")
    g.add_argument("--mollifier-eps", type=float, default=0.1)
    g.add_argument("--quadrature-tol", type=float, default=1e-10)
    g.add_argument("--tol", type=float, default=1e-8, help="Bessel-series / Poisson tolerance")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("-o", "--output", help="write here instead of stdout")
    g.add_argument("--strict", action="store_true", help="fail (exit 4) on truncation-incomplete results")


def _solver_flags(p):
    p.add_argument("--hx", type=float, default=1 / 32, help="mesh size")
    p.add_argument("--trunc-i", type=int, help="place the wall at a_{i+1} (default: all rectangles)")
    p.add_argument("--num-eigs", type=int, default=200)
    p.add_argument("--no-head", action="store_true", help="drop the head rectangle")


def build_parser() -> argparse.ArgumentParser:
    top = _Parser(prog="leaky", description="Spectral experiments on staircase leaky domains.")
    groups = top.add_subparsers(dest="group", required=True, parser_class=_Parser)

    def sub(group_parser, name, help_):
        p = group_parser.add_parser(name, help=help_)
        _common(p)
        return p

    dom = groups.add_parser("domain", help="build and summarize a domain").add_subparsers(dest="cmd", required=True, parser_class=_Parser)
    sub(dom, "build", "emit the domain summary as JSON")

    qm = groups.add_parser("quasimode", help="quasimode norms and discrepancies").add_subparsers(dest="cmd", required=True, parser_class=_Parser)
    p = sub(qm, "report", "one quasimode")
    p.add_argument("--index", required=True, type=quasimode.QuasimodeIndex.parse)
    p = sub(qm, "scan", "CSV over an index box")
    for flag in ("--i-max", "--m-max", "--n-max"):
        p.add_argument(flag, type=int, default=3)

    cnt = groups.add_parser("count", help="eigenvalue counts and cluster windows").add_subparsers(dest="cmd", required=True, parser_class=_Parser)
    p = sub(cnt, "scan", "exact counts against the Weyl asymptotic")
    p.add_argument("--lambda-min", type=float, default=1e2)
    p.add_argument("--lambda-max", type=float, default=1e4)
    p.add_argument("--points", type=int, default=50)
    p.add_argument("--geometric", dest="geometric", action="store_true", default=True)
    p.add_argument("--linear", dest="geometric", action="store_false")
    p = sub(cnt, "cluster", "lattice values in windows around mu_{i,1,1}")
    p.add_argument("--i-max", type=int, default=5)
    p.add_argument("--b", type=float, default=2.0, help="window half width in units of the discrepancy")

    p = groups.add_parser("poisson", help="check the Poisson-summation identity at one ratio")
    _common(p)
    p.add_argument("--ratio", type=float, required=True, help="lambda / mu_i")

    p = groups.add_parser("census", help="quasimode census over a lambda grid")
    _common(p)
    p.add_argument("--kind", choices=("BB", "bb"), default="BB")
    p.add_argument("--C1", type=float, help="cap on m xi_i (default 2 min xi)")
    p.add_argument("--M0", type=int, default=1)
    p.add_argument("--lambda-min", type=float, default=1e3)
    p.add_argument("--lambda-max", type=float, default=1e6)
    p.add_argument("--points", type=int, default=50)

    ver = groups.add_parser("verify", help="finite-difference eigenvalue checks").add_subparsers(dest="cmd", required=True, parser_class=_Parser)
    p = sub(ver, "solve", "finite-difference Dirichlet spectrum")
    _solver_flags(p)
    for name in ("ring", "leak"):
        p = sub(ver, name, f"{name} inequality for one quasimode")
        _solver_flags(p)
        p.add_argument("--index", required=True, type=quasimode.QuasimodeIndex.parse)
        p.add_argument("--b", type=float, default=2.0)
        p.add_argument("--k-max", type=int, default=4)
        if name == "leak":
            p.add_argument("--xcut", default="a1", help="cutoff x, or a<k> for the k-th step position")

    sf = groups.add_parser("specfun", help="special functions").add_subparsers(dest="cmd", required=True, parser_class=_Parser)
    p = sf.add_parser("j1", help="evaluate J1")
    p.add_argument("x", type=float, nargs="+")
    p.add_argument("-o", "--output")
    return top


def _family(args) -> dict:
    if args.family:
        text = args.family
        path = Path(text)
        if not text.lstrip().startswith("{") and path.exists():
            text = path.read_text(encoding="utf-8")
        try:
            cfg = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"family JSON: {exc}") from exc
        if not isinstance(cfg, dict):
            raise ConfigError("family JSON must be an object")
    elif args.preset:
        cfg = preset_config(args.preset)
    elif args.group == "poisson":
        # the identity is checked at mu = pi^2 and needs no domain
        return {}
    else:
        raise ConfigError("give --preset or --family")
    overrides = dict(sigma=args.sigma, rho=args.rho, beta=args.beta, alpha_prime=args.alpha_prime,
                     gamma=args.gamma, mu_power=args.mu_power, truncation=args.truncation)
    cfg.update({k: v for k, v in overrides.items() if v is not None})
    head = dict(cfg.get("head") or {})
    if args.head_a1 is not None:
        head["a1"] = args.head_a1
    if args.head_delta0 is not None:
        head["delta0"] = args.head_delta0
    if head:
        cfg["head"] = head
    return cfg


def make_config(args) -> RunConfig:
    return RunConfig(family=_family(args), mollifier_eps=args.mollifier_eps, quadrature_tol=args.quadrature_tol,
                     series_tol=args.tol, output=args.output, seed=args.seed, strict=args.strict)


# -- emission ----------------------------------------------------------------

def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return v


def csv_text(rows, columns, label: str) -> str:
    buf = io.StringIO()
    buf.write(f"# leaky-csv {CSV_VERSION} {label}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_fmt(row[c]) for c in columns])
    return buf.getvalue()


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def json_text(obj) -> str:
    return json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n"


def _emit(text: str, output: Optional[str], stdout) -> None:
    if output:
        try:
            Path(output).write_text(text, encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot write {output}: {exc}") from exc
    else:
        stdout.write(text)


# -- commands ----------------------------------------------------------------

def cmd_domain_build(cfg: RunConfig, args):
    return json_text(cfg.domain().to_dict())


def cmd_quasimode_report(cfg: RunConfig, args):
    rep = quasimode.report(cfg.domain(), cfg.mollifier(), args.index, cfg.quadrature_tol)
    out = rep.as_row()
    out.update(support=list(rep.support), xi=rep.xi, error_estimate=rep.error_estimate, eps=cfg.mollifier_eps)
    return json_text(out)


QUASIMODE_COLUMNS = ["i", "m", "n", "mu", "norm", "residual", "discrepancy", "disc_over_m_xi"]


def cmd_quasimode_scan(cfg: RunConfig, args):
    reps = quasimode.scan(cfg.domain(), cfg.mollifier(), args.i_max, args.m_max, args.n_max, cfg.quadrature_tol)
    return csv_text((r.as_row() for r in reps), QUASIMODE_COLUMNS, f"quasimode scan eps={cfg.mollifier_eps}")


SCAN_COLUMNS = ["lambda", "N_D", "N_N", "weyl_leading", "length_term", "bessel_term", "remainder",
                "remainder_over_sqrt_lambda", "truncation_flag"]


def cmd_count_scan(cfg: RunConfig, args):
    dom = cfg.domain()
    grid = counting.lambda_grid(args.lambda_min, args.lambda_max, args.points, args.geometric)
    result = counting.scan(dom, grid, tol=cfg.series_tol)
    if cfg.strict and result.truncation_flag.any():
        raise StrictError(f"lambda above mu_I = {dom.mu[-1]:.6g} at {int(result.truncation_flag.sum())} grid points")
    rows = []
    for r in result.rows():
        r["lambda"] = r.pop("lambda_")
        rows.append(r)
    return csv_text(rows, SCAN_COLUMNS, "count scan")


def cmd_count_cluster(cfg: RunConfig, args):
    dom = cfg.domain()
    mol = cfg.mollifier()
    i_max = min(args.i_max, dom.truncation)
    widths = [args.b * quasimode.discrepancy(dom, mol, (i, 1, 1), cfg.quadrature_tol) for i in range(1, i_max + 1)]
    rows = counting.cluster_table(dom, widths)
    return csv_text(rows, ["i", "center", "half_width", "count"], f"count cluster b={args.b}")


def cmd_poisson(cfg: RunConfig, args):
    if not args.ratio >= 1:
        raise ConfigError("ratio lambda/mu_i must be at least 1")
    mu = math.pi ** 2
    check = counting.poisson_check(mu, args.ratio * mu, tol=cfg.series_tol)
    return json_text(dict(ratio=args.ratio, lhs=check.lhs, rhs=check.rhs, difference=check.difference,
                          series_error=check.series_error, tol=cfg.series_tol))


def cmd_census(cfg: RunConfig, args):
    dom = cfg.domain()
    C1 = args.C1 if args.C1 is not None else 2.0 * float(dom.xi.min())
    grid = counting.lambda_grid(args.lambda_min, args.lambda_max, args.points, True)
    if cfg.strict and any(counting.truncation_incomplete(dom, lam) for lam in grid):
        raise StrictError(f"census grid exceeds mu_I = {dom.mu[-1]:.6g}")
    rows = []
    for lam in grid:
        rows.append({"lambda": float(lam),
                     "count": counting.quasimode_census(dom, lam, args.kind, C1=C1, M0=args.M0),
                     "rectangles_below": counting.rectangles_below(dom, lam),
                     "truncation_flag": int(counting.truncation_incomplete(dom, lam))})
    label = f"census kind={args.kind} " + (f"C1={C1!r}" if args.kind == "BB" else f"M0={args.M0}")
    return csv_text(rows, ["lambda", "count", "rectangles_below", "truncation_flag"], label)


def _solve(cfg: RunConfig, args, dom):
    trunc_x = None
    if args.trunc_i is not None:
        if not 1 <= args.trunc_i <= dom.truncation:
            raise ConfigError(f"--trunc-i must lie in 1..{dom.truncation}")
        trunc_x = float(dom.a[args.trunc_i])
    return verify.solve(dom, args.hx, args.num_eigs, truncation_x=trunc_x, include_head=not args.no_head,
                        seed=cfg.seed)


def _spectrum_summary(spec: verify.GridSpectrum) -> dict:
    return dict(mesh_size=spec.mesh_size, truncation_x=spec.truncation_x, x_start=spec.x_start,
                unknowns=spec.num_unknowns, eigenvalues=spec.eigenvalues, budgets=spec.eigenvalue_budget,
                gram_defect=spec.gram_defect())


def cmd_verify_solve(cfg: RunConfig, args):
    return json_text(_spectrum_summary(_solve(cfg, args, cfg.domain())))


def cmd_verify_ring(cfg: RunConfig, args):
    dom = cfg.domain()
    spec = _solve(cfg, args, dom)
    rep = verify.ring_inequality(spec, dom, cfg.mollifier(), args.index,
                                 verify.ClusterWindowConfig(args.b, args.k_max), quadrature_tol=cfg.quadrature_tol)
    out = rep.to_dict()
    out.update(mesh_size=spec.mesh_size, unknowns=spec.num_unknowns, k_exceeds_k_max=rep.k > args.k_max)
    return json_text(out)


def _xcut(text: str, dom: LeakyDomain) -> float:
    if text.startswith("a"):
        try:
            k = int(text[1:])
        except ValueError as exc:
            raise ConfigError(f"bad --xcut {text!r}") from exc
        if not 1 <= k <= dom.truncation + 1:
            raise ConfigError(f"--xcut a{k} outside a1..a{dom.truncation + 1}")
        return float(dom.a[k - 1])
    try:
        return float(text)
    except ValueError as exc:
        raise ConfigError(f"bad --xcut {text!r}") from exc


def cmd_verify_leak(cfg: RunConfig, args):
    dom = cfg.domain()
    spec = _solve(cfg, args, dom)
    rep = verify.leak_witness(spec, dom, cfg.mollifier(), args.index, verify.ClusterWindowConfig(args.b, args.k_max),
                              x_cut=_xcut(args.xcut, dom), quadrature_tol=cfg.quadrature_tol)
    out = rep.to_dict()
    out.update(mesh_size=spec.mesh_size, unknowns=spec.num_unknowns, k_exceeds_k_max=rep.k > args.k_max)
    return json_text(out)


COMMANDS = {
    ("domain", "build"): cmd_domain_build,
    ("quasimode", "report"): cmd_quasimode_report,
    ("quasimode", "scan"): cmd_quasimode_scan,
    ("count", "scan"): cmd_count_scan,
    ("count", "cluster"): cmd_count_cluster,
    ("poisson", None): cmd_poisson,
    ("census", None): cmd_census,
    ("verify", "solve"): cmd_verify_solve,
    ("verify", "ring"): cmd_verify_ring,
    ("verify", "leak"): cmd_verify_leak,
}


def _fail(stderr, code: int, kind: str, exc: BaseException) -> int:
    stderr.write(json.dumps({"error": kind, "type": type(exc).__name__, "message": str(exc)}) + "\n")
    return code


def run(argv=None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    try:
        args = build_parser().parse_args(argv)
        if args.group == "specfun":
            vals = np.atleast_1d(bessel_j1(np.array(args.x)))
            _emit(json_text(dict(x=args.x, j1=vals)), args.output, stdout)
            return 0
        cfg = make_config(args)
        text = COMMANDS[(args.group, getattr(args, "cmd", None))](cfg, args)
        _emit(text, cfg.output, stdout)
        return 0
    except StrictError as exc:
        return _fail(stderr, EXIT_STRICT, "truncation", exc)
    except NUMERICAL_ERRORS as exc:
        return _fail(stderr, EXIT_NUMERIC, "numerical", exc)
    except (ConfigError, DomainError, ValueError, TypeError, OSError) as exc:
        return _fail(stderr, EXIT_CONFIG, "config", exc)


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
