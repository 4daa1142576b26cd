"""Command-line entry point: ``dsrn <command> [options]``.

Exit codes: 0 ok, 1 kernel-test thresholds missed, 2 parameters not
admissible, 3 solver did not converge, 64 usage error.
"""

from __future__ import annotations

import argparse
import csv
import io
import math
import sys
import warnings
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .background import (
    CHARGE_BOUND,
    Background,
    BlackHoleParams,
    PhysicalConstants,
    geometrize,
    solve_horizons_kn,
)
from .errors import ConditionsViolated, ConsistencyError, NoConvergence, NotAdmissible, TruncationError
from .modes import ModeQuery, find_growing_mode
from .reduction import (
    check_conditions,
    im_sigma_plus_leading,
    physical_scan,
    quadratic_coeffs,
    sigma_plus_series,
    solve_mode_quadratic,
)
from .spectral import assemble_pencil, kernel_vector, spectrum

EXIT_OK, EXIT_THRESHOLD, EXIT_NOT_ADMISSIBLE, EXIT_NO_CONVERGENCE, EXIT_USAGE = 0, 1, 2, 3, 64

UNITS = {
    "M": "length", "Q": "length", "Lambda": "1/length^2",
    "horizons": "length", "r_frak": "length", "c_sq": "dimensionless", "eta0": "length",
    "s": "dimensionless", "m0_sq": "dimensionless", "sigma": "1/length",
    "energy0": "geometrized energy", "growth_rate": "1/length",
    "C1_margin": "length^2", "C2_margin": "length^4",
    "system": "geometrized (G = c = 1); lengths in the unit of M, metres with --physical",
}

SCAN_COLUMNS = [
    "index", "s", "m0_sq", "a", "sigma_series_re", "sigma_series_im",
    "sigma_num_re", "sigma_num_im", "im_over_s2", "im_leading",
    "C1_margin", "C2_margin", "m0_max_sq", "r_minus_a", "r_plus_a", "status", "error",
]

SCAN_EPILOG = "CSV columns (header always written):\n  " + ", ".join(SCAN_COLUMNS)


class UsageError(Exception):
    pass


class Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        sys.exit(EXIT_USAGE)


# ---------------------------------------------------------------------------
# output


def _fmt_float(x: float) -> str:
    if math.isnan(x) or math.isinf(x):
        return "null"
    return format(x, ".17g")


def dumps(obj, indent: int = 2, _level: int = 0) -> str:
    """Deterministic JSON: fixed key order, floats with 17 significant digits."""
    pad = " " * (indent * (_level + 1))
    end = " " * (indent * _level)
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if obj is None:
        return "null"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _fmt_float(float(obj))
    if isinstance(obj, (complex, np.complexfloating)):
        return dumps({"re": obj.real, "im": obj.imag}, indent, _level)
    if isinstance(obj, str):
        import json
        return json.dumps(obj)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f'{pad}{dumps(str(k))}: {dumps(v, indent, _level + 1)}' for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        if len(obj) == 0:
            return "[]"
        items = [pad + dumps(v, indent, _level + 1) for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def _flatten(obj, prefix=""):
    if isinstance(obj, dict):
        for k, v in obj.items():
            yield from _flatten(v, f"{prefix}{k}.")
    elif isinstance(obj, (list, tuple)):
        for i, v in enumerate(obj):
            yield from _flatten(v, f"{prefix}{i}.")
    elif isinstance(obj, complex):
        yield prefix + "re", _fmt_float(obj.real)
        yield prefix + "im", _fmt_float(obj.imag)
    elif isinstance(obj, float):
        yield prefix[:-1], _fmt_float(obj)
    else:
        yield prefix[:-1], "" if obj is None else str(obj)


def emit(report: dict, args) -> None:
    if args.format == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["key", "value"])
        w.writerows(_flatten(report))
        text = buf.getvalue()
    else:
        text = dumps(report) + "\n"
    _write(text, args.out)


def _write(text: str, out) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _meta(command: str, args) -> dict:
    return {"program": "dsrn", "version": __version__, "command": command,
            "units": UNITS if not getattr(args, "physical", False)
            else {**UNITS, "system": "SI-derived geometrized lengths (metres)"}}


# ---------------------------------------------------------------------------
# parameter handling


def _params(args) -> BlackHoleParams:
    if args.physical:
        if args.mass_kg is None:
            raise UsageError("--physical needs --mass-kg")
        consts = PhysicalConstants(Lambda_SI=args.Lambda_SI * args.lambda_factor)
        geo = geometrize(consts, args.mass_kg, args.charge_coulomb or 0.0)
        if args.charge_coulomb is None:
            return BlackHoleParams(geo.M, args.charge_frac * CHARGE_BOUND * geo.M, geo.Lam)
        return geo
    return BlackHoleParams(args.M, args.Q, args.Lambda)


def _background(args) -> Background:
    return Background.from_params(_params(args), args.eta0)


def _field(args, bg: Background):
    """(s, m0_sq) from exactly one of the (q, m) and (s, m0) families."""
    has_qm = args.q is not None or args.m is not None
    has_sm = args.s is not None or args.m0 is not None
    if has_qm and has_sm:
        raise UsageError("give either --q/--m or --s/--m0, not both")
    if has_qm:
        q = args.q if args.q is not None else 0.0
        q_field = ModeQuery.from_charge(bg, q, args.m or 0.0, s_max=math.inf)
        return q_field.s, q_field.m0_sq
    s = args.s if args.s is not None else 0.01
    m0 = args.m0 if args.m0 is not None else 0.0
    return s, m0 * m0


def _background_block(bg: Background) -> dict:
    p, h = bg.params, bg.horizons
    return {"M": p.M, "Q": p.Q, "Lambda": p.Lam,
            "horizons": {"r_n": h.r_n, "r_c": h.r_c, "r_minus": h.r_minus, "r_plus": h.r_plus},
            "r_frak": bg.r_frak, "c_sq": bg.c_sq, "eta0": bg.eta0}


# ---------------------------------------------------------------------------
# commands


def cmd_horizons(args) -> int:
    bg = _background(args)
    p, h = bg.params, bg.horizons
    roots = np.array(h.as_tuple())
    e1 = roots.sum()
    e2 = sum(roots[i] * roots[j] for i in range(4) for j in range(i + 1, 4))
    e4 = roots.prod()
    report = {"meta": _meta("horizons", args), **_background_block(bg),
              "vieta_residuals": {"sum": e1, "pair_sum_plus_3_over_Lambda": e2 + 3 / p.Lam,
                                  "product_plus_3Q2_over_Lambda": e4 + 3 * p.Q**2 / p.Lam},
              "photon_sphere": bg.photon_sphere}
    emit(report, args)
    return EXIT_OK


def _perturbative_block(bg, s, m0_sq, s_max):
    coeffs, q = quadratic_coeffs(bg, s, m0_sq, s_max=s_max)
    roots = solve_mode_quadratic(q)
    rep = check_conditions(bg, m0_sq)
    return {
        "A": q.A, "B": q.B, "sigma_plus": roots.sigma_plus, "sigma_minus": roots.sigma_minus,
        "sigma_plus_series": sigma_plus_series(bg, s, m0_sq),
        "im_leading": im_sigma_plus_leading(bg, m0_sq),
        "coefficients": {"sigma_tilde": coeffs.sigma_tilde, "beta": coeffs.beta, "K": coeffs.K,
                         "a1": coeffs.a1, "a2": coeffs.a2, "b1": coeffs.b1, "b2": coeffs.b2,
                         "bracket": coeffs.bracket},
        "conditions": {"C1": rep.C1, "C1_margin": rep.C1_margin, "C2": rep.C2,
                       "C2_margin": rep.C2_margin, "m0_max_sq": rep.m0_max_sq, "Cm": rep.Cm},
    }


def cmd_mode(args) -> int:
    bg = _background(args)
    s, m0_sq = _field(args, bg)
    if abs(s) > args.s_max:
        raise UsageError(f"|s| = {abs(s)} exceeds --s-max {args.s_max}")
    want_pert = args.pipeline in ("perturbative", "both")
    want_spec = args.pipeline in ("spectral", "both")
    report = {"meta": _meta("mode", args), "background": _background_block(bg),
              "s": s, "m0_sq": m0_sq, "ell": args.ell}
    if want_pert:
        report["perturbative"] = _perturbative_block(bg, s, m0_sq, args.s_max)
    if want_spec:
        if args.ell == 0:
            with warnings.catch_warnings(record=True):
                warnings.simplefilter("always", ConditionsViolated)
                res = find_growing_mode(ModeQuery(bg, s, m0_sq, 0, s_max=args.s_max),
                                        N=args.N, N_verify=args.N_verify)
            report["spectral"] = {"sigma": res.sigma, "sigma_verify": res.sigma_verify,
                                  "residual": res.residual, "disc_ok": res.disc_ok,
                                  "energy0": res.energy0, "growth_rate": res.growth_rate,
                                  "warnings": res.warnings}
            if want_pert:
                ser = report["perturbative"]["sigma_plus_series"]
                report["comparison"] = [{"s": s, "sigma_num": res.sigma, "sigma_series": ser,
                                         "abs_diff": abs(res.sigma - ser)}]
        else:
            sp = spectrum(bg, args.ell, s, s * s * m0_sq, N_pair=(args.N, args.N_verify))
            conv = sorted((m.sigma for m in sp.converged_modes()), key=lambda z: -z.imag)
            report["spectral"] = {"converged_modes": conv,
                                  "max_imag": max((z.imag for z in conv), default=None),
                                  "all_decaying": all(z.imag < 0 for z in conv),
                                  "N_pair": list(sp.N_pair)}
    emit(report, args)
    return EXIT_OK


def _parse_grid(text):
    if text is None:
        return None
    return [float(x) for x in str(text).replace(",", " ").split()]


def _scan_row(task):
    idx, bg, s, m0_sq, a, N = task
    row = dict.fromkeys(SCAN_COLUMNS, "")
    row.update(index=idx, s=s, m0_sq=m0_sq, a=a)
    try:
        rep = check_conditions(bg, m0_sq)
        ser = sigma_plus_series(bg, s, m0_sq)
        lead = im_sigma_plus_leading(bg, m0_sq)
        row.update(sigma_series_re=ser.real, sigma_series_im=ser.imag, im_leading=lead,
                   C1_margin=rep.C1_margin, C2_margin=rep.C2_margin, m0_max_sq=rep.m0_max_sq)
        if a:
            rm_a, rp_a = solve_horizons_kn(bg.params, a)
            row.update(r_minus_a=rm_a, r_plus_a=rp_a)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", ConditionsViolated)
            res = find_growing_mode(ModeQuery(bg, s, m0_sq, 0, a=a, s_max=math.inf), N=N,
                                    N_verify=None, compute_energy=False, growth_s_threshold=0)
        row.update(sigma_num_re=res.sigma.real, sigma_num_im=res.sigma.imag,
                   im_over_s2=res.sigma.imag / (s * s) if s else math.nan, status="ok")
    except (NoConvergence, NotAdmissible, ValueError) as exc:
        row.update(status="failed", error=str(exc))
    return row


def cmd_scan(args) -> int:
    if args.s_logspace is not None:
        lo, hi, num = args.s_logspace
        if int(num) < 1:
            raise UsageError("empty s grid")
        s_vals = list(np.logspace(lo, hi, int(num)))
    else:
        s_vals = _parse_grid(args.s_list)
    if not s_vals:
        raise UsageError("empty s grid")
    m0_vals = _parse_grid(args.m0_sq_list) or [0.0]
    a_vals = _parse_grid(args.a_list) or [0.0]
    bg = _background(args)
    tasks = []
    for m0 in m0_vals:
        for a in a_vals:
            for s in s_vals:
                tasks.append((len(tasks), bg, float(s), float(m0), float(a), args.N))
    if args.workers > 1:
        with ProcessPoolExecutor(max_workers=args.workers) as pool:
            rows = list(pool.map(_scan_row, tasks))
    else:
        rows = [_scan_row(t) for t in tasks]

    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=SCAN_COLUMNS, lineterminator="\n")
    w.writeheader()
    for row in rows:
        w.writerow({k: _fmt_float(v) if isinstance(v, float) else v for k, v in row.items()})
    _write(buf.getvalue(), args.out)

    if args.emit_plot_data:
        prefix = Path(args.emit_plot_data)
        prefix.parent.mkdir(parents=True, exist_ok=True)
        for j, m0 in enumerate(m0_vals):
            for k, a in enumerate(a_vals):
                sel = [r for r in rows if r["m0_sq"] == m0 and r["a"] == a and r["status"] == "ok"]
                lines = [f"# s Im_sigma  (m0_sq={_fmt_float(m0)}, a={_fmt_float(a)})"]
                lines += [f"{_fmt_float(r['s'])} {_fmt_float(r['sigma_num_im'])}" for r in sel]
                Path(f"{prefix}_{j}_{k}.dat").write_text("\n".join(lines) + "\n")
    return EXIT_OK if any(r["status"] == "ok" for r in rows) else EXIT_NO_CONVERGENCE


def cmd_physical(args) -> int:
    consts = PhysicalConstants(G=args.G, c_light=args.c_light, eps0=args.eps0,
                               Lambda_SI=args.Lambda_SI * args.lambda_factor)
    summary = physical_scan(consts, args.n_mass, args.n_charge, args.mass_max_kg)
    report = {
        "meta": _meta("physical", args),
        "constants": {"G": consts.G, "c_light": consts.c_light, "eps0": consts.eps0,
                      "Lambda_SI": consts.Lambda_SI},
        "grid": {"n_mass": args.n_mass, "n_charge": args.n_charge, "mass_max_kg": args.mass_max_kg,
                 "admissible_points": summary.n_points, "excluded_points": len(summary.excluded)},
        "min_C2_margin_m4": summary.min_C2, "bound_C2_m4": summary.bound_C2,
        "C2": "PASS" if summary.pass_C2 else "FAIL", "argmin_C2": summary.argmin_C2,
        "min_C1_margin_m2": summary.min_C1, "bound_C1_m2": summary.bound_C1,
        "C1": "PASS" if summary.pass_C1 else "FAIL", "argmin_C1": summary.argmin_C1,
        "excluded_sample": summary.excluded[:5],
    }
    emit(report, args)
    return EXIT_OK


def cmd_kernel_test(args) -> int:
    bg = _background(args)
    rows = []
    for N in (args.N, args.N_verify):
        kr = kernel_vector(assemble_pencil(bg, args.ell, N=N))
        rows.append({"N": N, "sigma_min_rel": kr.sigma_min_rel,
                     "sigma_min_scaled": kr.sigma_min_scaled, "cosine_with_r": kr.cosine})
    if args.ell == 0:
        ok = all(r["sigma_min_rel"] <= args.kernel_tol and r["cosine_with_r"] >= 1 - 1e-6 for r in rows)
        criterion = f"sigma_min_rel <= {args.kernel_tol:g} and cosine >= 1 - 1e-6"
    else:
        a, b = rows[0]["sigma_min_scaled"], rows[1]["sigma_min_scaled"]
        ok = min(a, b) >= args.gap_tol and abs(a - b) <= 0.05 * max(a, b)
        criterion = f"sigma_min_scaled >= {args.gap_tol:g} and stable to 5% across N"
    report = {"meta": _meta("kernel-test", args), "ell": args.ell, "results": rows,
              "criterion": criterion, "status": "PASS" if ok else "FAIL"}
    emit(report, args)
    return EXIT_OK if ok else EXIT_THRESHOLD


# ---------------------------------------------------------------------------
# parser


def _common(p: argparse.ArgumentParser, geometry: bool = True):
    g = p.add_argument_group("output")
    g.add_argument("--format", choices=["json", "csv"], default="json")
    g.add_argument("--out", default=None, help="write to this file instead of stdout")
    g.add_argument("--config", default=None, help="file of 'key = value' lines; flags take precedence")
    if not geometry:
        return
    b = p.add_argument_group("background")
    b.add_argument("--M", type=float, default=1.0)
    b.add_argument("--Q", type=float, default=0.5)
    b.add_argument("--Lambda", type=float, default=0.01)
    b.add_argument("--eta0", type=float, default=None, help="extension half-width beyond the horizons")
    b.add_argument("--physical", action="store_true", help="take mass and charge in SI units")
    b.add_argument("--mass-kg", type=float, default=None)
    b.add_argument("--charge-frac", type=float, default=0.5,
                   help="charge as a fraction of 3M/(2 sqrt 2) (with --physical)")
    b.add_argument("--charge-coulomb", type=float, default=None)
    b.add_argument("--Lambda-SI", type=float, default=PhysicalConstants().Lambda_SI)
    b.add_argument("--lambda-factor", type=float, default=1.0)


def _fieldargs(p):
    f = p.add_argument_group("field")
    f.add_argument("--s", type=float, default=None, help="coupling s = qQ")
    f.add_argument("--m0", type=float, default=None, help="mass ratio m0 with m = |s| m0")
    f.add_argument("--q", type=float, default=None, help="field charge")
    f.add_argument("--m", type=float, default=None, help="field mass")
    f.add_argument("--ell", type=int, default=0)
    f.add_argument("--s-max", type=float, default=0.1)


def _solver(p, N=64, N_verify=96):
    p.add_argument("--N", type=int, default=N)
    p.add_argument("--N-verify", type=int, default=N_verify)


def build_parser() -> Parser:
    parser = Parser(prog="dsrn", description="Charged scalar resonances of de Sitter-Reissner-Nordstrom black holes.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=Parser)

    p = sub.add_parser("horizons", help="horizon radii and slicing data")
    _common(p)
    p.set_defaults(func=cmd_horizons)

    p = sub.add_parser("mode", help="locate the growing mode")
    _common(p)
    _fieldargs(p)
    _solver(p)
    g = p.add_mutually_exclusive_group()
    g.add_argument("--perturbative", dest="pipeline", action="store_const", const="perturbative")
    g.add_argument("--spectral", dest="pipeline", action="store_const", const="spectral")
    g.add_argument("--both", dest="pipeline", action="store_const", const="both")
    p.set_defaults(func=cmd_mode, pipeline="both")

    p = sub.add_parser("scan", help="sweep s (and optionally m0^2, a) into CSV",
                       epilog=SCAN_EPILOG, formatter_class=argparse.RawDescriptionHelpFormatter)
    _common(p)
    _solver(p, N_verify=0)
    p.add_argument("--s-list", default=None, help="comma or space separated couplings")
    p.add_argument("--s-logspace", nargs=3, type=float, metavar=("LO", "HI", "NUM"),
                   help="NUM couplings 10^LO .. 10^HI")
    p.add_argument("--m0-sq-list", default=None)
    p.add_argument("--a-list", default=None)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--emit-plot-data", default=None, metavar="PREFIX",
                   help="also write PREFIX_<m0 index>_<a index>.dat with columns s, Im sigma")
    p.set_defaults(func=cmd_scan, format="csv")

    p = sub.add_parser("physical", help="condition margins over a grid of astrophysical masses")
    _common(p, geometry=False)
    consts = PhysicalConstants()
    p.add_argument("--n-mass", type=int, default=100)
    p.add_argument("--n-charge", type=int, default=50)
    p.add_argument("--mass-max-kg", type=float, default=1.31e41)
    p.add_argument("--G", type=float, default=consts.G)
    p.add_argument("--c-light", type=float, default=consts.c_light)
    p.add_argument("--eps0", type=float, default=consts.eps0)
    p.add_argument("--Lambda-SI", type=float, default=consts.Lambda_SI)
    p.add_argument("--lambda-factor", type=float, default=1.0)
    p.set_defaults(func=cmd_physical)

    p = sub.add_parser("kernel-test", help="singular values of the stationary operator at zero frequency")
    _common(p)
    _solver(p)
    p.add_argument("--ell", type=int, default=0)
    p.add_argument("--kernel-tol", type=float, default=1e-8)
    p.add_argument("--gap-tol", type=float, default=1e-3)
    p.set_defaults(func=cmd_kernel_test)
    return parser


def read_config(path) -> dict:
    out = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected 'key = value'")
        k, v = (t.strip() for t in line.split("=", 1))
        out[k.replace("-", "_")] = v
    return out


def _apply_config(parser: Parser, argv) -> argparse.Namespace:
    args = parser.parse_args(argv)
    if not args.config:
        return args
    cfg = read_config(args.config)
    subparser = parser._subparsers._group_actions[0].choices[args.command]
    actions = {a.dest: a for a in subparser._actions}
    defaults = {}
    for k, v in cfg.items():
        if k not in actions:
            raise UsageError(f"unknown config key {k!r}")
        act = actions[k]
        if act.nargs == 0 or isinstance(act, (argparse._StoreTrueAction, argparse._StoreConstAction)):
            val = act.const if v.lower() in ("1", "true", "yes") else act.default
        elif act.nargs:
            val = [act.type(x) if act.type else x for x in v.split()]
        else:
            val = act.type(v) if act.type else v
        defaults[k] = val
    subparser.set_defaults(**defaults)
    return parser.parse_args(argv)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = _apply_config(parser, argv)
        if hasattr(args, "N") and (args.N < 16 or (args.N_verify and args.N_verify < 16)):
            raise UsageError("N must be at least 16")
        return args.func(args)
    except UsageError as exc:
        print(f"dsrn: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NotAdmissible as exc:
        print(f"dsrn: not admissible: {exc}", file=sys.stderr)
        return EXIT_NOT_ADMISSIBLE
    except NoConvergence as exc:
        print(f"dsrn: no convergence: {exc}", file=sys.stderr)
        for step in exc.trace[-5:]:
            print(f"  {step}", file=sys.stderr)
        return EXIT_NO_CONVERGENCE
    except (TruncationError, ConsistencyError) as exc:
        print(f"dsrn: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NO_CONVERGENCE


if __name__ == "__main__":
    sys.exit(main())
