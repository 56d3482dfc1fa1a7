"""Command-line front end.

Subcommands
-----------
eigenpair   print lambda, kappa, family, residual for one configured problem
growth      tabulate the growth rate at one beta or over a beta grid
optimal     optimal leverage ratio, with the shape profile
riccati     stabilizing Riccati solution and convergence-test verdicts
verify      Monte Carlo oracle against the closed form (exit 4 on FAIL)
figures     reproduce the bundled reference scenarios (1: Heston drift
            sweep, 2: Vasicek-rate drift sweep)

Exit codes: 0 success, 2 configuration/validation error, 3 numerical
failure, 4 verification failure.  Every CSV gets a JSON manifest sidecar
``<out>.manifest.json``; numbers are serialized with 12 significant digits
and LF line endings so identical manifests reproduce identical bytes.
"""

from __future__ import annotations

import argparse
import csv
import datetime
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ConfigError, LetfGrowthError, NoFiniteRegion
from .eigen import default_grid, eigenpair, generator_residual
from .growth import display_growth_value, growth_curve, growth_rate
from .leverage import optimal_beta
from .mc import SCHEMES, SimConfig, desk_config, simulate_growth, verdict_for
from .models import (
    ConstantRate,
    GbmVasicek,
    HestonSV,
    Leverage,
    Preference,
    Problem,
    Quadratic,
    load_problem,
    problem_to_config,
    validate,
)
from .riccati import solve_quadratic_model

NUMERICAL_ERRORS = (
    "ComplexKappa", "NoStabilizingSolution", "IllConditioned", "SingularSystem",
    "NotHurwitz", "AllPathsDiverged", "SchemeUnstable", "NoFiniteRegion",
)

# Reference scenario parameters (regression targets; not user-editable).
FIGURE1 = {
    "alpha": 0.5, "r": 0.01, "theta": 0.16, "delta": 0.89, "a": 3.1,
    "rho": -0.5, "mus": (0.05, 0.01, -0.05),
}
FIGURE2 = {
    "alpha": 0.8, "theta": 0.16, "delta": 0.89, "a": 3.0, "sigma": 0.3,
    "rho": -0.5, "r0": 0.01, "mus": (0.05, 0.01, -0.05),
}


def _fmt(x) -> str:
    """12 significant digits, '.' decimal separator, locale independent."""
    if x is None:
        return ""
    if isinstance(x, str):
        return x
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    v = float(x)
    if math.isnan(v):
        return "nan"
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return f"{v:.12g}"


def _write_csv(path: Path, header: list[str], rows: list[list]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def _write_manifest(out_path: Path, subcommand: str, args: argparse.Namespace,
                    problems, extra: dict | None = None) -> None:
    doc = {
        "tool": "letfgrowth",
        "version": __version__,
        "subcommand": subcommand,
        "config_path": str(getattr(args, "config", None)) if getattr(args, "config", None) else None,
        "problems": problems,
        "out": str(out_path),
        "relax": bool(getattr(args, "relax", False)),
        "seed": getattr(args, "seed", None),
        "timestamp": datetime.datetime.now(datetime.timezone.utc)
                     .replace(microsecond=0).isoformat(),
    }
    if extra:
        doc.update(extra)
    manifest = Path(str(out_path) + ".manifest.json")
    with open(manifest, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _parse_beta_grid(spec: str) -> np.ndarray:
    try:
        lo, hi, step = (float(p) for p in spec.split(":"))
    except ValueError as exc:
        raise ConfigError(f"--beta-grid expects lo:hi:step, got {spec!r}") from exc
    if step <= 0 or hi < lo:
        raise ConfigError("--beta-grid needs step > 0 and hi >= lo")
    n = int(math.floor((hi - lo) / step + 1e-9)) + 1
    return lo + step * np.arange(n)


def _parse_cap(spec: str) -> tuple[float, float]:
    try:
        lo, hi = (float(p) for p in spec.split(":"))
    except ValueError as exc:
        raise ConfigError(f"--cap expects lo:hi, got {spec!r}") from exc
    return (lo, hi)


def _parse_sim(spec: str | None, seed: int | None, kind: str) -> SimConfig:
    base = desk_config(kind, seed=seed if seed is not None else 42)
    if not spec:
        return base
    fields = {}
    for part in spec.split(","):
        if not part:
            continue
        try:
            key, val = part.split("=")
        except ValueError as exc:
            raise ConfigError(f"--sim expects k=v pairs, got {part!r}") from exc
        fields[key.strip()] = val.strip()
    known = {"t", "steps", "paths", "seed"}
    unknown = set(fields) - known
    if unknown:
        raise ConfigError(f"unknown --sim keys: {sorted(unknown)}")
    horizon = float(fields.get("t", base.horizon))
    n_steps = int(fields.get("steps", round(base.n_steps * horizon / base.horizon)))
    n_paths = int(fields.get("paths", base.n_paths))
    sim_seed = int(fields.get("seed", base.seed))
    return SimConfig(horizon=horizon, n_steps=n_steps, n_paths=n_paths,
                     seed=sim_seed, scheme=SCHEMES[kind])


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def _cmd_eigenpair(args) -> int:
    vp = load_problem(args.config, relax=args.relax)
    pair = eigenpair(vp)
    res = generator_residual(vp, pair, default_grid(vp))
    print(f"lambda={_fmt(pair.lam)}")
    print(f"kappa={_fmt(pair.kappa)}")
    print(f"family={pair.phi.describe()}")
    print(f"residual={_fmt(res.max_abs_residual)}")
    for w in vp.warnings:
        print(f"warning={w}", file=sys.stderr)
    return 0


def _cmd_growth(args) -> int:
    vp = load_problem(args.config, relax=args.relax)
    if args.beta is not None and args.beta_grid is not None:
        raise ConfigError("--beta and --beta-grid are mutually exclusive")
    if args.beta_grid is not None:
        betas = _parse_beta_grid(args.beta_grid)
    else:
        betas = np.array([args.beta if args.beta is not None else vp.beta])
    points = growth_curve(vp, betas)
    rows = []
    for pt in points:
        if pt.growth is None:
            rows.append([pt.beta, "nan", 0, "nan", "nan"])
            continue
        g = pt.growth
        rows.append([pt.beta, g.rate if g.is_finite else math.inf,
                     1 if g.is_finite else 0,
                     g.condition.lhs, g.condition.threshold])
    if len(points) == 1 and points[0].growth is not None:
        g = points[0].growth
        rate_txt = _fmt(g.rate) if g.is_finite else "inf"
        print(f"beta={_fmt(points[0].beta)} rate={rate_txt} "
              f"finite={1 if g.is_finite else 0}")
    if args.out:
        out = Path(args.out)
        _write_csv(out, ["beta", "rate", "finite", "condition_lhs",
                         "condition_threshold"], rows)
        _write_manifest(out, "growth", args, [problem_to_config(vp)],
                        {"beta": args.beta, "beta_grid": args.beta_grid})
    return 0


def _cmd_optimal(args) -> int:
    vp = load_problem(args.config, relax=args.relax)
    cap = _parse_cap(args.cap) if args.cap else None
    opt = optimal_beta(vp, cap=cap)
    method = opt.method if opt.boundary_side is None \
        else f"{opt.method}({opt.boundary_side})"
    prof = opt.profile
    mu = getattr(vp.model, "mu", None)
    row = [mu, opt.beta_star, opt.rate_at_star, method,
           None if prof is None else prof.C1,
           None if prof is None else prof.C2,
           None if prof is None else prof.C3,
           None if prof is None else prof.D]
    print(f"beta_star={_fmt(opt.beta_star)} rate_at_star={_fmt(opt.rate_at_star)} "
          f"method={method}")
    for note in opt.notes:
        print(f"note={note}", file=sys.stderr)
    if args.out:
        out = Path(args.out)
        _write_csv(out, ["mu", "beta_star", "rate_at_star", "method",
                         "C1", "C2", "C3", "D"], [row])
        _write_manifest(out, "optimal", args, [problem_to_config(vp)],
                        {"cap": args.cap})
    return 0


def _cmd_riccati(args) -> int:
    vp = load_problem(args.config, relax=args.relax)
    if not isinstance(vp.model, Quadratic):
        raise ConfigError("the riccati subcommand needs a quadratic model config")
    sol = solve_quadratic_model(vp.model, vp.alpha, vp.beta)
    d = vp.model.d
    rows: list[list] = []
    for i in range(d):
        for j in range(d):
            rows.append([f"V_{i}{j}", sol.V[i, j]])
    for i in range(d):
        rows.append([f"u_{i}", sol.u[i]])
    rows.append(["lambda", sol.lam])
    eigs = np.linalg.eigvals(sol.riccati.closed_loop)
    order = np.argsort(eigs.real)
    for k, idx in enumerate(order):
        rows.append([f"closed_loop_eig_{k}_real", eigs[idx].real])
        rows.append([f"closed_loop_eig_{k}_imag", eigs[idx].imag])
    rows.append(["riccati_residual", sol.riccati.residual])
    rows.append(["stable", sol.riccati.stable])
    rows.append(["c_covariance_negdef", sol.convergence.all_negative_covariance])
    rows.append(["c_precision_negdef", sol.convergence.all_negative_precision])
    for name, val in rows:
        print(f"{name}={_fmt(val)}")
    if args.out:
        out = Path(args.out)
        _write_csv(out, ["name", "value"], rows)
        _write_manifest(out, "riccati", args, [problem_to_config(vp)])
    return 0


def _cmd_verify(args) -> int:
    vp = load_problem(args.config, relax=args.relax)
    cfg = _parse_sim(args.sim, args.seed, vp.model.kind)
    analytic = growth_rate(vp)
    est = simulate_growth(vp, cfg)
    verdict = verdict_for(est, analytic)
    rate = analytic.rate if analytic.is_finite else math.inf
    gap = (abs(est.slope - analytic.rate) / max(abs(analytic.rate), 1e-300)
           if analytic.is_finite else math.nan)
    rows = []
    for k, t in enumerate(est.t):
        rows.append([t, est.log_mean_utility[k], est.stderr[k], est.slope,
                     est.slope_stderr, rate, gap, verdict])
    print(f"slope={_fmt(est.slope)} stderr={_fmt(est.slope_stderr)} "
          f"analytic={_fmt(rate)} verdict={verdict}")
    for reason in est.divergence_reasons:
        print(f"divergence: {reason}", file=sys.stderr)
    if args.out:
        out = Path(args.out)
        _write_csv(out, ["checkpoint_t", "log_mean_utility", "stderr", "slope",
                         "slope_stderr", "analytic_rate", "abs_rel_gap",
                         "verdict"], rows)
        _write_manifest(out, "verify", args, [problem_to_config(vp)],
                        {"sim": args.sim,
                         "sim_resolved": {"t": cfg.horizon, "steps": cfg.n_steps,
                                          "paths": cfg.n_paths, "seed": cfg.seed}})
    ok = verdict == "PASS" or (verdict == "DIVERGED" and not analytic.is_finite)
    return 0 if ok else 4


def figure_problems(figure_id: int):
    """The bundled reference scenarios, one validated problem per drift value."""
    if figure_id == 1:
        p = FIGURE1
        out = []
        for mu in p["mus"]:
            model = HestonSV(mu=mu, theta=p["theta"], a=p["a"], delta=p["delta"],
                             rho=p["rho"], v0=p["theta"] / p["a"])
            # These parameters sit outside the Feller bound on purpose, so
            # validation must run relaxed.
            out.append(validate(Problem(model, Preference(p["alpha"]),
                                        Leverage(2.0), ConstantRate(p["r"])),
                                relax=True))
        return out
    if figure_id == 2:
        p = FIGURE2
        out = []
        for mu in p["mus"]:
            model = GbmVasicek(mu=mu, sigma=p["sigma"], theta=p["theta"],
                               a=p["a"], delta=p["delta"], rho=p["rho"],
                               r0=p["r0"])
            out.append(validate(Problem(model, Preference(p["alpha"]),
                                        Leverage(2.0), None)))
        return out
    raise ConfigError(f"unknown figure id {figure_id}; expected 1 or 2")


def run_figures(figure_id: int, out_dir: Path, args=None) -> dict:
    """Write one (beta, rate) curve CSV per drift plus a summary CSV.

    The curves cover beta in [-3, 3] at step 0.01 (601 rows); the summary
    holds the unconstrained maximizer of each curve's closed form, which for
    scenario 2 can exceed the plotted range.
    """
    out_dir.mkdir(parents=True, exist_ok=True)
    problems = figure_problems(figure_id)
    betas = -3.0 + 0.01 * np.arange(601)
    summary = []
    ns = args if args is not None else argparse.Namespace(config=None, relax=figure_id == 1,
                                                          seed=None)
    for vp in problems:
        mu = vp.model.mu
        rows = []
        for b in betas:
            pb = vp.with_beta(float(b))
            if isinstance(vp.model, GbmVasicek):
                rate = display_growth_value(pb)
            else:
                g = growth_rate(pb)
                rate = g.rate if g.is_finite else math.inf
            rows.append([b, rate])
        curve_path = out_dir / f"figure{figure_id}_mu_{_fmt(mu)}.csv"
        _write_csv(curve_path, ["beta", "rate"], rows)
        _write_manifest(curve_path, "figures", ns, [problem_to_config(vp)],
                        {"figure": figure_id})
        opt = optimal_beta(vp, cap=None)
        summary.append([mu, opt.beta_star, opt.rate_at_star])
    summary_path = out_dir / f"figure{figure_id}_summary.csv"
    _write_csv(summary_path, ["mu", "beta_star", "rate_at_star"], summary)
    _write_manifest(summary_path, "figures", ns,
                    [problem_to_config(vp) for vp in problems],
                    {"figure": figure_id})
    return {"summary": summary_path, "betas": betas}


def _cmd_figures(args) -> int:
    res = run_figures(args.figure, Path(args.out_dir), args)
    print(f"wrote {res['summary']}")
    return 0


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------

def _build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="letfgrowth",
        description="Long-term growth rates of expected power utility for "
                    "leveraged funds under diffusion models.")
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="cmd", required=True)

    def common(p, needs_config=True):
        if needs_config:
            p.add_argument("--config", required=True, help="JSON problem config")
        p.add_argument("--out", help="CSV output path")
        p.add_argument("--relax", action="store_true",
                       help="downgrade parameter-bound violations to warnings")
        p.add_argument("--seed", type=int, default=None, help="simulation seed")

    p = sub.add_parser("eigenpair", help="eigenvalue/eigenfunction and residual")
    common(p)
    p.set_defaults(fn=_cmd_eigenpair)

    p = sub.add_parser("growth", help="growth rate at one beta or over a grid")
    common(p)
    p.add_argument("--beta", type=float, default=None)
    p.add_argument("--beta-grid", default=None, metavar="LO:HI:STEP")
    p.set_defaults(fn=_cmd_growth)

    p = sub.add_parser("optimal", help="optimal leverage ratio")
    common(p)
    p.add_argument("--cap", default=None, metavar="LO:HI",
                   help="restrict to a leverage interval, e.g. -3:3")
    p.set_defaults(fn=_cmd_optimal)

    p = sub.add_parser("riccati", help="stabilizing Riccati solution")
    common(p)
    p.set_defaults(fn=_cmd_riccati)

    p = sub.add_parser("verify", help="Monte Carlo oracle vs closed form")
    common(p)
    p.add_argument("--sim", default=None, metavar="t=20,steps=8000,paths=200000,seed=42")
    p.set_defaults(fn=_cmd_verify)

    p = sub.add_parser("figures", help="reproduce the bundled reference scenarios")
    p.add_argument("figure", type=int, choices=(1, 2))
    p.add_argument("--out-dir", required=True)
    p.add_argument("--relax", action="store_true")
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(fn=_cmd_figures, config=None)

    return ap


def main(argv=None) -> int:
    ap = _build_parser()
    args = ap.parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except LetfGrowthError as exc:
        code = 3 if type(exc).__name__ in NUMERICAL_ERRORS else 2
        print(f"error: {exc}", file=sys.stderr)
        return code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
