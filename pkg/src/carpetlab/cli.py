"""Command line front end: ``carpetlab <subcommand> [options]``.

Every subcommand writes a JSON report (and CSV tables where useful) to the
output directory, prints one ``PASS``/``FAIL`` line per invariant it checks
and exits with 0 (all checks pass), 1 (a check failed) or 2 (usage error).
The output directory is ``--out``, else ``$CARPETLAB_OUT``, else
``./carpetlab_out``.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .errors import CapExceeded
from .geometry import WeightConfig, parse_rho
from .io import write_csv, write_json

OUT_ENV = "CARPETLAB_OUT"
DEFAULT_OUT = "carpetlab_out"
SUBCOMMANDS = ("resistance", "scaling", "walk", "harnack", "heatkernel", "all")


class UsageError(Exception):
    pass


def _ints(text: str) -> tuple:
    try:
        return tuple(int(v) for v in text.split(",") if v.strip())
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from exc


def _floats(text: str) -> tuple:
    try:
        return tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


def _rho(text: str):
    try:
        return parse_rho(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc


def _positive_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--rho", type=_rho, default=parse_rho("1"), help="weight of the edge-midpoint cells (p/q or decimal)")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--tol", type=float, default=1e-10)
    common.add_argument("--out", default=None, help=f"output directory (default ${OUT_ENV} or ./{DEFAULT_OUT})")
    common.add_argument("--format", choices=("json", "csv", "both"), default="both")
    common.add_argument("--threads", type=_positive_int, default=1, help="cap on parallel jobs")
    common.add_argument("--lambda", dest="lam", type=float, default=None, help="resistance growth rate (default: estimated)")

    p = argparse.ArgumentParser(prog="carpetlab", description="Resistance, walk and heat-kernel computations on the weighted Sierpinski carpet.")
    p.add_argument("--version", action="version", version=f"carpetlab {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("resistance", parents=[common], help="R_n on the grid, cross and diagonal graphs")
    s.add_argument("--level", type=int, default=2)
    s.add_argument("--method", choices=("grid", "G", "D", "all"), default="all")
    s.add_argument("--meshes", type=_ints, default=(9, 27))

    s = sub.add_parser("scaling", parents=[common], help="resistance sequence, lambda and beta")
    s.add_argument("--nmax", type=int, default=3)
    s.add_argument("--meshes", type=_ints, default=(9, 27))

    s = sub.add_parser("walk", parents=[common], help="corner/knight moves, folding, Y-chain, exit times")
    s.add_argument("--check", choices=("corner", "knight", "folding", "ychain", "exit"), default="corner")
    s.add_argument("--pattern", choices=tuple("abcdefg"), default="a")
    s.add_argument("--m", type=int, default=1)
    s.add_argument("--k", type=int, default=None, help="sub-cells per unit cell (default depends on --check)")
    s.add_argument("--mode", choices=("exact", "mc"), default="exact")
    s.add_argument("--samples", type=int, default=20000)
    s.add_argument("--slack", type=float, default=0.02)
    s.add_argument("--radii", type=_floats, default=(3.0, 9.0, 27.0))
    s.add_argument("--transitions", type=int, default=100_000)

    s = sub.add_parser("harnack", parents=[common], help="Harnack constant over scales")
    s.add_argument("--ms", type=_ints, default=(1, 2, 3))
    s.add_argument("--k", type=int, default=3)
    s.add_argument("--atoms", choices=("nodes", "segments"), default="nodes")

    s = sub.add_parser("heatkernel", parents=[common], help="transition densities and the sub-Gaussian envelope")
    s.add_argument("--block", type=int, default=4)
    s.add_argument("--level", type=int, default=4)
    s.add_argument("--x", type=_floats, default=None, help="start point (default: centre of the corner cell)")
    s.add_argument("--t0", type=float, default=None, help="start of the time decade (default 3^{-3 beta})")
    s.add_argument("--points", type=int, default=11)

    s = sub.add_parser("all", parents=[common], help="every pipeline at desk-scale defaults")
    return p


# ------------------------------------------------------------------ helpers


def _out_dir(args) -> Path:
    return Path(args.out or os.environ.get(OUT_ENV) or DEFAULT_OUT)


def _tag(rho) -> str:
    return str(rho).replace("/", "-")


def _config(args) -> dict:
    skip = {"out", "threads", "format"}
    return {k: (list(v) if isinstance(v, tuple) else str(v) if k == "rho" else v) for k, v in sorted(vars(args).items()) if k not in skip}


def _check(name: str, passed: bool, detail: str = "") -> dict:
    return {"name": name, "passed": bool(passed), "detail": detail}


def _fan_out(fn, jobs, threads: int) -> list:
    if threads <= 1:
        return [fn(j) for j in jobs]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, jobs))


def _lambda(args, cfg: WeightConfig) -> float:
    if args.lam is not None:
        if args.lam <= 0:
            raise UsageError("--lambda must be positive")
        return args.lam
    from .scaling import estimate_lambda, resistance_sequence

    return estimate_lambda(resistance_sequence(cfg, 3)).fit


def _emit(args, name: str, result, checks: list, tables: dict | None = None) -> int:
    out = _out_dir(args)
    stem = f"{name}_rho{_tag(args.rho)}"
    report = {"artifact": "carpetlab", "version": __version__, "command": name, "config": _config(args), "result": result, "checks": checks}
    if args.format in ("json", "both"):
        write_json(out / f"{stem}.json", report)
    if args.format in ("csv", "both"):
        for tname, (header, rows) in (tables or {}).items():
            write_csv(out / f"{stem}_{tname}.csv", header, rows)
    for c in checks:
        print(f"{'PASS' if c['passed'] else 'FAIL'} {name}: {c['name']} {c['detail']}".rstrip())
    return 0 if all(c["passed"] for c in checks) else 1


# -------------------------------------------------------------- subcommands


def cmd_resistance(args) -> int:
    from .scaling import block_resistance

    if args.level < 0:
        raise UsageError("--level must be non-negative")
    cfg = WeightConfig(args.rho)
    methods = ("grid", "G", "D") if args.method == "all" else (args.method,)
    entries = [block_resistance(args.level, cfg, m, meshes=args.meshes, tol=args.tol) for m in methods]
    checks = [
        _check(f"duality gap {e.method}", e.gap <= 4 * args.tol * e.R, f"gap={e.gap:.3e} R={e.R:.10g}") for e in entries
    ]
    rows = [(e.n, e.method, e.R, e.gap, e.residual) for e in entries]
    return _emit(args, "resistance", {"entries": entries}, checks, {"table": (("n", "method", "R", "gap", "residual"), rows)})


def cmd_scaling(args) -> int:
    from .scaling import scaling_report

    if args.nmax < 3:
        raise UsageError("--nmax must be at least 3")
    cfg = WeightConfig(args.rho)
    rep = scaling_report(cfg, args.nmax, meshes=args.meshes, tol=args.tol)
    checks = [
        _check("inequalities", not rep.violations, f"violations={len(rep.violations)} of {len(rep.ledger)}"),
        _check(
            "lambda fit inside bracket",
            rep.lambda_fekete_lo <= rep.lambda_fit <= rep.lambda_fekete_hi,
            f"fit={rep.lambda_fit:.6f} bracket=[{rep.lambda_fekete_lo:.6f}, {rep.lambda_fekete_hi:.6f}]",
        ),
    ]
    rows = [(r["n"], r["method"], r["R"], r["gap"]) for r in rep.rows]
    return _emit(args, "scaling", rep, checks, {"table": (("n", "method", "R", "gap"), rows)})


def cmd_walk(args) -> int:
    from . import walks

    cfg = WeightConfig(args.rho)
    sq = walks.SquareConfig(args.pattern, cfg, args.m)
    if args.check == "corner":
        rep = walks.corner_move_check(sq, k=args.k or 27, slack=args.slack, mode=args.mode, samples=args.samples, seed=args.seed)
        checks = [_check("corner move p6 >= bound - slack", rep.holds, f"min p6={rep.worst:.4f} bound={rep.bound:.4f}")]
        return _emit(args, "walk", {"check": "corner", "report": rep}, checks, {"corner": (("x", "p6"), rep.points)})
    if args.check == "knight":
        rep = walks.knight_move_check(sq, k=args.k or 9)
        checks = [_check("knight move p1 > 0", rep.worst > 0, f"min p1={rep.worst:.4f}")]
        return _emit(args, "walk", {"check": "knight", "report": rep}, checks, {"knight": (("x", "p1"), rep.points)})
    if args.check == "folding":
        if args.pattern not in ("c", "e", "f", "g"):
            raise UsageError("folding needs S_1 and S_4 unfilled (patterns c, e, f, g)")
        res = [walks.folding_check(sq, x, ("L6",), k=args.k or 27) for x in walks.default_samples(sq.side, 3)]
        worst = max(r.residual for r in res)
        checks = [_check("folding identity", worst <= args.slack, f"max residual={worst:.3e}")]
        return _emit(args, "walk", {"check": "folding", "results": res}, checks, {"folding": (("x", "lhs", "rhs"), [(r.x, r.lhs, r.rhs) for r in res])})
    if args.check == "ychain":
        est = walks.simulate_y_chain(sq, k=args.k or 3, transitions=args.transitions, seed=args.seed)
        z = est.max_z()
        checks = [_check("Y-chain within 3 SE", z <= 3, f"max z={z:.3f}")]
        return _emit(args, "walk", {"check": "ychain", "estimate": est.__dict__}, checks)
    # exit times
    from .scaling import beta_from_lambda

    lam = _lambda(args, cfg)
    beta = beta_from_lambda(cfg, lam)
    tab = walks.mean_exit_time((0.0, 0.0), args.radii, cfg, k=args.k or 3, mode=args.mode, samples=args.samples, seed=args.seed)
    rel = abs(tab.exponent - beta) / beta
    checks = [_check("exit-time exponent within 10% of beta", rel <= 0.1, f"exponent={tab.exponent:.4f} beta={beta:.4f}")]
    rows = [(r.r, r.mean, r.stderr) for r in tab.rows]
    return _emit(args, "walk", {"check": "exit", "table": tab, "beta": beta, "lambda": lam}, checks, {"exit": (("r", "mean", "stderr"), rows)})


def cmd_harnack(args) -> int:
    from .harnack import default_centers, harnack_report

    if not args.ms or min(args.ms) < 0:
        raise UsageError("--ms must list non-negative scales")
    cfg = WeightConfig(args.rho)
    jobs = [(m, c) for m in args.ms for c in default_centers(m)]
    reps = _fan_out(lambda j: harnack_report(j[1], j[0], cfg, args.k, args.atoms), jobs, args.threads)
    theta = {m: max(r.theta for r in reps if r.m == m) for m in args.ms}
    finite = all(math.isfinite(r.theta) and not r.flagged for r in reps)
    spread = max(theta.values()) / min(theta.values())
    checks = [
        _check("theta finite", finite, f"flagged={sum(len(r.flagged) for r in reps)}"),
        _check("theta stable across scales", spread <= 2, f"max/min={spread:.3f}"),
    ]
    rows = [(r.m, r.center[0], r.center[1], r.theta) for r in reps]
    result = {"reports": reps, "theta_by_m": theta, "spread": spread}
    return _emit(args, "harnack", result, checks, {"theta": (("m", "cx", "cy", "theta"), rows)})


def cmd_heatkernel(args) -> int:
    from . import heat_kernel as hk

    if not 0 <= args.level <= args.block:
        raise UsageError("need 0 <= --level <= --block")
    if args.points < 2:
        raise UsageError("--points must be at least 2")
    cfg = WeightConfig(args.rho)
    lam = _lambda(args, cfg)
    chain = hk.heat_chain(args.block, cfg, args.level, lam)
    beta = chain.beta
    x = args.x or (0.5 * chain.space, 0.5 * chain.space)
    t0 = args.t0 or 3.0 ** (-3 * beta)
    ts = hk.decade(t0, args.points)
    prof = hk.on_diagonal_profile(chain, x, ts, beta)
    samples = hk.kernel_samples(chain, [x], ts[:: max(1, (args.points - 1) // 4)])
    fit = hk.subgaussian_envelope_fit(chain, samples, beta)
    mass = max(abs(float(np.sum(row * chain.mass)) - 1) for row in hk.density_series(chain, chain.node(x), [chain.steps(t) for t in ts]))
    checks = [
        _check("on-diagonal band width <= 10", prof.width <= 10, f"width={prof.width:.3f}"),
        _check("mass conservation", mass <= 1e-10, f"max error={mass:.2e}"),
        _check("non-negative density", min(s[3] for s in samples) >= 0),
    ]
    if args.level >= 1:
        coarse = hk.heat_chain(args.block, cfg, args.level - 1, lam)
        y = (x[0] + chain.space, x[1])
        pairs = [(x, x)] + ([(x, y)] if chain.contains(y) else [])
        rows = hk.rescaling_check(coarse, chain, ts, pairs)
        err = max(r.rel_error for r in rows)
        checks.append(_check("rescaling identity within 1%", err <= 0.01, f"max rel error={err:.2e}"))
    result = {"profile": prof, "fit": fit, "beta": beta, "lambda": lam, "mass_error": mass}
    tables = {"kernel": (("t", "x1", "x2", "y1", "y2", "q"), [(t, a[0], a[1], b[0], b[1], q) for t, a, b, q in samples])}
    return _emit(args, "heatkernel", result, checks, tables)


def cmd_all(args) -> int:
    base = vars(args).copy()
    codes = []
    plans = [
        ("resistance", dict(level=2, method="all", meshes=(9, 27))),
        ("scaling", dict(nmax=3, meshes=(9, 27))),
        ("walk", dict(check="corner", pattern="a", m=1, k=27, mode="exact", samples=20000, slack=0.02, radii=(3.0, 9.0, 27.0), transitions=100_000)),
        ("harnack", dict(ms=(1, 2, 3), k=3, atoms="nodes")),
        ("heatkernel", dict(block=4, level=4, x=None, t0=None, points=11)),
    ]
    for name, extra in plans:
        sub = argparse.Namespace(**{**base, **extra, "command": name})
        codes.append(HANDLERS[name](sub))
    return max(codes)


HANDLERS = {
    "resistance": cmd_resistance,
    "scaling": cmd_scaling,
    "walk": cmd_walk,
    "harnack": cmd_harnack,
    "heatkernel": cmd_heatkernel,
    "all": cmd_all,
}


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return HANDLERS[args.command](args)
    except (UsageError, CapExceeded, ValueError) as exc:
        print(f"carpetlab {args.command}: error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
