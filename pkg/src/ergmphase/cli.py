"""Command-line entry point: ``ergmphase <subcommand> ...``.

Exit codes: 0 success, 1 computation error, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from .graph import ModelParams, PhysicalParams, as_theta, bernoulli_bounds, theta_to_physical
from .multiplicity import CacheError, FORMAT_VERSION, default_cache_dir, get_tables
from .output import metadata, write_csv, write_json
from .partition import EXACT_MAX_N, StratumError, strata_arrays
from .phase import (
    DEFAULT_BRACKET,
    NoCoexistenceError,
    critical_temperature,
    free_energy_curve,
    phase_diagram,
    temperature_reading_diagnostic,
)

log = logging.getLogger("ergmphase")

DESK = {
    "simulate": {"reps": 50},
    "events": {"count": 100, "cap": 10_000_000},
}


class UsageError(Exception):
    pass


# -- argument types ---------------------------------------------------------------


def _floats(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _pair(text: str) -> tuple[float, float]:
    vals = _floats(text)
    if len(vals) != 2:
        raise argparse.ArgumentTypeError(f"expected two comma-separated numbers, got {text!r}")
    return vals[0], vals[1]


def _grid(text: str) -> list[float]:
    """``a,b,c`` or ``start:stop:step`` (inclusive of ``stop``)."""
    if ":" in text:
        try:
            start, stop, step = (float(x) for x in text.split(":"))
        except ValueError:
            raise argparse.ArgumentTypeError(f"expected start:stop:step, got {text!r}")
        if step <= 0 or stop < start:
            raise argparse.ArgumentTypeError(f"empty grid {text!r}")
        n = int(np.floor((stop - start) / step + 1e-9)) + 1
        return [round(start + k * step, 12) for k in range(n)]
    vals = _floats(text)
    if not vals:
        raise argparse.ArgumentTypeError("grid is empty")
    return vals


def _count(text: str) -> int:
    v = float(text)
    if v != int(v) or v < 0:
        raise argparse.ArgumentTypeError(f"expected a nonnegative integer, got {text!r}")
    return int(v)


# -- parameter resolution ---------------------------------------------------------


def _add_params(p, multi_temp=False):
    g = p.add_mutually_exclusive_group()
    g.add_argument("--theta", type=_pair, metavar="TE,TC", help="natural parameters theta_e,theta_c")
    g.add_argument(
        "--temp", type=_floats if multi_temp else float, metavar="T",
        help="edge temperature" + (" (comma-separated list allowed)" if multi_temp else ""),
    )
    p.add_argument("--phic", type=float, help="concurrency penalty phi_c (with --temp, or alone for phi_c-only commands)")


def _params(args, need_temp=True) -> list[ModelParams]:
    """Canonical natural parameters from either flag group."""
    if args.theta is not None:
        if args.phic is not None:
            raise UsageError("--phic cannot be combined with --theta")
        return [ModelParams(*args.theta)]
    if args.temp is None:
        if need_temp:
            raise UsageError("supply --theta TE,TC or --temp T --phic PHI")
        return []
    if args.phic is None:
        raise UsageError("--temp requires --phic")
    temps = args.temp if isinstance(args.temp, list) else [args.temp]
    if not temps:
        raise UsageError("temperature list is empty")
    return [PhysicalParams(T, args.phic).to_theta() for T in temps]


def _phi_c(args) -> float:
    if args.theta is not None:
        if args.phic is not None:
            raise UsageError("--phic cannot be combined with --theta")
        theta = ModelParams(*args.theta)
        return theta_to_physical(theta).phi_c
    if args.phic is None:
        raise UsageError("supply --phic PHI or --theta TE,TC")
    return args.phic


def _seed(args) -> int:
    if args.seed is None:
        args.seed = int(np.random.SeedSequence().entropy)
        log.warning("no --seed given; using %d", args.seed)
    return args.seed


def _tables(args, N):
    return get_tables(N, cache_dir=args.cache)


def _base_config(args, **extra) -> dict:
    cfg = {"command": args.command, "cache_format": FORMAT_VERSION}
    cfg.update(extra)
    return cfg


def _mirror(path: Path, columns, rows, config):
    """JSON twin of a CSV table."""
    write_json(path.with_suffix(".json"), {"columns": list(columns), "rows": [list(r) for r in rows]}, config)


def _write_table(out: Path, name: str, columns, rows, config):
    rows = [[_plain(x) for x in r] for r in rows]
    path = write_csv(out / name, columns, rows, config)
    _mirror(path, columns, rows, config)
    print(path)
    return path


def _plain(x):
    if isinstance(x, (np.floating,)):
        return float(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    return x


# -- subcommands ------------------------------------------------------------------


def cmd_bounds(args) -> int:
    (theta,) = _params(args)
    lo, hi = bernoulli_bounds(theta)
    report = {
        "theta_e": theta.theta_e,
        "theta_c": theta.theta_c,
        "lower": lo,
        "upper": hi,
        "ratio": hi / lo if lo > 0 else float("inf"),
    }
    if args.json:
        print(json.dumps(report, sort_keys=True))
    else:
        print(f"lower {lo:.6g}")
        print(f"upper {hi:.6g}")
        print(f"ratio {report['ratio']:.6g}")
    return 0


def cmd_free_energy(args) -> int:
    thetas = _params(args)
    N = args.N
    tables = _tables(args, N)
    cfg = _base_config(args, N=N, theta=[t.as_array().tolist() for t in thetas])
    curve_rows, strata_rows = [], []
    for theta in thetas:
        curve = free_energy_curve(theta, N, tables)
        T = curve.temperature
        log_z, mean_edges = strata_arrays(theta, N, tables)
        n_d = N - np.arange(N + 1)
        for k in range(N + 1):
            finite = bool(curve.finite[k])
            curve_rows.append([T, curve.m[k], curve.F[k], curve.S[k], int(finite)])
            U = mean_edges[k] + curve.phi_c * n_d[k] if finite else float("nan")
            strata_rows.append([T, k, curve.m[k], log_z[k], curve.F[k], U, curve.S[k]])
    out = Path(args.out)
    _write_table(out, "curve.csv", ["T", "m", "F", "S", "finite"], curve_rows, cfg)
    _write_table(out, "strata.csv", ["T", "n_s", "m", "log_z", "F", "U", "S"], strata_rows, cfg)
    return 0


def cmd_phase(args) -> int:
    phi_c = _phi_c(args)
    ref = _params(args, need_temp=False)
    N = args.N
    tables = _tables(args, N)
    T_c = critical_temperature(phi_c, N, tables, bracket=tuple(args.bracket), tol=args.tol)
    diagram = phase_diagram(phi_c, N, args.ratios, tables, T_c=T_c)
    cfg = _base_config(
        args, N=N, phi_c=phi_c, ratios=list(diagram.ratios), bracket=list(args.bracket), tol=args.tol,
    )
    rows = []
    for row in diagram.rows:
        meta = row.metastable
        rows.append([
            row.temperature, row.ratio, len(row.minima), row.stable.m, row.stable.F,
            meta.m if meta else float("nan"), meta.F if meta else float("nan"),
        ])
    out = Path(args.out)
    _write_table(out, "diagram.csv", ["T", "T_over_Tc", "n_minima", "M_star", "F_star", "M_meta", "F_meta"], rows, cfg)
    critical = {
        "T_c": T_c,
        "phi_c": phi_c,
        "N": N,
        "coexistence_lower": diagram.coexistence_lower,
        "coexistence_lower_refined": diagram.coexistence_lower_refined,
        "flip_interval": diagram.flip_interval,
        "flip_ratio": diagram.flip_ratio,
    }
    if ref and args.reported is not None:
        critical["units_diagnostic"] = temperature_reading_diagnostic(T_c, ref[0], args.reported)
    path = write_json(out / "critical.json", critical, cfg)
    print(path)
    print(f"T_c = {T_c:.6g}")
    return 0


def _resolve_tc(args, phi_c, N) -> float:
    if args.tc is not None:
        return args.tc
    return critical_temperature(phi_c, N, _tables(args, N))


def cmd_simulate(args) -> int:
    from .mcmc import mean_order_parameter_experiment

    if args.desk:
        args.reps = DESK["simulate"]["reps"]
    phi_c = _phi_c(args)
    seed = _seed(args)
    N = args.N
    T_c = _resolve_tc(args, phi_c, N)
    res = mean_order_parameter_experiment(
        phi_c, N, args.ratios, args.reps, T_c, burn_in=args.burn_in,
        proposal=args.proposal, seed=seed, workers=args.threads,
    )
    cfg = _base_config(args, **res.config, ratios=list(res.ratios))
    lo, hi = res.ci
    rows = [
        [T_c * r, r, mu, a, b, se, args.reps]
        for r, mu, a, b, se in zip(res.ratios, res.mean, lo, hi, res.stderr)
    ]
    _write_table(Path(args.out), "orderparam.csv", ["T", "T_over_Tc", "mean_m", "ci_lo", "ci_hi", "stderr", "reps"], rows, cfg)
    return 0


def cmd_events(args) -> int:
    from .graph import DyadClass
    from .mcmc import capture_transition_trajectories, tabulate_event_rates

    if args.desk:
        for k, v in DESK["events"].items():
            setattr(args, k, v)
    (theta,) = _params(args)
    seed = _seed(args)
    N = args.N
    res = capture_transition_trajectories(
        theta, N, args.count, step_cap=args.cap, every=args.every, threshold=args.threshold,
        seed=seed, proposal=args.proposal, min_success_rate=args.min_success, workers=args.threads,
    )
    tally = tabulate_event_rates(res.trajectories, bin_width=args.bin_width)
    cfg = _base_config(
        args, N=N, theta=theta.as_array().tolist(), count=args.count, cap=args.cap, every=args.every,
        threshold=args.threshold, bin_width=args.bin_width, proposal=args.proposal, seed=seed,
        prior=tally.prior, attempts=res.attempts,
    )
    out = Path(args.out)
    rows = [list(r) for r in tally.rows()]
    _write_table(out, "events.csv", ["bin_lo", "bin_hi", "class", "count", "exposure", "rate", "lo", "hi"], rows, cfg)

    path = out / "trajectories.jsonl"
    with path.open("w") as f:
        f.write(json.dumps({"type": "meta", **metadata(cfg)}, default=str) + "\n")
        for tr in res.trajectories:
            f.write(json.dumps({
                "type": "trajectory", "attempt": tr.attempt, "N": N, "start_edges": tr.start.edges(),
                "completed": tr.completed, "steps": tr.steps, "accepted": tr.accepted, "every": tr.every,
            }) + "\n")
            for rec in tr.records:
                f.write(json.dumps({
                    "type": "event", "attempt": tr.attempt, "step": int(rec["step"]),
                    "i": int(rec["i"]), "j": int(rec["j"]),
                    "event": "formed" if rec["formed"] else "dissolved",
                    "class": DyadClass(int(rec["cls"])).name, "m": float(rec["m"]),
                }) + "\n")
    print(path)
    print(f"{len(res.trajectories)} trajectories from {res.attempts} attempts")
    return 0


def cmd_verify(args) -> int:
    from .verify import run_all

    if not 1 <= args.max_n <= EXACT_MAX_N:
        raise UsageError(f"--max-n must be between 1 and {EXACT_MAX_N} for the exact partition suite")
    cache_dir = Path(args.cache) if args.cache else default_cache_dir()
    files = sorted(cache_dir.glob(f"multiplicity_N*_v{FORMAT_VERSION}.npz")) if cache_dir.is_dir() else []
    results = run_all(args.max_n, files)
    for r in results:
        print(r.line())
    failed = [r.name for r in results if not r.passed]
    print("all suites passed" if not failed else f"failed: {', '.join(failed)}")
    return 1 if failed else 0


# -- parser -----------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--cache", help="multiplicity cache directory (default $ERGMPHASE_CACHE_DIR or ~/.cache/ergmphase)")
    common.add_argument("--threads", type=int, default=os.cpu_count() or 1, help="worker threads")
    common.add_argument("--out", default=".", help="output directory")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="ergmphase", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("bounds", parents=[common], help="marginal tie-probability bounds")
    _add_params(p)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("free-energy", parents=[common], help="conditional free energy over m")
    _add_params(p, multi_temp=True)
    p.add_argument("-N", type=int, required=True)
    p.set_defaults(func=cmd_free_energy)

    p = sub.add_parser("phase", parents=[common], help="critical temperature and phase diagram")
    _add_params(p)
    p.add_argument("-N", type=int, default=100)
    p.add_argument("--ratios", type=_grid, default=_grid("0.05:1.5:0.01"), help="T/T_c grid")
    p.add_argument("--bracket", type=_pair, default=DEFAULT_BRACKET)
    p.add_argument("--tol", type=float, default=1e-3)
    p.add_argument("--reported", type=float, help="reference critical value for the units diagnostic")
    p.set_defaults(func=cmd_phase)

    p = sub.add_parser("simulate", parents=[common], help="mean order parameter over a T/T_c grid")
    _add_params(p)
    p.add_argument("-N", type=int, default=100)
    p.add_argument("--ratios", type=_grid, default=_grid("0.3:1.2:0.05"))
    p.add_argument("--reps", type=int, default=250)
    p.add_argument("--burn-in", type=_count, default=500_000)
    p.add_argument("--tc", type=float, help="critical temperature (computed when omitted)")
    p.add_argument("--proposal", choices=["metropolis", "tnt", "gibbs"], default="tnt")
    p.add_argument("--seed", type=int)
    p.add_argument("--desk", action="store_true", help=f"desk scale: reps={DESK['simulate']['reps']}")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("events", parents=[common], help="sparse-to-dense trajectories and event rates")
    _add_params(p)
    p.add_argument("-N", type=int, default=100)
    p.add_argument("--count", type=int, default=1000)
    p.add_argument("--cap", type=_count, default=50_000_000)
    p.add_argument("--every", type=int, default=5)
    p.add_argument("--threshold", type=float, default=0.05)
    p.add_argument("--bin-width", type=float, default=0.02)
    p.add_argument("--min-success", type=float, default=0.01)
    p.add_argument("--proposal", choices=["metropolis", "tnt", "gibbs"], default="metropolis")
    p.add_argument("--seed", type=int)
    p.add_argument(
        "--desk", action="store_true",
        help=f"desk scale: count={DESK['events']['count']}, cap={DESK['events']['cap']:.0e}",
    )
    p.set_defaults(func=cmd_events)

    p = sub.add_parser("verify", parents=[common], help="oracle-equivalence suites and cache integrity")
    p.add_argument("--max-n", type=int, default=EXACT_MAX_N)
    p.set_defaults(func=cmd_verify)
    return parser


_VALUE_FLAGS = {"--theta", "--temp", "--bracket", "--ratios"}


def _join_negative(argv):
    """Attach values such as ``-1.6,-5.5`` to their flag so argparse does not read them as options."""
    out = []
    it = iter(argv)
    for tok in it:
        if tok in _VALUE_FLAGS:
            nxt = next(it, None)
            if nxt is not None and nxt.startswith("-"):
                out.append(f"{tok}={nxt}")
                continue
            out.append(tok)
            if nxt is not None:
                out.append(nxt)
        else:
            out.append(tok)
    return out


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(_join_negative(sys.argv[1:] if argv is None else list(argv)))
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if hasattr(args, "threads") and args.threads < 1:
        parser.error("--threads must be positive")
    try:
        return args.func(args)
    except UsageError as exc:
        parser.error(str(exc))
    except (NoCoexistenceError, CacheError, StratumError, ArithmeticError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
