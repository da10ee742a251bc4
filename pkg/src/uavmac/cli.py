"""Command-line front end.

Subcommands (all take ``--config FILE``; outputs go to ``--out`` or the
config's ``output.dir``)::

    uavmac solve --config c.yaml [--scheme tdma] [--alpha 0.3,0.7]
    uavmac sweep --config c.yaml [--scheme noma]
    uavmac benchmark --config c.yaml [--scheme fdma] [--alpha ...]
    uavmac oracle --k2 --config c.yaml [--scheme noma] [--alpha ...]
    uavmac report nesting --config c.yaml

Exit codes: 0 success, 2 configuration error, 3 solver failure, 4 failed
self-check (emitted solution does not reproduce its rate, or a nesting
violation).  Failures also print a one-line JSON error object on stderr.
The worker count for sweeps is read from ``UAVMAC_WORKERS``.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import experiments as ex
from . import io
from .config import ConfigError, ScenarioConfig, load_config
from .dual import SolverError

__all__ = ["main", "build_parser", "EXIT_OK", "EXIT_CONFIG", "EXIT_SOLVER", "EXIT_CHECK"]

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SOLVER = 3
EXIT_CHECK = 4


class _CheckFailed(Exception):
    pass


def _alpha(text: str | None, k: int) -> np.ndarray:
    if text is None:
        return np.full(k, 1.0 / k)
    try:
        a = np.array([float(v) for v in text.split(",")])
    except ValueError as exc:
        raise ConfigError(f"--alpha: cannot parse {text!r}") from exc
    if a.size != k or np.any(a < 0) or abs(a.sum() - 1.0) > 1e-9:
        raise ConfigError(f"--alpha needs {k} nonnegative entries summing to 1")
    return a / a.sum()


def _profiles(cfg: ScenarioConfig, k: int) -> list:
    if isinstance(cfg.profiles, int):
        return ex.default_profiles(k, cfg.profiles)
    return [ex.RateProfile(tuple(a)) for a in cfg.profiles]


def _outdir(args, cfg: ScenarioConfig) -> Path:
    d = Path(args.out if args.out is not None else cfg.output.dir)
    d.mkdir(parents=True, exist_ok=True)
    return d


def _emit(obj) -> None:
    print(json.dumps(io.round_sig(obj), sort_keys=True))


def _cmd_solve(args, cfg: ScenarioConfig) -> int:
    sc = cfg.scenario()
    scheme = args.scheme or cfg.scheme
    alpha = _alpha(args.alpha, sc.n_users)
    sol = ex.solve(scheme, alpha, sc)
    doc = io.solution_to_document(sol, sc)
    ok, recomputed = io.check_document(doc, sc)
    doc["self_check"] = {"ok": ok, "recomputed_R": recomputed}
    out = _outdir(args, cfg)
    step = cfg.output.trajectory_step
    io.write_json(out / f"solution_{scheme}.json", doc)
    io.write_csv(out / f"trajectory_{scheme}.csv", ["t", "x"], io.trajectory_rows(sol.shf, step))
    io.write_csv(out / f"schedule_{scheme}.csv",
                 ["t", "x", "phase"] + [f"u{k + 1}" for k in range(sc.n_users)],
                 io.schedule_rows(sol, sc, step))
    _emit({"scheme": scheme, "R": doc["R"], "n_hover": doc["n_hover"],
           "n_hover_locations": doc["n_hover_locations"],
           "hover_points": [p for p, d in zip(doc["trajectory"]["hover_points"],
                                              doc["trajectory"]["hover_durations"]) if d > 0],
           "duality_gap": doc["duality_gap"], "self_check": ok})
    if not ok:
        raise _CheckFailed(f"emitted solution reproduces R={recomputed}, claimed {doc['R']}")
    return EXIT_OK


def _cmd_sweep(args, cfg: ScenarioConfig) -> int:
    sc = cfg.scenario()
    schemes = [args.scheme or cfg.scheme] if not args.all else list(ex.SCHEMES)
    out = _outdir(args, cfg)
    k = sc.n_users
    header = [f"alpha{j + 1}" for j in range(k)] + [f"r{j + 1}" for j in range(k)] + ["R"]
    summary = {}
    for s in schemes:
        b = ex.pareto_sweep(s, _profiles(cfg, k), sc)
        io.write_csv(out / f"region_{s}.csv", header, b.rows())
        summary[s] = {"points": len(b.points),
                      "failures": [{"alpha": list(a), "error": m} for a, m in b.failures]}
    io.write_json(out / "sweep.json", summary)
    _emit(summary)
    if any(v["failures"] for v in summary.values()):
        raise SolverError("some profiles failed; see sweep.json")
    return EXIT_OK


def _cmd_benchmark(args, cfg: ScenarioConfig) -> int:
    sc = cfg.scenario()
    scheme = args.scheme or cfg.scheme
    alpha = _alpha(args.alpha, sc.n_users)
    res = {"scheme": scheme, "alpha": alpha}
    opt = ex.solve(scheme, alpha, sc)
    res["optimal"] = {"R": opt.sum_rate, "rates": opt.rates}
    try:
        r, val = ex.benchmark_successive_hover(scheme, alpha, sc)
        res["successive_hover"] = {"R": val, "rates": r}
    except SolverError as exc:
        res["successive_hover"] = {"error": str(exc)}
    r, val, xh = ex.benchmark_static_hover(scheme, alpha, sc)
    res["static_hover"] = {"R": val, "rates": r, "x": xh}
    io.write_json(_outdir(args, cfg) / f"benchmark_{scheme}.json", res)
    _emit(res)
    return EXIT_OK


def _cmd_oracle(args, cfg: ScenarioConfig) -> int:
    if not args.k2:
        raise ConfigError("oracle: only the two-user hover-fly-hover oracle exists; pass --k2")
    sc = cfg.scenario()
    if sc.n_users != 2:
        raise ConfigError("oracle --k2 needs exactly two users")
    scheme = args.scheme or cfg.scheme
    res = ex.oracle_two_user_hfh(scheme, _alpha(args.alpha, 2), sc)
    print(io.fmt(res.rate))
    io.write_json(_outdir(args, cfg) / f"oracle_{scheme}.json",
                  {"scheme": scheme, "alpha": res.alpha, "R": res.rate,
                   "x_i": res.x_i, "x_f": res.x_f, "grid_R": res.grid_rate})
    return EXIT_OK


def _cmd_report(args, cfg: ScenarioConfig) -> int:
    sc = cfg.scenario()
    rep = ex.region_nesting_report(_profiles(cfg, sc.n_users), sc)
    doc = {
        "ok": rep.ok,
        "tol": rep.tol,
        "rows": [dict(r, alpha=list(r["alpha"])) for r in rep.rows],
        "violations": [list(v["alpha"]) for v in rep.violations],
        "failures": [{"scheme": s, "alpha": list(a), "error": m} for s, a, m in rep.failures],
    }
    io.write_json(_outdir(args, cfg) / "nesting.json", doc)
    _emit(doc)
    if rep.failures:
        raise SolverError("some profiles failed; see nesting.json")
    if not rep.ok:
        raise _CheckFailed("region nesting violated")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="uavmac", description="UAV multiple-access rate regions")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, scheme=True, alpha=True):
        sp.add_argument("--config", required=True, help="YAML scenario file")
        sp.add_argument("--out", default=None, help="output directory (default: output.dir)")
        if scheme:
            sp.add_argument("--scheme", choices=ex.SCHEMES, default=None)
        if alpha:
            sp.add_argument("--alpha", default=None, help="comma-separated rate profile")

    common(sub.add_parser("solve", help="optimal trajectory and schedule for one profile"))
    sw = sub.add_parser("sweep", help="boundary points over the configured profiles")
    common(sw, alpha=False)
    sw.add_argument("--all", action="store_true", help="sweep all three schemes")
    common(sub.add_parser("benchmark", help="optimal vs successive/static hover benchmarks"))
    orc = sub.add_parser("oracle", help="brute-force hover-fly-hover value (two users)")
    common(orc)
    orc.add_argument("--k2", action="store_true", help="two-user oracle")
    rep = sub.add_parser("report", help="consistency reports")
    rep.add_argument("kind", choices=["nesting"])
    common(rep, scheme=False, alpha=False)
    return p


_COMMANDS = {"solve": _cmd_solve, "sweep": _cmd_sweep, "benchmark": _cmd_benchmark,
             "oracle": _cmd_oracle, "report": _cmd_report}


def _fail(kind: str, exc: BaseException, code: int) -> int:
    print(json.dumps({"error": kind, "message": str(exc), "exit_code": code}), file=sys.stderr)
    return code


def main(argv=None) -> int:
    """Entry point; returns the process exit code."""
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        return _COMMANDS[args.command](args, cfg)
    except ConfigError as exc:
        return _fail("config", exc, EXIT_CONFIG)
    except _CheckFailed as exc:
        return _fail("check", exc, EXIT_CHECK)
    except (SolverError, ArithmeticError) as exc:
        return _fail("solver", exc, EXIT_SOLVER)
    except ValueError as exc:
        return _fail("config", exc, EXIT_CONFIG)


if __name__ == "__main__":
    sys.exit(main())
