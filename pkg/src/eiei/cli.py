"""Command-line entry point: ``optimize``, ``demo-criteria``, ``bench run``, ``bench aggregate``.

Exit codes: 0 success, 1 usage/config error, 2 numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import logging
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import benchlab
from .acquisition import CandidateSet, _ei, _pair_eei, eiei_all, integrated_ei, sd_floor
from .gp import MaternKernel, SingularModelError, condition, posterior_mean_cov
from .strategy import OptimizationAborted, Policy, _observed_mask, run_on_candidates, snap_to_candidates

log = logging.getLogger("eiei")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    lower: np.ndarray
    upper: np.ndarray
    kernel: MaternKernel
    policy: Policy
    budget: int
    cand: CandidateSet
    seed: int
    objective: str
    grid_values: Optional[np.ndarray] = None
    design: Optional[np.ndarray] = None


def _load(path):
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}")


def _section(cfg, name):
    sec = cfg.get(name, {})
    if not isinstance(sec, dict):
        raise ConfigError(f"[{name}] must be a table")
    return sec


def _seed(cfg, override):
    if override is not None:
        return override
    if "seed" not in cfg:
        raise ConfigError("a top-level integer 'seed' is required")
    if not isinstance(cfg["seed"], int):
        raise ConfigError("'seed' must be an integer")
    return cfg["seed"]


def _kernel(cfg, d):
    sec = _section(cfg, "kernel")
    beta = sec.get("beta", "auto")
    try:
        beta = benchlab.beta_from_dimension(d) if beta == "auto" else float(beta)
        return MaternKernel(float(sec.get("sigma2", 1.0)), beta, float(sec.get("nu", 6.5)))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"[kernel]: {exc}")


def _read_grid_file(path, d):
    try:
        data = np.loadtxt(path, delimiter=",", ndmin=2, comments="#", skiprows=1)
    except OSError:
        raise ConfigError(f"objective file not found: {path}")
    except ValueError as exc:
        raise ConfigError(f"objective file {path}: {exc}")
    if data.shape[1] != d + 1:
        raise ConfigError(f"objective file {path} has {data.shape[1]} columns, expected {d + 1} (x1..x{d},f)")
    return data[:, :d], data[:, d]


def parse_run_config(path, seed_override=None, need_policy=True) -> RunConfig:
    """Validate an ``optimize``/``demo-criteria`` config completely before any computation."""
    cfg = _load(path)
    seed = _seed(cfg, seed_override)
    dom = _section(cfg, "domain")
    try:
        lower = np.asarray(dom["lower"], dtype=float).ravel()
        upper = np.asarray(dom["upper"], dtype=float).ravel()
    except (KeyError, ValueError, TypeError):
        raise ConfigError("[domain] needs numeric arrays 'lower' and 'upper'")
    if lower.shape != upper.shape or len(lower) == 0 or np.any(lower >= upper):
        raise ConfigError("[domain] bounds must have equal length with lower < upper")
    d = len(lower)
    kernel = _kernel(cfg, d)

    obj = _section(cfg, "objective")
    kind = obj.get("kind", "fig2")
    grid_values = None
    cs = _section(cfg, "candidates")
    if kind == "fig2":
        if d != 1 or lower[0] < -1 or upper[0] > 1:
            raise ConfigError("the fig2 objective needs a 1-D domain inside [-1, 1]")
        m = cs.get("m", 201)
        scheme = cs.get("scheme", "regular")
        if not isinstance(m, int) or m < 2:
            raise ConfigError("[candidates] m must be an integer >= 2")
        if scheme == "regular":
            cand = CandidateSet.regular(lower, upper, m)
        elif scheme == "uniform_random":
            cand = CandidateSet.uniform_random(lower, upper, m, seed)
        else:
            raise ConfigError(f"unknown candidate scheme {scheme!r}")
    elif kind == "grid":
        if "file" not in obj:
            raise ConfigError("[objective] kind='grid' needs 'file'")
        fpath = Path(obj["file"])
        if not fpath.is_absolute():
            fpath = Path(path).parent / fpath
        pts, grid_values = _read_grid_file(fpath, d)
        if np.any(pts < lower) or np.any(pts > upper):
            raise ConfigError("objective file has points outside the domain")
        if len(np.unique(pts, axis=0)) != len(pts):
            raise ConfigError("objective file has duplicate points")
        cand = CandidateSet(pts, float(np.prod(upper - lower)))
    else:
        raise ConfigError(f"unknown objective kind {kind!r}")

    pol = _section(cfg, "policy")
    try:
        policy = Policy.parse(pol.get("kind", "eiei"))
    except ValueError:
        if need_policy:
            raise ConfigError(f"unknown policy {pol.get('kind')!r} (use 'ei' or 'eiei')")
        policy = Policy.parse("eiei")
    budget = pol.get("budget", 1)
    if not isinstance(budget, int) or not 1 <= budget <= len(cand):
        raise ConfigError(f"[policy] budget must be an integer in [1, {len(cand)}]")

    design = None
    if "design" in cfg:
        try:
            design = np.asarray(_section(cfg, "design")["points"], dtype=float).reshape(-1, d)
        except (KeyError, ValueError, TypeError):
            raise ConfigError("[design] needs 'points', a list of points")
    return RunConfig(lower, upper, kernel, policy, budget, cand, seed, kind, grid_values, design)


def _objective(rc: RunConfig):
    if rc.objective == "grid":
        return lambda i: float(rc.grid_values[i])
    return lambda i: float(benchlab.fig2_function(rc.cand.points[i, 0]))


def cmd_optimize(args) -> int:
    rc = parse_run_config(args.config, args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    start = snap_to_candidates(0.5 * (rc.lower + rc.upper), rc.cand)
    try:
        trace = run_on_candidates(_objective(rc), rc.kernel, rc.cand, rc.budget, rc.policy, start)
    except OptimizationAborted as exc:
        log.error("%s", exc)
        trace = exc.trace
    d = len(rc.lower)
    rm = trace.running_max
    with open(out / "trace.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["n", *(f"x{j + 1}" for j in range(d)), "f", "running_max", "criterion_value"])
        for n in range(len(trace)):
            w.writerow(
                [n + 1, *(benchlab._fmt(v) for v in trace.points[n]), benchlab._fmt(trace.values[n]),
                 benchlab._fmt(rm[n]), benchlab._fmt(trace.criterion[n])]
            )
    print(f"{len(trace)} evaluations, best value {rm[-1]:.10g}")
    return EXIT_OK if len(trace) == rc.budget else EXIT_NUMERIC


def cmd_demo_criteria(args) -> int:
    rc = parse_run_config(args.config, args.seed, need_policy=False)
    if len(rc.lower) != 1:
        raise ConfigError("demo-criteria needs a 1-D domain")
    if rc.design is None or len(rc.design) == 0:
        raise ConfigError("demo-criteria needs [design] points")
    # Design points are snapped to grid nodes so that observed rows carry exact zeros.
    idx = [snap_to_candidates(p, rc.cand) for p in rc.design]
    if len(set(idx)) != len(idx):
        raise ConfigError("two design points snap to the same grid node")
    design = rc.cand.points[idx]
    obj = _objective(rc)
    vals = np.array([obj(i) for i in idx])
    post = condition(rc.kernel, design, vals)
    t = float(vals.max())
    mean, cov = posterior_mean_cov(post, rc.cand.points)
    var = np.diag(cov)
    sd = np.sqrt(var)
    floor = sd_floor(post)
    ei = _ei(mean, sd, t, floor)
    eei_diag = _pair_eei(mean, mean, var, var, var, t, floor)
    aleph = eiei_all(post, t, rc.cand, None, mean, cov)
    h_prime = integrated_ei(post, t, rc.cand)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    f = benchlab._fmt
    with open(out / "criteria.csv", "w", newline="") as fh:
        fh.write(f"# integrated_ei={f(h_prime)} threshold={f(t)}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["x", "posterior_mean", "posterior_sd", "EI", "EEI_diag", "aleph"])
        for i in range(len(rc.cand)):
            w.writerow([f(rc.cand.points[i, 0]), f(mean[i]), f(sd[i]), f(ei[i]), f(eei_diag[i]), f(aleph[i])])
    observed = _observed_mask(post, rc.cand)
    i_ei = int(np.argmax(np.where(observed, -np.inf, ei)))
    i_al = int(np.argmin(np.where(observed, np.inf, aleph)))
    print(f"integrated EI {h_prime:.6g}; EI argmax x={rc.cand.points[i_ei, 0]:.6g}; "
          f"EIEI argmin x={rc.cand.points[i_al, 0]:.6g}")
    return EXIT_OK


def parse_bench_config(path, seed_override=None):
    cfg = _load(path)
    seed = _seed(cfg, seed_override)
    tb = _section(cfg, "testbed")
    d = tb.get("d", 3)
    if not isinstance(d, int) or d < 1:
        raise ConfigError("[testbed] d must be a positive integer")
    kernel = _kernel(cfg, d)
    try:
        config = benchlab.TestbedConfig(
            d=d,
            m=int(tb.get("m", 200)),
            n_paths=int(tb.get("n_paths", 100)),
            budget=int(tb.get("budget", 40)),
            seed=seed,
            grid_scheme=str(tb.get("grid_scheme", "uniform_random")),
            kernel=kernel,
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"[testbed]: {exc}")
    names = _section(cfg, "bench").get("strategies", ["ei", "eiei"])
    try:
        strategies = [Policy.parse(s) for s in names]
    except ValueError:
        raise ConfigError(f"[bench] strategies must be drawn from 'ei', 'eiei'; got {names}")
    if len(set(names)) != len(names) or not names:
        raise ConfigError("[bench] strategies must be a non-empty list without repeats")
    return config, strategies


def _print_summary(rows, stream=None):
    stream = stream or sys.stdout
    print(f"{'strategy':>8} {'n':>4} {'M-Mn':>12} {'se':>10} {'|x*-x*n|':>12} {'se':>10}", file=stream)
    last = max(r.n for r in rows)
    marks = {1, last} | {n for n in range(10, last + 1, 10)}
    for r in rows:
        if r.n in marks:
            print(f"{r.strategy:>8} {r.n:>4} {r.mean_value_error:12.5g} {r.se_value_error:10.3g} "
                  f"{r.mean_location_error:12.5g} {r.se_location_error:10.3g}", file=stream)


def cmd_bench_run(args) -> int:
    config, strategies = parse_bench_config(args.config, args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    testbed = benchlab.generate_testbed(config)
    records = benchlab.run_benchmark(testbed, strategies, config.budget, threads=args.threads)
    rows = benchlab.aggregate(records)
    benchlab.write_records(out / "records.csv", records)
    benchlab.write_aggregate(out / "aggregate.csv", rows)
    _print_summary(rows)
    return EXIT_OK


def cmd_bench_aggregate(args) -> int:
    out = Path(args.out)
    src = Path(args.records) if args.records else out / "records.csv"
    if not src.exists():
        raise ConfigError(f"records file not found: {src}")
    try:
        records = benchlab.read_records(src)
        rows = benchlab.aggregate(records)
    except ValueError as exc:
        raise ConfigError(str(exc))
    out.mkdir(parents=True, exist_ok=True)
    benchlab.write_aggregate(out / "aggregate.csv", rows)
    _print_summary(rows)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="eiei", description="EI / EIEI Bayesian optimization toolkit")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, config_required=True):
        sp.add_argument("--config", required=config_required, help="TOML configuration file")
        sp.add_argument("--out", default=".", help="output directory")
        sp.add_argument("--seed", type=int, default=None, help="override the config seed")

    sp = sub.add_parser("optimize", help="run one optimization, write trace.csv")
    common(sp)
    sp.set_defaults(func=cmd_optimize)

    sp = sub.add_parser("demo-criteria", help="tabulate EI and EIEI over a 1-D grid, write criteria.csv")
    common(sp)
    sp.set_defaults(func=cmd_demo_criteria)

    bench = sub.add_parser("bench", help="testbed benchmark")
    bsub = bench.add_subparsers(dest="bench_command", required=True)
    sp = bsub.add_parser("run", help="run the benchmark, write records.csv and aggregate.csv")
    common(sp)
    sp.add_argument("--threads", type=int, default=benchlab.default_threads(), help="worker processes")
    sp.set_defaults(func=cmd_bench_run)
    sp = bsub.add_parser("aggregate", help="aggregate an existing records.csv")
    common(sp, config_required=False)
    sp.add_argument("--records", default=None, help="records CSV (default: <out>/records.csv)")
    sp.set_defaults(func=cmd_bench_aggregate)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if getattr(args, "threads", 1) is not None and getattr(args, "threads", 1) < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SingularModelError, benchlab.BenchmarkError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
