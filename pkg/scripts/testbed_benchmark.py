"""Location/value error curves of EI vs EIEI on a GP-sample-path testbed.

Defaults are the desk-scale setting (d=3, 200 points, 100 paths, 40 evaluations).
Writes records.csv and aggregate.csv to --out and prints the curves together
with paired sign tests of "EIEI has the smaller location error".
"""
import argparse
import time
from pathlib import Path

from eiei import benchlab
from eiei.strategy import Policy


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--d", type=int, default=3)
    ap.add_argument("--m", type=int, default=200)
    ap.add_argument("--paths", type=int, default=100)
    ap.add_argument("--budget", type=int, default=40)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--threads", type=int, default=benchlab.default_threads())
    ap.add_argument("--out", default="results/testbed")
    args = ap.parse_args()

    cfg = benchlab.TestbedConfig(d=args.d, m=args.m, n_paths=args.paths, budget=args.budget, seed=args.seed)
    t0 = time.time()
    tb = benchlab.generate_testbed(cfg)
    recs = benchlab.run_benchmark(tb, [Policy.parse("ei"), Policy.parse("eiei")], threads=args.threads)
    rows = benchlab.aggregate(recs)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    benchlab.write_records(out / "records.csv", recs)
    benchlab.write_aggregate(out / "aggregate.csv", rows)

    by = {(r.strategy, r.n): r for r in rows}
    print(f"d={cfg.d} m={cfg.m} paths={cfg.n_paths} seed={cfg.seed} beta={cfg.kernel.beta:.6f} ({time.time() - t0:.0f} s)")
    print(f"{'n':>4} {'loc EI':>9} {'loc EIEI':>9} {'val EI':>9} {'val EIEI':>9} {'wins':>5} {'losses':>6} {'p':>7}")
    for n in sorted({r.n for r in rows}):
        if n in (1, 5) or n % 10 == 0 or n == cfg.budget:
            w, l, p = benchlab.paired_sign_test(recs, n, "eiei", "ei")
            a, b = by[("ei", n)], by[("eiei", n)]
            print(f"{n:>4} {a.mean_location_error:9.4f} {b.mean_location_error:9.4f} "
                  f"{a.mean_value_error:9.4f} {b.mean_value_error:9.4f} {w:>5} {l:>6} {p:7.3f}")


if __name__ == "__main__":
    main()
