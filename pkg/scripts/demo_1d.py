"""EI and EIEI after a fixed design on the 1-D demo function.

Prints where each criterion would sample next and writes the curves
(x, mean, sd, EI, EIEI) to --out for external plotting.
"""
import argparse
from pathlib import Path

import numpy as np

from eiei.acquisition import CandidateSet, eiei_all, expected_improvement, integrated_ei
from eiei.benchlab import fig2_function
from eiei.gp import MaternKernel, condition, posterior_mean_cov
from eiei.strategy import select_next_ei, select_next_eiei


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--design", type=float, nargs="+", default=[-0.92, 0.17, 0.37, 0.65, 0.79, 0.87])
    ap.add_argument("--m", type=int, default=201)
    ap.add_argument("--beta", type=float, default=0.2)
    ap.add_argument("--nu", type=float, default=6.5)
    ap.add_argument("--out", default="results/demo_1d.csv")
    args = ap.parse_args()

    cand = CandidateSet.regular([-1.0], [1.0], args.m)
    kernel = MaternKernel(1.0, args.beta, args.nu)
    idx = [int(np.argmin(np.abs(cand.points[:, 0] - x))) for x in args.design]
    X = cand.points[idx]
    y = fig2_function(X[:, 0])
    post = condition(kernel, X, y)
    t = float(y.max())

    mean, cov = posterior_mean_cov(post, cand.points)
    sd = np.sqrt(np.diag(cov))
    ei = expected_improvement(mean, sd, t)
    aleph = eiei_all(post, t, cand, None, mean, cov)
    i, ei_max = select_next_ei(post, t, cand)
    j, al_min = select_next_eiei(post, t, cand)
    print(f"design {np.round(X[:, 0], 4).tolist()}, best value {t:.4f}")
    print(f"integrated EI H' = {integrated_ei(post, t, cand):.5f}")
    print(f"EI   picks x = {cand.points[i, 0]:+.3f} (EI = {ei_max:.5f})")
    print(f"EIEI picks x = {cand.points[j, 0]:+.3f} (aleph = {al_min:.5f})")

    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    table = np.column_stack([cand.points[:, 0], fig2_function(cand.points[:, 0]), mean, sd, ei, aleph])
    np.savetxt(out, table, delimiter=",", header="x,f,posterior_mean,posterior_sd,EI,aleph", comments="", fmt="%.17g")


if __name__ == "__main__":
    main()
