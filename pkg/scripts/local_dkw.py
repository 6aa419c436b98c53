"""Localized empirical-CDF deviation for uniforms: quantiles, exceedances and a fitted tail bound."""

import argparse
import math

import numpy as np

from devbound import simulator as sim
from devbound.cli import dkw_variance


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=200)
    ap.add_argument("--x0", default="0.01,0.1,0.5")
    ap.add_argument("--t", default="0.5,1,2,3,4")
    ap.add_argument("--trials", type=int, default=10**5)
    ap.add_argument("--seed", type=int, default=77)
    args = ap.parse_args()
    ts = [float(x) for x in args.t.split(",")]
    xs, ys = [], []
    for x0 in (float(x) for x in args.x0.split(",")):
        V = dkw_variance(x0)
        scale = math.sqrt(V / args.n)
        plan = sim.SimPlan(args.seed, args.trials, args.n, sim.CdfSup(x0))
        est = sim.simulate(plan, levels=(0.5, 0.99), thresholds=[t * scale for t in ts])
        print(f"x0 = {x0:g}: mean {est.mean:.5f}, p99 {est.quantiles[0.99]:.5f}, "
              f"p99 / sqrt(x0/n) = {est.quantiles[0.99] / math.sqrt(x0 / args.n):.3f}")
        for t in ts:
            p, lo, hi = est.tail_probs[t * scale]
            x = min(t * t, t * math.sqrt(args.n * V))
            print(f"   t = {t:4g}: P = {p:.5f} [{lo:.5f}, {hi:.5f}], exponent argument {x:.3f}")
            if p > 0:
                xs.append(x)
                ys.append(math.log(p))
    slope, _ = np.polyfit(xs, ys, 1)
    c2 = -slope
    c1 = math.exp(max(y + c2 * x for x, y in zip(xs, ys)))
    print(f"fitted tail: P <= {c1:.3f} exp(-{c2:.3f} min(t^2, t sqrt(nV)))")


if __name__ == "__main__":
    main()
