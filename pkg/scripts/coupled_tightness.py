"""Comonotone coordinates X(j) = 1[U <= p(j)]: simulated sup deviation over min(p(1), sqrt(p(1)/n))."""

import argparse
import math

from devbound import simulator as sim
from devbound.sequences import build


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--p1", default="0.5,0.05,0.005")
    ap.add_argument("--n", default="10,100,1000")
    ap.add_argument("--trials", type=int, default=20_000)
    ap.add_argument("--seed", type=int, default=9)
    args = ap.parse_args()
    ratios = []
    print(f"{'p1':>7} {'n':>6} {'shape':>10} {'mean':>10} {'se':>9} {'ratio':>7} {'interval':>9}")
    for p1 in (float(x) for x in args.p1.split(",")):
        for n in (int(x) for x in args.n.split(",")):
            for shape, desc in (("single", {"family": "step", "J": 1, "q": p1}),
                                ("harmonic", {"family": "power_law", "a": p1, "b": 1.0})):
                seq = build(desc)
                est = sim.simulate(sim.SimPlan(args.seed, args.trials, n, sim.CoupledSup(seq)))
                wide = sim.simulate(sim.SimPlan(args.seed, args.trials, n, sim.CoupledSup(seq, interval=True)))
                r = est.mean / min(p1, math.sqrt(p1 / n))
                ratios.append(r)
                print(f"{p1:7g} {n:6d} {shape:>10} {est.mean:10.5f} {est.std_error:9.2e} {r:7.3f} {wide.mean:9.5f}")
    print(f"ratio range [{min(ratios):.3f}, {max(ratios):.3f}], C/c = {max(ratios) / min(ratios):.3f}")


if __name__ == "__main__":
    main()
