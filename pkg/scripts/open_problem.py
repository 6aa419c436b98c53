"""Implied log-factor psi(n) for the flat sequence p(j) = 1/(K sqrt n), ln(j+1) <= K sqrt n.

Compares the default K = max(4, ln n) with a fixed K, and fits the slope of
psi against ln n for each rule.
"""

import argparse
import math

import numpy as np

from devbound.cli import openproblem_rows


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", default="100,300,1000,3000,10000,30000,100000")
    ap.add_argument("--fixed-K", type=float, default=4.0)
    args = ap.parse_args()
    ns = [int(x) for x in args.n.split(",")]
    for label, K in (("K = max(4, ln n)", None), (f"K = {args.fixed_K:g}", args.fixed_K)):
        print(label)
        print(f"{'n':>8} {'K':>7} {'exact':>10} {'sqrt(S/n)':>10} {'T/n':>10} {'psi':>8} {'normalized':>10}")
        psis = []
        for n in ns:
            row = {r.quantity: r.value for r in openproblem_rows(n, K)}
            k = max(4.0, math.log(n)) if K is None else K
            psis.append(row["implied_psi"])
            print(
                f"{n:8d} {k:7.3f} {row['exact_upper']:10.5f} {row['sqrt_S_over_n']:10.5f} "
                f"{row['T_over_n']:10.5f} {row['implied_psi']:8.4f} {row['normalized']:10.4f}"
            )
        slope = np.polyfit(np.log(ns), psis, 1)[0]
        print(f"slope of psi against ln n: {slope:.4f}\n")


if __name__ == "__main__":
    main()
