"""Exact upper-side sup deviation of step sequences against the closed-form rate.

Writes one row per (ln(J+1), q, n) with the exact value, the rate, their ratio
and the regime, then prints the ratio spread overall and per regime.
"""

import argparse
import csv
import math
import sys
from dataclasses import dataclass

from devbound.bounds import delta_rate
from devbound.oracle import exact_sup_expectation
from devbound.sequences import build, log_expm1


@dataclass
class Config:
    log_sizes: tuple[float, ...] = (2.0, 8.0, 32.0, 128.0, 1024.0, 1e4)
    q_exponents: range = range(1, 21)
    n_exponents: range = range(15)


def sweep(cfg: Config):
    for L in cfg.log_sizes:
        for i in cfg.q_exponents:
            q = 2.0**-i
            seq = build({"family": "step", "logJ": log_expm1(L), "q": q})
            for k in cfg.n_exponents:
                n = 2**k
                exact = exact_sup_expectation(seq.view(), n, "upper").value
                rep = delta_rate(seq, n)
                yield L, q, n, exact, rep.rate, rep.regime


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", help="CSV path (default stdout)")
    ap.add_argument("--max-n-exponent", type=int, default=14)
    args = ap.parse_args()
    cfg = Config(n_exponents=range(args.max_n_exponent + 1))
    fh = open(args.out, "w", newline="") if args.out else sys.stdout
    w = csv.writer(fh)
    w.writerow(["lnJp1", "q", "n", "exact_upper", "rate", "ratio", "regime"])
    ratios: dict[str, list[float]] = {}
    for L, q, n, exact, rate, regime in sweep(cfg):
        w.writerow([L, q, n, "%.17g" % exact, "%.17g" % rate, "%.6g" % (exact / rate), regime])
        ratios.setdefault(regime, []).append(exact / rate)
    if args.out:
        fh.close()
    allr = [r for v in ratios.values() for r in v]
    print(f"overall: c = {min(allr):.4g}, C = {max(allr):.4g}, C/c = {max(allr) / min(allr):.3g}", file=sys.stderr)
    for k, v in sorted(ratios.items()):
        print(f"{k:12s} {len(v):5d} points, C/c = {max(v) / min(v):.3g}", file=sys.stderr)


if __name__ == "__main__":
    main()
