"""Command-line driver: ``devbound <subcommand> [options]``.

Every subcommand writes a CSV or JSON report of ``ReportRow`` records.  Exit
status is 0 on success, 1 on invalid input and 2 on resource or I/O failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np

from . import bounds, oracle, simulator
from .constants import DEFAULT_CONSTANTS, ConcentrationConstants
from .errors import DevboundError, ResourceError, ValidationError
from .sequences import OpenProblem, PowerLaw, ProbSeq, build, lnJp1_to_logJ

COLUMNS = ("experiment", "sequence", "n", "quantity", "value", "regime", "argmax_log_index", "std_error", "ci_lo", "ci_hi")
COMMANDS = ("bound", "phi", "epsilon", "oracle", "simulate", "sweep", "dkw", "openproblem", "lq", "hp")
CONFIG_KEYS = {
    "experiment", "sequence", "sequences", "n", "gamma", "qnorm", "t", "x0", "levels", "thresholds",
    "trials", "seed", "workers", "side", "mode", "target", "constants", "format", "out", "lnJp1", "logJ",
    "q", "K", "raw_out", "exact",
}


@dataclass(frozen=True)
class ReportRow:
    experiment: str
    sequence: str
    n: int | None
    quantity: str
    value: float
    regime: str | None = None
    argmax_log_index: float | None = None
    std_error: float | None = None
    ci_lo: float | None = None
    ci_hi: float | None = None


# ---------------------------------------------------------------- output


def _num(x: float) -> str:
    if math.isnan(x):
        return "NaN"
    if math.isinf(x):
        return "Infinity" if x > 0 else "-Infinity"
    return "%.17g" % x


def _cell(v: Any) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return _num(float(v))
    return str(v)


def _json_value(v: Any) -> str:
    if v is None:
        return "null"
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return _num(float(v))
    return json.dumps(v)


def render(rows: Sequence[ReportRow], fmt: str) -> str:
    if not rows:
        raise ValidationError("no report rows to emit")
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(COLUMNS)
        for r in rows:
            w.writerow([_cell(getattr(r, c)) for c in COLUMNS])
        return buf.getvalue()
    if fmt == "json":
        objs = ["{" + ", ".join(f'"{c}": {_json_value(getattr(r, c))}' for c in COLUMNS) + "}" for r in rows]
        return "[\n  " + ",\n  ".join(objs) + "\n]\n"
    raise ValidationError(f"format must be csv or json, got {fmt!r}")


def emit(rows: Sequence[ReportRow], fmt: str = "csv", path: str | Path | None = None) -> None:
    """Write rows to ``path`` (stdout when None); OSError propagates as exit code 2."""
    text = render(rows, fmt)
    if path is None or str(path) == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def parse_report(text: str, fmt: str) -> list[ReportRow]:
    """Inverse of ``render`` (used for round-trip checks)."""
    if fmt == "json":
        return [ReportRow(**obj) for obj in json.loads(text)]
    out = []
    for rec in csv.DictReader(io.StringIO(text)):
        kw: dict[str, Any] = {}
        for c in COLUMNS:
            s = rec[c]
            if c in ("experiment", "sequence", "quantity"):
                kw[c] = s
            elif c == "regime":
                kw[c] = s or None
            elif c == "n":
                kw[c] = int(s) if s else None
            else:
                kw[c] = float(s.replace("Infinity", "inf")) if s else None
        out.append(ReportRow(**kw))
    return out


# ---------------------------------------------------------------- config plumbing


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # argparse would exit(2); bad flags are validation errors
        raise ValidationError(message)


def _float_list(s: str) -> list[float]:
    try:
        return [float(x) for x in s.split(",") if x.strip()]
    except ValueError:
        raise ValidationError(f"expected a comma-separated list of numbers, got {s!r}") from None


def _n_grid(spec: Any) -> list[int]:
    if isinstance(spec, dict):
        if set(spec) != {"geometric"}:
            raise ValidationError(f"n: expected {{'geometric': [start, stop, factor]}}, got {spec}")
        start, stop, factor = spec["geometric"]
        if not (start >= 1 and stop >= start and factor > 1):
            raise ValidationError(f"n.geometric needs 1 <= start <= stop and factor > 1, got {spec['geometric']}")
        grid, x = [], float(start)
        while x <= stop * (1 + 1e-12):
            v = int(round(x))
            if not grid or v != grid[-1]:
                grid.append(v)
            x *= factor
        return grid
    if isinstance(spec, str):
        if ":" in spec:
            a, b, f = spec.split(":")
            return _n_grid({"geometric": [float(a), float(b), float(f)]})
        spec = [float(x) for x in spec.split(",") if x.strip()]
    if isinstance(spec, (int, float)):
        spec = [spec]
    out = []
    for v in spec:
        if int(v) != v or v < 1:
            raise ValidationError(f"n: entries must be positive integers, got {v}")
        out.append(int(v))
    if not out:
        raise ValidationError("n: grid must be non-empty")
    return out


class Settings:
    """Flag values layered over an optional JSON config (flags win)."""

    def __init__(self, args: argparse.Namespace):
        self.args = args
        self.cfg: dict[str, Any] = {}
        if args.config:
            try:
                self.cfg = json.loads(Path(args.config).read_text())
            except json.JSONDecodeError as exc:
                raise ValidationError(f"config {args.config}: {exc}") from None
            if not isinstance(self.cfg, dict):
                raise ValidationError("config: top level must be an object")
            unknown = set(self.cfg) - CONFIG_KEYS
            if unknown:
                raise ValidationError(f"config: unknown field(s) {', '.join(sorted(unknown))}")

    def get(self, name: str, default: Any = None) -> Any:
        v = getattr(self.args, name, None)
        if v is not None:
            return v
        return self.cfg.get(name, default)

    def require(self, name: str) -> Any:
        v = self.get(name)
        if v is None:
            raise ValidationError(f"missing required parameter {name!r}")
        return v

    def floats(self, name: str, default: Sequence[float] | None = None) -> list[float]:
        v = self.get(name)
        if v is None:
            if default is None:
                raise ValidationError(f"missing required parameter {name!r}")
            return list(default)
        if isinstance(v, str):
            v = _float_list(v)
        if isinstance(v, (int, float)):
            v = [v]
        v = [float(x) for x in v]
        if not v:
            raise ValidationError(f"{name}: grid must be non-empty")
        return v

    def n_grid(self) -> list[int]:
        return _n_grid(self.require("n"))

    def constants(self) -> ConcentrationConstants:
        over: dict[str, float] = dict(self.cfg.get("constants", {}))
        for item in self.args.const or []:
            if "=" not in item:
                raise ValidationError(f"--const expects name=value, got {item!r}")
            k, v = item.split("=", 1)
            try:
                over[k.strip()] = float(v)
            except ValueError:
                raise ValidationError(f"--const {k}: not a number: {v!r}") from None
        return DEFAULT_CONSTANTS.with_overrides(**over) if over else DEFAULT_CONSTANTS

    def log_j(self, allow_negative: bool = True) -> float:
        if self.get("lnJp1") is not None:
            return lnJp1_to_logJ(float(self.get("lnJp1")))
        if self.get("logJ") is not None:
            return float(self.get("logJ"))
        if self.get("J") is not None:
            J = float(self.get("J"))
            if not J > 0:
                raise ValidationError(f"J must be > 0, got {J}")
            return math.log(J)
        raise ValidationError("one of --lnJp1, --logJ, --J is required")

    def sequences(self) -> list[tuple[str, ProbSeq]]:
        a = self.args
        if getattr(a, "family", None):
            d: dict[str, Any] = {"family": a.family, "kind": a.kind or "mean"}
            for key, attr in (("lnJp1", "lnJp1"), ("logJ", "logJ"), ("J", "J"), ("q", "q"), ("a", "a"), ("b", "b"),
                              ("cap_index", "cap_index"), ("n_ref", "n_ref"), ("K", "K"), ("alpha", "alpha")):
                v = getattr(a, attr, None)
                if v is not None:
                    d[key] = int(v) if key in ("J", "cap_index", "n_ref") and float(v).is_integer() else v
            if a.values is not None:
                d["values"] = _float_list(a.values)
            if a.blocks is not None:
                d["blocks"] = json.loads(a.blocks)
            descs = [d]
        elif "sequences" in self.cfg:
            descs = self.cfg["sequences"]
        elif "sequence" in self.cfg:
            descs = [self.cfg["sequence"]]
        else:
            raise ValidationError("a sequence is required (--family ... or config 'sequence(s)')")
        if not descs:
            raise ValidationError("sequences: list must be non-empty")
        out = []
        for i, d in enumerate(descs):
            if not isinstance(d, dict):
                raise ValidationError(f"sequences[{i}]: expected an object")
            d = dict(d)
            name = d.pop("id", None)
            seq = build(d)
            out.append((name or _seq_id(seq), seq))
        return out


def _seq_id(seq: ProbSeq) -> str:
    d = seq.describe()
    fam = d.pop("family")
    if d.get("kind") == "mean":
        d.pop("kind")
    parts = []
    for k, v in d.items():
        if isinstance(v, float):
            v = "%.6g" % v
        elif isinstance(v, list):
            v = "/".join("%.6g" % x if isinstance(x, float) else str(x) for x in v)
        parts.append(f"{k}={v}")
    return f"{fam}(" + ";".join(parts) + ")"


# ---------------------------------------------------------------- subcommands


def _exp(s: Settings, default: str) -> str:
    return str(s.get("experiment", default))


def cmd_phi(s: Settings) -> list[ReportRow]:
    logJ = s.log_j()
    q = float(s.require("q"))
    rows = []
    for n in s.n_grid():
        r = bounds.phi(logJ, q, n)
        rows.append(ReportRow(_exp(s, "phi"), f"step(logJ={logJ:.17g};q={q:.17g})", n, "phi", r.value, r.regime))
    return rows


def cmd_epsilon(s: Settings) -> list[ReportRow]:
    logJ = s.log_j()
    q = float(s.require("q"))
    consts = s.constants()
    rows = []
    for n in s.n_grid():
        r = bounds.epsilon_exact(logJ, q, n, consts)
        seq = f"step(logJ={logJ:.17g};q={q:.17g})"
        regime = "degenerate" if r.degenerate else None
        rows.append(ReportRow(_exp(s, "epsilon"), seq, n, "epsilon", r.epsilon, regime))
        rows.append(ReportRow(_exp(s, "epsilon"), seq, n, "threshold_grid_point", r.threshold_grid_point, regime))
        ph = bounds.phi(logJ, q, n)
        rows.append(ReportRow(_exp(s, "epsilon"), seq, n, "phi", ph.value, ph.regime))
    return rows


def _bound_rows(exp: str, name: str, seq: ProbSeq, n: int) -> list[ReportRow]:
    rep = bounds.variance_rate(seq, n) if seq.kind == "variance" else bounds.delta_rate(seq, n)
    rows = [
        ReportRow(exp, name, n, "rate", rep.rate, rep.regime, rep.argmax_log_index),
        ReportRow(exp, name, n, "S", rep.S),
        ReportRow(exp, name, n, "T", rep.T),
    ]
    if rep.bracket is not None:
        rows.append(ReportRow(exp, name, n, "rate_bracket_lower", rep.bracket[0]))
        rows.append(ReportRow(exp, name, n, "rate_bracket_upper", rep.bracket[1]))
    if n >= 21 and math.isfinite(rep.T):
        rows.append(ReportRow(exp, name, n, "cohen_bound", bounds.cohen_from_functionals(rep.S, rep.T, n)))
    if seq.kind == "mean":
        band = bounds.correlated_band(seq, n)
        rows.append(ReportRow(exp, name, n, "correlated_lower", band.lower))
    return rows


def cmd_bound(s: Settings) -> list[ReportRow]:
    rows = []
    for name, seq in s.sequences():
        for n in s.n_grid():
            rows += _bound_rows(_exp(s, "bound"), name, seq, n)
    return rows


def _exact_views(seq: ProbSeq, n: int):
    if isinstance(seq, PowerLaw):
        upper, lower = seq.blocks(bounds.TruncationPolicy(n=n))
        return [("_upper_envelope", upper), ("_lower_envelope", lower)]
    return [("", seq.view())]


def cmd_oracle(s: Settings) -> list[ReportRow]:
    side = s.get("side", "two_sided")
    levels = s.floats("levels", [])
    rows = []
    for name, seq in s.sequences():
        for n in s.n_grid():
            for suffix, view in _exact_views(seq, n):
                r = oracle.exact_sup_expectation(view, n, side)
                rows.append(ReportRow(_exp(s, "oracle"), name, n, f"expectation_{side}{suffix}", r.value))
                for lv in levels:
                    v = oracle.sup_quantile(view, n, lv, side)
                    rows.append(ReportRow(_exp(s, "oracle"), name, n, f"quantile_{lv:g}_{side}{suffix}", v))
    return rows


def _sim_rows(exp: str, name: str, n: int, est: simulator.SimEstimate) -> list[ReportRow]:
    rows = [ReportRow(exp, name, n, "mean", est.mean, std_error=est.std_error,
                      ci_lo=est.mean - 1.96 * est.std_error, ci_hi=est.mean + 1.96 * est.std_error)]
    for lv, v in est.quantiles.items():
        rows.append(ReportRow(exp, name, n, f"quantile_{lv:g}", v))
    for thr, (p, lo, hi) in est.tail_probs.items():
        rows.append(ReportRow(exp, name, n, f"exceedance_{thr:g}", p, ci_lo=lo, ci_hi=hi))
    return rows


def _target(kind: str, seq: ProbSeq, s: Settings) -> simulator.Target:
    side = s.get("side", "two_sided")
    mode = s.get("mode", "direct")
    if kind == "product":
        return simulator.ProductSup(seq.view(), side, mode)
    if kind == "coupled":
        return simulator.CoupledSup(seq)
    if kind == "coupled_interval":
        return simulator.CoupledSup(seq, interval=True)
    if kind == "two_point":
        return simulator.TwoPoint(seq)
    raise ValidationError(f"target must be product, coupled, coupled_interval or two_point, got {kind!r}")


def cmd_simulate(s: Settings) -> list[ReportRow]:
    seed = int(s.get("seed", 0))
    trials = int(s.get("trials", 10**4))
    workers = s.get("workers")
    levels = s.floats("levels", [0.5, 0.9, 0.99])
    thresholds = s.floats("thresholds", [])
    kind = s.get("target", "product")
    raw = s.get("raw_out")
    rows = []
    seqs = s.sequences()
    grid = s.n_grid()
    if raw and len(seqs) * len(grid) > 1:
        raise ValidationError("raw_out needs a single sequence and a single n")
    for name, seq in seqs:
        for n in grid:
            plan = simulator.SimPlan(seed, trials, n, _target(kind, seq, s), workers)
            est = simulator.simulate(plan, levels, thresholds, raw)
            rows += _sim_rows(_exp(s, f"simulate_{kind}"), name, n, est)
    return rows


def cmd_sweep(s: Settings) -> list[ReportRow]:
    exact = bool(s.get("exact", True))
    rows = []
    for name, seq in s.sequences():
        for n in s.n_grid():
            rows += _bound_rows(_exp(s, "sweep"), name, seq, n)
            if not exact or seq.kind != "mean":
                continue
            for suffix, view in _exact_views(seq, n):
                for side in ("two_sided", "upper"):
                    try:
                        v = oracle.exact_sup_expectation(view, n, side).value
                    except ResourceError:
                        continue
                    rows.append(ReportRow(_exp(s, "sweep"), name, n, f"exact_{side}{suffix}", v))
    return rows


def dkw_variance(x0: float) -> float:
    """max_{u <= x0} F(u)(1 - F(u)) for the uniform CDF."""
    return x0 * (1 - x0) if x0 <= 0.5 else 0.25


def cmd_dkw(s: Settings) -> list[ReportRow]:
    seed = int(s.get("seed", 0))
    trials = int(s.get("trials", 10**4))
    consts = s.constants()
    ts = s.floats("t", [1.0, 2.0, 4.0])
    rows = []
    for n in s.n_grid():
        for x0 in s.floats("x0", [0.01, 0.1]):
            V = dkw_variance(x0)
            scale = math.sqrt(V / n)
            plan = simulator.SimPlan(seed, trials, n, simulator.CdfSup(x0), s.get("workers"))
            est = simulator.simulate(plan, s.floats("levels", [0.5, 0.9, 0.99]), [t * scale for t in ts])
            name = f"uniform(x0={x0:g})"
            rows += [r for r in _sim_rows("dkw", name, n, est) if not r.quantity.startswith("exceedance")]
            for t in ts:
                p, lo, hi = est.tail_probs[t * scale]
                rows.append(ReportRow(_exp(s, "dkw"), name, n, f"exceedance_t={t:g}", p, ci_lo=lo, ci_hi=hi))
                rows.append(ReportRow(_exp(s, "dkw"), name, n, f"local_dkw_bound_t={t:g}",
                                      math.exp(bounds.local_dkw_tail(n, V, t, consts))))
    return rows


def openproblem_rows(n: int, K: float | None = None, experiment: str = "openproblem") -> list[ReportRow]:
    K = max(4.0, math.log(n)) if K is None else K
    seq = OpenProblem(n_ref=n, K=K)
    name = _seq_id(seq)
    delta = oracle.exact_sup_expectation(seq.view(), n, "upper").value
    ST = bounds.functional_S_T(seq)
    sub = math.sqrt(ST.S / n)
    psi = (delta - sub) * n / ST.T
    return [
        ReportRow(experiment, name, n, "exact_upper", delta),
        ReportRow(experiment, name, n, "sqrt_S_over_n", sub),
        ReportRow(experiment, name, n, "T_over_n", ST.T / n),
        ReportRow(experiment, name, n, "implied_psi", psi),
        ReportRow(experiment, name, n, "normalized", delta * math.sqrt(n) * math.log(K) / K),
    ]


def cmd_openproblem(s: Settings) -> list[ReportRow]:
    K = s.get("K")
    rows = []
    for n in s.n_grid():
        rows += openproblem_rows(n, None if K is None else float(K), _exp(s, "openproblem"))
    return rows


def cmd_lq(s: Settings) -> list[ReportRow]:
    rows = []
    for name, seq in s.sequences():
        for n in s.n_grid():
            for qn in s.floats("qnorm", [2.0]):
                band = bounds.lq_band(seq, n, qn)
                e = _exp(s, "lq")
                tag = f"q={qn:g}"
                rows.append(ReportRow(e, name, n, f"lower_{tag}", band.lower, "converges" if band.converges else "diverges"))
                rows.append(ReportRow(e, name, n, f"upper_{tag}", band.upper))
                if band.asymptotic_rate is not None:
                    rows.append(ReportRow(e, name, n, f"asymptotic_rate_{tag}", band.asymptotic_rate))
                if band.jensen_lower is not None:
                    rows.append(ReportRow(e, name, n, f"jensen_lower_{tag}", band.jensen_lower))
                    m = oracle.exact_lq_moment(seq.view(), n, qn)
                    rows.append(ReportRow(e, name, n, f"exact_root_moment_{tag}", m ** (1 / qn)))
    return rows


def cmd_hp(s: Settings) -> list[ReportRow]:
    consts = s.constants()
    exact = bool(s.get("exact", False))
    rows = []
    for name, seq in s.sequences():
        for n in s.n_grid():
            for g in s.floats("gamma", [0.1]):
                b = bounds.hp_band(seq, n, g, consts)
                e = _exp(s, "hp")
                regime = "poissonian" if b.poissonian_flag else None
                tag = f"gamma={g:g}"
                rows.append(ReportRow(e, name, n, f"hp_upper_{tag}", b.upper, regime))
                rows.append(ReportRow(e, name, n, f"hp_lower_{tag}", b.lower, regime))
                rows.append(ReportRow(e, name, n, f"mcdiarmid_width_{tag}", b.mcdiarmid_width))
                if exact:
                    for suffix, view in _exact_views(seq, n):
                        qv = oracle.sup_quantile(view, n, 1 - g)
                        rows.append(ReportRow(e, name, n, f"exact_quantile_{tag}{suffix}", qv))
    return rows


HANDLERS = {
    "bound": cmd_bound, "phi": cmd_phi, "epsilon": cmd_epsilon, "oracle": cmd_oracle, "simulate": cmd_simulate,
    "sweep": cmd_sweep, "dkw": cmd_dkw, "openproblem": cmd_openproblem, "lq": cmd_lq, "hp": cmd_hp,
}


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="devbound", description="Bounds, exact values and simulations of max empirical-mean deviations.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="JSON experiment config (flags override its fields)")
        sp.add_argument("--format", choices=("csv", "json"))
        sp.add_argument("--out", help="report path (default stdout)")
        sp.add_argument("--experiment", help="experiment id written in every row")
        sp.add_argument("--const", action="append", metavar="NAME=VALUE", help="override a concentration constant")
        sp.add_argument("--n", help="sample sizes: '100', '1,10,100' or geometric 'start:stop:factor'")
        sq = sp.add_argument_group("sequence")
        sq.add_argument("--family", choices=("explicit", "step", "blocks", "power_law", "open_problem", "poissonian"))
        sq.add_argument("--kind", choices=("mean", "variance"))
        sq.add_argument("--lnJp1", type=float, help="ln(J+1) of a step")
        sq.add_argument("--logJ", type=float, help="ln J of a step")
        sq.add_argument("--J", type=float, help="integer step length")
        sq.add_argument("--q", type=float)
        sq.add_argument("--values", help="explicit values, comma-separated")
        sq.add_argument("--blocks", help="JSON list of [log_count, q] pairs")
        sq.add_argument("--a", type=float)
        sq.add_argument("--b", type=float)
        sq.add_argument("--cap-index", dest="cap_index", type=int)
        sq.add_argument("--n-ref", dest="n_ref", type=int)
        sq.add_argument("--K", type=float)
        sq.add_argument("--alpha", type=float)
        sp.add_argument("--side", choices=oracle.SIDES)
        sp.add_argument("--levels", help="quantile levels, comma-separated")
        if name in ("simulate", "dkw"):
            sp.add_argument("--trials", type=int)
            sp.add_argument("--seed", type=int)
            sp.add_argument("--workers", type=int)
            sp.add_argument("--thresholds")
            sp.add_argument("--raw-out", dest="raw_out", help="write per-trial values, one per line")
        if name == "simulate":
            sp.add_argument("--target", choices=("product", "coupled", "coupled_interval", "two_point"))
            sp.add_argument("--mode", choices=simulator.MODES)
        if name == "dkw":
            sp.add_argument("--x0", help="CDF levels, comma-separated")
            sp.add_argument("--t", help="normalized thresholds, comma-separated")
        if name == "lq":
            sp.add_argument("--qnorm", help="norm exponents, comma-separated")
        if name == "hp":
            sp.add_argument("--gamma", help="failure probabilities, comma-separated")
        if name in ("hp", "sweep"):
            sp.add_argument("--exact", action=argparse.BooleanOptionalAction, default=None)
    return p


def run(argv: Sequence[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        s = Settings(args)
        rows = HANDLERS[args.command](s)
        emit(rows, s.get("format", "csv"), s.get("out"))
        return 0
    except ValidationError as exc:
        print(f"devbound: error: {exc}", file=sys.stderr)
        return 1
    except (ResourceError, OSError) as exc:
        print(f"devbound: resource error: {exc}", file=sys.stderr)
        return 2
    except DevboundError as exc:  # pragma: no cover - every subclass is handled above
        print(f"devbound: error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
