"""Non-increasing probability (or variance) sequences on [0, 1/2].

Families whose dimension is astronomically large (the ln n construction has
about e^{K sqrt(n)} equal coordinates) store block counts as logarithms, so
every downstream computation works from ``BlockView`` without enumerating.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Mapping

import numpy as np
from scipy.special import digamma, logsumexp, zeta

from .errors import DivergenceError, RepresentabilityError, ValidationError

KINDS = ("mean", "variance")
# largest log-count whose integer value is exactly representable in a double
_MAX_EXACT_LOG = math.log(2.0**53)


def log_expm1(x: float) -> float:
    """ln(e^x - 1) for x > 0, stable at both ends."""
    if x <= 0:
        return -math.inf if x == 0 else math.nan
    if x > 30:
        return x + math.log1p(-math.exp(-x))
    return math.log(math.expm1(x))


@dataclass(frozen=True)
class Block:
    log_count: float
    q: float
    end_log_index: float  # ln(1 + cumulative count through this block)

    @property
    def start_log_index(self) -> float:
        """ln of the block's first index, i.e. ln(1 + cumulative count before it)."""
        return self.end_log_index + math.log1p(-math.exp(self.log_count - self.end_log_index))

    @property
    def end_log_j(self) -> float:
        """ln j at the block's last index."""
        return log_expm1(self.end_log_index)

    def integer_count(self) -> int:
        return _integer_from_log(self.log_count)


def _integer_from_log(log_count: float) -> int:
    if log_count > _MAX_EXACT_LOG:
        raise RepresentabilityError(f"block count e^{log_count:.6g} is not representable as an integer")
    c = math.exp(log_count)
    r = round(c)
    if r < 1 or abs(c - r) > 1e-9 * max(1.0, c):
        raise RepresentabilityError(f"block count {c!r} is not an integer")
    return int(r)


@dataclass(frozen=True)
class BlockView:
    blocks: tuple[Block, ...]

    @classmethod
    def from_pairs(cls, pairs) -> "BlockView":
        """Build from (log_count, q) pairs, deriving end indices."""
        pairs = [(float(lc), float(q)) for lc, q in pairs]
        for lc, q in pairs:
            if not lc >= 0 or math.isinf(lc):
                raise ValidationError(f"log_count must be finite and >= 0, got {lc}")
            if not 0.0 <= q <= 0.5:
                raise ValidationError(f"block value must lie in [0, 1/2], got {q}")
        for (_, a), (_, b) in zip(pairs, pairs[1:]):
            if not b < a:
                raise ValidationError(f"block values must be strictly decreasing, got {a} then {b}")
        blocks = []
        acc = [0.0]
        for lc, q in pairs:
            acc.append(lc)
            blocks.append(Block(lc, q, float(logsumexp(acc))))
        return cls(tuple(blocks))

    def __len__(self) -> int:
        return len(self.blocks)

    def __iter__(self):
        return iter(self.blocks)

    @property
    def log_counts(self) -> np.ndarray:
        return np.array([b.log_count for b in self.blocks], dtype=float)

    @property
    def qs(self) -> np.ndarray:
        return np.array([b.q for b in self.blocks], dtype=float)

    @property
    def end_log_indices(self) -> np.ndarray:
        return np.array([b.end_log_index for b in self.blocks], dtype=float)

    def integer_counts(self) -> list[int]:
        return [b.integer_count() for b in self.blocks]

    def value_at(self, j: int) -> float:
        lj1 = math.log1p(j)
        for b in self.blocks:
            if lj1 <= b.end_log_index * (1 + 1e-15):
                return b.q
        return 0.0


@dataclass(frozen=True)
class TruncationPolicy:
    """Stop the power-law block expansion once n * sum_{j > cut} p(j) < tail_mass_tol."""

    tail_mass_tol: float = 1e-3
    n: int = 1
    max_doublings: int = 200


@dataclass(frozen=True)
class HeadMass:
    head_sum: float
    tail_success_bound: float
    diverges: bool = False


@dataclass(frozen=True)
class ProbSeq:
    """Base class; construct through ``build`` or a family subclass."""

    kind: str = field(default="mean", kw_only=True)

    family = "abstract"

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise ValidationError(f"kind must be one of {KINDS}, got {self.kind!r}")

    def view(self) -> BlockView:
        raise NotImplementedError

    def value_at(self, j: int) -> float:
        if j < 1:
            raise ValidationError(f"index j must be >= 1, got {j}")
        return self.view().value_at(j)

    def blocks(self, truncation: TruncationPolicy | None = None) -> BlockView:
        return self.view()

    def head_mass(self, J_cut: int, n: int) -> HeadMass:
        head = 0.0
        total = 0.0
        lcut = math.log1p(J_cut)
        for b in self.view():
            if b.q == 0:
                continue
            mass = math.exp(b.log_count) * b.q if b.log_count < 700 else math.inf
            total += mass
            if b.end_log_index <= lcut:
                head += mass
            elif b.start_log_index < lcut:
                head += (J_cut - math.expm1(b.start_log_index)) * b.q
        tail = total - head if math.isfinite(total) else math.inf
        return HeadMass(head, n * max(tail, 0.0))

    def seminorm(self, r: float) -> float:
        """sum_j p(j)^r (may be +inf)."""
        if r <= 0:
            raise ValidationError(f"r must be > 0, got {r}")
        terms = [b.log_count + r * math.log(b.q) for b in self.view() if b.q > 0]
        if not terms:
            return 0.0
        s = float(logsumexp(terms))
        return math.exp(s) if s < 709 else math.inf

    def is_summable(self) -> bool:
        return True

    def distinct_values(self) -> np.ndarray:
        """Ascending set of values taken, including the 0 past a finite support."""
        vals = {float(b.q) for b in self.view()} | {0.0}
        return np.array(sorted(vals))

    def value_ceil(self, x: np.ndarray) -> np.ndarray:
        """Smallest sequence value >= x (nan when none)."""
        vals = self.distinct_values()
        x = np.asarray(x, dtype=float)
        idx = np.searchsorted(vals, x, side="left")
        out = np.full(x.shape, np.nan)
        ok = idx < len(vals)
        out[ok] = vals[idx[ok]]
        return out

    def value_below(self, x: np.ndarray) -> np.ndarray:
        """Largest sequence value < x (nan when none)."""
        vals = self.distinct_values()
        x = np.asarray(x, dtype=float)
        idx = np.searchsorted(vals, x, side="left") - 1
        out = np.full(x.shape, np.nan)
        ok = idx >= 0
        out[ok] = vals[idx[ok]]
        return out

    def describe(self) -> dict[str, Any]:
        raise NotImplementedError


@dataclass(frozen=True)
class Explicit(ProbSeq):
    values: tuple[float, ...] = ()

    family = "explicit"

    def __post_init__(self) -> None:
        super().__post_init__()
        vals = tuple(float(v) for v in self.values)
        object.__setattr__(self, "values", vals)
        for i, v in enumerate(vals):
            if not 0.0 <= v <= 0.5:
                raise ValidationError(f"values[{i}] = {v} outside [0, 1/2]")
        for i in range(1, len(vals)):
            if vals[i] > vals[i - 1]:
                raise ValidationError(f"values must be non-increasing: values[{i}] = {vals[i]} > {vals[i - 1]}")

    def view(self) -> BlockView:
        pairs = []
        vals = self.values
        i = 0
        while i < len(vals):
            j = i
            while j < len(vals) and vals[j] == vals[i]:
                j += 1
            pairs.append((math.log(j - i), vals[i]))
            i = j
        return BlockView.from_pairs(pairs)

    def value_at(self, j: int) -> float:
        if j < 1:
            raise ValidationError(f"index j must be >= 1, got {j}")
        return self.values[j - 1] if j <= len(self.values) else 0.0

    def describe(self) -> dict[str, Any]:
        return {"family": "explicit", "values": list(self.values), "kind": self.kind}


@dataclass(frozen=True)
class Step(ProbSeq):
    """q on the first J coordinates, then 0; J stored as ln J and may be non-integer."""

    logJ: float = 0.0
    q: float = 0.0

    family = "step"

    def __post_init__(self) -> None:
        super().__post_init__()
        if not self.logJ >= 0 or math.isinf(self.logJ):
            raise ValidationError(f"logJ must be finite and >= 0, got {self.logJ}")
        if not 0.0 <= self.q <= 0.5:
            raise ValidationError(f"q must lie in [0, 1/2], got {self.q}")

    def view(self) -> BlockView:
        return BlockView.from_pairs([(self.logJ, self.q)])

    def describe(self) -> dict[str, Any]:
        return {"family": "step", "logJ": self.logJ, "q": self.q, "kind": self.kind}


@dataclass(frozen=True)
class Blocks(ProbSeq):
    pairs: tuple[tuple[float, float], ...] = ()

    family = "blocks"

    def __post_init__(self) -> None:
        super().__post_init__()
        object.__setattr__(self, "pairs", tuple((float(a), float(b)) for a, b in self.pairs))
        BlockView.from_pairs(self.pairs)

    def view(self) -> BlockView:
        return BlockView.from_pairs(self.pairs)

    def describe(self) -> dict[str, Any]:
        return {"family": "blocks", "blocks": [list(p) for p in self.pairs], "kind": self.kind}


@dataclass(frozen=True)
class OpenProblem(ProbSeq):
    """p(j) = 1/(K sqrt(n_ref)) while ln(j+1) <= K sqrt(n_ref), else 0."""

    n_ref: int = 1
    K: float = 2.0

    family = "open_problem"

    def __post_init__(self) -> None:
        super().__post_init__()
        if int(self.n_ref) != self.n_ref or self.n_ref < 1:
            raise ValidationError(f"n_ref must be a positive integer, got {self.n_ref}")
        if not 2.0 <= self.K <= math.sqrt(self.n_ref):
            raise ValidationError(f"K must lie in [2, sqrt(n_ref)] = [2, {math.sqrt(self.n_ref):.6g}], got {self.K}")

    @property
    def level(self) -> float:
        return 1.0 / (self.K * math.sqrt(self.n_ref))

    @property
    def log_J(self) -> float:
        """ln J for the largest integer J with ln(J+1) <= K sqrt(n_ref)."""
        x = self.K * math.sqrt(self.n_ref)
        if x < 36:
            return math.log(math.floor(math.exp(x)) - 1)
        # flooring moves e^x by < 1, invisible at this scale
        return log_expm1(x)

    def view(self) -> BlockView:
        return BlockView.from_pairs([(self.log_J, self.level)])

    def describe(self) -> dict[str, Any]:
        return {"family": "open_problem", "n_ref": self.n_ref, "K": self.K, "kind": self.kind}


@dataclass(frozen=True)
class Poissonian(ProbSeq):
    """p(j) = alpha / (2 n_ref j) for j <= J."""

    alpha: float = 0.5
    n_ref: int = 1
    J: int = 1

    family = "poissonian"

    def __post_init__(self) -> None:
        super().__post_init__()
        if not 0.0 < self.alpha <= 0.5:
            raise ValidationError(f"alpha must lie in (0, 1/2], got {self.alpha}")
        if int(self.n_ref) != self.n_ref or self.n_ref < 1:
            raise ValidationError(f"n_ref must be a positive integer, got {self.n_ref}")
        if int(self.J) != self.J or not 1 <= self.J <= 10**6:
            raise ValidationError(f"J must be an integer in [1, 1e6], got {self.J}")

    def view(self) -> BlockView:
        j = np.arange(1, self.J + 1)
        return BlockView.from_pairs([(0.0, float(v)) for v in self.alpha / (2 * self.n_ref * j)])

    def value_at(self, j: int) -> float:
        if j < 1:
            raise ValidationError(f"index j must be >= 1, got {j}")
        return self.alpha / (2 * self.n_ref * j) if j <= self.J else 0.0

    def describe(self) -> dict[str, Any]:
        return {"family": "poissonian", "alpha": self.alpha, "n_ref": self.n_ref, "J": self.J, "kind": self.kind}


@dataclass(frozen=True)
class PowerLaw(ProbSeq):
    """p(j) = min(a j^{-b}, 1/2), optionally zero past ``cap_index``."""

    a: float = 1.0
    b: float = 1.0
    cap_index: int | None = None

    family = "power_law"

    def __post_init__(self) -> None:
        super().__post_init__()
        if not (self.a > 0 and self.b > 0):
            raise ValidationError(f"power_law needs a > 0 and b > 0, got a = {self.a}, b = {self.b}")
        if self.cap_index is not None and (int(self.cap_index) != self.cap_index or self.cap_index < 1):
            raise ValidationError(f"cap_index must be a positive integer, got {self.cap_index}")

    @property
    def plateau_end(self) -> int:
        """Largest j with a j^{-b} >= 1/2 (0 when p(1) < 1/2)."""
        return int(self._index_at_least(np.array([0.5]))[0])

    def _raw(self, j) -> np.ndarray:
        return np.minimum(self.a * np.asarray(j, dtype=float) ** (-self.b), 0.5)

    def value_at(self, j: int) -> float:
        if j < 1:
            raise ValidationError(f"index j must be >= 1, got {j}")
        if self.cap_index is not None and j > self.cap_index:
            return 0.0
        return float(min(self.a * float(j) ** (-self.b), 0.5))

    def is_summable(self) -> bool:
        return self.cap_index is not None or self.b > 1

    def _tail_sum(self, r: float, start: int) -> float:
        """sum_{j >= start} (a j^{-b})^r, for start past the plateau."""
        end = self.cap_index
        if end is not None:
            if start > end:
                return 0.0
            if end - start < 10**6:
                j = np.arange(start, end + 1, dtype=float)
                return float(np.sum(self.a**r * j ** (-self.b * r)))
            return float(self.a**r * (zeta(self.b * r, start) - zeta(self.b * r, end + 1)))
        if self.b * r <= 1:
            return math.inf
        return float(self.a**r * zeta(self.b * r, start))

    def _partial(self, lo: int, hi: int) -> float:
        """sum_{lo <= j <= hi} a j^{-b}, for lo past the plateau."""
        if self.cap_index is not None:
            hi = min(hi, self.cap_index)
        if hi < lo:
            return 0.0
        if hi - lo < 10**6:
            j = np.arange(lo, hi + 1, dtype=float)
            return float(np.sum(self.a * j ** (-self.b)))
        if self.b == 1:
            return float(self.a * (digamma(hi + 1) - digamma(lo)))
        return float(self.a * (zeta(self.b, lo) - zeta(self.b, hi + 1)))

    def seminorm(self, r: float) -> float:
        if r <= 0:
            raise ValidationError(f"r must be > 0, got {r}")
        m = self.plateau_end
        return m * 0.5**r + self._tail_sum(r, m + 1)

    def head_mass(self, J_cut: int, n: int) -> HeadMass:
        m = self.plateau_end
        if J_cut <= m:
            head = 0.5 * J_cut
            tail = 0.5 * (m - J_cut) + self._tail_sum(1.0, m + 1)
        else:
            head = 0.5 * m + self._partial(m + 1, J_cut)
            tail = self._tail_sum(1.0, J_cut + 1)
        return HeadMass(head, n * tail, diverges=not self.is_summable())

    def _index_at_least(self, x: np.ndarray) -> np.ndarray:
        """Largest j with p(j) >= x (0 when none), for x > 0."""
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore", over="ignore"):
            raw = np.floor((self.a / x) ** (1.0 / self.b))
        j = np.clip(raw, 0, 2.0**62).astype(np.int64)
        # the float power can be off by one index either way
        jf = np.maximum(j, 1).astype(float)
        j = np.where((j >= 1) & (self.a * jf ** (-self.b) < x), j - 1, j)
        j = np.where(self.a * (j + 1).astype(float) ** (-self.b) >= x, j + 1, j)
        j = np.where(x > 0.5, 0, j)
        if self.cap_index is not None:
            j = np.minimum(j, self.cap_index)
        return j

    def value_ceil(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        out = np.full(x.shape, np.nan)
        pos = x > 0
        j = self._index_at_least(np.where(pos, x, 1.0))
        ok = pos & (j >= 1)
        out[ok] = self._raw(j[ok])
        if self.cap_index is not None:
            out[~pos] = 0.0
        return out

    def value_below(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        out = np.full(x.shape, np.nan)
        pos = x > 0
        nxt = self._index_at_least(np.where(pos, x, 1.0)) + 1
        vals = self._raw(nxt)
        if self.cap_index is not None:
            vals = np.where(nxt > self.cap_index, 0.0, vals)
        out[pos] = vals[pos]
        return out

    def distinct_values(self) -> np.ndarray:
        if self.cap_index is None or self.cap_index > 10**6:
            raise RepresentabilityError("power_law with unbounded support takes infinitely many values")
        return np.array(sorted(set(self._raw(np.arange(1, self.cap_index + 1)).tolist()) | {0.0}))

    def blocks(self, truncation: TruncationPolicy | None = None) -> tuple[BlockView, BlockView]:  # type: ignore[override]
        """(upper, lower) envelopes on dyadic blocks [2^i, 2^{i+1}), bracketing p pointwise."""
        truncation = truncation or TruncationPolicy()
        upper: list[tuple[float, float]] = []
        lower: list[tuple[float, float]] = []
        for i in range(truncation.max_doublings):
            lo, hi = 2**i, 2 ** (i + 1) - 1
            if self.cap_index is not None:
                if lo > self.cap_index:
                    break
                hi = min(hi, self.cap_index)
            lc = math.log(hi - lo + 1)
            _append(upper, lc, self.value_at(lo))
            _append(lower, lc, self.value_at(hi))
            if self.is_summable():
                tail = truncation.n * self._tail_sum(1.0, max(hi + 1, self.plateau_end + 1))
                if tail < truncation.tail_mass_tol:
                    break
        return BlockView.from_pairs(upper), BlockView.from_pairs(lower)

    def view(self) -> BlockView:
        return self.blocks()[0]

    def describe(self) -> dict[str, Any]:
        d: dict[str, Any] = {"family": "power_law", "a": self.a, "b": self.b, "kind": self.kind}
        if self.cap_index is not None:
            d["cap_index"] = self.cap_index
        return d


def _append(pairs: list[tuple[float, float]], log_count: float, q: float) -> None:
    """Append a block, merging with the previous one when the value repeats."""
    if pairs and pairs[-1][1] == q:
        pairs[-1] = (float(np.logaddexp(pairs[-1][0], log_count)), q)
    else:
        pairs.append((log_count, q))


def lnJp1_to_logJ(lnJp1: float) -> float:
    if not lnJp1 > 0:
        raise ValidationError(f"lnJp1 must be > 0, got {lnJp1}")
    return log_expm1(lnJp1)


def build(descriptor: Mapping[str, Any]) -> ProbSeq:
    """Validated ``ProbSeq`` from a plain descriptor (the CLI/config schema).

    A step length may be given as ``logJ`` (ln J), ``lnJp1`` (ln(J+1)) or an integer ``J``.
    """
    d = dict(descriptor)
    family = d.pop("family", None)
    kind = d.pop("kind", "mean")
    try:
        if family == "explicit":
            return Explicit(values=tuple(d.pop("values")), kind=kind)
        if family == "step":
            if "logJ" in d:
                logJ = float(d.pop("logJ"))
            elif "lnJp1" in d:
                logJ = lnJp1_to_logJ(float(d.pop("lnJp1")))
            elif "J" in d:
                J = d.pop("J")
                if int(J) != J or J < 1:
                    raise ValidationError(f"J must be a positive integer, got {J}")
                logJ = math.log(int(J))
            else:
                raise ValidationError("step needs one of logJ, lnJp1, J")
            return Step(logJ=logJ, q=float(d.pop("q")), kind=kind)
        if family == "blocks":
            pairs = []
            for item in d.pop("blocks"):
                if isinstance(item, Mapping):
                    lc = item["log_count"] if "log_count" in item else math.log(item["count"])
                    pairs.append((float(lc), float(item["q"])))
                else:
                    pairs.append((float(item[0]), float(item[1])))
            return Blocks(pairs=tuple(pairs), kind=kind)
        if family == "power_law":
            return PowerLaw(a=float(d.pop("a")), b=float(d.pop("b")), cap_index=d.pop("cap_index", None), kind=kind)
        if family == "open_problem":
            return OpenProblem(n_ref=int(d.pop("n_ref")), K=float(d.pop("K")), kind=kind)
        if family == "poissonian":
            return Poissonian(alpha=float(d.pop("alpha")), n_ref=int(d.pop("n_ref")), J=int(d.pop("J")), kind=kind)
    except KeyError as exc:
        raise ValidationError(f"{family} descriptor is missing field {exc.args[0]!r}") from None
    if family is None:
        raise ValidationError("descriptor is missing field 'family'")
    raise ValidationError(f"unknown family {family!r}")


def require_summable(seq: ProbSeq) -> None:
    if not seq.is_summable():
        raise DivergenceError(f"{seq.family} sequence has sum_j p(j) = infinity")
