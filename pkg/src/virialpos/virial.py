"""Finite differences of u(i) = -ln(i! m_i) and certified sign verdicts.

With a_j = j! m_j the k-th difference is

    Δ^k u(i) = sum_l (-1)^(k-l) C(k,l) u(i+l) = ln(P_minus / P_plus),

    P_plus  = prod_{l ≡ k (mod 2)} a_{i+l}^C(k,l)
    P_minus = prod_{l ≢ k (mod 2)} a_{i+l}^C(k,l)

so its sign is decided exactly by comparing two big integers.  When those
get too large, the logarithms are enclosed in intervals instead and the
precision is doubled until zero is excluded.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from fractions import Fraction
from math import comb, factorial
from typing import Sequence

import mpmath
from mpmath.libmp import to_rational

from .errors import IndexOutOfRange, UndefinedLog
from .matchpoly import MatchSequence

EXACT_BITS = 2**26
START_PRECISION = 128
MAX_PRECISION = 8192


class Sign(enum.Enum):
    POSITIVE = "Positive"
    ZERO = "Zero"
    NEGATIVE = "Negative"
    UNDETERMINED = "Undetermined"


@dataclass(frozen=True)
class SignVerdict:
    sign: Sign
    method: str  # "ExactInteger" or "IntervalBits(p)"
    witness: tuple | None = None

    @property
    def nonnegative(self) -> bool:
        return self.sign in (Sign.POSITIVE, Sign.ZERO)

    def to_dict(self) -> dict:
        w = None if self.witness is None else [str(x) for x in self.witness]
        return {"sign": self.sign.value, "method": self.method, "witness": w}


@dataclass
class PositivityReport:
    n: int
    r: int
    verdicts: dict[tuple[int, int], SignVerdict]
    canonical_code: str | None = None
    m_verdicts: dict[tuple[int, int], SignVerdict] = field(default_factory=dict)

    @property
    def violations(self) -> list[tuple[int, int]]:
        return sorted(key for key, v in self.verdicts.items()
                      if v.sign is Sign.NEGATIVE)

    @property
    def undetermined(self) -> list[tuple[int, int]]:
        return sorted(key for key, v in self.verdicts.items()
                      if v.sign is Sign.UNDETERMINED)

    @property
    def virial_positive(self) -> bool:
        return not self.violations and not self.undetermined

    @property
    def m_violations(self) -> list[tuple[int, int]]:
        return sorted(key for key, v in self.m_verdicts.items()
                      if v.sign is Sign.NEGATIVE)

    def to_record(self) -> dict:
        rec = {
            "n": self.n,
            "r": self.r,
            "canonical_code": self.canonical_code,
            "virial_positive": self.virial_positive,
            "violations": [list(p) for p in self.violations],
            "undetermined": [list(p) for p in self.undetermined],
        }
        if self.m_verdicts:
            rec["m_conjecture_violations"] = [list(p) for p in self.m_violations]
            rec["m_conjecture_zero"] = sorted(
                [k, i] for (k, i), v in self.m_verdicts.items()
                if v.sign is Sign.ZERO)
        return rec

    def to_json(self) -> str:
        return json.dumps(self.to_record(), sort_keys=True)

    def csv_rows(self) -> list[dict]:
        rows = []
        for (k, i) in sorted(self.verdicts):
            v = self.verdicts[(k, i)]
            row = {"n": self.n, "r": self.r, "k": k, "i": i,
                   "sign": v.sign.value, "method": v.method}
            if (k, i) in self.m_verdicts:
                row["m_sign"] = self.m_verdicts[(k, i)].sign.value
            rows.append(row)
        return rows


def parity_sets(k: int) -> tuple[list[int], list[int]]:
    """Indices l in 0..k with the parity of k, and those with the other."""
    plus = [l for l in range(k + 1) if (k - l) % 2 == 0]
    minus = [l for l in range(k + 1) if (k - l) % 2 == 1]
    return plus, minus


def _check_range(mseq: MatchSequence, k: int, i: int, min_k: int = 1) -> None:
    if k < min_k or i < 0:
        raise IndexOutOfRange(f"need k >= {min_k} and i >= 0, got k={k}, i={i}")
    if i + k > mseq.n or i + k > mseq.top:
        raise IndexOutOfRange(
            f"i + k = {i + k} beyond available indices (n={mseq.n}, "
            f"top={mseq.top})")


def _a_values(mseq: MatchSequence, k: int, i: int) -> list[int]:
    a = [mseq.a(i + l) for l in range(k + 1)]
    if any(x <= 0 for x in a):
        raise UndefinedLog("some m_j in the window is zero")
    return a


# -- intervals ---------------------------------------------------------------

def _iv_context(prec: int):
    # private context: interval precision is per-context state
    ctx = mpmath.iv.__class__()
    ctx.prec = prec
    return ctx


def _endpoints(x) -> tuple[Fraction, Fraction]:
    lo, hi = x._mpi_
    return Fraction(*to_rational(lo)), Fraction(*to_rational(hi))


def u_value(mseq: MatchSequence, i: int, precision_bits: int = START_PRECISION):
    """Interval enclosing u(i) = -ln(i! m_i), as an exact ``(lo, hi)``
    pair of Fractions."""
    if not 0 <= i <= mseq.top:
        raise IndexOutOfRange(f"i={i} outside 0..{mseq.top}")
    if mseq[i] <= 0:
        raise UndefinedLog(f"m_{i} = 0")
    ctx = _iv_context(precision_bits + 4)
    return _endpoints(-ctx.log(ctx.mpf(mseq.a(i))))


def _interval_delta(a: Sequence[int], k: int, prec: int):
    ctx = _iv_context(prec)
    acc = ctx.mpf(0)
    for l, x in enumerate(a):
        coeff = (-1) ** (k - l) * comb(k, l)
        acc += -coeff * ctx.log(ctx.mpf(x))
    return acc


def delta_interval(mseq: MatchSequence, k: int, i: int, prec: int):
    """Interval enclosure of Δ^k u(i) at working precision ``prec``."""
    _check_range(mseq, k, i)
    return _endpoints(_interval_delta(_a_values(mseq, k, i), k, prec))


# -- sign verdicts -----------------------------------------------------------

def _exact_products(a: Sequence[int], k: int) -> tuple[int, int]:
    plus, minus = parity_sets(k)
    p_plus = 1
    for l in plus:
        p_plus *= a[l] ** comb(k, l)
    p_minus = 1
    for l in minus:
        p_minus *= a[l] ** comb(k, l)
    return p_plus, p_minus


def delta_sign(mseq: MatchSequence, k: int, i: int,
               exact_bits: int = EXACT_BITS,
               max_precision_bits: int = MAX_PRECISION) -> SignVerdict:
    """Certified sign of Δ^k u(i)."""
    _check_range(mseq, k, i)
    a = _a_values(mseq, k, i)
    cost = sum(comb(k, l) * x.bit_length() for l, x in enumerate(a))
    if cost <= exact_bits:
        p_plus, p_minus = _exact_products(a, k)
        if p_plus < p_minus:
            sign = Sign.POSITIVE
        elif p_plus == p_minus:
            sign = Sign.ZERO
        else:
            sign = Sign.NEGATIVE
        return SignVerdict(sign, "ExactInteger", (p_plus, p_minus))

    prec = START_PRECISION
    last = None
    while prec <= max_precision_bits:
        lo, hi = last = _endpoints(_interval_delta(a, k, prec))
        if lo > 0:
            return SignVerdict(Sign.POSITIVE, f"IntervalBits({prec})", last)
        if hi < 0:
            return SignVerdict(Sign.NEGATIVE, f"IntervalBits({prec})", last)
        prec *= 2
    return SignVerdict(Sign.UNDETERMINED, f"IntervalBits({prec // 2})", last)


def meaningful_pairs(n: int) -> list[tuple[int, int]]:
    return [(k, i) for k in range(2, n + 1) for i in range(0, n - k + 1)]


def check_virial(mseq: MatchSequence, exact_bits: int = EXACT_BITS,
                 max_precision_bits: int = MAX_PRECISION,
                 also_m_conjecture: bool = False) -> PositivityReport:
    if not mseq.complete:
        raise IndexOutOfRange("check_virial needs the full sequence m_0..m_n")
    if any(x < 1 for x in mseq.m):
        raise UndefinedLog("check_virial needs every m_i >= 1")
    verdicts = {(k, i): delta_sign(mseq, k, i, exact_bits, max_precision_bits)
                for k, i in meaningful_pairs(mseq.n)}
    report = PositivityReport(mseq.n, mseq.r, verdicts)
    if also_m_conjecture:
        report.m_verdicts = {(k, i): check_m_conjecture(mseq, k, i)
                             for k, i in meaningful_pairs(mseq.n)}
    return report


def finite_difference_exact(values: Sequence, k: int, i: int):
    """Σ_l (-1)^(k-l) C(k,l) values[i+l] in exact arithmetic."""
    if k < 0 or i < 0 or i + k >= len(values):
        raise IndexOutOfRange(
            f"window i..i+k = {i}..{i + k} outside 0..{len(values) - 1}")
    total = Fraction(0)
    for l in range(k + 1):
        total += (-1) ** (k - l) * comb(k, l) * Fraction(values[i + l])
    return total.numerator if total.denominator == 1 else total


def check_m_conjecture(mseq: MatchSequence, k: int, i: int) -> SignVerdict:
    """Exact sign of Δ^k g(i) for g(j) = -m_j j! (n-j)!."""
    _check_range(mseq, k, i, min_k=2)
    n = mseq.n
    g = [-mseq[j] * factorial(j) * factorial(n - j) for j in range(i, i + k + 1)]
    d = finite_difference_exact(g, k, 0)
    sign = Sign.POSITIVE if d > 0 else Sign.ZERO if d == 0 else Sign.NEGATIVE
    return SignVerdict(sign, "ExactInteger", (d,))
