"""Normalised matching deviations, the alpha_0 observable, the second-moment
bound and Monte Carlo sweeps over random regular bipartite graphs.

All observables are exact rationals.  Trials draw graphs from the simple
configuration model with a seed derived from ``(seed, n, trial)`` so any
single trial can be replayed on its own.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from math import comb, factorial
from typing import Iterable, Sequence

import mpmath
import numpy as np

from .errors import IndexOutOfRange, InsufficientSamples, VirialError
from .graphgen import sample_configuration
from .matchpoly import MatchSequence, truncated_match_sequence
from .virial import EXACT_BITS, Sign, _iv_context, delta_sign, parity_sets

log = logging.getLogger(__name__)

WILSON_Z = 1.959963984540054
CSV_COLUMNS = ["n", "r", "k", "i", "trials", "violations", "frequency",
               "wilson_lo", "wilson_hi", "mean_alpha0", "scaled_alpha0",
               "limit_const", "beta_over_alpha2", "undetermined", "range_label"]


@dataclass(frozen=True)
class HhatValue:
    i: int
    value: Fraction


@dataclass(frozen=True)
class Alpha0Value:
    k: int
    i: int
    value: Fraction | None
    lplus: tuple[int, ...]
    lminus: tuple[int, ...]
    # set instead of ``value`` when the exact rational was over budget;
    # mpmath mpf endpoints, since they can be far outside float range
    interval: tuple | None = None

    @property
    def rational_overflow(self) -> bool:
        return self.value is None


@dataclass(frozen=True)
class BoundEstimate:
    alpha: Fraction
    beta: Fraction
    bound: Fraction | None
    sample_count: int

    @property
    def alpha_nonnegative(self) -> bool:
        return self.alpha >= 0


def hhat(mseq: MatchSequence, i: int) -> HhatValue:
    if not 0 <= i <= mseq.top:
        raise IndexOutOfRange(f"i={i} outside 0..{mseq.top}")
    nr = mseq.n * mseq.r
    return HhatValue(i, Fraction(mseq.a(i), nr ** i) - 1)


def alpha0(mseq: MatchSequence, k: int, i: int,
           budget_bits: int = EXACT_BITS) -> Alpha0Value:
    """prod_{L+} (1 + Ĥ_{i+l})^C(k,l) - prod_{L-} (1 + Ĥ_{i+l})^C(k,l)."""
    if k < 2 or i < 0 or i + k > min(mseq.n, mseq.top):
        raise IndexOutOfRange(f"alpha0 needs k >= 2, 0 <= i, i+k <= n; "
                              f"got k={k}, i={i}")
    plus, minus = parity_sets(k)
    nr = mseq.n * mseq.r
    size = sum(comb(k, l) * (mseq.a(i + l).bit_length()
                             + (i + l) * nr.bit_length())
               for l in range(k + 1))
    if size > budget_bits:
        return Alpha0Value(k, i, None, tuple(plus), tuple(minus),
                           _alpha0_interval(mseq, k, i, plus, minus))
    one_plus = {l: 1 + hhat(mseq, i + l).value for l in range(k + 1)}
    p = Fraction(1)
    for l in plus:
        p *= one_plus[l] ** comb(k, l)
    q = Fraction(1)
    for l in minus:
        q *= one_plus[l] ** comb(k, l)
    return Alpha0Value(k, i, p - q, tuple(plus), tuple(minus))


def _alpha0_interval(mseq, k, i, plus, minus, prec: int = 256):
    ctx = _iv_context(prec)
    nr = ctx.mpf(mseq.n * mseq.r)

    def log_prod(ls):
        acc = ctx.mpf(0)
        for l in ls:
            acc += comb(k, l) * (ctx.log(ctx.mpf(mseq.a(i + l)))
                                 - (i + l) * ctx.log(nr))
        return acc

    lo, hi = (ctx.exp(log_prod(plus)) - ctx.exp(log_prod(minus)))._mpi_
    return mpmath.mp.make_mpf(lo), mpmath.mp.make_mpf(hi)


def limit_constant(k: int, r: int) -> Fraction:
    """(k-2)! (1/r^(k-1) - 2), the n^(k-1)-scaled limit of alpha_0."""
    return factorial(k - 2) * (Fraction(1, r ** (k - 1)) - 2)


def asymptotic_alpha0(k: int, r: int, n: int) -> Fraction:
    if k < 2 or r < 1 or n < 1:
        raise ValueError("need k >= 2, r >= 1, n >= 1")
    return limit_constant(k, r) / n ** (k - 1)


def second_moment_bound(samples: Sequence) -> BoundEstimate:
    """Empirical alpha (mean), beta (population variance) and beta/alpha^2.

    ``bound`` is None when alpha >= 0, where the inequality says nothing.
    """
    xs = [Fraction(x) for x in samples]
    if len(xs) < 2:
        raise InsufficientSamples("second_moment_bound needs >= 2 samples")
    return _bound_from_sums(len(xs), sum(xs), sum(x * x for x in xs))


def _bound_from_sums(count: int, s1: Fraction, s2: Fraction) -> BoundEstimate:
    alpha = s1 / count
    beta = s2 / count - alpha * alpha
    bound = beta / (alpha * alpha) if alpha < 0 else None
    return BoundEstimate(alpha, beta, bound, count)


def wilson_interval(successes: int, trials: int,
                    z: float = WILSON_Z) -> tuple[float, float]:
    if trials <= 0:
        return 0.0, 1.0
    p = successes / trials
    denom = 1 + z * z / trials
    centre = (p + z * z / (2 * trials)) / denom
    half = z * math.sqrt(p * (1 - p) / trials + z * z / (4 * trials * trials)) / denom
    lo = 0.0 if successes == 0 else max(0.0, centre - half)
    hi = 1.0 if successes == trials else min(1.0, centre + half)
    return lo, hi


def in_proven_range(r: int, k: int, i: int) -> bool:
    """Whether (r, k, i) lies in the parameter box where the limit is proven."""
    if k < 2:
        return False
    return (r <= 10 and i + k <= 100 and k <= 27) or i + k <= 29


def trial_seed(seed: int, n: int, trial: int) -> int:
    state = np.random.SeedSequence([seed, n, trial]).generate_state(2, np.uint32)
    return int(state[0]) << 32 | int(state[1])


# -- sweeps ------------------------------------------------------------------

@dataclass
class TrialResult:
    n: int
    trial: int
    seed: int
    # (k, i) -> (sign value, alpha_0 as "p/q")
    outcomes: dict[tuple[int, int], tuple[str, str]] = field(default_factory=dict)
    error: str | None = None

    def to_record(self) -> dict:
        return {"n": self.n, "trial": self.trial, "seed": self.seed,
                "error": self.error,
                "outcomes": [[k, i, s, a] for (k, i), (s, a)
                             in sorted(self.outcomes.items())]}

    @classmethod
    def from_record(cls, rec: dict) -> "TrialResult":
        return cls(rec["n"], rec["trial"], rec["seed"],
                   {(k, i): (s, a) for k, i, s, a in rec["outcomes"]},
                   rec.get("error"))


def run_trial(r: int, n: int, pairs: Sequence[tuple[int, int]], seed: int,
              trial: int) -> TrialResult:
    s = trial_seed(seed, n, trial)
    res = TrialResult(n, trial, s)
    try:
        g = sample_configuration(n, r, s)
        top = max(i + k for k, i in pairs)
        mseq = truncated_match_sequence(g, top)
    except VirialError as exc:
        res.error = f"{type(exc).__name__}: {exc}"
        return res
    for k, i in pairs:
        verdict = delta_sign(mseq, k, i)
        a0 = alpha0(mseq, k, i)
        if a0.value is None:
            # enclosure midpoint rounded to a double; exact value is unwieldy
            lo, hi = a0.interval
            val = str(Fraction(float((lo + hi) / 2)))
        else:
            val = str(a0.value)
        res.outcomes[(k, i)] = (verdict.sign.value, val)
    return res


@dataclass
class SweepRow:
    n: int
    r: int
    k: int
    i: int
    trials: int
    violations: int
    undetermined: int
    wilson_lo: float
    wilson_hi: float
    mean_alpha0: Fraction
    beta: Fraction
    bound: Fraction | None
    proven: bool

    @property
    def frequency(self) -> float:
        return self.violations / self.trials if self.trials else 0.0

    @property
    def scaled_alpha0(self) -> Fraction:
        return self.mean_alpha0 * self.n ** (self.k - 1)

    @property
    def limit_const(self) -> Fraction:
        return limit_constant(self.k, self.r)

    @property
    def relative_gap(self) -> float:
        lim = self.limit_const
        return float(abs(self.scaled_alpha0 - lim) / abs(lim))

    def csv_dict(self) -> dict:
        return {
            "n": self.n, "r": self.r, "k": self.k, "i": self.i,
            "trials": self.trials, "violations": self.violations,
            "frequency": repr(self.frequency),
            "wilson_lo": repr(self.wilson_lo), "wilson_hi": repr(self.wilson_hi),
            "mean_alpha0": repr(float(self.mean_alpha0)),
            "scaled_alpha0": repr(float(self.scaled_alpha0)),
            "limit_const": repr(float(self.limit_const)),
            "beta_over_alpha2": "" if self.bound is None else repr(float(self.bound)),
            "undetermined": self.undetermined,
            "range_label": "proven" if self.proven else "beyond proven range",
        }


@dataclass
class SweepReport:
    r: int
    k: int
    i: int
    n_list: tuple[int, ...]
    trials: int
    seed: int
    rows: list[SweepRow]
    failures: list[dict] = field(default_factory=list)

    def row(self, n: int) -> SweepRow:
        for row in self.rows:
            if row.n == n:
                return row
        raise KeyError(n)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
        w.writeheader()
        for row in self.rows:
            w.writerow(row.csv_dict())
        return buf.getvalue()

    def to_jsonl(self) -> str:
        config = {"r": self.r, "k": self.k, "i": self.i,
                  "n_list": list(self.n_list), "trials": self.trials,
                  "seed": self.seed}
        lines = [json.dumps({"config": config, "failures": self.failures},
                            sort_keys=True)]
        for row in self.rows:
            d = row.csv_dict()
            d["mean_alpha0_exact"] = str(row.mean_alpha0)
            d["beta_exact"] = str(row.beta)
            lines.append(json.dumps(d, sort_keys=True))
        return "\n".join(lines) + "\n"


def aggregate(r: int, k: int, i: int, n: int,
              results: Iterable[TrialResult]) -> SweepRow:
    """Fold trial results for one (n, k, i); order-independent."""
    count = violations = undetermined = 0
    s1 = s2 = Fraction(0)
    for res in results:
        if res.n != n or res.error is not None:
            continue
        sign, a0 = res.outcomes[(k, i)]
        x = Fraction(a0)
        count += 1
        s1 += x
        s2 += x * x
        if sign == Sign.NEGATIVE.value:
            violations += 1
        elif sign == Sign.UNDETERMINED.value:
            undetermined += 1
    if count == 0:
        raise VirialError(f"all trials failed for n={n}")
    est = _bound_from_sums(count, s1, s2)
    lo, hi = wilson_interval(violations, count)
    return SweepRow(n, r, k, i, count, violations, undetermined, lo, hi,
                    est.alpha, est.beta, est.bound, in_proven_range(r, k, i))


def _check_sweep_args(pairs, n_list, trials):
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if not n_list:
        raise ValueError("n_list must not be empty")
    for k, i in pairs:
        if k < 2 or i < 0 or i + k > min(n_list):
            raise IndexOutOfRange(
                f"(k={k}, i={i}) outside the meaningful range for n={min(n_list)}")


def sweep_table(r: int, pairs: Sequence[tuple[int, int]], n_list: Sequence[int],
                trials: int, seed: int,
                results: list[TrialResult] | None = None,
                ) -> dict[tuple[int, int], SweepReport]:
    """Sweep several (k, i) targets over one shared set of sampled graphs.

    Pass ``results`` to reuse already computed trials (missing ones are run
    and appended).
    """
    pairs = [tuple(p) for p in pairs]
    _check_sweep_args(pairs, n_list, trials)
    done = {(res.n, res.trial) for res in results or []}
    results = list(results or [])
    for n in n_list:
        for t in range(trials):
            if (n, t) not in done:
                results.append(run_trial(r, n, pairs, seed, t))
    failures = [{"n": res.n, "trial": res.trial, "seed": res.seed,
                 "error": res.error} for res in results if res.error]
    for f in failures:
        log.warning("trial failed: %s", f)
    reports = {}
    for k, i in pairs:
        rows = [aggregate(r, k, i, n, results) for n in n_list]
        reports[(k, i)] = SweepReport(r, k, i, tuple(n_list), trials, seed,
                                      rows, failures)
    return reports


def violation_sweep(r: int, k: int, i: int, n_list: Sequence[int], trials: int,
                    seed: int) -> SweepReport:
    return sweep_table(r, [(k, i)], n_list, trials, seed)[(k, i)]


@dataclass(frozen=True)
class ScalingRow:
    n: int
    mean_alpha0: Fraction
    scaled_alpha0: Fraction
    limit_const: Fraction
    relative_gap: float


def scaling_rows(report: SweepReport) -> list[ScalingRow]:
    return [ScalingRow(row.n, row.mean_alpha0, row.scaled_alpha0,
                       row.limit_const, row.relative_gap) for row in report.rows]


def scaling_check(r: int, k: int, i: int, n_list: Sequence[int], trials: int,
                  seed: int) -> list[ScalingRow]:
    """Empirical n^(k-1) * mean(alpha_0) against its predicted limit."""
    return scaling_rows(violation_sweep(r, k, i, n_list, trials, seed))


def scaling_csv(rows: Sequence[ScalingRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["n", "mean_alpha0", "scaled_alpha0", "limit_const",
                "relative_gap"])
    for row in rows:
        w.writerow([row.n, repr(float(row.mean_alpha0)),
                    repr(float(row.scaled_alpha0)),
                    repr(float(row.limit_const)), repr(row.relative_gap)])
    return buf.getvalue()
