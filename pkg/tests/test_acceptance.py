"""Acceptance criteria, one test per criterion.

Each test prints a single ``CRITERION <n> PASS|FAIL`` line (visible even
without ``-s``) and then asserts at the stated tolerance.  Set
``VIRIALPOS_STRETCH=1`` to include the r=4, v=20 enumeration.
"""

import os
import random
import time
from fractions import Fraction
from itertools import combinations
from math import comb, factorial, isfinite

import pytest

from virialpos.graphgen import (
    cycle,
    complete,
    enumerate_regular,
    is_connected,
    sample_configuration,
    sample_regular,
)
from virialpos.matchpoly import match_sequence_bruteforce, match_sequence_dp
from virialpos.stats import alpha0, sweep_table
from virialpos.virial import (
    Sign,
    check_m_conjecture,
    check_virial,
    delta_sign,
    meaningful_pairs,
)

# every match sequence touched by criteria 1-9, for criterion 10
TOUCHED = {}


def touch(g, mseq=None):
    mseq = mseq or match_sequence_dp(g)
    TOUCHED[(g.n, g.r, g.rows)] = mseq
    return mseq


@pytest.fixture
def report(capsys):
    def emit(number, ok, detail):
        with capsys.disabled():
            print(f"\nCRITERION {number} {'PASS' if ok else 'FAIL'}: {detail}")
    return emit


def edge_subset_count(g):
    # independent oracle: count matchings by brute force over edge subsets
    edges = list(g.edges())
    m = [0] * (g.n + 1)
    for size in range(g.n + 1):
        for sub in combinations(edges, size):
            if len({a for a, _ in sub}) == size and len({b for _, b in sub}) == size:
                m[size] += 1
    return tuple(m)


@pytest.fixture(scope="module")
def small_graphs():
    """All classes with n <= 7 and 2 <= r <= min(n, 7), with connectivity."""
    return [(g, is_connected(g)) for n in range(2, 8) for r in range(2, n + 1)
            for g in enumerate_regular(n, r)]


@pytest.fixture(scope="module")
def random_graphs():
    rng = random.Random(20240601)
    out = []
    for seed in range(1000):
        n = rng.randint(2, 12)
        r = rng.randint(1, min(n, 5))
        out.append(sample_regular(n, r, seed))
    return out


@pytest.fixture(scope="module")
def scaling_report():
    t = time.time()
    rep = sweep_table(3, [(2, 0)], [10, 40], 1000, seed=8)[(2, 0)]
    return rep, time.time() - t


def test_criterion_1_dp_matches_bruteforce(report):
    rng = random.Random(1)
    t = time.time()
    bad = 0
    for seed in range(200):
        n = rng.randint(1, 6)
        g = sample_configuration(n, rng.randint(1, n), seed)
        dp = touch(g)
        bad += dp != match_sequence_bruteforce(g)
    elapsed = time.time() - t
    ok = bad == 0 and elapsed < 60
    report(1, ok, f"{200 - bad}/200 equal, {elapsed:.1f}s")
    assert ok


def test_criterion_2_known_sequences(report):
    bad = []
    for n in range(1, 9):
        want = tuple(comb(n, i) ** 2 * factorial(i) for i in range(n + 1))
        if touch(complete(n)).m != want:
            bad.append(f"K{n},{n}")
    for n in range(2, 7):
        g = cycle(n)
        if touch(g).m != edge_subset_count(g):
            bad.append(f"C{2 * n}")
    if touch(cycle(3)).m != (1, 6, 9, 2):
        bad.append("C6 literal")
    report(2, not bad, "all exact" if not bad else f"mismatch: {bad}")
    assert not bad


def test_criterion_3_small_graphs_positive(report, small_graphs):
    t = time.time()
    conn_viol, undetermined, disc_viol, checked = [], [], 0, 0
    for g, connected in small_graphs:
        if g.r > 7:
            continue
        rep = check_virial(touch(g))
        if connected:
            checked += 1
            conn_viol += [(g.n, g.r, p) for p in rep.violations]
            undetermined += [(g.n, g.r, p) for p in rep.undetermined]
        else:
            disc_viol += bool(rep.violations)
    elapsed = time.time() - t
    ok = not conn_viol and not undetermined
    report(3, ok, f"{checked} connected classes (v<=14), {len(conn_viol)} violations, "
                  f"{len(undetermined)} undetermined, {elapsed:.1f}s; "
                  f"informational: {disc_viol} disconnected classes violate")
    assert ok


def test_criterion_4_single_violation_at_18(report):
    t = time.time()
    classes = violators = 0
    for g in enumerate_regular(9, 3, connected_only=True):
        classes += 1
        violators += not check_virial(touch(g)).virial_positive
    detail = f"r=3 v=18: {classes} connected classes, {violators} violating"
    ok = violators == 1
    if os.environ.get("VIRIALPOS_STRETCH") == "1":
        classes4 = violators4 = 0
        for g in enumerate_regular(10, 4, connected_only=True):
            classes4 += 1
            violators4 += not check_virial(match_sequence_dp(g)).virial_positive
        detail += f"; r=4 v=20: {classes4} classes, {violators4} violating"
        ok = ok and classes4 == 62611 and violators4 == 1
    else:
        detail += "; r=4 v=20 skipped (set VIRIALPOS_STRETCH=1)"
    report(4, ok, f"{detail}, {time.time() - t:.1f}s")
    assert ok


def test_criterion_5_sign_anticorrespondence(report, random_graphs):
    rng = random.Random(5)
    t = time.time()
    bad = 0
    for g in random_graphs:
        mseq = touch(g)
        k, i = rng.choice(meaningful_pairs(g.n))
        a = alpha0(mseq, k, i).value
        verdict = delta_sign(mseq, k, i).sign
        expect = (Sign.NEGATIVE if a > 0 else Sign.POSITIVE if a < 0 else Sign.ZERO)
        bad += verdict != expect
    elapsed = time.time() - t
    ok = bad == 0 and elapsed < 120
    report(5, ok, f"{1000 - bad}/1000 anti-correspond, {elapsed:.1f}s")
    assert ok


def test_criterion_6_scaling(report, scaling_report):
    rep, elapsed = scaling_report
    lo, hi = rep.row(10), rep.row(40)
    within = abs(hi.scaled_alpha0 - Fraction(-5, 3)) <= Fraction(1, 4) * Fraction(5, 3)
    shrinks = hi.relative_gap < lo.relative_gap
    ok = within and shrinks
    report(6, ok, f"scaled mean n=40: {float(hi.scaled_alpha0):.6f} "
                  f"(within 25%: {within}); relative gap n=10: {lo.relative_gap:.3g}, "
                  f"n=40: {hi.relative_gap:.3g} (strictly smaller: {shrinks}), "
                  f"{elapsed:.1f}s")
    assert within
    assert shrinks


def test_criterion_7_weak_positivity_trend(report):
    pairs = [(k, i) for k in range(2, 6) for i in range(6)]
    t = time.time()
    reps = sweep_table(3, pairs, [10, 30], 2000, seed=7)
    bad = []
    for pair in pairs:
        lo, hi = reps[pair].row(10), reps[pair].row(30)
        overlap = lo.wilson_lo == 0 and hi.wilson_lo == 0
        trend = hi.frequency <= lo.frequency or overlap
        if not (trend and hi.frequency <= 0.01):
            bad.append((pair, lo.frequency, hi.frequency))
    worst = max(reps[p].row(30).frequency for p in pairs)
    ok = not bad
    report(7, ok, f"{len(pairs) - len(bad)}/{len(pairs)} pairs ok, max freq at "
                  f"n=30: {worst:.4f}, {time.time() - t:.1f}s")
    assert ok, bad


def test_criterion_8_second_moment(report, scaling_report):
    rep, _ = scaling_report
    b10, b40 = rep.row(10).bound, rep.row(40).bound
    sane = all(b is not None and isfinite(float(b)) and b >= 0 for b in (b10, b40))
    decreasing = sane and b40 < b10
    report(8, sane and decreasing,
           f"beta/alpha^2 n=10: {b10}, n=40: {b40}; finite and non-negative: {sane}; "
           f"strictly decreasing: {decreasing}")
    assert sane
    assert decreasing


def test_criterion_9_m_conjecture(report, small_graphs, random_graphs):
    negatives = []
    total = 0
    sources = [g for g, _ in small_graphs] + list(random_graphs)
    for g in sources:
        mseq = touch(g)
        for k, i in meaningful_pairs(g.n):
            total += 1
            if check_m_conjecture(mseq, k, i).sign is Sign.NEGATIVE:
                negatives.append((g.n, g.r, k, i))
    graphs_hit = len({(n, r) for n, r, *_ in negatives})
    # a Negative here is a finding to surface, not a failure
    report(9, True, f"{total} verdicts over {len(sources)} graphs; finding: "
                    f"{len(negatives)} Negative verdicts across {graphs_hit} (n, r) "
                    f"settings, e.g. {negatives[:3]}")


def test_criterion_10_k2_never_negative(report, small_graphs, random_graphs):
    for g, _ in small_graphs:
        touch(g)
    for g in random_graphs:
        touch(g)
    bad = []
    for (n, r, _), mseq in TOUCHED.items():
        for i in range(n - 1):
            if delta_sign(mseq, 2, i).sign is Sign.NEGATIVE:
                bad.append((n, r, i))
    report(10, not bad, f"{len(TOUCHED)} graphs, {len(bad)} negative k=2 verdicts")
    assert not bad
