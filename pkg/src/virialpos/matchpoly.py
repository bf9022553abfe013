"""Exact matching sequences m_0..m_n of bipartite graphs.

The main routine is a column-by-column subset DP over used left vertices.
Only left vertices that still have unprocessed neighbours are kept in the
state mask; once a vertex's last column is done its bit is dropped and the
states are merged.  Each state carries a generating polynomial in the number
of matched edges, packed into a single Python int (``width`` bits per
coefficient) so that shifting by one coefficient is multiplication by x.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import comb, factorial
from typing import Sequence

from .errors import IndexOutOfRange, SizeLimitExceeded
from .graphgen import BipartiteGraph, validate

DP_MAX_N = 24
FRONTIER_MAX = 22
BRUTEFORCE_MAX_N = 8


@dataclass(frozen=True)
class MatchSequence:
    """``m[i]`` is the number of i-matchings.

    Sequences produced by :func:`truncated_match_sequence` hold only a
    prefix ``m[0..len(m)-1]``; ``complete`` tells the two apart.
    """

    n: int
    r: int
    m: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "m", tuple(int(x) for x in self.m))
        if not 1 <= len(self.m) <= self.n + 1:
            raise ValueError("matching sequence length must be in 1..n+1")

    @property
    def complete(self) -> bool:
        return len(self.m) == self.n + 1

    @property
    def top(self) -> int:
        """Largest index held."""
        return len(self.m) - 1

    def __getitem__(self, i: int) -> int:
        if not 0 <= i < len(self.m):
            raise IndexOutOfRange(f"m_{i} not available (have 0..{self.top})")
        return self.m[i]

    def a(self, j: int) -> int:
        """j! * m_j, the quantity whose logarithm is -u(j)."""
        return factorial(j) * self[j]

    def to_text(self) -> str:
        return "\n".join([f"{self.n} {self.r}"] + [str(x) for x in self.m]) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "MatchSequence":
        lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
        n, r = (int(t) for t in lines[0].split())
        return cls(n, r, tuple(int(t) for t in lines[1:]))


def column_order(g: BipartiteGraph) -> list[int]:
    """Greedy right-vertex order keeping the set of open left vertices small."""
    cols = g.columns()
    remaining = [row.bit_count() for row in g.rows]
    opened = 0
    order: list[int] = []
    todo = set(range(g.n))
    while todo:
        def cost(b):
            nb = cols[b]
            closes = sum(1 for a in range(g.n)
                         if nb >> a & 1 and remaining[a] == 1)
            opens = (nb & ~opened).bit_count()
            return (opens - closes, opens, b)
        b = min(todo, key=cost)
        todo.remove(b)
        order.append(b)
        opened |= cols[b]
        for a in range(g.n):
            if cols[b] >> a & 1:
                remaining[a] -= 1
    return order


def _coeff_width(g: BipartiteGraph, top: int) -> int:
    edges = sum(row.bit_count() for row in g.rows)
    bound = max(min(comb(edges, j), comb(g.n, j) ** 2 * factorial(j))
                for j in range(top + 1))
    return bound.bit_length() + 1


def _frontier_dp(g: BipartiteGraph, top: int, frontier_max: int) -> list[int]:
    n = g.n
    width = _coeff_width(g, top)
    keep = (1 << (width * (top + 1))) - 1
    cols = g.columns()
    remaining = [row.bit_count() for row in g.rows]
    states: dict[int, int] = {0: 1}
    for b in column_order(g):
        nbrs = [a for a in range(n) if cols[b] >> a & 1]
        nxt: dict[int, int] = {}
        for mask, poly in states.items():
            nxt[mask] = nxt.get(mask, 0) + poly
            shifted = (poly << width) & keep
            if not shifted:
                continue
            for a in nbrs:
                if not mask >> a & 1:
                    key = mask | (1 << a)
                    nxt[key] = nxt.get(key, 0) + shifted
        closing = 0
        for a in nbrs:
            remaining[a] -= 1
            if remaining[a] == 0:
                closing |= 1 << a
        if closing:
            merged: dict[int, int] = {}
            for mask, poly in nxt.items():
                key = mask & ~closing
                merged[key] = merged.get(key, 0) + poly
            nxt = merged
        if len(nxt) > 1 << frontier_max:
            raise SizeLimitExceeded(
                f"DP frontier exceeded 2^{frontier_max} states")
        states = nxt
    total = sum(states.values())
    field = (1 << width) - 1
    return [(total >> (width * j)) & field for j in range(top + 1)]


def match_sequence_dp(g: BipartiteGraph, max_n: int = DP_MAX_N) -> MatchSequence:
    """Exact m_0..m_n by subset DP over used left vertices."""
    if not validate(g):
        raise ValueError("match_sequence_dp needs a valid regular graph")
    if g.n > max_n:
        raise SizeLimitExceeded(f"n={g.n} exceeds DP cap {max_n}")
    m = _frontier_dp(g, g.n, frontier_max=max_n)
    return MatchSequence(g.n, g.r, tuple(m))


def truncated_match_sequence(g: BipartiteGraph, top: int,
                             frontier_max: int = FRONTIER_MAX) -> MatchSequence:
    """m_0..m_top only; works for n past the full-DP cap as long as the
    DP frontier stays below ``2**frontier_max`` states."""
    if not validate(g):
        raise ValueError("truncated_match_sequence needs a valid regular graph")
    if not 0 <= top <= g.n:
        raise IndexOutOfRange(f"top={top} outside 0..{g.n}")
    return MatchSequence(g.n, g.r, tuple(_frontier_dp(g, top, frontier_max)))


def match_sequence_bruteforce(g: BipartiteGraph) -> MatchSequence:
    """Tally every matching by explicit recursion; reference oracle."""
    if not validate(g):
        raise ValueError("match_sequence_bruteforce needs a valid regular graph")
    if g.n > BRUTEFORCE_MAX_N:
        raise SizeLimitExceeded(f"brute force limited to n <= {BRUTEFORCE_MAX_N}")
    n = g.n
    nbrs = [g.neighbors(a) for a in range(n)]
    counts = [0] * (n + 1)

    def rec(a: int, used_right: int, size: int) -> None:
        if a == n:
            counts[size] += 1
            return
        rec(a + 1, used_right, size)
        for b in nbrs[a]:
            if not used_right >> b & 1:
                rec(a + 1, used_right | (1 << b), size + 1)

    rec(0, 0, 0)
    return MatchSequence(n, g.r, tuple(counts))


def complete_bipartite_sequence(n: int) -> tuple[int, ...]:
    return tuple(comb(n, i) ** 2 * factorial(i) for i in range(n + 1))


def cycle_sequence(n: int) -> tuple[int, ...]:
    """Matchings of the cycle C_{2n}: (2n / (2n - i)) * C(2n - i, i)."""
    v = 2 * n
    return tuple(v * comb(v - i, i) // (v - i) for i in range(n + 1))


def convolve(x: Sequence[int], y: Sequence[int]) -> tuple[int, ...]:
    out = [0] * (len(x) + len(y) - 1)
    for i, xi in enumerate(x):
        for j, yj in enumerate(y):
            out[i + j] += xi * yj
    return tuple(out)


def is_log_concave(m: Sequence[int]) -> bool:
    return all(m[i] * m[i] >= m[i - 1] * m[i + 1] for i in range(1, len(m) - 1))
