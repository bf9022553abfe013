"""Regular bipartite graphs: construction, random sampling, canonical forms
and isomorph-free enumeration.

A graph on ``n + n`` vertices is stored as ``n`` row bitmasks of its
biadjacency matrix: bit ``b`` of ``rows[a]`` is set when left vertex ``a``
is joined to right vertex ``b``.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from typing import Iterator, Sequence

import numpy as np

from .errors import InvalidDegree, RejectionBudgetExceeded

MAX_RESTARTS = 10**6


@dataclass(frozen=True)
class BipartiteGraph:
    n: int
    r: int
    rows: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "rows", tuple(int(x) for x in self.rows))

    @property
    def v(self) -> int:
        return 2 * self.n

    def neighbors(self, a: int) -> list[int]:
        row = self.rows[a]
        return [b for b in range(self.n) if row >> b & 1]

    def columns(self) -> tuple[int, ...]:
        cols = [0] * self.n
        for a, row in enumerate(self.rows):
            for b in range(self.n):
                if row >> b & 1:
                    cols[b] |= 1 << a
        return tuple(cols)

    def edges(self) -> list[tuple[int, int]]:
        return [(a, b) for a in range(self.n) for b in self.neighbors(a)]

    def has_edge(self, a: int, b: int) -> bool:
        return bool(self.rows[a] >> b & 1)

    def transpose(self) -> "BipartiteGraph":
        return BipartiteGraph(self.n, self.r, self.columns())

    def complement(self, r: int | None = None) -> "BipartiteGraph":
        full = (1 << self.n) - 1
        return BipartiteGraph(
            self.n, self.n - self.r if r is None else r,
            tuple(full & ~row for row in self.rows))

    def relabel(self, row_perm: Sequence[int], col_perm: Sequence[int],
                transpose: bool = False) -> "BipartiteGraph":
        """Move left vertex ``a`` to ``row_perm[a]`` and right vertex ``b``
        to ``col_perm[b]``, then optionally swap the two sides."""
        rows = [0] * self.n
        for a, b in self.edges():
            rows[row_perm[a]] |= 1 << col_perm[b]
        g = BipartiteGraph(self.n, self.r, tuple(rows))
        return g.transpose() if transpose else g

    def matrix(self) -> np.ndarray:
        return np.array([[row >> b & 1 for b in range(self.n)]
                         for row in self.rows], dtype=np.uint8)


def from_edges(n: int, r: int, edges) -> BipartiteGraph:
    rows = [0] * n
    for a, b in edges:
        rows[a] |= 1 << b
    return BipartiteGraph(n, r, tuple(rows))


def from_matrix(matrix, r: int | None = None) -> BipartiteGraph:
    m = np.asarray(matrix)
    n = m.shape[0]
    rows = tuple(sum(1 << b for b in range(n) if m[a, b]) for a in range(n))
    if r is None:
        r = int(m[0].sum()) if n else 0
    return BipartiteGraph(n, r, rows)


def complete(n: int) -> BipartiteGraph:
    return BipartiteGraph(n, n, ((1 << n) - 1,) * n)


def cycle(n: int) -> BipartiteGraph:
    """The cycle C_{2n} (n >= 2) as a 2-regular bipartite graph."""
    if n < 2:
        raise InvalidDegree("C_{2n} needs n >= 2")
    return from_edges(n, 2, [(a, a) for a in range(n)]
                      + [(a, (a + 1) % n) for a in range(n)])


def circulant(n: int, r: int) -> BipartiteGraph:
    """Left vertex a joined to right vertices a, a+1, ..., a+r-1 (mod n)."""
    _check_degree(n, r)
    return from_edges(n, r, [(a, (a + j) % n) for a in range(n) for j in range(r)])


def disjoint_union(g1: BipartiteGraph, g2: BipartiteGraph) -> BipartiteGraph:
    if g1.r != g2.r:
        raise InvalidDegree("disjoint union of graphs with different degrees")
    rows = g1.rows + tuple(row << g1.n for row in g2.rows)
    return BipartiteGraph(g1.n + g2.n, g1.r, rows)


def validate(g) -> bool:
    try:
        n, r, rows = g.n, g.r, tuple(g.rows)
    except AttributeError:
        return False
    if not (isinstance(n, int) and isinstance(r, int)) or n < 1:
        return False
    if not 1 <= r <= n or len(rows) != n:
        return False
    full = (1 << n) - 1
    colsum = [0] * n
    for row in rows:
        if not isinstance(row, int) or row < 0 or row & ~full:
            return False
        if row.bit_count() != r:
            return False
        for b in range(n):
            colsum[b] += row >> b & 1
    return all(c == r for c in colsum)


def is_connected(g: BipartiteGraph) -> bool:
    cols = g.columns()
    left, right = 1, 0
    while True:
        new_right = right
        for a in range(g.n):
            if left >> a & 1:
                new_right |= g.rows[a]
        new_left = left
        for b in range(g.n):
            if new_right >> b & 1:
                new_left |= cols[b]
        if (new_left, new_right) == (left, right):
            break
        left, right = new_left, new_right
    full = (1 << g.n) - 1
    return left == full and right == full


def _check_degree(n: int, r: int) -> None:
    if n < 1:
        raise InvalidDegree(f"side size must be positive, got n={n}")
    if not 1 <= r <= n:
        raise InvalidDegree(f"degree r={r} outside 1..n for n={n}")


# -- random sampling ---------------------------------------------------------

def _pairing(n: int, r: int, rng: np.random.Generator,
             max_restarts: int) -> BipartiteGraph:
    left = np.repeat(np.arange(n), r)
    right = np.repeat(np.arange(n), r)
    for _ in range(max_restarts):
        codes = left * n + rng.permutation(right)
        if np.unique(codes).size == codes.size:
            rows = [0] * n
            for c in codes.tolist():
                rows[c // n] |= 1 << (c % n)
            return BipartiteGraph(n, r, tuple(rows))
    raise RejectionBudgetExceeded(
        f"no simple pairing for n={n}, r={r} after {max_restarts} restarts")


def sample_configuration(n: int, r: int, seed: int,
                         max_restarts: int = MAX_RESTARTS) -> BipartiteGraph:
    """Uniform simple r-regular bipartite graph by stub pairing with full
    restarts on repeated pairs.

    For ``r > n/2`` the (n - r)-regular complement is sampled instead, which
    is uniform as well and keeps the acceptance rate workable near K_{n,n}.
    """
    _check_degree(n, r)
    rng = np.random.default_rng(seed)
    if 2 * r > n:
        if r == n:
            return complete(n)
        return _pairing(n, n - r, rng, max_restarts).complement(r)
    return _pairing(n, r, rng, max_restarts)


def sample_switch_chain(g: BipartiteGraph, steps: int,
                        seed: int) -> BipartiteGraph:
    """Run ``steps`` proposals of the 2x2 switch chain starting from ``g``.

    A proposal picks two edges (a, b), (a2, b2) uniformly; if (a, b2) and
    (a2, b) are both absent they are swapped in, otherwise nothing happens.
    """
    if not validate(g):
        raise InvalidDegree("sample_switch_chain needs a valid regular graph")
    if steps < 0:
        raise ValueError("steps must be non-negative")
    if steps == 0:
        return g
    rng = np.random.default_rng(seed)
    rows = list(g.rows)
    edges = g.edges()
    picks = rng.integers(0, len(edges), size=(steps, 2)).tolist()
    for i, j in picks:
        a, b = edges[i]
        a2, b2 = edges[j]
        if a == a2 or b == b2:
            continue
        if rows[a] >> b2 & 1 or rows[a2] >> b & 1:
            continue
        rows[a] ^= (1 << b) | (1 << b2)
        rows[a2] ^= (1 << b2) | (1 << b)
        edges[i] = (a, b2)
        edges[j] = (a2, b)
    return BipartiteGraph(g.n, g.r, tuple(rows))


def sample_regular(n: int, r: int, seed: int, max_restarts: int = 20_000,
                   switch_steps: int | None = None) -> BipartiteGraph:
    """Configuration-model sample, falling back to a long switch chain from
    a circulant graph when rejection sampling runs out of restarts.

    The fallback is only approximately uniform.
    """
    try:
        return sample_configuration(n, r, seed, max_restarts)
    except RejectionBudgetExceeded:
        steps = 200 * n * r if switch_steps is None else switch_steps
        return sample_switch_chain(circulant(n, r), steps, seed)


# -- canonical form ----------------------------------------------------------

@dataclass(frozen=True, order=True)
class CanonicalCode:
    """Header bytes ``n, r`` followed by the lexicographically maximal
    biadjacency matrix, row-major, packed big-endian."""

    data: bytes

    def hex(self) -> str:
        return self.data.hex()

    @classmethod
    def fromhex(cls, text: str) -> "CanonicalCode":
        return cls(bytes.fromhex(text.strip()))


def _row_value(mask: int, cells: list[int]) -> int:
    # ones first inside each cell: the best this row can look
    v = 0
    for cell in cells:
        s = cell.bit_count()
        c = (mask & cell).bit_count()
        v = (v << s) | (((1 << c) - 1) << (s - c))
    return v


def _refine(cells: list[int], mask: int) -> list[int]:
    out = []
    for cell in cells:
        hi, lo = cell & mask, cell & ~mask
        if hi:
            out.append(hi)
        if lo:
            out.append(lo)
    return out


def _lexmax(rows: Sequence[int], n: int) -> tuple[int, ...]:
    """Lexicographically largest matrix (rows as ints, column 0 as MSB)
    over all row and column permutations, by ordered-partition
    backtracking."""
    counts: dict[int, int] = {}
    for row in rows:
        counts[row] = counts.get(row, 0) + 1
    best: list[tuple[int, ...] | None] = [None]

    def rec(counts, cells, prefix, greater):
        depth = len(prefix)
        if not counts:
            if best[0] is None or greater or tuple(prefix) > best[0]:
                best[0] = tuple(prefix)
            return
        if len(cells) == n:
            # discrete partition: the rest of the matrix is forced
            tail = sorted((_row_value(m, cells) for m, c in counts.items()
                           for _ in range(c)), reverse=True)
            cand = tuple(prefix) + tuple(tail)
            if best[0] is None or cand > best[0]:
                best[0] = cand
            return
        vals = {m: _row_value(m, cells) for m in counts}
        vmax = max(vals.values())
        if best[0] is not None and not greater:
            target = best[0][depth]
            if vmax < target:
                return
            greater = vmax > target
        for m in sorted(counts, reverse=True):
            if vals[m] != vmax:
                continue
            rest = dict(counts)
            if rest[m] == 1:
                del rest[m]
            else:
                rest[m] -= 1
            prefix.append(vmax)
            rec(rest, _refine(cells, m), prefix, greater)
            prefix.pop()
            if best[0] is not None and not greater and best[0][depth] > vmax:
                return

    rec(counts, [(1 << n) - 1], [], False)
    return best[0]


def _pack(n: int, r: int, matrix: tuple[int, ...]) -> bytes:
    bits = 0
    for row in matrix:
        bits = (bits << n) | row
    nbytes = (n * n + 7) // 8
    bits <<= nbytes * 8 - n * n
    return bytes([n, r]) + bits.to_bytes(nbytes, "big")


def _canonical_matrix(g: BipartiteGraph) -> tuple[int, ...]:
    if g.n == 0:
        return ()
    return max(_lexmax(g.rows, g.n), _lexmax(g.columns(), g.n))


def canonical_form(g: BipartiteGraph) -> CanonicalCode:
    return CanonicalCode(_pack(g.n, g.r, _canonical_matrix(g)))


def _values_to_graph(n: int, r: int, values: Sequence[int]) -> BipartiteGraph:
    rows = tuple(sum(1 << p for p in range(n) if v >> (n - 1 - p) & 1)
                 for v in values)
    return BipartiteGraph(n, r, rows)


def canonicalize(g: BipartiteGraph) -> BipartiteGraph:
    """The representative whose matrix is the canonical one."""
    return _values_to_graph(g.n, g.r, _canonical_matrix(g))


# -- enumeration -------------------------------------------------------------

def _gale_ryser_ok(demand: list[int], rows_left: int, r: int) -> bool:
    if any(d < 0 or d > rows_left for d in demand):
        return False
    if sum(demand) != rows_left * r:
        return False
    acc = 0
    for j, d in enumerate(sorted(demand, reverse=True), start=1):
        acc += d
        if acc > rows_left * min(r, j):
            return False
    return True


def _candidate_rows(n: int, r: int) -> list[int]:
    vals = [sum(1 << (n - 1 - p) for p in c) for c in combinations(range(n), r)]
    return sorted(vals, reverse=True)


def _step(n: int, r: int, x: int, last: int | None, colsum: list[int],
          ties: int, rows_left: int):
    """Column sums and tie mask after appending row ``x``, or None when the
    row breaks an ordering constraint or column feasibility."""
    if last is not None and x > last:
        return None
    new_ties = 0
    for p in range(n - 1):
        if ties >> p & 1:
            xp = x >> (n - 1 - p) & 1
            xq = x >> (n - 2 - p) & 1
            if xq > xp:
                return None
            if xp == xq:
                new_ties |= 1 << p
    new_sum = [colsum[p] + (x >> (n - 1 - p) & 1) for p in range(n)]
    if not _gale_ryser_ok([r - s for s in new_sum], rows_left, r):
        return None
    return new_sum, new_ties


def _search(n: int, r: int, prefix: list[int], colsum: list[int], ties: int,
            cands: list[int]) -> Iterator[tuple[int, ...]]:
    """Matrices (rows as ints, column 0 as MSB) extending ``prefix`` whose
    rows are non-increasing and whose columns are non-increasing as
    vectors. ``ties`` has bit p set while columns p and p+1 are equal."""
    t = len(prefix)
    if t == n:
        yield tuple(prefix)
        return
    last = prefix[-1] if prefix else None
    for x in cands:
        nxt = _step(n, r, x, last, colsum, ties, n - t - 1)
        if nxt is None:
            continue
        prefix.append(x)
        yield from _search(n, r, prefix, nxt[0], nxt[1], cands)
        prefix.pop()


def _replay(n: int, r: int, prefix: Sequence[int]):
    colsum, ties = [0] * n, (1 << (n - 1)) - 1 if n > 1 else 0
    last = None
    for t, x in enumerate(prefix):
        nxt = _step(n, r, x, last, colsum, ties, n - t - 1)
        if nxt is None:
            raise ValueError("prefix violates the enumeration constraints")
        colsum, ties = nxt
        last = x
    return colsum, ties


def enumeration_branches(n: int, r: int) -> list[tuple[int, ...]]:
    """Independent top-level work items of the enumeration: the admissible
    two-row prefixes (the first row is forced to 1^r 0^(n-r))."""
    _check_degree(n, r)
    cands = _candidate_rows(n, r)
    if n == 1:
        return [(cands[0],)]
    colsum, ties = _replay(n, r, cands[:1])
    return [(cands[0], x) for x in cands
            if _step(n, r, x, cands[0], colsum, ties, n - 2) is not None]


def enumerate_branch(n: int, r: int, prefix: Sequence[int],
                     seen: set | None = None,
                     connected_only: bool = False) -> Iterator[BipartiteGraph]:
    """Canonical representatives of classes first reached under ``prefix``
    and not already in ``seen`` (updated in place)."""
    if seen is None:
        seen = set()
    cands = _candidate_rows(n, r)
    colsum, ties = _replay(n, r, prefix)
    for mat in _search(n, r, list(prefix), colsum, ties, cands):
        g = _values_to_graph(n, r, mat)
        if connected_only and not is_connected(g):
            continue
        code = canonical_form(g)
        if code in seen:
            continue
        seen.add(code)
        yield canonicalize(g)


def enumerate_regular(n: int, r: int,
                      connected_only: bool = False) -> Iterator[BipartiteGraph]:
    """One canonical representative per isomorphism class (part swap
    allowed) of r-regular bipartite graphs on n + n vertices, in a fixed
    order."""
    seen: set = set()
    for prefix in enumeration_branches(n, r):
        yield from enumerate_branch(n, r, prefix, seen, connected_only)
