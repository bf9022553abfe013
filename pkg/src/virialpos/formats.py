"""Graph text format.

One record per graph: a header line ``n r`` followed by ``n`` lines, line
``a`` listing the sorted right neighbours of left vertex ``a`` (0-based,
space separated).  Blank lines and ``#`` comment lines may appear between
records.
"""

from __future__ import annotations

from pathlib import Path
from typing import Iterable, Iterator

from .errors import GraphParseError
from .graphgen import BipartiteGraph, validate


def format_graph(g: BipartiteGraph, comment: str | None = None) -> str:
    lines = [] if comment is None else [f"# {comment}"]
    lines.append(f"{g.n} {g.r}")
    lines.extend(" ".join(str(b) for b in g.neighbors(a)) for a in range(g.n))
    return "\n".join(lines) + "\n"


def format_graphs(graphs: Iterable[BipartiteGraph]) -> str:
    return "".join(format_graph(g) for g in graphs)


def iter_graphs(text: str) -> Iterator[tuple[int, BipartiteGraph]]:
    """Yield ``(header_line_number, graph)`` pairs."""
    lines = text.splitlines()
    pos = 0

    def next_content():
        nonlocal pos
        while pos < len(lines):
            raw = lines[pos].strip()
            pos += 1
            if raw and not raw.startswith("#"):
                return pos, raw
        return None

    while True:
        got = next_content()
        if got is None:
            return
        lineno, header = got
        parts = header.split()
        if len(parts) != 2 or not all(p.isdigit() for p in parts):
            raise GraphParseError(f"expected header 'n r', got {header!r}", lineno)
        n, r = int(parts[0]), int(parts[1])
        if n < 1:
            raise GraphParseError("n must be positive", lineno)
        rows = []
        for _ in range(n):
            if pos >= len(lines):
                raise GraphParseError(
                    f"record ends after {len(rows)} of {n} neighbour lines", lineno)
            raw = lines[pos].strip()
            pos += 1
            row = 0
            for tok in raw.split():
                if not tok.isdigit() or int(tok) >= n:
                    raise GraphParseError(f"bad neighbour index {tok!r}", pos)
                b = int(tok)
                if row >> b & 1:
                    raise GraphParseError(f"repeated neighbour {b}", pos)
                row |= 1 << b
            rows.append(row)
        g = BipartiteGraph(n, r, tuple(rows))
        if not validate(g):
            raise GraphParseError(f"graph is not a simple {r}-regular bipartite "
                                  f"graph on {n}+{n} vertices", lineno)
        yield lineno, g


def parse_graphs(text: str) -> list[BipartiteGraph]:
    return [g for _, g in iter_graphs(text)]


def read_graphs(path) -> list[BipartiteGraph]:
    return parse_graphs(Path(path).read_text())


def write_graphs(path, graphs: Iterable[BipartiteGraph]) -> None:
    Path(path).write_text(format_graphs(graphs))
