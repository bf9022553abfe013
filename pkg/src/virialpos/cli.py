"""Batch front end.

Subcommands: gen, enumerate, check, sweep, scaling, bound.  Every flag can
also come from a JSON config file (``--config``); flags given on the command
line win.  Long runs keep an append-only JSONL store next to ``--out`` and
pick up where they stopped with ``--resume``.

Exit codes: 0 success, 1 usage error, 2 computation error, 3 positivity
violation found under ``--fail-on-violation``.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from functools import partial
from itertools import product
from pathlib import Path

from .errors import GraphParseError, SizeLimitExceeded, VirialError
from .formats import format_graph, iter_graphs
from .graphgen import (
    BipartiteGraph,
    CanonicalCode,
    canonical_form,
    enumerate_branch,
    enumeration_branches,
    sample_configuration,
)
from .matchpoly import match_sequence_dp
from .stats import (
    CSV_COLUMNS,
    TrialResult,
    _check_sweep_args,
    run_trial,
    scaling_rows,
    sweep_table,
    trial_seed,
)
from .virial import EXACT_BITS, MAX_PRECISION, check_virial

log = logging.getLogger("virialpos")

EXIT_OK, EXIT_USAGE, EXIT_COMPUTE, EXIT_VIOLATION = 0, 1, 2, 3
ENUM_MAX_N = 12
COMMANDS = ("gen", "enumerate", "check", "sweep", "scaling", "bound")
# fields that do not change what gets computed
NON_SEMANTIC = {"out", "resume", "workers", "block", "fail_on_violation",
                "stop_after"}


class UsageError(Exception):
    pass


class Interrupted(Exception):
    pass


@dataclass
class ExperimentConfig:
    command: str
    n: list[int] = field(default_factory=list)
    r: int | None = None
    k: list[int] = field(default_factory=list)
    i: list[int] = field(default_factory=list)
    trials: int = 100
    seed: int = 0
    count: int = 1
    connected_only: bool = False
    exact_bits: int = EXACT_BITS
    max_precision_bits: int = MAX_PRECISION
    also_m_conjecture: bool = False
    inputs: list[str] = field(default_factory=list)
    out: str | None = None
    resume: bool = False
    fail_on_violation: bool = False
    workers: int = 1
    block: int = 100
    stop_after: int | None = None

    def semantic(self) -> dict:
        return {k: v for k, v in asdict(self).items() if k not in NON_SEMANTIC}

    def config_hash(self) -> str:
        blob = json.dumps(self.semantic(), sort_keys=True)
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def to_json(self) -> str:
        d = asdict(self)
        d.pop("stop_after")
        return json.dumps(d, sort_keys=True, indent=2)

    @property
    def single_n(self) -> int:
        if len(self.n) != 1:
            raise UsageError(f"{self.command} needs exactly one --n")
        return self.n[0]

    def pairs(self) -> list[tuple[int, int]]:
        if not self.k or not self.i:
            raise UsageError(f"{self.command} needs --k and --i")
        return list(product(self.k, self.i))


class ResultStore:
    """Append-only JSONL log; every record carries the config hash."""

    def __init__(self, path, config_hash: str):
        self.path = Path(path)
        self.config_hash = config_hash

    def reset(self) -> None:
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self.path.write_text("")

    def load(self) -> list[dict]:
        if not self.path.exists():
            return []
        raw = self.path.read_text()
        if raw and not raw.endswith("\n"):
            # torn final write from an interrupted run
            raw = raw[: raw.rfind("\n") + 1]
            self.path.write_text(raw)
        out = []
        for line in raw.splitlines():
            rec = json.loads(line)
            if rec.get("config") == self.config_hash:
                out.append(rec)
        return out

    def append(self, records) -> None:
        with self.path.open("a") as fh:
            for rec in records:
                fh.write(json.dumps(dict(rec, config=self.config_hash),
                                    sort_keys=True) + "\n")
            fh.flush()


def _store_for(cfg: ExperimentConfig) -> ResultStore | None:
    if cfg.out is None:
        return None
    store = ResultStore(cfg.out + ".store.jsonl", cfg.config_hash())
    if not cfg.resume:
        store.reset()
    return store


def _emit(cfg: ExperimentConfig, text: str, suffix: str = "") -> None:
    if cfg.out is None:
        sys.stdout.write(text)
    else:
        Path(cfg.out + suffix).write_text(text)


# -- commands ----------------------------------------------------------------

def cmd_gen(cfg: ExperimentConfig) -> int:
    n, r = cfg.single_n, _need(cfg.r, "--r")
    parts = []
    for idx in range(cfg.count):
        s = trial_seed(cfg.seed, n, idx)
        parts.append(format_graph(sample_configuration(n, r, s), f"seed {s}"))
    _emit(cfg, "".join(parts))
    return EXIT_OK


def cmd_enumerate(cfg: ExperimentConfig) -> int:
    n, r = cfg.single_n, _need(cfg.r, "--r")
    if n > ENUM_MAX_N:
        raise SizeLimitExceeded(f"enumeration limited to n <= {ENUM_MAX_N}")
    store = _store_for(cfg)
    records = store.load() if store else []
    done = {rec["branch"] for rec in records if rec["kind"] == "branch_done"}
    found = {(rec["branch"], rec["ordinal"]): rec
             for rec in records if rec["kind"] == "graph"}
    seen = {CanonicalCode.fromhex(rec["code"])
            for (b, _), rec in found.items() if b in done}
    processed = 0
    for b, prefix in enumerate(enumeration_branches(n, r)):
        if b in done:
            continue
        new = []
        for ordinal, g in enumerate(enumerate_branch(n, r, prefix, seen,
                                                     cfg.connected_only)):
            rec = {"kind": "graph", "branch": b, "ordinal": ordinal,
                   "code": canonical_form(g).hex(), "rows": list(g.rows)}
            found[(b, ordinal)] = rec
            new.append(rec)
        if store:
            store.append(new + [{"kind": "branch_done", "branch": b}])
        processed += 1
        if cfg.stop_after is not None and processed >= cfg.stop_after:
            raise Interrupted(f"stopped after {processed} branches")
    graphs = [BipartiteGraph(n, r, tuple(found[key]["rows"])) for key in sorted(found)]
    _emit(cfg, "".join(format_graph(g) for g in graphs))
    print(f"count {len(graphs)}", file=sys.stderr if cfg.out is None else sys.stdout)
    return EXIT_OK


def _check_one(cfg: ExperimentConfig, g: BipartiteGraph) -> dict:
    rep = check_virial(match_sequence_dp(g), cfg.exact_bits,
                       cfg.max_precision_bits, cfg.also_m_conjecture)
    rep.canonical_code = canonical_form(g).hex()
    rec = rep.to_record()
    rec["csv"] = rep.csv_rows()
    return rec


def cmd_check(cfg: ExperimentConfig) -> int:
    if not cfg.inputs:
        raise UsageError("check needs at least one input graph file")
    items = []
    for f_idx, path in enumerate(cfg.inputs):
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise UsageError(f"cannot read {path}: {exc}") from exc
        try:
            for g_idx, (lineno, g) in enumerate(iter_graphs(text)):
                items.append(((f_idx, g_idx), path, lineno, g))
        except GraphParseError as exc:
            raise GraphParseError(f"{path}: {exc}") from exc
    store = _store_for(cfg)
    done = {tuple(rec["key"]): rec for rec in (store.load() if store else [])}
    processed = 0
    for key, path, lineno, g in items:
        if key in done:
            continue
        rec = _check_one(cfg, g)
        rec.update(key=list(key), source=f"{path}:{lineno}")
        done[key] = rec
        if store:
            store.append([rec])
        processed += 1
        if cfg.stop_after is not None and processed >= cfg.stop_after:
            raise Interrupted(f"stopped after {processed} graphs")

    ordered = [done[key] for key, *_ in items]
    lines = []
    for rec in ordered:
        rec = {k: v for k, v in rec.items() if k not in ("config", "csv")}
        lines.append(json.dumps(rec, sort_keys=True))
    _emit(cfg, "\n".join(lines) + ("\n" if lines else ""))
    if cfg.out is not None:
        buf = io.StringIO()
        cols = ["source", "n", "r", "k", "i", "sign", "method"]
        if cfg.also_m_conjecture:
            cols.append("m_sign")
        w = csv.DictWriter(buf, fieldnames=cols, lineterminator="\n")
        w.writeheader()
        for rec in ordered:
            for row in rec["csv"]:
                w.writerow(dict(row, source=rec["source"]))
        Path(cfg.out + ".csv").write_text(buf.getvalue())

    positive = sum(rec["virial_positive"] for rec in ordered)
    violating = sum(bool(rec["violations"]) for rec in ordered)
    undetermined = sum(bool(rec["undetermined"]) for rec in ordered)
    summary = (f"{positive} positive, {violating} violations, "
               f"{undetermined} undetermined")
    m_bad = 0
    if cfg.also_m_conjecture:
        m_bad = sum(bool(rec["m_conjecture_violations"]) for rec in ordered)
        m_zero = sum(bool(rec["m_conjecture_zero"]) for rec in ordered)
        summary += f"; m-conjecture: {m_bad} violations, {m_zero} with zeros"
    print(summary, file=sys.stderr if cfg.out is None else sys.stdout)
    if cfg.fail_on_violation and (violating or m_bad):
        return EXIT_VIOLATION
    return EXIT_OK


def _sweep_results(cfg: ExperimentConfig) -> list[TrialResult]:
    r = _need(cfg.r, "--r")
    if not cfg.n:
        raise UsageError(f"{cfg.command} needs --n")
    pairs = cfg.pairs()
    _check_sweep_args(pairs, cfg.n, cfg.trials)

    store = _store_for(cfg)
    results = {(rec["n"], rec["trial"]): TrialResult.from_record(rec)
               for rec in (store.load() if store else [])}
    blocks = 0
    pool = ProcessPoolExecutor(cfg.workers) if cfg.workers > 1 else None
    try:
        for n in cfg.n:
            for start in range(0, cfg.trials, cfg.block):
                todo = [t for t in range(start, min(start + cfg.block, cfg.trials))
                        if (n, t) not in results]
                if not todo:
                    continue
                job = partial(run_trial, r, n, pairs, cfg.seed)
                batch = list(pool.map(job, todo) if pool else map(job, todo))
                for res in batch:
                    results[(n, res.trial)] = res
                if store:
                    store.append(res.to_record() for res in batch)
                blocks += 1
                if cfg.stop_after is not None and blocks >= cfg.stop_after:
                    raise Interrupted(f"stopped after {blocks} trial blocks")
    finally:
        if pool:
            pool.shutdown()
    return [results[key] for key in sorted(results)]


def cmd_sweep(cfg: ExperimentConfig) -> int:
    results = _sweep_results(cfg)
    reports = sweep_table(cfg.r, cfg.pairs(), cfg.n, cfg.trials, cfg.seed, results)
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
    w.writeheader()
    jsonl = []
    for pair in cfg.pairs():
        rep = reports[pair]
        for row in rep.rows:
            w.writerow(row.csv_dict())
        jsonl.append(rep.to_jsonl())
    _emit(cfg, buf.getvalue(), ".csv" if cfg.out else "")
    if cfg.out is not None:
        Path(cfg.out + ".jsonl").write_text("".join(jsonl))
    failures = next(iter(reports.values())).failures
    if failures:
        print(f"{len(failures)} trials failed; see the JSON report",
              file=sys.stderr)
    violations = sum(row.violations for rep in reports.values() for row in rep.rows)
    if cfg.fail_on_violation and violations:
        return EXIT_VIOLATION
    return EXIT_OK


def cmd_scaling(cfg: ExperimentConfig) -> int:
    results = _sweep_results(cfg)
    reports = sweep_table(cfg.r, cfg.pairs(), cfg.n, cfg.trials, cfg.seed, results)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["k", "i", "n", "mean_alpha0", "scaled_alpha0", "limit_const",
                "relative_gap"])
    for (k, i) in cfg.pairs():
        for row in scaling_rows(reports[(k, i)]):
            w.writerow([k, i, row.n, repr(float(row.mean_alpha0)),
                        repr(float(row.scaled_alpha0)), str(row.limit_const),
                        repr(row.relative_gap)])
    _emit(cfg, buf.getvalue(), ".csv" if cfg.out else "")
    return EXIT_OK


def cmd_bound(cfg: ExperimentConfig) -> int:
    results = _sweep_results(cfg)
    reports = sweep_table(cfg.r, cfg.pairs(), cfg.n, cfg.trials, cfg.seed, results)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["k", "i", "n", "samples", "alpha", "beta", "beta_over_alpha2",
                "alpha_nonnegative"])
    for (k, i) in cfg.pairs():
        for row in reports[(k, i)].rows:
            w.writerow([k, i, row.n, row.trials, repr(float(row.mean_alpha0)),
                        repr(float(row.beta)),
                        "" if row.bound is None else repr(float(row.bound)),
                        row.mean_alpha0 >= 0])
    _emit(cfg, buf.getvalue(), ".csv" if cfg.out else "")
    return EXIT_OK


HANDLERS = {"gen": cmd_gen, "enumerate": cmd_enumerate, "check": cmd_check,
            "sweep": cmd_sweep, "scaling": cmd_scaling, "bound": cmd_bound}


# -- argument handling -------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _int_list(text: str) -> list[int]:
    try:
        return [int(t) for t in text.replace(" ", "").split(",") if t]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _need(value, flag):
    if value is None:
        raise UsageError(f"missing {flag}")
    return value


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", help="JSON file with default parameters")
    common.add_argument("--n", type=_int_list, help="side size(s), e.g. 10,20,40")
    common.add_argument("--r", type=int, help="degree")
    common.add_argument("--k", type=_int_list, help="difference order(s)")
    common.add_argument("--i", type=_int_list, help="offset(s)")
    common.add_argument("--trials", type=int)
    common.add_argument("--seed", type=int)
    common.add_argument("--count", type=int, help="graphs to sample (gen)")
    common.add_argument("--out", help="output path (prefix for sweeps)")
    common.add_argument("--resume", action="store_const", const=True)
    common.add_argument("--connected-only", action="store_const", const=True)
    common.add_argument("--exact-bits", type=int)
    common.add_argument("--max-precision-bits", type=int)
    common.add_argument("--fail-on-violation", action="store_const", const=True)
    common.add_argument("--also-m-conjecture", action="store_const", const=True)
    common.add_argument("--workers", type=int)
    common.add_argument("--block", type=int, help="trials per checkpoint block")
    common.add_argument("--stop-after", type=int, help=argparse.SUPPRESS)
    common.add_argument("-v", "--verbose", action="store_true")

    parser = _Parser(prog="virialpos", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name, parents=[common])
        if name == "check":
            p.add_argument("inputs", nargs="*", help="graph files")
    return parser


def config_from_args(argv) -> tuple[ExperimentConfig, bool]:
    args = build_parser().parse_args(argv)
    merged: dict = {}
    if args.config:
        try:
            merged.update(json.loads(Path(args.config).read_text()))
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"bad config file {args.config}: {exc}") from exc
    names = {f.name for f in fields(ExperimentConfig)}
    unknown = set(merged) - names
    if unknown:
        raise UsageError(f"unknown config keys: {sorted(unknown)}")
    for name in names - {"command"}:
        value = getattr(args, name, None)
        if name == "inputs" and not value:
            continue
        if value is not None:
            merged[name] = value
    merged["command"] = args.command
    for key in ("n", "k", "i"):
        if isinstance(merged.get(key), int):
            merged[key] = [merged[key]]
    return ExperimentConfig(**merged), args.verbose


def main(argv=None) -> int:
    try:
        cfg, verbose = config_from_args(sys.argv[1:] if argv is None else argv)
    except UsageError as exc:
        print(f"virialpos: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.INFO if verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return HANDLERS[cfg.command](cfg)
    except UsageError as exc:
        print(f"virialpos: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Interrupted as exc:
        print(f"virialpos: {exc}; rerun with --resume", file=sys.stderr)
        return EXIT_COMPUTE
    except VirialError as exc:
        print(f"virialpos: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_COMPUTE
    except ValueError as exc:
        print(f"virialpos: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE

if __name__ == "__main__":
    sys.exit(main())
