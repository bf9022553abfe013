import csv
import json

import pytest

from virialpos.cli import ExperimentConfig, config_from_args, main
from virialpos.formats import format_graph, format_graphs, parse_graphs
from virialpos.graphgen import canonical_form, complete, enumerate_regular
from virialpos.matchpoly import match_sequence_dp
from virialpos.virial import check_virial


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


# -- gen ---------------------------------------------------------------------

def test_gen_k33(capsys):
    code, out, _ = run(capsys, "gen", "--n", 3, "--r", 3, "--count", 5, "--seed", 1)
    assert code == 0
    assert parse_graphs(out) == [complete(3)] * 5
    assert out.count("# seed ") == 5


def test_gen_deterministic(capsys, tmp_path):
    a, b = tmp_path / "a.txt", tmp_path / "b.txt"
    for path in (a, b):
        assert run(capsys, "gen", "--n", 8, "--r", 3, "--count", 4,
                   "--seed", 11, "--out", path)[0] == 0
    assert a.read_text() == b.read_text()
    assert len(parse_graphs(a.read_text())) == 4


def test_gen_invalid_degree(capsys):
    code, _, err = run(capsys, "gen", "--n", 4, "--r", 5)
    assert code == 2
    assert "InvalidDegree" in err


def test_usage_errors(capsys):
    assert run(capsys, "gen", "--nope")[0] == 1
    assert run(capsys)[0] == 1
    assert run(capsys, "gen", "--n", "x,y", "--r", 2)[0] == 1
    assert run(capsys, "gen", "--r", 2)[0] == 1


# -- enumerate ---------------------------------------------------------------

@pytest.mark.parametrize("n,r,count", [(4, 2, 2), (3, 3, 1), (6, 3, 6)])
def test_enumerate_counts(capsys, tmp_path, n, r, count):
    out = tmp_path / "graphs.txt"
    code, stdout, _ = run(capsys, "enumerate", "--n", n, "--r", r, "--out", out)
    assert code == 0
    assert f"count {count}" in stdout
    assert parse_graphs(out.read_text()) == list(enumerate_regular(n, r))


def test_enumerate_connected_only(capsys, tmp_path):
    out = tmp_path / "g.txt"
    run(capsys, "enumerate", "--n", 4, "--r", 2, "--connected-only", "--out", out)
    assert len(parse_graphs(out.read_text())) == 1


def test_enumerate_resume_matches_uninterrupted(capsys, tmp_path):
    full, part = tmp_path / "full.txt", tmp_path / "part.txt"
    run(capsys, "enumerate", "--n", 6, "--r", 3, "--out", full)
    code, _, err = run(capsys, "enumerate", "--n", 6, "--r", 3, "--out", part,
                       "--stop-after", 1)
    assert code == 2 and "--resume" in err
    assert not part.exists()
    code, _, _ = run(capsys, "enumerate", "--n", 6, "--r", 3, "--out", part, "--resume")
    assert code == 0
    assert part.read_text() == full.read_text()


def test_enumerate_size_cap(capsys):
    code, _, err = run(capsys, "enumerate", "--n", 13, "--r", 3)
    assert code == 2 and "SizeLimitExceeded" in err


# -- check -------------------------------------------------------------------

def test_check_c6(capsys, tmp_path, c6):
    f = tmp_path / "c6.txt"
    f.write_text(format_graph(c6))
    code, out, err = run(capsys, "check", f)
    assert code == 0
    assert "1 positive, 0 violations, 0 undetermined" in err
    rec = json.loads(out)
    assert rec["virial_positive"] and rec["violations"] == []
    assert rec["canonical_code"] == canonical_form(c6).hex()


def test_check_m_conjecture_zero_on_c6(capsys, tmp_path, c6):
    f = tmp_path / "c6.txt"
    f.write_text(format_graph(c6))
    out = tmp_path / "res"
    code, stdout, _ = run(capsys, "check", f, "--also-m-conjecture", "--out", out)
    assert code == 0
    rec = json.loads(out.read_text())
    assert rec["m_conjecture_violations"] == []
    assert [2, 0] in rec["m_conjecture_zero"]
    rows = list(csv.DictReader(out.with_suffix(".csv").open()))
    assert {"k": "2", "i": "0"}.items() <= next(
        r for r in rows if r["k"] == "2" and r["i"] == "0").items()
    assert next(r for r in rows if r["k"] == "2" and r["i"] == "0")["m_sign"] == "Zero"


def test_check_connected_small_graphs_positive(capsys, tmp_path):
    graphs = [g for n in range(1, 8) for r in range(1, n + 1)
              for g in enumerate_regular(n, r, connected_only=True)]
    f = tmp_path / "small.txt"
    f.write_text(format_graphs(graphs))
    code, _, err = run(capsys, "check", f, "--fail-on-violation")
    assert code == 0
    assert f"{len(graphs)} positive, 0 violations" in err


def test_check_violation_exit_code(capsys, tmp_path, two_c4):
    # two disjoint 4-cycles give a negative fourth difference
    f = tmp_path / "g.txt"
    f.write_text(format_graph(two_c4))
    assert run(capsys, "check", f)[0] == 0
    code, _, err = run(capsys, "check", f, "--fail-on-violation")
    assert code == 3
    assert "1 violations" in err


def test_check_parse_error_names_line(capsys, tmp_path):
    f = tmp_path / "bad.txt"
    f.write_text("# ok\n2 1\n0\n7\n")
    code, _, err = run(capsys, "check", f)
    assert code == 2
    assert "line 4" in err


def test_check_missing_file(capsys, tmp_path):
    assert run(capsys, "check", tmp_path / "absent.txt")[0] == 1


def test_check_records_match_library(capsys, tmp_path):
    graphs = list(enumerate_regular(5, 2))
    f = tmp_path / "g.txt"
    f.write_text(format_graphs(graphs))
    _, out, _ = run(capsys, "check", f)
    recs = [json.loads(line) for line in out.splitlines()]
    for g, rec in zip(graphs, recs):
        assert rec["violations"] == [list(p) for p in
                                     check_virial(match_sequence_dp(g)).violations]


# -- sweep -------------------------------------------------------------------

SWEEP = ["sweep", "--r", 3, "--n", "10,20,30", "--k", 2, "--i", 0,
         "--trials", 10, "--seed", 5, "--block", 4]


def test_sweep_three_rows(capsys, tmp_path):
    out = tmp_path / "s"
    assert run(capsys, *SWEEP, "--out", out)[0] == 0
    rows = list(csv.DictReader((tmp_path / "s.csv").open()))
    assert [r["n"] for r in rows] == ["10", "20", "30"]
    for r in rows:
        assert r["trials"] == "10" and r["violations"] == "0"
        assert r["range_label"] == "proven"
    lines = (tmp_path / "s.jsonl").read_text().splitlines()
    assert len(lines) == 4


def test_sweep_resume_idempotent(capsys, tmp_path):
    ref, part = tmp_path / "ref", tmp_path / "part"
    run(capsys, *SWEEP, "--out", ref)
    assert run(capsys, *SWEEP, "--out", part, "--stop-after", 2)[0] == 2
    # simulate a torn final write
    store = tmp_path / "part.store.jsonl"
    store.write_text(store.read_text() + '{"n": 10, "tri')
    assert run(capsys, *SWEEP, "--out", part, "--resume")[0] == 0
    assert (tmp_path / "part.csv").read_text() == (tmp_path / "ref.csv").read_text()
    assert (tmp_path / "part.jsonl").read_text() == (tmp_path / "ref.jsonl").read_text()
    # a second resume recomputes nothing
    before = store.read_text()
    assert run(capsys, *SWEEP, "--out", part, "--resume")[0] == 0
    assert store.read_text() == before


def test_sweep_resume_ignores_other_config(capsys, tmp_path):
    out = tmp_path / "s"
    run(capsys, *SWEEP, "--out", out)
    other = [a if a != 5 else 6 for a in SWEEP]
    run(capsys, *other, "--out", out, "--resume")
    fresh = tmp_path / "fresh"
    run(capsys, *other, "--out", fresh)
    assert (tmp_path / "s.csv").read_text() == (tmp_path / "fresh.csv").read_text()


def test_sweep_workers_match_serial(capsys, tmp_path):
    run(capsys, *SWEEP, "--out", tmp_path / "a")
    run(capsys, *SWEEP, "--out", tmp_path / "b", "--workers", 2)
    assert (tmp_path / "a.csv").read_text() == (tmp_path / "b.csv").read_text()


def test_sweep_beyond_proven_label(capsys):
    code, out, _ = run(capsys, "sweep", "--r", 3, "--n", 30, "--k", 30, "--i", 0,
                       "--trials", 1, "--seed", 2)
    assert code == 0
    (row,) = csv.DictReader(out.splitlines())
    assert row["range_label"] == "beyond proven range"


def test_sweep_bad_pair(capsys):
    code, _, err = run(capsys, "sweep", "--r", 3, "--n", 10, "--k", 8, "--i", 5,
                       "--trials", 1)
    assert code == 2 and "IndexOutOfRange" in err


def test_scaling_and_bound(capsys):
    code, out, _ = run(capsys, "scaling", "--r", 3, "--n", "10,20", "--k", 2,
                       "--i", 0, "--trials", 5)
    assert code == 0
    rows = list(csv.DictReader(out.splitlines()))
    assert [r["limit_const"] for r in rows] == ["-5/3", "-5/3"]
    assert all(float(r["scaled_alpha0"]) == pytest.approx(-5 / 3) for r in rows)
    code, out, _ = run(capsys, "bound", "--r", 3, "--n", "10,20", "--k", 2,
                       "--i", 0, "--trials", 5)
    assert code == 0
    rows = list(csv.DictReader(out.splitlines()))
    assert [float(r["beta_over_alpha2"]) for r in rows] == [0.0, 0.0]


# -- config ------------------------------------------------------------------

def test_config_file_and_override(tmp_path):
    cfgfile = tmp_path / "c.json"
    cfgfile.write_text(json.dumps({"r": 3, "n": [10, 20], "trials": 50, "seed": 4}))
    cfg, _ = config_from_args(["sweep", "--config", str(cfgfile), "--trials", "7",
                               "--k", "2", "--i", "0"])
    assert (cfg.r, cfg.n, cfg.trials, cfg.seed, cfg.k) == (3, [10, 20], 7, 4, [2])


def test_config_hash_stability():
    a = ExperimentConfig("sweep", n=[10], r=3, k=[2], i=[0], seed=1)
    b = ExperimentConfig("sweep", n=[10], r=3, k=[2], i=[0], seed=1,
                         out="elsewhere", workers=4, resume=True)
    c = ExperimentConfig("sweep", n=[10], r=3, k=[2], i=[0], seed=2)
    assert a.config_hash() == b.config_hash()
    assert a.config_hash() != c.config_hash()
    assert a.config_hash() == ExperimentConfig("sweep", n=[10], r=3, k=[2], i=[0],
                                               seed=1).config_hash()


def test_config_unknown_key(capsys, tmp_path):
    cfgfile = tmp_path / "c.json"
    cfgfile.write_text('{"colour": 1}')
    assert run(capsys, "gen", "--config", cfgfile)[0] == 1
