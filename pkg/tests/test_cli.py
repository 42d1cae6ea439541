"""Command-line behavior: exit codes, emitted artifacts, resume safety,
and report reproducibility."""

import json

import pytest

from strathive.cli import DEFAULT_PROTOCOL, main, method_label, method_spec
from strathive.logic import parse_problem
from strathive.protocol import (
    parse_protocol,
    protocol_digest,
    render_protocol,
)
from strathive.scheduler import ScheduleMethod, parse_schedule, run_schedule
from strathive.tuner import PerfMatrix

CHAIN = "cnf(a0,axiom,p0).\ncnf(i1,axiom,~p0|p1).\ncnf(g,negated_conjecture,~p1).\n"
OPEN = "cnf(a,axiom,p(a)). cnf(b,axiom,~q(b)).\n"


@pytest.fixture
def corpus_dir(tmp_path):
    d = tmp_path / "corpus"
    d.mkdir()
    for n in (3, 5, 7, 9):
        lines = ["cnf(a0,axiom,p0)."]
        lines += [f"cnf(i{k},axiom,~p{k-1}|p{k})." for k in range(1, n + 1)]
        lines.append(f"cnf(g,negated_conjecture,~p{n}).")
        (d / f"chain{n:02d}.p").write_text("\n".join(lines) + "\n")
    (d / "open.p").write_text(OPEN)
    return d


def state_args(tmp_path, corpus_dir):
    return ["--state-dir", str(tmp_path / "state"), "--corpus", str(corpus_dir),
            "--loop-rate", "1000", "--c-min", "1", "--max-evals-per-phase", "2",
            "--c-cef", "2", "--collection-size", "12"]


# ---------------------------------------------------------------------------
# prove


def test_prove_exit_codes(tmp_path, capsys):
    prob = tmp_path / "chain.p"
    prob.write_text(CHAIN)
    assert main(["prove", str(prob)]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["status"] == "proved"
    assert out["proof"][-1]["clause"] == "$false"
    assert out["protocol"] == render_protocol(parse_protocol(DEFAULT_PROTOCOL))
    assert out["gc_loops"] >= 1

    sat = tmp_path / "open.p"
    sat.write_text(OPEN)
    assert main(["prove", str(sat)]) == 1
    assert json.loads(capsys.readouterr().out)["status"] == "saturated"
    assert main(["prove", str(sat), "--protocol", "-tXX -Wnone -H'(1*Zap())'"]) == 2
    assert "error:" in capsys.readouterr().err
    assert main(["prove", str(tmp_path / "missing.p")]) == 2


def test_prove_protocol_from_file(tmp_path, capsys):
    prob = tmp_path / "chain.p"
    prob.write_text(CHAIN)
    pfile = tmp_path / "proto.txt"
    pfile.write_text("-tNONE -WSelectFirstNeg -H'(1*FIFOWeight(PreferAll))'\n")
    assert main(["prove", str(prob), "--protocol", str(pfile)]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["protocol"].startswith("-tNONE -WSelectFirstNeg")


def test_prove_respects_loop_limit(tmp_path, capsys):
    prob = tmp_path / "deep.p"
    lines = ["cnf(a0,axiom,p0)."]
    lines += [f"cnf(i{k},axiom,~p{k-1}|p{k})." for k in range(1, 60)]
    lines.append("cnf(g,negated_conjecture,~p59).")
    prob.write_text("\n".join(lines))
    assert main(["prove", str(prob), "--max-loops", "3"]) == 1
    assert json.loads(capsys.readouterr().out)["status"] == "resource_out"


# ---------------------------------------------------------------------------
# tune


def test_tune_budget_zero_leaves_seed_only(tmp_path, corpus_dir, capsys):
    argv = ["tune", *state_args(tmp_path, corpus_dir), "--budget", "0"]
    assert main(argv) == 0
    summary = json.loads(capsys.readouterr().out)
    assert summary["iterations_run"] == 0
    assert summary["protocols"] == 1  # just the bootstrap evaluation
    state = tmp_path / "state"
    assert (state / "progress.csv").read_text().splitlines()[1].startswith("0,")
    assert (state / "manifest.json").exists()


def test_tune_runs_and_resumes_without_duplicates(tmp_path, corpus_dir, capsys):
    argv = ["tune", *state_args(tmp_path, corpus_dir),
            "--iterations", "1", "--budget", "600"]
    assert main(argv) == 0
    first = json.loads(capsys.readouterr().out)
    assert first["iterations_run"] == 1

    state = tmp_path / "state"
    rows_before = (state / "matrix.csv").read_text().count("\n")
    # simulate a crash after the matrix write but before the attempt mark
    (state / "attempted.log").unlink()
    assert main(argv) == 0
    capsys.readouterr()
    rows_after = (state / "matrix.csv").read_text().count("\n")
    assert rows_after == rows_before  # re-done iteration adds no duplicate


def test_tune_manifest_pins_corpus(tmp_path, corpus_dir, capsys):
    assert main(["tune", *state_args(tmp_path, corpus_dir), "--budget", "0"]) == 0
    capsys.readouterr()
    other = tmp_path / "other"
    other.mkdir()
    (other / "x.p").write_text(CHAIN)
    argv = ["tune", "--state-dir", str(tmp_path / "state"),
            "--corpus", str(other), "--budget", "0"]
    assert main(argv) == 2
    assert "belongs to corpus" in capsys.readouterr().err


# ---------------------------------------------------------------------------
# eval


def test_eval_appends_rows_and_round_trips(tmp_path, corpus_dir, capsys):
    sel = "-tNONE -WSelectFirstNeg -H'(1*FIFOWeight(PreferAll))'"
    argv = ["eval", *state_args(tmp_path, corpus_dir), DEFAULT_PROTOCOL, sel]
    assert main(argv) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert lines[0] == "protocol,solved,problems"
    assert len(lines) == 3
    for line in lines[1:]:
        digest, solved, total = line.split(",")
        assert int(solved) == 4 and int(total) == 5

    # emitted matrix round-trips through its parser
    state = tmp_path / "state"
    by_digest = {}
    for f in (state / "protocols").iterdir():
        by_digest[f.stem] = parse_protocol(f.read_text().strip())
    m = PerfMatrix.from_csv((state / "matrix.csv").read_text(), by_digest)
    assert len(m.protocols) == 2
    assert {protocol_digest(p) for p in m.protocols} == set(by_digest)

    # re-running eval adds nothing new
    assert main(argv) == 0
    capsys.readouterr()
    m2 = PerfMatrix.from_csv((state / "matrix.csv").read_text(), by_digest)
    assert m2.costs == m.costs


# ---------------------------------------------------------------------------
# schedule


def test_schedule_report_and_files(tmp_path, corpus_dir, capsys):
    assert main(["eval", *state_args(tmp_path, corpus_dir),
                 DEFAULT_PROTOCOL]) == 0
    capsys.readouterr()
    argv = ["schedule", *state_args(tmp_path, corpus_dir),
            "greedy_1", "sotac(15)", "--total-seconds", "5",
            "--report", str(tmp_path / "report.csv")]
    assert main(argv) == 0
    out = capsys.readouterr().out
    lines = out.strip().splitlines()
    assert lines[0] == "scheduler,protos,solved"
    assert len(lines) == 3
    assert lines[1].startswith("greedy_1,") and lines[2].startswith("sotac_15,")
    assert (tmp_path / "report.csv").read_text() == out

    # schedule files parse back and their counts match re-execution
    sched = parse_schedule(
        (tmp_path / "state" / "schedules" / "greedy_1.sched").read_text())
    protos, solved = lines[1].split(",")[1:]
    assert len(sched.protocols) == int(protos)
    resolved = 0
    for f in sorted(corpus_dir.glob("*.p")):
        r = run_schedule(sched, parse_problem(f.read_text()), 5, loop_rate=1000)
        resolved += r.proved
    assert resolved == int(solved)


def test_schedule_reports_are_reproducible(tmp_path, corpus_dir, capsys):
    assert main(["eval", *state_args(tmp_path, corpus_dir),
                 DEFAULT_PROTOCOL]) == 0
    capsys.readouterr()
    argv = ["schedule", *state_args(tmp_path, corpus_dir), "greedy(1)",
            "--total-seconds", "5"]
    assert main(argv) == 0
    first = capsys.readouterr().out
    assert main(argv) == 0
    assert capsys.readouterr().out == first


def test_schedule_requires_matrix(tmp_path, corpus_dir, capsys):
    argv = ["schedule", *state_args(tmp_path, corpus_dir), "greedy(1)"]
    assert main(argv) == 2
    assert "matrix is empty" in capsys.readouterr().err


def test_schedule_unknown_method(tmp_path, corpus_dir, capsys):
    assert main(["eval", *state_args(tmp_path, corpus_dir),
                 DEFAULT_PROTOCOL]) == 0
    capsys.readouterr()
    assert main(["schedule", *state_args(tmp_path, corpus_dir),
                 "fancy(3)"]) == 2


def test_method_spec_forms():
    assert method_spec("greedy_1") == method_spec("greedy(1)")
    assert method_spec("sotac_15") == ScheduleMethod("sotac", 15)
    assert method_label(method_spec("greedy(1)")) == "greedy_1"
    assert method_label(method_spec("esotac(7)")) == "esotac_7"


# ---------------------------------------------------------------------------
# cef-db and environment plumbing


def test_cefdb_listing_and_selection(tmp_path, corpus_dir, capsys):
    assert main(["tune", *state_args(tmp_path, corpus_dir), "--budget", "0"]) == 0
    capsys.readouterr()
    state = str(tmp_path / "state")
    assert main(["cef-db", "--state-dir", state]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert lines[0] == "cef,count"
    assert len(lines) == 12  # the 11 seeds
    assert main(["cef-db", "--state-dir", state, "--select", "11"]) == 0
    assert len(capsys.readouterr().out.strip().splitlines()) == 11
    assert main(["cef-db", "--state-dir", str(tmp_path / "nope")]) == 2


def test_state_dir_env_default(tmp_path, corpus_dir, capsys, monkeypatch):
    monkeypatch.setenv("STRATHIVE_STATE", str(tmp_path / "envstate"))
    argv = ["tune", "--corpus", str(corpus_dir), "--loop-rate", "1000",
            "--c-min", "1", "--max-evals-per-phase", "2", "--c-cef", "2",
            "--collection-size", "12", "--budget", "0"]
    assert main(argv) == 0
    capsys.readouterr()
    assert (tmp_path / "envstate" / "manifest.json").exists()


def test_missing_state_dir_is_usage_error(tmp_path, corpus_dir, capsys,
                                          monkeypatch):
    monkeypatch.delenv("STRATHIVE_STATE", raising=False)
    assert main(["tune", "--corpus", str(corpus_dir), "--budget", "0"]) == 2
    assert "state directory" in capsys.readouterr().err
