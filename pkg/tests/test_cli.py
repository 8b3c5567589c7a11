"""Command line: exit codes, structured reports, replay and determinism."""

import json
import subprocess
import sys

import pytest

from rcons.cli import Report, main


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def structured(capsys, *argv):
    code, out, _ = run(capsys, *argv, "--format", "structured")
    return code, json.loads(out), out


FLIP = """\
type flip
states: x y
ops: f
delta x f -> y ok
delta y f -> x ok
"""


@pytest.mark.parametrize("argv,code", [
    (["check-type", "builtin:Sn,n=2", "--n", "2"], 0),
    (["check-type", "builtin:register,domain=3", "--n", "2", "--property", "discerning"], 0),  # exhausted
    (["check-type", "builtin:Tn,n=4", "--n", "3", "--budget", "3"], 1),  # cut short
    (["check-type", "builtin:Sn,n=2", "--n", "1"], 2),
    (["check-type", "builtin:Nothing", "--n", "2"], 2),
    (["check-type", "--n", "2"], 2),
    (["check-type", "missing.type", "--n", "2"], 2),
    (["search", "builtin:Sn,n=2", "--n-max", "3"], 0),
    (["search", "builtin:Sn,n=2", "--n-max", "1"], 2),
    (["audit", "builtin:Sn,n=3", "--n-max", "4"], 0),
    (["audit", "builtin:Tn,n=4", "--n-max", "4", "--budget", "2"], 1),
    (["modelcheck", "--algorithm", "team", "--n", "2", "--max-steps", "12"], 0),
    (["modelcheck", "--algorithm", "team-nodefer", "--n", "2", "--max-steps", "20"], 1),
    (["modelcheck", "--algorithm", "simul", "--n", "2", "--model", "independent"], 2),
    (["modelcheck", "--algorithm", "team", "--n", "2", "--seeds", "0"], 2),
    (["modelcheck", "--algorithm", "team", "--n", "2", "--crash-prob", "2", "--seeds", "3"], 2),
    (["modelcheck", "--algorithm", "simul", "--n", "3", "--seeds", "20", "--max-steps", "120",
      "--max-crashes", "2"], 0),
    (["modelcheck", "--algorithm", "team", "--n", "3", "--inputs", "0,1,2"], 2),
    (["universal-demo", "--object", "queue", "--seed", "3"], 0),
    (["universal-demo", "--processes", "0"], 2),
    (["modelcheck", "--jobs", "0"], 2),
])
def test_exit_codes(capsys, tmp_cwd, argv, code):
    assert run(capsys, *argv)[0] == code


def test_check_type_from_file_and_assignment(capsys, tmp_cwd):
    (tmp_cwd / "flip.type").write_text(FLIP)
    code, rep, _ = structured(capsys, "check-type", "flip.type", "--n", "2")
    assert code == 0 and rep["result"]["verdict"] == "no_witness_within_search_space"
    a = {"n": 2, "q0": "(B,0)", "team_of": {"1": "A", "2": "B"}, "op_of": {"1": "op_A", "2": "op_B"}}
    (tmp_cwd / "w.json").write_text(json.dumps(a))
    code, rep, _ = structured(capsys, "check-type", "builtin:Sn,n=2", "--n", "2", "--assignment", "w.json")
    assert code == 0 and rep["result"]["diagnostics"]["pass"]
    a["op_of"]["2"] = "op_A"
    (tmp_cwd / "w.json").write_text(json.dumps(a))
    code, rep, _ = structured(capsys, "check-type", "builtin:Sn,n=2", "--n", "2", "--assignment", "w.json")
    assert code == 1 and not rep["passed"]
    assert run(capsys, "check-type", "builtin:Sn,n=2", "--n", "3", "--assignment", "w.json")[0] == 2


def test_type_spec_error_reports_position(capsys, tmp_cwd):
    (tmp_cwd / "bad.type").write_text(FLIP.replace("delta y f -> x ok", "delta y f -> w ok"))
    code, _, err = run(capsys, "check-type", "bad.type", "--n", "2")
    assert code == 2
    assert "line 5" in err and "column" in err


def test_report_round_trip(capsys, tmp_cwd):
    code, rep, text = structured(capsys, "modelcheck", "--algorithm", "team", "--n", "2", "--max-steps", "12",
                                 "--output", "report.json")
    again = Report.from_json(text)
    assert again.to_json() == text.strip()
    assert (tmp_cwd / "report.json").read_text().strip() == text.strip()
    assert rep["result"]["verdict"]["termination"]["label"] == "within step bound"
    assert set(rep["args"]) >= {"algorithm", "n", "max_steps"}
    assert "jobs" not in rep["args"] and "wall_time" not in rep


def test_timings_are_opt_in(capsys, tmp_cwd):
    _, rep, _ = structured(capsys, "check-type", "builtin:Sn,n=2", "--n", "2", "--timings")
    assert "wall_time" in rep and "wall_time" in rep["result"]["search_stats"]


def test_counterexample_replays(capsys, tmp_cwd):
    code, rep, _ = structured(capsys, "modelcheck", "--algorithm", "team-nodefer", "--n", "2", "--max-steps", "20",
                              "--counterexample", "ce.sched")
    assert code == 1
    text = (tmp_cwd / "ce.sched").read_text()
    assert text.startswith("# algorithm: team-nodefer")
    code, rep, _ = structured(capsys, "simulate", "--schedule", "ce.sched")
    assert code == 1
    assert not rep["result"]["verdict"]["agreement"]["pass"]


def test_simulate_schedule_errors(capsys, tmp_cwd):
    (tmp_cwd / "s.sched").write_text("# algorithm: team\n# n: 2\nstep 1\nstep 9\n")
    code, _, err = run(capsys, "simulate", "--schedule", "s.sched")
    assert code == 2 and "event 1" in err
    (tmp_cwd / "s.sched").write_text("step 1\nhop 1\n")
    code, _, err = run(capsys, "simulate", "--schedule", "s.sched")
    assert code == 2 and "line 2" in err
    (tmp_cwd / "s.sched").write_text("# algorithm: team\n")
    assert run(capsys, "simulate", "--schedule", "s.sched")[0] == 0
    assert run(capsys, "simulate", "--schedule", "absent.sched")[0] == 2


def test_text_output(capsys, tmp_cwd):
    code, out, _ = run(capsys, "check-type", "builtin:Sn,n=3", "--n", "3")
    assert code == 0
    assert "witness_found" in out and "Q_A=['(A,0)', '(A,1)', '(A,2)']" in out
    code, out, _ = run(capsys, "modelcheck", "--algorithm", "simul", "--n", "2", "--max-steps", "10",
                       "--max-crashes", "0")
    assert "agreement: pass" in out
    code, out, _ = run(capsys, "universal-demo")
    assert "final state: 6" in out


@pytest.mark.parametrize("argv", [
    ["check-type", "builtin:Tn,n=5", "--n", "4"],
    ["check-type", "builtin:Tn,n=5", "--n", "5", "--property", "discerning"],
    ["search", "builtin:Tn,n=4", "--n-max", "4"],
    ["audit", "builtin:Sn,n=3", "--n-max", "4"],
    ["modelcheck", "--algorithm", "team", "--n", "2", "--max-steps", "14", "--max-crashes", "2"],
    ["modelcheck", "--algorithm", "simul", "--n", "3", "--seeds", "30", "--max-steps", "100", "--max-crashes", "2"],
    ["universal-demo", "--seeds", "6"],
])
def test_jobs_do_not_change_reports(capsys, tmp_cwd, argv):
    first = structured(capsys, *argv, "--jobs", "1")[2]
    assert structured(capsys, *argv, "--jobs", "2")[2] == first
    assert structured(capsys, *argv, "--jobs", "1")[2] == first


def test_console_script_entry_point():
    out = subprocess.run([sys.executable, "-m", "rcons", "--version"], capture_output=True, text=True)
    assert out.returncode == 0 and out.stdout.startswith("rcons ")
