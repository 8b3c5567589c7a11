"""Acceptance criteria, one test each.

Every test records a single PASS/FAIL line; the lines are printed in the
pytest terminal summary, and directly when this file is run as a script.
"""

import json
import time

import numpy as np
import pytest

from rcons.cli import main
from rcons.hierarchy import (DISCERNING, RECORDING, TeamAssignment, _configs_for_q0, audit_implications, compute_Q,
                             compute_R, naive_Q, naive_R)
from rcons.types import random_type

from conftest import all_builtins

RESULTS: dict[int, str] = {}

TITLES = {
    1: "S_n is n-recording with Q_A/Q_B = (A,row)/(B,row), not (n+1)-discerning",
    2: "T_n is n-discerning with floor/ceil teams and not (n-1)-recording",
    3: "implication audit over builtins and 200 random types",
    4: "team consensus exhaustive check at n=2 and n=3",
    5: "bounded stack has no 2-recording witness, labeled within bound",
    6: "simultaneous-crash algorithm exhaustive n=2 plus 10,000 random n=3",
    7: "universal construction, counter and queue, 1,000 seeds each",
    8: "memoized Q/R equal the naive enumerator on all builtins, n <= 5",
    9: "reports identical across --jobs and repeated seeded runs",
}


def record(k: int, ok: bool, detail: str) -> None:
    RESULTS[k] = f"criterion {k}: {'PASS' if ok else 'FAIL'} - {TITLES[k]} ({detail})"
    print(RESULTS[k])


def cli(tmp_path, *argv):
    """Run a command; returns (exit code, report dict, report text, seconds)."""
    out = tmp_path / f"report{len(list(tmp_path.iterdir()))}.json"
    start = time.perf_counter()
    code = main([str(a) for a in argv] + ["--format", "structured", "--output", str(out)])
    text = out.read_text() if out.exists() else ""
    return code, (json.loads(text) if text else None), text, time.perf_counter() - start


def test_criterion_1_sn_witnesses(tmp_path, capsys):
    notes, ok = [], True
    for n in (2, 3, 4):
        code, rep, _, secs = cli(tmp_path, "check-type", f"builtin:Sn,n={n}", "--n", n, "--property", "recording")
        r = rep["result"]
        q = r["diagnostics"]["q_sets"] if r["witness"] else {"A": [], "B": []}
        match = (set(q["A"]) == {f"(A,{i})" for i in range(n)} and set(q["B"]) == {f"(B,{i})" for i in range(n)})
        code2, rep2, _, secs2 = cli(tmp_path, "check-type", f"builtin:Sn,n={n}", "--n", n + 1,
                                    "--property", "discerning")
        r2 = rep2["result"]
        exhausted = r2["witness"] is None and r2["search_stats"]["complete"]
        good = code == 0 and match and code2 == 0 and exhausted and secs < 60 and secs2 < 60
        ok &= good
        notes.append(f"n={n} Q match={match} not-{n + 1}-discerning={exhausted} {secs + secs2:.2f}s")
    capsys.readouterr()
    record(1, ok, "; ".join(notes))
    assert ok


def test_criterion_2_tn_gap(tmp_path, capsys):
    notes, ok = [], True
    for n in (4, 5):
        start = time.perf_counter()
        code, rep, _, _ = cli(tmp_path, "check-type", f"builtin:Tn,n={n}", "--n", n, "--property", "discerning")
        w = rep["result"]["witness"]
        sizes = sorted(list(w["team_of"].values()).count(x) for x in "AB") if w else None
        code2, rep2, _, _ = cli(tmp_path, "check-type", f"builtin:Tn,n={n}", "--n", n - 1, "--property", "recording")
        r2 = rep2["result"]
        not_rec = r2["witness"] is None and r2["search_stats"]["complete"]
        secs = time.perf_counter() - start
        good = code == 0 and sizes == [n // 2, n - n // 2] and not_rec and secs < 300
        ok &= good
        notes.append(f"n={n} team sizes={sizes} not-{n - 1}-recording={not_rec} {secs:.2f}s")
    capsys.readouterr()
    record(2, ok, "; ".join(notes))
    assert ok


def test_criterion_3_implication_audit():
    rng = np.random.default_rng(20240601)
    types = all_builtins() + [random_type(rng, int(rng.integers(1, 7)), int(rng.integers(1, 4)), name=f"random{i}")
                              for i in range(200)]
    violations, advisory = [], 0
    for t in types:
        rep = audit_implications(t, 5)
        violations += [(t.name, v["rule"], v["n"]) for v in rep.violations]
        advisory += rep.advisory
    ok = not violations and advisory == 0
    record(3, ok, f"{len(types)} types, {len(violations)} violations, {advisory} incomplete audits"
           + (f", first {violations[0]}" if violations else ""))
    assert ok


def test_criterion_4_team_consensus(tmp_path, capsys):
    notes, ok = [], True
    sites = {"A-read-A", "A-read-B", "B-read-A-1", "B-read-A-2", "B-read-B"}
    for n in (2, 3):
        code, rep, _, secs = cli(tmp_path, "modelcheck", "--algorithm", "team", "--type", f"builtin:Sn,n={n}",
                                 "--n", n, "--inputs", "0,1", "--max-crashes", 2, "--max-steps", 20, "--exhaustive")
        r = rep["result"]
        v = r["verdict"]
        cov = r["coverage"]
        covered = all(cov.get(s, 0) > 0 for s in sites)
        good = (code == 0 and v["agreement"]["pass"] and v["validity"]["pass"] and r["complete"] and covered
                and secs < 600)
        ok &= good
        notes.append(f"n={n} {r['schedules']} schedules, coverage min {min(cov.get(s, 0) for s in sites)}, "
                     f"{secs:.1f}s")
    capsys.readouterr()
    record(4, ok, "; ".join(notes))
    assert ok


def test_criterion_5_stack_weakness(tmp_path, capsys):
    code, rep, _, secs = cli(tmp_path, "check-type", "builtin:bounded_stack,depth=3,values=2", "--n", 2,
                             "--property", "recording")
    r = rep["result"]
    labeled = "within bound" in r["labels"]
    no_witness = r["witness"] is None and r["search_stats"]["complete"]
    ok = no_witness and labeled and secs < 120
    found = "" if r["witness"] is None else f"; witness found: q0={r['witness']['q0']} ops={r['witness']['op_of']}"
    capsys.readouterr()
    record(5, ok, f"complete={r['search_stats']['complete']} labeled={labeled} {secs:.2f}s{found}")
    assert ok


def test_criterion_6_simultaneous_crashes(tmp_path, capsys):
    start = time.perf_counter()
    code, rep, _, secs = cli(tmp_path, "modelcheck", "--algorithm", "simul", "--n", 2, "--max-crashes", 2,
                             "--max-steps", 40, "--exhaustive")
    r = rep["result"]
    code2, rep2, _, secs2 = cli(tmp_path, "modelcheck", "--algorithm", "simul", "--n", 3, "--seeds", 10000,
                                "--seed", 0, "--max-steps", 200, "--max-crashes", 2, "--crash-prob", 0.05)
    r2 = rep2["result"]
    total = time.perf_counter() - start
    inv = r["verdict"]["invariants"]["pass"] and r2["verdict"]["invariants"]["pass"]
    ok = (code == 0 and code2 == 0 and r["complete"] and r2["verdict"]["executions_checked"] == 10000 and inv
          and total < 600)
    capsys.readouterr()
    record(6, ok, f"exhaustive {r['schedules']} schedules in {secs:.1f}s; random "
           f"{r2['verdict']['executions_checked']} schedules in {secs2:.1f}s; per-trace assertions held={inv}")
    assert ok


def test_criterion_7_universal(tmp_path, capsys):
    notes, ok = [], True
    for obj in ("counter", "queue"):
        code, rep, _, secs = cli(tmp_path, "universal-demo", "--object", obj, "--processes", 3, "--ops", 6,
                                 "--seeds", 1000, "--seed", 0)
        r = rep["result"]
        good = code == 0 and r["seeds_run"] == 1000 and not r["failed_seeds"] and r["total_crashes"] > 0 and secs < 300
        ok &= good
        notes.append(f"{obj}: {r['seeds_run']} seeds, {len(r['failed_seeds'])} failed, "
                     f"{r['total_crashes']} crashes, {secs:.1f}s")
    capsys.readouterr()
    record(7, ok, "; ".join(notes))
    assert ok


def test_criterion_8_oracle_equivalence():
    # Every assignment up to renaming processes: team A first, operations as multisets.
    checked, mismatches = 0, []
    for t in all_builtins():
        if not t.ops:
            continue
        for n in range(2, 6):
            for q0 in t.initial_states:
                for ms_a, ms_b in _configs_for_q0(len(t.ops), n, RECORDING):
                    a = TeamAssignment.from_teams(q0, [t.ops[o] for o in ms_a], [t.ops[o] for o in ms_b])
                    checked += 1
                    for team in "AB":
                        if compute_Q(t, a, team) != naive_Q(t, a, team):
                            mismatches.append((t.name, a, "Q_" + team))
                    for j in range(1, n + 1):
                        if compute_R(t, a, j) != naive_R(t, a, j):
                            mismatches.append((t.name, a, f"R_{j}"))
    ok = not mismatches
    record(8, ok, f"{checked} assignments, {len(mismatches)} mismatches")
    assert ok


def test_criterion_9_determinism(tmp_path, capsys):
    commands = [
        ["check-type", "builtin:Tn,n=5", "--n", 5, "--property", "discerning"],
        ["check-type", "builtin:Tn,n=5", "--n", 4, "--property", "recording"],
        ["search", "builtin:Sn,n=3", "--n-max", 4],
        ["audit", "builtin:Tn,n=5", "--n-max", 5],
        ["modelcheck", "--algorithm", "team", "--n", 3, "--max-steps", 16, "--max-crashes", 1],
        ["modelcheck", "--algorithm", "team-nodefer", "--n", 2, "--max-steps", 20, "--max-crashes", 1],
        ["modelcheck", "--algorithm", "simul", "--n", 3, "--seeds", 200, "--max-steps", 200, "--max-crashes", 2],
        ["universal-demo", "--object", "queue", "--seeds", 40, "--seed", 5],
        ["universal-demo", "--object", "counter", "--seed", 7],
    ]
    differing = []
    for argv in commands:
        reports = [cli(tmp_path, *argv, "--jobs", jobs, "--counterexample", tmp_path / "ce.sched")[2]
                   if argv[0] == "modelcheck" else cli(tmp_path, *argv, "--jobs", jobs)[2]
                   for jobs in (1, 2, 1)]
        if len(set(reports)) != 1 or not reports[0]:
            differing.append(argv[0] + " " + " ".join(map(str, argv[1:3])))
    capsys.readouterr()
    ok = not differing
    record(9, ok, f"{len(commands)} commands x (jobs 1, jobs 2, jobs 1 again)"
           + (f"; differing: {differing}" if differing else ""))
    assert ok


if __name__ == "__main__":
    import sys

    sys.exit(pytest.main([__file__, "-q"]))
