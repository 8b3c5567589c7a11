"""Small worked examples with known answers, one assertion block each."""

import json

import pytest

from rcons.algorithms import build_algorithm
from rcons.algorithms.universal import UniversalLayout, demo_workloads, node_id, universal_programs, check_universal
from rcons.cli import main
from rcons.hierarchy import (TeamAssignment, audit_implications, check_discerning, check_recording, compute_Q,
                             compute_R, search_discerning, search_recording)
from rcons.runtime import (AlgorithmProgram, Crash, CrashAll, MemoryLayout, RandomBounds, Read, Recover, Register,
                           ScheduleBounds, Step, init_system, model_check, random_schedule, run_schedule)
from rcons.runtime.system import RUNNING
from rcons.types import apply_op, builtin, run_sequence


def test_type_examples():
    assert apply_op(builtin("Sn", n=3), "(B,0)", "op_A") == ("(A,0)", "ack")
    s3 = builtin("Sn", n=3)
    for q in s3.states:
        assert apply_op(s3, q, "read") == (q, q)
    assert apply_op(builtin("Tn", n=6), "(⊥,0,0)", "op_B") == ("(B,0,0)", "B")
    assert run_sequence(s3, "(A,1)", []).final_state == "(A,1)"
    assert run_sequence(builtin("Sn", n=2), "(B,0)", ["op_B", "op_B"]).final_state == "(B,0)"
    res = run_sequence(builtin("cas", domain=3), "⊥", ["cas(⊥,1)", "cas(⊥,2)"])
    assert res.final_state == "1" and list(res.responses) == ["success", "failure"]
    assert len(s3.states) == 6 and set(s3.ops) == {"op_A", "op_B"}
    assert len(builtin("Tn", n=4).states) == 9
    assert builtin("register", domain=3).ops == ("write(0)", "write(1)")


def test_cas_q_set():
    t = builtin("cas", domain=4)
    a = TeamAssignment("⊥", "ABB", ["cas(⊥,1)", "cas(⊥,2)", "cas(⊥,3)"])
    assert compute_Q(t, a, "A") == {"1"}


@pytest.mark.parametrize("n", [2, 3, 4])
def test_cas_every_partition_records(n):
    t = builtin("cas", domain=n + 1)
    ops = [f"cas(⊥,{i})" for i in range(1, n + 1)]
    for mask in range(1, 2 ** n - 1):
        teams = ["A" if mask >> i & 1 else "B" for i in range(n)]
        assert check_recording(t, TeamAssignment("⊥", teams, ops)).passed


def test_tas_condition_one():
    d = check_recording(builtin("tas"), TeamAssignment("0", "AB", ["tas", "tas"]))
    assert d.conditions[0] == {"condition": "1", "pass": False, "violating_state": "1"}


@pytest.mark.parametrize("n", [4, 5, 6, 7])
def test_tn_discerning_assignment(n):
    t = builtin("Tn", n=n)
    a = TeamAssignment.from_teams("(⊥,0,0)", ["op_A"] * (n // 2), ["op_B"] * (n - n // 2))
    assert check_discerning(t, a).passed


def test_register_overwrite_pair():
    t = builtin("register", domain=3)
    ra, rb = compute_R(t, TeamAssignment.from_teams("⊥", ["write(0)"], ["write(1)"]), 1)
    # p1 alone, or p2 then p1, both leave (ack, 0).
    assert ra & rb == {("ack", "0")}
    assert ra == {("ack", "0"), ("ack", "1")}


def test_search_examples():
    w = search_recording(builtin("Sn", n=3), 3).witness
    assert sorted(w.op_of) == ["op_A", "op_B", "op_B"] and w.q0 == "(B,0)"
    assert w.team_of[w.op_of.index("op_A")] != w.team_of[(w.op_of.index("op_A") + 1) % 3]
    assert search_recording(builtin("Tn", n=4), 3).witness is None
    assert search_discerning(builtin("Tn", n=4), 4).witness is not None
    assert search_discerning(builtin("Sn", n=3), 4).complete
    assert search_discerning(builtin("Sn", n=3), 4).witness is None
    rep = search_discerning(builtin("register", domain=3), 2)
    assert rep.witness is None and rep.complete


def test_audit_examples():
    s4 = audit_implications(builtin("Sn", n=4), 5)
    assert s4.max_n("recording") == 4 and s4.max_n("discerning") == 4 and not s4.violations
    t4 = audit_implications(builtin("Tn", n=4), 4)
    assert t4.max_n("discerning") == 4 and t4.max_n("recording") == 2 and not t4.violations
    reg = audit_implications(builtin("register", domain=3), 3)
    assert [r.recording for r in reg.rows] == [False, False] and not reg.violations


def test_team_examples():
    alg = build_algorithm("team", 3, inputs=[0, 1])
    s = alg.system()
    sched = []
    while True:
        tr = run_schedule(s, sched)
        if tr._system.procs[0].status != RUNNING:
            break
        sched.append(Step(1))
    # p1 is the singleton team here, so its run includes the deferral read of the other register.
    assert tr.outputs[1] == [0] and len(sched) == 6

    two = build_algorithm("team", 2)
    s2 = two.system()
    sched = []
    for k in range(12):
        pid = 1 + k % 2
        if run_schedule(s2, sched)._system.procs[pid - 1].status == RUNNING:
            sched.append(Step(pid))
    tr = run_schedule(s2, sched)
    assert len(tr.outputs[1]) == len(tr.outputs[2]) == 1 and tr.outputs[1] == tr.outputs[2]

    tr = run_schedule(two.system(), [Step(1), Step(1), Crash(1), Recover(1), Step(1)])
    first, restart = tr.observations[0], tr.observations[-1]
    assert first.access["access"] == "write" and restart.access == first.access


def line(ctx):
    yield Read(("x",))
    yield Read(("x",))
    return ctx.input


def test_two_by_two_interleavings():
    s = init_system([AlgorithmProgram("line", line)] * 2, [0, 0], MemoryLayout().add(("x",), Register()))
    assert model_check(s, ScheduleBounds(4)).schedules == 6


def test_two_process_tournament_is_team_consensus():
    bounds = ScheduleBounds(16, 1)
    team = model_check(build_algorithm("team", 2).system(), bounds)
    tour = model_check(build_algorithm("tournament", 2).system(), bounds)
    assert team.schedules == tour.schedules
    assert team.verdict.passed and tour.verdict.passed


def test_tournament_unanimous_n4():
    alg = build_algorithm("tournament", 4, inputs=[1, 1, 1, 1])
    s = alg.system()
    for seed in range(300):
        sched = random_schedule(s, seed, RandomBounds(200, 0))
        tr = run_schedule(s, sched)
        assert tr.outputs == {1: [1], 2: [1], 3: [1], 4: [1]}


def test_simul_decision_survives_crashall():
    alg = build_algorithm("simul", 2, inputs=[0, 1])
    s = alg.system()
    sched = [Step(2)] * 4  # read Round[2], Round[2] := 1, propose, D[1] := 1
    tr = run_schedule(s, sched)
    assert tr.final_memory[("D", 1)] == 1
    sched += [CrashAll(), Recover(1), Recover(2)]
    for pid in (1, 2):
        while run_schedule(s, sched)._system.procs[pid - 1].status == RUNNING:
            sched.append(Step(pid))
    tr = run_schedule(s, sched)
    assert tr.outputs == {1: [1], 2: [1]}


def test_universal_crash_after_announce_appends_once():
    t, work = demo_workloads("counter", 2, 2)
    L = UniversalLayout.build(2, t, work)
    s = init_system(universal_programs(L), [0, 0], L.memory())
    sched = [Step(1)] * 4 + [Crash(1), Recover(1)]
    for pid in (2, 1):
        while run_schedule(s, sched)._system.procs[pid - 1].status == RUNNING:
            sched.append(Step(pid))
    tr = run_schedule(s, sched)
    checks = check_universal(tr, L)
    nodes = [n["node"] for n in checks["list"]]
    assert nodes.count(list(node_id(1, 0))) == 1
    assert checks["append_once"]["pass"] and checks["final_state"] == "2"


def test_universal_demo_seed_one(tmp_path, capsys):
    out = tmp_path / "r.json"
    code = main(["universal-demo", "--object", "counter", "--processes", "3", "--ops", "6", "--seed", "1",
                 "--output", str(out)])
    capsys.readouterr()
    rep = json.loads(out.read_text())
    assert code == 0 and rep["result"]["run"]["final_state"] == "6"
    assert all(c["pass"] for c in rep["result"]["run"]["checks"].values())
