"""Object types: builtin tables against a direct interpreter, and the text format."""

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rcons.errors import InvalidArgument, TypeSpecError
from rcons.types import (apply_op, builtin, load_type, parse_builtin_ref, parse_type_spec, random_type,
                         run_sequence, serialize_type)

from conftest import all_builtins


# A dictionary-state interpreter written from the operation descriptions.  It
# shares no code with the builtin tables.

def t_interp(st_, op, n):
    s = dict(st_)
    me = op[-1]
    if s["winner"] is None:
        s["winner"] = me
        return s, me
    result = s["winner"]
    if me == "A":
        s["col"] = (s["col"] + 1) % (n // 2)
        if s["col"] == 0:
            s["winner"], s["row"] = None, 0
    else:
        s["row"] = (s["row"] + 1) % math.ceil(n / 2)
        if s["row"] == 0:
            s["winner"], s["col"] = None, 0
    return s, result


def s_interp(st_, op, n):
    s = dict(st_)
    if op == "op_A":
        if s["winner"] == "B" and s["row"] == 0:
            s["winner"] = "A"
        else:
            s["winner"], s["row"] = "B", 0
    else:
        s["row"] = (s["row"] + 1) % n
        if s["row"] == 0:
            s["winner"] = "B"
    return s, "ack"


def t_name(s):
    return f"({s['winner'] or '⊥'},{s['row']},{s['col']})"


def s_name(s):
    return f"({s['winner']},{s['row']})"


@pytest.mark.parametrize("n", [4, 5, 6, 7])
def test_tn_table_matches_interpreter(n):
    t = builtin("Tn", n=n)
    raw = [{"winner": None, "row": 0, "col": 0}] + [
        {"winner": w, "row": r, "col": c} for w in "AB" for r in range(math.ceil(n / 2)) for c in range(n // 2)]
    assert sorted(t.states) == sorted(t_name(s) for s in raw)
    for s in raw:
        for op in ("op_A", "op_B"):
            nxt, res = t_interp(s, op, n)
            assert apply_op(t, t_name(s), op) == (t_name(nxt), res)


@pytest.mark.parametrize("n", [2, 3, 4, 5])
def test_sn_table_matches_interpreter(n):
    t = builtin("Sn", n=n)
    raw = [{"winner": w, "row": r} for w in "AB" for r in range(n)]
    assert sorted(t.states) == sorted(s_name(s) for s in raw)
    assert len(t.responses) == 1
    for s in raw:
        for op in ("op_A", "op_B"):
            nxt, res = s_interp(s, op, n)
            assert apply_op(t, s_name(s), op) == (s_name(nxt), res)


def test_s1_has_no_updates():
    t = builtin("Sn", n=1)
    assert t.ops == ()
    assert t.states == ("(B,0)",)


def test_tn_requires_four():
    with pytest.raises(InvalidArgument):
        builtin("Tn", n=3)


def test_tn_sequence_from_bottom():
    t = builtin("Tn", n=4)
    res = run_sequence(t, "(⊥,0,0)", ["op_B", "op_A", "op_A"])
    # op_B wins; the first op_A advances col, the second wraps it and resets.
    assert list(res.responses) == ["B", "B", "B"]
    assert res.final_state == "(⊥,0,0)"


def test_register_cas_tas_semantics():
    r = builtin("register", domain=3)
    assert r.states == ("⊥", "0", "1")
    assert apply_op(r, "⊥", "write(1)") == ("1", "ack")
    c = builtin("cas", domain=3)
    assert apply_op(c, "⊥", "cas(⊥,1)") == ("1", "success")
    assert apply_op(c, "2", "cas(⊥,1)") == ("2", "failure")
    tas = builtin("tas")
    assert apply_op(tas, "0", "tas") == ("1", "0")
    assert apply_op(tas, "1", "tas") == ("1", "1")


def test_bounded_containers():
    s = builtin("stack", depth=3, values=2)
    q = builtin("queue", depth=3, values=2)
    assert not s.readable and not q.readable
    assert s.bounded and len(s.states) == 15
    assert run_sequence(s, "[]", ["push(0)", "push(1)", "pop"]).responses == ["ack", "ack", "1"]
    assert run_sequence(q, "[]", ["enq(0)", "enq(1)", "deq"]).responses == ["ack", "ack", "0"]
    assert apply_op(s, "[0,0,0]", "push(1)") == ("[0,0,0]", "full")
    assert apply_op(q, "[]", "deq") == ("[]", "empty")


def test_counter_saturates():
    c = builtin("counter", limit=2)
    assert run_sequence(c, "0", ["inc"] * 3).responses == ["0", "1", "full"]


@pytest.mark.parametrize("t", all_builtins(), ids=lambda t: t.name)
def test_round_trip(t):
    again = parse_type_spec(serialize_type(t))
    assert again.name == t.name
    assert again.states == t.states and again.ops == t.ops
    assert again.readable == t.readable
    assert again.initial_states == t.initial_states
    assert dict(again.delta) == dict(t.delta)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 6), st.integers(0, 3))
def test_random_round_trip(seed, ns, no):
    t = random_type(np.random.default_rng(seed), ns, no)
    again = parse_type_spec(serialize_type(t))
    assert dict(again.delta) == dict(t.delta)
    assert serialize_type(again) == serialize_type(t)


def test_random_type_is_seeded():
    a = random_type(np.random.default_rng(7), 5, 3)
    b = random_type(np.random.default_rng(7), 5, 3)
    assert serialize_type(a) == serialize_type(b)


SPEC = """\
type flip
states: x y
ops: f
delta x f -> y ok
delta y f -> x ok
"""


def test_parse_and_load_file(tmp_path):
    p = tmp_path / "flip.type"
    p.write_text(SPEC)
    t = load_type(str(p))
    assert t.name == "flip" and t.readable
    assert apply_op(t, "x", "f") == ("y", "ok")


@pytest.mark.parametrize("text,line,column,fragment", [
    (SPEC.replace("delta y f -> x ok\n", ""), None, None, "non-total"),
    (SPEC + "delta x f -> x ok\n", 6, 1, "duplicate transition"),
    (SPEC.replace("delta x f -> y ok", "delta x f -> z ok"), 4, 14, "unknown state"),
    (SPEC.replace("delta x f -> y ok", "delta x g -> y ok"), 4, 9, "unknown operation"),
    (SPEC.replace("states: x y", "states: x y x"), 2, 9, "duplicate name"),
    (SPEC + "   bogus line\n", 6, 4, "unexpected token"),
    (SPEC.replace("delta x f -> y ok", "delta x f y ok"), 4, 1, "expected"),
])
def test_parse_errors_carry_position(text, line, column, fragment):
    with pytest.raises(TypeSpecError) as exc:
        parse_type_spec(text)
    assert fragment in str(exc.value)
    assert exc.value.line == line
    assert exc.value.column == column


def test_builtin_refs():
    assert parse_builtin_ref("builtin:Sn,n=3").name == "S3"
    assert load_type("builtin:Tn, n=5").name == "T5"
    with pytest.raises(InvalidArgument):
        parse_builtin_ref("builtin:Sn,n=x")
    with pytest.raises(InvalidArgument):
        builtin("Sn", n=2, depth=1)
    with pytest.raises(InvalidArgument):
        builtin("nonesuch")
