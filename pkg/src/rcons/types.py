"""Finite deterministic object types as explicit state machines.

An :class:`ObjectType` is a total transition/response table over a finite
set of canonical string states and a finite alphabet of update operations.
Operations are flattened together with their arguments, so ``write(0)`` and
``write(1)`` are two distinct operations.  The read operation of a readable
type is not part of ``ops``; it is implicit and returns the whole state.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Mapping, Sequence

import numpy as np

from .errors import InvalidArgument, TypeSpecError

BOTTOM = "⊥"
READ = "read"

StateId = str
OpId = str
Response = str


@dataclass(frozen=True, eq=False)
class ObjectType:
    name: str
    states: tuple[StateId, ...]
    ops: tuple[OpId, ...]
    delta: Mapping[tuple[StateId, OpId], tuple[StateId, Response]]
    readable: bool = True
    initial_states: tuple[StateId, ...] = ()
    bounded: bool = False  # finite truncation of an unbounded container

    def __post_init__(self):
        object.__setattr__(self, "states", tuple(self.states))
        object.__setattr__(self, "ops", tuple(self.ops))
        if not self.initial_states:
            object.__setattr__(self, "initial_states", self.states)
        else:
            object.__setattr__(self, "initial_states", tuple(self.initial_states))
        if len(set(self.states)) != len(self.states):
            raise InvalidArgument(f"{self.name}: duplicate state names")
        if len(set(self.ops)) != len(self.ops):
            raise InvalidArgument(f"{self.name}: duplicate operation names")
        if READ in self.ops:
            raise InvalidArgument(f"{self.name}: '{READ}' is reserved for the implicit read")
        known = set(self.states)
        for q in self.initial_states:
            if q not in known:
                raise InvalidArgument(f"{self.name}: initial state {q!r} is not a state")
        for q in self.states:
            for op in self.ops:
                try:
                    nxt, _ = self.delta[(q, op)]
                except KeyError:
                    raise InvalidArgument(f"{self.name}: delta undefined at ({q}, {op})") from None
                if nxt not in known:
                    raise InvalidArgument(f"{self.name}: ({q}, {op}) leads outside the state set to {nxt!r}")
        if len(self.delta) != len(self.states) * len(self.ops):
            raise InvalidArgument(f"{self.name}: delta mentions unknown states or operations")

    def __eq__(self, other):
        if not isinstance(other, ObjectType):
            return NotImplemented
        return (
            self.name == other.name
            and self.states == other.states
            and self.ops == other.ops
            and self.readable == other.readable
            and self.initial_states == other.initial_states
            and dict(self.delta) == dict(other.delta)
        )

    __hash__ = None  # type: ignore[assignment]

    def __repr__(self):
        return f"ObjectType({self.name!r}, {len(self.states)} states, ops={list(self.ops)})"

    @cached_property
    def state_index(self) -> dict[StateId, int]:
        return {q: i for i, q in enumerate(self.states)}

    @cached_property
    def op_index(self) -> dict[OpId, int]:
        return {o: i for i, o in enumerate(self.ops)}

    @cached_property
    def responses(self) -> tuple[Response, ...]:
        seen: dict[Response, None] = {}
        for q in self.states:
            for op in self.ops:
                seen.setdefault(self.delta[(q, op)][1], None)
        return tuple(seen)

    @cached_property
    def tables(self) -> tuple[np.ndarray, np.ndarray]:
        """Integer encodings ``(next_state[s, o], response[s, o])`` for the kernels."""
        si, ri = self.state_index, {r: i for i, r in enumerate(self.responses)}
        nxt = np.empty((len(self.states), len(self.ops)), dtype=np.int64)
        rsp = np.empty_like(nxt)
        for s, q in enumerate(self.states):
            for o, op in enumerate(self.ops):
                q2, r = self.delta[(q, op)]
                nxt[s, o] = si[q2]
                rsp[s, o] = ri[r]
        nxt.setflags(write=False)
        rsp.setflags(write=False)
        return nxt, rsp


@dataclass(frozen=True)
class SequenceOutcome:
    final_state: StateId
    responses: list[Response] = field(default_factory=list)


def apply_op(t: ObjectType, q: StateId, op: OpId) -> tuple[StateId, Response]:
    if q not in t.state_index:
        raise InvalidArgument(f"{t.name}: unknown state {q!r}")
    if op == READ:
        if not t.readable:
            raise InvalidArgument(f"{t.name} is not readable")
        return q, q
    try:
        return t.delta[(q, op)]
    except KeyError:
        raise InvalidArgument(f"{t.name}: unknown operation {op!r}") from None


def run_sequence(t: ObjectType, q0: StateId, seq: Sequence[OpId]) -> SequenceOutcome:
    q = q0
    if q not in t.state_index:
        raise InvalidArgument(f"{t.name}: unknown state {q!r}")
    responses = []
    for op in seq:
        q, r = apply_op(t, q, op)
        responses.append(r)
    return SequenceOutcome(q, responses)


def fmt_state(*parts) -> StateId:
    """Canonical rendering of a tuple-valued state, e.g. ``(A,0,1)``."""
    return "(" + ",".join(str(p) for p in parts) + ")"


def _fmt_seq(items: Sequence) -> StateId:
    return "[" + ",".join(str(v) for v in items) + "]"


# -- builtins ---------------------------------------------------------------


def tn_update(state: tuple, op: str, n: int) -> tuple[tuple, str]:
    """One atomic ``op_A``/``op_B`` on a T_n object in state (winner, row, col)."""
    winner, row, col = state
    rows, cols = math.ceil(n / 2), n // 2
    mine = "A" if op == "op_A" else "B"
    if winner == BOTTOM:
        return (mine, row, col), mine
    result = winner
    if mine == "A":
        col = (col + 1) % cols
        if col == 0:
            winner, row = BOTTOM, 0
    else:
        row = (row + 1) % rows
        if row == 0:
            winner, col = BOTTOM, 0
    return (winner, row, col), result


def _tn(n: int) -> ObjectType:
    if n < 4:
        raise InvalidArgument("T_n is defined for n >= 4")
    rows, cols = math.ceil(n / 2), n // 2
    raw = [(BOTTOM, 0, 0)] + [(w, r, c) for w in "AB" for r in range(rows) for c in range(cols)]
    delta = {}
    for st in raw:
        for op in ("op_A", "op_B"):
            nxt, res = tn_update(st, op, n)
            delta[(fmt_state(*st), op)] = (fmt_state(*nxt), res)
    return ObjectType(f"T{n}", [fmt_state(*s) for s in raw], ["op_A", "op_B"], delta)


def sn_update(state: tuple, op: str, n: int) -> tuple[tuple, str]:
    winner, row = state
    if op == "op_A":
        if (winner, row) == ("B", 0):
            winner = "A"
        else:
            winner, row = "B", 0
    else:
        row = (row + 1) % n
        if row == 0:
            winner = "B"
    return (winner, row), "ack"


def _sn(n: int) -> ObjectType:
    if n < 1:
        raise InvalidArgument("S_n requires n >= 1")
    if n == 1:
        return ObjectType("S1", [fmt_state("B", 0)], [], {})
    # (B,0) first so the search meets the canonical initial state early.
    raw = [("B", r) for r in range(n)] + [("A", r) for r in range(n)]
    delta = {}
    for st in raw:
        for op in ("op_A", "op_B"):
            nxt, res = sn_update(st, op, n)
            delta[(fmt_state(*st), op)] = (fmt_state(*nxt), res)
    return ObjectType(f"S{n}", [fmt_state(*s) for s in raw], ["op_A", "op_B"], delta)


def _values(domain: int) -> list[str]:
    if domain < 2:
        raise InvalidArgument("domain must contain ⊥ and at least one value (domain >= 2)")
    return [str(v) for v in range(domain - 1)]


def _register(domain: int) -> ObjectType:
    vals = _values(domain)
    states = [BOTTOM] + vals
    ops = [f"write({v})" for v in vals]
    delta = {(q, f"write({v})"): (v, "ack") for q in states for v in vals}
    return ObjectType(f"register{domain}", states, ops, delta)


def _test_and_set() -> ObjectType:
    delta = {("0", "tas"): ("1", "0"), ("1", "tas"): ("1", "1")}
    return ObjectType("test_and_set", ["0", "1"], ["tas"], delta)


def _cas(domain: int) -> ObjectType:
    vals = [str(v) for v in range(1, domain)]
    if not vals:
        raise InvalidArgument("compare_and_swap needs domain >= 2")
    states = [BOTTOM] + vals
    ops = [f"cas({a},{b})" for a in states for b in vals if a != b]
    delta = {}
    for q in states:
        for a in states:
            for b in vals:
                if a == b:
                    continue
                delta[(q, f"cas({a},{b})")] = (b, "success") if q == a else (q, "failure")
    return ObjectType(f"cas{domain}", states, ops, delta)


def _bounded_container(kind: str, depth: int, values: int) -> ObjectType:
    if depth < 1 or values < 1:
        raise InvalidArgument("depth and values must be >= 1")
    alphabet = [str(v) for v in range(values)]
    contents = [c for k in range(depth + 1) for c in itertools.product(alphabet, repeat=k)]
    put, take = ("push", "pop") if kind == "stack" else ("enq", "deq")
    ops = [f"{put}({v})" for v in alphabet] + [take]
    delta = {}
    for c in contents:
        q = _fmt_seq(c)
        for v in alphabet:
            delta[(q, f"{put}({v})")] = (q, "full") if len(c) == depth else (_fmt_seq(c + (v,)), "ack")
        if not c:
            delta[(q, take)] = (q, "empty")
        elif kind == "stack":
            delta[(q, take)] = (_fmt_seq(c[:-1]), c[-1])
        else:
            delta[(q, take)] = (_fmt_seq(c[1:]), c[0])
    return ObjectType(
        f"bounded_{kind}{depth}x{values}",
        [_fmt_seq(c) for c in contents],
        ops,
        delta,
        readable=False,
        bounded=True,
    )


def _counter(limit: int) -> ObjectType:
    if limit < 1:
        raise InvalidArgument("counter limit must be >= 1")
    states = [str(v) for v in range(limit + 1)]
    delta = {(str(v), "inc"): (str(v + 1), str(v)) for v in range(limit)}
    delta[(str(limit), "inc")] = (str(limit), "full")
    return ObjectType(f"counter{limit}", states, ["inc"], delta, bounded=True)


_KIND_ALIASES = {
    "register": "register",
    "test_and_set": "test_and_set",
    "tas": "test_and_set",
    "compare_and_swap": "compare_and_swap",
    "cas": "compare_and_swap",
    "bounded_stack": "bounded_stack",
    "stack": "bounded_stack",
    "bounded_queue": "bounded_queue",
    "queue": "bounded_queue",
    "counter": "counter",
    "Tn": "Tn",
    "Sn": "Sn",
}

BUILTIN_KINDS = tuple(sorted(set(_KIND_ALIASES.values())))


def builtin(kind: str, **params: int) -> ObjectType:
    """Materialize one of the standard types.

    ``Tn``/``Sn`` take ``n``; ``register``/``compare_and_swap`` take ``domain``
    (number of states including ⊥); ``bounded_stack``/``bounded_queue`` take
    ``depth`` and ``values`` (alphabet size); ``counter`` takes ``limit``.
    """
    try:
        canon = _KIND_ALIASES[kind]
    except KeyError:
        raise InvalidArgument(f"unknown builtin kind {kind!r}; expected one of {', '.join(BUILTIN_KINDS)}") from None
    allowed = {
        "Tn": {"n"},
        "Sn": {"n"},
        "register": {"domain"},
        "compare_and_swap": {"domain"},
        "test_and_set": set(),
        "bounded_stack": {"depth", "values"},
        "bounded_queue": {"depth", "values"},
        "counter": {"limit"},
    }[canon]
    extra = set(params) - allowed
    if extra:
        raise InvalidArgument(f"{canon}: unexpected parameters {sorted(extra)}")
    for k, v in params.items():
        if not isinstance(v, (int, np.integer)) or isinstance(v, bool):
            raise InvalidArgument(f"{canon}: parameter {k} must be an integer")
    try:
        if canon == "Tn":
            return _tn(params["n"])
        if canon == "Sn":
            return _sn(params["n"])
        if canon == "register":
            return _register(params.get("domain", 3))
        if canon == "compare_and_swap":
            return _cas(params.get("domain", 3))
        if canon == "test_and_set":
            return _test_and_set()
        if canon == "bounded_stack":
            return _bounded_container("stack", params.get("depth", 3), params.get("values", 2))
        if canon == "bounded_queue":
            return _bounded_container("queue", params.get("depth", 3), params.get("values", 2))
        return _counter(params.get("limit", 8))
    except KeyError as exc:
        raise InvalidArgument(f"{canon}: missing parameter {exc.args[0]}") from None


def parse_builtin_ref(ref: str) -> ObjectType:
    """Parse ``builtin:name,key=value,...`` (the ``builtin:`` prefix is optional)."""
    body = ref[len("builtin:"):] if ref.startswith("builtin:") else ref
    name, *pairs = [p.strip() for p in body.split(",") if p.strip()]
    params = {}
    for pair in pairs:
        key, sep, val = pair.partition("=")
        if not sep:
            raise InvalidArgument(f"malformed builtin parameter {pair!r}")
        try:
            params[key.strip()] = int(val)
        except ValueError:
            raise InvalidArgument(f"builtin parameter {key} must be an integer, got {val!r}") from None
    return builtin(name, **params)


def random_type(rng: np.random.Generator, n_states: int, n_ops: int, n_responses: int = 2, name: str | None = None) -> ObjectType:
    """A uniformly random total deterministic readable type."""
    states = [f"s{i}" for i in range(n_states)]
    ops = [f"o{i}" for i in range(n_ops)]
    delta = {}
    for q in states:
        for op in ops:
            delta[(q, op)] = (states[int(rng.integers(n_states))], f"r{int(rng.integers(n_responses))}")
    return ObjectType(name or f"random{n_states}x{n_ops}", states, ops, delta)


# -- type-spec text format --------------------------------------------------


def serialize_type(t: ObjectType) -> str:
    lines = [f"type {t.name}", "states: " + " ".join(t.states), "ops: " + " ".join(t.ops)]
    lines.append(f"readable: {'true' if t.readable else 'false'}")
    if t.initial_states != t.states:
        lines.append("initial: " + " ".join(t.initial_states))
    for q in t.states:
        for op in t.ops:
            q2, r = t.delta[(q, op)]
            lines.append(f"delta {q} {op} -> {q2} {r}")
    return "\n".join(lines) + "\n"


def parse_type_spec(text: str) -> ObjectType:
    name = None
    states: list[str] | None = None
    ops: list[str] | None = None
    initial: list[str] = []
    readable = True
    delta: dict[tuple[str, str], tuple[str, str]] = {}
    first_seen: dict[tuple[str, str], int] = {}

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0]
        if not line.strip():
            continue
        col = len(line) - len(line.lstrip()) + 1
        tokens = line.split()
        head = tokens[0]
        if head == "type":
            if len(tokens) != 2:
                raise TypeSpecError("expected 'type <name>'", lineno, col)
            if name is not None:
                raise TypeSpecError("duplicate type header", lineno, col)
            name = tokens[1]
        elif head in ("states:", "ops:", "initial:"):
            items = tokens[1:]
            if len(set(items)) != len(items):
                dup = next(x for x in items if items.count(x) > 1)
                raise TypeSpecError(f"duplicate name {dup!r} in {head[:-1]}", lineno, line.index(dup) + 1)
            if head == "states:":
                if states is not None:
                    raise TypeSpecError("duplicate states line", lineno, col)
                states = items
            elif head == "ops:":
                if ops is not None:
                    raise TypeSpecError("duplicate ops line", lineno, col)
                ops = items
            else:
                initial = items
        elif head == "readable:":
            if len(tokens) != 2 or tokens[1] not in ("true", "false"):
                raise TypeSpecError("expected 'readable: true|false'", lineno, col)
            readable = tokens[1] == "true"
        elif head == "delta":
            if len(tokens) != 6 or tokens[3] != "->":
                raise TypeSpecError("expected 'delta <state> <op> -> <state> <response>'", lineno, col)
            if name is None or states is None or ops is None:
                raise TypeSpecError("delta line before type/states/ops declarations", lineno, col)
            _, q, op, _, q2, r = tokens
            for tok, pool, what in ((q, states, "state"), (op, ops, "operation"), (q2, states, "state")):
                if tok not in pool:
                    raise TypeSpecError(f"unknown {what} {tok!r}", lineno, line.index(tok) + 1)
            if (q, op) in delta:
                raise TypeSpecError(f"duplicate transition for ({q}, {op}), first given on line {first_seen[(q, op)]}", lineno, col)
            delta[(q, op)] = (q2, r)
            first_seen[(q, op)] = lineno
        else:
            raise TypeSpecError(f"unexpected token {head!r}", lineno, col)

    if name is None:
        raise TypeSpecError("missing 'type <name>' header")
    if states is None or ops is None:
        raise TypeSpecError("missing states or ops declaration")
    missing = [(q, op) for q in states for op in ops if (q, op) not in delta]
    if missing:
        q, op = missing[0]
        raise TypeSpecError(f"non-total delta: no transition for ({q}, {op}) ({len(missing)} missing)")
    try:
        return ObjectType(name, states, ops, delta, readable=readable, initial_states=initial)
    except InvalidArgument as exc:
        raise TypeSpecError(str(exc)) from None


def load_type(ref: str) -> ObjectType:
    """Resolve a CLI type reference: ``builtin:...`` or a path to a type-spec file."""
    if ref.startswith("builtin:"):
        return parse_builtin_ref(ref)
    try:
        with open(ref, encoding="utf-8") as fh:
            return parse_type_spec(fh.read())
    except FileNotFoundError:
        raise InvalidArgument(f"type file not found: {ref}") from None

