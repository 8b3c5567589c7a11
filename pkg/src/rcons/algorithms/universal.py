"""Recoverable wait-free universal construction with helping.

Operations are appended to a linked list of nodes.  Each node's successor is
chosen by its own recoverable consensus instance, so the list order is the
linearization.  Shared cells:

* ``("Announce", i)`` / ``("Head", i)``: the node p_i announced last and the
  latest list node p_i knows of (both initially the dummy node);
* ``("node", id, field)`` for field in seq / op / newState / response;
* ``("next", id, ...)``: cells of the consensus instance deciding id's successor.

The demo client keeps ``("Done", i)`` (operations completed) and
``("Resp", i, k)`` (the response of its k-th operation) in shared memory so a
recovering process can tell whether its pending operation already took effect.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import partial

from ..errors import ConfigurationError
from ..hierarchy import search_recording
from ..runtime.memory import ByLast, MemoryLayout, ObjectCell, RCCell, Propose, Read, Register, Write
from ..runtime.system import AlgorithmProgram, Context
from ..types import ObjectType, apply_op, builtin
from .team import TeamConsensusConfig
from .tournament import Tournament, persistent_proposal

DUMMY = ("n", 0, 0)
NO_PENDING = "no-pending-operation"


def node_id(pid: int, k: int) -> tuple:
    return ("n", pid, k)


@dataclass(frozen=True)
class UniversalLayout:
    n: int
    seq_type: ObjectType
    workloads: tuple  # per process, the operations it performs in order
    rc: object  # a Tournament over an n-recording type, or "atomic"
    initial_state: str | None = None

    @classmethod
    def build(cls, n: int, seq_type: ObjectType, workloads, rc: str = "tournament") -> UniversalLayout:
        if n < 1:
            raise ConfigurationError("at least one process is required")
        workloads = tuple(tuple(w) for w in workloads)
        if len(workloads) != n:
            raise ConfigurationError(f"{len(workloads)} workloads for {n} processes")
        for w in workloads:
            for op in w:
                if op not in seq_type.op_index:
                    raise ConfigurationError(f"{op!r} is not an operation of {seq_type.name}")
        if rc == "tournament":
            rc_obj = rc_tournament(n)
        elif rc == "atomic":
            rc_obj = "atomic"
        else:
            raise ConfigurationError(f"unknown consensus instantiation {rc!r}")
        return cls(n, seq_type, workloads, rc_obj)

    @property
    def q_init(self) -> str:
        if self.initial_state is not None:
            return self.initial_state
        t = self.seq_type
        return t.initial_states[0] if t.initial_states else t.states[0]

    def decide_cost(self) -> int:
        if self.rc == "atomic":
            return 1
        return 2 + max(self.rc.step_bound(p) for p in range(1, self.n + 1))

    def memory(self) -> MemoryLayout:
        lay = MemoryLayout()
        for i in range(1, self.n + 1):
            lay.add(("Announce", i), Register(DUMMY)).add(("Head", i), Register(DUMMY)).add(("Done", i), Register(0))
        lay.add(("node", DUMMY, "seq"), Register(1)).add(("node", DUMMY, "newState"), Register(self.q_init))
        lay.family("node", ByLast((), Register()))
        lay.family("Resp", ByLast((), Register()))
        if self.rc == "atomic":
            lay.family("next", ByLast((("rc", RCCell()),), Register()))
        else:
            cfg = self.rc.cfg
            by_last = (("O", ObjectCell(cfg.object_type, cfg.q0)),) if cfg is not None else ()
            lay.family("next", ByLast(by_last, Register()))
        return lay


def rc_tournament(n: int) -> Tournament:
    """Recoverable consensus for n processes from S_n and registers."""
    from .tournament import TournamentNode

    if n == 1:
        return Tournament(None, TournamentNode((1,), "t"))
    t = builtin("Sn", n=n)
    rep = search_recording(t, n)
    if rep.witness is None:  # pragma: no cover - S_n is always n-recording
        raise ConfigurationError(f"no {n}-recording witness for {t.name}")
    return Tournament.for_processes(TeamConsensusConfig.from_witness(t, rep.witness), range(1, n + 1))


def decide_next(ctx: Context, L: UniversalLayout, head, proposal):
    """Successor of ``head`` in the list; repeated calls by a process keep its first proposal."""
    if L.rc == "atomic":
        return (yield Propose(("next", head, "rc"), proposal))
    v = yield from persistent_proposal(("next", head, "in", ctx.pid), proposal)
    return (yield from L.rc.decide(ctx, ctx.pid, v, ("next", head)))


def apply_operation(ctx: Context, L: UniversalLayout):
    """Help append nodes until p_i's announced node is in the list; returns its response."""
    i, n = ctx.pid, L.n
    mine = yield Read(("Announce", i))
    while (yield Read(("node", mine, "seq"))) == 0:
        head = yield Read(("Head", i))
        hseq = yield Read(("node", head, "seq"))
        priority = (hseq + 1) % n  # 0-based: process priority + 1
        other = yield Read(("Announce", priority + 1))
        pointer = other if (yield Read(("node", other, "seq"))) == 0 else mine
        winner = yield from decide_next(ctx, L, head, pointer)
        ctx.mark(("decided", head, winner))
        op = yield Read(("node", winner, "op"))
        state = yield Read(("node", head, "newState"))
        new_state, response = apply_op(L.seq_type, state, op)
        yield Write(("node", winner, "newState"), new_state)
        yield Write(("node", winner, "response"), response)
        yield Write(("node", winner, "seq"), hseq + 1)
        yield Write(("Head", i), winner)
    return (yield Read(("node", mine, "response")))


def universal_invoke(ctx: Context, L: UniversalLayout, op, nid):
    i = ctx.pid
    yield Write(("node", nid, "op"), op)
    yield Write(("node", nid, "seq"), 0)
    yield Write(("Announce", i), nid)
    head = yield Read(("Head", i))
    hseq = yield Read(("node", head, "seq"))
    for j in range(1, L.n + 1):
        if j == i:
            continue
        hj = yield Read(("Head", j))
        sj = yield Read(("node", hj, "seq"))
        if sj > hseq:
            head, hseq = hj, sj
            yield Write(("Head", i), hj)
    return (yield from apply_operation(ctx, L))


def universal_recover(ctx: Context, L: UniversalLayout):
    """Finish the last announced operation; NO_PENDING if nothing was ever announced."""
    nid = yield Read(("Announce", ctx.pid))
    if nid == DUMMY:
        return NO_PENDING
    return (yield from apply_operation(ctx, L))


def client_main(ctx: Context, L: UniversalLayout):
    i = ctx.pid
    ops = L.workloads[i - 1]
    while True:
        k = yield Read(("Done", i))
        if k >= len(ops):
            return k
        resp = yield from universal_invoke(ctx, L, ops[k], node_id(i, k))
        yield Write(("Resp", i, k), resp)
        yield Write(("Done", i), k + 1)


def client_recover(ctx: Context, L: UniversalLayout):
    i = ctx.pid
    nid = yield Read(("Announce", i))
    resp = yield from universal_recover(ctx, L)
    if resp == NO_PENDING:
        ctx.mark(("no-pending", i))
    else:
        ctx.mark(("recovered", nid, resp))
        k = nid[2]
        if (yield Read(("Done", i))) == k:
            yield Write(("Resp", i, k), resp)
            yield Write(("Done", i), k + 1)
    return (yield from client_main(ctx, L))


@dataclass(frozen=True)
class UniversalBound:
    per_run: int

    def __call__(self, crashes: int) -> int:
        return self.per_run


def universal_step_bound(L: UniversalLayout, pid: int) -> int:
    n = L.n
    loop = 11 + L.decide_cost()
    per_op = 3 + 2 + 2 * (n - 1) + (n - 1) + 1 + (n * (n + 1) + 1) * loop + 1 + 3
    return (len(L.workloads[pid - 1]) + 1) * per_op + 4


def universal_programs(L: UniversalLayout) -> list[AlgorithmProgram]:
    return [AlgorithmProgram(f"universal:{L.seq_type.name}", partial(client_main, L=L), partial(client_recover, L=L),
                             step_bound=UniversalBound(universal_step_bound(L, pid)),
                             uses=frozenset({"Announce", "Head", "Done", "node", "Resp", "next"}))
            for pid in range(1, L.n + 1)]


# -- checks -----------------------------------------------------------------


def demo_workloads(kind: str, n: int, total_ops: int) -> tuple[ObjectType, tuple]:
    """Sequential object and per-process operations (op m goes to process m mod n + 1)."""
    if kind == "counter":
        t = builtin("counter", limit=max(total_ops, 1))
        ops = ["inc"] * total_ops
    elif kind in ("queue", "bounded_queue"):
        t = builtin("bounded_queue", depth=3, values=2)
        ops = [f"enq({(m // 2) % 2})" if m % 3 != 2 else "deq" for m in range(total_ops)]
    else:
        raise ConfigurationError(f"unknown demo object {kind!r}; expected counter or queue")
    work = [[] for _ in range(n)]
    for m, op in enumerate(ops):
        work[m % n].append(op)
    return t, tuple(tuple(w) for w in work)


def check_universal(trace, L: UniversalLayout) -> dict:
    """Post-checks on a finished execution; every entry is ``{"pass": bool, "detail": str}``."""
    mem = trace.final_memory
    seqs = {cid[1]: v for cid, v in mem.items() if cid[0] == "node" and cid[2] == "seq" and v}
    out = {}

    # list well-formedness
    order = sorted(seqs, key=seqs.get)
    values = [seqs[nd] for nd in order]
    problems = []
    if values != list(range(1, len(values) + 1)):
        problems.append(f"seq values {values} are not consecutive from 1")
    state = L.q_init
    replay = {}
    for nd in order[1:]:
        op = mem.get(("node", nd, "op"))
        state, resp = apply_op(L.seq_type, state, op)
        replay[nd] = resp
        if mem.get(("node", nd, "newState")) != state:
            problems.append(f"{nd} stores newState {mem.get(('node', nd, 'newState'))!r}, replay gives {state!r}")
        if mem.get(("node", nd, "response")) != resp:
            problems.append(f"{nd} stores response {mem.get(('node', nd, 'response'))!r}, replay gives {resp!r}")
    out["well_formed"] = {"pass": not problems, "detail": "; ".join(problems[:3])}

    # append exactly once: each consensus instance has one successor, each node one predecessor
    succ, pred, problems = {}, {}, []
    for m in trace.marks():
        if isinstance(m, tuple) and m[0] == "decided":
            _, head, win = m
            if succ.setdefault(head, win) != win:
                problems.append(f"{head} has successors {succ[head]} and {win}")
            if pred.setdefault(win, head) != head:
                problems.append(f"{win} appended after both {pred[win]} and {head}")
    for a, b in zip(order, order[1:]):
        if succ.get(a, b) != b:
            problems.append(f"list order {a} -> {b} disagrees with the decided successor {succ[a]}")
    announced = {cid[1] for cid in mem if cid[0] == "node" and cid[2] == "op"}
    done = {i: mem.get(("Done", i), 0) for i in range(1, L.n + 1)}
    for i, w in enumerate(L.workloads, 1):
        for k in range(done[i]):
            if node_id(i, k) not in seqs:
                problems.append(f"completed operation {node_id(i, k)} is not in the list")
    for nd in seqs:
        if nd != DUMMY and nd not in announced:
            problems.append(f"{nd} is in the list but was never announced")
    out["append_once"] = {"pass": not problems, "detail": "; ".join(problems[:3])}

    # clients saw the responses of the linearization
    problems = []
    for i in range(1, L.n + 1):
        for k in range(done[i]):
            got = mem.get(("Resp", i, k))
            want = replay.get(node_id(i, k))
            if got != want:
                problems.append(f"p{i} op {k} recorded {got!r}, sequential replay gives {want!r}")
    out["sequential_replay"] = {"pass": not problems, "detail": "; ".join(problems[:3])}

    # detectability: a recovered response is the one stored in the announced node
    problems = []
    for m in trace.marks():
        if isinstance(m, tuple) and m[0] == "recovered":
            _, nd, resp = m
            if mem.get(("node", nd, "response")) != resp:
                problems.append(f"recovery of {nd} returned {resp!r}, node holds {mem.get(('node', nd, 'response'))!r}")
    out["detectability"] = {"pass": not problems, "detail": "; ".join(problems[:3])}

    complete = all(done[i] == len(w) for i, w in enumerate(L.workloads, 1))
    out["completed"] = {"pass": complete, "detail": "" if complete else f"done counts {done}"}
    out["final_state"] = state
    out["list"] = [{"node": list(nd), "seq": seqs[nd], "op": mem.get(("node", nd, "op")),
                    "response": mem.get(("node", nd, "response")), "newState": mem.get(("node", nd, "newState"))}
                   for nd in order]
    return out


def universal_passed(checks: dict) -> bool:
    return all(v["pass"] for v in checks.values() if isinstance(v, dict) and "pass" in v)
