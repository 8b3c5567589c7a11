"""Recoverable consensus under simultaneous crashes from one-shot consensus.

Shared cells: ``Round[k]`` (monotone, initially 0), ``D[r]`` (initially ⊥) and
one consensus instance ``C_r`` per round.  A process that finds its own
Round entry behind ``r`` claims round ``r``, agrees through ``C_r`` and
publishes the result in ``D[r]``; it returns once nobody has moved past ``r``.
Since all processes crash together, a process never re-enters a round whose
Round entry it already set, so each ``C_r`` is invoked at most once per process.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from functools import partial

from ..errors import ConfigurationError
from ..runtime.memory import (ByLast, ConsensusCell, Const, MemoryLayout, MonotoneRegister, ObjectCell, Propose, Read,
                              Register, Write)
from ..runtime.system import SIMULTANEOUS, AlgorithmProgram, Context, Observation
from .tournament import Tournament

def tag_first(gen, tag):
    """Forward ``gen``, tagging its first access so the runtime can flag a re-entry."""
    try:
        acc = next(gen)
    except StopIteration as stop:
        return stop.value
    acc = replace(acc, tag=tag)
    while True:
        resp = yield acc
        try:
            acc = gen.send(resp)
        except StopIteration as stop:
            return stop.value


@dataclass(frozen=True)
class SimulRCLayout:
    """``consensus`` is "atomic" or a crash-free Tournament over an n-discerning type."""

    n: int
    consensus: object = "atomic"

    def __post_init__(self):
        if self.n < 1:
            raise ConfigurationError("at least one process is required")
        if self.consensus != "atomic":
            if not isinstance(self.consensus, Tournament):
                raise ConfigurationError(f"unknown consensus instantiation {self.consensus!r}")
            if self.consensus.root.members != tuple(range(1, self.n + 1)):
                raise ConfigurationError("the consensus tournament must cover processes 1..n")

    def consensus_cost(self) -> int:
        if self.consensus == "atomic":
            return 1
        return max(self.consensus.step_bound(p) for p in range(1, self.n + 1))

    def memory(self) -> MemoryLayout:
        lay = MemoryLayout()
        for k in range(1, self.n + 1):
            lay.add(("Round", k), MonotoneRegister(0))
        lay.family("D", Const(Register()))
        if self.consensus == "atomic":
            lay.family("C", Const(ConsensusCell(self.n)))
        else:
            cfg = self.consensus.cfg
            lay.family("C", ByLast((("O", ObjectCell(cfg.object_type, cfg.q0)),), Register()))
        return lay

    def decide_round(self, ctx: Context, r: int, pref):
        if self.consensus == "atomic":
            return (yield Propose(("C", r), pref))
        inner = self.consensus.decide(ctx, ctx.pid, pref, ("C", r))
        return (yield from tag_first(inner, ("C", r)))


def simul_main(ctx: Context, layout: SimulRCLayout):
    j, n = ctx.pid, layout.n
    pref = ctx.input
    r = 1
    while True:
        mine = yield Read(("Round", j))
        if mine < r:
            yield Write(("Round", j), r)
            if r > 1:
                d = yield Read(("D", r - 1))
                if d is not None:
                    pref = d
            pref = yield from layout.decide_round(ctx, r, pref)
            yield Write(("D", r), pref)
            ahead = False
            for k in range(1, n + 1):
                if (yield Read(("Round", k))) > r:
                    ahead = True
                    break
            if not ahead:
                ctx.mark(("return", r, pref))
                return pref
        elif r > 1:
            d = yield Read(("D", r - 1))
            if d is not None:
                pref = d
        r += 1


@dataclass(frozen=True)
class SimulBound:
    """Accesses per run after ``c`` CrashAll events: every run ends by round c + 1."""

    n: int
    consensus_cost: int = 1

    def __call__(self, crashes: int) -> int:
        return (crashes + 1) * (self.n + 4 + self.consensus_cost)


def simul_decide(layout: SimulRCLayout) -> list[AlgorithmProgram]:
    bound = SimulBound(layout.n, layout.consensus_cost())
    uses = frozenset({"Round", "D", "C"})
    return [AlgorithmProgram("simul", partial(simul_main, layout=layout), step_bound=bound, model=SIMULTANEOUS,
                             uses=uses) for _ in range(layout.n)]


def simul_monitor(ann: frozenset, obs: Observation):
    """Once some process returns x at round i, every later D entry must hold x."""
    for m in obs.marks:
        if isinstance(m, tuple) and m[0] == "return":
            ann = ann | {m}
    acc = obs.access
    if acc and acc["access"] == "write" and acc["cell"][0] == "D":
        i2, y = acc["cell"][1], acc["value"]
        for _, i, x in ann:
            if i < i2 and x != y:
                return ann, f"D[{i2}] := {y!r} after a return of {x!r} at round {i}"
    return ann, None


def simul_postcheck(trace) -> str | None:
    ann = frozenset()
    for obs in trace.observations:
        ann, err = simul_monitor(ann, obs)
        if err:
            return err
    return None
