"""Exhaustive bounded model checking with state memoization.

Every maximal schedule within the bounds is covered, but a state reached by
two different prefixes is only expanded once: the number of schedules below
it is computed once and reused.  Since agreement, validity, termination and
invariant checks depend only on the current (hashable) state and the move
taken, a memoized state's subtree is known to be violation free.

The root's moves are explored as independent chunks, each with its own memo,
so a serial run and a parallel run perform exactly the same work and report
exactly the same numbers.
"""

from __future__ import annotations

import sys
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

from ..errors import RconsError
from .schedules import ScheduleBounds, _check_model, enabled_moves
from .system import RUNNING, Observation, SystemState
from .verdict import Verdict

# monitor(annotations, observation) -> (annotations, error or None)
Monitor = Callable[[frozenset, Observation], tuple]


@dataclass
class ExplorationResult:
    verdict: Verdict
    states: int = 0
    coverage: Counter = field(default_factory=Counter)
    complete: bool = True

    @property
    def schedules(self) -> int:
        return self.verdict.executions_checked

    def to_dict(self) -> dict:
        return {
            "verdict": self.verdict.to_dict(),
            "schedules": self.schedules,
            "states": self.states,
            "complete": self.complete,
            "coverage": {_label(k): v for k, v in sorted(self.coverage.items(), key=lambda kv: _label(kv[0]))},
        }


def _label(mark) -> str:
    if isinstance(mark, tuple):
        return ":".join(str(x) for x in mark)
    return str(mark)


class _Stop(Exception):
    pass


class _Explorer:
    def __init__(self, bounds: ScheduleBounds, inputs, monitor: Monitor | None):
        self.bounds = bounds
        self.inputs = set(inputs)
        self.monitor = monitor
        self.memo: dict = {}
        self.coverage: Counter = Counter()
        self.path: list = []
        self.verdict = Verdict()

    def key(self, s: SystemState, ann: frozenset):
        k = (s.key(), s.total_steps(), s.crash_events, ann)
        if self.bounds.crash_constraint:
            k += (s.procs[0].crashes, sum(p.steps for p in s.procs[1:]))
        return k

    def violation(self, prop: str, detail: str, **w):
        self.verdict.fail(prop, detail, list(self.path), **w)
        raise _Stop

    def expand(self, s: SystemState, mv: tuple, ann: frozenset):
        """Apply one move to a copy of ``s``, checking every property on the way."""
        child = s.clone()
        for e in mv:
            self.path.append(e)
            before = child.outputs
            try:
                obs = child.apply(e)
            except RconsError as err:
                self.violation("invariants", f"{type(err).__name__}: {err}")
            for m in obs.marks:
                self.coverage[m] += 1
            if self.monitor is not None:
                ann, err = self.monitor(ann, obs)
                if err:
                    self.violation("invariants", err)
            if obs.decided:
                v = obs.output
                if v not in self.inputs:
                    self.violation("validity", f"p{e.pid} output {v!r}, not an input", output=v)
                other = next((x for x in sorted(before, key=repr) if x != v), None)
                if other is not None:
                    self.violation("agreement", f"outputs {other!r} and {v!r}", outputs=(other, v))
            elif e.kind == "step":
                p = child.procs[e.pid - 1]
                bound = child.step_bound(e.pid)
                if p.status == RUNNING and bound is not None and p.pc >= bound:
                    self.violation("termination", f"p{e.pid} took {p.pc} accesses in a run without output "
                                   f"(bound {bound})", pid=e.pid)
        return child, ann

    def count(self, s: SystemState, ann: frozenset) -> int:
        k = self.key(s, ann)
        hit = self.memo.get(k)
        if hit is not None:
            return hit
        moves = enabled_moves(s, self.bounds)
        if not moves:
            total = 1
        else:
            total = 0
            for mv in moves:
                child, cann = self.expand(s, mv, ann)
                total += self.count(child, cann)
                del self.path[len(self.path) - len(mv):]
        self.memo[k] = total
        return total


def _explore_chunk(args):
    s, bounds, inputs, monitor, mv = args
    ex = _Explorer(bounds, inputs, monitor)
    complete = True
    try:
        if mv is None:
            n = ex.count(s, frozenset())
        else:
            child, ann = ex.expand(s, mv, frozenset())
            n = ex.count(child, ann)
        ex.verdict.executions_checked = n
    except _Stop:
        complete = False
    return ExplorationResult(ex.verdict, len(ex.memo), ex.coverage, complete)


def model_check(s: SystemState, bounds: ScheduleBounds, inputs=None, monitor: Monitor | None = None,
                jobs: int = 1) -> ExplorationResult:
    """Check agreement, validity, termination and invariants over all schedules within ``bounds``.

    Stops at the first violation (in canonical schedule order); the verdict
    then carries the violating schedule and ``complete`` is False.
    """
    _check_model(s, bounds)
    inputs = s.inputs if inputs is None else inputs
    base = s.clone()
    limit = max(sys.getrecursionlimit(), 4 * (bounds.max_total_steps + 4 * bounds.max_crashes + 50))
    sys.setrecursionlimit(limit)
    moves = enabled_moves(base, bounds)
    if not moves:
        return _explore_chunk((base, bounds, inputs, monitor, None))
    tasks = [(base, bounds, inputs, monitor, mv) for mv in moves]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_explore_chunk, tasks))
    else:
        results = []
        for t in tasks:
            r = _explore_chunk(t)
            results.append(r)
            if not r.complete:
                break
    out = ExplorationResult(Verdict())
    for r in results:
        out.verdict = out.verdict.merge(r.verdict)
        out.states += r.states
        out.coverage.update(r.coverage)
        if not r.complete:
            out.complete = False
            break  # later chunks are ignored so serial and parallel runs agree
    return out
