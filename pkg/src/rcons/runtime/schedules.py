"""Schedule generation (exhaustive and random) and the schedule text format."""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Iterator, Sequence

from ..errors import ConfigurationError, ScheduleFormatError
from .system import (CRASHED, DECIDED, INDEPENDENT, RUNNING, SIMULTANEOUS, CrashAll, Crash, Event, Recover, Step,
                     SystemState)

Schedule = list


@dataclass(frozen=True)
class ScheduleBounds:
    """Finite limits for schedule generation.

    ``max_crashes`` counts Crash events (independent model) or CrashAll events
    (simultaneous model).  ``crash_constraint`` restricts crashes to p1 and
    keeps p1's crash count at most the total steps of the other processes in
    every prefix.
    """

    max_total_steps: int
    max_crashes: int = 0
    crash_constraint: bool = False

    def __post_init__(self):
        if self.max_total_steps < 0 or self.max_crashes < 0:
            raise ConfigurationError("schedule bounds must be non-negative")


def _check_model(s: SystemState, bounds: ScheduleBounds) -> None:
    if bounds.crash_constraint and s.model != INDEPENDENT:
        raise ConfigurationError("the p1 crash constraint only applies to the independent model")


def crash_candidates(s: SystemState, bounds: ScheduleBounds) -> list[int]:
    """Processes whose crash is worth generating: those with non-initial volatile state.

    A crash of a process that has not yet accessed memory in its current run
    leads to the same state once it recovers, so it is skipped.
    """
    if s.total_steps() >= bounds.max_total_steps or s.crash_events >= bounds.max_crashes:
        return []
    pids = [p.pid for p in s.procs if p.status == DECIDED or (p.status == RUNNING and p.history)]
    if bounds.crash_constraint:
        others = sum(p.steps for p in s.procs if p.pid != 1)
        p1 = s.procs[0]
        pids = [1] if 1 in pids and p1.crashes + 1 <= others else []
    return pids


def enabled_moves(s: SystemState, bounds: ScheduleBounds) -> list[tuple[Event, ...]]:
    """Moves in canonical order: steps by pid, then crash-and-recover pairs.

    A crash is always immediately followed by the recovery of the crashed
    processes; keeping a process crashed longer only delays it, which a later
    interleaving of steps already covers.
    """
    moves: list[tuple[Event, ...]] = []
    if s.total_steps() < bounds.max_total_steps:
        moves.extend((Step(p.pid),) for p in s.procs if p.status == RUNNING)
    cands = crash_candidates(s, bounds)
    if cands:
        if s.model == INDEPENDENT:
            moves.extend((Crash(pid), Recover(pid)) for pid in cands)
        else:
            moves.append((CrashAll(),) + tuple(Recover(p.pid) for p in s.procs))
    return moves


def enumerate_schedules(s: SystemState, bounds: ScheduleBounds) -> Iterator[Schedule]:
    """Every maximal schedule within ``bounds``, depth first in canonical move order.

    A schedule ends when no move is enabled: every process has decided and no
    crash is left worth taking, or the step budget is spent.
    """
    _check_model(s, bounds)
    prefix: list[Event] = []

    def rec(state: SystemState):
        moves = enabled_moves(state, bounds)
        if not moves:
            yield list(prefix)
            return
        for mv in moves:
            child = state.clone()
            for e in mv:
                child.apply(e)
            prefix.extend(mv)
            yield from rec(child)
            del prefix[len(prefix) - len(mv):]

    yield from rec(s.clone())


@dataclass(frozen=True)
class RandomBounds:
    max_total_steps: int
    max_crashes: int = 0
    crash_prob: float = 0.05
    crash_constraint: bool = False

    def as_schedule_bounds(self) -> ScheduleBounds:
        return ScheduleBounds(self.max_total_steps, self.max_crashes, self.crash_constraint)


def random_schedule(s: SystemState, seed: int, bounds: RandomBounds) -> Schedule:
    """A reproducible random maximal schedule: uniform steps, crashes with ``crash_prob``."""
    sched, _ = random_run(s, seed, bounds)
    return sched


def random_run(s: SystemState, seed: int, bounds: RandomBounds, recorder=None):
    """Generate a random schedule while executing it; returns ``(schedule, final_state)``.

    With ``recorder`` (a TraceRecorder over a clone of ``s``) events are applied through it.
    """
    sb = bounds.as_schedule_bounds()
    _check_model(s, sb)
    rng = random.Random(seed)
    state = recorder.s if recorder is not None else s.clone()
    apply = recorder.apply if recorder is not None else state.apply
    sched: Schedule = []
    while True:
        can_step = state.total_steps() < sb.max_total_steps
        running = [p.pid for p in state.procs if p.status == RUNNING] if can_step else []
        cands = crash_candidates(state, sb)
        if not running and not cands:
            break
        crash = bool(cands) and rng.random() < bounds.crash_prob
        if not running and not crash:
            break
        if crash:
            if state.model == INDEPENDENT:
                pid = rng.choice(cands)
                mv = (Crash(pid), Recover(pid))
            else:
                mv = (CrashAll(),) + tuple(Recover(p.pid) for p in state.procs)
        else:
            mv = (Step(rng.choice(running)),)
        for e in mv:
            apply(e)
            sched.append(e)
    return sched, state


# -- text format ------------------------------------------------------------


def format_schedule(sched: Sequence[Event], header: dict | None = None) -> str:
    lines = []
    for k, v in (header or {}).items():
        lines.append(f"# {k}: {v}")
    lines.extend(str(e) for e in sched)
    return "\n".join(lines) + "\n"


def parse_schedule(text: str) -> tuple[Schedule, dict]:
    """Parse the schedule format; returns the events and the ``# key: value`` header."""
    sched: Schedule = []
    header: dict = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            body = line[1:].strip()
            if ":" in body and not sched:
                k, v = body.split(":", 1)
                header[k.strip()] = v.strip()
            continue
        parts = line.split()
        kind = parts[0].lower()
        if kind == "crashall":
            if len(parts) != 1:
                raise ScheduleFormatError("crashall takes no argument", lineno)
            sched.append(CrashAll())
            continue
        if kind not in ("step", "crash", "recover"):
            raise ScheduleFormatError(f"unknown event {parts[0]!r}", lineno)
        if len(parts) != 2:
            raise ScheduleFormatError(f"{kind} needs exactly one process id", lineno)
        try:
            pid = int(parts[1])
        except ValueError:
            raise ScheduleFormatError(f"bad process id {parts[1]!r}", lineno) from None
        if pid < 1:
            raise ScheduleFormatError(f"process ids start at 1, got {pid}", lineno)
        sched.append(Event(kind, pid))
    return sched, header


__all__ = [
    "Schedule", "ScheduleBounds", "RandomBounds", "crash_candidates", "enabled_moves", "enumerate_schedules",
    "random_schedule", "random_run", "format_schedule", "parse_schedule", "CRASHED", "SIMULTANEOUS",
]
