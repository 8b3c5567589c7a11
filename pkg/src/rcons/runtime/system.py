"""Processes, events and the step semantics of the crash-recovery model.

A program is a generator function ``routine(ctx)`` that yields shared-memory
accesses and receives their responses; its return value is the run's output.
A process's volatile state is the generator.  Rather than copying generators,
a process keeps the tuple of responses it has received in its current run and
the generator is rebuilt by replaying them whenever needed, so cloning a
system is cheap and the process state stays hashable.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable, Iterable, Sequence

from ..errors import ConfigurationError, InvalidEventError, ProtocolError, RconsError
from .memory import Access, Memory, MemoryLayout

INDEPENDENT = "independent"
SIMULTANEOUS = "simultaneous"
MODELS = (INDEPENDENT, SIMULTANEOUS)

RUNNING, CRASHED, DECIDED = "running", "crashed", "decided"


# -- events -----------------------------------------------------------------


@dataclass(frozen=True)
class Event:
    kind: str  # step | crash | crashall | recover
    pid: int | None = None

    def __str__(self):
        return self.kind if self.pid is None else f"{self.kind} {self.pid}"


def Step(pid: int) -> Event:
    return Event("step", pid)


def Crash(pid: int) -> Event:
    return Event("crash", pid)


def Recover(pid: int) -> Event:
    return Event("recover", pid)


CRASH_ALL = Event("crashall")


def CrashAll() -> Event:
    return CRASH_ALL


# -- programs ---------------------------------------------------------------


class Context:
    """What a routine may see: its pid, n, its input, and a coverage hook."""

    __slots__ = ("pid", "n", "input", "live", "marks")

    def __init__(self, pid: int, n: int, input: Any, live: bool):
        self.pid = pid
        self.n = n
        self.input = input
        self.live = live
        self.marks: list = []

    def mark(self, label) -> None:
        # replayed prefixes must not double count
        if self.live:
            self.marks.append(label)


@dataclass(frozen=True)
class AlgorithmProgram:
    """Code for one process.

    ``step_bound(c)`` is the most shared accesses a run may take when ``c``
    crash events have happened so far; ``None`` disables termination checks.
    """

    name: str
    main: Callable[[Context], Any]
    recover: Callable[[Context], Any] | None = None
    step_bound: Callable[[int], int] | None = None
    model: str | None = None  # crash model the algorithm requires, if any
    uses: frozenset = frozenset()  # cell ids or family names touched


def _constant(k: int):
    return _ConstBound(k)


@dataclass(frozen=True)
class _ConstBound:
    k: int

    def __call__(self, crashes: int) -> int:
        return self.k


# -- state ------------------------------------------------------------------


@dataclass
class ProcessState:
    pid: int
    input: Any
    status: str = RUNNING
    output: Any = None
    recovering: bool = False
    history: tuple = ()
    steps: int = 0
    crashes: int = 0
    runs: int = 1
    _gen: Any = field(default=None, repr=False, compare=False)
    _pending: Any = field(default=None, repr=False, compare=False)
    _ctx: Any = field(default=None, repr=False, compare=False)

    @property
    def pc(self) -> int:
        """Shared accesses taken in the current run."""
        return len(self.history)

    def key(self) -> tuple:
        return (self.status, self.output, self.recovering, self.history)

    def copy(self) -> ProcessState:
        return ProcessState(self.pid, self.input, self.status, self.output, self.recovering,
                            self.history, self.steps, self.crashes, self.runs)


@dataclass
class Observation:
    event: str
    pid: int | None
    access: dict | None = None
    response: Any = None
    output: Any = None
    decided: bool = False
    marks: tuple = ()

    def to_dict(self) -> dict:
        d = {"event": self.event, "pid": self.pid}
        if self.access is not None:
            d["access"] = self.access
            d["response"] = self.response
        if self.decided:
            d["output"] = self.output
        if self.marks:
            d["marks"] = [list(m) if isinstance(m, tuple) else m for m in self.marks]
        return d


class SystemState:
    def __init__(self, programs: Sequence[AlgorithmProgram], procs: list[ProcessState], memory: Memory,
                 model: str, outputs: frozenset = frozenset()):
        self.programs = tuple(programs)
        self.procs = procs
        self.memory = memory
        self.model = model
        self.outputs = outputs  # every value output so far, across runs
        self.crash_events = 0

    @property
    def n(self) -> int:
        return len(self.procs)

    @property
    def inputs(self) -> list:
        return [p.input for p in self.procs]

    def clone(self) -> SystemState:
        s = SystemState(self.programs, [p.copy() for p in self.procs], self.memory.copy(), self.model, self.outputs)
        s.crash_events = self.crash_events
        return s

    def key(self) -> tuple:
        return (self.memory.key(), tuple(p.key() for p in self.procs), self.outputs)

    def proc(self, pid: int) -> ProcessState:
        if not isinstance(pid, int) or not 1 <= pid <= self.n:
            raise InvalidEventError(f"no process p{pid}")
        return self.procs[pid - 1]

    def total_steps(self) -> int:
        return sum(p.steps for p in self.procs)

    def step_bound(self, pid: int) -> int | None:
        f = self.programs[pid - 1].step_bound
        return None if f is None else f(self.crash_events)

    # -- event application ---------------------------------------------------

    def apply(self, e: Event) -> Observation:
        kind = e.kind
        if kind == "step":
            return self._step(self.proc(e.pid))
        if kind == "crash":
            if self.model != INDEPENDENT:
                raise InvalidEventError("crash of a single process is only allowed in the independent model")
            p = self.proc(e.pid)
            if p.status == CRASHED:
                raise InvalidEventError(f"p{e.pid} is already crashed")
            self._crash(p)
            self.crash_events += 1
            return Observation(str(e), e.pid)
        if kind == "crashall":
            if self.model != SIMULTANEOUS:
                raise InvalidEventError("crashall is only allowed in the simultaneous model")
            for p in self.procs:
                if p.status != CRASHED:
                    self._crash(p)
            self.crash_events += 1
            return Observation(str(e), None)
        if kind == "recover":
            p = self.proc(e.pid)
            if p.status != CRASHED:
                raise InvalidEventError(f"p{e.pid} is not crashed")
            p.status = RUNNING
            p.recovering = self.programs[p.pid - 1].recover is not None
            p.runs += 1
            return Observation(str(e), e.pid)
        raise InvalidEventError(f"unknown event {e!r}")

    @staticmethod
    def _crash(p: ProcessState) -> None:
        p.status = CRASHED
        p.history = ()
        p.recovering = False
        p.output = None
        p.crashes += 1
        p._gen = p._pending = p._ctx = None

    def _start(self, p: ProcessState):
        """(Re)build the generator of ``p``'s current run; returns an output on immediate return."""
        prog = self.programs[p.pid - 1]
        routine = prog.recover if p.recovering else prog.main
        ctx = Context(p.pid, self.n, p.input, live=not p.history)
        gen = routine(ctx)
        try:
            acc = next(gen)
            for resp in p.history:
                acc = gen.send(resp)
        except StopIteration as stop:
            if p.history:
                raise ProtocolError(f"replay of p{p.pid} diverged: program is not deterministic") from None
            return True, stop.value, ctx
        ctx.live = True
        p._gen, p._pending, p._ctx = gen, acc, ctx
        return False, None, ctx

    def _step(self, p: ProcessState) -> Observation:
        if p.status != RUNNING:
            raise InvalidEventError(f"p{p.pid} cannot step while {p.status}")
        if p._gen is None:
            done, value, ctx = self._start(p)
            if done:
                # a routine with no shared access decides on its first step
                p.steps += 1
                return self._decide(p, value, Observation(f"step {p.pid}", p.pid, marks=tuple(ctx.marks)))
        acc: Access = p._pending
        if not isinstance(acc, Access):
            raise ProtocolError(f"p{p.pid} yielded {acc!r}, not a shared access")
        resp = self.memory.execute(p.pid, acc)
        p.history += (resp,)
        p.steps += 1
        obs = Observation(f"step {p.pid}", p.pid, acc.describe(), resp)
        ctx = p._ctx
        try:
            p._pending = p._gen.send(resp)
        except StopIteration as stop:
            obs.marks = tuple(ctx.marks)
            return self._decide(p, stop.value, obs)
        obs.marks = tuple(ctx.marks)
        ctx.marks.clear()
        return obs

    def _decide(self, p: ProcessState, value, obs: Observation) -> Observation:
        p.status = DECIDED
        p.output = value
        p.history = ()
        p._gen = p._pending = p._ctx = None
        self.outputs = self.outputs | {value}
        obs.output = value
        obs.decided = True
        return obs


def init_system(programs: Sequence[AlgorithmProgram], inputs: Sequence, layout: MemoryLayout,
                model: str = INDEPENDENT) -> SystemState:
    if len(programs) != len(inputs):
        raise ConfigurationError(f"{len(programs)} programs but {len(inputs)} inputs")
    if not programs:
        raise ConfigurationError("at least one process is required")
    if model not in MODELS:
        raise ConfigurationError(f"unknown crash model {model!r}")
    memory = layout.build()
    for pid, prog in enumerate(programs, 1):
        if prog.model is not None and prog.model != model:
            raise ConfigurationError(f"{prog.name} requires the {prog.model} crash model, not {model}")
        for use in prog.uses:
            if not layout.declares(use):
                raise ConfigurationError(f"{prog.name} (p{pid}) uses {use!r}, which the layout does not declare")
    procs = [ProcessState(pid, v) for pid, v in enumerate(inputs, 1)]
    return SystemState(programs, procs, memory, model)


def apply_event(s: SystemState, e: Event) -> SystemState:
    nxt = s.clone()
    nxt.apply(e)
    return nxt


# -- traces -----------------------------------------------------------------


@dataclass
class ExecutionTrace:
    n: int
    inputs: list
    model: str
    events: list = field(default_factory=list)
    observations: list = field(default_factory=list)
    outputs: dict = field(default_factory=dict)  # pid -> [value per completed run]
    run_boundaries: dict = field(default_factory=dict)  # pid -> [event index where a run began]
    step_bounds: dict = field(default_factory=dict)  # pid -> [bound per run]
    run_steps: dict = field(default_factory=dict)  # pid -> [accesses per run]
    run_outputs: dict = field(default_factory=dict)  # pid -> [output or None per run]
    error: str | None = None
    error_index: int | None = None
    final_memory: dict = field(default_factory=dict)

    def all_outputs(self) -> list:
        return [(pid, v) for pid in sorted(self.outputs) for v in self.outputs[pid]]

    def marks(self) -> list:
        return [m for o in self.observations for m in o.marks]

    def to_dict(self) -> dict:
        def jsonable(v):
            if isinstance(v, (tuple, list, frozenset, set)):
                return [jsonable(x) for x in v]
            return v

        return {
            "n": self.n,
            "model": self.model,
            "inputs": jsonable(self.inputs),
            "events": [str(e) for e in self.events],
            "observations": [jsonable_obs(o.to_dict()) for o in self.observations],
            "outputs": {str(k): jsonable(v) for k, v in self.outputs.items()},
            "run_boundaries": {str(k): v for k, v in self.run_boundaries.items()},
            "error": self.error,
            "error_index": self.error_index,
        }


def jsonable_obs(d: dict) -> dict:
    def fix(v):
        if isinstance(v, dict):
            return {k: fix(x) for k, x in v.items()}
        if isinstance(v, (tuple, list, frozenset, set)):
            return [fix(x) for x in v]
        return v

    return fix(d)


class TraceRecorder:
    """Applies events to a system while building its ExecutionTrace."""

    def __init__(self, s: SystemState):
        self.s = s
        self.trace = ExecutionTrace(s.n, s.inputs, s.model)
        t = self.trace
        for p in s.procs:
            t.outputs[p.pid] = []
            t.run_boundaries[p.pid] = [0]
            t.step_bounds[p.pid] = [s.step_bound(p.pid)]
            t.run_steps[p.pid] = [0]
            t.run_outputs[p.pid] = [None]

    def apply(self, e: Event) -> Observation:
        s, t = self.s, self.trace
        idx = len(t.events)
        try:
            obs = s.apply(e)
        finally:
            t.events.append(e)
        t.observations.append(obs)
        if e.kind == "step":
            if obs.access is not None:
                t.run_steps[e.pid][-1] += 1
            if obs.decided:
                t.outputs[e.pid].append(obs.output)
                t.run_outputs[e.pid][-1] = obs.output
        elif e.kind == "recover":
            t.run_boundaries[e.pid].append(idx + 1)
            t.step_bounds[e.pid].append(s.step_bound(e.pid))
            t.run_steps[e.pid].append(0)
            t.run_outputs[e.pid].append(None)
        return obs


def run_schedule(s: SystemState, sched: Iterable[Event], stop_on_error: bool = False) -> ExecutionTrace:
    """Replay ``sched`` from a copy of ``s``.

    Invalid events raise InvalidEventError carrying the event index.  Algorithm
    failures (invariant or protocol errors) are raised too unless
    ``stop_on_error`` is set, in which case they end the trace and are recorded.
    """
    rec = TraceRecorder(s.clone())
    for idx, e in enumerate(sched):
        try:
            rec.apply(e)
        except InvalidEventError as err:
            raise InvalidEventError(f"{e}: {err}", index=idx) from None
        except RconsError as err:
            if not stop_on_error:
                raise
            rec.trace.error = f"{type(err).__name__}: {err}"
            rec.trace.error_index = idx
            break
    rec.trace.final_memory = rec.s.memory.snapshot()
    rec.trace._system = rec.s  # final state, for post-checks
    return rec.trace
