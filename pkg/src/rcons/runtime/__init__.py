"""Crash-recovery execution model: shared memory, processes, schedules and checks."""

from .explore import ExplorationResult, model_check
from .memory import (ByLast, ConsensusCell, Const, Memory, MemoryLayout, MonotoneRegister, ObjectCell, Propose,
                     RCCell, Read, Register, Update, Write)
from .schedules import (RandomBounds, Schedule, ScheduleBounds, enabled_moves, enumerate_schedules, format_schedule,
                        parse_schedule, random_run, random_schedule)
from .system import (CRASHED, DECIDED, INDEPENDENT, MODELS, RUNNING, SIMULTANEOUS, AlgorithmProgram, Context, Crash,
                     CrashAll, Event, ExecutionTrace, ProcessState, Recover, Step, SystemState, TraceRecorder,
                     apply_event, init_system, run_schedule)
from .verdict import Verdict, check_consensus, check_trace

__all__ = [name for name in dir() if not name.startswith("_")]
