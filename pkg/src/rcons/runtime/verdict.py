"""Consensus verdicts over execution traces."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Iterable

from .system import ExecutionTrace

MAX_COUNTEREXAMPLES = 5


def _jsonable(v):
    if isinstance(v, (tuple, list, frozenset, set)):
        return [_jsonable(x) for x in v]
    return v


@dataclass
class Verdict:
    """Pass/fail per property; ``executions_checked`` counts schedules.

    Termination is judged against each algorithm's static step bound, so a
    pass means "within step bound" only.
    """

    agreement: bool = True
    agreement_witness: tuple | None = None  # two conflicting outputs
    validity: bool = True
    validity_witness: Any = None  # offending output
    termination: bool = True
    starving_pid: int | None = None
    invariants: bool = True
    invariant_error: str | None = None
    executions_checked: int = 0
    counterexamples: list = field(default_factory=list)  # [{"property", "detail", "schedule"}]

    @property
    def passed(self) -> bool:
        return self.agreement and self.validity and self.termination and self.invariants

    @property
    def counterexample(self) -> list | None:
        return self.counterexamples[0]["schedule"] if self.counterexamples else None

    def fail(self, prop: str, detail: str, schedule, **witness) -> None:
        if prop == "agreement":
            if self.agreement:
                self.agreement_witness = witness["outputs"]
            self.agreement = False
        elif prop == "validity":
            if self.validity:
                self.validity_witness = witness["output"]
            self.validity = False
        elif prop == "termination":
            if self.termination:
                self.starving_pid = witness["pid"]
            self.termination = False
        elif prop == "invariants":
            if self.invariants:
                self.invariant_error = detail
            self.invariants = False
        else:
            raise ValueError(prop)
        if len(self.counterexamples) < MAX_COUNTEREXAMPLES:
            self.counterexamples.append({"property": prop, "detail": detail,
                                         "schedule": [str(e) for e in schedule]})

    def merge(self, other: Verdict) -> Verdict:
        """Combine two verdicts: any failure wins, counts add, counterexamples concatenate."""
        out = Verdict(executions_checked=self.executions_checked + other.executions_checked)
        for v in (self, other):
            if not v.agreement and out.agreement:
                out.agreement, out.agreement_witness = False, v.agreement_witness
            if not v.validity and out.validity:
                out.validity, out.validity_witness = False, v.validity_witness
            if not v.termination and out.termination:
                out.termination, out.starving_pid = False, v.starving_pid
            if not v.invariants and out.invariants:
                out.invariants, out.invariant_error = False, v.invariant_error
        out.counterexamples = (self.counterexamples + other.counterexamples)[:MAX_COUNTEREXAMPLES]
        return out

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "agreement": {"pass": self.agreement, "witness": _jsonable(self.agreement_witness)},
            "validity": {"pass": self.validity, "witness": _jsonable(self.validity_witness)},
            "termination": {"pass": self.termination, "starving_pid": self.starving_pid,
                            "label": "within step bound"},
            "invariants": {"pass": self.invariants, "error": self.invariant_error},
            "executions_checked": self.executions_checked,
            "counterexamples": self.counterexamples,
        }

    @classmethod
    def from_dict(cls, d: dict) -> Verdict:
        def tup(x):
            return tuple(x) if isinstance(x, list) else x

        return cls(
            agreement=d["agreement"]["pass"], agreement_witness=tup(d["agreement"]["witness"]),
            validity=d["validity"]["pass"], validity_witness=d["validity"]["witness"],
            termination=d["termination"]["pass"], starving_pid=d["termination"]["starving_pid"],
            invariants=d["invariants"]["pass"], invariant_error=d["invariants"]["error"],
            executions_checked=d["executions_checked"], counterexamples=list(d["counterexamples"]),
        )


def check_trace(trace: ExecutionTrace, inputs, verdict: Verdict) -> None:
    """Add one trace's findings to ``verdict``."""
    inputs = list(inputs)
    verdict.executions_checked += 1
    outs = trace.all_outputs()
    first = None
    for pid, v in outs:
        if v not in inputs and verdict.validity:
            verdict.fail("validity", f"p{pid} output {v!r}, not an input", trace.events, output=v)
        if first is None:
            first = v
        elif v != first and verdict.agreement:
            verdict.fail("agreement", f"outputs {first!r} and {v!r}", trace.events, outputs=(first, v))
    for pid in sorted(trace.run_steps):
        for run, (steps, bound, out) in enumerate(zip(trace.run_steps[pid], trace.step_bounds[pid],
                                                      trace.run_outputs[pid])):
            if bound is not None and out is None and steps >= bound and verdict.termination:
                verdict.fail("termination", f"p{pid} run {run + 1} took {steps} accesses without output "
                             f"(bound {bound})", trace.events, pid=pid)
    if trace.error is not None and verdict.invariants:
        verdict.fail("invariants", trace.error, trace.events[:trace.error_index + 1])


def check_consensus(traces: Iterable[ExecutionTrace], inputs) -> Verdict:
    verdict = Verdict()
    for trace in traces:
        check_trace(trace, inputs, verdict)
    return verdict
