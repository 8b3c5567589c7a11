"""Consensus algorithms for the crash-recovery runtime, addressable by name.

``team`` (and its broken fixture ``team-nodefer``), ``tournament``, ``simul``
and ``universal:<object>``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

from ..errors import ConfigurationError
from ..hierarchy import TeamAssignment, search_discerning, search_recording
from ..runtime.memory import MemoryLayout
from ..runtime.system import INDEPENDENT, SIMULTANEOUS, AlgorithmProgram, init_system
from ..types import ObjectType, builtin
from .simul import SimulRCLayout, simul_decide, simul_monitor, simul_postcheck
from .team import DiscerningConfig, TeamConsensusConfig, check_team_inputs, team_consensus, team_decide, team_inputs
from .tournament import Tournament, build_tree, tournament_decide
from .universal import (NO_PENDING, UniversalLayout, check_universal, demo_workloads, universal_passed,
                        universal_programs)

ALGORITHMS = ("team", "team-nodefer", "tournament", "simul")
UNIVERSAL_OBJECTS = ("counter", "queue")


@dataclass
class BuiltAlgorithm:
    name: str
    programs: list[AlgorithmProgram]
    layout: MemoryLayout
    model: str  # crash model the algorithm is meant for
    inputs: list
    monitor: Callable | None = None
    postcheck: Callable | None = None
    config: dict = field(default_factory=dict)

    def system(self, model: str | None = None):
        return init_system(self.programs, self.inputs, self.layout, model or self.model)


def _recording_witness(t: ObjectType, n: int, assignment: TeamAssignment | None) -> TeamAssignment:
    if assignment is not None:
        return assignment
    rep = search_recording(t, n)
    if rep.witness is None:
        raise ConfigurationError(f"{t.name} has no {n}-recording witness, so it cannot run team consensus for {n}")
    return rep.witness


def _expand_inputs(inputs, n: int, two_team: Callable | None = None) -> list:
    inputs = list(inputs) if inputs is not None else [0, 1]
    if len(inputs) == n:
        return inputs
    if len(inputs) == 2 and two_team is not None:
        return two_team(*inputs)
    if len(inputs) == 2 and n > 2:
        return [inputs[0]] + [inputs[1]] * (n - 1)
    raise ConfigurationError(f"expected {n} inputs{' (or 2, one per team)' if two_team else ''}, got {len(inputs)}")


def build_algorithm(name: str, n: int, t: ObjectType | None = None, inputs=None,
                    assignment: TeamAssignment | None = None, consensus: str = "atomic") -> BuiltAlgorithm:
    """Programs, layout and inputs for a named algorithm on n processes.

    Two inputs for a team algorithm mean "team A's value, team B's value" in
    the witness's own team naming.  ``t`` defaults to S_n.
    """
    if not isinstance(n, int) or n < 1:
        raise ConfigurationError("n must be a positive integer")
    if name in ("team", "team-nodefer"):
        if n < 2:
            raise ConfigurationError("team consensus needs n >= 2")
        t = t or builtin("Sn", n=n)
        w = _recording_witness(t, n, assignment)
        if w.n != n:
            raise ConfigurationError(f"assignment covers {w.n} processes, not {n}")
        cfg = TeamConsensusConfig.from_witness(t, w, defer=(name == "team"))
        ins = _expand_inputs(inputs, n, lambda a, b: team_inputs(cfg, a, b))
        check_team_inputs(cfg, ins)
        return BuiltAlgorithm(name, team_decide(cfg), cfg.layout(), INDEPENDENT, ins, config=cfg.to_dict())
    if name == "tournament":
        t = t or builtin("Sn", n=n)
        if n == 1:
            raise ConfigurationError("a tournament needs n >= 2")
        w = _recording_witness(t, n, assignment)
        if w.n < n:
            raise ConfigurationError(f"a {w.n}-process witness cannot host {n} processes")
        cfg = TeamConsensusConfig.from_witness(t, w)
        tour = Tournament.for_processes(cfg, range(1, n + 1))
        ins = _expand_inputs(inputs, n)
        return BuiltAlgorithm(name, tournament_decide(tour), tour.layout(), INDEPENDENT, ins,
                              config={**cfg.to_dict(), "tree": _tree_dict(tour.root)})
    if name == "simul":
        if consensus == "atomic":
            layout = SimulRCLayout(n)
            conf = {"consensus": "atomic"}
        elif consensus == "discerning":
            if n < 2:
                raise ConfigurationError("a discerning tournament needs n >= 2")
            t = t or builtin("Sn", n=n)
            rep = search_discerning(t, n) if assignment is None else None
            w = assignment if assignment is not None else rep.witness
            if w is None:
                raise ConfigurationError(f"{t.name} has no {n}-discerning witness")
            cfg = DiscerningConfig.from_witness(t, w)
            layout = SimulRCLayout(n, Tournament.for_processes(cfg, range(1, n + 1)))
            conf = {"consensus": "discerning", "type": t.name, "witness": w.to_dict()}
        else:
            raise ConfigurationError(f"unknown consensus instantiation {consensus!r}")
        ins = _expand_inputs(inputs, n)
        return BuiltAlgorithm(name, simul_decide(layout), layout.memory(), SIMULTANEOUS, ins,
                              monitor=simul_monitor, postcheck=simul_postcheck, config=conf)
    raise ConfigurationError(f"unknown algorithm {name!r}; expected one of {', '.join(ALGORITHMS)}")


def _tree_dict(node) -> dict:
    if node.leaf:
        return {"members": list(node.members)}
    return {"members": list(node.members), "a": _tree_dict(node.a), "b": _tree_dict(node.b)}


__all__ = [
    "ALGORITHMS", "UNIVERSAL_OBJECTS", "BuiltAlgorithm", "build_algorithm", "TeamConsensusConfig",
    "DiscerningConfig", "team_consensus", "team_decide", "team_inputs", "Tournament", "build_tree",
    "tournament_decide", "SimulRCLayout", "simul_decide", "simul_monitor", "simul_postcheck", "UniversalLayout",
    "universal_programs", "check_universal", "universal_passed", "demo_workloads", "NO_PENDING",
]
