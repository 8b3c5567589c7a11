"""Recoverable team consensus from an n-recording witness.

The code below assumes q0 is not in Q_B; a witness with q0 in Q_B has its
team names swapped first.  Shared cells: the object ``O`` (initially q0) and
the team registers ``R_A`` / ``R_B`` (initially ⊥).  Process ``slot`` of the
witness plays its team's part with the witness's operation.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import partial

from ..errors import ConfigurationError
from ..hierarchy import TeamAssignment, check_recording, compute_Q
from ..runtime.memory import MemoryLayout, ObjectCell, Read, Register, Update, Write
from ..runtime.system import AlgorithmProgram, Context

# decide sites, in code orientation
SITES_A = ("A-read-A", "A-read-B")
SITES_B = ("B-read-A-1", "B-read-A-2", "B-read-B")


@dataclass(frozen=True)
class TeamConsensusConfig:
    object_type: object
    witness: TeamAssignment  # already in code orientation (q0 not in Q_B)
    q_a: frozenset
    swapped: bool = False
    defer: bool = True  # False drops the |B| = 1 branch (a deliberately broken variant)

    @classmethod
    def from_witness(cls, t, a: TeamAssignment, defer: bool = True) -> TeamConsensusConfig:
        diag = check_recording(t, a)
        if not diag.passed:
            bad = [c["condition"] for c in diag.conditions if not c["pass"]]
            raise ConfigurationError(f"assignment is not {a.n}-recording for {t.name} (fails condition {', '.join(bad)})")
        swapped = a.q0 in compute_Q(t, a, "B")
        if swapped:
            a = a.swapped()
        return cls(t, a, compute_Q(t, a, "A"), swapped, defer)

    @property
    def n(self) -> int:
        return self.witness.n

    @property
    def q0(self):
        return self.witness.q0

    @property
    def b_singleton(self) -> bool:
        return self.witness.size("B") == 1

    def team(self, slot: int) -> str:
        return self.witness.team_of[slot - 1]

    def paper_team(self, slot: int) -> str:
        """Team of ``slot`` in the witness as given (before any swap)."""
        t = self.team(slot)
        return ("B" if t == "A" else "A") if self.swapped else t

    def step_bound(self, slot: int) -> int:
        # B's extra access is the R_A read of the |B| = 1 branch
        return 6 if self.team(slot) == "B" and self.b_singleton and self.defer else 5

    def layout(self, prefix: tuple = ()) -> MemoryLayout:
        return (MemoryLayout()
                .add(prefix + ("O",), ObjectCell(self.object_type, self.q0))
                .add(prefix + ("R_A",), Register())
                .add(prefix + ("R_B",), Register()))

    def run(self, ctx: Context, slot: int, v, prefix: tuple = ()):
        return team_consensus(ctx, self, slot, v, prefix)

    def to_dict(self) -> dict:
        return {"type": self.object_type.name, "witness": self.witness.to_dict(), "swapped": self.swapped,
                "Q_A": sorted(self.q_a), "defer": self.defer}


def team_consensus(ctx: Context, cfg: TeamConsensusConfig, slot: int, v, prefix: tuple = ()):
    """One run of team consensus for witness process ``slot`` with input ``v``; returns the decision."""
    o, ra, rb = prefix + ("O",), prefix + ("R_A",), prefix + ("R_B",)
    op = cfg.witness.op_of[slot - 1]
    if cfg.team(slot) == "A":
        yield Write(ra, v)
        q = yield Read(o)
        if q == cfg.q0:
            yield Update(o, op)
            q = yield Read(o)
        if q in cfg.q_a:
            out = yield Read(ra)
            ctx.mark("A-read-A")
        else:
            out = yield Read(rb)
            ctx.mark("A-read-B")
        return out
    yield Write(rb, v)
    q = yield Read(o)
    if q == cfg.q0:
        if cfg.defer and cfg.b_singleton:
            other = yield Read(ra)
            if other is not None:
                ctx.mark("B-read-A-1")
                return other
        yield Update(o, op)
        q = yield Read(o)
    if q in cfg.q_a:
        out = yield Read(ra)
        ctx.mark("B-read-A-2")
    else:
        out = yield Read(rb)
        ctx.mark("B-read-B")
    return out


def _team_main(ctx: Context, cfg: TeamConsensusConfig):
    return (yield from team_consensus(ctx, cfg, ctx.pid, ctx.input))


@dataclass(frozen=True)
class _Bound:
    k: int

    def __call__(self, crashes: int) -> int:
        return self.k


def team_decide(cfg: TeamConsensusConfig) -> list[AlgorithmProgram]:
    """Programs for processes ``1..n``; process i plays witness slot i."""
    name = "team" if cfg.defer else "team-nodefer"
    uses = frozenset({("O",), ("R_A",), ("R_B",)})
    return [AlgorithmProgram(name, partial(_team_main, cfg=cfg), step_bound=_Bound(cfg.step_bound(i)), uses=uses)
            for i in range(1, cfg.n + 1)]


def team_inputs(cfg: TeamConsensusConfig, value_a, value_b) -> list:
    """Per-process inputs giving the witness's (un-swapped) team A ``value_a`` and team B ``value_b``."""
    return [value_a if cfg.paper_team(i) == "A" else value_b for i in range(1, cfg.n + 1)]


def check_team_inputs(cfg: TeamConsensusConfig, inputs) -> None:
    for team in ("A", "B"):
        vals = {inputs[i - 1] for i in cfg.witness.members(team)}
        if len(vals) > 1:
            raise ConfigurationError(f"teammates must share an input; team {team} has {sorted(vals, key=repr)}")


# -- crash-free team consensus from an n-discerning witness ------------------


@dataclass(frozen=True)
class DiscerningConfig:
    """Team consensus without crashes: the (response, state) pair a process sees names the first team."""

    object_type: object
    witness: TeamAssignment
    r_a: tuple  # per slot, the pairs that mean "team A went first"

    @classmethod
    def from_witness(cls, t, a: TeamAssignment) -> DiscerningConfig:
        from ..hierarchy import check_discerning, compute_R

        diag = check_discerning(t, a)
        if not diag.passed:
            bad = [c["condition"] for c in diag.conditions if not c["pass"]]
            raise ConfigurationError(f"assignment is not {a.n}-discerning for {t.name} (fails {', '.join(bad)})")
        return cls(t, a, tuple(compute_R(t, a, j)[0] for j in range(1, a.n + 1)))

    @property
    def n(self) -> int:
        return self.witness.n

    @property
    def q0(self):
        return self.witness.q0

    def team(self, slot: int) -> str:
        return self.witness.team_of[slot - 1]

    def step_bound(self, slot: int) -> int:
        return 4

    layout = TeamConsensusConfig.layout

    def run(self, ctx: Context, slot: int, v, prefix: tuple = ()):
        return discerning_consensus(ctx, self, slot, v, prefix)


def discerning_consensus(ctx: Context, cfg: DiscerningConfig, slot: int, v, prefix: tuple = ()):
    o = prefix + ("O",)
    mine = prefix + ("R_A",) if cfg.team(slot) == "A" else prefix + ("R_B",)
    yield Write(mine, v)
    resp = yield Update(o, cfg.witness.op_of[slot - 1])
    q = yield Read(o)
    if (resp, q) in cfg.r_a[slot - 1]:
        return (yield Read(prefix + ("R_A",)))
    return (yield Read(prefix + ("R_B",)))
