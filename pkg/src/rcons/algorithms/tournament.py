"""Consensus for k <= n processes from an n-process two-team algorithm.

The processes are split into two non-empty sides no larger than the witness
teams; each side first agrees internally (recursively) and the side's result
becomes its input to the team algorithm at the parent node.  A process's
input at a leaf is its own value.  Every internal node has its own copy of
the team algorithm's cells, named ``prefix + (node label,) + cell``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import partial

from ..errors import ConfigurationError
from ..runtime.memory import MemoryLayout, Read, Write
from ..runtime.system import AlgorithmProgram, Context


@dataclass(frozen=True)
class TournamentNode:
    members: tuple  # pids, ascending
    label: str
    a: TournamentNode | None = None
    b: TournamentNode | None = None

    @property
    def leaf(self) -> bool:
        return self.a is None

    def internal(self):
        if not self.leaf:
            yield self
            yield from self.a.internal()
            yield from self.b.internal()

    def depth(self) -> int:
        return 0 if self.leaf else 1 + max(self.a.depth(), self.b.depth())


def split_size(k: int, cap_a: int, cap_b: int) -> int:
    """Size of side A: as close to k/2 as the capacities allow, rounding down."""
    lo, hi = max(1, k - cap_b), min(cap_a, k - 1)
    if lo > hi:
        raise ConfigurationError(f"cannot split {k} processes into teams of at most {cap_a} and {cap_b}")
    return min(max(k // 2, lo), hi)


def build_tree(pids, cap_a: int, cap_b: int, label: str = "t") -> TournamentNode:
    pids = tuple(sorted(pids))
    if not pids:
        raise ConfigurationError("a tournament needs at least one process")
    if len(pids) > cap_a + cap_b:
        raise ConfigurationError(f"{len(pids)} processes exceed the team capacities {cap_a}+{cap_b}")
    if len(pids) == 1:
        return TournamentNode(pids, label)
    a = split_size(len(pids), cap_a, cap_b)
    return TournamentNode(pids, label, build_tree(pids[:a], cap_a, cap_b, label + "a"),
                          build_tree(pids[a:], cap_a, cap_b, label + "b"))


def validate_tree(node: TournamentNode, cap_a: int, cap_b: int) -> None:
    for nd in node.internal():
        if not nd.a.members or not nd.b.members:
            raise ConfigurationError(f"node {nd.label} has an empty side")
        if len(nd.a.members) > cap_a or len(nd.b.members) > cap_b:
            raise ConfigurationError(f"node {nd.label} exceeds the team capacities {cap_a}/{cap_b}")
        if set(nd.a.members) | set(nd.b.members) != set(nd.members) or set(nd.a.members) & set(nd.b.members):
            raise ConfigurationError(f"node {nd.label} does not partition its members")


@dataclass(frozen=True)
class Tournament:
    """A tree together with the team algorithm run at every internal node.

    ``cfg`` is a TeamConsensusConfig (recoverable) or DiscerningConfig (crash free).
    """

    cfg: object
    root: TournamentNode

    @classmethod
    def for_processes(cls, cfg, pids) -> Tournament:
        w = cfg.witness
        root = build_tree(pids, w.size("A"), w.size("B"))
        validate_tree(root, w.size("A"), w.size("B"))
        return cls(cfg, root)

    def chain(self, pid: int) -> list[tuple[TournamentNode, int]]:
        """(node, witness slot of ``pid`` there), from the lowest internal node up to the root."""
        out = []
        node = self.root
        if node.leaf:
            return out
        slots_a, slots_b = self.cfg.witness.members("A"), self.cfg.witness.members("B")
        while not node.leaf:
            if pid in node.a.members:
                out.append((node, slots_a[node.a.members.index(pid)]))
                node = node.a
            elif pid in node.b.members:
                out.append((node, slots_b[node.b.members.index(pid)]))
                node = node.b
            else:
                raise ConfigurationError(f"p{pid} is not in the tournament")
        return out[::-1]

    def step_bound(self, pid: int) -> int:
        return sum(self.cfg.step_bound(slot) for _, slot in self.chain(pid))

    def layout(self, prefix: tuple = ()) -> MemoryLayout:
        out = MemoryLayout()
        for nd in self.root.internal():
            out = out.merged(self.cfg.layout(prefix + (nd.label,)))
        return out

    def decide(self, ctx: Context, pid: int, v, prefix: tuple = ()):
        for node, slot in self.chain(pid):
            v = yield from self.cfg.run(ctx, slot, v, prefix + (node.label,))
        return v


def persistent_proposal(cid: tuple, value):
    """Return the value first proposed through register ``cid``, writing ``value`` if it is still ⊥."""
    stored = yield Read(cid)
    if stored is None:
        yield Write(cid, value)
        return value
    return stored


def _tournament_main(ctx: Context, tour: Tournament):
    return (yield from tour.decide(ctx, ctx.pid, ctx.input))


@dataclass(frozen=True)
class _Bound:
    k: int

    def __call__(self, crashes: int) -> int:
        return self.k


def tournament_decide(tour: Tournament) -> list[AlgorithmProgram]:
    pids = tour.root.members
    if pids != tuple(range(1, len(pids) + 1)):
        raise ConfigurationError("a standalone tournament must cover processes 1..k")
    return [AlgorithmProgram("tournament", partial(_tournament_main, tour=tour), step_bound=_Bound(tour.step_bound(p)))
            for p in pids]
