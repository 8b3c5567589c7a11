"""Non-volatile shared memory: cells, accesses and layouts.

Cell ids are tuples; fixed cells are declared individually, grow-on-demand
families are keyed by the first element of the id.  Every cell value is an
immutable dataclass so a memory snapshot can be hashed for state-space search.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Any, Hashable, Mapping

from ..errors import ConfigurationError, InvariantViolation, ProtocolError
from ..types import READ, ObjectType, apply_op

CellId = tuple


@dataclass(frozen=True)
class Register:
    value: Any = None  # None is ⊥


@dataclass(frozen=True)
class MonotoneRegister:
    """A register whose writes may never decrease its value."""

    value: Any = 0


@dataclass(frozen=True)
class ObjectCell:
    type: ObjectType = field(compare=False, repr=False)
    state: str = ""


@dataclass(frozen=True)
class ConsensusCell:
    """One-shot atomic consensus: first proposal wins, each process proposes at most once."""

    capacity: int = field(default=0, compare=False)
    value: Any = None
    users: frozenset = frozenset()


@dataclass(frozen=True)
class RCCell:
    """Atomic recoverable consensus: first proposal wins, repeat proposals allowed."""

    value: Any = None


@dataclass(frozen=True)
class GhostSet:
    """Bookkeeping invisible to programs; records which processes touched a tagged access."""

    pids: frozenset = frozenset()


# -- accesses ---------------------------------------------------------------


@dataclass(frozen=True)
class Access:
    cell: CellId
    tag: Hashable = field(default=None, kw_only=True)

    kind = "access"

    def describe(self) -> dict:
        return {"access": self.kind, "cell": list(self.cell)}


@dataclass(frozen=True)
class Read(Access):
    kind = "read"


@dataclass(frozen=True)
class Write(Access):
    value: Any = None
    kind = "write"

    def describe(self) -> dict:
        return {**super().describe(), "value": self.value}


@dataclass(frozen=True)
class Update(Access):
    op: str = ""
    kind = "update"

    def describe(self) -> dict:
        return {**super().describe(), "op": self.op}


@dataclass(frozen=True)
class Propose(Access):
    value: Any = None
    kind = "propose"

    def describe(self) -> dict:
        return {**super().describe(), "value": self.value}


# -- family factories (picklable) -------------------------------------------


@dataclass(frozen=True)
class Const:
    cell: Any

    def __call__(self, cid: CellId):
        return self.cell


@dataclass(frozen=True)
class ByLast:
    """Pick the initial cell by the last element of the id."""

    by_last: tuple  # ((name, cell), ...)
    default: Any = Register()

    def __call__(self, cid: CellId):
        for name, cell in self.by_last:
            if cid[-1] == name:
                return cell
        return self.default


@dataclass
class MemoryLayout:
    # fixed cells may sit inside a family; they override its default
    cells: list = field(default_factory=list)  # [(cid, cell), ...]
    families: dict = field(default_factory=dict)  # name -> factory(cid) -> cell

    def add(self, cid: CellId, cell) -> MemoryLayout:
        self.cells.append((tuple(cid), cell))
        return self

    def family(self, name: str, factory) -> MemoryLayout:
        if name in self.families:
            raise ConfigurationError(f"duplicate cell family {name!r}")
        self.families[name] = factory
        return self

    def merged(self, other: MemoryLayout) -> MemoryLayout:
        out = MemoryLayout(list(self.cells), dict(self.families))
        for cid, cell in other.cells:
            out.add(cid, cell)
        for name, fac in other.families.items():
            out.family(name, fac)
        return out

    def build(self) -> Memory:
        cells = {}
        for cid, cell in self.cells:
            if cid in cells:
                raise ConfigurationError(f"duplicate cell id {cid!r} in layout")
            cells[cid] = cell
        return Memory(cells, dict(self.families), frozenset(cells))

    def declares(self, name: CellId | str) -> bool:
        if isinstance(name, str):
            return name in self.families or any(cid and cid[0] == name for cid, _ in self.cells)
        return any(cid == tuple(name) for cid, _ in self.cells) or (bool(name) and name[0] in self.families)


class Memory:
    def __init__(self, cells: dict, families: Mapping, fixed: frozenset):
        self._cells = cells
        self._families = families
        self._fixed = fixed

    def copy(self) -> Memory:
        return Memory(dict(self._cells), self._families, self._fixed)

    def key(self) -> frozenset:
        return frozenset(self._cells.items())

    def cell(self, cid: CellId):
        try:
            return self._cells[cid]
        except KeyError:
            pass
        if cid and cid[0] in self._families:
            return self._families[cid[0]](cid)
        if cid and cid[0] == "__ghost__":
            return GhostSet()
        raise ProtocolError(f"access to undeclared cell {cid!r}")

    def _store(self, cid: CellId, cell) -> None:
        if cid not in self._fixed and cid[0] in self._families and self._families[cid[0]](cid) == cell:
            self._cells.pop(cid, None)  # keep snapshots canonical
        else:
            self._cells[cid] = cell

    def value_of(self, cid: CellId):
        cell = self.cell(tuple(cid))
        if isinstance(cell, ObjectCell):
            return cell.state
        if isinstance(cell, GhostSet):
            return cell.pids
        return cell.value

    def execute(self, pid: int, acc: Access):
        """Perform one atomic access by process ``pid`` and return its response."""
        cid = acc.cell
        if acc.tag is not None:
            gid = ("__ghost__", acc.tag)
            ghost = self._cells.get(gid, GhostSet())
            if pid in ghost.pids:
                raise InvariantViolation(f"p{pid} entered {acc.tag!r} a second time")
            self._cells[gid] = GhostSet(ghost.pids | {pid})
        cell = self.cell(cid)
        if isinstance(acc, Read):
            if isinstance(cell, (Register, MonotoneRegister, RCCell)):
                return cell.value
            if isinstance(cell, ObjectCell):
                return apply_op(cell.type, cell.state, READ)[1]
            raise ProtocolError(f"cell {cid!r} cannot be read")
        if isinstance(acc, Write):
            if isinstance(cell, Register):
                self._store(cid, Register(acc.value))
                return None
            if isinstance(cell, MonotoneRegister):
                if acc.value < cell.value:
                    raise InvariantViolation(f"p{pid} decreased {cid!r} from {cell.value} to {acc.value}")
                self._store(cid, MonotoneRegister(acc.value))
                return None
            raise ProtocolError(f"cell {cid!r} is not a register")
        if isinstance(acc, Update):
            if not isinstance(cell, ObjectCell):
                raise ProtocolError(f"cell {cid!r} is not a typed object")
            state, resp = apply_op(cell.type, cell.state, acc.op)
            self._store(cid, replace(cell, state=state))
            return resp
        if isinstance(acc, Propose):
            if isinstance(cell, ConsensusCell):
                if pid in cell.users:
                    raise InvariantViolation(f"p{pid} invoked one-shot consensus {cid!r} twice")
                if cell.capacity and len(cell.users) >= cell.capacity:
                    raise ProtocolError(f"consensus {cid!r} used by more than {cell.capacity} processes")
                value = acc.value if cell.value is None else cell.value
                self._store(cid, replace(cell, value=value, users=cell.users | {pid}))
                return value
            if isinstance(cell, RCCell):
                value = acc.value if cell.value is None else cell.value
                self._store(cid, RCCell(value))
                return value
            raise ProtocolError(f"cell {cid!r} is not a consensus object")
        raise ProtocolError(f"unknown access {acc!r}")

    def snapshot(self) -> dict:
        """Stored (non-default) cells as ``{cid: value}``; ghost cells omitted."""
        out = {}
        for cid, cell in self._cells.items():
            if cid[0] == "__ghost__":
                continue
            out[cid] = cell.state if isinstance(cell, ObjectCell) else cell.value
        return out
