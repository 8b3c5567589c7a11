"""n-recording / n-discerning decision procedures.

For a fixed assignment (initial state, two-team partition, one operation per
process) the Q and R sets are computed by the kernels in :mod:`rcons._kernels`
via subset-tracking reachability.  Searches enumerate assignments up to
within-team renaming of processes: a configuration is ``(q0, |A|, multiset of
team-A ops, multiset of team-B ops)`` and the canonical representative puts
team A on processes ``1..|A|``.
"""

from __future__ import annotations

import itertools
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

from . import _kernels
from .errors import InvalidArgument
from .types import ObjectType, StateId, run_sequence

RECORDING = "recording"
DISCERNING = "discerning"
PROPERTIES = (RECORDING, DISCERNING)

WITNESS_FOUND = "witness_found"
NO_WITNESS = "no_witness_within_search_space"


@dataclass(frozen=True)
class TeamAssignment:
    """A candidate witness.  ``team_of[i]`` / ``op_of[i]`` describe process ``i + 1``."""

    q0: StateId
    team_of: tuple[str, ...]
    op_of: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "team_of", tuple(self.team_of))
        object.__setattr__(self, "op_of", tuple(self.op_of))
        if len(self.team_of) != len(self.op_of):
            raise InvalidArgument("team_of and op_of must cover the same processes")
        if any(team not in ("A", "B") for team in self.team_of):
            raise InvalidArgument("teams must be 'A' or 'B'")
        if "A" not in self.team_of or "B" not in self.team_of:
            raise InvalidArgument("both teams must be non-empty (n >= 2)")

    @classmethod
    def from_teams(cls, q0: StateId, ops_a: Sequence[str], ops_b: Sequence[str]) -> TeamAssignment:
        """Team A is processes ``1..len(ops_a)``, team B the rest."""
        return cls(q0, ("A",) * len(ops_a) + ("B",) * len(ops_b), tuple(ops_a) + tuple(ops_b))

    @property
    def n(self) -> int:
        return len(self.team_of)

    def members(self, team: str) -> list[int]:
        return [i + 1 for i, x in enumerate(self.team_of) if x == team]

    def size(self, team: str) -> int:
        return self.team_of.count(team)

    def swapped(self) -> TeamAssignment:
        return TeamAssignment(self.q0, tuple("B" if x == "A" else "A" for x in self.team_of), self.op_of)

    def without(self, pid: int) -> TeamAssignment:
        keep = [i for i in range(self.n) if i != pid - 1]
        return TeamAssignment(self.q0, [self.team_of[i] for i in keep], [self.op_of[i] for i in keep])

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "q0": self.q0,
            "team_of": {str(i + 1): x for i, x in enumerate(self.team_of)},
            "op_of": {str(i + 1): o for i, o in enumerate(self.op_of)},
        }

    @classmethod
    def from_dict(cls, d: dict) -> TeamAssignment:
        try:
            n = int(d["n"])
            team_of = [d["team_of"][str(i)] for i in range(1, n + 1)]
            op_of = [d["op_of"][str(i)] for i in range(1, n + 1)]
            return cls(d["q0"], team_of, op_of)
        except (KeyError, TypeError, ValueError) as exc:
            raise InvalidArgument(f"malformed assignment document: {exc}") from None


def validate_assignment(t: ObjectType, a: TeamAssignment) -> None:
    if a.q0 not in t.state_index:
        raise InvalidArgument(f"q0 {a.q0!r} is not a state of {t.name}")
    for i, op in enumerate(a.op_of, start=1):
        if op not in t.op_index:
            raise InvalidArgument(f"operation {op!r} of p{i} is not an operation of {t.name}")


def _encode(t: ObjectType, a: TeamAssignment, team: str):
    ops = np.array([t.op_index[o] for o in a.op_of], dtype=np.int64)
    in_team = np.array([x == team for x in a.team_of], dtype=np.bool_)
    return ops, in_team


def compute_Q(t: ObjectType, a: TeamAssignment, team: str) -> frozenset[StateId]:
    """States reachable from q0 by distinct-process sequences whose first process is on ``team``."""
    validate_assignment(t, a)
    if team not in ("A", "B"):
        raise InvalidArgument("team must be 'A' or 'B'")
    nxt, _ = t.tables
    ops, in_team = _encode(t, a, team)
    hit = _kernels.reach_q(nxt, t.state_index[a.q0], ops, in_team)
    return frozenset(t.states[s] for s in np.flatnonzero(hit))


def compute_R(t: ObjectType, a: TeamAssignment, j: int) -> tuple[frozenset, frozenset]:
    """``(R_A_j, R_B_j)``: (response of op_j, final state) pairs over sequences containing ``j``."""
    validate_assignment(t, a)
    if not 1 <= j <= a.n:
        raise InvalidArgument(f"process index {j} outside 1..{a.n}")
    nxt, rsp = t.tables
    out = []
    for team in ("A", "B"):
        ops, in_team = _encode(t, a, team)
        hit = _kernels.reach_r(nxt, rsp, len(t.responses), t.state_index[a.q0], ops, in_team, j - 1)
        rs, ss = np.nonzero(hit)
        out.append(frozenset((t.responses[r], t.states[s]) for r, s in zip(rs, ss)))
    return out[0], out[1]


# -- naive enumeration (independent oracle) ---------------------------------


def distinct_sequences(n: int) -> Iterator[tuple[int, ...]]:
    """Every non-empty sequence of distinct 1-based process indices."""
    for length in range(1, n + 1):
        yield from itertools.permutations(range(1, n + 1), length)


def naive_Q(t: ObjectType, a: TeamAssignment, team: str) -> frozenset[StateId]:
    out = set()
    for seq in distinct_sequences(a.n):
        if a.team_of[seq[0] - 1] == team:
            out.add(run_sequence(t, a.q0, [a.op_of[i - 1] for i in seq]).final_state)
    return frozenset(out)


def naive_R(t: ObjectType, a: TeamAssignment, j: int) -> tuple[frozenset, frozenset]:
    sets = {"A": set(), "B": set()}
    for seq in distinct_sequences(a.n):
        if j not in seq:
            continue
        res = run_sequence(t, a.q0, [a.op_of[i - 1] for i in seq])
        sets[a.team_of[seq[0] - 1]].add((res.responses[seq.index(j)], res.final_state))
    return frozenset(sets["A"]), frozenset(sets["B"])


# -- single-assignment checks -----------------------------------------------


@dataclass
class Diagnostics:
    property: str
    conditions: list[dict]
    q_sets: dict | None = None

    @property
    def passed(self) -> bool:
        return all(c["pass"] for c in self.conditions)

    def to_dict(self) -> dict:
        d = {"property": self.property, "pass": self.passed, "conditions": self.conditions}
        if self.q_sets is not None:
            d["q_sets"] = self.q_sets
        return d


def _recording_diagnostics(t: ObjectType, a: TeamAssignment, qa: frozenset, qb: frozenset) -> Diagnostics:
    order = t.state_index
    common = sorted(qa & qb, key=order.__getitem__)
    c2 = a.q0 not in qa or a.size("B") == 1
    c3 = a.q0 not in qb or a.size("A") == 1
    conditions = [
        {"condition": "1", "pass": not common, "violating_state": common[0] if common else None},
        {"condition": "2", "pass": c2, "violating_state": None if c2 else a.q0},
        {"condition": "3", "pass": c3, "violating_state": None if c3 else a.q0},
    ]
    q_sets = {"A": sorted(qa, key=order.__getitem__), "B": sorted(qb, key=order.__getitem__)}
    return Diagnostics(RECORDING, conditions, q_sets)


def check_recording(t: ObjectType, a: TeamAssignment) -> Diagnostics:
    return _recording_diagnostics(t, a, compute_Q(t, a, "A"), compute_Q(t, a, "B"))


def check_discerning(t: ObjectType, a: TeamAssignment) -> Diagnostics:
    conditions = []
    for j in range(1, a.n + 1):
        ra, rb = compute_R(t, a, j)
        common = sorted(ra & rb)
        conditions.append({"condition": f"j={j}", "pass": not common, "violating_pair": list(common[0]) if common else None})
    return Diagnostics(DISCERNING, conditions)


def check(t: ObjectType, a: TeamAssignment, prop: str) -> Diagnostics:
    if prop == RECORDING:
        return check_recording(t, a)
    if prop == DISCERNING:
        return check_discerning(t, a)
    raise InvalidArgument(f"unknown property {prop!r}")


# -- searches ---------------------------------------------------------------


@dataclass(frozen=True)
class SearchBounds:
    max_configs: int | None = None


@dataclass
class PropertyReport:
    type_name: str
    property: str
    n: int
    verdict: str
    witness: TeamAssignment | None
    diagnostics: Diagnostics | None
    configurations: int
    space_size: int
    complete: bool
    within_bound: bool = False
    wall_time: float = 0.0

    @property
    def incomplete(self) -> bool:
        return self.witness is None and not self.complete

    @property
    def holds(self) -> bool | None:
        """True/False when decided for this finite machine, None when the search was cut short."""
        if self.witness is not None:
            return True
        return False if self.complete else None

    def to_dict(self, timings: bool = False) -> dict:
        d = {
            "type": self.type_name,
            "query": {"property": self.property, "n": self.n},
            "verdict": self.verdict,
            "witness": self.witness.to_dict() if self.witness else None,
            "diagnostics": self.diagnostics.to_dict() if self.diagnostics else None,
            "search_stats": {
                "configurations": self.configurations,
                "space_size": self.space_size,
                "complete": self.complete,
            },
            "incomplete": self.incomplete,
            "labels": ["within bound"] if self.within_bound else [],
        }
        if timings:
            d["search_stats"]["wall_time"] = round(self.wall_time, 6)
        return d


def _team_sizes(n: int, prop: str) -> list[int]:
    # discerning is symmetric under swapping team labels, so |A| <= |B| suffices.
    return [a for a in range(1, n) if prop == RECORDING or a <= n - a]


def _configs_for_q0(n_ops: int, n: int, prop: str) -> Iterator[tuple[tuple[int, ...], tuple[int, ...]]]:
    for a in _team_sizes(n, prop):
        b = n - a
        for ms_a in itertools.combinations_with_replacement(range(n_ops), a):
            for ms_b in itertools.combinations_with_replacement(range(n_ops), b):
                if prop == DISCERNING and a == b and ms_b < ms_a:
                    continue
                yield ms_a, ms_b


def configs_per_q0(n_ops: int, n: int, prop: str) -> int:
    total = 0
    for a in _team_sizes(n, prop):
        b = n - a
        ca, cb = math.comb(n_ops + a - 1, a), math.comb(n_ops + b - 1, b)
        if prop == DISCERNING and a == b:
            total += ca * (ca + 1) // 2
        else:
            total += ca * cb
    return total


def _scan_q0(t: ObjectType, q0_index: int, n: int, prop: str, budget: int | None):
    """Examine configurations for one q0 in canonical order.

    Returns ``(position, ms_a, ms_b)`` of the first witness (1-based position)
    or ``(examined, None, None)``.
    """
    nxt, rsp = t.tables
    n_resp = len(t.responses)
    examined = 0
    for ms_a, ms_b in _configs_for_q0(len(t.ops), n, prop):
        if budget is not None and examined >= budget:
            break
        examined += 1
        ops = np.array(ms_a + ms_b, dtype=np.int64)
        in_a = np.zeros(n, dtype=np.bool_)
        in_a[: len(ms_a)] = True
        if prop == RECORDING:
            qa = _kernels.reach_q(nxt, q0_index, ops, in_a)
            qb = _kernels.reach_q(nxt, q0_index, ops, ~in_a)
            if (qa & qb).any():
                continue
            if qa[q0_index] and len(ms_b) != 1:
                continue
            if qb[q0_index] and len(ms_a) != 1:
                continue
            return examined, ms_a, ms_b
        if _kernels.first_discerning_failure(nxt, rsp, n_resp, q0_index, ops, in_a) < 0:
            return examined, ms_a, ms_b
    return examined, None, None


def _scan_job(args):
    return _scan_q0(*args)


def search(t: ObjectType, n: int, prop: str, budget: SearchBounds | None = None, jobs: int = 1) -> PropertyReport:
    """First witness in canonical order, or a (possibly complete) exhaustion certificate."""
    if prop not in PROPERTIES:
        raise InvalidArgument(f"unknown property {prop!r}")
    if not isinstance(n, int) or n < 2:
        raise InvalidArgument("n must be an integer >= 2")
    budget = budget or SearchBounds()
    start = time.perf_counter()
    per_q0 = configs_per_q0(len(t.ops), n, prop)
    q0s = [t.state_index[q] for q in t.initial_states]
    space = per_q0 * len(q0s)

    def chunk_budget(k: int) -> int | None:
        if budget.max_configs is None:
            return None
        return max(0, min(per_q0, budget.max_configs - k * per_q0))

    jobs_args = [(t, q, n, prop, chunk_budget(k)) for k, q in enumerate(q0s)]
    if jobs > 1 and len(jobs_args) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_scan_job, jobs_args))
    else:
        results = []
        for args in jobs_args:
            results.append(_scan_q0(*args))
            if results[-1][1] is not None:
                break

    examined = 0
    witness = None
    for k, (count, ms_a, ms_b) in enumerate(results):
        if ms_a is not None:
            examined = k * per_q0 + count
            witness = TeamAssignment.from_teams(
                t.states[q0s[k]], [t.ops[o] for o in ms_a], [t.ops[o] for o in ms_b]
            )
            break
        examined += count
    diagnostics = check(t, witness, prop) if witness is not None else None
    return PropertyReport(
        type_name=t.name,
        property=prop,
        n=n,
        verdict=WITNESS_FOUND if witness else NO_WITNESS,
        witness=witness,
        diagnostics=diagnostics,
        configurations=examined,
        space_size=space,
        complete=witness is not None or examined == space,
        within_bound=t.bounded,
        wall_time=time.perf_counter() - start,
    )


def search_recording(t: ObjectType, n: int, budget: SearchBounds | None = None, jobs: int = 1) -> PropertyReport:
    return search(t, n, RECORDING, budget, jobs)


def search_discerning(t: ObjectType, n: int, budget: SearchBounds | None = None, jobs: int = 1) -> PropertyReport:
    return search(t, n, DISCERNING, budget, jobs)


# -- witness-level consequences ---------------------------------------------


def drop_from_larger_team(a: TeamAssignment) -> TeamAssignment:
    """Remove the last process of the larger team (team B on ties)."""
    team = "A" if a.size("A") > a.size("B") else "B"
    return a.without(a.members(team)[-1])


def b_steps_violations(t: ObjectType, a: TeamAssignment) -> list[dict]:
    """Sequences q0 -> q0 that skip a member of a team X with q0 not in Q_X.

    Empty for every recording witness; anything returned is a checker bug.
    """
    bad = []
    q_sets = {x: compute_Q(t, a, x) for x in ("A", "B")}
    for seq in distinct_sequences(a.n):
        if run_sequence(t, a.q0, [a.op_of[i - 1] for i in seq]).final_state != a.q0:
            continue
        for x in ("A", "B"):
            if a.q0 in q_sets[x]:
                continue
            missing = [p for p in a.members(x) if p not in seq]
            if missing:
                bad.append({"team": x, "sequence": list(seq), "missing": missing})
    return bad


@dataclass
class AuditRow:
    n: int
    recording: bool | None
    discerning: bool | None
    recording_witness: TeamAssignment | None = None
    discerning_witness: TeamAssignment | None = None

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "recording": self.recording,
            "discerning": self.discerning,
            "recording_witness": self.recording_witness.to_dict() if self.recording_witness else None,
            "discerning_witness": self.discerning_witness.to_dict() if self.discerning_witness else None,
        }


@dataclass
class AuditReport:
    type_name: str
    n_max: int
    rows: list[AuditRow]
    violations: list[dict] = field(default_factory=list)
    advisory: bool = False
    within_bound: bool = False

    def max_n(self, prop: str) -> int | None:
        """Largest n in the table with a witness (1 if none found)."""
        best = 1
        for row in self.rows:
            if getattr(row, prop):
                best = row.n
        return best

    def to_dict(self) -> dict:
        max_rec, max_disc = self.max_n(RECORDING), self.max_n(DISCERNING)
        return {
            "type": self.type_name,
            "n_max": self.n_max,
            "rows": [r.to_dict() for r in self.rows],
            "violations": self.violations,
            "advisory": self.advisory,
            "max_recording": max_rec,
            "max_discerning": max_disc,
            "recording_lags_discerning_by": max_disc - max_rec,
            "labels": ["within bound"] if self.within_bound else [],
        }


def audit_implications(t: ObjectType, n_max: int, budget: SearchBounds | None = None, jobs: int = 1) -> AuditReport:
    """Tabulate both properties for n = 2..n_max and flag broken implications.

    The implications are theorems, so a flagged row means the checker is wrong.
    Witness-level checks ride along: a recording witness must be a discerning
    witness, must stay recording after dropping a process from its larger team,
    and must satisfy the return-to-q0 lemma.
    """
    if n_max < 2:
        raise InvalidArgument("n_max must be >= 2")
    rows: dict[int, AuditRow] = {}
    advisory = False
    for n in range(2, n_max + 1):
        rec = search_recording(t, n, budget, jobs)
        disc = search_discerning(t, n, budget, jobs)
        advisory |= rec.holds is None or disc.holds is None
        rows[n] = AuditRow(n, rec.holds, disc.holds, rec.witness, disc.witness)

    violations = []

    def flag(rule: str, n: int, detail: str):
        violations.append({"rule": rule, "n": n, "detail": detail})

    for n, row in rows.items():
        if row.recording and row.discerning is False:
            flag("recording(n) => discerning(n)", n, "recording witness found but discerning search exhausted")
        if n >= 3 and row.recording and rows[n - 1].recording is False:
            flag("recording(n) => recording(n-1)", n, "recording(n-1) search exhausted")
        if n >= 4 and row.discerning and rows[n - 2].recording is False:
            flag("discerning(n) => recording(n-2)", n, "recording(n-2) search exhausted")
        if n == 3 and row.discerning and rows[2].recording is False:
            flag("discerning(3) => recording(2)", n, "recording(2) search exhausted")
        w = row.recording_witness
        if w is not None:
            if not check_discerning(t, w).passed:
                flag("recording witness is a discerning witness", n, "same assignment fails discerning")
            if n >= 3 and not check_recording(t, drop_from_larger_team(w)).passed:
                flag("dropping a process keeps recording", n, "reduced assignment fails recording")
            if b_steps_violations(t, w):
                flag("q0-return sequences contain the whole team", n, "sequence skipping a team member")
    return AuditReport(t.name, n_max, [rows[n] for n in sorted(rows)], violations, advisory, t.bounded)
