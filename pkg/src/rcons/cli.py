"""Command-line entry point: ``rcons <command> ...``.

Exit codes: 0 when every verdict passes and every search ran to completion,
1 when a property is violated or a search was cut short, 2 for usage and
configuration errors.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from . import __version__
from .algorithms import ALGORITHMS, UNIVERSAL_OBJECTS, build_algorithm
from .algorithms.universal import UniversalLayout, check_universal, demo_workloads, universal_passed, universal_programs
from .errors import ConfigurationError, InvalidArgument, InvalidEventError, RconsError, ScheduleFormatError, TypeSpecError
from .hierarchy import (DISCERNING, PROPERTIES, RECORDING, SearchBounds, TeamAssignment, audit_implications, check,
                        search)
from .runtime import (INDEPENDENT, MODELS, RandomBounds, ScheduleBounds, TraceRecorder, Verdict, check_trace,
                      format_schedule, init_system, model_check, parse_schedule, random_run, run_schedule)
from .types import load_type

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


@dataclass
class Report:
    command: str
    args: dict
    result: dict
    passed: bool
    complete: bool
    exit_code: int
    version: str = __version__
    wall_time: float | None = None

    def to_dict(self) -> dict:
        d = {"command": self.command, "args": self.args, "version": self.version, "passed": self.passed,
             "complete": self.complete, "exit_code": self.exit_code, "result": self.result}
        if self.wall_time is not None:
            d["wall_time"] = self.wall_time
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True, ensure_ascii=False)

    @classmethod
    def from_dict(cls, d: dict) -> Report:
        return cls(d["command"], d["args"], d["result"], d["passed"], d["complete"], d["exit_code"],
                   d["version"], d.get("wall_time"))

    @classmethod
    def from_json(cls, text: str) -> Report:
        return cls.from_dict(json.loads(text))


# -- argument helpers -------------------------------------------------------


def _parse_inputs(text: str | None):
    if text is None:
        return None
    out = []
    for tok in text.split(","):
        tok = tok.strip()
        if not tok:
            raise InvalidArgument(f"empty value in --inputs {text!r}")
        try:
            out.append(int(tok))
        except ValueError:
            out.append(tok)
    return out


def _type_ref(args) -> str:
    ref = getattr(args, "type_pos", None) or args.type
    if not ref:
        raise InvalidArgument("a type is required (positional or --type)")
    return ref


def _load_assignment(path: str | None) -> TeamAssignment | None:
    if path is None:
        return None
    try:
        with open(path, encoding="utf-8") as fh:
            return TeamAssignment.from_dict(json.load(fh))
    except FileNotFoundError:
        raise InvalidArgument(f"assignment file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise InvalidArgument(f"assignment file is not JSON: {exc}") from None


def _echo(args, drop=("jobs", "timings", "format", "output", "func")) -> dict:
    return {k: v for k, v in sorted(vars(args).items()) if k not in drop and v is not None}


def _positive(name: str, value, minimum: int = 1) -> None:
    if value is not None and value < minimum:
        raise InvalidArgument(f"--{name} must be >= {minimum}")


# -- commands ---------------------------------------------------------------


def cmd_check_type(args) -> Report:
    t = load_type(_type_ref(args))
    if args.n < 2:
        raise InvalidArgument("--n must be >= 2")
    _positive("budget", args.budget)
    a = _load_assignment(args.assignment)
    if a is not None:
        if a.n != args.n:
            raise InvalidArgument(f"assignment covers {a.n} processes but --n is {args.n}")
        diag = check(t, a, args.property)
        result = {"type": t.name, "query": {"property": args.property, "n": args.n},
                  "assignment": a.to_dict(), "diagnostics": diag.to_dict(),
                  "labels": ["within bound"] if t.bounded else []}
        return Report("check-type", _echo(args), result, diag.passed, True,
                      EXIT_OK if diag.passed else EXIT_FAIL)
    rep = search(t, args.n, args.property, SearchBounds(args.budget), args.jobs)
    return Report("check-type", _echo(args), rep.to_dict(args.timings), rep.complete, rep.complete,
                  EXIT_OK if rep.complete else EXIT_FAIL)


def cmd_search(args) -> Report:
    t = load_type(_type_ref(args))
    if args.n_max < 2:
        raise InvalidArgument("--n-max must be >= 2")
    _positive("budget", args.budget)
    rows, complete = [], True
    props = PROPERTIES if args.property == "both" else (args.property,)
    summary = {}
    for prop in props:
        best, first_fail = 1, None
        for n in range(2, args.n_max + 1):
            rep = search(t, n, prop, SearchBounds(args.budget), args.jobs)
            rows.append(rep.to_dict(args.timings))
            complete &= rep.complete
            if rep.holds:
                best = n
            elif rep.holds is False and first_fail is None:
                first_fail = n
        summary[prop] = {"max_n_with_witness": best, "first_n_without_witness": first_fail}
    result = {"type": t.name, "n_max": args.n_max, "summary": summary, "reports": rows,
              "labels": ["within bound"] if t.bounded else []}
    return Report("search", _echo(args), result, complete, complete, EXIT_OK if complete else EXIT_FAIL)


def cmd_audit(args) -> Report:
    t = load_type(_type_ref(args))
    if args.n_max < 2:
        raise InvalidArgument("--n-max must be >= 2")
    _positive("budget", args.budget)
    rep = audit_implications(t, args.n_max, SearchBounds(args.budget), args.jobs)
    ok = not rep.violations
    complete = not rep.advisory
    return Report("audit", _echo(args), rep.to_dict(), ok, complete, EXIT_OK if ok and complete else EXIT_FAIL)


def _algorithm_from(opts: dict):
    t = load_type(opts["type"]) if opts.get("type") else None
    a = TeamAssignment.from_dict(opts["assignment"]) if opts.get("assignment") else None
    return build_algorithm(opts["algorithm"], opts["n"], t, opts.get("inputs"), a, opts.get("consensus", "atomic"))


def _random_chunk(job):
    opts, model, bounds, seeds = job
    alg = _algorithm_from(opts)
    s = alg.system(model)
    verdict = Verdict()
    coverage: dict = {}
    for seed in seeds:
        rec = TraceRecorder(s.clone())
        try:
            random_run(s, seed, bounds, recorder=rec)
        except RconsError as err:
            # the recorder keeps the failing event, so the trace doubles as a counterexample
            rec.trace.error = f"{type(err).__name__}: {err}"
            rec.trace.error_index = len(rec.trace.events) - 1
        if alg.postcheck is not None and rec.trace.error is None:
            err = alg.postcheck(rec.trace)
            if err:
                rec.trace.error, rec.trace.error_index = err, len(rec.trace.events) - 1
        check_trace(rec.trace, s.inputs, verdict)
        for m in rec.trace.marks():
            key = ":".join(str(x) for x in m) if isinstance(m, tuple) else str(m)
            coverage[key] = coverage.get(key, 0) + 1
    return verdict, coverage


def _chunks(seq: list, k: int) -> list[list]:
    k = max(1, min(k, len(seq)))
    size = -(-len(seq) // k)
    return [seq[i:i + size] for i in range(0, len(seq), size)]


def _header(opts: dict, model: str) -> dict:
    h = {"algorithm": opts["algorithm"], "n": opts["n"], "model": model}
    if opts.get("type"):
        h["type"] = opts["type"]
    if opts.get("inputs") is not None:
        h["inputs"] = ",".join(str(v) for v in opts["inputs"])
    if opts.get("consensus", "atomic") != "atomic":
        h["consensus"] = opts["consensus"]
    if opts.get("assignment"):
        h["assignment"] = json.dumps(opts["assignment"], sort_keys=True)
    return h


def cmd_modelcheck(args) -> Report:
    if args.n < 1:
        raise InvalidArgument("--n must be >= 1")
    if args.max_steps < 0 or args.max_crashes < 0:
        raise InvalidArgument("--max-steps and --max-crashes must be >= 0")
    if args.seeds is not None and args.exhaustive:
        raise InvalidArgument("choose either --seeds or --exhaustive")
    _positive("seeds", args.seeds)
    if not 0.0 <= args.crash_prob <= 1.0:
        raise InvalidArgument("--crash-prob must be within [0, 1]")
    assignment = _load_assignment(args.assignment)
    opts = {"algorithm": args.algorithm, "n": args.n, "type": args.type, "inputs": _parse_inputs(args.inputs),
            "consensus": args.consensus, "assignment": assignment.to_dict() if assignment else None}
    alg = _algorithm_from(opts)
    opts["inputs"] = alg.inputs
    model = args.model or alg.model
    s = alg.system(model)  # validates model compatibility
    result = {"algorithm": args.algorithm, "n": args.n, "model": model, "inputs": alg.inputs, "config": alg.config}
    if args.seeds is None:
        bounds = ScheduleBounds(args.max_steps, args.max_crashes, args.ea_constraint)
        res = model_check(s, bounds, monitor=alg.monitor, jobs=args.jobs)
        verdict = res.verdict
        result.update(mode="exhaustive", schedules=res.schedules, complete=res.complete,
                      coverage={k: v for k, v in res.to_dict()["coverage"].items()})
        if args.timings:
            result["distinct_states"] = res.states
    else:
        bounds = RandomBounds(args.max_steps, args.max_crashes, args.crash_prob, args.ea_constraint)
        seeds = list(range(args.seed, args.seed + args.seeds))
        jobs = [(opts, model, bounds, chunk) for chunk in _chunks(seeds, args.jobs)]
        if args.jobs > 1 and len(jobs) > 1:
            with ProcessPoolExecutor(max_workers=args.jobs) as pool:
                parts = list(pool.map(_random_chunk, jobs))
        else:
            parts = [_random_chunk(j) for j in jobs]
        verdict = Verdict()
        coverage: dict = {}
        for v, cov in parts:
            verdict = verdict.merge(v)
            for k, c in cov.items():
                coverage[k] = coverage.get(k, 0) + c
        result.update(mode="random", seeds=[seeds[0], seeds[-1]], crash_prob=args.crash_prob,
                      coverage=dict(sorted(coverage.items())))
    result["verdict"] = verdict.to_dict()
    if not verdict.passed:
        path = Path(args.counterexample)
        path.write_text(format_schedule(_events(verdict.counterexample), _header(opts, model)), encoding="utf-8")
        result["counterexample_file"] = str(path)
    complete = verdict.passed or args.seeds is not None or result.get("complete", True)
    return Report("modelcheck", _echo(args), result, verdict.passed, bool(complete),
                  EXIT_OK if verdict.passed else EXIT_FAIL)


def _events(lines):
    sched, _ = parse_schedule("\n".join(lines))
    return sched


def cmd_simulate(args) -> Report:
    try:
        text = Path(args.schedule).read_text(encoding="utf-8")
    except FileNotFoundError:
        raise InvalidArgument(f"schedule file not found: {args.schedule}") from None
    sched, header = parse_schedule(text)
    n = args.n if args.n is not None else int(header.get("n", 2))
    algorithm = args.algorithm or header.get("algorithm", "team")
    assignment = _load_assignment(args.assignment)
    if assignment is None and "assignment" in header:
        assignment = TeamAssignment.from_dict(json.loads(header["assignment"]))
    opts = {"algorithm": algorithm, "n": n, "type": args.type or header.get("type"),
            "inputs": _parse_inputs(args.inputs or header.get("inputs")),
            "consensus": args.consensus or header.get("consensus", "atomic"),
            "assignment": assignment.to_dict() if assignment else None}
    alg = _algorithm_from(opts)
    model = args.model or header.get("model") or alg.model
    s = alg.system(model)
    trace = run_schedule(s, sched, stop_on_error=True)  # an invalid event raises, naming its index
    if alg.postcheck is not None and trace.error is None:
        err = alg.postcheck(trace)
        if err:
            trace.error, trace.error_index = err, len(trace.events) - 1
    verdict = Verdict()
    check_trace(trace, s.inputs, verdict)
    result = {"algorithm": algorithm, "n": n, "model": model, "inputs": alg.inputs, "trace": trace.to_dict(),
              "verdict": verdict.to_dict()}
    return Report("simulate", _echo(args), result, verdict.passed, True, EXIT_OK if verdict.passed else EXIT_FAIL)


def _universal_chunk(job):
    kind, n, ops, rc, bounds, seeds, detail = job
    t, work = demo_workloads(kind, n, ops)
    L = UniversalLayout.build(n, t, work, rc)
    s = init_system(universal_programs(L), [0] * n, L.memory())
    out = []
    for seed in seeds:
        rec = TraceRecorder(s.clone())
        sched, _ = random_run(s, seed, bounds, recorder=rec)
        rec.trace.final_memory = rec.s.memory.snapshot()
        checks = check_universal(rec.trace, L)
        v = Verdict()
        check_trace(rec.trace, [], v)  # termination only: outputs are op counts, not inputs
        checks["termination"] = {"pass": v.termination, "detail": v.counterexamples[0]["detail"]
                                 if not v.termination else ""}
        entry = {"seed": seed, "passed": universal_passed(checks), "final_state": checks["final_state"],
                 "events": len(sched), "crashes": sum(e.kind == "crash" for e in sched),
                 "checks": {k: v for k, v in checks.items() if isinstance(v, dict)}}
        if detail:
            entry["list"] = checks["list"]
            entry["schedule"] = [str(e) for e in sched]
        out.append(entry)
    return out


def cmd_universal_demo(args) -> Report:
    _positive("processes", args.processes)
    _positive("ops", args.ops, 0)
    _positive("seeds", args.seeds)
    if args.max_crashes < 0 or not 0.0 <= args.crash_prob <= 1.0:
        raise InvalidArgument("--max-crashes must be >= 0 and --crash-prob within [0, 1]")
    t, work = demo_workloads(args.object, args.processes, args.ops)
    UniversalLayout.build(args.processes, t, work, args.rc)  # validate before fanning out
    bounds = RandomBounds(args.max_steps, args.max_crashes, args.crash_prob)
    seeds = list(range(args.seed, args.seed + (args.seeds or 1)))
    detail = args.seeds is None
    jobs = [(args.object, args.processes, args.ops, args.rc, bounds, chunk, detail)
            for chunk in _chunks(seeds, args.jobs)]
    if args.jobs > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            runs = [r for part in pool.map(_universal_chunk, jobs) for r in part]
    else:
        runs = [r for j in jobs for r in _universal_chunk(j)]
    failed = [r["seed"] for r in runs if not r["passed"]]
    result = {"object": t.name, "processes": args.processes, "ops": args.ops, "rc": args.rc,
              "workloads": [list(w) for w in work], "seeds_run": len(runs), "failed_seeds": failed}
    if detail:
        result["run"] = runs[0]
    else:
        result["runs"] = [{k: r[k] for k in ("seed", "passed", "final_state", "events", "crashes")} for r in runs]
        result["total_crashes"] = sum(r["crashes"] for r in runs)
        if failed:
            result["first_failure"] = next(r for r in runs if not r["passed"])
    ok = not failed
    return Report("universal-demo", _echo(args), result, ok, True, EXIT_OK if ok else EXIT_FAIL)


# -- text rendering ---------------------------------------------------------


def render_text(rep: Report) -> str:
    r = rep.result
    lines = [f"rcons {rep.version} {rep.command}: {'PASS' if rep.passed else 'FAIL'}"
             + ("" if rep.complete else " (incomplete)")]
    if rep.command == "check-type":
        q = r["query"]
        lines.append(f"type {r['type']}, {q['property']}, n={q['n']}")
        if "assignment" in r:
            for c in r["diagnostics"]["conditions"]:
                lines.append(f"  condition {c['condition']}: {'holds' if c['pass'] else 'fails'}")
        else:
            st = r["search_stats"]
            lines.append(f"  verdict: {r['verdict']} ({st['configurations']}/{st['space_size']} configurations, "
                         f"complete={st['complete']})")
            if r["witness"]:
                w = r["witness"]
                lines.append(f"  witness q0={w['q0']} teams={w['team_of']} ops={w['op_of']}")
                qs = (r["diagnostics"] or {}).get("q_sets")
                if qs:
                    lines.append(f"  Q_A={qs['A']}  Q_B={qs['B']}")
        if r.get("labels"):
            lines.append(f"  labels: {', '.join(r['labels'])}")
    elif rep.command == "search":
        for prop, s in r["summary"].items():
            lines.append(f"  {prop}: witness up to n={s['max_n_with_witness']}, none at n={s['first_n_without_witness']}")
    elif rep.command == "audit":
        for row in r["rows"]:
            lines.append(f"  n={row['n']}: recording={row['recording']} discerning={row['discerning']}")
        for v in r["violations"]:
            lines.append(f"  VIOLATION {v['rule']} at n={v['n']}: {v['detail']}")
    elif rep.command in ("modelcheck", "simulate"):
        v = r["verdict"]
        lines.append(f"  {r['algorithm']} n={r['n']} model={r['model']} inputs={r['inputs']}")
        for prop in ("agreement", "validity", "termination", "invariants"):
            lines.append(f"  {prop}: {'pass' if v[prop]['pass'] else 'FAIL'}")
        lines.append(f"  executions checked: {v['executions_checked']}")
        shown = [f"{k}={c}" for k, c in r.get("coverage", {}).items() if not k.startswith("return")]
        if shown:
            lines.append("  coverage: " + ", ".join(shown))
        for ce in v["counterexamples"][:1]:
            lines.append(f"  counterexample ({ce['property']}): {ce['detail']}")
        if r.get("counterexample_file"):
            lines.append(f"  replay: rcons simulate --schedule {r['counterexample_file']}")
        if rep.command == "simulate":
            lines.append(f"  events: {len(r['trace']['events'])}, outputs: {r['trace']['outputs']}")
    elif rep.command == "universal-demo":
        lines.append(f"  {r['object']} with {r['processes']} processes, {r['ops']} ops, "
                     f"{r['seeds_run']} seed(s), failed: {r['failed_seeds'] or 'none'}")
        if "run" in r:
            run = r["run"]
            for node in run["list"]:
                lines.append(f"    seq {node['seq']}: {node['op'] or '(dummy)'} -> {node['response']} "
                             f"state {node['newState']}")
            for name, c in run["checks"].items():
                lines.append(f"  {name}: {'pass' if c['pass'] else 'FAIL ' + c['detail']}")
            lines.append(f"  final state: {run['final_state']}")
    if rep.wall_time is not None:
        lines.append(f"  wall time: {rep.wall_time:.3f}s")
    return "\n".join(lines)


# -- parser -----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--format", choices=("text", "structured"), default="text")
    common.add_argument("--jobs", type=int, default=1, help="worker processes (1 = serial)")
    common.add_argument("--timings", action="store_true", help="include wall time (makes output run dependent)")
    common.add_argument("--output", help="also write the structured report to this file")

    p = argparse.ArgumentParser(prog="rcons", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"rcons {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def typed(sp):
        sp.add_argument("type_pos", nargs="?", metavar="TYPE", help="builtin:Name,k=v or a type-spec file")
        sp.add_argument("--type", help="same as the positional TYPE")
        sp.add_argument("--budget", type=int, help="examine at most this many configurations per search")

    sp = sub.add_parser("check-type", parents=[common], help="decide n-recording / n-discerning for a type")
    typed(sp)
    sp.add_argument("--property", choices=PROPERTIES, default=RECORDING)
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--assignment", help="JSON team assignment to check instead of searching")
    sp.set_defaults(func=cmd_check_type)

    sp = sub.add_parser("search", parents=[common], help="bracket the largest n with a witness")
    typed(sp)
    sp.add_argument("--property", choices=PROPERTIES + ("both",), default="both")
    sp.add_argument("--n-max", type=int, default=5)
    sp.set_defaults(func=cmd_search)

    sp = sub.add_parser("audit", parents=[common], help="check the implications between the properties")
    typed(sp)
    sp.add_argument("--n-max", type=int, default=5)
    sp.set_defaults(func=cmd_audit)

    def system_flags(sp, defaults: bool):
        sp.add_argument("--algorithm", choices=ALGORITHMS, default="team" if defaults else None)
        sp.add_argument("--type", help="object type for the algorithm (default builtin:Sn with the given n)")
        sp.add_argument("--n", type=int, default=2 if defaults else None)
        sp.add_argument("--inputs", help="comma separated; for team algorithms two values mean per team")
        sp.add_argument("--model", choices=MODELS, help="crash model (default: the algorithm's own)")
        sp.add_argument("--consensus", choices=("atomic", "discerning"), default="atomic" if defaults else None,
                        help="per-round consensus of simul")
        sp.add_argument("--assignment", help="JSON witness assignment instead of searching for one")

    sp = sub.add_parser("modelcheck", parents=[common], help="check an algorithm over bounded schedules")
    system_flags(sp, True)
    sp.add_argument("--max-steps", type=int, default=20)
    sp.add_argument("--max-crashes", type=int, default=1)
    sp.add_argument("--ea-constraint", action="store_true", help="only p1 crashes, at most once per step of others")
    sp.add_argument("--exhaustive", action="store_true", help="all schedules (the default)")
    sp.add_argument("--seeds", type=int, help="run this many random schedules instead")
    sp.add_argument("--seed", type=int, default=0, help="first seed for --seeds")
    sp.add_argument("--crash-prob", type=float, default=0.05)
    sp.add_argument("--counterexample", default="counterexample.sched", help="where a failing schedule is written")
    sp.set_defaults(func=cmd_modelcheck)

    sp = sub.add_parser("simulate", parents=[common], help="replay a schedule file")
    sp.add_argument("--schedule", required=True)
    system_flags(sp, False)
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("universal-demo", parents=[common], help="run the universal construction under crashes")
    sp.add_argument("--object", choices=UNIVERSAL_OBJECTS, default="counter")
    sp.add_argument("--processes", type=int, default=3)
    sp.add_argument("--ops", type=int, default=6)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--seeds", type=int, help="run seeds seed..seed+k-1 and summarize")
    sp.add_argument("--max-crashes", type=int, default=3)
    sp.add_argument("--crash-prob", type=float, default=0.02)
    sp.add_argument("--max-steps", type=int, default=100_000)
    sp.add_argument("--rc", choices=("tournament", "atomic"), default="tournament",
                    help="consensus deciding each list successor")
    sp.set_defaults(func=cmd_universal_demo)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    start = time.perf_counter()
    try:
        if args.jobs < 1:
            raise InvalidArgument("--jobs must be >= 1")
        rep = args.func(args)
    except (InvalidArgument, ConfigurationError, TypeSpecError, ScheduleFormatError, InvalidEventError) as err:
        print(f"rcons {args.command}: error: {err}", file=sys.stderr)
        return EXIT_USAGE
    if args.timings:
        rep.wall_time = round(time.perf_counter() - start, 6)
    text = rep.to_json()
    if args.output:
        Path(args.output).write_text(text + "\n", encoding="utf-8")
    print(text if args.format == "structured" else render_text(rep))
    return rep.exit_code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
