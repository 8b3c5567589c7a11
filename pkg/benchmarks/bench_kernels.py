"""Compare the numba and numpy reachability kernels.

    python3 benchmarks/bench_kernels.py [--repeat 5]

Part one times each kernel directly, side by side, on builtin tables (the
numba timings exclude compilation).  Part two times whole searches in fresh
interpreters with RCONS_NUMBA=1 and RCONS_NUMBA=0, which is how the backend is
chosen in normal use.
"""

from __future__ import annotations

import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from rcons import _kernels
from rcons.types import builtin

CASES = [("Sn", {"n": 5}, 5), ("Tn", {"n": 6}, 6), ("bounded_queue", {"depth": 3, "values": 2}, 5)]

SEARCH = """
import time
from rcons.hierarchy import search
from rcons.types import builtin
search(builtin("Sn", n=2), 2, "recording")  # load or compile the kernels
search(builtin("Sn", n=2), 3, "discerning")
start = time.perf_counter()
search(builtin("Tn", n=5), 4, "recording")  # these three run to exhaustion
search(builtin("Tn", n=6), 5, "recording")
search(builtin("bounded_queue", depth=3, values=2), 5, "discerning")
print(time.perf_counter() - start)
"""


def kernel_rows(repeat: int):
    rows = []
    for kind, params, n in CASES:
        t = builtin(kind, **params)
        nxt, rsp = t.tables
        ops = np.array([i % len(t.ops) for i in range(n)], dtype=np.int64)
        in_a = np.array([i < n // 2 for i in range(n)], dtype=np.bool_)
        nr = len(t.responses)
        calls = {
            "reach_q": lambda impl: impl["q"](nxt, 0, ops, in_a),
            "first_discerning_failure": lambda impl: impl["d"](nxt, rsp, nr, 0, ops, in_a),
        }
        impls = {"numpy": {"q": _kernels.reach_q_numpy, "d": _kernels.first_discerning_failure_numpy}}
        if _kernels.reach_q_numba is not None:
            impls["numba"] = {"q": _kernels.reach_q_numba, "d": _kernels.first_discerning_failure_numba}
        for name, call in calls.items():
            times = {}
            for backend, impl in impls.items():
                call(impl)  # warm up (compiles the numba kernel)
                times[backend] = min(timeit.repeat(lambda: call(impl), number=20, repeat=repeat)) / 20
            rows.append((t.name, n, name, times))
    return rows


def search_times(repeat: int) -> dict:
    out = {}
    for flag in ("1", "0"):
        env = dict(os.environ, RCONS_NUMBA=flag)
        best = min(float(subprocess.run([sys.executable, "-c", SEARCH], env=env, capture_output=True, text=True,
                                        check=True).stdout) for _ in range(repeat))
        out["numba" if flag == "1" else "numpy"] = best
    return out


def main() -> None:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--repeat", type=int, default=5)
    args = p.parse_args()
    print(f"{'type':<20}{'n':>3}  {'kernel':<26}{'numba':>12}{'numpy':>12}{'speedup':>9}")
    for name, n, kernel, times in kernel_rows(args.repeat):
        nb, npy = times.get("numba"), times["numpy"]
        nb_s = f"{nb * 1e6:10.1f}us" if nb is not None else f"{'n/a':>12}"
        speed = f"{npy / nb:8.1f}x" if nb else f"{'':>9}"
        print(f"{name:<20}{n:>3}  {kernel:<26}{nb_s}{npy * 1e6:10.1f}us{speed}")
    st = search_times(max(1, args.repeat // 2))
    print(f"\nexhaustive searches after warm-up: numba {st['numba']:.3f}s, numpy {st['numpy']:.3f}s")


if __name__ == "__main__":
    main()
