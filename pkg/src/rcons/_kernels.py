"""Reachability kernels over (state, used-process-set) pairs.

Two implementations of every kernel live here: explicit loops compiled with
``numba.njit`` and vectorised numpy versions.  The numba path is used when
numba imports and ``RCONS_NUMBA`` is not ``0``; both paths must agree bit for
bit (the test-suite runs them side by side).

Conventions shared by all kernels: ``nxt[s, o]`` / ``rsp[s, o]`` are the type's
integer tables, ``ops[i]`` the operation index of process ``i`` (0-based),
``in_team[i]`` marks membership of the team whose sequences must start first.
"""

from __future__ import annotations

import os

import numpy as np

try:
    import numba
except ImportError:  # pragma: no cover - exercised only without numba installed
    numba = None

USE_NUMBA = numba is not None and os.environ.get("RCONS_NUMBA", "1") != "0"
BACKEND = "numba" if USE_NUMBA else "numpy"


# -- loop versions (numba source) -------------------------------------------


def _reach_q_loops(nxt, q0, ops, in_team):
    n = ops.shape[0]
    n_states = nxt.shape[0]
    full = 1 << n
    reach = np.zeros((full, n_states), dtype=np.bool_)
    for i in range(n):
        if in_team[i]:
            reach[1 << i, nxt[q0, ops[i]]] = True
    out = np.zeros(n_states, dtype=np.bool_)
    for mask in range(1, full):
        for s in range(n_states):
            if not reach[mask, s]:
                continue
            out[s] = True
            for k in range(n):
                if (mask >> k) & 1 == 0:
                    reach[mask | (1 << k), nxt[s, ops[k]]] = True
    return out


def _reach_r_loops(nxt, rsp, n_resp, q0, ops, in_team, j):
    # slot 0 of the last axis means "op_j not applied yet"; slot r+1 means it returned r.
    n = ops.shape[0]
    n_states = nxt.shape[0]
    full = 1 << n
    reach = np.zeros((full, n_states, n_resp + 1), dtype=np.bool_)
    for i in range(n):
        if in_team[i]:
            o = ops[i]
            reach[1 << i, nxt[q0, o], rsp[q0, o] + 1 if i == j else 0] = True
    out = np.zeros((n_resp, n_states), dtype=np.bool_)
    jbit = 1 << j
    for mask in range(1, full):
        for s in range(n_states):
            for r in range(n_resp + 1):
                if not reach[mask, s, r]:
                    continue
                if mask & jbit:
                    out[r - 1, s] = True
                for k in range(n):
                    if (mask >> k) & 1 == 0:
                        o = ops[k]
                        r2 = rsp[s, o] + 1 if k == j else r
                        reach[mask | (1 << k), nxt[s, o], r2] = True
    return out


_reach_r_impl = _reach_r_loops  # rebound to the compiled kernel below


def _first_discerning_failure_loops(nxt, rsp, n_resp, q0, ops, in_a):
    n = ops.shape[0]
    in_b = np.empty(n, dtype=np.bool_)
    for i in range(n):
        in_b[i] = not in_a[i]
    for j in range(n):
        ra = _reach_r_impl(nxt, rsp, n_resp, q0, ops, in_a, j)
        rb = _reach_r_impl(nxt, rsp, n_resp, q0, ops, in_b, j)
        if np.any(ra & rb):
            return j
    return -1


# -- numpy versions ---------------------------------------------------------


def reach_q_numpy(nxt, q0, ops, in_team):
    n = len(ops)
    full = 1 << n
    reach = np.zeros((full, nxt.shape[0]), dtype=bool)
    for i in np.flatnonzero(in_team):
        reach[1 << i, nxt[q0, ops[i]]] = True
    for mask in range(1, full):
        idx = np.flatnonzero(reach[mask])
        if idx.size == 0:
            continue
        for k in range(n):
            if not (mask >> k) & 1:
                reach[mask | (1 << k), nxt[idx, ops[k]]] = True
    return reach[1:].any(axis=0)


def reach_r_numpy(nxt, rsp, n_resp, q0, ops, in_team, j):
    n = len(ops)
    full = 1 << n
    reach = np.zeros((full, nxt.shape[0], n_resp + 1), dtype=bool)
    for i in np.flatnonzero(in_team):
        o = ops[i]
        reach[1 << i, nxt[q0, o], rsp[q0, o] + 1 if i == j else 0] = True
    for mask in range(1, full):
        s_idx, r_idx = np.nonzero(reach[mask])
        if s_idx.size == 0:
            continue
        for k in range(n):
            if not (mask >> k) & 1:
                o = ops[k]
                r2 = rsp[s_idx, o] + 1 if k == j else r_idx
                reach[mask | (1 << k), nxt[s_idx, o], r2] = True
    with_j = np.array([(m >> j) & 1 == 1 for m in range(full)])
    return reach[with_j, :, 1:].any(axis=0).T.copy()


def first_discerning_failure_numpy(nxt, rsp, n_resp, q0, ops, in_a):
    in_b = ~np.asarray(in_a, dtype=bool)
    for j in range(len(ops)):
        ra = reach_r_numpy(nxt, rsp, n_resp, q0, ops, in_a, j)
        rb = reach_r_numpy(nxt, rsp, n_resp, q0, ops, in_b, j)
        if (ra & rb).any():
            return j
    return -1


if numba is not None:
    reach_q_numba = numba.njit(cache=True)(_reach_q_loops)
    reach_r_numba = numba.njit(cache=True)(_reach_r_loops)
    _reach_r_impl = reach_r_numba
    first_discerning_failure_numba = numba.njit(cache=True)(_first_discerning_failure_loops)
else:  # pragma: no cover
    reach_q_numba = reach_r_numba = first_discerning_failure_numba = None


if USE_NUMBA:
    reach_q = reach_q_numba
    reach_r = reach_r_numba
    first_discerning_failure = first_discerning_failure_numba
else:
    reach_q = reach_q_numpy
    reach_r = reach_r_numpy
    first_discerning_failure = first_discerning_failure_numpy
