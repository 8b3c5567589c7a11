import os
import sys

import pytest

from rcons.types import builtin

# Every builtin at the parameters the acceptance checks use.
BUILTIN_PARAMS = [
    ("Sn", {"n": 2}), ("Sn", {"n": 3}), ("Sn", {"n": 4}), ("Sn", {"n": 5}),
    ("Tn", {"n": 4}), ("Tn", {"n": 5}), ("Tn", {"n": 6}),
    ("register", {"domain": 3}), ("test_and_set", {}), ("compare_and_swap", {"domain": 3}),
    ("bounded_stack", {"depth": 3, "values": 2}), ("bounded_queue", {"depth": 3, "values": 2}),
    ("counter", {"limit": 4}),
]


def all_builtins():
    return [builtin(k, **p) for k, p in BUILTIN_PARAMS]


@pytest.fixture
def tmp_cwd(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    return tmp_path


def pytest_report_header(config):
    from rcons import _kernels
    return f"rcons kernel backend: {_kernels.BACKEND} (RCONS_NUMBA={os.environ.get('RCONS_NUMBA', 'unset')})"


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(results):
        terminalreporter.write_line(results[k])
