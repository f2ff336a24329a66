import os

import pytest
import torch

torch.set_num_threads(max(1, os.cpu_count() or 1))

_CRITERIA = []


def pytest_addoption(parser):
    parser.addoption("--run-slow", action="store_true", help="run long training criteria")


def pytest_collection_modifyitems(config, items):
    run_slow = config.getoption("--run-slow") or os.environ.get("NFPOS_RUN_SLOW") == "1"
    run_bench = os.environ.get("NFPOS_RUN_BENCHMARK") == "1"
    skip_slow = pytest.mark.skip(reason="slow; enable with --run-slow or NFPOS_RUN_SLOW=1")
    skip_bench = pytest.mark.skip(reason="multi-hour benchmark; enable with NFPOS_RUN_BENCHMARK=1")
    for item in items:
        if "benchmark" in item.keywords and not run_bench:
            item.add_marker(skip_bench)
        elif "slow" in item.keywords and not run_slow:
            item.add_marker(skip_slow)


@pytest.fixture
def criterion():
    """Record a pass/fail line for the acceptance summary, then assert."""

    def check(name, passed, detail=""):
        line = f"[{'PASS' if passed else 'FAIL'}] {name}: {detail}"
        _CRITERIA.append(line)
        print(line)
        assert passed, line

    return check


@pytest.fixture
def info():
    """Record a non-gating measurement for the acceptance summary."""

    def note(name, detail):
        line = f"[INFO] {name}: {detail}"
        _CRITERIA.append(line)
        print(line)

    return note


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for line in _CRITERIA:
            terminalreporter.write_line(line)
