import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from gkc.knowledge import load_knowledge_base  # noqa: E402
from gkc.synthetic import SyntheticConfig, generate_synthetic_cohort  # noqa: E402


@pytest.fixture(scope="session")
def kb():
    return load_knowledge_base()


@pytest.fixture(scope="session")
def synth(kb):
    return generate_synthetic_cohort(SyntheticConfig(), kb)


@pytest.fixture(scope="session")
def cohort(synth):
    return synth.patients


@pytest.fixture(scope="session")
def small_cohort(kb):
    return generate_synthetic_cohort(SyntheticConfig(n_patients=40, seed=3), kb).patients


def pytest_configure(config):
    config.acceptance_lines = []


@pytest.fixture
def criterion(request):
    """``criterion(n, ok, detail)`` records and prints one acceptance line, then asserts."""
    def report(n, ok, detail=""):
        line = f"criterion {n:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        request.config.acceptance_lines.append(line)
        print(line)
        assert ok, line
    return report


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = getattr(config, "acceptance_lines", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split(":")[0].split()[1])):
            terminalreporter.write_line(line)
