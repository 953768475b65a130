import math

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from macroreal.schedule import BLUE_PRESET
from macroreal.spin_algebra import ModelParams

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def blue():
    return BLUE_PRESET


@pytest.fixture
def params():
    return ModelParams.from_ratio(0.023)


def taylor_expm(m, terms=60):
    """Plain power series, independent of any closed form."""
    out = np.eye(m.shape[0], dtype=complex)
    term = np.eye(m.shape[0], dtype=complex)
    for k in range(1, terms):
        term = term @ m / k
        out = out + term
    return out


TWO_PI = 2 * math.pi


# acceptance results, echoed once more in the terminal summary so they land in the log
_ACCEPTANCE = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_ACCEPTANCE] = []
    config.addinivalue_line("markers", "acceptance: end-to-end acceptance criterion")


@pytest.fixture
def acceptance(request):
    lines = request.config.stash[_ACCEPTANCE]

    def record(number: int, title: str, ok: bool, detail: str = "") -> bool:
        line = f"{'PASS' if ok else 'FAIL'} criterion {number:>2}: {title}" + (f" [{detail}]" if detail else "")
        print(line)
        lines.append(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split("criterion")[1].split(":")[0])):
            terminalreporter.write_line(line)
