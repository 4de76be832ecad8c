from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import settings

from tsqes.models.molecular import H2_INITIAL_AMPLITUDES, H2_R125_SPECTRUM, h2_standin
from tsqes.statevector import StateVector

settings.register_profile("default", deadline=None, max_examples=40)
settings.load_profile("default")

H2_SPECTRUM = H2_R125_SPECTRUM
H2_E_S = -1.1
H2_T = 1.3518


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def h2():
    return h2_standin()


@pytest.fixture(scope="session")
def h2_psi0():
    return StateVector.from_amplitudes(H2_INITIAL_AMPLITUDES)


def random_pauli_items(rng, n_qubits: int, n_terms: int):
    letters = "IXYZ"
    return [(float(rng.normal()), "".join(rng.choice(list(letters), size=n_qubits))) for _ in range(n_terms)]


def close(a, b, tol):
    return math.isclose(a, b, rel_tol=0.0, abs_tol=tol)


_REPORT_KEY = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_REPORT_KEY] = []


@pytest.fixture
def report(request):
    """Record one PASS/FAIL line for an acceptance criterion and assert it."""
    lines = request.config.stash[_REPORT_KEY]

    def _report(number: int, ok: bool, detail: str):
        line = f"criterion {number}: {'PASS' if ok else 'FAIL'} {detail}"
        print(line)
        lines.append(line)
        assert ok, line

    return _report


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_REPORT_KEY, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
