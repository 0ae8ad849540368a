import json
import socket
from pathlib import Path

import pytest

from crbforge.scenarios import builtin

REPO = Path(__file__).resolve().parents[1]
FIXTURES = REPO / "fixtures" / "llm"

_ACCEPTANCE: dict[int, tuple[str, bool]] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None:
        return
    number, title = marker.args
    if rep.when == "call" or (rep.when == "setup" and not rep.passed):
        prev = _ACCEPTANCE.get(number, (title, True))[1]
        _ACCEPTANCE[number] = (title, prev and rep.passed)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        title, ok = _ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {title}")


class NetworkBlocked(RuntimeError):
    pass


@pytest.fixture(autouse=True, scope="session")
def no_network():
    """Refuse every internet socket connect for the whole run."""
    original = socket.socket.connect

    def guarded(self, address):
        if self.family in (socket.AF_INET, socket.AF_INET6):
            raise NetworkBlocked(f"network access attempted: {address!r}")
        return original(self, address)

    socket.socket.connect = guarded
    yield
    socket.socket.connect = original


@pytest.fixture(scope="session")
def s01():
    return builtin("S01")


@pytest.fixture(scope="session")
def fixtures_dir():
    return FIXTURES


def minimal_spec(**overrides) -> dict:
    """A one-parameter scenario: phase = m*k*theta."""
    doc = {
        "id": "P1",
        "symbols": {
            "theta": {"kind": "parameter"},
            "k": {"kind": "structural", "positive": True},
            "M": {"kind": "structural", "positive": True},
            "sigma2": {"kind": "structural", "positive": True},
            "m": {"kind": "index"},
        },
        "phase_text": "m*k*theta",
        "params": ["theta"],
        "gain_sq_text": "1",
        "noise_text": "sigma2",
        "index_ranges": {"m": "M"},
        "targets": ["d_phi_m_d_theta", "F_thetatheta", "crb_theta"],
        "references": {"F_thetatheta": "2/sigma2*k^2*(M-1)*M*(2*M-1)/6"},
        "sampling": {"theta": [-1, 1], "k": [0.5, 2], "M": {"choices": [4, 8]}, "sigma2": [0.5, 2]},
    }
    doc.update(overrides)
    return doc


def minimal_json(**overrides) -> str:
    return json.dumps(minimal_spec(**overrides))
