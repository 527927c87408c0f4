"""Shared fixtures.

Master-key generation at the production tier costs a few seconds, so the
authorities are session-scoped; tests that mutate credentials work on copies.
"""

from __future__ import annotations

import pytest

from dwpt_auth import TIERS, ra_setup, register_vehicle
from dwpt_auth.registration import RegistrationAuthority, VehicleCredentials


def copy_credentials(creds: VehicleCredentials) -> VehicleCredentials:
    return VehicleCredentials(
        vehicle_id=creds.vehicle_id,
        d_ev=creds.d_ev,
        entries=list(creds.entries),
        spent=set(creds.spent),
    )


@pytest.fixture(scope="session")
def default_authority() -> RegistrationAuthority:
    return ra_setup(TIERS["default"], "suite-default-authority")


@pytest.fixture(scope="session")
def default_vehicle(default_authority) -> VehicleCredentials:
    return register_vehicle(default_authority, b"EV-main", 8)


@pytest.fixture()
def fresh_vehicle(default_vehicle) -> VehicleCredentials:
    """Per-test copy: spending pseudonyms here does not leak across tests."""
    return copy_credentials(default_vehicle)


@pytest.fixture(scope="session")
def test_authority() -> RegistrationAuthority:
    return ra_setup(TIERS["test"], "suite-test-authority")


@pytest.fixture(scope="session")
def toy_authority() -> RegistrationAuthority:
    return ra_setup(TIERS["toy"], "suite-toy-authority")


# One-line detail per gate check, filled in by tests/test_acceptance.py as each
# check completes; keyed by test function name.
GATE_RESULTS: dict[str, str] = {}


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """Print one PASS/FAIL line per gate check after any run that included them."""
    del exitstatus, config
    outcomes: dict[str, str] = {}
    for key in ("passed", "failed", "error"):
        for rep in terminalreporter.stats.get(key, []):
            nodeid = getattr(rep, "nodeid", "")
            if "test_acceptance" not in nodeid:
                continue
            name = nodeid.split("::")[-1]
            if key == "passed":
                outcomes.setdefault(name, "PASS")
            else:
                outcomes[name] = "FAIL"
    if not outcomes:
        return
    terminalreporter.write_sep("-", "acceptance gate")
    for name in sorted(outcomes):
        line = f"{outcomes[name]}  {name}"
        detail = GATE_RESULTS.get(name)
        if detail:
            line += f"  ({detail})"
        terminalreporter.write_line(line)
