import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from powergap.fem import AdmittivityField, BoundaryCurrent
from powergap.geometry import boundary_chart, disc, generate_mesh, inclusion_mask

settings.register_profile(
    "default",
    max_examples=25,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.function_scoped_fixture],
)
settings.register_profile("ci", max_examples=100, deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def square16():
    return generate_mesh("unit_square", 16)


@pytest.fixture(scope="session")
def square32():
    return generate_mesh("unit_square", 32)


@pytest.fixture(scope="session")
def two_mode_current(square32):
    return BoundaryCurrent.from_modes(boundary_chart(square32), {1: 1.0, 2: 0.5})


@pytest.fixture(scope="session")
def constant_case(square32, two_mode_current):
    from powergap.fem import solve_pair

    mesh = square32
    field = AdmittivityField.constant_pair(mesh, 1.0, 2.0 + 1.0j)
    D = inclusion_mask(mesh, disc((0.5, 0.5), 0.2))
    u0, u1 = solve_pair(mesh, field, two_mode_current, D)
    return dict(mesh=mesh, field=field, D=D, h=two_mode_current, u0=u0, u1=u1)


@pytest.fixture
def rng():
    return np.random.Generator(np.random.Philox(1234))


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
