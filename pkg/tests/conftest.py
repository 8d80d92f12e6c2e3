import numpy as np
import pytest
from hypothesis import settings

from huberloc import model

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")

# lines recorded by the acceptance suite, echoed after the run
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)


@pytest.fixture
def line_net():
    # three collinear sensors at x = 0, 2, 5 plus corner anchors far away
    return model.generate_topology(
        3, anchor_positions=((0.0, 9.0), (9.0, 9.0), (9.0, 5.0)), area=(10, 10), comm_range=3.0,
        sensor_positions=[(0.0, 0.0), (2.0, 0.0), (5.0, 0.0)],
    )


@pytest.fixture
def small_net():
    return model.generate_topology(10, comm_range=5.0, seed=11)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
