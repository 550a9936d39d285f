import sys

import pytest

from uavdq.scenario import ScenarioDistribution, UserKind, UserProfile, Scenario, generate_scenario


@pytest.fixture
def default_scenario():
    return generate_scenario(ScenarioDistribution(), 0)


def small_scenario(n_ground=3, n_aerial=3, endurance=20.0, seed=0, **kw) -> Scenario:
    return generate_scenario(ScenarioDistribution(num_ground=n_ground, num_aerial=n_aerial,
                                                  endurance=endurance, **kw), seed)


def one_user(x=0.0, y=0.0, h=0.0, data_size=1e6, endurance=10.0, kind=UserKind.GROUND) -> Scenario:
    return Scenario(users=(UserProfile(0, kind, x, y, h, data_size, endurance),))


def pytest_terminal_summary(terminalreporter):
    lines = getattr(sys.modules.get("test_acceptance"), "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
