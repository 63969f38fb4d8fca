import pytest

from mmwave_ia.channel import ChannelParams, LOS
from mmwave_ia.scenario import build_dataset

_ACCEPTANCE: list[str] = []


@pytest.fixture(scope="session")
def acceptance_log():
    """Append one 'criterion N PASS/FAIL ...' line per acceptance check; printed at session end."""
    return _ACCEPTANCE


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def small_los():
    return build_dataset(6000, LOS, channel_tag="los", seed=11)


@pytest.fixture(scope="session")
def clean_small():
    return build_dataset(4000, ChannelParams(1.9, 0.0), channel_tag="clean", seed=12)
