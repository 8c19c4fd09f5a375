import datetime as dt

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from nbrepro.ingest import CasePanel

settings.register_profile("default", max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def make_panel(counts, start=dt.date(2020, 4, 1), districts=None):
    counts = np.asarray(counts, dtype=np.int64)
    if counts.ndim == 1:
        counts = counts[:, None]
    dates = tuple(start + dt.timedelta(days=i) for i in range(counts.shape[0]))
    districts = districts or tuple(f"K{j:03d}" for j in range(counts.shape[1]))
    return CasePanel(dates, tuple(districts), counts)


@pytest.fixture
def panel_factory():
    return make_panel


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
