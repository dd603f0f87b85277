import numpy as np
import pytest

from macrocast.data_model import FEATURES, TARGETS, MonthStamp, Panel, month_range
from macrocast.ingest import write_panel_csv
from macrocast.synthetic import make_panel


def constant_panel(start=MonthStamp(2005, 1), n=24, fill=None) -> Panel:
    """Panel whose series are simple ramps, handy for hand-checked indexing."""
    months = month_range(start, start.shift(n - 1))
    data = {}
    for j, name in enumerate(TARGETS + FEATURES):
        data[name] = fill(name, j, n) if fill else 100.0 * (j + 1) + np.arange(n, dtype=float)
    return Panel(months[0], months[-1], data)


@pytest.fixture
def synthetic_panel():
    return make_panel(120, seed=7)


@pytest.fixture
def panel_csv(tmp_path, synthetic_panel):
    return write_panel_csv(synthetic_panel, tmp_path / "panel.csv")


def write_fred_csv(path, rows, column="VALUE", header="observation_date"):
    lines = [f"{header},{column}"] + [f"{d},{v}" for d, v in rows]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


# one line per acceptance criterion, echoed at the end of the session
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
