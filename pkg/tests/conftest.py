import math
from pathlib import Path

import pytest

from advcal.priors import DiscretePmf

SCENARIOS = Path(__file__).resolve().parents[1] / "src" / "advcal" / "scenarios"
GOLDEN = Path(__file__).resolve().parent / "golden"

CAT_COLORS = {"red": 0.2, "white": 0.1, "tabby": 0.25, "black": 0.4, "tortoise": 0.05}
CAT_GENDERS = {"M": 0.5, "F": 0.5}

ACCEPTANCE_LINES = []


def cat_joint():
    return {(c, g): mc * mg for c, mc in CAT_COLORS.items() for g, mg in CAT_GENDERS.items()}


@pytest.fixture
def cats_and_masses():
    return sorted(cat_joint().values())


@pytest.fixture
def cats_or_masses():
    out = []
    for c, mc in CAT_COLORS.items():
        for g, mg in CAT_GENDERS.items():
            out.append(1.0 - (1.0 - mc) * (1.0 - mg))
    return sorted(out)


@pytest.fixture
def cat_pmf():
    return DiscretePmf(sorted(cat_joint().items()))


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
