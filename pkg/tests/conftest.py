import numpy as np
import pytest

from uswb.phy.ber import BerEstimate, BerTable


def synthetic_table(schemes=("ppm-bpsk", "ppm-ppm"), k_max=8, nh_max=15, ns_max=20, rule=None, trials=20000):
    """Table with a hand-made feasibility frontier: zero BER iff ``rule(k, h, s)``."""
    rule = rule or (lambda k, h, s: s * h >= 2 * k + 1 and s >= k)
    t = BerTable()
    for sc in schemes:
        for k in range(k_max + 1):
            for h in range(1, nh_max + 1):
                for s in range(1, ns_max + 1):
                    b = 0.0 if rule(k, h, s) else 1e-3
                    t.add(sc, k, h, s, BerEstimate(b, int(round(b * trials)), trials, 0.0))
    return t


@pytest.fixture(scope="session")
def fake_table():
    return synthetic_table()


@pytest.fixture(scope="session")
def bundled_table():
    from uswb._util import data_path

    path = data_path("ber_table.csv")
    if not path.exists():
        pytest.skip("bundled BER table not built")
    return BerTable.load(path)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# one line per acceptance criterion, printed after the run
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
