import numpy as np
import pytest

from grouporder.data import MarketObservation, MarketPanel


def panel_from_rows(rows, covariate_names=None):
    """Panel from (market, agent, outcome[, covariates]) tuples, markets in first-seen order."""
    markets: dict[str, list] = {}
    for r in rows:
        m, a, y = r[:3]
        x = tuple(r[3]) if len(r) > 3 else ()
        markets.setdefault(m, []).append((a, float(y), x))
    return MarketPanel.from_markets([MarketObservation(m, tuple(e)) for m, e in markets.items()],
                                    covariate_names)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


_ACCEPTANCE: list[str] = []


@pytest.fixture
def acceptance(capsys):
    """Record one PASS/FAIL line per criterion; echoed live and in the final summary."""
    def record(number, ok, detail):
        line = f"CRITERION {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        _ACCEPTANCE.append(line)
        with capsys.disabled():
            print("\n" + line, flush=True)
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
