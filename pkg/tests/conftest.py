from __future__ import annotations

import functools

import pytest

from dualcontrol.dual import solve_dual
from dualcontrol.market import MarketParams, SimConfig, simulate_states
from dualcontrol.preferences import DualCrraPrefs

PROFILES = {"g1": DualCrraPrefs(5, 5), "g2": DualCrraPrefs(10, 2), "g3": DualCrraPrefs(15, 3)}
HORIZONS = (5.0, 10.0)
DEFAULT_SEED = SimConfig().seed

# Lines printed in the terminal summary, one per acceptance criterion.
CRITERION_LINES: list[str] = []


@pytest.fixture(scope="session")
def market() -> MarketParams:
    return MarketParams()


@functools.lru_cache(maxsize=None)
def dual_solution(profile: str, horizon: float):
    return solve_dual(MarketParams(), PROFILES[profile], 1.0, horizon)


@functools.lru_cache(maxsize=2)
def base_paths(horizon: float, n_paths: int = 10_000, seed: int = DEFAULT_SEED):
    """Paths under the market's own ``lambda_u``; other shadow prices are
    obtained by exact re-weighting."""
    return simulate_states(MarketParams(), SimConfig(n_paths, 0.05, horizon, seed))


def pytest_terminal_summary(terminalreporter):
    if CRITERION_LINES:
        terminalreporter.section("acceptance criteria")
        for line in CRITERION_LINES:
            terminalreporter.write_line(line)
