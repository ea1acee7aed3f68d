import sys

import numpy as np
import pytest

import consensus_irl as ci


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """Replay the acceptance checklist so its PASS/FAIL lines survive capture."""
    module = sys.modules.get("test_acceptance")
    lines = getattr(module, "REPORT_LINES", None) if module else None
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def small_world():
    return ci.generate_world(20, 3, 4, seed=11, horizon=8)


@pytest.fixture(scope="session")
def small_population(small_world):
    cfg = ci.PopulationConfig(n_trajectories=80, corrupted_fraction=0.3, seed=5)
    return ci.generate_population(small_world, cfg)


@pytest.fixture(scope="session")
def two_state():
    """2-state MDP: at s0, a0 self-loops (reward -1) and a1 jumps to s1 (+1)."""
    probs = np.zeros((2, 2, 2))
    probs[0, 0, 0] = 1.0
    probs[0, 1, 1] = 1.0
    probs[1, 0, 1] = 1.0
    probs[1, 1, 1] = 1.0
    transitions = ci.TransitionModel(probs, np.ones((2, 2), dtype=np.int64))
    reward = ci.RewardModel(np.array([-1.0, 1.0]))
    return transitions, reward
