import numpy as np
import pytest

from sspmdp import GridSpec, SspMdp, grid_to_mdp

ACCEPTANCE_LINES = []


def chain2(p_goal=1.0, goal_cost=0.0):
    """CHAIN-2: state 0 reaches goal 1 at cost 1."""
    entries = [(0, 0, 1, p_goal, 1.0), (1, 0, 1, 1.0, goal_cost)]
    return SspMdp.from_entries(2, 1, entries, goals=[1], start=0)


def slip_chain():
    """SLIP-CHAIN: from 0, half the time reach the goal, half stay; cost 1 each."""
    entries = [(0, 0, 1, 0.5, 1.0), (0, 0, 0, 0.5, 1.0), (1, 0, 1, 1.0, 0.0)]
    return SspMdp.from_entries(2, 1, entries, goals=[1], start=0)


def two_action():
    """TWO-ACTION: a0 costs 3 straight to goal; a1 costs 1 and reaches it half the time."""
    entries = [(0, 0, 1, 1.0, 3.0),
               (0, 1, 1, 0.5, 1.0), (0, 1, 0, 0.5, 1.0),
               (1, 0, 1, 1.0, 0.0), (1, 1, 1, 1.0, 0.0)]
    return SspMdp.from_entries(2, 2, entries, goals=[1], start=0)


def grid4(p_slip=0.0):
    return grid_to_mdp(GridSpec(4, 4, (0, 0), frozenset({(3, 3)}), p_slip=p_slip))


@pytest.fixture
def chain():
    return chain2()


@pytest.fixture
def slip():
    return slip_chain()


@pytest.fixture
def twoact():
    return two_action()


@pytest.fixture
def grid_det():
    return grid4(0.0)


def record_acceptance(label, passed, detail=""):
    ACCEPTANCE_LINES.append(f"[{'PASS' if passed else 'FAIL'}] {label}" + (f": {detail}" if detail else ""))


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def random_corpus(seed, count, min_actions=1):
    """The acceptance corpus: |S| in [2, 20], |A| in [1, 4]."""
    from sspmdp import random_ssp
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        n = int(rng.integers(2, 21))
        m = int(rng.integers(min_actions, 5))
        out.append(random_ssp(rng, n, m))
    return out
