import numpy as np
import pytest

from equiapprox.game import Game, GameShape, JointStrategy, ProductStrategy


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def rand_game(rng, counts):
    shape = GameShape.of(counts)
    return Game(rng.random((shape.num_players,) + shape.action_counts))


def rand_product(rng, counts):
    return ProductStrategy(tuple(rng.dirichlet(np.ones(m)) for m in counts))


def rand_joint(rng, counts):
    return JointStrategy(rng.dirichlet(np.ones(int(np.prod(counts)))).reshape(counts))


# one PASS/FAIL line per acceptance check, echoed after the run
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance checks")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
