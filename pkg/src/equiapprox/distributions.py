"""Game generators: i.i.d. uniform payoffs, orbit distributions, named games."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .game import CapacityError, Game, GameShape, permute_game, random_game_permutation

RNG_ALGORITHM = "philox"
MAX_JOINT_ACTIONS = 10**6


def make_rng(seed: int) -> np.random.Generator:
    """Counter-based generator; the algorithm name is recorded as ``RNG_ALGORITHM``."""
    return np.random.Generator(np.random.Philox(seed))


class DistributionKind(str, enum.Enum):
    UNIFORM = "uniform"
    ORBIT = "orbit"
    NAMED = "named"


@dataclass
class DistributionSpec:
    """What to sample.

    ``ORBIT`` applies an independent uniform permutation per player to a base
    game. With ``base=None`` every sample draws a fresh i.i.d. uniform base
    first, which gives a permutation-invariant distribution with full support.
    ``NAMED`` always returns ``named_game(name, **params)``.
    """

    kind: DistributionKind
    shape: GameShape | None = None
    seed: int = 0
    base: Game | Sequence[Game] | None = None
    name: str | None = None
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        self.kind = DistributionKind(self.kind)
        if self.kind is DistributionKind.NAMED:
            if self.name is None:
                raise ValueError("named distribution needs a game name")
            game = named_game(self.name, **self.params)
            if self.shape is not None and self.shape != game.shape:
                raise ValueError(f"named game {self.name} has shape {game.shape}, not {self.shape}")
            self.shape = game.shape
            return
        if isinstance(self.base, Game):
            self.base = [self.base]
        if self.base is not None:
            if not self.base:
                raise ValueError("orbit distribution needs at least one base game")
            shapes = {g.shape for g in self.base}
            if len(shapes) != 1 or (self.shape is not None and self.shape not in shapes):
                raise ValueError("base games must share the distribution shape")
            self.shape = self.base[0].shape
        if self.kind is DistributionKind.UNIFORM and self.base is not None:
            raise ValueError("uniform distribution takes no base game")
        if self.shape is None:
            raise ValueError("distribution needs a shape")
        if self.shape.num_joint_actions > MAX_JOINT_ACTIONS:
            raise CapacityError(f"shape {self.shape} has too many joint actions to sample")


def _uniform(shape: GameShape, rng) -> Game:
    return Game(rng.random((shape.num_players,) + shape.action_counts))


def sample(spec: DistributionSpec, count: int) -> list[Game]:
    if count < 1:
        raise ValueError("count must be at least 1")
    rng = make_rng(spec.seed)
    if spec.kind is DistributionKind.NAMED:
        game = named_game(spec.name, **spec.params)
        return [game] * count
    if spec.kind is DistributionKind.UNIFORM:
        return [_uniform(spec.shape, rng) for _ in range(count)]
    games = []
    for _ in range(count):
        if spec.base is None:
            base = _uniform(spec.shape, rng)
        else:
            base = spec.base[int(rng.integers(len(spec.base)))]
        games.append(permute_game(base, random_game_permutation(spec.shape, rng)))
    return games


# -- named games ---------------------------------------------------------------

def identity2x2() -> Game:
    eye = np.eye(2)
    return Game.from_bimatrix(eye, eye)


def matching_pennies() -> Game:
    eye = np.eye(2)
    return Game.from_bimatrix(eye, 1.0 - eye)


def swr3x3(eps: float = 0.05) -> Game:
    """Two coordinated optima (1,1) plus a dominant-looking third action."""
    if not 0.0 < eps < 0.5:
        raise ValueError("eps must lie in (0, 0.5)")
    h = 0.5 + eps
    row = np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [h, h, eps]])
    return Game.from_bimatrix(row, row.T)


def pd2x2(eps: float = 0.05) -> Game:
    """The 3x3 game with actions 0 and 1 merged into their uniform mix."""
    if not 0.0 < eps < 0.5:
        raise ValueError("eps must lie in (0, 0.5)")
    row = np.array([[0.5, 0.0], [0.5 + eps, eps]])
    return Game.from_bimatrix(row, row.T)


def coordination(num_players: int = 2, num_actions: int = 2) -> Game:
    """Everyone gets 1 when all actions agree, else 0."""
    shape = GameShape.of([num_actions] * num_players)
    u = np.zeros(shape.action_counts)
    for a in range(num_actions):
        u[(a,) * num_players] = 1.0
    return Game(np.broadcast_to(u, (num_players,) + shape.action_counts).copy())


NAMED_GAMES = {
    "identity2x2": identity2x2,
    "matching_pennies": matching_pennies,
    "swr3x3": swr3x3,
    "pd2x2": pd2x2,
    "coordination": coordination,
}

_PARAM_ALIASES = {"epsilon": "eps", "n": "num_players", "N": "num_players", "m": "num_actions", "M": "num_actions"}


def named_game(name: str, **params) -> Game:
    try:
        build = NAMED_GAMES[name]
    except KeyError:
        raise ValueError(f"unknown game {name!r}; known: {', '.join(sorted(NAMED_GAMES))}") from None
    params = {_PARAM_ALIASES.get(k, k): v for k, v in params.items()}
    return build(**params)
