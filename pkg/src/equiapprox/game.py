"""Normal-form games, strategies and the per-player permutation group action.

Joint actions are 0-based and laid out row-major: payoff tensor axis ``k``
indexes player ``k``'s action, so player 0 is the slowest axis.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

SIMPLEX_TOL = 1e-9
# exact orbit enumeration allowed while m! stays at or below this
ORBIT_ENUM_LIMIT = 720


class DimensionError(ValueError):
    """Shapes of games, strategies or permutations do not agree."""


class CapacityError(RuntimeError):
    """A requested enumeration exceeds its configured size limit."""


@dataclass(frozen=True)
class GameShape:
    num_players: int
    action_counts: tuple[int, ...]

    def __post_init__(self):
        counts = tuple(int(m) for m in self.action_counts)
        object.__setattr__(self, "action_counts", counts)
        if self.num_players < 2:
            raise DimensionError(f"need at least 2 players, got {self.num_players}")
        if len(counts) != self.num_players:
            raise DimensionError(
                f"{len(counts)} action counts given for {self.num_players} players"
            )
        if any(m < 1 for m in counts):
            raise DimensionError(f"action counts must be >= 1, got {counts}")
        if math.prod(counts) * self.num_players > np.iinfo(np.intp).max:
            raise CapacityError(f"joint action space {counts} is not addressable")

    @classmethod
    def of(cls, action_counts: Sequence[int]) -> "GameShape":
        return cls(len(action_counts), tuple(action_counts))

    @property
    def num_joint_actions(self) -> int:
        return math.prod(self.action_counts)

    def __str__(self):
        return "x".join(str(m) for m in self.action_counts)


@dataclass(frozen=True, eq=False)
class Game:
    """Payoff bundle ``payoffs[i]`` = player i's tensor over joint actions."""

    payoffs: np.ndarray
    shape: GameShape = field(init=False)

    def __post_init__(self):
        u = np.array(self.payoffs, dtype=float)
        if u.ndim < 3:
            raise DimensionError("payoffs must have shape (n, m_1, ..., m_n) with n >= 2")
        n = u.shape[0]
        if u.ndim != n + 1:
            raise DimensionError(
                f"{n} payoff tensors must each have {n} axes, got array of shape {u.shape}"
            )
        if not np.all(np.isfinite(u)):
            raise ValueError("payoffs must be finite")
        if u.min() < 0.0 or u.max() > 1.0:
            raise ValueError(
                "payoff entries must lie in [0, 1]; use Game.normalized() to rescale"
            )
        u.setflags(write=False)
        object.__setattr__(self, "payoffs", u)
        object.__setattr__(self, "shape", GameShape(n, u.shape[1:]))

    @classmethod
    def normalized(cls, payoffs) -> "Game":
        """Affinely rescale all entries jointly onto [0, 1].

        A constant payoff array maps to all zeros.
        """
        u = np.asarray(payoffs, dtype=float)
        lo, hi = u.min(), u.max()
        if hi > lo:
            u = (u - lo) / (hi - lo)
        else:
            u = np.zeros_like(u)
        return cls(u)

    @classmethod
    def from_bimatrix(cls, row, col) -> "Game":
        return cls(np.stack([np.asarray(row, float), np.asarray(col, float)]))

    @property
    def num_players(self) -> int:
        return self.shape.num_players

    @property
    def action_counts(self) -> tuple[int, ...]:
        return self.shape.action_counts

    def __eq__(self, other):
        if not isinstance(other, Game):
            return NotImplemented
        return self.payoffs.shape == other.payoffs.shape and bool(
            np.array_equal(self.payoffs, other.payoffs)
        )

    def __hash__(self):
        return hash((self.payoffs.shape, self.payoffs.tobytes()))

    def __repr__(self):
        return f"Game(shape={self.shape}, payoffs={self.payoffs.tolist()!r})"


def _clean_simplex(vec, what: str) -> np.ndarray:
    v = np.array(vec, dtype=float)
    if not np.all(np.isfinite(v)):
        raise ValueError(f"{what} has non-finite entries")
    if v.min() < -SIMPLEX_TOL:
        raise ValueError(f"{what} has negative entry {v.min()!r}")
    total = v.sum()
    if abs(total - 1.0) > SIMPLEX_TOL:
        raise ValueError(f"{what} sums to {total!r}, not 1")
    v = np.clip(v, 0.0, None)
    v = v / v.sum()
    v.setflags(write=False)
    return v


@dataclass(frozen=True, eq=False)
class ProductStrategy:
    """One mixed strategy per player."""

    per_player: tuple[np.ndarray, ...]

    def __post_init__(self):
        vecs = tuple(
            _clean_simplex(np.ravel(v), f"strategy of player {i}")
            for i, v in enumerate(self.per_player)
        )
        object.__setattr__(self, "per_player", vecs)

    @classmethod
    def uniform(cls, shape: GameShape) -> "ProductStrategy":
        return cls(tuple(np.full(m, 1.0 / m) for m in shape.action_counts))

    @classmethod
    def pure(cls, shape: GameShape, action: Sequence[int]) -> "ProductStrategy":
        return cls(tuple(np.eye(m)[a] for m, a in zip(shape.action_counts, action)))

    @property
    def action_counts(self) -> tuple[int, ...]:
        return tuple(len(v) for v in self.per_player)

    def __getitem__(self, i) -> np.ndarray:
        return self.per_player[i]

    def __len__(self):
        return len(self.per_player)

    def __iter__(self):
        return iter(self.per_player)

    def to_joint(self) -> "JointStrategy":
        return JointStrategy(outer(self.per_player))

    def distance(self, other: "ProductStrategy") -> float:
        """Max over players of the L1 distance between their strategies."""
        return max(float(np.abs(a - b).sum()) for a, b in zip(self, other))

    def __repr__(self):
        return f"ProductStrategy({[v.tolist() for v in self.per_player]!r})"


@dataclass(frozen=True, eq=False)
class JointStrategy:
    """A (possibly correlated) distribution over joint actions."""

    probs: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=float)
        flat = _clean_simplex(p.ravel(), "joint strategy")
        out = flat.reshape(p.shape)
        out.setflags(write=False)
        object.__setattr__(self, "probs", out)

    @classmethod
    def uniform(cls, shape: GameShape) -> "JointStrategy":
        return cls(np.full(shape.action_counts, 1.0 / shape.num_joint_actions))

    @classmethod
    def point_mass(cls, shape: GameShape, action: Sequence[int]) -> "JointStrategy":
        p = np.zeros(shape.action_counts)
        p[tuple(action)] = 1.0
        return cls(p)

    @classmethod
    def uniform_over(cls, shape: GameShape, actions: Iterable[Sequence[int]]) -> "JointStrategy":
        p = np.zeros(shape.action_counts)
        for a in actions:
            p[tuple(a)] += 1.0
        return cls(p / p.sum())

    @property
    def action_counts(self) -> tuple[int, ...]:
        return self.probs.shape

    def distance(self, other: "JointStrategy") -> float:
        return float(np.abs(self.probs - other.probs).sum())

    def __repr__(self):
        return f"JointStrategy({self.probs.tolist()!r})"


def outer(vectors: Sequence[np.ndarray]) -> np.ndarray:
    """Outer product of per-player vectors as an n-axis tensor."""
    out = np.asarray(vectors[0], dtype=float)
    for v in vectors[1:]:
        out = np.multiply.outer(out, v)
    return out


def _is_permutation(arr: np.ndarray) -> bool:
    return arr.ndim == 1 and np.array_equal(np.sort(arr), np.arange(arr.size))


@dataclass(frozen=True, eq=False)
class PlayerPermutation:
    """Bijection ``a -> map[a]`` on one player's actions."""

    player: int
    map: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.map, dtype=np.intp)
        if not _is_permutation(arr):
            raise ValueError(f"{self.map!r} is not a permutation of 0..{arr.size - 1}")
        arr.setflags(write=False)
        object.__setattr__(self, "map", arr)

    @property
    def size(self) -> int:
        return self.map.size

    def inverse(self) -> "PlayerPermutation":
        return PlayerPermutation(self.player, np.argsort(self.map))

    def is_identity(self) -> bool:
        return bool(np.array_equal(self.map, np.arange(self.size)))

    def moved_actions(self) -> list[int]:
        """Actions not fixed by the permutation."""
        return [a for a in range(self.size) if self.map[a] != a]

    def __eq__(self, other):
        if not isinstance(other, PlayerPermutation):
            return NotImplemented
        return self.player == other.player and np.array_equal(self.map, other.map)

    def __hash__(self):
        return hash((self.player, tuple(self.map)))

    def __repr__(self):
        return f"PlayerPermutation({self.player}, {self.map.tolist()})"


class GamePermutation:
    """Product of per-player action permutations; identity where absent.

    Permutations of different players act on different axes, so they commute
    and the product is well defined regardless of order.
    """

    def __init__(self, perms: Iterable[PlayerPermutation] = ()):
        table: dict[int, PlayerPermutation] = {}
        for p in perms:
            if p.player in table:
                raise ValueError(f"two permutations given for player {p.player}")
            table[p.player] = p
        self._perms = dict(sorted(table.items()))

    @classmethod
    def identity(cls) -> "GamePermutation":
        return cls()

    @classmethod
    def from_maps(cls, maps: Sequence[Sequence[int] | None]) -> "GamePermutation":
        """One map (or None for identity) per player, in player order."""
        return cls(PlayerPermutation(i, m) for i, m in enumerate(maps) if m is not None)

    @property
    def per_player(self) -> dict[int, PlayerPermutation]:
        return dict(self._perms)

    def get(self, player: int) -> PlayerPermutation | None:
        return self._perms.get(player)

    def inverse(self) -> "GamePermutation":
        return GamePermutation(p.inverse() for p in self._perms.values())

    def restrict(self, players: Iterable[int]) -> "GamePermutation":
        keep = set(players)
        return GamePermutation(p for i, p in self._perms.items() if i in keep)

    def maps(self, shape: GameShape) -> list[np.ndarray]:
        out = []
        for i, m in enumerate(shape.action_counts):
            p = self._perms.get(i)
            out.append(np.arange(m) if p is None else p.map)
        return out

    def is_identity(self) -> bool:
        return all(p.is_identity() for p in self._perms.values())

    def check_shape(self, shape: GameShape):
        for i, p in self._perms.items():
            if not 0 <= i < shape.num_players:
                raise DimensionError(f"permutation for player {i} in a {shape.num_players}-player game")
            if p.size != shape.action_counts[i]:
                raise DimensionError(
                    f"permutation of length {p.size} for player {i} with {shape.action_counts[i]} actions"
                )

    def __eq__(self, other):
        if not isinstance(other, GamePermutation):
            return NotImplemented
        mine = {i: p for i, p in self._perms.items() if not p.is_identity()}
        theirs = {i: p for i, p in other._perms.items() if not p.is_identity()}
        return mine == theirs

    def __hash__(self):
        return hash(tuple((i, tuple(p.map)) for i, p in self._perms.items() if not p.is_identity()))

    def __repr__(self):
        inner = ", ".join(f"{i}: {p.map.tolist()}" for i, p in self._perms.items())
        return f"GamePermutation({{{inner}}})"


def _as_game_permutation(rho) -> GamePermutation:
    if isinstance(rho, GamePermutation):
        return rho
    if isinstance(rho, PlayerPermutation):
        return GamePermutation([rho])
    raise TypeError(f"expected GamePermutation or PlayerPermutation, got {type(rho).__name__}")


def _permute_axes(tensor: np.ndarray, rho: GamePermutation, offset: int = 0) -> np.ndarray:
    # (rho t)(a_i, a_-i) = t(rho_i^{-1}(a_i), a_-i): gather with the inverse map
    out = tensor
    for i, p in rho.per_player.items():
        out = np.take(out, np.argsort(p.map), axis=i + offset)
    return out


def permute_game(game: Game, rho) -> Game:
    rho = _as_game_permutation(rho)
    rho.check_shape(game.shape)
    return Game(_permute_axes(game.payoffs, rho, offset=1))


def permute_joint(pi: JointStrategy, rho) -> JointStrategy:
    rho = _as_game_permutation(rho)
    rho.check_shape(GameShape.of(pi.action_counts))
    return JointStrategy(_permute_axes(pi.probs, rho))


def permute_product(sigma: ProductStrategy, rho) -> ProductStrategy:
    rho = _as_game_permutation(rho)
    rho.check_shape(GameShape.of(sigma.action_counts))
    vecs = list(sigma.per_player)
    for i, p in rho.per_player.items():
        vecs[i] = vecs[i][np.argsort(p.map)]
    return ProductStrategy(tuple(vecs))


def enumerate_permutations(m: int, limit: int = ORBIT_ENUM_LIMIT) -> list[tuple[int, ...]]:
    """All m! permutations of range(m) in lexicographic order."""
    if math.factorial(m) > limit:
        raise CapacityError(
            f"{m}! = {math.factorial(m)} permutations exceeds the enumeration limit {limit}; "
            "use sampled orbit averaging instead"
        )
    return list(itertools.permutations(range(m)))


def enumerate_game_permutations(
    shape: GameShape, players: Iterable[int] | None = None, limit: int = ORBIT_ENUM_LIMIT
) -> list[GamePermutation]:
    """Every element of the product group over ``players`` (default: all).

    Ordered lexicographically with player 0's permutation varying slowest.
    """
    players = list(range(shape.num_players)) if players is None else sorted(players)
    choices = [enumerate_permutations(shape.action_counts[i], limit) for i in players]
    return [
        GamePermutation(PlayerPermutation(i, m) for i, m in zip(players, combo))
        for combo in itertools.product(*choices)
    ]


def random_game_permutation(
    shape: GameShape, rng: np.random.Generator, players: Iterable[int] | None = None
) -> GamePermutation:
    players = range(shape.num_players) if players is None else players
    return GamePermutation(
        PlayerPermutation(i, rng.permutation(shape.action_counts[i])) for i in players
    )


def orbit(game: Game, players: Iterable[int] | None = None) -> list[Game]:
    """Distinct images of ``game`` under the product permutation group."""
    seen: dict[Game, None] = {}
    for rho in enumerate_game_permutations(game.shape, players):
        seen.setdefault(permute_game(game, rho))
    return list(seen)


def is_invariant(game: Game, rho, atol: float = 0.0) -> bool:
    """True when ``rho u == u`` (exactly by default)."""
    permuted = permute_game(game, rho).payoffs
    return bool(np.allclose(permuted, game.payoffs, rtol=0.0, atol=atol))
