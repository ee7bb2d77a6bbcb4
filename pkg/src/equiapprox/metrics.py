"""Exploitability, equilibrium approximation, NashConv and social welfare.

Per-player exploitability is the best deviation gain over the current
expected payoff. For correlated strategies under coarse deviations it can be
negative (the correlation beats every independent deviation); that sign is
kept as is. ``approximation`` is the maximum over players.
"""

from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from .game import (
    CapacityError,
    DimensionError,
    Game,
    JointStrategy,
    ProductStrategy,
)

NEG_SLACK = 1e-12

Strategy = Union[ProductStrategy, JointStrategy]


class SolutionConcept(str, enum.Enum):
    NE = "NE"
    CE = "CE"
    CCE = "CCE"

    @classmethod
    def parse(cls, value) -> "SolutionConcept":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).upper())
        except ValueError:
            raise ValueError(f"unknown solution concept {value!r}; expected NE, CE or CCE") from None


@dataclass(frozen=True)
class StrategyModification:
    """Map ``a_i -> map[a_i]`` applied to a player's recommended action."""

    player: int
    map: tuple[int, ...]

    def __post_init__(self):
        m = len(self.map)
        if any(not 0 <= int(v) < m for v in self.map):
            raise ValueError(f"modification values must lie in 0..{m - 1}")
        object.__setattr__(self, "map", tuple(int(v) for v in self.map))


def _check_product(game: Game, sigma: ProductStrategy):
    if sigma.action_counts != game.action_counts:
        raise DimensionError(
            f"strategy action counts {sigma.action_counts} do not match game {game.action_counts}"
        )


def _check_joint(game: Game, pi: JointStrategy):
    if tuple(pi.action_counts) != game.action_counts:
        raise DimensionError(
            f"joint strategy shape {pi.action_counts} does not match game {game.action_counts}"
        )


def _check_player(game: Game, player: int):
    if not 0 <= player < game.num_players:
        raise DimensionError(f"player {player} out of range for {game.num_players} players")


# -- array-level kernels -------------------------------------------------------
# These take raw arrays and skip validation; the public functions below wrap them.

def contract(tensor: np.ndarray, vecs: Sequence[np.ndarray], keep: Sequence[int] = ()) -> np.ndarray:
    """Contract each axis ``k`` not in ``keep`` against ``vecs[k]``."""
    out = tensor
    keep = set(keep)
    for k in reversed(range(len(vecs))):
        if k not in keep:
            out = np.tensordot(out, vecs[k], axes=([k], [0]))
    return out


def product_deviation_payoffs(payoffs: np.ndarray, vecs: Sequence[np.ndarray], player: int) -> np.ndarray:
    """u_i(a', sigma_-i) for every pure action a' of ``player``."""
    return contract(payoffs[player], vecs, keep=(player,))


def joint_deviation_payoffs(payoffs: np.ndarray, probs: np.ndarray, player: int) -> np.ndarray:
    """u_i(a', pi_-i) for every pure action a'; pi_-i is the opponents' marginal."""
    others = probs.sum(axis=player)
    u = np.moveaxis(payoffs[player], player, 0)
    return np.tensordot(u, others, axes=others.ndim)


def ce_gain_matrix(payoffs: np.ndarray, probs: np.ndarray, player: int) -> np.ndarray:
    """gain[r, a'] = sum over a_-i of pi(r, a_-i) * u_i(a', a_-i)."""
    m = probs.shape[player]
    p = np.moveaxis(probs, player, 0).reshape(m, -1)
    u = np.moveaxis(payoffs[player], player, 0).reshape(m, -1)
    return p @ u.T


def product_exploitabilities(payoffs: np.ndarray, vecs: Sequence[np.ndarray]) -> np.ndarray:
    n = len(vecs)
    out = np.empty(n)
    for i in range(n):
        dev = product_deviation_payoffs(payoffs, vecs, i)
        out[i] = dev.max() - dev @ vecs[i]
    return out


def joint_exploitabilities(payoffs: np.ndarray, probs: np.ndarray) -> np.ndarray:
    n = probs.ndim
    out = np.empty(n)
    for i in range(n):
        dev = joint_deviation_payoffs(payoffs, probs, i)
        out[i] = dev.max() - float(np.sum(payoffs[i] * probs))
    return out


def joint_ce_exploitabilities(payoffs: np.ndarray, probs: np.ndarray) -> np.ndarray:
    n = probs.ndim
    out = np.empty(n)
    for i in range(n):
        gain = ce_gain_matrix(payoffs, probs, i)
        out[i] = gain.max(axis=1).sum() - np.trace(gain)
    return out


# -- public API ----------------------------------------------------------------

def expected_utility_joint(game: Game, player: int, pi: JointStrategy) -> float:
    _check_player(game, player)
    _check_joint(game, pi)
    return float(np.sum(game.payoffs[player] * pi.probs))


def expected_utility_product(game: Game, player: int, sigma: ProductStrategy) -> float:
    _check_player(game, player)
    _check_product(game, sigma)
    return float(contract(game.payoffs[player], sigma.per_player))


def expected_utility(game: Game, player: int, strategy: Strategy) -> float:
    if isinstance(strategy, ProductStrategy):
        return expected_utility_product(game, player, strategy)
    return expected_utility_joint(game, player, strategy)


def marginal(pi: JointStrategy, player: int) -> np.ndarray:
    if not 0 <= player < pi.probs.ndim:
        raise DimensionError(f"player {player} out of range")
    axes = tuple(k for k in range(pi.probs.ndim) if k != player)
    return pi.probs.sum(axis=axes)


def deviation_payoffs(game: Game, player: int, others: Strategy) -> np.ndarray:
    """Expected payoff of each pure action of ``player`` against ``others``.

    For a product strategy the player's own entry is ignored; for a joint
    strategy the opponents play their (correlated) marginal.
    """
    _check_player(game, player)
    if isinstance(others, ProductStrategy):
        _check_product(game, others)
        return product_deviation_payoffs(game.payoffs, others.per_player, player)
    _check_joint(game, others)
    return joint_deviation_payoffs(game.payoffs, others.probs, player)


def best_response_value(game: Game, player: int, others: Strategy) -> float:
    return float(deviation_payoffs(game, player, others).max())


def exploitability_ne(game: Game, sigma: ProductStrategy, player: int) -> float:
    _check_player(game, player)
    _check_product(game, sigma)
    dev = product_deviation_payoffs(game.payoffs, sigma.per_player, player)
    value = float(dev.max() - dev @ sigma[player])
    assert value >= -NEG_SLACK, f"negative NE exploitability {value}"
    return value


def exploitability_cce(game: Game, pi: JointStrategy, player: int) -> float:
    """Coarse deviation gain; negative values are returned unclamped."""
    _check_player(game, player)
    _check_joint(game, pi)
    dev = joint_deviation_payoffs(game.payoffs, pi.probs, player)
    return float(dev.max() - np.sum(game.payoffs[player] * pi.probs))


def exploitability_ce(game: Game, pi: JointStrategy, player: int) -> float:
    """Best strategy-modification gain, one best replacement per recommendation."""
    _check_player(game, player)
    _check_joint(game, pi)
    gain = ce_gain_matrix(game.payoffs, pi.probs, player)
    return float(gain.max(axis=1).sum() - np.trace(gain))


def modification_value(game: Game, pi: JointStrategy, phi: StrategyModification) -> float:
    """sum_a pi(a) u_i(phi(a_i), a_-i)."""
    gain = ce_gain_matrix(game.payoffs, pi.probs, phi.player)
    return float(sum(gain[r, a] for r, a in enumerate(phi.map)))


def exploitability_ce_enumerated(
    game: Game, pi: JointStrategy, player: int, limit: int = 10**6
) -> float:
    """Same quantity as ``exploitability_ce`` by brute force over all m^m maps."""
    _check_player(game, player)
    _check_joint(game, pi)
    m = game.action_counts[player]
    if m**m > limit:
        raise CapacityError(f"{m}^{m} strategy modifications exceed limit {limit}")
    base = float(np.sum(game.payoffs[player] * pi.probs))
    best = -np.inf
    for phi in itertools.product(range(m), repeat=m):
        best = max(best, modification_value(game, pi, StrategyModification(player, phi)))
    return best - base


def _concept_strategy(game: Game, strategy, concept: SolutionConcept):
    concept = SolutionConcept.parse(concept)
    if concept is SolutionConcept.NE:
        if not isinstance(strategy, ProductStrategy):
            raise TypeError("NE approximation needs a ProductStrategy")
        _check_product(game, strategy)
    else:
        if not isinstance(strategy, JointStrategy):
            raise TypeError(f"{concept.value} approximation needs a JointStrategy")
        _check_joint(game, strategy)
    return concept


def exploitabilities(game: Game, strategy: Strategy, concept) -> np.ndarray:
    """Per-player exploitability vector for the given concept."""
    concept = _concept_strategy(game, strategy, concept)
    if concept is SolutionConcept.NE:
        values = product_exploitabilities(game.payoffs, strategy.per_player)
        assert values.min() >= -NEG_SLACK, f"negative NE exploitability {values.min()}"
        return values
    if concept is SolutionConcept.CCE:
        return joint_exploitabilities(game.payoffs, strategy.probs)
    return joint_ce_exploitabilities(game.payoffs, strategy.probs)


def approximation(game: Game, strategy: Strategy, concept) -> float:
    """Maximum exploitability over players; ``strategy`` is an eps-solution iff this <= eps."""
    return float(exploitabilities(game, strategy, concept).max())


def nashconv(game: Game, strategy: Strategy, concept) -> float:
    """Sum of per-player exploitabilities, each clamped at zero."""
    return float(np.clip(exploitabilities(game, strategy, concept), 0.0, None).sum())


def social_welfare(game: Game, strategy: Strategy) -> float:
    if isinstance(strategy, ProductStrategy):
        _check_product(game, strategy)
        return float(sum(contract(game.payoffs[i], strategy.per_player) for i in range(game.num_players)))
    _check_joint(game, strategy)
    return float(np.sum(game.payoffs * strategy.probs[None]))


# -- loss with subgradient -----------------------------------------------------

def _argmax_margin(values: np.ndarray) -> tuple[int, float]:
    flat = values.ravel()
    k = int(np.argmax(flat))  # lowest index on ties
    if flat.size == 1:
        return k, np.inf
    rest = np.delete(flat, k)
    return k, float(flat[k] - rest.max())


def product_loss_grad(payoffs: np.ndarray, vecs: Sequence[np.ndarray]):
    """NE approximation of ``vecs`` with a subgradient w.r.t. each vector.

    Returns ``(value, grads, margin)``; the gradient follows the maximising
    (player, deviation) pair, lowest flat index on ties, and ``margin`` is the
    gap to the runner-up candidate.
    """
    n = len(vecs)
    cand, devs, own = [], [], []
    for i in range(n):
        dev = product_deviation_payoffs(payoffs, vecs, i)
        devs.append(dev)
        own.append(float(dev @ vecs[i]))
        cand.append(dev - own[-1])
    flat = np.concatenate(cand)
    k, margin = _argmax_margin(flat)
    offsets = np.cumsum([0] + [len(v) for v in vecs])
    i = int(np.searchsorted(offsets, k, side="right") - 1)
    a_star = k - offsets[i]
    grads = []
    for j in range(n):
        if j == i:
            grads.append(-devs[i])
            continue
        # d/d sigma_j of u_i(a*, sigma_-i) - u_i(sigma)
        u_dev = np.take(payoffs[i], [a_star], axis=i)
        sub = [vecs[k2] if k2 != i else np.ones(1) for k2 in range(n)]
        g_dev = contract(u_dev, sub, keep=(j,)).ravel()
        g_own = contract(payoffs[i], vecs, keep=(j,))
        grads.append(g_dev - g_own)
    return float(flat[k]), grads, margin


def joint_loss_grad(payoffs: np.ndarray, probs: np.ndarray):
    """CCE approximation of ``probs`` with a subgradient w.r.t. the tensor."""
    n = probs.ndim
    cand = []
    for i in range(n):
        dev = joint_deviation_payoffs(payoffs, probs, i)
        cand.append(dev - float(np.sum(payoffs[i] * probs)))
    flat = np.concatenate(cand)
    k, margin = _argmax_margin(flat)
    offsets = np.cumsum([0] + [probs.shape[i] for i in range(n)])
    i = int(np.searchsorted(offsets, k, side="right") - 1)
    a_star = k - offsets[i]
    dev_tensor = np.take(payoffs[i], [a_star], axis=i)  # broadcasts along axis i
    grad = np.broadcast_to(dev_tensor, probs.shape) - payoffs[i]
    return float(flat[k]), np.array(grad), margin
