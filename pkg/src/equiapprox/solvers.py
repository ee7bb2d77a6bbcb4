"""Exact baseline solvers used as oracles.

* pure-equilibrium enumeration for any number of players
* support enumeration for bimatrix games
* maximum-welfare CE / CCE via the dense simplex in :mod:`equiapprox.simplex`
"""

from __future__ import annotations

import itertools
import logging
import math
import warnings

import numpy as np

from .game import CapacityError, DimensionError, Game, JointStrategy, ProductStrategy
from .metrics import SolutionConcept, approximation
from .simplex import LinearProgram, Status, simplex_solve

log = logging.getLogger(__name__)

PURE_TOL = 1e-12
SUPPORT_TOL = 1e-9
DEDUP_TOL = 1e-7


class DegenerateGameWarning(UserWarning):
    """Some support pair had a singular indifference system and was skipped."""


class SolverError(RuntimeError):
    pass


def enumerate_pure_ne(game: Game, limit: int = 10**6) -> list[tuple[int, ...]]:
    """Joint actions where no player has a strictly improving pure deviation."""
    if game.shape.num_joint_actions > limit:
        raise CapacityError(f"{game.shape.num_joint_actions} joint actions exceed limit {limit}")
    ok = np.ones(game.action_counts, dtype=bool)
    for i in range(game.num_players):
        u = game.payoffs[i]
        ok &= u >= u.max(axis=i, keepdims=True) - PURE_TOL
    return [tuple(int(a) for a in idx) for idx in np.argwhere(ok)]


def _indifference(payoff: np.ndarray, own: tuple, other: tuple):
    """Mix over ``other`` making every action in ``own`` yield the same value.

    ``payoff[a, b]`` is the payoff of own action a against other action b.
    Returns ``(mix, value)`` or ``None`` when the system has no unique solution.
    """
    k_own, k_other = len(own), len(other)
    M = np.zeros((k_own + 1, k_other + 1))
    M[:k_own, :k_other] = payoff[np.ix_(own, other)]
    M[:k_own, -1] = -1.0
    M[-1, :k_other] = 1.0
    rhs = np.zeros(k_own + 1)
    rhs[-1] = 1.0
    if k_own == k_other:
        try:
            sol = np.linalg.solve(M, rhs)
        except np.linalg.LinAlgError:
            return None
        if np.linalg.cond(M) > 1e12:
            return None
    else:
        sol, _, rank, _ = np.linalg.lstsq(M, rhs, rcond=None)
        if rank < k_other + 1 or np.abs(M @ sol - rhs).max() > SUPPORT_TOL:
            return None
    return sol[:-1], sol[-1]


def _support_pairs(m1: int, m2: int):
    equal = [(k, k) for k in range(1, min(m1, m2) + 1)]
    unequal = sorted(
        ((k1, k2) for k1 in range(1, m1 + 1) for k2 in range(1, m2 + 1) if k1 != k2),
        key=lambda p: (p[0] + p[1], p),
    )
    for k1, k2 in equal + unequal:
        for s1 in itertools.combinations(range(m1), k1):
            for s2 in itertools.combinations(range(m2), k2):
                yield s1, s2


def support_enumeration_bimatrix(game: Game, max_actions: int = 8) -> list[ProductStrategy]:
    """All Nash equilibria of a bimatrix game found by support enumeration.

    Equal-size support pairs are tried first, then unequal ones (which only
    contribute for degenerate games). Support pairs whose indifference
    system is singular are skipped and a :class:`DegenerateGameWarning` is
    raised, so the list can be incomplete for degenerate games.
    """
    if game.num_players != 2:
        raise DimensionError("support enumeration needs a two-player game")
    m1, m2 = game.action_counts
    if max(m1, m2) > max_actions:
        raise CapacityError(f"support enumeration limited to {max_actions} actions per player")
    A, B = game.payoffs
    found: list[ProductStrategy] = []
    skipped = 0
    for s1, s2 in _support_pairs(m1, m2):
        # column mix y on s2 equalises player 1 on s1; row mix x on s1 equalises player 2 on s2
        ry = _indifference(A, s1, s2)
        rx = _indifference(B.T, s2, s1)
        if ry is None or rx is None:
            if len(s1) == len(s2):
                skipped += 1
            continue
        (y_s, v), (x_s, w) = ry, rx
        if x_s.min() < -SUPPORT_TOL or y_s.min() < -SUPPORT_TOL:
            continue
        x = np.zeros(m1)
        y = np.zeros(m2)
        x[list(s1)] = np.clip(x_s, 0.0, None)
        y[list(s2)] = np.clip(y_s, 0.0, None)
        x /= x.sum()
        y /= y.sum()
        if (A @ y).max() > v + SUPPORT_TOL or (x @ B).max() > w + SUPPORT_TOL:
            continue
        sigma = ProductStrategy((x, y))
        if all(sigma.distance(other) >= DEDUP_TOL for other in found):
            found.append(sigma)
    if skipped:
        warnings.warn(
            f"{skipped} support pairs had singular indifference systems; enumeration may be incomplete",
            DegenerateGameWarning,
            stacklevel=2,
        )
    return found


def equilibrium_constraints(game: Game, concept) -> np.ndarray:
    """Rows ``g`` with ``g . vec(pi) <= 0`` defining the CE or CCE polytope."""
    concept = SolutionConcept.parse(concept)
    if concept is SolutionConcept.NE:
        raise ValueError("NE constraints are not linear in the joint strategy")
    rows = []
    for i in range(game.num_players):
        u = np.moveaxis(game.payoffs[i], i, 0)
        m = u.shape[0]
        if concept is SolutionConcept.CCE:
            for dev in range(m):
                g = np.broadcast_to(u[dev][None], u.shape) - u
                rows.append(np.moveaxis(g, 0, i).ravel())
        else:
            for rec in range(m):
                for dev in range(m):
                    if dev == rec:
                        continue
                    g = np.zeros_like(u)
                    g[rec] = u[dev] - u[rec]
                    rows.append(np.moveaxis(g, 0, i).ravel())
    if not rows:  # single-action players under CE have nothing to deviate to
        return np.zeros((0, game.shape.num_joint_actions))
    return np.array(rows)


def max_welfare_equilibrium(game: Game, concept, limit: int = 10**4, tol: float = 1e-8):
    """Joint strategy maximising social welfare over the CE or CCE polytope.

    Returns ``(JointStrategy, welfare)``.
    """
    concept = SolutionConcept.parse(concept)
    d = game.shape.num_joint_actions
    if d > limit:
        raise CapacityError(f"{d} joint actions exceed LP limit {limit}")
    G = equilibrium_constraints(game, concept)
    lp = LinearProgram(
        objective=game.payoffs.sum(axis=0).ravel(),
        A_eq=np.ones((1, d)),
        b_eq=np.ones(1),
        G=G,
        h=np.zeros(G.shape[0]),
    )
    res = simplex_solve(lp)
    if res.status is not Status.OPTIMAL:
        raise SolverError(f"max-welfare {concept.value} LP returned {res.status.value}")
    probs = np.clip(res.solution, 0.0, None)
    pi = JointStrategy((probs / probs.sum()).reshape(game.action_counts))
    gap = approximation(game, pi, concept)
    if gap > tol:
        raise SolverError(f"LP solution violates {concept.value} constraints by {gap}")
    welfare = float(np.sum(game.payoffs * pi.probs[None]))
    return pi, welfare


def max_welfare_pure_ne(game: Game) -> float:
    """Best social welfare over pure equilibria (-inf if there are none)."""
    best = -math.inf
    for a in enumerate_pure_ne(game):
        best = max(best, float(game.payoffs[(slice(None),) + a].sum()))
    return best
