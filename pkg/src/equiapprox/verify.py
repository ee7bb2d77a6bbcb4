"""Executable property suite behind ``equiapprox verify``.

Every check returns a :class:`CheckResult` holding the worst observed
value and the tolerance it was held to.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .approximator import (
    ApproximatorModel,
    EquivarianceMode,
    HeadKind,
    batch_loss,
    batch_loss_and_grad,
    check_equivariance,
    project_both,
    project_O,
    project_P,
    project_Q,
)
from .distributions import DistributionSpec, make_rng, sample
from .experiments import exp_orbit_benefit
from .game import (
    Game,
    GameShape,
    JointStrategy,
    ProductStrategy,
    enumerate_game_permutations,
    permute_game,
    permute_joint,
    permute_product,
    random_game_permutation,
)
from .metrics import (
    SolutionConcept,
    approximation,
    exploitabilities,
    exploitability_ce,
    exploitability_ce_enumerated,
)
from .mlp import MlpParams
from .solvers import enumerate_pure_ne

NE, CE, CCE = SolutionConcept.NE, SolutionConcept.CE, SolutionConcept.CCE


@dataclass
class CheckResult:
    name: str
    passed: bool
    worst: float
    tolerance: float
    count: int
    seconds: float = 0.0

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"{status} {self.name}: worst={self.worst:.3e} tol={self.tolerance:.1e} n={self.count} ({self.seconds:.1f}s)"


# -- random objects ------------------------------------------------------------

def random_shape(rng, players=(2, 3), max_actions: int = 4) -> GameShape:
    n = int(rng.choice(players))
    return GameShape.of(rng.integers(1, max_actions + 1, size=n).tolist())


def random_game(shape: GameShape, rng) -> Game:
    return Game(rng.random((shape.num_players,) + shape.action_counts))


def random_product(shape: GameShape, rng) -> ProductStrategy:
    # sparse-ish draws so corners and faces get exercised too
    alpha = float(rng.choice([0.2, 1.0, 5.0]))
    return ProductStrategy(tuple(rng.dirichlet(np.full(m, alpha)) for m in shape.action_counts))


def random_joint(shape: GameShape, rng) -> JointStrategy:
    alpha = float(rng.choice([0.2, 1.0, 5.0]))
    return JointStrategy(rng.dirichlet(np.full(shape.num_joint_actions, alpha)).reshape(shape.action_counts))


def _l1(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.abs(a - b).sum())


# -- metric properties ---------------------------------------------------------

def permutation_invariance(count: int, rng) -> float:
    """Worst |E(rho u, rho s) - E(u, s)| over NE, CE and CCE."""
    worst = 0.0
    for _ in range(count):
        shape = random_shape(rng)
        game = random_game(shape, rng)
        rho = random_game_permutation(shape, rng)
        pg = permute_game(game, rho)
        sigma = random_product(shape, rng)
        worst = max(worst, abs(approximation(pg, permute_product(sigma, rho), NE) - approximation(game, sigma, NE)))
        pi = random_joint(shape, rng)
        ppi = permute_joint(pi, rho)
        for c in (CE, CCE):
            worst = max(worst, abs(approximation(pg, ppi, c) - approximation(game, pi, c)))
    return worst


def lipschitz_slack(count: int, rng) -> dict[str, float]:
    """Smallest bound - |dE| per concept (negative means a violation)."""
    slack = {c.value: np.inf for c in (NE, CE, CCE)}
    for _ in range(count):
        shape = random_shape(rng)
        game = random_game(shape, rng)
        n = shape.num_players
        s1, s2 = random_product(shape, rng), random_product(shape, rng)
        d = s1.distance(s2)
        diff = abs(approximation(game, s1, NE) - approximation(game, s2, NE))
        slack["NE"] = min(slack["NE"], 2 * n * d - diff)
        p1, p2 = random_joint(shape, rng), random_joint(shape, rng)
        d = _l1(p1.probs, p2.probs)
        for c in (CE, CCE):
            diff = abs(approximation(game, p1, c) - approximation(game, p2, c))
            slack[c.value] = min(slack[c.value], 2 * d - diff)
    return slack


def linearity_gap(count: int, rng) -> tuple[float, float]:
    """(worst linearity error in own strategy, worst convexity violation in others')."""
    lin, convex = 0.0, -np.inf
    for _ in range(count):
        shape = random_shape(rng)
        game = random_game(shape, rng)
        n = shape.num_players
        i = int(rng.integers(n))
        j = int((i + 1 + rng.integers(n - 1)) % n)
        base = random_product(shape, rng)
        a, b = random_product(shape, rng), random_product(shape, rng)
        p = float(rng.random())

        def with_player(k, vec):
            vecs = list(base.per_player)
            vecs[k] = vec
            return ProductStrategy(tuple(vecs))

        mixed = with_player(i, p * a[i] + (1 - p) * b[i])
        e = lambda s: exploitabilities(game, s, NE)[i]  # noqa: E731
        lin = max(lin, abs(e(mixed) - (p * e(with_player(i, a[i])) + (1 - p) * e(with_player(i, b[i])))))
        mixed = with_player(j, p * a[j] + (1 - p) * b[j])
        convex = max(convex, e(mixed) - (p * e(with_player(j, a[j])) + (1 - p) * e(with_player(j, b[j]))))
    return lin, convex


def ce_decomposition_gap(count: int, rng, max_actions: int = 4) -> float:
    worst = 0.0
    for _ in range(count):
        shape = GameShape.of(rng.integers(1, max_actions + 1, size=2).tolist())
        game = random_game(shape, rng)
        pi = random_joint(shape, rng)
        for i in range(2):
            worst = max(worst, abs(exploitability_ce(game, pi, i) - exploitability_ce_enumerated(game, pi, i)))
    return worst


def pure_ne_crosscheck(count: int, rng) -> float:
    """Worst NE approximation over enumerated pure equilibria."""
    worst = 0.0
    for _ in range(count):
        shape = random_shape(rng)
        # coarse payoffs create ties and therefore more pure equilibria
        game = Game(rng.integers(0, 3, size=(shape.num_players,) + shape.action_counts) / 2.0)
        for a in enumerate_pure_ne(game):
            worst = max(worst, approximation(game, ProductStrategy.pure(shape, a), NE))
    return worst


# -- approximator properties ---------------------------------------------------

PROJECTED = [
    (HeadKind.PRODUCT, EquivarianceMode.OPI),
    (HeadKind.PRODUCT, EquivarianceMode.PPE),
    (HeadKind.PRODUCT, EquivarianceMode.BOTH),
    (HeadKind.JOINT, EquivarianceMode.PE),
]

SMALL_SHAPES = [GameShape.of([2, 2]), GameShape.of([2, 3]), GameShape.of([2, 2, 2])]


def _strategy_gap(a, b) -> float:
    if isinstance(a, JointStrategy):
        return float(np.abs(a.probs - b.probs).max())
    return max(float(np.abs(x - y).max()) for x, y in zip(a, b))


def equivariance_violation(count: int, rng, shapes=SMALL_SHAPES, hidden=(8, 8)) -> float:
    """Worst check_equivariance over projected models, every group element."""
    worst = 0.0
    for k in range(count):
        shape = shapes[k % len(shapes)]
        game = random_game(shape, rng)
        for head, mode in PROJECTED:
            model = ApproximatorModel.create(shape, head, mode, hidden=hidden, seed=int(rng.integers(2**31)))
            for rho in enumerate_game_permutations(shape):
                worst = max(worst, check_equivariance(model, game, rho, mode))
    return worst


def projection_algebra(count: int, rng, shapes=SMALL_SHAPES, hidden=(8, 8)) -> dict[str, float]:
    """Idempotence, fixed points, and agreement of the mode formulas with the operators."""
    out = {"idempotence": 0.0, "fixed_point": 0.0, "mode_matches_operator": 0.0}

    def bump(key, value):
        out[key] = max(out[key], value)

    for k in range(count):
        shape = shapes[k % len(shapes)]
        game = random_game(shape, rng)
        seed = int(rng.integers(2**31))
        prod = ApproximatorModel.create(shape, HeadKind.PRODUCT, EquivarianceMode.GENERAL, hidden=hidden, seed=seed)
        joint = ApproximatorModel.create(shape, HeadKind.JOINT, EquivarianceMode.GENERAL, hidden=hidden, seed=seed)
        ops: list[tuple[Callable, ApproximatorModel, EquivarianceMode]] = [
            (project_O, prod, EquivarianceMode.OPI),
            (project_P, prod, EquivarianceMode.PPE),
            (project_Q, joint, EquivarianceMode.PE),
        ]
        for op, base, mode in ops:
            once = op(base, game)
            twice = op(lambda g, op=op, base=base: op(base, g), game)
            bump("idempotence", _strategy_gap(once, twice))
            projected = base.with_mode(mode)
            bump("mode_matches_operator", _strategy_gap(projected(game), once))
            bump("fixed_point", _strategy_gap(op(projected, game), projected(game)))
        both = prod.with_mode(EquivarianceMode.BOTH)
        bump("mode_matches_operator", _strategy_gap(both(game), project_both(prod, game)))
        for op in (project_O, project_P):
            bump("fixed_point", _strategy_gap(op(both, game), both(game)))
    return out


def gradient_check(count: int, rng, hidden=(6, 6), h: float = 1e-5, min_margin: float = 1e-6) -> tuple[float, int]:
    """Worst relative error between the analytic gradient and central differences.

    Points whose argmax margin is at most ``min_margin`` are redrawn.
    Returns ``(worst_relative_error, points_checked)``.
    """
    configs = [
        (GameShape.of([2, 2]), HeadKind.PRODUCT, EquivarianceMode.GENERAL),
        (GameShape.of([2, 2]), HeadKind.PRODUCT, EquivarianceMode.BOTH),
        (GameShape.of([2, 3]), HeadKind.PRODUCT, EquivarianceMode.OPI),
        (GameShape.of([2, 3]), HeadKind.PRODUCT, EquivarianceMode.PPE),
        (GameShape.of([2, 2]), HeadKind.JOINT, EquivarianceMode.GENERAL),
        (GameShape.of([2, 2]), HeadKind.JOINT, EquivarianceMode.PE),
        (GameShape.of([2, 2, 2]), HeadKind.PRODUCT, EquivarianceMode.BOTH),
    ]
    worst, checked, attempts = 0.0, 0, 0
    while checked < count:
        attempts += 1
        if attempts > 20 * count:
            raise RuntimeError("could not find enough points with a clear argmax margin")
        shape, head, mode = configs[checked % len(configs)]
        concept = NE if head is HeadKind.PRODUCT else CCE
        model = ApproximatorModel.create(shape, head, mode, hidden=hidden, seed=int(rng.integers(2**31)), output_scale=3.0)
        game = random_game(shape, rng)
        lg = batch_loss_and_grad(model, [game], concept)
        if lg.margins.min() <= min_margin:
            continue
        sizes = model.params.sizes
        flat = model.params.flat()
        fd = np.empty_like(flat)
        for k in range(flat.size):
            e = np.zeros_like(flat)
            e[k] = h
            up = batch_loss(model.with_params(MlpParams.from_flat(sizes, flat + e)), [game], concept)
            down = batch_loss(model.with_params(MlpParams.from_flat(sizes, flat - e)), [game], concept)
            fd[k] = (up - down) / (2 * h)
        g = lg.grad.flat()
        denom = max(np.linalg.norm(g), np.linalg.norm(fd), 1e-12)
        worst = max(worst, float(np.linalg.norm(g - fd) / denom))
        checked += 1
    return worst, checked


# -- suite ---------------------------------------------------------------------

def _timed(name: str, fn, tol: float, count: int, compare=lambda w, t: w <= t) -> CheckResult:
    start = time.perf_counter()
    worst = float(fn())
    return CheckResult(name, bool(compare(worst, tol)), worst, tol, count, time.perf_counter() - start)


def run_suite(quick: bool = False, seed: int = 0) -> list[CheckResult]:
    rng = make_rng(seed)
    scale = 1 if not quick else 10
    n_metric = 1000 // scale
    results = [
        _timed("permutation invariance of approximation", lambda: permutation_invariance(n_metric, rng), 1e-12, n_metric),
    ]
    slack = lipschitz_slack(n_metric, rng)
    for concept, value in slack.items():
        results.append(CheckResult(f"Lipschitz bound {concept}", value >= -1e-9, -value + 0.0, 1e-9, n_metric))
    lin, convex = linearity_gap(n_metric, rng)
    results.append(CheckResult("linearity in own strategy", lin <= 1e-12, lin, 1e-12, n_metric))
    results.append(CheckResult("convexity in other strategies", convex <= 1e-12, convex, 1e-12, n_metric))
    results.append(_timed("CE decomposition vs enumeration", lambda: ce_decomposition_gap(200 // scale, rng), 1e-12, 200 // scale))
    results.append(_timed("pure NE solver cross-check", lambda: pure_ne_crosscheck(200 // scale, rng), 1e-8, 200 // scale))
    n_model = max(100 // scale, 3)
    results.append(_timed("projected models are equivariant", lambda: equivariance_violation(n_model, rng), 1e-9, n_model))
    algebra = projection_algebra(max(30 // scale, 3), rng)
    for key, value in algebra.items():
        results.append(CheckResult(f"projection {key}", value <= 1e-12, value, 1e-12, max(30 // scale, 3)))
    n_orbit = max(200 // scale, 5)
    bases = sample(DistributionSpec("uniform", GameShape.of([2, 2]), seed=seed + 1), n_orbit)
    bases3 = sample(DistributionSpec("uniform", GameShape.of([2, 2, 2]), seed=seed + 2), max(n_orbit // 4, 3))
    constant_sum = [Game(np.stack([g.payoffs[0], 1.0 - g.payoffs[0]])) for g in bases[: max(n_orbit // 2, 3)]]
    for variant, games in [("Q_cce", bases), ("Q_cce", bases3), ("P_on_opi", bases), ("P_on_opi", bases3),
                           ("O_on_ppe", bases), ("constant_sum", constant_sum)]:
        start = time.perf_counter()
        report = exp_orbit_benefit(games, variant, seed=seed)
        worst = -min(arm["min_slack"] for arm in report.arms.values())
        results.append(CheckResult(f"orbit benefit {variant} {games[0].shape}", report.passed, worst, 1e-9,
                                   len(games), time.perf_counter() - start))
    n_grad = max(100 // scale, 7)
    start = time.perf_counter()
    worst, checked = gradient_check(n_grad, rng)
    results.append(CheckResult("gradient vs finite differences", worst <= 1e-4, worst, 1e-4, checked,
                               time.perf_counter() - start))
    return results
