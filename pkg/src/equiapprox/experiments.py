"""Scripted checks of how permutation symmetry shapes equilibrium approximators.

Each experiment returns an :class:`ExperimentReport` whose verdicts are
booleans computed from the numbers stored alongside them.
"""

from __future__ import annotations

import csv
import json
import math
import warnings
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .approximator import (
    ApproximatorModel,
    EquivarianceMode,
    HeadKind,
    forward_many,
)
from .distributions import RNG_ALGORITHM, DistributionSpec, coordination, make_rng, sample, swr3x3
from .game import (
    Game,
    GamePermutation,
    GameShape,
    PlayerPermutation,
    ProductStrategy,
    enumerate_game_permutations,
    is_invariant,
    orbit,
    permute_game,
    permute_joint,
    permute_product,
)
from .metrics import SolutionConcept, approximation, exploitabilities, social_welfare
from .solvers import DegenerateGameWarning, support_enumeration_bimatrix
from .training import TrainConfig, evaluate, train

ORBIT_SLACK = 1e-9
GENERALIZATION_SLACK = 0.02


class PreconditionError(ValueError):
    pass


@dataclass
class ExperimentReport:
    experiment_id: str
    config: dict
    arms: dict = field(default_factory=dict)  # arm name -> {metric: value}
    verdicts: dict = field(default_factory=dict)  # check name -> bool
    rows: list = field(default_factory=list)  # per-item table, written as CSV
    artifacts: list = field(default_factory=list)
    notes: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(self.verdicts.values())

    def to_dict(self) -> dict:
        return asdict(self)

    def save(self, out_dir, seed: int | None = None) -> list[Path]:
        """Write ``<id>[_seed<k>].json`` and, when there are rows, a matching CSV."""
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        stem = self.experiment_id if seed is None else f"{self.experiment_id}_seed{seed}"
        paths = [out / f"{stem}.json"]
        if self.rows:
            paths.append(out / f"{stem}.csv")
        self.artifacts = [str(p) for p in paths]
        paths[0].write_text(json.dumps(self.to_dict(), indent=2, default=_jsonable) + "\n")
        if self.rows:
            with paths[1].open("w", newline="") as fh:
                w = csv.DictWriter(fh, fieldnames=list(self.rows[0]))
                w.writeheader()
                w.writerows(self.rows)
        return paths


def _jsonable(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if hasattr(obj, "value"):
        return obj.value
    raise TypeError(f"cannot serialise {type(obj).__name__}")


# -- orbit averaging benefit ---------------------------------------------------

def orbit_images(game: Game) -> list[Game]:
    """Images of ``game`` under every group element, with multiplicity."""
    return [permute_game(game, rho) for rho in enumerate_game_permutations(game.shape)]


def _orbit_scores(f, images: Sequence[Game], concept: SolutionConcept, score: str) -> np.ndarray:
    if isinstance(f, ApproximatorModel):
        outs = forward_many(f, images)
    else:
        outs = [f(g) for g in images]
    if score == "max":
        return np.array([approximation(g, s, concept) for g, s in zip(images, outs)])
    return np.array([exploitabilities(g, s, concept).sum() for g, s in zip(images, outs)])


# variant -> (concept, raw mode, projected modes, score)
ORBIT_VARIANTS = {
    "Q_cce": (SolutionConcept.CCE, EquivarianceMode.GENERAL, [EquivarianceMode.PE], "max"),
    "P_on_opi": (SolutionConcept.NE, EquivarianceMode.OPI, [EquivarianceMode.BOTH], "max"),
    "O_on_ppe": (SolutionConcept.NE, EquivarianceMode.PPE, [EquivarianceMode.BOTH], "max"),
    "constant_sum": (SolutionConcept.NE, EquivarianceMode.GENERAL, [EquivarianceMode.OPI, EquivarianceMode.PPE], "sum"),
}


def exp_orbit_benefit(
    base_games: Sequence[Game],
    variant: str = "Q_cce",
    model: ApproximatorModel | None = None,
    seed: int = 0,
    hidden: Sequence[int] = (16, 16),
) -> ExperimentReport:
    """Orbit-mean approximation of a projected model vs. the model it projects.

    Variants: ``Q_cce`` (joint head, CCE), ``P_on_opi`` (P applied to an OPI
    model), ``O_on_ppe`` (O applied to a PPE model, two players), and
    ``constant_sum`` (O and P separately on a general model, summed
    exploitability, two-player constant-sum games). The raw model shares
    its base network with the projected one; the verdict must hold for
    every base game.
    """
    if variant not in ORBIT_VARIANTS:
        raise ValueError(f"unknown variant {variant!r}; choose from {sorted(ORBIT_VARIANTS)}")
    if not base_games:
        raise ValueError("no base games")
    concept, raw_mode, proj_modes, score = ORBIT_VARIANTS[variant]
    shape = base_games[0].shape
    if variant in ("O_on_ppe", "constant_sum") and shape.num_players != 2:
        raise PreconditionError(f"variant {variant} is stated for two-player games")
    if variant == "constant_sum":
        for g in base_games:
            total = g.payoffs.sum(axis=0)
            if not np.allclose(total, total.flat[0], atol=1e-12):
                raise PreconditionError("constant_sum variant needs constant-sum games")
    head = HeadKind.JOINT if concept is SolutionConcept.CCE else HeadKind.PRODUCT
    if model is None:
        model = ApproximatorModel.create(shape, head, raw_mode, hidden=hidden, seed=seed)
    if model.head is not head:
        raise ValueError(f"variant {variant} needs a {head.value} head")
    raw = model.with_mode(raw_mode)
    projected = {m.value: model.with_mode(m) for m in proj_modes}

    report = ExperimentReport(
        f"orbit_benefit_{variant}",
        {"variant": variant, "concept": concept.value, "shape": str(shape), "num_games": len(base_games),
         "seed": seed, "hidden": list(model.hidden), "score": score, "rng": RNG_ALGORITHM},
    )
    worst = {name: math.inf for name in projected}
    for k, game in enumerate(base_games):
        images = orbit_images(game)
        raw_mean = float(_orbit_scores(raw, images, concept, score).mean())
        row = {"game": k, "raw": raw_mean}
        for name, f in projected.items():
            proj_mean = float(_orbit_scores(f, images, concept, score).mean())
            row[name] = proj_mean
            worst[name] = min(worst[name], raw_mean - proj_mean)
        report.rows.append(row)
    for name in projected:
        slack = np.array([r["raw"] - r[name] for r in report.rows])
        report.arms[name] = {
            "mean_raw": float(np.mean([r["raw"] for r in report.rows])),
            "mean_projected": float(np.mean([r[name] for r in report.rows])),
            "min_slack": float(slack.min()),
            "fraction_holding": float(np.mean(slack >= -ORBIT_SLACK)),
        }
        report.verdicts[f"{name}_never_worse"] = bool(worst[name] >= -ORBIT_SLACK)
    return report


# -- equilibrium selection -----------------------------------------------------

def _nearest(strategy: ProductStrategy, candidates: Sequence[ProductStrategy]):
    if not candidates:
        return None, math.inf
    dists = [strategy.distance(c) for c in candidates]
    k = int(np.argmin(dists))
    return k, float(dists[k])


def exp_selection(
    game: Game,
    rho: GamePermutation,
    seed: int = 0,
    hidden: Sequence[int] = (16, 16),
    train_steps: int = 300,
) -> ExperimentReport:
    """What symmetric approximators can output on a rho-invariant game.

    Both-mode (product) and PE-mode (joint) models are built from random
    weights and their symmetry constraints checked. A general model is
    trained on the single game to show which equilibrium an unconstrained
    learner may reach.
    """
    if isinstance(rho, PlayerPermutation):
        rho = GamePermutation([rho])
    if rho.is_identity() or not is_invariant(game, rho):
        raise PreconditionError("game must be invariant under a non-identity permutation rho")
    shape = game.shape
    both = ApproximatorModel.create(shape, HeadKind.PRODUCT, EquivarianceMode.BOTH, hidden=hidden, seed=seed)
    pe = ApproximatorModel.create(shape, HeadKind.JOINT, EquivarianceMode.PE, hidden=hidden, seed=seed + 1)
    sigma = both(game)
    pi = pe(game)
    sigma_gap = max(float(np.abs(a - b).max()) for a, b in zip(sigma, permute_product(sigma, rho)))
    pi_gap = float(np.abs(pi.probs - permute_joint(pi, rho).probs).max())

    report = ExperimentReport(
        "selection",
        {"shape": str(shape), "rho": [p.map.tolist() if p is not None else None for p in
                                       (rho.get(i) for i in range(shape.num_players))],
         "seed": seed, "hidden": list(hidden), "train_steps": train_steps, "rng": RNG_ALGORITHM},
    )
    report.arms["both"] = {
        "strategy": [v.tolist() for v in sigma],
        "symmetry_gap": sigma_gap,
        "approximation": approximation(game, sigma, SolutionConcept.NE),
        "welfare": social_welfare(game, sigma),
    }
    report.arms["pe"] = {
        "strategy": pi.probs.tolist(),
        "symmetry_gap": pi_gap,
        "approximation": approximation(game, pi, SolutionConcept.CCE),
        "welfare": social_welfare(game, pi),
    }
    report.verdicts["both_symmetric"] = sigma_gap <= 1e-9
    report.verdicts["pe_symmetric"] = pi_gap <= 1e-9

    equilibria = []
    if shape.num_players == 2:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", DegenerateGameWarning)
            equilibria = support_enumeration_bimatrix(game)
        k, dist = _nearest(sigma, equilibria)
        report.arms["both"]["nearest_equilibrium"] = k
        report.arms["both"]["distance_to_nearest"] = dist
        report.arms["equilibria"] = {"strategies": [[v.tolist() for v in s] for s in equilibria]}

    if train_steps > 0:
        general = ApproximatorModel.create(shape, HeadKind.PRODUCT, EquivarianceMode.GENERAL, hidden=hidden, seed=seed + 2)
        trained, trace = train(general, [game], TrainConfig(iterations=train_steps, batch_size=1, lr=0.5, seed=seed))
        out = trained(game)
        arm = {
            "strategy": [v.tolist() for v in out],
            "approximation": approximation(game, out, SolutionConcept.NE),
            "welfare": social_welfare(game, out),
            "final_loss": float(trace.losses()[-1]) if trace.rows else None,
        }
        if equilibria:
            k, dist = _nearest(out, equilibria)
            arm["nearest_equilibrium"] = k
            arm["distance_to_nearest"] = dist
        report.arms["general_trained"] = arm
    return report


def exp_selection_identity(seed: int = 0, **kwargs) -> ExperimentReport:
    """Selection experiment on the 2x2 identity game with both players' actions swapped."""
    from .distributions import identity2x2

    game = identity2x2()
    rho = GamePermutation.from_maps([[1, 0], [1, 0]])
    report = exp_selection(game, rho, seed=seed, **kwargs)
    sigma = np.array(report.arms["both"]["strategy"])
    pi = np.array(report.arms["pe"]["strategy"])
    report.verdicts["both_is_mixed_ne"] = bool(np.abs(sigma - 0.5).max() <= 1e-6)
    report.verdicts["pe_diagonals_equal"] = bool(
        abs(pi[0, 0] - pi[1, 1]) <= 1e-9 and abs(pi[0, 1] - pi[1, 0]) <= 1e-9
    )
    return report


# -- social welfare ratio ------------------------------------------------------

def _cycles(perm: np.ndarray) -> list[list[int]]:
    seen, cycles = set(), []
    for start in range(len(perm)):
        if start in seen:
            continue
        cyc, a = [], start
        while a not in seen:
            seen.add(a)
            cyc.append(a)
            a = int(perm[a])
        cycles.append(sorted(cyc))
    return sorted(cycles)


def symmetry_reduction(game: Game, rho: GamePermutation):
    """Game over rho-cycles where each cycle plays uniformly over its actions.

    Product strategies with sigma_k = rho_k sigma_k are exactly those uniform
    within each cycle, so they correspond one-to-one with strategies of the
    reduced game. Returns ``(reduced_game, lift)`` where ``lift`` maps a
    reduced product strategy back to the original actions.
    """
    shape = game.shape
    groups = [_cycles(m) for m in rho.maps(shape)]
    mixes = []
    for cycles, m in zip(groups, shape.action_counts):
        M = np.zeros((len(cycles), m))
        for c, cyc in enumerate(cycles):
            M[c, cyc] = 1.0 / len(cyc)
        mixes.append(M)
    reduced = game.payoffs
    for i, M in enumerate(mixes):
        reduced = np.moveaxis(np.tensordot(reduced, M, axes=([i + 1], [1])), -1, i + 1)

    def lift(sigma: ProductStrategy) -> ProductStrategy:
        return ProductStrategy(tuple(v @ M for v, M in zip(sigma, mixes)))

    return Game(reduced), lift


def exp_swr(eps: float = 0.05, mode="both", train_steps: int = 0, seed: int = 0) -> ExperimentReport:
    """Best symmetric NE welfare over best NE welfare on the 3x3 eps-game.

    The symmetric NE are found on the reduced game in which actions 0 and 1
    are merged, then lifted and re-checked on the original game.
    """
    if not 0.0 < eps < 0.5:
        raise ValueError("eps must lie in (0, 0.5)")
    mode = EquivarianceMode.parse(mode)
    if mode not in (EquivarianceMode.BOTH, EquivarianceMode.GENERAL):
        raise ValueError("exp_swr compares the both-mode and general classes")
    game = swr3x3(eps)
    rho = GamePermutation.from_maps([[1, 0, 2], [1, 0, 2]])
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DegenerateGameWarning)
        all_ne = support_enumeration_bimatrix(game)
        if mode is EquivarianceMode.BOTH:
            reduced, lift = symmetry_reduction(game, rho)
            candidates = [lift(s) for s in support_enumeration_bimatrix(reduced)]
        else:
            candidates = list(all_ne)
    reachable = [s for s in candidates if approximation(game, s, SolutionConcept.NE) <= 1e-8]
    best = max(social_welfare(game, s) for s in all_ne)
    best_reachable = max(social_welfare(game, s) for s in reachable)
    ratio = best_reachable / best

    report = ExperimentReport(
        "swr",
        {"eps": eps, "mode": mode.value, "train_steps": train_steps, "seed": seed, "rng": RNG_ALGORITHM},
    )
    report.arms["general"] = {"max_ne_welfare": best, "num_ne": len(all_ne)}
    report.arms[mode.value] = {
        "max_reachable_welfare": best_reachable,
        "num_reachable": len(reachable),
        "strategies": [[v.tolist() for v in s] for s in reachable],
    }
    report.arms["ratio"] = {"value": ratio, "expected": eps if mode is EquivarianceMode.BOTH else 1.0}
    report.verdicts["ratio_matches"] = abs(ratio - report.arms["ratio"]["expected"]) <= 1e-6
    report.rows.append({"eps": eps, "max_ne_welfare": best, "max_reachable_welfare": best_reachable, "ratio": ratio})

    if train_steps > 0:
        # secondary arm, reported only
        model = ApproximatorModel.create(game.shape, HeadKind.PRODUCT, mode, hidden=(16, 16), seed=seed)
        trained, _ = train(model, [game], TrainConfig(iterations=train_steps, batch_size=1, lr=0.5, seed=seed))
        out = trained(game)
        report.arms["trained"] = {
            "strategy": [v.tolist() for v in out],
            "approximation": approximation(game, out, SolutionConcept.NE),
            "welfare": social_welfare(game, out),
        }
    return report


def coordination_orbit_welfare(num_players: int, num_actions: int, f=None, seed: int = 0) -> float:
    """Mean welfare of ``f`` over the distinct orbit of the coordination game.

    ``f`` defaults to a constant map returning a seeded random product strategy.
    """
    base = coordination(num_players, num_actions)
    if f is None:
        rng = make_rng(seed)
        sigma = ProductStrategy(tuple(rng.dirichlet(np.ones(num_actions)) for _ in range(num_players)))
        f = lambda _g: sigma  # noqa: E731
    images = orbit(base)
    return float(np.mean([social_welfare(g, f(g)) for g in images]))


def exp_coordination(pairs=((2, 2), (2, 3), (3, 2)), seed: int = 0) -> ExperimentReport:
    """Orbit-mean welfare of OPI approximators on the coordination game."""
    report = ExperimentReport("coordination", {"pairs": [list(p) for p in pairs], "seed": seed, "rng": RNG_ALGORITHM})
    for N, M in pairs:
        expected = N / M ** (N - 1)
        const = coordination_orbit_welfare(N, M, seed=seed)
        model = ApproximatorModel.create(GameShape.of([M] * N), HeadKind.PRODUCT, EquivarianceMode.OPI,
                                         hidden=(8,), seed=seed)
        projected = coordination_orbit_welfare(N, M, f=model)
        report.rows.append({"N": N, "M": M, "orbit_size": len(orbit(coordination(N, M))),
                            "constant": const, "opi_model": projected, "expected": expected})
        report.verdicts[f"N{N}_M{M}"] = abs(const - expected) <= 1e-9 and abs(projected - expected) <= 1e-9
    return report


# -- generalization ------------------------------------------------------------

def exp_generalization(
    shape: GameShape,
    m_train: int = 100,
    m_test: int = 1000,
    seeds: Sequence[int] = (0, 1, 2, 3, 4),
    concept=SolutionConcept.NE,
    config: TrainConfig | None = None,
    hidden: Sequence[int] = (64, 64),
) -> ExperimentReport:
    """Generalization gap of a general model vs. an equivariant one on orbit-invariant data.

    Both arms start from the same weights and see the same data. A sanity
    surrogate only: a larger gap for the equivariant arm triggers a warning.
    """
    concept = SolutionConcept.parse(concept)
    if len(seeds) < 3:
        raise ValueError("use at least 3 seeds")
    if concept is SolutionConcept.NE:
        head, eq_mode = HeadKind.PRODUCT, EquivarianceMode.BOTH
    elif concept is SolutionConcept.CCE:
        head, eq_mode = HeadKind.JOINT, EquivarianceMode.PE
    else:
        raise ValueError("generalization experiment trains NE or CCE models")
    config = config or TrainConfig()
    arms = {"general": EquivarianceMode.GENERAL, eq_mode.value: eq_mode}
    report = ExperimentReport(
        "generalization",
        {"shape": str(shape), "m_train": m_train, "m_test": m_test, "seeds": list(seeds),
         "concept": concept.value, "train": config.to_dict(), "hidden": list(hidden),
         "rng": RNG_ALGORITHM, "surrogate": True},
    )
    for seed in seeds:
        data = sample(DistributionSpec("orbit", shape, seed=10_000 + seed), m_train + m_test)
        train_set, test_set = data[:m_train], data[m_train:]
        for arm, mode in arms.items():
            model = ApproximatorModel.create(shape, head, mode, hidden=hidden, seed=seed)
            cfg = TrainConfig(**{**config.to_dict(), "seed": seed, "concept": concept, "mode": mode})
            trained, _ = train(model, train_set, cfg)
            tr = evaluate(trained, train_set, concept)
            te = evaluate(trained, test_set, concept)
            report.rows.append({"seed": seed, "arm": arm, "train_mean": tr.mean, "test_mean": te.mean,
                                "gap": te.mean - tr.mean})
    for arm in arms:
        gaps = np.array([r["gap"] for r in report.rows if r["arm"] == arm])
        tests = np.array([r["test_mean"] for r in report.rows if r["arm"] == arm])
        report.arms[arm] = {"mean_gap": float(gaps.mean()), "std_gap": float(gaps.std()),
                            "mean_test": float(tests.mean())}
    ok = report.arms[eq_mode.value]["mean_gap"] <= report.arms["general"]["mean_gap"] + GENERALIZATION_SLACK
    report.verdicts["equivariant_gap_not_larger"] = bool(ok)
    if not ok:
        warnings.warn(
            f"equivariant arm gap {report.arms[eq_mode.value]['mean_gap']:.4f} exceeds general arm gap "
            f"{report.arms['general']['mean_gap']:.4f} + {GENERALIZATION_SLACK}",
            RuntimeWarning,
            stacklevel=2,
        )
    return report
